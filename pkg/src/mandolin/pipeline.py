"""Stage orchestration: enrich -> mine -> interpret -> ground -> infer -> evaluate.

Every stage reads its inputs from the artifacts of earlier stages and writes
its own, so a run can stop and resume at any stage boundary with identical
results.  Artifacts live in the output directory:

    graph.nt          enriched model graph
    rules_mined.tsv   every mined rule with statistics
    rules.tsv         rules kept after the head-coverage filter, with weights
    hidden.nt         derived candidate atoms
    factors.tsv       ground factors
    scores.tsv        every hidden atom with raw and normalized marginals
    predictions.tsv   atoms scoring above tau
    report.csv        MRR and Hits@k      (split inputs only)
    ranks.tsv         per-test-triple ranks
    manifest.json     config, timings and counts
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

from . import vocab
from .enrichment import EnrichmentConfig, Resolver, SimilarityConfig, enrich, is_similarity_predicate
from .evaluation import (
    Scorer,
    Split,
    compute_report,
    evaluate,
    load_split,
    load_split_dir,
    read_report,
    write_ranks,
    write_report,
)
from .grounding import build_factor_graph, infer_closure, network_from_dump, read_factor_dump, write_factor_dump
from .inference import (
    InferenceConfig,
    infer,
    predict,
    read_scored_triples,
    warm_up,
    write_predictions,
    write_scores,
)
from .mining import MiningConfig, interpret, mine_rules, read_rules, write_rules
from .rdf import IRI, EncodedGraph, RawTriple, TermDictionary, encode, load_ntriples, write_ntriples

logger = logging.getLogger(__name__)

STAGES = ("enrich", "mine", "interpret", "ground", "infer", "evaluate")
STAGE_SEED_OFFSETS = {name: k for k, name in enumerate(STAGES)}

ARTIFACTS = {
    "enrich": ("graph.nt",),
    "mine": ("rules_mined.tsv",),
    "interpret": ("rules.tsv",),
    "ground": ("hidden.nt", "factors.tsv"),
    "infer": ("scores.tsv", "predictions.tsv"),
    "evaluate": ("report.csv", "ranks.tsv"),
}


class InputError(ValueError):
    """Bad config or unreadable inputs."""


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


# -- config ---------------------------------------------------------------------------

def _flag(value: str) -> bool:
    v = value.strip().lower()
    if v in ("on", "true", "yes", "1"):
        return True
    if v in ("off", "false", "no", "0"):
        return False
    raise InputError(f"expected on/off, got {value!r}")


def parse_stages(text: str) -> tuple[str, ...]:
    """``all``, one stage, ``from-to``, or a contiguous comma list."""
    text = text.strip()
    if text in ("", "all"):
        return STAGES
    if "-" in text:
        lo, hi = (p.strip() for p in text.split("-", 1))
        lo, hi = lo or STAGES[0], hi or STAGES[-1]
        for s in (lo, hi):
            if s not in STAGES:
                raise InputError(f"unknown stage {s!r}")
        i, j = STAGES.index(lo), STAGES.index(hi)
        if i > j:
            raise InputError(f"stage range {text!r} runs backwards")
        return STAGES[i:j + 1]
    names = [s.strip() for s in text.split(",") if s.strip()]
    for s in names:
        if s not in STAGES:
            raise InputError(f"unknown stage {s!r}")
    idx = sorted(STAGES.index(s) for s in names)
    if idx != list(range(idx[0], idx[-1] + 1)) or len(set(idx)) != len(idx):
        raise InputError(f"stage selection {text!r} is not a contiguous range")
    return STAGES[idx[0]:idx[-1] + 1]


@dataclass
class PipelineConfig:
    train: Path | None = None
    valid: Path | None = None
    test: Path | None = None
    graph: Path | None = None
    out: Path = Path("mandolin-out")
    similarity: bool = False
    closure: bool = False
    import_ontologies: bool = False
    import_manifest: Path | None = None
    import_depth: int = 2
    closure_cap: int | None = None
    sim_q: int = 3
    sim_thresholds: tuple[float, ...] = SimilarityConfig().thresholds
    sim_numeric_threshold: float = 1.0
    eta_bar: float = 0.9
    min_support: int = 1
    max_rules: int | None = None
    include_similarity: bool = True
    grounding_cap: int | None = None
    gamma: int | None = None
    burn_in: float = 0.1
    tau: float = 0.5
    chains: int = 1
    seed: int = 0
    stages: tuple[str, ...] = STAGES
    raw_ranks: bool = False
    extra_triples: list[RawTriple] = field(default_factory=list, repr=False)

    def __post_init__(self):
        for name in _PATH_ATTRS:
            v = getattr(self, name)
            if v is not None and not isinstance(v, Path):
                setattr(self, name, Path(v))

    def validate(self) -> "PipelineConfig":
        if not 0.0 <= self.eta_bar <= 1.0:
            raise InputError("eta_bar must lie in [0, 1]")
        if self.gamma is not None and self.gamma < 1:
            raise InputError("gamma must be >= 1")
        if not 0.0 <= self.tau <= 1.0:
            raise InputError("tau must lie in [0, 1]")
        if not 0.0 <= self.burn_in < 1.0:
            raise InputError("burn-in must lie in [0, 1)")
        if self.graph is None and self.train is None:
            raise InputError("config needs input.graph or input.train")
        return self

    @property
    def has_split(self) -> bool:
        return self.train is not None and self.test is not None

    def stage_seed(self, stage: str) -> int:
        return self.seed + STAGE_SEED_OFFSETS[stage]

    def inference_config(self) -> InferenceConfig:
        return InferenceConfig(self.gamma, self.burn_in, self.tau, self.stage_seed("infer"), self.chains)

    def enrichment_config(self) -> EnrichmentConfig:
        resolver = Resolver.from_manifest(self.import_manifest) if self.import_manifest else None
        sim = SimilarityConfig(q=self.sim_q, thresholds=tuple(self.sim_thresholds),
                               numeric_threshold=self.sim_numeric_threshold)
        return EnrichmentConfig(self.similarity, self.import_ontologies, self.closure, sim, resolver,
                                self.import_depth, self.closure_cap)

    def snapshot(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "extra_triples":
                out[f.name] = len(self.extra_triples)
                continue
            v = getattr(self, f.name)
            out[f.name] = str(v) if isinstance(v, Path) else list(v) if isinstance(v, tuple) else v
        return out


# key -> (attribute, converter)
_PATH = Path
_KEYS = {
    "input.train": ("train", _PATH),
    "input.valid": ("valid", _PATH),
    "input.test": ("test", _PATH),
    "input.graph": ("graph", _PATH),
    "output.dir": ("out", _PATH),
    "enrichment.similarity": ("similarity", _flag),
    "enrichment.closure": ("closure", _flag),
    "enrichment.import": ("import_ontologies", _flag),
    "enrichment.import_manifest": ("import_manifest", _PATH),
    "enrichment.import_depth": ("import_depth", int),
    "enrichment.closure_cap": ("closure_cap", int),
    "similarity.q": ("sim_q", int),
    "similarity.thresholds": ("sim_thresholds", lambda v: tuple(float(x) for x in v.split(","))),
    "similarity.numeric_threshold": ("sim_numeric_threshold", float),
    "mining.eta_bar": ("eta_bar", float),
    "mining.min_support": ("min_support", int),
    "mining.max_rules": ("max_rules", int),
    "grounding.include_similarity": ("include_similarity", _flag),
    "grounding.cap": ("grounding_cap", int),
    "inference.gamma": ("gamma", lambda v: int(float(v))),
    "inference.burn_in": ("burn_in", float),
    "inference.tau": ("tau", float),
    "inference.chains": ("chains", int),
    "evaluation.raw": ("raw_ranks", _flag),
    "seed": ("seed", int),
    "stages": ("stages", parse_stages),
}
_PATH_ATTRS = {"train", "valid", "test", "graph", "out", "import_manifest"}


def parse_config(text: str, base_dir: str | Path = ".") -> PipelineConfig:
    """``key = value`` lines; ``#`` starts a comment; relative paths resolve against ``base_dir``."""
    cfg = PipelineConfig()
    base = Path(base_dir)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"config line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _KEYS:
            raise InputError(f"config line {lineno}: unknown key {key!r}")
        attr, conv = _KEYS[key]
        try:
            v = conv(value)
        except (ValueError, InputError) as e:
            raise InputError(f"config line {lineno}: bad value for {key}: {e}") from None
        if attr in _PATH_ATTRS and not v.is_absolute():
            v = base / v
        setattr(cfg, attr, v)
    return cfg


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read config {path}: {e}") from None
    return parse_config(text, path.parent)


# -- manifest -------------------------------------------------------------------------

@dataclass
class RunManifest:
    config: dict
    seed: int
    timings: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    stages_run: list[str] = field(default_factory=list)
    failed: str | None = None
    error: str | None = None

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def count_lines(path: str | Path, header: bool = False) -> int:
    with open(path, encoding="utf-8") as fh:
        n = sum(1 for line in fh if line.strip())
    return n - 1 if header and n else n


# -- stage helpers --------------------------------------------------------------------

def _load(path: Path) -> list[RawTriple]:
    # internal artifacts keep their blank-node labels verbatim
    return load_ntriples(path, scope_blanks=False)


def _input_raw(config: PipelineConfig) -> list[RawTriple]:
    paths = [config.graph] if config.graph is not None else [p for p in (config.train, config.valid) if p]
    raw: list[RawTriple] = []
    for p in paths:
        if not Path(p).exists():
            raise InputError(f"input file not found: {p}")
        raw.extend(load_ntriples(p))
    raw.extend(config.extra_triples)
    return raw


def load_model_graph(out: Path) -> EncodedGraph:
    return encode(_load(out / "graph.nt"))


def _write_graph(graph: EncodedGraph, path: Path) -> int:
    return write_ntriples(graph.iter_decoded(), path)


def _similarity_head(rule, dictionary: TermDictionary) -> bool:
    return is_similarity_predicate(dictionary.term(rule.c).lexical)


def load_network(out: Path):
    """Model graph, hidden atoms and network rebuilt from stage artifacts."""
    graph = load_model_graph(out)
    d = graph.dictionary.copy()
    hidden = {d.encode_triple(t) for t in _load(out / "hidden.nt")}
    net = network_from_dump(read_factor_dump(out / "factors.tsv"), graph, hidden, d)
    return graph, net


def load_eval_split(config: PipelineConfig) -> Split:
    for p in (config.train, config.valid, config.test):
        if p is not None and not Path(p).exists():
            raise InputError(f"split file not found: {p}")
    if config.valid is None:
        empty = config.out / "_empty.nt"
        empty.write_text("", encoding="utf-8")
        return load_split(config.train, empty, config.test)
    return load_split(config.train, config.valid, config.test)


def scorer_for(split: Split, graph: EncodedGraph, scores: dict) -> Scorer:
    """Re-key decoded scores and the model graph onto the split dictionary."""
    d = split.dictionary
    hidden = {d.encode_triple(t): v for t, v in scores.items()}
    evidence = {d.encode_triple(t) for t in graph.iter_decoded()}
    return Scorer(hidden, evidence)


def _decoded_scores(table, dictionary: TermDictionary) -> dict:
    return {dictionary.decode_triple(t): v for t, v in table.scores().items()}


# -- stages ---------------------------------------------------------------------------

def _stage_enrich(config: PipelineConfig, counts: dict):
    graph = encode(_input_raw(config))
    graph = enrich(graph, config.enrichment_config())
    counts["edges"] = _write_graph(graph, config.out / "graph.nt")
    counts["nodes"] = len(graph.nodes())


def _stage_mine(config: PipelineConfig, counts: dict):
    graph = load_model_graph(config.out)
    rules = mine_rules(graph, MiningConfig(min_head_coverage=config.eta_bar, min_support=config.min_support,
                                           max_rules=config.max_rules))
    counts["rules_mined"] = write_rules(rules, config.out / "rules_mined.tsv", graph.dictionary)


def _stage_interpret(config: PipelineConfig, counts: dict):
    d = TermDictionary()
    rules = interpret(read_rules(config.out / "rules_mined.tsv", d), config.eta_bar)
    if not config.include_similarity:
        rules = [r for r in rules if not _similarity_head(r, d)]
    counts["rules"] = write_rules(rules, config.out / "rules.tsv", d)


def _stage_ground(config: PipelineConfig, counts: dict):
    graph = load_model_graph(config.out)
    d = graph.dictionary.copy()
    rules = read_rules(config.out / "rules.tsv", d)
    graph = graph.with_triples((), d)
    hidden = infer_closure(graph, rules, config.grounding_cap)
    net = build_factor_graph(graph, rules, hidden, d)
    counts["hidden"] = write_ntriples((d.decode_triple(t) for t in net.hidden_triples()), config.out / "hidden.nt")
    counts["factors"] = write_factor_dump(net, config.out / "factors.tsv")


def _stage_infer(config: PipelineConfig, counts: dict):
    graph, net = load_network(config.out)
    table = infer(net, config.inference_config())
    write_scores(table, config.out / "scores.tsv", net.dictionary)
    counts["predictions"] = write_predictions(predict(table, config.tau), config.out / "predictions.tsv",
                                              net.dictionary)


def _stage_evaluate(config: PipelineConfig, counts: dict):
    if not config.has_split:
        logger.info("no test split configured; evaluation skipped")
        return
    split = load_eval_split(config)
    graph = load_model_graph(config.out)
    scores = dict(read_scored_triples(config.out / "scores.tsv"))
    report, results = evaluate(split, scorer_for(split, graph, scores), filtered=not config.raw_ranks)
    write_report(report, config.out / "report.csv")
    counts["test"] = write_ranks(results, config.out / "ranks.tsv", split.dictionary)


_RUNNERS = {
    "enrich": _stage_enrich,
    "mine": _stage_mine,
    "interpret": _stage_interpret,
    "ground": _stage_ground,
    "infer": _stage_infer,
    "evaluate": _stage_evaluate,
}


def run_pipeline(config: PipelineConfig) -> RunManifest:
    """Run the selected stages in order; the manifest is written even on failure."""
    config.validate()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    previous = RunManifest.read(manifest_path) if manifest_path.exists() else None
    manifest = RunManifest(config.snapshot(), config.seed)
    if previous is not None:
        manifest.timings.update(previous.timings)
        manifest.counts.update(previous.counts)
    for stage in config.stages:
        t0 = time.perf_counter()
        try:
            _RUNNERS[stage](config, manifest.counts)
        except InputError:
            manifest.failed, manifest.error = stage, "input error"
            manifest.write(manifest_path)
            raise
        except FileNotFoundError as e:
            manifest.failed, manifest.error = stage, str(e)
            manifest.write(manifest_path)
            raise InputError(f"stage {stage}: missing artifact {e.filename}") from e
        except Exception as e:
            manifest.failed, manifest.error = stage, f"{type(e).__name__}: {e}"
            manifest.write(manifest_path)
            raise StageError(stage, e) from e
        manifest.timings[stage] = time.perf_counter() - t0
        manifest.stages_run.append(stage)
        logger.info("stage %s done in %.2fs", stage, manifest.timings[stage])
    manifest.write(manifest_path)
    return manifest


# -- gamma sweep ----------------------------------------------------------------------

@dataclass
class SweepRow:
    gamma: int
    hits_at_10: float
    seconds: float


def sweep_gamma(config: PipelineConfig, gammas: Sequence[int], repeats: int = 1,
                csv_path: str | Path | None = None) -> list[SweepRow]:
    """Inference plus evaluation per gamma over one shared grounding.

    Earlier stages run first if their artifacts are missing.  ``seconds`` is
    the fastest of ``repeats`` timings of inference plus evaluation.
    """
    if not gammas:
        raise InputError("gamma list is empty")
    if not config.has_split:
        raise InputError("gamma sweep needs a train/test split")
    out = Path(config.out)
    if not all((out / f).exists() for f in ("graph.nt", "hidden.nt", "factors.tsv")):
        upto = STAGES[:STAGES.index("ground") + 1]
        run_pipeline(_replace_stages(config, upto))
    graph, net = load_network(out)
    split = load_eval_split(config)
    evidence = {split.dictionary.encode_triple(t) for t in graph.iter_decoded()}
    warm_up()
    rows = []
    for g in gammas:
        best, hits = float("inf"), float("nan")
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            icfg = config.inference_config()
            icfg.gamma = int(g)
            table = infer(net, icfg)
            hidden = {split.dictionary.encode_triple(t): v
                      for t, v in _decoded_scores(table, net.dictionary).items()}
            report, _ = evaluate(split, Scorer(hidden, evidence), filtered=not config.raw_ranks)
            best = min(best, time.perf_counter() - t0)
            hits = report.hits_at_10
        rows.append(SweepRow(int(g), hits, best))
        logger.info("gamma=%d hits@10=%.2f (%.3fs)", g, hits, best)
    if csv_path is not None:
        write_sweep(rows, csv_path)
    return rows


def _replace_stages(config: PipelineConfig, stages: Iterable[str]) -> PipelineConfig:
    return replace(config, stages=tuple(stages))


def write_sweep(rows: Sequence[SweepRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("gamma,hits_at_10,seconds\n")
        for r in rows:
            fh.write(f"{r.gamma},{r.hits_at_10!r},{r.seconds!r}\n")


# -- stand-alone evaluation -----------------------------------------------------------

def evaluate_predictions(predictions: str | Path, split_dir: str | Path, out: str | Path | None = None,
                         filtered: bool = True):
    """Rank a split's test triples with scores read from a scores or predictions file.

    Any training or validation triple counts as evidence with score 1.
    """
    split = load_split_dir(split_dir)
    d = split.dictionary
    hidden = {d.encode_triple(t): v for t, v in read_scored_triples(predictions)}
    report, results = evaluate(split, Scorer(hidden, split.train | split.valid), filtered=filtered)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_report(report, out / "report.csv")
        write_ranks(results, out / "ranks.tsv", d)
    return report


# -- sameAs holdout -------------------------------------------------------------------

def sameas_predictor(config: PipelineConfig):
    """Predictor for the holdout protocol: training pairs become sameAs evidence.

    Returns the predicted ``owl:sameAs`` pairs as decoded IRIs.
    """
    same = IRI(vocab.OWL_SAMEAS)

    def predict_pairs(train_pairs):
        extra = [(IRI(a) if isinstance(a, str) else a, same, IRI(b) if isinstance(b, str) else b)
                 for a, b in train_pairs]
        cfg = replace(config, extra_triples=list(config.extra_triples) + extra,
                      stages=STAGES[:STAGES.index("infer") + 1])
        run_pipeline(cfg)
        pairs = set()
        for (s, p, o), _ in read_scored_triples(Path(cfg.out) / "predictions.tsv"):
            if p == same:
                pairs.add((s.lexical, o.lexical))
        return pairs

    return predict_pairs


__all__ = [
    "ARTIFACTS", "STAGES", "InputError", "PipelineConfig", "RunManifest", "StageError", "SweepRow",
    "compute_report", "count_lines", "evaluate_predictions", "load_config", "parse_config", "parse_stages",
    "read_report", "run_pipeline", "sameas_predictor", "sweep_gamma", "write_sweep",
]
