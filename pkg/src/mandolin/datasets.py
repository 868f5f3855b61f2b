"""Loaders that turn public benchmark dumps into N-Triples splits.

Tab-separated link-prediction splits (WN18, FB15k) become IRIs by
prepending a namespace.  The DBLP-ACM record-linkage CSVs become one
resource per record with literal attributes, plus the gold sameAs mapping.
"""
from __future__ import annotations

import csv
import io
import random
from pathlib import Path
from urllib.parse import quote

from .rdf import IRI, Literal, RawTriple, write_ntriples

BENCH_NS = "urn:bench:"
XSD_GYEAR = "http://www.w3.org/2001/XMLSchema#gYear"
SPLITS = ("train", "valid", "test")


def bench_iri(name: str, namespace: str = BENCH_NS) -> IRI:
    return IRI(namespace + quote(name.strip(), safe="/:._-~"))


def find_split_files(directory: str | Path) -> dict[str, Path]:
    """``train``/``valid``/``test`` files of a dump, matched by substring.

    ``.nt`` files win over ``.txt``; e.g. ``freebase_mtr100_mte100-valid.txt``
    is accepted as the validation split.
    """
    directory = Path(directory)
    found: dict[str, Path] = {}
    for suffix in (".nt", ".txt", ".tsv"):
        for name in SPLITS:
            if name in found:
                continue
            hits = sorted(p for p in directory.iterdir() if p.suffix == suffix and name in p.stem)
            if hits:
                found[name] = hits[0]
    missing = [n for n in SPLITS if n not in found]
    if missing:
        raise FileNotFoundError(f"{directory}: no {'/'.join(missing)} split file")
    return found


def read_tsv_triples(path: str | Path, namespace: str = BENCH_NS) -> list[RawTriple]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
            out.append(tuple(bench_iri(x, namespace) for x in parts))
    return out


def convert_tsv_split(src: str | Path, dst: str | Path, namespace: str = BENCH_NS) -> Path:
    """Write ``train/valid/test.nt`` under ``dst``; ``.nt`` inputs are copied through."""
    dst = Path(dst)
    dst.mkdir(parents=True, exist_ok=True)
    for name, path in find_split_files(src).items():
        target = dst / f"{name}.nt"
        if path.suffix == ".nt":
            target.write_bytes(path.read_bytes())
        else:
            write_ntriples(read_tsv_triples(path, namespace), target)
    return dst


def subsample_predicates(split: dict[str, list[RawTriple]], fraction: float, seed: int = 0):
    """Keep the triples of a random ``fraction`` of the training predicates, in every split."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    preds = sorted({p.lexical for _, p, _ in split["train"]})
    k = max(1, round(fraction * len(preds)))
    keep = set(random.Random(seed).sample(preds, k))
    return {name: [t for t in triples if t[1].lexical in keep] for name, triples in split.items()}


# -- DBLP-ACM ------------------------------------------------------------------------

RECORD_FIELDS = ("title", "authors", "venue", "year")


def _read_csv(path: Path) -> list[dict[str, str]]:
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        text = raw.decode("latin-1")
    return list(csv.DictReader(io.StringIO(text)))


def _locate(directory: Path, needle: str, mapping: bool = False) -> Path:
    for p in sorted(directory.glob("*.csv")):
        stem = p.stem.lower()
        if needle in stem and ("mapping" in stem) == mapping:
            return p
    raise FileNotFoundError(f"{directory}: no {'mapping ' if mapping else ''}CSV matching {needle!r}")


def record_triples(rows, source: str, namespace: str = BENCH_NS) -> list[RawTriple]:
    out = []
    for row in rows:
        rid = (row.get("id") or "").strip().strip('"')
        if not rid:
            continue
        s = bench_iri(f"{source}/{rid}", namespace)
        for name in RECORD_FIELDS:
            value = (row.get(name) or "").strip()
            if not value:
                continue
            if name == "year":
                if value.isdigit():
                    out.append((s, bench_iri(name, namespace), Literal(value, datatype=XSD_GYEAR)))
                continue
            out.append((s, bench_iri(name, namespace), Literal(value)))
    return out


def load_dblp_acm(directory: str | Path, namespace: str = BENCH_NS):
    """``(triples, mapping)`` for the DBLP-ACM benchmark.

    ``mapping`` holds the gold ``(dblp_iri, acm_iri)`` pairs as strings.
    """
    directory = Path(directory)
    dblp = _read_csv(_locate(directory, "dblp"))
    acm = _read_csv(_locate(directory, "acm"))
    gold = _read_csv(_locate(directory, "", mapping=True))
    triples = record_triples(dblp, "dblp", namespace) + record_triples(acm, "acm", namespace)
    mapping = []
    for row in gold:
        values = [v.strip().strip('"') for v in row.values()]
        if len(values) >= 2 and values[0] and values[1]:
            mapping.append((bench_iri(f"dblp/{values[0]}", namespace).lexical,
                            bench_iri(f"acm/{values[1]}", namespace).lexical))
    return triples, mapping
