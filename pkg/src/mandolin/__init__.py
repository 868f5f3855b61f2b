"""Link prediction on RDF graphs with Markov logic networks."""

__version__ = "0.1.0"
