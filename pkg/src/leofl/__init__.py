"""Federated learning over LEO constellations with intra-orbit ISLs.

Simulates dense and sparse incremental aggregation over satellite rings with
bit-exact communication accounting and deterministic, seeded experiments.
"""

__version__ = "0.1.0"
