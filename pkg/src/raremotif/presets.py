"""Bundled background chains, PSWMs and published reference values.

The two published DNA chains are printed to four and two decimals, and one
row of each does not sum to 1 (0.9998 and 0.99). ``model`` renormalises every
row explicitly so that the strict stochasticity check applies to what is
actually simulated.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from raremotif.errors import ConfigurationError
from raremotif.markov import Alphabet, MarkovModel
from raremotif.patterns import Pswm, parse_pswm

CHAINS: dict[str, list[list[float]]] = {
    "uniform": [[0.25] * 4] * 4,
    # background for the SWI5 example, n = 700
    "swi5-background": [
        [0.3577, 0.1752, 0.1853, 0.2818],
        [0.3256, 0.2056, 0.1590, 0.3096],
        [0.2992, 0.2180, 0.2039, 0.2789],
        [0.2381, 0.1943, 0.1905, 0.3771],
    ],
    # background for the structured-motif study, n = 100
    "motif-background": [
        [0.35, 0.16, 0.18, 0.31],
        [0.33, 0.20, 0.15, 0.32],
        [0.32, 0.22, 0.19, 0.27],
        [0.25, 0.20, 0.19, 0.35],
    ],
}

PSWMS = ("swi5", "w_rep", "w_norep")


def chain_rows(name: str) -> np.ndarray:
    try:
        return np.array(CHAINS[name], dtype=float)
    except KeyError:
        raise ConfigurationError(f"unknown chain preset {name!r}; choose from {sorted(CHAINS)}") from None


def model(name: str) -> MarkovModel:
    rows = chain_rows(name)
    return MarkovModel(Alphabet.dna(), rows / rows.sum(axis=1, keepdims=True))


def pswm_text(name: str) -> str:
    if name not in PSWMS:
        raise ConfigurationError(f"unknown PSWM preset {name!r}; choose from {list(PSWMS)}")
    return resources.files("raremotif.data").joinpath(f"{name}.pswm").read_text()


def pswm(name: str) -> Pswm:
    return parse_pswm(pswm_text(name), Alphabet.dna(), name=name)


# --- published reference values (estimate, standard error) ----------------------

Ref = tuple[float, float]


TABLE1_N = 200
TABLE1_THRESHOLDS = (9, 10, 11)
TABLE1_ANALYTIC = (7.1e-2, 7.1e-3, 4.2e-4)
TABLE1_ALGORITHM_A: dict[str, tuple[Ref, ...]] = {
    "w_rep": ((3.0e-2, 0.1e-2), (4.0e-3, 0.2e-3), (2.7e-4, 0.1e-4)),
    "w_norep": ((7.5e-2, 0.2e-2), (6.9e-3, 0.2e-3), (4.1e-4, 0.1e-4)),
}
TABLE1_DIRECT: dict[str, tuple[Ref, ...]] = {
    "w_rep": ((3.6e-2, 0.6e-2), (5e-3, 2e-3), (0.0, 0.0)),
    "w_norep": ((6.7e-2, 0.8e-2), (9e-3, 3e-3), (1e-3, 1e-3)),
}

TABLE2_N = 700
TABLE2_THRESHOLD = 50
TABLE2_COUNTS = (1, 2, 3, 4)
TABLE2_ALGORITHM_B: tuple[Ref, ...] = ((9.1e-2, 0.3e-2), (4.2e-3, 0.2e-3), (1.3e-4, 0.1e-4), (2.6e-6, 0.3e-6))
TABLE2_DIRECT: tuple[Ref, ...] = ((9.6e-2, 0.9e-2), (3e-3, 2e-3), (0.0, 0.0), (0.0, 0.0))


@dataclass(frozen=True)
class StructuredRef:
    x: str
    y: str
    algorithm_a: Ref
    analytic: float | None


TABLE3_N = 100
TABLE3_GAPS = ((16, 18), (5, 50))

TABLE3: dict[tuple[int, int], tuple[StructuredRef, ...]] = {
    (16, 18): (
        StructuredRef("gttgaca", "atataat", (1.038e-4, 0.006e-4), 1.01e-4),
        StructuredRef("gttgaca", "tataata", (9.00e-5, 0.05e-5), 8.82e-5),
        StructuredRef("tgttgac", "tataata", (9.39e-5, 0.05e-5), 9.20e-5),
        StructuredRef("ttgaca", "ttataat", (6.65e-4, 0.03e-4), 6.55e-4),
        StructuredRef("ttgacaa", "tacaat", (4.64e-4, 0.02e-4), 4.57e-4),
        StructuredRef("ttgacaa", "tataata", (1.798e-4, 0.009e-4), 1.78e-4),
        StructuredRef("ttgacag", "tataat", (3.62e-4, 0.02e-4), 3.59e-4),
        StructuredRef("ttgacg", "tataat", (9.90e-4, 0.06e-4), 9.76e-4),
    ),
    (5, 50): (
        StructuredRef("gttgaca", "atataat", (1.265e-3, 0.008e-3), None),
        StructuredRef("gttgaca", "tataata", (1.103e-3, 0.007e-3), None),
        StructuredRef("tgttgac", "tataata", (1.150e-3, 0.007e-3), None),
        StructuredRef("ttgaca", "ttataat", (7.88e-3, 0.05e-3), None),
        StructuredRef("ttgacaa", "tacaat", (5.50e-3, 0.04e-3), None),
        StructuredRef("ttgacaa", "tataata", (2.21e-3, 0.01e-3), None),
        StructuredRef("ttgacag", "tataat", (4.23e-3, 0.03e-3), None),
        StructuredRef("ttgacg", "tataat", (1.126e-2, 0.008e-2), None),
    ),
}

# combined p-value over all eight motifs: (direct MC, algorithm A)
TABLE3_COMBINED: dict[tuple[int, int], tuple[Ref, Ref]] = {
    (16, 18): ((2.0e-3, 0.4e-3), (2.96e-3, 0.03e-3)),
    (5, 50): ((2.7e-2, 0.2e-2), (3.30e-2, 0.04e-2)),
}
