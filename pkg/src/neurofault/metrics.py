"""Output-error measures and weight-distribution histograms.

Per-pattern error is the mean squared bit difference between desired and
actual output; the global error is the root of the mean per-pattern error
over the whole training set, so it is zero exactly when every pattern is
reproduced. Quality of output is the fraction of evaluations whose Hamming
distance from the target does not exceed a tolerance (zero by default:
exact recall).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def error_per_pattern(d: np.ndarray, y: np.ndarray) -> float:
    """Mean squared output-bit error for one pattern, in [0, 1]."""
    d = np.asarray(d, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if d.shape != y.shape or d.ndim != 1:
        raise ValueError(f"shape mismatch: desired {d.shape} vs actual {y.shape}")
    return float(np.mean((d - y) ** 2))


def global_error(pairs: list[tuple[np.ndarray, np.ndarray]]) -> float:
    """Root-mean of per-pattern errors over the pattern set."""
    if not pairs:
        raise ValueError("global_error needs at least one (desired, actual) pair")
    per = [error_per_pattern(d, y) for d, y in pairs]
    return float(np.sqrt(np.mean(per)))


def hamming(d: np.ndarray, y: np.ndarray) -> int:
    d = np.asarray(d)
    y = np.asarray(y)
    if d.shape != y.shape:
        raise ValueError(f"shape mismatch: {d.shape} vs {y.shape}")
    return int(np.count_nonzero(d != y))


def quality_of_output(evaluations: list[tuple[np.ndarray, np.ndarray]],
                      hamming_tolerance: int = 0) -> float:
    """Fraction of (desired, actual) evaluations within the Hamming tolerance."""
    if hamming_tolerance < 0:
        raise ValueError("hamming_tolerance must be >= 0")
    if not evaluations:
        return 0.0
    good = sum(1 for d, y in evaluations if hamming(d, y) <= hamming_tolerance)
    return good / len(evaluations)


@dataclass
class ErrorReport:
    per_pattern: list[float]
    global_: float
    quality: float

    @classmethod
    def from_evaluations(cls, evaluations, hamming_tolerance: int = 0) -> "ErrorReport":
        per = [error_per_pattern(d, y) for d, y in evaluations]
        return cls(per_pattern=per,
                   global_=global_error(evaluations),
                   quality=quality_of_output(evaluations, hamming_tolerance))


@dataclass
class Histogram:
    layer_pair: str      # "IH" | "HO"
    stage: str           # "initial" | "post-equilibration" | "post-learning"
    edges: np.ndarray
    counts: np.ndarray

    def csv_rows(self) -> list[str]:
        rows = []
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            rows.append(f"{self.layer_pair},{self.stage},{lo!r},{hi!r},{c}")
        return rows


def weight_histogram(weights, layer_pair: str, stage: str, bins: int = 64) -> Histogram:
    """Fixed-width histogram of the realized weights of one layer pair."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if layer_pair == "IH":
        values = weights.realized_ih()
    elif layer_pair == "HO":
        values = weights.realized_ho()
    else:
        raise ValueError(f"unknown layer pair {layer_pair!r}")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        # degenerate spread: one occupied bin centred on the common value
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return Histogram(layer_pair=layer_pair, stage=stage, edges=edges, counts=counts)


def spread(values: np.ndarray) -> float:
    """Sample standard deviation, the spread measure used for the
    distribution-dynamics comparisons."""
    return float(np.std(np.asarray(values, dtype=np.float64)))
