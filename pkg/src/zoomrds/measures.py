"""Candidate invariant measures, Birkhoff integrals and fiber entropy.

Candidates come in four kinds.  Atomic kinds (empirical orbits, periodic
orbits, point masses) carry their atoms explicitly; the cell-weight kind
carries per-symbol weights over a uniform interval partition, as produced
by the transfer-operator discretisation.  Entropy of refined itinerary
partitions is estimated per kind: atomic candidates group their atoms by
itinerary, cell-weight candidates push weights through the cell-transition
chain, and both report the per-depth table together with the regression
slope over the last third of depths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._util import slope_last_third
from .errors import ConfigError, DomainError, PreconditionError
from .system import OrbitRecord, PhaseSpace, RandomSystem, iterate, sample_base

UNKNOWN = "unknown"


@dataclass(frozen=True)
class Partition:
    """Uniform interval partition of the phase space."""

    lo: float
    hi: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 2:
            raise ConfigError("partition needs at least 2 cells")
        if not self.hi > self.lo:
            raise ConfigError("partition interval must have positive length")

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.n_cells

    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.n_cells) + 0.5) * self.width

    def edges(self) -> np.ndarray:
        return self.lo + np.arange(self.n_cells + 1) * self.width

    def index(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        idx = np.floor((xs - self.lo) / self.width).astype(int)
        return np.clip(idx, 0, self.n_cells - 1)


def make_partition(space: PhaseSpace, n_cells: int,
                   delta: Optional[float] = None) -> Partition:
    """Uniform partition; with delta given, cells are forced below delta."""
    if delta is not None:
        need = int(math.ceil((space.hi - space.lo) / delta))
        if n_cells < need:
            raise ConfigError(
                f"{n_cells} cells give diameter >= delta; need >= {need}")
    return Partition(space.lo, space.hi, n_cells)


def rebin_row(row: np.ndarray, old: Partition, new: Partition) -> np.ndarray:
    """Redistribute cell masses onto a different uniform partition."""
    if old.n_cells == new.n_cells and abs(old.lo - new.lo) < 1e-12 \
            and abs(old.hi - new.hi) < 1e-12:
        return np.asarray(row, dtype=float).copy()
    out = np.zeros(new.n_cells)
    for i, mass in enumerate(np.asarray(row, dtype=float)):
        if mass == 0.0:
            continue
        a = old.lo + i * old.width
        b = a + old.width
        j_lo = new.index(a + 1e-15)
        j_hi = new.index(b - 1e-15)
        for j in range(j_lo, j_hi + 1):
            c_lo = new.lo + j * new.width
            c_hi = c_lo + new.width
            frac = max(0.0, min(b, c_hi) - max(a, c_lo)) / old.width
            out[j] += mass * frac
    return out


@dataclass(frozen=True)
class MeasureCandidate:
    """A candidate invariant measure with per-symbol cell weights.

    ``weights`` is (symbols x cells), each row summing to one.  Atomic kinds
    also carry (points, masses, symbols) so integrals and itinerary entropy
    use the exact atoms rather than the binned weights.
    """

    kind: str  # "empirical" | "periodic" | "dirac" | "ulam"
    label: str
    system: RandomSystem
    partition: Partition
    weights: np.ndarray
    probs: np.ndarray
    zooming_flag: str = UNKNOWN
    atoms: Optional[tuple] = None  # (points, masses, symbols)
    word: Optional[np.ndarray] = None
    # Per-symbol cell-transition rows under the measure itself (set for
    # weighted-operator candidates); refined entropy uses these when the
    # partitions match.
    chain: Optional[np.ndarray] = None
    warnings: tuple = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != self.system.base.size \
                or w.shape[1] != self.partition.n_cells:
            raise ConfigError("weights must be (symbols x cells)")
        sums = w.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-10):
            raise ConfigError("per-fiber weights must sum to 1")

    def marginal_weights(self) -> np.ndarray:
        return np.asarray(self.probs) @ np.asarray(self.weights)

    def to_payload(self) -> dict:
        return {
            "kind": self.kind,
            "label": self.label,
            "zooming_flag": self.zooming_flag,
            "partition": {"lo": self.partition.lo, "hi": self.partition.hi,
                          "n_cells": self.partition.n_cells},
            "probs": [float(p) for p in self.probs],
            "weights": [[float(w) for w in row] for row in self.weights],
            "warnings": list(self.warnings),
        }


def _per_symbol_weights(sys: RandomSystem, partition: Partition,
                        points: np.ndarray, masses: np.ndarray,
                        symbols: np.ndarray, condition: bool) -> np.ndarray:
    k = sys.base.size
    overall = np.zeros(partition.n_cells)
    np.add.at(overall, partition.index(points), masses)
    overall /= overall.sum()
    rows = np.tile(overall, (k, 1))
    if condition:
        for s in range(k):
            m = symbols == s
            if np.any(m):
                row = np.zeros(partition.n_cells)
                np.add.at(row, partition.index(points[m]), masses[m])
                rows[s] = row / row.sum()
    return rows


def empirical_candidate(orbit: OrbitRecord, partition: Partition,
                        burn_in: int = 0, label: str = "empirical",
                        zooming_flag: str = UNKNOWN) -> MeasureCandidate:
    n = orbit.length
    if burn_in >= n:
        raise DomainError("burn-in swallows the whole orbit")
    pts = orbit.points[burn_in:n]
    syms = orbit.word[burn_in:n]
    masses = np.full(len(pts), 1.0 / len(pts))
    sys = orbit.system
    weights = _per_symbol_weights(sys, partition, pts, masses, syms,
                                  condition=True)
    return MeasureCandidate(
        kind="empirical", label=label, system=sys, partition=partition,
        weights=weights, probs=np.asarray(sys.base.probs),
        zooming_flag=zooming_flag, atoms=(pts.copy(), masses, syms.copy()),
        word=orbit.word.copy(),
    )


def periodic_candidate(sys: RandomSystem, word: Sequence[int], x0: float,
                       partition: Partition, label: str = "periodic",
                       zooming_flag: str = UNKNOWN,
                       tol: float = 1e-8) -> MeasureCandidate:
    orbit = iterate(sys, x0, word)
    ret = float(sys.distance(orbit.points[-1], x0))
    if ret > tol:
        raise PreconditionError(
            f"point does not return under the word (gap {ret:.2e})")
    pts = orbit.points[:-1]
    syms = orbit.word
    masses = np.full(len(pts), 1.0 / len(pts))
    weights = _per_symbol_weights(sys, partition, pts, masses, syms,
                                  condition=False)
    return MeasureCandidate(
        kind="periodic", label=label, system=sys, partition=partition,
        weights=weights, probs=np.asarray(sys.base.probs),
        zooming_flag=zooming_flag, atoms=(pts.copy(), masses, syms.copy()),
        word=np.asarray(word, dtype=np.int64),
    )


def dirac_candidate(sys: RandomSystem, symbol: int, x0: float,
                    partition: Partition, label: str = "dirac",
                    zooming_flag: str = UNKNOWN) -> MeasureCandidate:
    pts = np.asarray([float(x0)])
    masses = np.asarray([1.0])
    syms = np.asarray([int(symbol)], dtype=np.int64)
    weights = _per_symbol_weights(sys, partition, pts, masses, syms,
                                  condition=False)
    return MeasureCandidate(
        kind="dirac", label=label, system=sys, partition=partition,
        weights=weights, probs=np.asarray(sys.base.probs),
        zooming_flag=zooming_flag, atoms=(pts, masses, syms),
        word=np.asarray([int(symbol)], dtype=np.int64),
    )


def birkhoff_integral(m: MeasureCandidate, phi) -> float:
    """Integral of the potential against the candidate.

    Atomic kinds average the potential over their atoms; the cell-weight
    kind sums weight * potential(center) per symbol, averaged by the base
    probabilities.
    """
    if m.atoms is not None:
        pts, masses, syms = m.atoms
        total = 0.0
        for s in np.unique(syms):
            sel = syms == s
            vals = phi.value_array(int(s), pts[sel])
            total += float(np.sum(masses[sel] * vals))
        return total
    centers = m.partition.centers()
    total = 0.0
    for s in range(m.system.base.size):
        vals = phi.value_array(s, centers)
        total += float(m.probs[s]) * float(np.sum(m.weights[s] * vals))
    return total


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    table: tuple  # ((depth, H), ...)


def _atomic_entropy_table(m: MeasureCandidate, partition: Partition,
                          depth: int) -> list:
    pts, masses, _ = m.atoms
    word = m.word
    reps = int(math.ceil(depth / len(word)))
    long_word = np.tile(word, reps)[:depth]
    xs = pts.copy()
    codes = [partition.index(xs)]
    for t in range(depth - 1):
        fm = m.system.fiber(int(long_word[t]))
        xs = fm.apply_array(xs)
        codes.append(partition.index(xs))
    codes = np.asarray(codes)  # (depth, n_atoms)
    table = []
    for n in range(1, depth + 1):
        keys = {}
        for a in range(codes.shape[1]):
            key = codes[:n, a].tobytes()
            keys[key] = keys.get(key, 0.0) + float(masses[a])
        probs = np.asarray(list(keys.values()))
        h = float(-np.sum(probs * np.log(probs)))
        table.append((n, h))
    return table


def _chain_entropy_table(m: MeasureCandidate, sys: RandomSystem,
                         partition: Partition, depth: int,
                         word_count: int, seed: int) -> list:
    if m.chain is not None and m.partition.n_cells == partition.n_cells:
        matrices = np.asarray(m.chain)
    else:
        from .equilibrium import build_ulam  # local import to avoid a cycle
        matrices = build_ulam(sys, partition.n_cells).matrices
    words = sample_base(sys.base, depth, word_count, seed=seed)
    acc = np.zeros(depth)
    for word in words:
        start = rebin_row(m.weights[int(word[0])], m.partition, partition)
        start = start / start.sum()
        h = _entropy(start)
        acc[0] += h
        dist = start
        for t in range(depth - 1):
            rows = matrices[int(word[t])]
            row_h = np.array([_entropy(r) for r in rows])
            h += float(np.dot(dist, row_h))
            dist = dist @ rows
            acc[t + 1] += h
    acc /= len(words)
    return [(n, float(acc[n - 1])) for n in range(1, depth + 1)]


def _entropy(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def entropy_estimate(m: MeasureCandidate, sys: RandomSystem, n_cells: int,
                     depth: int, word_count: int, seed: int) -> EntropyEstimate:
    """Fiber-entropy estimate from refined itinerary partitions.

    Returns the slope of H(n) against n over the last third of depths, with
    the full per-depth table, H estimated along sampled base words.  Empty
    cells contribute zero by the 0 log 0 convention.
    """
    if n_cells < 2 or depth < 2:
        raise DomainError("need n_cells >= 2 and depth >= 2")
    partition = Partition(sys.space.lo, sys.space.hi, n_cells)
    if m.atoms is not None:
        table = _atomic_entropy_table(m, partition, depth)
    else:
        table = _chain_entropy_table(m, sys, partition, depth,
                                     word_count, seed)
    ns = [row[0] for row in table]
    hs = [row[1] for row in table]
    return EntropyEstimate(value=slope_last_third(ns, hs), table=tuple(table))
