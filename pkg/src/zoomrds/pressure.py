"""Topological-pressure estimation and variational-inequality checks.

Two estimators are provided.  The separated-set route enumerates candidate
points as inverse images of a grid-anchored point under the word map, so
the candidates carry one representative per monotone inverse branch; a
greedy pass ordered by Birkhoff weight keeps a maximal separated subset
(skipped wholesale when distinct preimages are provably farther apart than
the separation scale).  The log of the weighted sum over the kept set is
the per-word estimate, and the final reading comes from the largest depth
at the smallest scale, with the per-cell table and stabilisation
diagnostics attached.

The dynamic-ball route covers sampled points of an arbitrary classified
subset with depth-n shadowing balls, weights each cover and locates by
bisection the exponent where the weighted sum crosses one; covers that
isolate single sample points are excluded as saturated.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._util import logsumexp
from .errors import BracketError, DomainError, ResolutionError, TreeSizeError
from .measures import MeasureCandidate, birkhoff_integral, entropy_estimate
from .system import RandomSystem, sample_base

GOLDEN_FRAC = (math.sqrt(5.0) - 1.0) / 2.0
MAX_TREE = 1 << 20


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Potential:
    """A bounded observable on (symbol, point) pairs."""

    rule: str
    fn: Callable
    params: dict = field(default_factory=dict)

    def value(self, symbol: int, x: float) -> float:
        return float(self.fn(symbol, np.asarray([x], dtype=float))[0])

    def value_array(self, symbol: int, xs: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(symbol, np.asarray(xs, dtype=float)),
                          dtype=float)

    def shifted(self, c: float) -> "Potential":
        base = self.fn
        return Potential(rule=f"{self.rule}+const", params={**self.params, "shift": c},
                         fn=lambda s, xs: base(s, xs) + c)

    def scaled(self, k: float) -> "Potential":
        base = self.fn
        return Potential(rule=f"{self.rule}*const", params={**self.params, "scale_by": k},
                         fn=lambda s, xs: k * base(s, xs))


def null_potential() -> Potential:
    return Potential("null", lambda s, xs: np.zeros_like(np.asarray(xs, dtype=float)))


def constant_per_symbol(values: Sequence[float]) -> Potential:
    vals = tuple(float(v) for v in values)
    return Potential("constant-per-symbol",
                     lambda s, xs: np.full_like(np.asarray(xs, dtype=float), vals[int(s)]),
                     params={"values": vals})


def coordinate_potential() -> Potential:
    return Potential("coordinate", lambda s, xs: np.asarray(xs, dtype=float))


def fixed_point_bump(center: float, radius: float, height: float = 1.0,
                     scale: float = 1.0, circle: bool = False) -> Potential:
    """Tent-profile bump supported on the radius-ball around the center,
    constant across fibers; piecewise linear so cell integrals are exact."""
    if radius <= 0:
        raise DomainError("bump radius must be > 0")

    def fn(s, xs):
        xs = np.asarray(xs, dtype=float)
        if circle:
            d = np.abs(np.mod(xs, 1.0) - np.mod(center, 1.0))
            d = np.minimum(d, 1.0 - d)
        else:
            d = np.abs(xs - center)
        return scale * height * np.maximum(0.0, 1.0 - d / radius)

    return Potential("fixed-point-bump", fn,
                     params={"center": center, "radius": radius,
                             "height": height, "scale": scale})


def custom_potential(fn: Callable, name: str = "custom") -> Potential:
    return Potential(name, lambda s, xs: np.asarray(fn(s, np.asarray(xs, dtype=float)),
                                                    dtype=float))


# ---------------------------------------------------------------------------
# Separated-set pressure
# ---------------------------------------------------------------------------

def _anchor_point(sys: RandomSystem, grid: int) -> float:
    space = sys.space
    idx = int(GOLDEN_FRAC * grid)
    return space.lo + (idx + 0.5) * (space.hi - space.lo) / grid


def _preimage_tree(sys: RandomSystem, word: np.ndarray, anchor: float,
                   max_tree: int = MAX_TREE) -> np.ndarray:
    """All inverse images of the anchor under the word map, one per
    admissible monotone branch chain."""
    pts = np.asarray([anchor], dtype=float)
    for t in range(len(word) - 1, -1, -1):
        fm = sys.fiber(int(word[t]))
        pts, _ = fm.preimages(pts)
        if pts.size == 0:
            return pts
        if pts.size > max_tree:
            raise TreeSizeError(
                f"inverse-image tree exceeded {max_tree} leaves at depth "
                f"{len(word) - t}")
    return np.sort(pts)


def _forward_weights(sys: RandomSystem, phi: Potential, word: np.ndarray,
                     pts: np.ndarray, keep_orbits: bool):
    xs = pts.copy()
    weights = np.zeros(len(pts))
    orbits = [xs.copy()] if keep_orbits else None
    for s in word:
        weights += phi.value_array(int(s), xs)
        xs = sys.fiber(int(s)).apply_array(xs)
        if keep_orbits:
            orbits.append(xs.copy())
    if keep_orbits:
        return weights, np.asarray(orbits)
    return weights, None


def _greedy_separated(space, orbits: np.ndarray, order: np.ndarray,
                      eps: float) -> np.ndarray:
    """Indices of a maximal separated subset, visited in the given order.

    Only points within eps at step zero can conflict, so conflicts are
    checked inside a sliding positional window; on the circle each accepted
    point is mirrored at +-1 so pairs straddling the seam are seen.
    """
    circle = getattr(space, "kind", "interval") == "circle"
    mirrors = (-1.0, 0.0, 1.0) if circle else (0.0,)
    pos = orbits[0]
    accepted: list = []          # column indices, sorted by position
    accepted_pos: list = []
    chosen = []
    for idx in order:
        p = pos[idx]
        lo_i = bisect_left(accepted_pos, p - eps)
        hi_i = bisect_right(accepted_pos, p + eps)
        conflict = False
        if hi_i > lo_i:
            cols = np.asarray([accepted[t] for t in range(lo_i, hi_i)])
            diffs = np.asarray(space.distance(orbits[:, cols],
                                              orbits[:, idx][:, None]))
            close = (diffs <= eps).all(axis=0)
            conflict = bool(np.any(close))
        if not conflict:
            for off in mirrors:
                k = bisect_left(accepted_pos, p + off)
                accepted_pos.insert(k, p + off)
                accepted.insert(k, idx)
            chosen.append(idx)
    return np.asarray(chosen, dtype=int)


def separated_pressure(sys: RandomSystem, phi: Potential, n: int, eps: float,
                       word: Sequence[int], grid: int) -> float:
    """Log of the Birkhoff-weighted sum over a maximal separated set.

    Candidates are the inverse images of a grid-anchored point under the
    word map; the greedy selection (descending weight, ties by enumeration
    index) is skipped when every pair of distinct preimages is guaranteed
    to separate beyond eps at their branch-split step.
    """
    word = np.asarray(word, dtype=np.int64)[:n]
    if len(word) < n:
        raise DomainError("word shorter than the requested depth")
    space = sys.space
    spacing = (space.hi - space.lo) / grid
    if eps <= spacing * 4:
        raise ResolutionError(
            f"grid spacing {spacing:.3g} too coarse for eps {eps:.3g}")
    gap = min(sys.fiber(int(s)).preimage_gap for s in word)
    anchor = _anchor_point(sys, grid)
    pts = _preimage_tree(sys, word, anchor)
    if pts.size == 0:
        return float("-inf")
    if gap > eps:
        weights, _ = _forward_weights(sys, phi, word, pts, keep_orbits=False)
        return logsumexp(weights)
    weights, orbits = _forward_weights(sys, phi, word, pts, keep_orbits=True)
    order = np.lexsort((np.arange(len(pts)), -weights))
    chosen = _greedy_separated(space, orbits, order, eps)
    return logsumexp(weights[chosen])


@dataclass(frozen=True)
class PressureEstimate:
    value: float
    n_used: int
    eps_used: float
    word_count: int
    table: tuple   # ((n, eps, mean, se), ...)
    se: float
    slope: float
    warnings: tuple = ()

    def to_payload(self) -> dict:
        return {
            "value": self.value,
            "n_used": self.n_used,
            "eps_used": self.eps_used,
            "word_count": self.word_count,
            "se": self.se,
            "slope": self.slope,
            "warnings": list(self.warnings),
            "table": [list(r) for r in self.table],
        }


def pressure_estimate(sys: RandomSystem, phi: Potential,
                      eps_schedule: Sequence[float],
                      n_schedule: Sequence[int],
                      word_count: int, seed: int,
                      grid: Optional[int] = None) -> PressureEstimate:
    """Pressure from per-word separated sums over (depth, scale) schedules.

    The word set is shared across all cells (prefixes serve smaller
    depths).  The reading at the largest depth and smallest scale is the
    value; the slope of the raw log-sums over the last depths is attached
    as a stabilisation diagnostic, and a non-monotone mean column beyond
    noise attaches a convergence warning.
    """
    eps_schedule = [float(e) for e in eps_schedule]
    n_schedule = [int(n) for n in n_schedule]
    if not eps_schedule or not n_schedule:
        raise DomainError("schedules must be non-empty")
    if any(e2 >= e1 for e1, e2 in zip(eps_schedule, eps_schedule[1:])):
        raise DomainError("eps schedule must be strictly decreasing")
    if any(n2 <= n1 for n1, n2 in zip(n_schedule, n_schedule[1:])):
        raise DomainError("n schedule must be strictly increasing")
    if word_count < 1:
        raise DomainError("need at least one base word")
    space = sys.space
    if grid is None:
        grid = int(5 * (space.hi - space.lo) / min(eps_schedule)) + 8
    n_max = max(n_schedule)
    words = sample_base(sys.base, n_max, word_count, seed=seed)
    raw = np.empty((len(n_schedule), len(eps_schedule), word_count))
    for wi, word in enumerate(words):
        for ni, n in enumerate(n_schedule):
            for ei, eps in enumerate(eps_schedule):
                raw[ni, ei, wi] = separated_pressure(sys, phi, n, eps,
                                                     word, grid)
    table = []
    for ni, n in enumerate(n_schedule):
        for ei, eps in enumerate(eps_schedule):
            vals = raw[ni, ei] / n
            table.append((n, eps, float(np.mean(vals)),
                          float(np.std(vals) / math.sqrt(word_count))))
    final_vals = raw[-1, -1] / n_max
    value = float(np.mean(final_vals))
    se = float(np.std(final_vals) / math.sqrt(word_count))
    # Stabilisation: slope of the raw log-sums against depth at the
    # smallest scale, averaged over words.
    if len(n_schedule) >= 2:
        diffs = (raw[-1, -1] - raw[-2, -1]) / (n_schedule[-1] - n_schedule[-2])
        slope = float(np.mean(diffs))
    else:
        slope = value
    warnings = []
    means = [row[2] for row in table if row[1] == eps_schedule[-1]]
    ses = [row[3] for row in table if row[1] == eps_schedule[-1]]
    deltas = np.diff(means)
    if len(deltas) >= 2:
        spread = 2.0 * (max(ses) + 1e-12)
        if np.any(deltas > spread) and np.any(deltas < -spread):
            warnings.append("per-depth table non-monotone beyond noise")
    return PressureEstimate(value=value, n_used=n_max,
                            eps_used=eps_schedule[-1],
                            word_count=word_count, table=tuple(table),
                            se=se, slope=slope, warnings=tuple(warnings))


# ---------------------------------------------------------------------------
# Dynamic-ball (noncompact-subset) pressure
# ---------------------------------------------------------------------------

def classify_all(x: float) -> bool:
    return True


def classify_none(x: float) -> bool:
    return False


def _extend_run(space, orbits: np.ndarray, n: int, eps: float,
                center: int, start: int) -> int:
    """First index >= start that leaves the depth-n ball around center."""
    k = orbits.shape[1]
    end = start
    chunk = 8
    while end < k:
        stop = min(k, end + chunk)
        diffs = np.asarray(space.distance(orbits[: n + 1, end:stop],
                                          orbits[: n + 1, center][:, None]))
        ok = (diffs < eps).all(axis=0)
        bad = np.nonzero(~ok)[0]
        if bad.size:
            return end + int(bad[0])
        end = stop
        chunk = min(4 * chunk, 2048)
    return k


def _build_cover(space, orbits: np.ndarray, bsums: np.ndarray, eps: float,
                 n: int, max_balls: Optional[int] = None):
    """Greedy depth-n dynamic-ball cover of position-sorted sample points.

    For the leftmost uncovered point, the ball is recentred at the farthest
    point still shadowing it (when that ball provably covers the skipped
    run), so each ball spends both sides of its reach.  Returns the list of
    per-ball weight logs (sup of the Birkhoff sums inside the ball), or
    None once the count exceeds max_balls.
    """
    k = orbits.shape[1]
    idx = 0
    balls = []
    while idx < k:
        if max_balls is not None and len(balls) > max_balls:
            return None
        e0 = _extend_run(space, orbits, n, eps, idx, idx + 1)
        end = e0
        c = e0 - 1
        if c > idx:
            diffs = np.asarray(space.distance(orbits[: n + 1, idx:c],
                                              orbits[: n + 1, c][:, None]))
            if (diffs < eps).all():
                end = _extend_run(space, orbits, n, eps, c, e0)
        balls.append(float(np.max(bsums[n, idx:end])))
        idx = end
    return balls


def _cover_sums(space, orbits: np.ndarray, bsums: np.ndarray, eps: float,
                n_min: int, n_cap: int, sat_frac: float):
    """Dynamic-ball covers keyed by depth, saturated depths excluded.

    A cover that isolates single sample points understates the crossing,
    so depths whose ball count exceeds sat_frac of the sample are unusable;
    the deepest usable depth is located by bisection (ball counts grow with
    depth) and every cover built along the way is kept for the infimum.
    """
    k = orbits.shape[1]
    max_balls = int(sat_frac * k)
    covers = {n_min: _build_cover(space, orbits, bsums, eps, n_min)}
    lo, hi = n_min, n_cap
    while lo < hi:
        mid = (lo + hi + 1) // 2
        cover = _build_cover(space, orbits, bsums, eps, mid,
                             max_balls=max_balls)
        if cover is not None:
            covers[mid] = cover
            lo = mid
        else:
            hi = mid - 1
    return covers


def caratheodory_pressure(sys: RandomSystem, phi: Potential,
                          classifier: Callable[[float], bool], eps: float,
                          n_min: int, beta_bracket: tuple,
                          word_count: int, seed: int,
                          sample_points: int = 32768,
                          n_cap: Optional[int] = None,
                          sat_frac: float = 0.5,
                          beta_tol: float = 1e-3,
                          widen_cap: int = 12) -> float:
    """Exponent where greedy dynamic-ball cover sums cross one.

    Sampled points of the classified-in set are covered by shadowing balls
    (deepest usable depth first, at least n_min); for each exponent the
    weighted sum takes the cheapest non-saturated cover, and bisection in
    the exponent locates the crossing, averaged over sampled words.
    Returns -inf when the classifier keeps nothing.
    """
    if n_min < 1:
        raise DomainError("n_min must be >= 1")
    space = sys.space
    pts = space.lo + (np.arange(sample_points) + 0.5) \
        * (space.hi - space.lo) / sample_points
    keep = np.asarray([bool(classifier(float(x))) for x in pts])
    pts = pts[keep]
    if pts.size == 0:
        return float("-inf")
    if n_cap is None:
        n_cap = n_min + 24
    words = sample_base(sys.base, n_cap, word_count, seed=seed)
    results = []
    for word in words:
        orbits = np.empty((n_cap + 1, len(pts)))
        orbits[0] = pts
        bsums = np.zeros((n_cap + 1, len(pts)))
        for t in range(n_cap):
            fm = sys.fiber(int(word[t]))
            bsums[t + 1] = bsums[t] + phi.value_array(int(word[t]), orbits[t])
            orbits[t + 1] = fm.apply_array(orbits[t])
        covers = _cover_sums(space, orbits, bsums, eps, n_min, n_cap,
                             sat_frac)

        def msum(beta: float) -> float:
            best = float("inf")
            for n, balls in covers.items():
                logs = np.asarray(balls) - beta * n
                best = min(best, math.exp(logsumexp(logs)))
            return best

        lo, hi = float(beta_bracket[0]), float(beta_bracket[1])
        for _ in range(widen_cap):
            if msum(lo) > 1.0:
                break
            lo -= max(1.0, hi - lo)
        for _ in range(widen_cap):
            if msum(hi) < 1.0:
                break
            hi += max(1.0, hi - lo)
        if not (msum(lo) > 1.0 > msum(hi)):
            raise BracketError("exponent bracket cannot straddle the crossing")
        while hi - lo > beta_tol:
            mid = 0.5 * (lo + hi)
            if msum(mid) > 1.0:
                lo = mid
            else:
                hi = mid
        results.append(0.5 * (lo + hi))
    return float(np.mean(results))


# ---------------------------------------------------------------------------
# Variational check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VariationalReport:
    entries: tuple   # ((label, entropy, integral, value), ...)
    pressure_value: float
    tol: float
    best_label: str
    best_value: float
    gap: float
    passed: bool

    def to_payload(self) -> dict:
        return {
            "entries": [list(e) for e in self.entries],
            "pressure": self.pressure_value,
            "tol": self.tol,
            "best_label": self.best_label,
            "best_value": self.best_value,
            "gap": self.gap,
            "passed": self.passed,
        }


def variational_check(sys: RandomSystem, phi: Potential,
                      candidates: Sequence[MeasureCandidate],
                      pressure: PressureEstimate, tol: float,
                      entropy_opts: Optional[dict] = None) -> VariationalReport:
    """Free energies of the candidates against the pressure estimate.

    Passes when no candidate exceeds pressure + tol; the best candidate's
    shortfall is reported as the gap.
    """
    if not candidates:
        raise DomainError("need at least one candidate")
    opts = {"n_cells": 64, "depth": 12, "word_count": 30, "seed": 0}
    if entropy_opts:
        opts.update(entropy_opts)
    entries = []
    for cand in candidates:
        h = entropy_estimate(cand, sys, opts["n_cells"], opts["depth"],
                             opts["word_count"], opts["seed"]).value
        integ = birkhoff_integral(cand, phi)
        entries.append((cand.label, h, integ, h + integ))
    best = max(entries, key=lambda e: e[3])
    passed = all(e[3] <= pressure.value + tol for e in entries)
    return VariationalReport(
        entries=tuple(entries), pressure_value=pressure.value, tol=tol,
        best_label=best[0], best_value=best[3],
        gap=pressure.value - best[3], passed=passed,
    )
