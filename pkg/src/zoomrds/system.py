"""Random skew products over Bernoulli bases with one-dimensional fibers.

A system couples a finite-alphabet base process (i.i.d. symbols or an
explicit periodic word) with one piecewise-monotone fiber map per symbol,
acting on an interval or on the circle.  Iteration records orbits together
with per-step log-derivatives and optional Birkhoff partial sums of a
potential, which downstream modules consume for zooming-time detection,
pressure estimation and measure construction.

Fiber maps expose an explicit branch table (monotone pieces with exact
inverses) because much of the toolkit works backward: pre-ball pull-backs,
inverse-image trees for separated sets, and cell-transition matrices.
Degree-d circle coverings are additionally tagged so pull-backs can cross
the artificial mod-1 breakpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError

DIST_FLOOR = 1e-300  # reporting floor used by logarithm consumers


# ---------------------------------------------------------------------------
# Phase space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseSpace:
    kind: str  # "interval" or "circle"
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in ("interval", "circle"):
            raise ConfigError(f"unknown phase space {self.kind!r}")
        if self.kind == "circle" and (self.lo, self.hi) != (0.0, 1.0):
            raise ConfigError("circle phase space is the unit circle [0,1)")
        if not self.hi > self.lo:
            raise ConfigError("phase interval must have positive length")

    @property
    def circumference(self) -> float:
        return self.hi - self.lo

    @property
    def diameter(self) -> float:
        if self.kind == "circle":
            return 0.5 * self.circumference
        return self.hi - self.lo

    def wrap(self, x):
        if self.kind == "circle":
            return np.mod(x, 1.0)
        return np.clip(x, self.lo, self.hi)

    def distance(self, x, y):
        if self.kind == "circle":
            d = np.abs(np.mod(x, 1.0) - np.mod(y, 1.0))
            return np.minimum(d, 1.0 - d)
        return np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))

    def contains(self, x: float) -> bool:
        if self.kind == "circle":
            return True
        return self.lo - 1e-12 <= x <= self.hi + 1e-12


INTERVAL = PhaseSpace("interval", 0.0, 1.0)
CIRCLE = PhaseSpace("circle", 0.0, 1.0)


# ---------------------------------------------------------------------------
# Branches and fiber maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    """One monotone piece of a fiber map.

    ``fwd`` returns lift values (continuous, monotone on [lo, hi]); for
    interval maps the lift is the map itself.  ``inv`` is the exact inverse
    of the lift on the branch.  ``dfwd`` is the signed derivative.
    """

    lo: float
    hi: float
    fwd: Callable
    inv: Callable
    dfwd: Callable
    increasing: bool

    def image(self) -> tuple[float, float]:
        a, b = float(self.fwd(self.lo)), float(self.fwd(self.hi))
        return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class FiberMap:
    """A piecewise-monotone self-map of the phase space."""

    kind: str
    space: PhaseSpace
    branches: tuple
    critical: tuple = ()
    params: dict = field(default_factory=dict)
    # Constant-slope full covering of the circle (doubling: 2); enables
    # pull-backs across the mod-1 seam.
    covering_degree: Optional[int] = None
    # Minimal distance between distinct preimages of a common point; 0.0
    # when preimages can merge (folds).  Used to certify separated sets.
    preimage_gap: float = 0.0

    # -- forward evaluation -------------------------------------------------

    def apply_array(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if self.covering_degree is not None:
            return np.mod(self.covering_degree * xs, 1.0)
        out = np.empty_like(xs)
        idx = self._branch_index_array(xs)
        for bi, br in enumerate(self.branches):
            m = idx == bi
            if np.any(m):
                out[m] = br.fwd(xs[m])
        return self.space.wrap(out)

    def apply(self, x: float) -> float:
        return float(self.apply_array(np.asarray([x]))[0])

    def deriv_array(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.empty_like(xs)
        idx = self._branch_index_array(xs)
        for bi, br in enumerate(self.branches):
            m = idx == bi
            if np.any(m):
                out[m] = br.dfwd(xs[m])
        return out

    def deriv(self, x: float) -> float:
        return float(self.deriv_array(np.asarray([x]))[0])

    def log_abs_deriv_array(self, xs: np.ndarray) -> np.ndarray:
        """log|f'|; NaN marks absent values (critical points / folds)."""
        xs = np.asarray(xs, dtype=float)
        with np.errstate(divide="ignore"):
            vals = np.log(np.abs(self.deriv_array(xs)))
        vals = np.where(np.isfinite(vals), vals, np.nan)
        if self.critical:
            for c in self.critical:
                vals = np.where(self.space.distance(xs, c) <= 1e-15, np.nan, vals)
        return vals

    # -- branch structure ---------------------------------------------------

    def _branch_index_array(self, xs: np.ndarray) -> np.ndarray:
        edges = np.array([br.lo for br in self.branches[1:]])
        return np.searchsorted(edges, xs, side="right")

    def branch_containing(self, x: float) -> Optional[int]:
        """Branch index whose interior-or-boundary contains x; None when x
        sits exactly on an interior breakpoint (ambiguous chain)."""
        for bi, br in enumerate(self.branches):
            if br.lo <= x <= br.hi:
                interior_lo = bi > 0 and abs(x - br.lo) < 1e-14
                interior_hi = bi < len(self.branches) - 1 and abs(x - br.hi) < 1e-14
                if interior_lo or interior_hi:
                    return None
                return bi
        return None

    def pull_back_offsets(self, x: float, u_out: float, v_out: float):
        """One backward step of a radius pull-back around the orbit point x.

        Given the image interval [f(x)-u_out, f(x)+v_out] (arc offsets on
        the circle), return offsets (u_in, v_in) with
        f([x-u_in, x+v_in]) = that interval through a single monotone piece,
        or None when the interval leaves the branch image.
        """
        if self.covering_degree is not None:
            d = float(self.covering_degree)
            if u_out + v_out >= 1.0:
                return None
            return (u_out / d, v_out / d)
        bi = self.branch_containing(x)
        if bi is None:
            return None
        br = self.branches[bi]
        y = float(br.fwd(x))
        img_lo, img_hi = br.image()
        tol = 1e-12
        if y - u_out < img_lo - tol or y + v_out > img_hi + tol:
            return None
        lo_t = max(y - u_out, img_lo)
        hi_t = min(y + v_out, img_hi)
        if br.increasing:
            x_lo, x_hi = float(br.inv(lo_t)), float(br.inv(hi_t))
        else:
            x_lo, x_hi = float(br.inv(hi_t)), float(br.inv(lo_t))
        return (max(x - x_lo, 0.0), max(x_hi - x, 0.0))

    def preimages(self, ys: np.ndarray):
        """All preimages of each target point, as (points, source_index).

        Targets are phase-space points; on the circle every branch whose
        lift image contains a lift of the target contributes one preimage.
        """
        ys = np.asarray(ys, dtype=float)
        pts, src = [], []
        for br in self.branches:
            img_lo, img_hi = br.image()
            if self.space.kind == "circle":
                k_lo = math.floor(img_lo)
                k_hi = math.ceil(img_hi)
                for k in range(k_lo, k_hi + 1):
                    lifted = np.mod(ys, 1.0) + k
                    m = (lifted >= img_lo - 1e-12) & (lifted <= img_hi + 1e-12)
                    if np.any(m):
                        xs = br.inv(np.clip(lifted[m], img_lo, img_hi))
                        pts.append(np.clip(xs, br.lo, br.hi))
                        src.append(np.nonzero(m)[0])
            else:
                m = (ys >= img_lo - 1e-12) & (ys <= img_hi + 1e-12)
                if np.any(m):
                    xs = br.inv(np.clip(ys[m], img_lo, img_hi))
                    pts.append(np.clip(xs, br.lo, br.hi))
                    src.append(np.nonzero(m)[0])
        if not pts:
            return np.empty(0), np.empty(0, dtype=int)
        return np.concatenate(pts), np.concatenate(src)

    def validate_derivative(self, grid: int = 1000, rtol: float = 1e-6) -> float:
        """Max relative error of the derivative rule against central finite
        differences on a grid, away from breakpoints and critical points."""
        lo, hi = self.space.lo, self.space.hi
        margin = (hi - lo) / grid * 4
        xs = np.linspace(lo + margin, hi - margin, grid)
        keep = np.ones(len(xs), dtype=bool)
        specials = [br.lo for br in self.branches] + [br.hi for br in self.branches]
        specials += list(self.critical)
        for s in specials:
            keep &= np.abs(xs - s) > margin
        xs = xs[keep]
        h = 1e-7 * max(1.0, hi - lo)
        fd = (self._raw_array(xs + h) - self._raw_array(xs - h)) / (2 * h)
        dv = self.deriv_array(xs)
        denom = np.maximum(np.abs(dv), 1e-9)
        rel = np.abs(fd - dv) / denom
        worst = float(np.max(rel)) if rel.size else 0.0
        if worst > rtol:
            raise DomainError(
                f"derivative rule inconsistent with the map rule: "
                f"max relative error {worst:.3e} > {rtol:.1e}")
        return worst

    def _raw_array(self, xs: np.ndarray) -> np.ndarray:
        """Branch values without wrap/clip (lift values on the circle)."""
        xs = np.asarray(xs, dtype=float)
        if self.covering_degree is not None:
            return float(self.covering_degree) * xs
        out = np.empty_like(xs)
        idx = self._branch_index_array(xs)
        for bi, br in enumerate(self.branches):
            m = idx == bi
            if np.any(m):
                out[m] = br.fwd(xs[m])
        return out


# -- constructors -----------------------------------------------------------

def _linear_branch(lo, hi, slope, intercept):
    slope = float(slope)
    intercept = float(intercept)
    return Branch(
        lo=lo, hi=hi,
        fwd=lambda x, s=slope, c=intercept: s * np.asarray(x, dtype=float) + c,
        inv=lambda y, s=slope, c=intercept: (np.asarray(y, dtype=float) - c) / s,
        dfwd=lambda x, s=slope: np.full_like(np.asarray(x, dtype=float), s),
        increasing=slope > 0,
    )


def linear_full_branch(degree: int) -> FiberMap:
    """x -> degree * x mod 1 on the circle."""
    if degree < 2:
        raise ConfigError("full-branch degree must be >= 2")
    d = int(degree)
    branches = tuple(
        _linear_branch(j / d, (j + 1) / d, d, 0.0) for j in range(d)
    )
    return FiberMap(
        kind=f"linear-{d}", space=CIRCLE, branches=branches,
        params={"degree": d}, covering_degree=d, preimage_gap=1.0 / d,
    )


def doubling() -> FiberMap:
    fm = linear_full_branch(2)
    return FiberMap(kind="doubling", space=CIRCLE, branches=fm.branches,
                    params={"degree": 2}, covering_degree=2, preimage_gap=0.5)


def tent(slope: float = 2.0) -> FiberMap:
    """Tent map on [0,1]; the fold at 1/2 is treated as a critical point."""
    if not 0 < slope <= 2:
        raise ConfigError("tent slope must lie in (0, 2]")
    s = float(slope)
    branches = (
        _linear_branch(0.0, 0.5, s, 0.0),
        _linear_branch(0.5, 1.0, -s, s),
    )
    return FiberMap(kind="tent", space=INTERVAL, branches=branches,
                    critical=(0.5,), params={"slope": s}, preimage_gap=0.0)


def quadratic(a: float, coupling: float = 0.0, shift: float = 0.0) -> FiberMap:
    """x -> a - x^2 + coupling * shift on [-2, 2]; critical point at 0.

    Iterates are clamped to the phase interval; with a <= 2 and small
    coupling the clamp only engages within float noise of the endpoints.
    """
    if a <= 0 or a > 2:
        raise ConfigError("quadratic parameter a must lie in (0, 2]")
    if coupling < 0:
        raise ConfigError("coupling amplitude must be >= 0")
    space = PhaseSpace("interval", -2.0, 2.0)
    c = float(a) + float(coupling) * float(shift)

    def up(x):
        return c - np.asarray(x, dtype=float) ** 2

    left = Branch(
        lo=-2.0, hi=0.0, fwd=up,
        inv=lambda y: -np.sqrt(np.maximum(c - np.asarray(y, dtype=float), 0.0)),
        dfwd=lambda x: -2.0 * np.asarray(x, dtype=float),
        increasing=True,
    )
    right = Branch(
        lo=0.0, hi=2.0, fwd=up,
        inv=lambda y: np.sqrt(np.maximum(c - np.asarray(y, dtype=float), 0.0)),
        dfwd=lambda x: -2.0 * np.asarray(x, dtype=float),
        increasing=False,
    )
    return FiberMap(kind="quadratic", space=space, branches=(left, right),
                    critical=(0.0,),
                    params={"a": a, "coupling": coupling, "shift": shift},
                    preimage_gap=0.0)


def neutral_full() -> FiberMap:
    """Interval map with a neutral fixed point at 0 and a linear full branch.

    First branch [0, 1/4] -> [0, 1]: y -> y / (1 - sqrt(y))^2, with inverse
    y -> y / (1 + sqrt(y))^2 and derivative (1 - sqrt(y))^-3 (equal to 1 at
    the fixed point, so expansion is non-uniform).  Second branch (1/4, 1]
    is linear onto [0, 1].
    """
    def f1(x):
        x = np.asarray(x, dtype=float)
        return x / (1.0 - np.sqrt(np.clip(x, 0.0, 0.25))) ** 2

    def f1_inv(y):
        y = np.asarray(y, dtype=float)
        return y / (1.0 + np.sqrt(np.maximum(y, 0.0))) ** 2

    def f1_deriv(x):
        x = np.asarray(x, dtype=float)
        return (1.0 - np.sqrt(np.clip(x, 0.0, 0.25))) ** -3

    b1 = Branch(lo=0.0, hi=0.25, fwd=f1, inv=f1_inv, dfwd=f1_deriv,
                increasing=True)
    b2 = _linear_branch(0.25, 1.0, 4.0 / 3.0, -1.0 / 3.0)
    return FiberMap(kind="neutral-full", space=INTERVAL, branches=(b1, b2),
                    preimage_gap=0.25)


def sink_core() -> FiberMap:
    """Expanding two-branch core on [1/2, 1] plus a contracting sink branch.

    [0, 1/2] contracts toward the attracting fixed point 0; [1/2, 3/4] and
    [3/4, 1] are expanding full branches onto [1/2, 1], so the core carries
    all the topological entropy.
    """
    branches = (
        _linear_branch(0.0, 0.5, 0.5, 0.0),
        _linear_branch(0.5, 0.75, 2.0, -0.5),
        _linear_branch(0.75, 1.0, 2.0, -1.0),
    )
    return FiberMap(kind="sink-core", space=INTERVAL, branches=branches,
                    preimage_gap=0.25)


def identity_map() -> FiberMap:
    branches = (_linear_branch(0.0, 1.0, 1.0, 0.0),)
    return FiberMap(kind="identity", space=INTERVAL, branches=branches,
                    preimage_gap=1.0)


def piecewise_linear(breakpoints: Sequence[float], slopes: Sequence[float],
                     intercepts: Sequence[float],
                     space: PhaseSpace = INTERVAL,
                     critical: Sequence[float] = (),
                     preimage_gap: float = 0.0) -> FiberMap:
    """Custom map from breakpoints and per-piece linear rules."""
    bp = [float(b) for b in breakpoints]
    if len(bp) < 2 or any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
        raise ConfigError("breakpoints must be strictly increasing")
    if abs(bp[0] - space.lo) > 1e-12 or abs(bp[-1] - space.hi) > 1e-12:
        raise ConfigError("breakpoints must cover the phase interval")
    if not (len(slopes) == len(intercepts) == len(bp) - 1):
        raise ConfigError("need one (slope, intercept) pair per piece")
    branches = tuple(
        _linear_branch(bp[i], bp[i + 1], slopes[i], intercepts[i])
        for i in range(len(bp) - 1)
    )
    return FiberMap(kind="piecewise-linear", space=space, branches=branches,
                    critical=tuple(critical),
                    params={"breakpoints": tuple(bp)},
                    preimage_gap=preimage_gap)


# ---------------------------------------------------------------------------
# Base process
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BaseProcess:
    """Finite-alphabet driving process: seeded i.i.d. or an explicit word."""

    size: int
    probs: tuple
    mode: str = "iid"  # "iid" or "word"
    seed: Optional[int] = None
    word: Optional[tuple] = None

    def __post_init__(self):
        if self.size < 1:
            raise ConfigError("alphabet size must be >= 1")
        p = np.asarray(self.probs, dtype=float)
        if len(p) != self.size:
            raise ConfigError("need one probability per symbol")
        if np.any(p < 0) or abs(float(p.sum()) - 1.0) > 1e-12:
            raise ConfigError("symbol probabilities must be >= 0 and sum to 1")
        if self.mode not in ("iid", "word"):
            raise ConfigError(f"unknown base mode {self.mode!r}")
        if self.mode == "word":
            if not self.word:
                raise ConfigError("explicit-word mode needs a non-empty word")
            if any(not 0 <= s < self.size for s in self.word):
                raise ConfigError("word symbols outside the alphabet")


def sample_base(base: BaseProcess, n: int, count: int,
                seed: Optional[int] = None) -> np.ndarray:
    """`count` symbol words of length `n` as an integer array.

    Seeded i.i.d. draws in iid mode (the explicit seed wins over the base's
    own); periodic extensions of the stored word otherwise.
    """
    if n < 1 or count < 1:
        raise DomainError("n and count must be >= 1")
    if base.mode == "word":
        reps = int(math.ceil(n / len(base.word)))
        row = np.tile(np.asarray(base.word, dtype=np.int64), reps)[:n]
        return np.tile(row, (count, 1))
    use_seed = seed if seed is not None else base.seed
    rng = np.random.default_rng(use_seed)
    return rng.choice(base.size, size=(count, n), p=np.asarray(base.probs))


# ---------------------------------------------------------------------------
# Random system and orbits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RandomSystem:
    base: BaseProcess
    fibers: tuple

    def __post_init__(self):
        if len(self.fibers) != self.base.size:
            raise ConfigError("need exactly one fiber map per symbol")
        spaces = {(f.space.kind, f.space.lo, f.space.hi) for f in self.fibers}
        if len(spaces) != 1:
            raise ConfigError("all fiber maps must share one phase space")

    @property
    def space(self) -> PhaseSpace:
        return self.fibers[0].space

    def fiber(self, symbol: int) -> FiberMap:
        return self.fibers[int(symbol)]

    def distance(self, x, y):
        return self.space.distance(x, y)

    @property
    def critical_set(self) -> tuple:
        out = []
        for f in self.fibers:
            out.extend(f.critical)
        return tuple(sorted(set(out)))


@dataclass(frozen=True)
class OrbitRecord:
    """A finite orbit segment with derivative logs and Birkhoff sums.

    ``points`` has length n+1; ``log_derivs`` length n with NaN at critical
    hits; ``birkhoff[j]`` is the partial sum of the potential over the first
    j steps (present only when a potential was supplied).
    """

    system: RandomSystem
    word: np.ndarray
    points: np.ndarray
    log_derivs: np.ndarray
    birkhoff: Optional[np.ndarray] = None

    @property
    def x0(self) -> float:
        return float(self.points[0])

    @property
    def length(self) -> int:
        return len(self.word)


def iterate(sys: RandomSystem, x0: float, word: Sequence[int],
            phi=None, exact_denominator: Optional[int] = None) -> OrbitRecord:
    """Full orbit record of x0 along the word; Birkhoff sums when phi given.

    Hitting a critical point exactly marks that step's log-derivative absent
    and iteration continues.

    Linear circle coverings shift mantissa bits, so every float orbit
    collapses to 0 within ~60 steps; passing ``exact_denominator=q`` (a
    large prime) snaps x0 onto the lattice p/q and iterates p -> d*p mod q
    in exact integers, which float re-evaluation matches to a few ulp.
    """
    word = np.asarray(word, dtype=np.int64)
    if word.size == 0:
        raise DomainError("word must be non-empty")
    if not sys.space.contains(x0):
        raise DomainError(f"x0={x0} outside the phase space")
    n = len(word)
    points = np.empty(n + 1)
    logd = np.empty(n)
    bsum = np.zeros(n + 1) if phi is not None else None
    if exact_denominator is not None:
        degrees = {}
        for s in set(int(v) for v in word):
            d = sys.fiber(s).covering_degree
            if d is None:
                raise DomainError(
                    "exact lattice iteration needs circle-covering fibers")
            degrees[s] = d
        q = int(exact_denominator)
        p = round(float(x0) * q) % q
        points[0] = p / q
        for i, s in enumerate(word):
            fm = sys.fiber(s)
            x = points[i]
            logd[i] = fm.log_abs_deriv_array(np.asarray([x]))[0]
            if phi is not None:
                bsum[i + 1] = bsum[i] + float(phi.value(int(s), x))
            p = (degrees[int(s)] * p) % q
            points[i + 1] = p / q
        return OrbitRecord(system=sys, word=word, points=points,
                           log_derivs=logd, birkhoff=bsum)
    points[0] = sys.space.wrap(x0)
    for i, s in enumerate(word):
        fm = sys.fiber(s)
        x = points[i]
        logd[i] = fm.log_abs_deriv_array(np.asarray([x]))[0]
        if phi is not None:
            bsum[i + 1] = bsum[i] + float(phi.value(int(s), x))
        points[i + 1] = fm.apply(x)
    return OrbitRecord(system=sys, word=word, points=points,
                       log_derivs=logd, birkhoff=bsum)


def truncated_distance(x: float, critical: Sequence[float],
                       delta: float) -> float:
    """Distance to the critical set truncated at delta; delta when empty."""
    if delta <= 0:
        raise DomainError("delta must be > 0")
    crit = list(critical)
    if not crit:
        return float(delta)
    d = min(abs(float(x) - float(c)) for c in crit)
    return float(min(d, delta))


# -- convenience system builders ---------------------------------------------

def deterministic_system(fiber: FiberMap) -> RandomSystem:
    return RandomSystem(base=BaseProcess(1, (1.0,)), fibers=(fiber,))


def doubling_system() -> RandomSystem:
    return deterministic_system(doubling())


def tripling_system() -> RandomSystem:
    return deterministic_system(linear_full_branch(3))


def random_doubling_tripling(p: float = 0.5,
                             seed: Optional[int] = None) -> RandomSystem:
    base = BaseProcess(2, (p, 1.0 - p), seed=seed)
    return RandomSystem(base=base, fibers=(doubling(), linear_full_branch(3)))


def quadratic_system(a: float = 2.0, coupling: float = 0.0,
                     shifts: Sequence[float] = (0.0,),
                     probs: Optional[Sequence[float]] = None,
                     seed: Optional[int] = None) -> RandomSystem:
    """Quadratic family with per-symbol downward shifts (values in [-1, 0])."""
    shifts = tuple(float(s) for s in shifts)
    if any(s > 0 for s in shifts) and coupling > 0:
        raise ConfigError("shifts must be <= 0 to keep the phase interval")
    k = len(shifts)
    if probs is None:
        probs = tuple(1.0 / k for _ in range(k))
    base = BaseProcess(k, tuple(probs), seed=seed)
    fibers = tuple(quadratic(a, coupling, s) for s in shifts)
    return RandomSystem(base=base, fibers=fibers)


def sink_system() -> RandomSystem:
    return deterministic_system(sink_core())


def neutral_system(symbols: int = 2,
                   seed: Optional[int] = None) -> RandomSystem:
    """Product of the neutral-fixed-point interval map with a Bernoulli base
    (every symbol drives the same fiber map)."""
    probs = tuple(1.0 / symbols for _ in range(symbols))
    base = BaseProcess(symbols, probs, seed=seed)
    return RandomSystem(base=base, fibers=tuple(neutral_full() for _ in range(symbols)))
