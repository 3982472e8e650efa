"""Detection and verification of backward-contraction times along orbits.

A time j qualifies for an orbit when a neighbourhood of the start point is
mapped homeomorphically onto the delta-ball around the j-th orbit point
(condition one, certified here by a monotone-branch pull-back) and all
intermediate images contract according to the configured rate family
(condition two, certified on a grid of pulled-back points).

For exponential families detection runs a Pliss-type scan over derivative
sums at the configured margin and confirms each candidate by the direct
check, so every reported time carries a passing verification.  For
lipschitz and sqrt-decay families every time is checked directly.
Frequencies over the finite horizon stand in for the asymptotic density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._util import derive_rng
from .contraction import ZoomingContraction, exponential
from .errors import ConfigError, DomainError
from .system import DIST_FLOOR, OrbitRecord, RandomSystem, iterate, sample_base, truncated_distance

RATIO_SLACK = 1e-6   # multiplicative slack on the contraction check
PLISS_TIE = 1e-12    # ties count as detected
PAIR_BUDGET = 200_000


@dataclass(frozen=True)
class ZoomingConfig:
    contraction: ZoomingContraction
    delta: float
    grid_points: int = 16
    pliss_margin: Optional[float] = None

    def __post_init__(self):
        if self.delta <= 0:
            raise ConfigError("delta must be > 0")
        if self.grid_points < 8:
            raise ConfigError("grid resolution must be >= 8")
        if self.contraction.kind == "exponential":
            margin = self.margin
            if not 0 < margin < self.contraction.rate:
                raise ConfigError("pliss margin must lie in (0, rate)")

    @property
    def margin(self) -> float:
        if self.pliss_margin is not None:
            return self.pliss_margin
        return self.contraction.rate / 2.0

    def validate_for(self, sys: RandomSystem) -> None:
        if self.delta > sys.space.diameter + 1e-12:
            raise ConfigError("delta exceeds the phase-space diameter")


@dataclass(frozen=True)
class VerifyVerdict:
    time: int
    passed: bool
    condition_i_ok: bool
    worst_ratio: float
    near_miss: bool
    pre_ball: Optional[tuple] = None
    reason: str = ""


@dataclass(frozen=True)
class ZoomingReport:
    length: int
    times: tuple
    pre_balls: dict
    frequency: float
    frequency_half: float

    def to_payload(self) -> dict:
        return {
            "length": self.length,
            "times": list(self.times),
            "pre_balls": {str(j): list(pb) for j, pb in self.pre_balls.items()},
            "frequency": self.frequency,
            "frequency_half": self.frequency_half,
        }


def _empty_report(n: int) -> ZoomingReport:
    return ZoomingReport(length=n, times=(), pre_balls={},
                         frequency=0.0, frequency_half=0.0)


def chain_pull_back(orbit: OrbitRecord, j: int, delta: float):
    """Offsets (u_i, v_i) of the pulled-back delta-ball at every step i <= j.

    Returns (u, v) arrays of length j+1, or (None, reason) when the pull-back
    leaves a monotone branch or meets a breakpoint.
    """
    space = orbit.system.space
    u = np.empty(j + 1)
    v = np.empty(j + 1)
    xj = orbit.points[j]
    if space.kind == "circle":
        u[j] = v[j] = min(delta, space.diameter)
    else:
        u[j] = min(delta, xj - space.lo)
        v[j] = min(delta, space.hi - xj)
    for i in range(j - 1, -1, -1):
        fm = orbit.system.fiber(orbit.word[i])
        res = fm.pull_back_offsets(float(orbit.points[i]), float(u[i + 1]),
                                   float(v[i + 1]))
        if res is None:
            return None, f"pull-back leaves the branch chain at step {i}"
        u[i], v[i] = res
    return (u, v), ""


def _chain_many(orbit: OrbitRecord, times, delta: float):
    """Batched pull-back: offsets at step 0 for every candidate time.

    All candidates share the recorded orbit, so one backward sweep serves
    them all; per-candidate radii are carried as vectors.  Returns
    (offsets, failures) mapping time -> (u0, v0) / reason.
    """
    space = orbit.system.space
    times = sorted({int(j) for j in times})
    offsets: dict = {}
    failures: dict = {}
    if not times:
        return offsets, failures
    state: dict = {}
    for j in times:
        xj = orbit.points[j]
        if space.kind == "circle":
            state[j] = (min(delta, space.diameter),) * 2
        else:
            state[j] = (min(delta, float(xj - space.lo)),
                        min(delta, float(space.hi - xj)))
    tol = 1e-12
    for i in range(max(times) - 1, -1, -1):
        alive = [j for j in state if j > i]
        if not alive:
            break
        fm = orbit.system.fiber(orbit.word[i])
        x = float(orbit.points[i])
        uu = np.array([state[j][0] for j in alive])
        vv = np.array([state[j][1] for j in alive])
        if fm.covering_degree is not None:
            d = float(fm.covering_degree)
            wide = uu + vv >= 1.0
            for j, w in zip(alive, wide):
                if w:
                    failures[j] = f"pre-ball covers the circle at step {i}"
                    state.pop(j)
            alive = [j for j in alive if j in state]
            uu, vv = uu[~wide] / d, vv[~wide] / d
        else:
            bi = fm.branch_containing(x)
            if bi is None:
                for j in alive:
                    failures[j] = f"orbit sits on a breakpoint at step {i}"
                    state.pop(j)
                continue
            br = fm.branches[bi]
            y = float(br.fwd(x))
            img_lo, img_hi = br.image()
            ok = (y - uu >= img_lo - tol) & (y + vv <= img_hi + tol)
            for j, good in zip(alive, ok):
                if not good:
                    failures[j] = f"pull-back leaves the branch chain at step {i}"
                    state.pop(j)
            alive = [j for j in alive if j in state]
            if not alive:
                continue
            uu, vv = uu[ok], vv[ok]
            lo_t = np.maximum(y - uu, img_lo)
            hi_t = np.minimum(y + vv, img_hi)
            if br.increasing:
                x_lo, x_hi = br.inv(lo_t), br.inv(hi_t)
            else:
                x_lo, x_hi = br.inv(hi_t), br.inv(lo_t)
            uu = np.maximum(x - x_lo, 0.0)
            vv = np.maximum(x_hi - x, 0.0)
        for k, j in enumerate(alive):
            state[j] = (float(uu[k]), float(vv[k]))
    for j, (u0, v0) in state.items():
        offsets[j] = (u0, v0)
    return offsets, failures


def _pair_stride(g: int, j: int) -> int:
    pairs = g * (g - 1) // 2
    if j <= 100 or pairs * j <= PAIR_BUDGET:
        return 1
    return max(1, int(math.ceil(pairs * j / PAIR_BUDGET)))


def _verify_many(orbit: OrbitRecord, times, cfg: ZoomingConfig,
                 contraction: Optional[ZoomingContraction] = None) -> list:
    """Verdicts for many candidate times sharing one forward sweep."""
    times = [int(j) for j in times]
    for j in times:
        if not 1 <= j <= orbit.length:
            raise DomainError(f"candidate time {j} outside 1..{orbit.length}")
    con = contraction if contraction is not None else cfg.contraction
    offsets, failures = _chain_many(orbit, times, cfg.delta)
    verdicts: dict = {}
    for j, reason in failures.items():
        verdicts[j] = VerifyVerdict(time=j, passed=False, condition_i_ok=False,
                                    worst_ratio=float("inf"), near_miss=False,
                                    reason=reason)
    ok_times = sorted(offsets)
    if ok_times:
        space = orbit.system.space
        g = cfg.grid_points
        c_count = len(ok_times)
        lo = np.array([orbit.points[0] - offsets[j][0] for j in ok_times])
        hi = np.array([orbit.points[0] + offsets[j][1] for j in ok_times])
        frac = np.linspace(0.0, 1.0, g)
        max_j = max(ok_times)
        traj = np.empty((max_j + 1, c_count, g))
        traj[0] = space.wrap(lo[:, None] + (hi - lo)[:, None] * frac[None, :])
        for i in range(max_j):
            fm = orbit.system.fiber(orbit.word[i])
            traj[i + 1] = fm.apply_array(traj[i].reshape(-1)).reshape(c_count, g)
        ia, ib = np.triu_indices(g, k=1)
        dist = np.asarray(space.distance(traj[:, :, ia], traj[:, :, ib]))
        horizon = max(con.n_max, max_j)
        con_eval = con if con.n_max >= max_j else ZoomingContraction(
            con.kind, rate=con.rate, power=con.power, offset=con.offset,
            n_max=horizon)
        for ci, j in enumerate(ok_times):
            stride = _pair_stride(g, j)
            d_final = dist[j, ci, ::stride]
            # Zero final distances are float-resolution artifacts; folds are
            # already excluded by the branch-chain pull-back.
            live = d_final > 0
            worst = 0.0
            if np.any(live):
                steps = np.arange(j)
                d_inter = dist[:j, ci, ::stride][:, live]
                bounds = con_eval._alpha((j - steps)[:, None],
                                         d_final[live][None, :])
                worst = float(np.max(d_inter / bounds))
            passed = worst <= 1.0 + RATIO_SLACK
            verdicts[j] = VerifyVerdict(
                time=j, passed=passed, condition_i_ok=True, worst_ratio=worst,
                near_miss=1.0 < worst <= 1.0 + RATIO_SLACK,
                pre_ball=(float(lo[ci]), float(hi[ci])),
            )
    return [verdicts[j] for j in times]


def verify_time(orbit: OrbitRecord, j: int, cfg: ZoomingConfig,
                contraction: Optional[ZoomingContraction] = None) -> VerifyVerdict:
    """Direct check of the contraction condition for candidate time j.

    Pulls the delta-ball back through the branch chain, spreads grid points
    over the pre-ball, iterates them forward and compares every pair's
    intermediate distances against the rate family applied to the final
    distance (multiplicative slack 1 + 1e-6).  Reports the worst ratio.
    """
    return _verify_many(orbit, [j], cfg, contraction=contraction)[0]


def pliss_candidates(log_derivs: np.ndarray, margin: float) -> np.ndarray:
    """Times j whose derivative sums clear the margin on every suffix window.

    Computed as record times of S_j - margin * j; windows containing an
    absent derivative are disqualified, so no time past the first absence
    qualifies.
    """
    n = len(log_derivs)
    first_nan = n
    nan_idx = np.nonzero(~np.isfinite(log_derivs))[0]
    if nan_idx.size:
        first_nan = int(nan_idx[0])
    d = np.concatenate([[0.0], np.cumsum(log_derivs[:first_nan])])
    d = d - margin * np.arange(first_nan + 1)
    run_max = np.maximum.accumulate(d)
    out = [j for j in range(1, first_nan + 1)
           if d[j] >= run_max[j - 1] - PLISS_TIE]
    return np.asarray(out, dtype=int)


def detect_times(orbit: OrbitRecord, cfg: ZoomingConfig) -> ZoomingReport:
    """Detected times, pre-balls and the finite-horizon frequency.

    Exponential families: Pliss-type scan at the margin, each candidate
    confirmed by the direct check against the margin-rate family so detected
    times always verify.  Other families: direct check of every time.
    """
    cfg.validate_for(orbit.system)
    n = orbit.length
    if n < 2:
        return _empty_report(n)
    if cfg.contraction.kind == "exponential":
        margin_family = exponential(cfg.margin, n_max=max(n, cfg.contraction.n_max))
        candidates = pliss_candidates(orbit.log_derivs, cfg.margin)
        verdicts = _verify_many(orbit, candidates, cfg,
                                contraction=margin_family)
    else:
        candidates = np.arange(1, n + 1)
        verdicts = _verify_many(orbit, candidates, cfg)
    times = tuple(int(vd.time) for vd in verdicts if vd.passed)
    pre_balls = {int(vd.time): vd.pre_ball for vd in verdicts
                 if vd.passed and vd.pre_ball is not None}
    half = max(1, n // 2)
    freq_half = sum(1 for t in times if t <= half) / half
    return ZoomingReport(length=n, times=times, pre_balls=pre_balls,
                         frequency=len(times) / n, frequency_half=freq_half)


def frequency(report: ZoomingReport) -> float:
    """Share of horizon times detected; finite proxy for the upper density."""
    return report.frequency


ZOOMING_LIKE = "zooming-like"
NON_ZOOMING_LIKE = "non-zooming-like"


def classify_point(sys: RandomSystem, x0: float, word: Sequence[int],
                   cfg: ZoomingConfig, threshold: float) -> str:
    if not 0 < threshold < 1:
        raise DomainError("threshold must lie in (0, 1)")
    orbit = iterate(sys, x0, word)
    report = detect_times(orbit, cfg)
    return ZOOMING_LIKE if report.frequency >= threshold else NON_ZOOMING_LIKE


@dataclass(frozen=True)
class EnsembleEntry:
    x0: float
    frequency: float
    label: str


def classify_ensemble(sys: RandomSystem, count: int, length: int,
                      cfg: ZoomingConfig, threshold: float,
                      master_seed: int,
                      executor=None) -> list:
    """Classification of seeded sample points; parallel-safe per-task seeds."""
    def task(idx: int) -> EnsembleEntry:
        rng = derive_rng(master_seed, idx)
        x0 = float(rng.uniform(sys.space.lo, sys.space.hi))
        word = sample_base(sys.base, length, 1,
                           seed=int(rng.integers(0, 2**63 - 1)))[0]
        orbit = iterate(sys, x0, word)
        report = detect_times(orbit, cfg)
        label = ZOOMING_LIKE if report.frequency >= threshold else NON_ZOOMING_LIKE
        return EnsembleEntry(x0=x0, frequency=report.frequency, label=label)

    if executor is None:
        return [task(i) for i in range(count)]
    futures = [executor.submit(task, i) for i in range(count)]
    return [f.result() for f in futures]


def grid_classifier(sys: RandomSystem, cfg: ZoomingConfig, threshold: float,
                    length: int, grid_points: int, master_seed: int):
    """Point classifier backed by a precomputed grid of frequency labels.

    Classifying every sample a pressure routine touches is too costly, so a
    coarse grid is classified once and arbitrary points inherit the label
    of the nearest grid point.
    """
    space = sys.space
    xs = space.lo + (np.arange(grid_points) + 0.5) \
        * (space.hi - space.lo) / grid_points
    labels = np.empty(grid_points, dtype=bool)
    for i, x in enumerate(xs):
        rng = derive_rng(master_seed, i)
        word = sample_base(sys.base, length, 1,
                           seed=int(rng.integers(0, 2**63 - 1)))[0]
        report = detect_times(iterate(sys, float(x), word), cfg)
        labels[i] = report.frequency >= threshold

    width = (space.hi - space.lo) / grid_points

    def classify(x: float) -> bool:
        idx = int(np.clip((x - space.lo) / width, 0, grid_points - 1))
        return bool(labels[idx])

    return classify


def slow_approach_statistic(orbit: OrbitRecord, critical: Sequence[float],
                            delta: float) -> float:
    """Mean of -log of the delta-truncated distance to the critical set."""
    n = orbit.length
    vals = [truncated_distance(float(x), critical, delta)
            for x in orbit.points[:n]]
    return float(np.mean([-math.log(max(v, DIST_FLOOR)) for v in vals]))


def first_separation_time(sys: RandomSystem, x: float, y: float,
                          word: Sequence[int], epsilon: float,
                          horizon: int) -> Optional[int]:
    """Smallest j <= horizon with d(f^j x, f^j y) > epsilon, else None."""
    a, b = float(x), float(y)
    for j in range(1, horizon + 1):
        fm = sys.fiber(word[j - 1])
        a, b = fm.apply(a), fm.apply(b)
        if float(sys.distance(a, b)) > epsilon:
            return j
    return None


@dataclass(frozen=True)
class ExpansivityReport:
    pairs_tested: int
    separated: int
    degenerate_excluded: int
    first_times: tuple

    @property
    def fraction(self) -> float:
        if self.pairs_tested == 0:
            return 0.0
        return self.separated / self.pairs_tested


def expansivity_check(sys: RandomSystem, pairs: int, epsilon: float,
                      horizon: int, seed: int,
                      pair_distance: float = 2.0 ** -10,
                      delta: Optional[float] = None) -> ExpansivityReport:
    """Fraction of nearby seeded pairs that separate beyond epsilon.

    Pairs share a word; identical points are excluded as degenerate.  When a
    zooming delta is supplied, epsilon must not exceed it.
    """
    if delta is not None and epsilon > delta + 1e-12:
        raise ConfigError("epsilon must not exceed the zooming delta")
    rng = np.random.default_rng(seed)
    space = sys.space
    first_times = []
    separated = 0
    degenerate = 0
    tested = 0
    for i in range(pairs):
        if space.kind == "circle":
            x = float(rng.uniform(0.0, 1.0))
            y = space.wrap(x + pair_distance)
        else:
            x = float(rng.uniform(space.lo, space.hi - pair_distance))
            y = x + pair_distance
        if space.distance(x, y) == 0.0:
            degenerate += 1
            continue
        word = sample_base(sys.base, horizon, 1,
                           seed=int(rng.integers(0, 2**63 - 1)))[0]
        t = first_separation_time(sys, x, y, word, epsilon, horizon)
        tested += 1
        first_times.append(-1 if t is None else t)
        if t is not None:
            separated += 1
    return ExpansivityReport(pairs_tested=tested, separated=separated,
                             degenerate_excluded=degenerate,
                             first_times=tuple(first_times))
