"""Fixed-point potential construction and potential gap checks.

The construction takes a point fixed by every fiber map, raises a bump of
unit height over it and scales so that the free energy of the point mass
beats every supplied competitor by more than twice the entropy budget,
with one unit of headroom to keep the inequality strict under estimator
noise.  The gap checks compare best free energies across explicit
candidate families (the true suprema are not computable, so which
candidate attains each maximum is reported alongside the gap) and compare
restricted dynamic-ball pressures across a point classifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .errors import DomainError, PreconditionError
from .measures import MeasureCandidate, birkhoff_integral, entropy_estimate
from .pressure import Potential, caratheodory_pressure, fixed_point_bump
from .system import RandomSystem

FIXED_POINT_TOL = 1e-9


def construct_fixed_point_potential(
        sys: RandomSystem, x0: float, rho: float, h_top_estimate: float,
        non_zooming: Sequence[MeasureCandidate] = ()) -> Potential:
    """Scaled bump over a common fixed point of all fiber maps.

    The unscaled bump has height one at x0 and support of radius rho; the
    scale is (2 * h_top_estimate + 1) / gap, with gap = 1 minus the largest
    integral of the unscaled bump over the supplied competitor family.  A
    non-positive gap (a competitor concentrating at x0) is a construction
    failure.
    """
    if rho <= 0:
        raise DomainError("bump radius must be > 0")
    for s in range(sys.base.size):
        fx = sys.fiber(s).apply(float(x0))
        if float(sys.distance(fx, x0)) > FIXED_POINT_TOL:
            raise PreconditionError(
                f"x0={x0} is not fixed by the fiber map of symbol {s} "
                f"(moved to {fx})")
    circle = sys.space.kind == "circle"
    unscaled = fixed_point_bump(float(x0), float(rho), circle=circle)
    sup_nz = 0.0
    for cand in non_zooming:
        sup_nz = max(sup_nz, birkhoff_integral(cand, unscaled))
    gap = 1.0 - sup_nz
    if gap <= 0:
        raise PreconditionError(
            "a competitor candidate concentrates at the fixed point "
            f"(family sup {sup_nz:.6f} >= bump maximum 1)")
    k = (2.0 * float(h_top_estimate) + 1.0) / gap
    return fixed_point_bump(float(x0), float(rho), scale=k, circle=circle)


def default_evaluator(sys: RandomSystem, phi: Potential,
                      entropy_opts: Optional[dict] = None) -> Callable:
    opts = {"n_cells": 64, "depth": 12, "word_count": 30, "seed": 0}
    if entropy_opts:
        opts.update(entropy_opts)

    def evaluate(cand: MeasureCandidate):
        h = entropy_estimate(cand, cand.system, opts["n_cells"],
                             opts["depth"], opts["word_count"],
                             opts["seed"]).value
        return h, birkhoff_integral(cand, phi)

    return evaluate


@dataclass(frozen=True)
class GapReport:
    gap: float
    best_zooming: tuple       # (label, value)
    best_non_zooming: tuple
    entries: tuple            # ((label, flag, h, integral, value), ...)
    excluded: tuple = ()

    def to_payload(self) -> dict:
        return {
            "gap": self.gap,
            "best_zooming": list(self.best_zooming),
            "best_non_zooming": list(self.best_non_zooming),
            "entries": [list(e) for e in self.entries],
            "excluded": list(self.excluded),
        }


def zooming_gap(sys: RandomSystem, phi: Potential,
                zooming_family: Sequence[MeasureCandidate],
                non_zooming_family: Sequence[MeasureCandidate],
                evaluator: Optional[Callable] = None) -> GapReport:
    """Best free energy over the first family minus the second.

    A positive gap is numerical evidence that the potential favours the
    contraction-rich side over the tested families.  Candidates whose flag
    contradicts their family are excluded with a warning entry.
    """
    if evaluator is None:
        evaluator = default_evaluator(sys, phi)
    entries = []
    excluded = []

    def best_of(family, expect_flag):
        best = None
        for cand in family:
            if cand.zooming_flag == "unknown" or \
                    (expect_flag and cand.zooming_flag != expect_flag):
                excluded.append(cand.label)
                continue
            h, integ = evaluator(cand)
            value = h + integ
            entries.append((cand.label, cand.zooming_flag, h, integ, value))
            if best is None or value > best[1]:
                best = (cand.label, value)
        return best

    best_z = best_of(zooming_family, "zooming-like")
    best_nz = best_of(non_zooming_family, "non-zooming-like")
    if best_z is None or best_nz is None:
        raise PreconditionError("both families need at least one usable "
                                "candidate with a known flag")
    return GapReport(gap=best_z[1] - best_nz[1], best_zooming=best_z,
                     best_non_zooming=best_nz, entries=tuple(entries),
                     excluded=tuple(excluded))


@dataclass(frozen=True)
class RestrictedPressureReport:
    gap: float                 # +inf sentinel when the out-set is empty
    pressure_in: float
    pressure_out: float
    pressure_full: float
    consistency: float         # |pressure_in - pressure_full|
    note: str = ""

    def to_payload(self) -> dict:
        return {
            "gap": self.gap if math.isfinite(self.gap) else repr(self.gap),
            "pressure_in": self.pressure_in,
            "pressure_out": self.pressure_out
            if math.isfinite(self.pressure_out) else repr(self.pressure_out),
            "pressure_full": self.pressure_full,
            "consistency": self.consistency,
            "note": self.note,
        }


def hyperbolicity_gap(sys: RandomSystem, phi: Potential,
                      classifier: Callable[[float], bool],
                      eps: float = 0.25, n_min: int = 2,
                      beta_bracket: tuple = (-1.0, 3.0),
                      word_count: int = 2, seed: int = 0,
                      sample_points: int = 16384) -> RestrictedPressureReport:
    """Difference of dynamic-ball pressures across the classifier.

    Also reports how far the in-set pressure sits from the full-set value,
    the testable shadow of pressure concentrating on the contraction-rich
    part.  An empty out-set yields a +inf gap with a note.
    """
    kw = dict(eps=eps, n_min=n_min, beta_bracket=beta_bracket,
              word_count=word_count, seed=seed, sample_points=sample_points)
    p_full = caratheodory_pressure(sys, phi, lambda x: True, **kw)
    p_in = caratheodory_pressure(sys, phi, classifier, **kw)
    p_out = caratheodory_pressure(sys, phi, lambda x: not classifier(x), **kw)
    consistency = abs(p_in - p_full)
    if p_out == float("-inf"):
        return RestrictedPressureReport(
            gap=float("inf"), pressure_in=p_in, pressure_out=p_out,
            pressure_full=p_full, consistency=consistency,
            note="classifier marks every sampled point in; out-set empty")
    return RestrictedPressureReport(
        gap=p_in - p_out, pressure_in=p_in, pressure_out=p_out,
        pressure_full=p_full, consistency=consistency)
