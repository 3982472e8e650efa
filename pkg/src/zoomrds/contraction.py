"""Backward-contraction rate families and their defining axiom checks.

A contraction family assigns to each step count ``n`` a rate function
``alpha_n`` acting on distances.  Three closed-form kinds are supported:

* ``exponential``: ``alpha_n(r) = exp(-rate * n) * r``
* ``lipschitz``:   ``alpha_n(r) = (n + offset) ** -power * r``
* ``sqrt-decay``:  ``alpha_n(r) = r / (1 + n * sqrt(r)) ** 2``

Families are defined by closed-form rules instead of stored tables so any
``n <= n_max`` is evaluable.  ``check_axioms`` probes the four defining
axioms (shrinking, monotonicity, sub-composition, uniform summability) on
seeded pseudo-random samples and reports the first counterexample per axiom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, HorizonError

KINDS = ("exponential", "lipschitz", "sqrt-decay")

# Additive slack absorbing float error in the sub-composition axiom.
COMPOSITION_SLACK = 1e-12


@dataclass(frozen=True)
class ZoomingContraction:
    """A contraction family with a declared kind and evaluation horizon.

    ``rate`` is used by the exponential kind, ``power``/``offset`` by the
    lipschitz kind (coefficients ``a_n = (n + offset) ** -power``); the
    sqrt-decay kind has no free parameters.
    """

    kind: str
    rate: float = 0.0
    power: float = 2.0
    offset: float = 1.0
    n_max: int = 1000

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown contraction kind {self.kind!r}")
        if self.kind == "exponential" and not self.rate > 0:
            raise DomainError("exponential kind needs rate > 0")
        if self.kind == "lipschitz":
            if not self.power > 0 or not self.offset > 0:
                raise DomainError("lipschitz kind needs power > 0 and offset > 0")
        if self.n_max < 1:
            raise DomainError("n_max must be a positive integer")

    def _alpha(self, n, r):
        """Vectorised rule evaluation without range checks."""
        n = np.asarray(n, dtype=float)
        r = np.asarray(r, dtype=float)
        if self.kind == "exponential":
            return np.exp(-self.rate * n) * r
        if self.kind == "lipschitz":
            return (n + self.offset) ** (-self.power) * r
        return r / (1.0 + n * np.sqrt(r)) ** 2

    def evaluate(self, n: int, r: float) -> float:
        """Value of ``alpha_n(r)``; 0 at r = 0, errors outside the domain."""
        if n < 1 or n > self.n_max:
            raise HorizonError(f"n={n} outside horizon [1, {self.n_max}]")
        if r < 0:
            raise DomainError(f"negative radius r={r}")
        if r == 0:
            return 0.0
        return float(self._alpha(n, r))


def exponential(rate: float, n_max: int = 1000) -> ZoomingContraction:
    return ZoomingContraction("exponential", rate=rate, n_max=n_max)


def lipschitz(power: float, offset: float = 1.0, n_max: int = 1000) -> ZoomingContraction:
    return ZoomingContraction("lipschitz", power=power, offset=offset, n_max=n_max)


def sqrt_decay(n_max: int = 1000) -> ZoomingContraction:
    return ZoomingContraction("sqrt-decay", n_max=n_max)


@dataclass(frozen=True)
class AxiomCheck:
    passed: bool
    counterexample: Optional[dict] = None


@dataclass(frozen=True)
class AxiomReport:
    """Per-axiom verdicts for one contraction family at one seed."""

    kind: str
    samples: int
    seed: int
    shrinking: AxiomCheck
    monotone: AxiomCheck
    composition: AxiomCheck
    summable: AxiomCheck
    sup_partial_sum: float

    @property
    def all_passed(self) -> bool:
        return (
            self.shrinking.passed
            and self.monotone.passed
            and self.composition.passed
            and self.summable.passed
        )

    def failures(self) -> list[str]:
        names = ("shrinking", "monotone", "composition", "summable")
        return [n for n in names if not getattr(self, n).passed]


def _first_failure(mask: np.ndarray, **columns) -> Optional[dict]:
    bad = np.nonzero(~mask)[0]
    if bad.size == 0:
        return None
    i = int(bad[0])
    return {k: (float(v[i]) if np.asarray(v[i]).dtype.kind == "f" else int(v[i]))
            for k, v in columns.items()}


def _log_uniform(rng, lo, hi, size):
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size=size))


def check_axioms(
    c: ZoomingContraction,
    samples: int,
    seed: int,
    tail_bound: float = 0.05,
    r_grid_size: int = 32,
) -> AxiomReport:
    """Probe the four defining axioms on seeded samples.

    Shrinking, monotonicity and sub-composition are sampled with radii in
    (0, 2]; the summability axiom is evaluated on a fixed grid of radii in
    (0, 1) at the full horizon, with the partial-sum tail (second half of the
    horizon) required to stay below ``tail_bound``.  Deterministic per seed.
    """
    if samples < 1:
        raise DomainError("samples must be >= 1")
    rng = np.random.default_rng(seed)

    n1 = rng.integers(1, c.n_max + 1, size=samples)
    r1 = _log_uniform(rng, 1e-9, 2.0, samples)
    a1 = c._alpha(n1, r1)
    shrink_ok = a1 < r1
    shrinking = AxiomCheck(bool(shrink_ok.all()),
                           _first_failure(shrink_ok, n=n1, r=r1, alpha=a1))

    n2 = rng.integers(1, c.n_max + 1, size=samples)
    r2 = _log_uniform(rng, 1e-9, 2.0, samples)
    s2 = r2 * (1.0 + rng.uniform(1e-6, 1.0, size=samples))
    s2 = np.minimum(s2, 2.0)
    keep = s2 > r2
    n2, r2, s2 = n2[keep], r2[keep], s2[keep]
    mono_ok = c._alpha(n2, r2) < c._alpha(n2, s2)
    monotone = AxiomCheck(bool(mono_ok.all()),
                          _first_failure(mono_ok, n=n2, r=r2, s=s2))

    m3 = rng.integers(1, c.n_max, size=samples)
    n3 = np.array([rng.integers(1, c.n_max - m + 1) for m in m3])
    r3 = _log_uniform(rng, 1e-9, 2.0, samples)
    lhs = c._alpha(m3, c._alpha(n3, r3))
    rhs = c._alpha(m3 + n3, r3)
    comp_ok = lhs <= rhs + COMPOSITION_SLACK
    composition = AxiomCheck(bool(comp_ok.all()),
                             _first_failure(comp_ok, m=m3, n=n3, r=r3,
                                            lhs=lhs, rhs=rhs))

    r_grid = np.concatenate([
        np.geomspace(1e-9, 0.999, max(4, r_grid_size - 8)),
        np.linspace(0.05, 0.999, 8),
    ])
    ns = np.arange(1, c.n_max + 1, dtype=float)
    terms = c._alpha(ns[:, None], r_grid[None, :])
    partial = np.cumsum(terms, axis=0)
    full = partial[-1]
    half = partial[c.n_max // 2 - 1] if c.n_max >= 2 else np.zeros_like(full)
    tails = full - half
    sum_ok = np.isfinite(full) & (tails <= tail_bound)
    summable = AxiomCheck(bool(sum_ok.all()),
                          _first_failure(sum_ok, r=r_grid, partial_sum=full,
                                         tail=tails))

    return AxiomReport(
        kind=c.kind,
        samples=samples,
        seed=seed,
        shrinking=shrinking,
        monotone=monotone,
        composition=composition,
        summable=summable,
        sup_partial_sum=float(np.max(full)),
    )
