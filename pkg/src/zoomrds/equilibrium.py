"""Ulam discretisation and weighted transfer-operator cocycles.

Each fiber map is reduced to a cell-transition matrix on a uniform
partition: entry (i, j) is the fraction of cell i that lands in cell j,
computed exactly per monotone branch by inverting cell boundaries (no
Monte-Carlo needed for piecewise-monotone maps).  Weighting a matrix by
exp(potential) times |f'| at cell centers discretises the weighted
preimage-sum operator; the growth rate of normalisers along random matrix
products serves as the pressure proxy, and normalised forward/backward
products give equilibrium-state candidates (exact leading eigendata in the
deterministic case).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError
from .measures import MeasureCandidate, Partition, UNKNOWN
from .system import RandomSystem, sample_base

NEG_INF = float("-inf")


@dataclass(frozen=True)
class UlamModel:
    """Per-symbol cell-transition matrices over one uniform partition."""

    system: RandomSystem
    partition: Partition
    matrices: np.ndarray     # (symbols, N, N), row-stochastic
    deriv_abs: np.ndarray    # (symbols, N), |f'| at cell centers
    degenerate: tuple        # ((symbol, cell), ...) flagged rows

    @property
    def n_cells(self) -> int:
        return self.partition.n_cells

    def weighted(self, phi) -> np.ndarray:
        """Matrices scaled per source cell by exp(potential) * |f'|."""
        centers = self.partition.centers()
        out = np.empty_like(self.matrices)
        for s in range(self.system.base.size):
            w = np.exp(phi.value_array(s, centers)) * self.deriv_abs[s]
            out[s] = self.matrices[s] * w[:, None]
        return out

    def sparse_triplets(self, tol: float = 0.0) -> list:
        out = []
        for s in range(self.system.base.size):
            rows, cols = np.nonzero(self.matrices[s] > tol)
            for r, c in zip(rows, cols):
                out.append((int(s), int(r), int(c),
                            float(self.matrices[s][r, c])))
        return out


def _branch_masses(br, partition: Partition, circle: bool):
    """Exact (source_cell, target_cell, preimage_length) per branch."""
    width = partition.width
    lo = partition.lo
    img_lo, img_hi = br.image()
    if img_hi - img_lo <= 0:
        return []
    # Target-cell boundary values inside the (lift) image.
    first = math.ceil((img_lo - lo) / width - 1e-12)
    last = math.floor((img_hi - lo) / width + 1e-12)
    inner = lo + np.arange(first, last + 1) * width if last >= first \
        else np.empty(0)
    edges = np.unique(np.concatenate([[img_lo], inner, [img_hi]]))
    edges = edges[(edges >= img_lo - 1e-12) & (edges <= img_hi + 1e-12)]
    if len(edges) < 2:
        edges = np.asarray([img_lo, img_hi])
    mids = 0.5 * (edges[:-1] + edges[1:])
    if circle:
        mids = np.mod(mids, 1.0)
    targets = partition.index(mids)
    x_edges = np.asarray(br.inv(edges), dtype=float)
    seg_lo = np.minimum(x_edges[:-1], x_edges[1:])
    seg_hi = np.maximum(x_edges[:-1], x_edges[1:])
    out = []
    for t, a, b in zip(targets, seg_lo, seg_hi):
        if b - a <= 0:
            continue
        i_lo = int(partition.index(a + 1e-15))
        i_hi = int(partition.index(b - 1e-15))
        for i in range(i_lo, i_hi + 1):
            c_lo = lo + i * width
            c_hi = c_lo + width
            seg = max(0.0, min(b, c_hi) - max(a, c_lo))
            if seg > 0:
                out.append((int(i), int(t), seg))
    return out


def build_ulam(sys: RandomSystem, n_cells: int,
               samples_per_cell: int = 0) -> UlamModel:
    """Cell-transition matrices from exact branch images.

    Transition proportions come from inverting target-cell boundaries
    through each monotone branch, which is exact for every piecewise
    monotone fiber (piecewise-linear maps reduce to the familiar overlap
    proportions).  Rows that receive no image mass are flagged degenerate
    and replaced by a point mass at the image of the cell center.
    """
    if n_cells < 2:
        raise DomainError("need at least 2 cells")
    partition = Partition(sys.space.lo, sys.space.hi, n_cells)
    k = sys.base.size
    width = partition.width
    mats = np.zeros((k, n_cells, n_cells))
    degenerate = []
    circle = sys.space.kind == "circle"
    for s in range(k):
        fm = sys.fiber(s)
        for br in fm.branches:
            for i, t, seg in _branch_masses(br, partition, circle):
                mats[s][i, t] += seg / width
        sums = mats[s].sum(axis=1)
        for i in range(n_cells):
            if sums[i] < 1e-9:
                degenerate.append((s, i))
                center = partition.lo + (i + 0.5) * width
                j = int(partition.index(fm.apply(center)))
                mats[s][i] = 0.0
                mats[s][i, j] = 1.0
            else:
                mats[s][i] /= sums[i]
    centers = partition.centers()
    deriv = np.stack([np.abs(sys.fiber(s).deriv_array(centers))
                      for s in range(k)])
    return UlamModel(system=sys, partition=partition, matrices=mats,
                     deriv_abs=deriv, degenerate=tuple(degenerate))


def cocycle_pressure(model: UlamModel, phi, word_count: int, length: int,
                     seed: int, burn_in: Optional[int] = None) -> float:
    """Average growth rate of normalisers along weighted matrix products.

    For each sampled word the weighted matrices are multiplied onto a
    uniform row vector with running sum-norm normalisation; the mean of
    (1/n) * sum of log normalisers across words is the pressure proxy
    (the Lyapunov exponent of the weighted cocycle).  A burn-in prefix is
    excluded from the average so the transient toward the leading
    direction does not bias the deterministic sub-case.
    """
    if length < 10:
        raise DomainError("cocycle length must be >= 10")
    if burn_in is None:
        burn_in = min(100, length // 4)
    weighted = model.weighted(phi)
    words = sample_base(model.system.base, length, word_count, seed=seed)
    vals = []
    n = model.n_cells
    for word in words:
        rho = np.full(n, 1.0 / n)
        logs = []
        dead = False
        for t, s in enumerate(word):
            rho = rho @ weighted[int(s)]
            z = float(rho.sum())
            if z <= 0.0:
                dead = True
                break
            if t >= burn_in:
                logs.append(math.log(z))
            rho /= z
        vals.append(NEG_INF if dead else math.fsum(logs) / (length - burn_in))
    if any(v == NEG_INF for v in vals):
        return NEG_INF
    return float(np.mean(vals))


def equilibrium_candidate(model: UlamModel, phi, word_count: int, length: int,
                          seed: int, zooming_flag: str = UNKNOWN,
                          label: str = "ulam-equilibrium",
                          oscillation_tol: float = 0.25) -> MeasureCandidate:
    """Cell-weight candidate from normalised forward/backward products.

    Forward products of the weighted matrices give sample densities;
    backward products give the dual direction, and the product of their
    averages is the stationary weighting (exact leading eigendata in the
    deterministic sub-case).  A large spread across word densities attaches
    a non-convergence warning but still returns the candidate.
    """
    weighted = model.weighted(phi)
    words = sample_base(model.system.base, length, word_count, seed=seed)
    n = model.n_cells
    fwd = []
    bwd = []
    for word in words:
        rho = np.full(n, 1.0 / n)
        for s in word:
            rho = rho @ weighted[int(s)]
            z = rho.sum()
            if z <= 0:
                rho = np.full(n, 1.0 / n)
                break
            rho = rho / z
        fwd.append(rho)
        h = np.ones(n)
        for s in word[::-1]:
            h = weighted[int(s)] @ h
            z = h.sum()
            if z <= 0:
                h = np.ones(n)
                break
            h = h / z
        bwd.append(h)
    fwd = np.asarray(fwd)
    mean_fwd = fwd.mean(axis=0)
    mean_bwd = np.asarray(bwd).mean(axis=0)
    weights_row = mean_fwd * mean_bwd
    weights_row = weights_row / weights_row.sum()
    spread = 0.5 * np.abs(fwd - mean_fwd[None, :]).sum(axis=1).max() \
        if len(fwd) > 1 else 0.0
    warnings = ()
    if spread > oscillation_tol:
        warnings = (f"word densities oscillate (spread {spread:.3f})",)
    k = model.system.base.size
    weights = np.tile(weights_row, (k, 1))
    # Cell transitions under the measure itself: the weighted rows
    # renormalised through the dual direction.  Refined-entropy estimates
    # condition on these rather than on plain image-overlap proportions.
    chain = np.empty_like(weighted)
    for s in range(k):
        denom = weighted[s] @ mean_bwd
        denom = np.where(denom > 0, denom, 1.0)
        chain[s] = weighted[s] * mean_bwd[None, :] / denom[:, None]
    return MeasureCandidate(
        kind="ulam", label=label, system=model.system,
        partition=model.partition, weights=weights,
        probs=np.asarray(model.system.base.probs),
        zooming_flag=zooming_flag, chain=chain, warnings=warnings,
    )


def stationarity_defect(model: UlamModel, phi,
                        candidate: MeasureCandidate) -> float:
    """Total-variation move of the candidate under one averaged random step
    of the normalised weighted chain."""
    weighted = model.weighted(phi)
    n = model.n_cells
    probs = np.asarray(model.system.base.probs)
    w = candidate.weights[0]
    h = _mean_dual(weighted, probs, iters=200)
    pushed = np.zeros(n)
    for s in range(model.system.base.size):
        m = weighted[s]
        denom = m @ h
        denom = np.where(denom > 0, denom, 1.0)
        chain = m * h[None, :] / denom[:, None]
        pushed += probs[s] * (w @ chain)
    pushed = pushed / pushed.sum()
    return float(0.5 * np.abs(pushed - w).sum())


def _mean_dual(weighted: np.ndarray, probs: np.ndarray, iters: int) -> np.ndarray:
    n = weighted.shape[1]
    h = np.ones(n)
    mean_m = np.tensordot(probs, weighted, axes=1)
    for _ in range(iters):
        h = mean_m @ h
        z = h.sum()
        if z <= 0:
            return np.ones(n)
        h = h / z
    return h


def leading_eigen_weights(matrix: np.ndarray) -> np.ndarray:
    """Stationary weighting from leading left/right eigenvectors (power
    iteration); the deterministic-case oracle for candidate weights."""
    n = matrix.shape[0]
    left = np.full(n, 1.0 / n)
    right = np.ones(n)
    for _ in range(2000):
        left = left @ matrix
        left = left / left.sum()
        right = matrix @ right
        right = right / right.sum()
    w = left * right
    return w / w.sum()


def support_overlap(a: MeasureCandidate, b: MeasureCandidate,
                    mass_factor: float = 0.1) -> float:
    """Jaccard overlap of cells carrying more than mass_factor / N weight."""
    if a.partition.n_cells != b.partition.n_cells:
        raise DomainError("candidates use different partitions")
    thr = mass_factor / a.partition.n_cells
    sa = a.marginal_weights() > thr
    sb = b.marginal_weights() > thr
    union = np.count_nonzero(sa | sb)
    if union == 0:
        return 1.0
    return float(np.count_nonzero(sa & sb) / union)
