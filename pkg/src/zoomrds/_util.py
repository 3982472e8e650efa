"""Small shared helpers: seeded generators, logsumexp, CSV/JSON output."""

from __future__ import annotations

import csv
import json
import math
from typing import Iterable, Sequence

import numpy as np


def derive_rng(master_seed: int, task_index: int) -> np.random.Generator:
    """Per-task generator from a master seed.

    The splitting rule is ``SeedSequence((master_seed, task_index))``, so the
    result depends only on the pair, never on worker scheduling.
    """
    return np.random.default_rng(np.random.SeedSequence((master_seed, task_index)))


def logsumexp(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return float("-inf")
    m = float(np.max(values))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(values - m))))


def slope_last_third(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of y against x over the final third of the samples."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2:
        raise ValueError("need at least two samples for a slope")
    k = max(2, int(math.ceil(len(xs) / 3)))
    tail_x, tail_y = xs[-k:], ys[-k:]
    return float(np.polyfit(tail_x, tail_y, 1)[0])


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def dump_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def jsonable(obj):
    """Recursively convert numpy scalar/array values for json.dump."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj
