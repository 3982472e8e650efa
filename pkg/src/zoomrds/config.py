"""Experiment configuration: TOML parsing, validation, object construction.

One file describes one experiment: the system, the contraction family, the
potential, and per-command numeric schedules.  Unknown families or
malformed schedules raise ConfigError, which the command line maps to its
configuration exit code.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import contraction as contraction_mod
from . import system as system_mod
from .contraction import ZoomingContraction
from .errors import ConfigError
from .pressure import (Potential, constant_per_symbol, coordinate_potential,
                       fixed_point_bump, null_potential)
from .system import RandomSystem
from .zooming import ZoomingConfig

SYSTEM_FAMILIES = ("doubling", "tripling", "linear", "tent", "quadratic",
                   "neutral", "sink", "random-doubling-tripling", "tent-pair")


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    path: str
    config_hash: str
    master_seed: int
    out_dir: str
    workers: int

    def section(self, name: str, required: bool = False) -> dict:
        sec = self.raw.get(name, {})
        if required and not sec:
            raise ConfigError(f"missing required [{name}] section")
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}] must be a table")
        return sec

    # -- constructed objects ----------------------------------------------

    def build_system(self) -> RandomSystem:
        sec = self.section("system", required=True)
        family = sec.get("family")
        if family not in SYSTEM_FAMILIES:
            raise ConfigError(f"unknown system family {family!r}; "
                              f"choose one of {SYSTEM_FAMILIES}")
        try:
            if family == "doubling":
                return system_mod.doubling_system()
            if family == "tripling":
                return system_mod.tripling_system()
            if family == "linear":
                return system_mod.deterministic_system(
                    system_mod.linear_full_branch(int(sec.get("degree", 2))))
            if family == "tent":
                return system_mod.deterministic_system(
                    system_mod.tent(float(sec.get("slope", 2.0))))
            if family == "quadratic":
                return system_mod.quadratic_system(
                    a=float(sec.get("a", 2.0)),
                    coupling=float(sec.get("coupling", 0.0)),
                    shifts=sec.get("shifts", [0.0]),
                    probs=sec.get("probs"))
            if family == "neutral":
                return system_mod.neutral_system(
                    symbols=int(sec.get("symbols", 2)))
            if family == "sink":
                return system_mod.sink_system()
            if family == "tent-pair":
                return system_mod.RandomSystem(
                    base=system_mod.BaseProcess(2, (0.5, 0.5)),
                    fibers=(system_mod.tent(2.0),
                            system_mod.tent(float(sec.get("slope_b", 1.8)))))
            p = float(sec.get("p", 0.5))
            return system_mod.random_doubling_tripling(p=p)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"system construction failed: {exc}") from exc

    def build_contraction(self) -> ZoomingContraction:
        sec = self.section("contraction", required=True)
        kind = sec.get("kind")
        try:
            if kind == "exponential":
                return contraction_mod.exponential(
                    float(sec["rate"]), n_max=int(sec.get("n_max", 1000)))
            if kind == "lipschitz":
                return contraction_mod.lipschitz(
                    float(sec.get("power", 2.0)),
                    offset=float(sec.get("offset", 1.0)),
                    n_max=int(sec.get("n_max", 1000)))
            if kind == "sqrt-decay":
                return contraction_mod.sqrt_decay(
                    n_max=int(sec.get("n_max", 1000)))
        except KeyError as exc:
            raise ConfigError(f"contraction kind {kind!r} missing "
                              f"parameter {exc}") from exc
        except Exception as exc:
            raise ConfigError(f"contraction construction failed: {exc}") from exc
        raise ConfigError(f"unknown contraction kind {kind!r}")

    def build_potential(self, sys: Optional[RandomSystem] = None) -> Potential:
        sec = self.section("potential")
        rule = sec.get("rule", "null")
        if rule == "null":
            return null_potential()
        if rule == "constant-per-symbol":
            values = sec.get("values")
            if not values:
                raise ConfigError("constant-per-symbol potential needs values")
            if sys is not None and len(values) != sys.base.size:
                raise ConfigError("need one constant per symbol")
            return constant_per_symbol(values)
        if rule == "coordinate":
            return coordinate_potential()
        if rule == "fixed-point-bump":
            circle = sys is not None and sys.space.kind == "circle"
            return fixed_point_bump(
                center=float(sec.get("center", 0.0)),
                radius=float(sec.get("radius", 0.1)),
                height=float(sec.get("height", 1.0)),
                scale=float(sec.get("scale", 1.0)),
                circle=circle)
        raise ConfigError(f"unknown potential rule {rule!r}")

    def build_zooming_config(self) -> ZoomingConfig:
        sec = self.section("zooming", required=True)
        try:
            return ZoomingConfig(
                contraction=self.build_contraction(),
                delta=float(sec["delta"]),
                grid_points=int(sec.get("grid_points", 16)),
                pliss_margin=(float(sec["pliss_margin"])
                              if "pliss_margin" in sec else None))
        except KeyError as exc:
            raise ConfigError(f"[zooming] missing key {exc}") from exc


def load_config(path: str, seed_override: Optional[int] = None,
                out_override: Optional[str] = None) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
        raw = tomllib.loads(data.decode("utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} does not parse: {exc}") from exc
    run = raw.get("run", {})
    master_seed = int(run.get("seed", 0)) if seed_override is None \
        else int(seed_override)
    out_dir = str(run.get("out", "out")) if out_override is None \
        else str(out_override)
    workers = int(run.get("workers", 1))
    if workers < 1:
        raise ConfigError("run.workers must be >= 1")
    return ExperimentConfig(
        raw=raw, path=path,
        config_hash=hashlib.sha256(data).hexdigest(),
        master_seed=master_seed, out_dir=out_dir, workers=workers)
