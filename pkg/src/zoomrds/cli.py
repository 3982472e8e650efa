"""Config-driven experiment runner.

``zoomrds <command> --config <file> [--out <dir>] [--seed <u64>] [--strict]``

Commands: axioms, simulate, zooming, pressure, entropy, equilibrium,
potential-gap, verify-vp.  Every run writes results.json (all estimates,
the config hash, the master seed and the per-task seed derivation rule,
plus a timestamp) and per-table CSV files into the output directory.

Exit codes: 0 success, 2 configuration error, 3 numerical warning under
--strict, 4 precondition failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys as _sys
import time
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from typing import Optional

import numpy as np

from . import __version__
from ._util import derive_rng, dump_json, jsonable, write_csv
from .config import ExperimentConfig, load_config
from .contraction import check_axioms
from .equilibrium import (build_ulam, cocycle_pressure, equilibrium_candidate,
                          stationarity_defect, support_overlap)
from .errors import ConfigError, PreconditionError
from .measures import (dirac_candidate, entropy_estimate, make_partition,
                       periodic_candidate, rebin_row)
from .potentials import (construct_fixed_point_potential, default_evaluator,
                         hyperbolicity_gap, zooming_gap)
from .pressure import (caratheodory_pressure, classify_all, null_potential,
                       pressure_estimate, variational_check)
from .system import iterate, sample_base
from .zooming import (ZOOMING_LIKE, classify_ensemble, detect_times,
                      expansivity_check, grid_classifier,
                      slow_approach_statistic)

SEED_RULE = "numpy SeedSequence((master_seed, task_index))"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_WARN = 3
EXIT_PRECONDITION = 4


def _task_seed(master: int, index: int) -> int:
    return int(derive_rng(master, index).integers(0, 2**63 - 1))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_axioms(cfg: ExperimentConfig, out_dir: str):
    sec = cfg.section("contraction", required=True)
    family = cfg.build_contraction()
    samples = int(sec.get("samples", 10000))
    tail_bound = float(sec.get("tail_bound", 0.05))
    report = check_axioms(family, samples, seed=cfg.master_seed,
                          tail_bound=tail_bound)
    rows = []
    results = {"kind": report.kind, "samples": report.samples,
               "all_passed": report.all_passed,
               "sup_partial_sum": report.sup_partial_sum, "axioms": {}}
    for name in ("shrinking", "monotone", "composition", "summable"):
        check = getattr(report, name)
        results["axioms"][name] = {
            "passed": check.passed,
            "counterexample": check.counterexample,
        }
        rows.append((name, check.passed, check.counterexample))
    write_csv(os.path.join(out_dir, "axioms.csv"),
              ["axiom", "passed", "counterexample"], rows)
    exit_hint = EXIT_OK if report.all_passed else EXIT_PRECONDITION
    return results, [], exit_hint


def cmd_simulate(cfg: ExperimentConfig, out_dir: str):
    system = cfg.build_system()
    phi = cfg.build_potential(system)
    sec = cfg.section("simulate")
    length = int(sec.get("length", 100))
    orbits = int(sec.get("orbits", 1))
    x0 = sec.get("x0", 0.3)
    exact_q = int(sec.get("exact_denominator", 0)) or None
    files = []
    endpoints = []
    for i in range(orbits):
        rng = derive_rng(cfg.master_seed, i)
        start = float(x0) if orbits == 1 else float(
            rng.uniform(system.space.lo, system.space.hi))
        word = sample_base(system.base, length, 1,
                           seed=_task_seed(cfg.master_seed, 1000 + i))[0]
        orbit = iterate(system, start, word, phi=phi,
                        exact_denominator=exact_q)
        rows = []
        for t in range(length):
            logd = orbit.log_derivs[t]
            rows.append((t, int(word[t]), repr(float(orbit.points[t])),
                         "" if not np.isfinite(logd) else repr(float(logd)),
                         repr(float(orbit.birkhoff[t]))))
        rows.append((length, "", repr(float(orbit.points[length])), "",
                     repr(float(orbit.birkhoff[length]))))
        name = f"orbit_{i:03d}.csv"
        write_csv(os.path.join(out_dir, name),
                  ["step", "symbol", "x", "log_deriv", "birkhoff_sum"], rows)
        files.append(name)
        endpoints.append(float(orbit.points[-1]))
    return {"orbits": orbits, "length": length, "files": files,
            "endpoints": endpoints}, [], EXIT_OK


def cmd_zooming(cfg: ExperimentConfig, out_dir: str):
    system = cfg.build_system()
    zcfg = cfg.build_zooming_config()
    zcfg.validate_for(system)
    sec = cfg.section("zooming", required=True)
    threshold = float(sec.get("threshold", 0.05))
    orbit_count = int(sec.get("orbits", 100))
    length = int(sec.get("length", 200))
    warnings = []

    executor = None
    if cfg.workers > 1:
        executor = ThreadPoolExecutor(max_workers=cfg.workers)
    try:
        entries = classify_ensemble(system, orbit_count, length, zcfg,
                                    threshold, cfg.master_seed,
                                    executor=executor)
    finally:
        if executor is not None:
            executor.shutdown()
    write_csv(os.path.join(out_dir, "ensemble.csv"),
              ["point", "frequency", "classification"],
              [(repr(e.x0), repr(e.frequency), e.label) for e in entries])
    zooming_like = sum(1 for e in entries if e.label == ZOOMING_LIKE)

    word0 = sample_base(system.base, length, 1,
                        seed=_task_seed(cfg.master_seed, 1))[0]
    x_first = float(derive_rng(cfg.master_seed, 0).uniform(
        system.space.lo, system.space.hi))
    report0 = detect_times(iterate(system, x_first, word0), zcfg)

    eps = float(sec.get("expansivity_epsilon", min(0.1, zcfg.delta)))
    exp_report = expansivity_check(
        system, int(sec.get("expansivity_pairs", 1000)), eps,
        int(sec.get("expansivity_horizon", 200)),
        seed=_task_seed(cfg.master_seed, 2),
        pair_distance=float(sec.get("pair_distance", 2.0 ** -10)),
        delta=zcfg.delta)
    if exp_report.fraction < 1.0:
        warnings.append("some sampled pairs never separated within the "
                        "horizon")

    slow = None
    crit = system.critical_set
    if crit:
        slow_delta = float(sec.get("slow_delta", 1e-3))
        slow_len = int(sec.get("slow_length", length))
        stats = []
        for i in range(min(orbit_count, int(sec.get("slow_orbits", 25)))):
            rng = derive_rng(cfg.master_seed, 5000 + i)
            x0 = float(rng.uniform(system.space.lo, system.space.hi))
            word = sample_base(system.base, slow_len, 1,
                               seed=_task_seed(cfg.master_seed, 6000 + i))[0]
            stats.append(slow_approach_statistic(
                iterate(system, x0, word), crit, slow_delta))
        slow = {"delta": slow_delta, "orbits": len(stats),
                "median": float(np.median(stats)),
                "values": [float(v) for v in stats]}

    results = {
        "threshold": threshold,
        "orbits": orbit_count,
        "length": length,
        "zooming_like": zooming_like,
        "fraction_zooming_like": zooming_like / orbit_count,
        "first_orbit_report": report0.to_payload(),
        "expansivity": {
            "pairs": exp_report.pairs_tested,
            "separated": exp_report.separated,
            "fraction": exp_report.fraction,
            "degenerate_excluded": exp_report.degenerate_excluded,
            "first_time_max": (max(t for t in exp_report.first_times)
                               if exp_report.first_times else None),
        },
        "slow_approach": slow,
    }
    return results, warnings, EXIT_OK


def cmd_pressure(cfg: ExperimentConfig, out_dir: str):
    system = cfg.build_system()
    phi = cfg.build_potential(system)
    sec = cfg.section("pressure", required=True)
    est = pressure_estimate(
        system, phi,
        eps_schedule=[float(e) for e in sec["eps_schedule"]],
        n_schedule=[int(n) for n in sec["n_schedule"]],
        word_count=int(sec.get("words", 50)),
        seed=_task_seed(cfg.master_seed, 10),
        grid=int(sec["grid"]) if int(sec.get("grid", 0)) else None)
    write_csv(os.path.join(out_dir, "pressure_table.csv"),
              ["n", "eps", "mean", "se"],
              [(n, repr(e), repr(m), repr(s)) for n, e, m, s in est.table])
    cara_sec = cfg.section("caratheodory")
    cara = caratheodory_pressure(
        system, phi, classify_all,
        eps=float(cara_sec.get("eps", 0.25)),
        n_min=int(cara_sec.get("n_min", 2)),
        beta_bracket=(float(cara_sec.get("beta_lo", -1.0)),
                      float(cara_sec.get("beta_hi", 3.0))),
        word_count=int(cara_sec.get("words", 2)),
        seed=_task_seed(cfg.master_seed, 11),
        sample_points=int(cara_sec.get("points", 32768)))
    warnings = list(est.warnings)
    diff = abs(cara - est.value)
    results = {
        "separated": est.to_payload(),
        "caratheodory_full": cara,
        "cross_check_difference": diff,
    }
    return results, warnings, EXIT_OK


def cmd_entropy(cfg: ExperimentConfig, out_dir: str):
    system = cfg.build_system()
    phi = null_potential()
    sec = cfg.section("entropy")
    cells = int(sec.get("cells", 64))
    depth = int(sec.get("depth", 12))
    words = int(sec.get("words", 30))
    model = build_ulam(system, cells)
    cand = equilibrium_candidate(model, phi, max(10, words), 200,
                                 seed=_task_seed(cfg.master_seed, 20))
    est = entropy_estimate(cand, system, cells, depth, words,
                           seed=_task_seed(cfg.master_seed, 21))
    write_csv(os.path.join(out_dir, "entropy_table.csv"),
              ["depth", "H"], [(n, repr(h)) for n, h in est.table])
    results = {"cells": cells, "depth": depth, "value": est.value,
               "table": [[n, h] for n, h in est.table]}
    return results, list(cand.warnings), EXIT_OK


def cmd_equilibrium(cfg: ExperimentConfig, out_dir: str):
    system = cfg.build_system()
    phi = cfg.build_potential(system)
    sec = cfg.section("equilibrium")
    cells = int(sec.get("cells", 256))
    words = int(sec.get("words", 50))
    length = int(sec.get("length", 300))
    model = build_ulam(system, cells)
    pressure = cocycle_pressure(model, phi, words, length,
                                seed=_task_seed(cfg.master_seed, 30))
    cand = equilibrium_candidate(model, phi, words, length,
                                 seed=_task_seed(cfg.master_seed, 31))
    defect = stationarity_defect(model, phi, cand)
    half_model = build_ulam(system, max(2, cells // 2))
    half_cand = equilibrium_candidate(half_model, phi, words, length,
                                      seed=_task_seed(cfg.master_seed, 31))
    coarse = rebin_row(cand.weights[0], cand.partition, half_cand.partition)
    tv_half = float(0.5 * np.abs(coarse - half_cand.weights[0]).sum())
    overlap = support_overlap(cand, cand)
    centers = model.partition.centers()
    write_csv(os.path.join(out_dir, "equilibrium_weights.csv"),
              ["cell", "center", "weight"],
              [(i, repr(float(centers[i])), repr(float(w)))
               for i, w in enumerate(cand.weights[0])])
    dump_json(os.path.join(out_dir, "ulam_model.json"), jsonable({
        "cells": cells,
        "symbols": system.base.size,
        "degenerate_rows": list(model.degenerate),
        "triplets": model.sparse_triplets(),
    }))
    dump_json(os.path.join(out_dir, "candidate.json"),
              jsonable(cand.to_payload()))
    warnings = list(cand.warnings)
    if model.degenerate:
        warnings.append(f"{len(model.degenerate)} degenerate rows flagged")
    results = {
        "cells": cells,
        "cocycle_pressure": pressure,
        "stationarity_defect": defect,
        "half_resolution_tv": tv_half,
        "self_support_overlap": overlap,
        "degenerate_rows": list(model.degenerate),
    }
    return results, warnings, EXIT_OK


def _vp_candidates(cfg: ExperimentConfig, system, partition):
    sec = cfg.section("variational")
    count = int(sec.get("periodic_orbits", 5))
    cands = []
    explicit = sec.get("periodic", [])
    if explicit:
        for row in explicit[:count]:
            cands.append(periodic_candidate(
                system, [int(s) for s in row["word"]], float(row["x0"]),
                partition, label=f"periodic-{len(cands)}",
                zooming_flag=ZOOMING_LIKE))
    else:
        degrees = [system.fiber(s).covering_degree
                   for s in range(system.base.size)]
        if any(d is None for d in degrees):
            raise ConfigError("automatic periodic orbits need circle-covering"
                              " fibers; list [variational.periodic] instead")
        made = 0
        length = 1
        while made < count:
            for word in product(range(system.base.size), repeat=length):
                big_d = math.prod(degrees[s] for s in word)
                if big_d == 2:
                    word = tuple(word) * 2  # period-2 orbit instead of a
                    big_d = 4               # second fixed point
                x0 = 1.0 / (big_d - 1)
                cands.append(periodic_candidate(
                    system, list(word), x0, partition,
                    label=f"periodic-{made}", zooming_flag=ZOOMING_LIKE))
                made += 1
                if made == count:
                    break
            length += 1
    dirac_x0 = float(sec.get("dirac_x0", 0.0))
    cands.append(dirac_candidate(system, 0, dirac_x0, partition,
                                 label="dirac-fixed-point",
                                 zooming_flag=ZOOMING_LIKE))
    return cands


def cmd_verify_vp(cfg: ExperimentConfig, out_dir: str):
    system = cfg.build_system()
    phi = cfg.build_potential(system)
    sec = cfg.section("variational")
    tol = float(sec.get("tol", 0.05))
    psec = cfg.section("pressure", required=True)
    est = pressure_estimate(
        system, phi,
        eps_schedule=[float(e) for e in psec["eps_schedule"]],
        n_schedule=[int(n) for n in psec["n_schedule"]],
        word_count=int(psec.get("words", 50)),
        seed=_task_seed(cfg.master_seed, 10))
    ent = cfg.section("entropy")
    cells = int(ent.get("cells", 64))
    partition = make_partition(system.space, cells)
    model = build_ulam(system, cells)
    cands = [equilibrium_candidate(
        model, phi, int(ent.get("words", 30)), 200,
        seed=_task_seed(cfg.master_seed, 40), zooming_flag=ZOOMING_LIKE)]
    cands.extend(_vp_candidates(cfg, system, partition))
    report = variational_check(
        system, phi, cands, est, tol,
        entropy_opts={"n_cells": cells,
                      "depth": int(ent.get("depth", 12)),
                      "word_count": int(ent.get("words", 30)),
                      "seed": _task_seed(cfg.master_seed, 41)})
    write_csv(os.path.join(out_dir, "candidates.csv"),
              ["label", "entropy", "integral", "value"],
              [(lab, repr(h), repr(i), repr(v))
               for lab, h, i, v in report.entries])
    warnings = []
    if not report.passed:
        warnings.append("a candidate exceeds the pressure estimate beyond "
                        "tolerance")
    results = {"pressure": est.to_payload(),
               "variational": report.to_payload()}
    return results, warnings, EXIT_OK


def cmd_potential_gap(cfg: ExperimentConfig, out_dir: str):
    system = cfg.build_system()
    sec = cfg.section("gap", required=True)
    x0 = float(sec.get("x0", 0.0))
    rho = float(sec.get("rho", 0.1))
    h_top = float(sec.get("h_top", math.log(2)))
    cells = int(cfg.section("entropy").get("cells", 64))
    partition = make_partition(system.space, cells)
    nz_x0 = float(sec.get("non_zooming_x0", 0.0))
    dirac_nz = dirac_candidate(system, 0, nz_x0, partition,
                               label="dirac-attracting",
                               zooming_flag="non-zooming-like")
    phi = construct_fixed_point_potential(system, x0, rho, h_top,
                                          non_zooming=[dirac_nz])
    model = build_ulam(system, cells)
    ueq = equilibrium_candidate(model, null_potential(), 10, 300,
                                seed=_task_seed(cfg.master_seed, 50),
                                zooming_flag=ZOOMING_LIKE)
    dirac_z = dirac_candidate(system, 0, x0, partition,
                              label="dirac-fixed-point",
                              zooming_flag=ZOOMING_LIKE)
    ent = cfg.section("entropy")
    evaluator = default_evaluator(system, phi, {
        "n_cells": cells, "depth": int(ent.get("depth", 12)),
        "word_count": int(ent.get("words", 20)),
        "seed": _task_seed(cfg.master_seed, 51)})
    gap_bump = zooming_gap(system, phi, [dirac_z, ueq], [dirac_nz],
                           evaluator=evaluator)
    gap_null = zooming_gap(system, null_potential(), [dirac_z, ueq],
                           [dirac_nz],
                           evaluator=default_evaluator(system, null_potential()))
    entropies = [e[2] for e in gap_null.entries]
    zcfg = cfg.build_zooming_config()
    zsec = cfg.section("zooming", required=True)
    classifier = grid_classifier(
        system, zcfg, float(zsec.get("threshold", 0.05)),
        int(zsec.get("length", 100)),
        int(zsec.get("classifier_grid", 128)), cfg.master_seed)
    cara_sec = cfg.section("caratheodory")
    hyp_kwargs = dict(
        eps=float(cara_sec.get("eps", 0.25)),
        n_min=int(cara_sec.get("n_min", 2)),
        beta_bracket=(float(cara_sec.get("beta_lo", -1.0)),
                      float(cara_sec.get("beta_hi", 3.0))),
        word_count=int(cara_sec.get("words", 2)),
        seed=_task_seed(cfg.master_seed, 52),
        sample_points=int(cara_sec.get("points", 16384)))
    hyp_bump = hyperbolicity_gap(system, phi, classifier, **hyp_kwargs)
    hyp_null = hyperbolicity_gap(system, null_potential(), classifier,
                                 **hyp_kwargs)
    results = {
        "scale": phi.params["scale"],
        "zooming_gap": gap_bump.to_payload(),
        "zooming_gap_null": gap_null.to_payload(),
        "entropy_spread": (float(max(entropies) - min(entropies))
                           if entropies else 0.0),
        "hyperbolicity_gap": hyp_bump.to_payload(),
        "hyperbolicity_gap_null": hyp_null.to_payload(),
        "tolerances": {
            "entropy_cells": cells,
            "entropy_depth": int(ent.get("depth", 12)),
            "entropy_words": int(ent.get("words", 20)),
            "caratheodory_eps": hyp_kwargs["eps"],
            "caratheodory_beta_tol": 1e-3,
        },
    }
    return results, [], EXIT_OK


COMMANDS = {
    "axioms": cmd_axioms,
    "simulate": cmd_simulate,
    "zooming": cmd_zooming,
    "pressure": cmd_pressure,
    "entropy": cmd_entropy,
    "equilibrium": cmd_equilibrium,
    "potential-gap": cmd_potential_gap,
    "verify-vp": cmd_verify_vp,
}


def main(argv: Optional[list] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="zoomrds",
        description="Random skew-product experiments: contraction-time "
                    "detection, pressure, equilibrium states")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--strict", action="store_true")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, seed_override=args.seed,
                          out_override=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG

    out_dir = cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    payload = {
        "command": args.command,
        "config_path": os.path.basename(cfg.path),
        "config_hash": cfg.config_hash,
        "master_seed": cfg.master_seed,
        "seed_rule": SEED_RULE,
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    try:
        results, warnings, exit_hint = COMMANDS[args.command](cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except PreconditionError as exc:
        payload["error"] = {"type": "precondition", "message": str(exc)}
        payload["results"] = {}
        payload["warnings"] = []
        dump_json(os.path.join(out_dir, "results.json"), jsonable(payload))
        print(f"precondition failure: {exc}", file=_sys.stderr)
        return EXIT_PRECONDITION

    payload["results"] = results
    payload["warnings"] = warnings
    dump_json(os.path.join(out_dir, "results.json"), jsonable(payload))
    for w in warnings:
        print(f"warning: {w}", file=_sys.stderr)
    if exit_hint != EXIT_OK:
        return exit_hint
    if warnings and args.strict:
        return EXIT_WARN
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
