import json
import os
import re

from zoomrds.cli import main

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")


def cfg(name):
    return os.path.join(CONFIGS, name)


def read_results(out_dir):
    with open(os.path.join(out_dir, "results.json")) as fh:
        return json.load(fh)


def canonical_bytes(out_dir):
    """results.json bytes with the timestamp line removed."""
    with open(os.path.join(out_dir, "results.json"), "rb") as fh:
        raw = fh.read()
    return re.sub(rb'^\s*"timestamp": "[^"]*",?\n', b"", raw,
                  flags=re.MULTILINE)


def test_axioms_command_passes_on_doubling(tmp_path):
    out = str(tmp_path / "ax")
    assert main(["axioms", "--config", cfg("doubling.toml"),
                 "--out", out]) == 0
    res = read_results(out)
    assert res["results"]["all_passed"] is True
    assert os.path.exists(os.path.join(out, "axioms.csv"))


def test_axioms_harmonic_family_exit_4_with_counterexample(tmp_path):
    out = str(tmp_path / "harm")
    assert main(["axioms", "--config", cfg("axioms_harmonic.toml"),
                 "--out", out]) == 4
    res = read_results(out)
    assert res["results"]["all_passed"] is False
    assert res["results"]["axioms"]["summable"]["counterexample"]


def test_config_error_exit_2(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[system]\nfamily = 'martian'\n[contraction]\n"
                   "kind = 'exponential'\nrate = 0.5\n")
    assert main(["pressure", "--config", str(bad),
                 "--out", str(tmp_path / "o")]) == 2
    missing = tmp_path / "missing.toml"
    assert main(["pressure", "--config", str(missing),
                 "--out", str(tmp_path / "o2")]) == 2
    broken = tmp_path / "broken.toml"
    broken.write_text("[system\n")
    assert main(["pressure", "--config", str(broken),
                 "--out", str(tmp_path / "o3")]) == 2


def test_simulate_orbit_dump_columns(tmp_path):
    out = str(tmp_path / "sim")
    assert main(["simulate", "--config", cfg("doubling.toml"),
                 "--out", out]) == 0
    lines = open(os.path.join(out, "orbit_000.csv")).read().splitlines()
    assert lines[0] == "step,symbol,x,log_deriv,birkhoff_sum"
    assert lines[1].startswith("0,0,0.3,")
    assert len(lines) == 102  # header + 100 steps + final point


def test_pressure_command_doubling(tmp_path):
    out = str(tmp_path / "p")
    assert main(["pressure", "--config", cfg("doubling.toml"),
                 "--out", out]) == 0
    res = read_results(out)
    assert abs(res["results"]["separated"]["value"] - 0.6931) < 0.05
    assert res["results"]["cross_check_difference"] < 0.1
    assert res["config_hash"]
    assert res["seed_rule"].startswith("numpy SeedSequence")


def test_verify_vp_random_mix(tmp_path):
    out = str(tmp_path / "vp")
    assert main(["verify-vp", "--config",
                 cfg("random_doubling_tripling.toml"), "--out", out]) == 0
    res = read_results(out)
    var = res["results"]["variational"]
    assert var["passed"] is True
    assert abs(var["gap"]) <= 0.07


def test_potential_gap_on_sink(tmp_path):
    out = str(tmp_path / "gap")
    assert main(["potential-gap", "--config", cfg("sink.toml"),
                 "--out", out]) == 0
    res = read_results(out)["results"]
    assert abs(res["scale"] - 2.386294361119891) < 1e-9
    assert res["zooming_gap"]["gap"] >= 0.6431
    assert res["hyperbolicity_gap_null"]["gap"] > 0
    assert res["hyperbolicity_gap"]["gap"] > res["hyperbolicity_gap_null"]["gap"]


def test_potential_gap_precondition_exit_4(tmp_path):
    text = open(cfg("sink.toml")).read().replace("x0 = 1.0", "x0 = 0.3")
    path = tmp_path / "badgap.toml"
    path.write_text(text)
    out = str(tmp_path / "g4")
    assert main(["potential-gap", "--config", str(path),
                 "--out", out]) == 4
    res = read_results(out)
    assert res["error"]["type"] == "precondition"


def test_zooming_command_and_strict_warning(tmp_path):
    out = str(tmp_path / "z")
    assert main(["zooming", "--config", cfg("sink.toml"),
                 "--out", out]) == 0
    res = read_results(out)
    assert 0.0 < res["results"]["fraction_zooming_like"] < 1.0
    assert res["warnings"]  # basin pairs never separate
    out2 = str(tmp_path / "z2")
    assert main(["zooming", "--config", cfg("sink.toml"), "--out", out2,
                 "--strict"]) == 3


def test_equilibrium_command_outputs(tmp_path):
    out = str(tmp_path / "eq")
    assert main(["equilibrium", "--config", cfg("doubling.toml"),
                 "--out", out]) == 0
    res = read_results(out)
    assert abs(res["results"]["cocycle_pressure"] - 0.69314718) < 1e-6
    assert res["results"]["stationarity_defect"] <= 0.01
    assert os.path.exists(os.path.join(out, "equilibrium_weights.csv"))
    model = json.load(open(os.path.join(out, "ulam_model.json")))
    assert model["cells"] == 256
    assert len(model["triplets"]) == 2 * 256


def test_entropy_command(tmp_path):
    out = str(tmp_path / "ent")
    assert main(["entropy", "--config", cfg("doubling.toml"),
                 "--out", out]) == 0
    res = read_results(out)
    assert abs(res["results"]["value"] - 0.6931) < 0.05


def test_seed_override_changes_results(tmp_path):
    a = str(tmp_path / "a")
    b = str(tmp_path / "b")
    main(["zooming", "--config", cfg("doubling.toml"), "--out", a])
    main(["zooming", "--config", cfg("doubling.toml"), "--out", b,
          "--seed", "999"])
    ra, rb = read_results(a), read_results(b)
    assert ra["master_seed"] != rb["master_seed"]


def test_results_byte_identical_across_runs_and_workers(tmp_path):
    a = str(tmp_path / "r1")
    b = str(tmp_path / "r2")
    main(["zooming", "--config", cfg("doubling.toml"), "--out", a])
    main(["zooming", "--config", cfg("doubling.toml"), "--out", b])
    assert canonical_bytes(a) == canonical_bytes(b)
    text = open(cfg("doubling.toml")).read().replace("workers = 1",
                                                     "workers = 3")
    cfg_w = tmp_path / "workers.toml"
    cfg_w.write_text(text)
    c = str(tmp_path / "r3")
    main(["zooming", "--config", str(cfg_w), "--out", c])
    ra = json.loads(canonical_bytes(a))
    rc = json.loads(canonical_bytes(c))
    for key in ("config_hash", "config_path"):
        ra.pop(key), rc.pop(key)
    assert ra == rc
    assert open(os.path.join(a, "ensemble.csv")).read() == \
        open(os.path.join(c, "ensemble.csv")).read()
