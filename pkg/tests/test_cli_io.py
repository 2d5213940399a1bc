import json
import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavedecay import corpus
from wavedecay.cli import EXIT_CONFIG, EXIT_INPUT, EXIT_OK, GHOST_COLUMNS, OBSERVABLE_COLUMNS, main
from wavedecay.config import ConfigError, ExperimentConfig
from wavedecay.io_formats import (
    SNAPSHOT_MAGIC,
    InputError,
    format_real,
    read_csv,
    read_snapshot,
    write_columns,
    write_snapshot,
)


def write_config(path, obj):
    path.write_text(json.dumps(obj))
    return path


def sim_config(name, eps, t_end=4.0, **extra):
    return {
        "task": "simulate",
        "system": {"corpus": name},
        "simulate": {
            "grid": {"h": 0.125, "t_end": t_end},
            "data": {"eps": eps, "f_scale": [0.0], "g_scale": [6.0]},
            "output_every": 4,
            **extra,
        },
    }


def cli(tmp_path, command, obj, out="out", seed=None):
    cfg = write_config(tmp_path / f"{command}.json", obj)
    argv = [command, "--config", str(cfg), "--out", str(tmp_path / out)]
    if seed is not None:
        argv += ["--seed", str(seed)]
    return main(argv), tmp_path / out


# -- formats


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_reals_round_trip_exactly(x):
    assert float(format_real(x)) == x


def test_nonfinite_reals():
    assert format_real(math.nan) == "nan" and format_real(-math.inf) == "-inf"


def test_csv_header_and_line_endings(tmp_path):
    p = write_columns(tmp_path / "a.csv", {"t": [0.1, 0.2], "energy": [1 / 3, 2.0]})
    raw = p.read_bytes()
    assert raw.startswith(b"t,energy\n") and b"\r" not in raw
    assert b"0.33333333333333331" in raw
    back = read_csv(p)
    assert back["energy"][0] == 1 / 3


def test_csv_errors(tmp_path):
    with pytest.raises(InputError):
        read_csv(tmp_path / "missing.csv")
    (tmp_path / "bad.csv").write_text("t,e\n1,2\n3\n")
    with pytest.raises(InputError, match=":3"):
        read_csv(tmp_path / "bad.csv")


def test_snapshot_round_trip(tmp_path, rng):
    u = rng.standard_normal((2, 5, 5))
    p = write_snapshot(tmp_path / "s.bin", {"u": u, "u_prev": -u}, {"t": 1.5})
    raw = p.read_bytes()
    assert raw[:8] == SNAPSHOT_MAGIC
    (n,) = struct.unpack("<Q", raw[8:16])
    assert json.loads(raw[16 : 16 + n])["dtype"] == "<f8"
    meta, arrays = read_snapshot(p)
    assert meta["t"] == 1.5
    assert np.array_equal(arrays["u"], u) and np.array_equal(arrays["u_prev"], -u)


def test_bundled_corpus_matches_builders():
    for name, (spec, weight) in corpus.corpus().items():
        s, w = corpus.load(name)
        assert s.to_json() == spec.to_json() and w.to_json() == weight.to_json()


# -- config


@pytest.mark.parametrize(
    "obj",
    [
        {"system": {"corpus": "rotating_weight"}, "weight": {"corpus": "rotating_weight"}, "task": "check"},
        sim_config("dissipator", 0.3, rays=[[0.0, 0.0]], snapshot_steps=[3]),
        {"system": {"corpus": "dissipator"}, "profile": {"random_rays": 4, "rays": [{"theta": 0, "sigma": 0, "V0": [1]}]}},
    ],
)
def test_config_round_trip(obj, tmp_path):
    cfg = ExperimentConfig.from_json(obj, tmp_path)
    doc = cfg.to_json()
    again = ExperimentConfig.from_json(json.loads(json.dumps(doc)), tmp_path)
    assert again == cfg and again.to_json() == doc


@pytest.mark.parametrize(
    "obj, match",
    [
        ({"system": {"corpus": "free"}, "bogus": 1}, "unknown"),
        ({"system": {"corpus": "nope"}}, "nope"),
        ({"task": "dance", "system": {"corpus": "free"}}, "task"),
        (sim_config("free", 0.3) | {"simulate": {"grid": {"h": 0.1, "dt": 0.1, "half_width": 5.0, "t_end": 1}}}, "CFL"),
        ({"system": {"corpus": "free"}, "weight": {"corpus": "rotating_weight"}}, "components"),
    ],
)
def test_config_errors(obj, match, tmp_path):
    with pytest.raises(ConfigError, match=match):
        ExperimentConfig.from_json(obj, tmp_path)


# -- exit codes


def test_check_rotating_weight(tmp_path):
    obj = {"system": {"corpus": "rotating_weight"}, "weight": {"corpus": "rotating_weight"},
           "check": {"n_theta": 64, "n_y": 128}}
    code, out = cli(tmp_path, "check", obj)
    assert code == EXIT_OK
    report = json.loads((out / "check.json").read_text())
    assert report["agemi"]["verdict"] == "holds_strictly"


def test_check_empty_tensors_hold(tmp_path):
    code, out = cli(tmp_path, "check", {"system": {"n_components": 2}, "check": {"n_theta": 32, "n_y": 64}})
    report = json.loads((out / "check.json").read_text())
    assert code == EXIT_OK
    assert report["null_quadratic"]["verdict"] == report["null_cubic"]["verdict"] == "holds"


def test_bad_index_exits_2_and_cites_ordinal(tmp_path, capsys):
    system = {"n_components": 1, "quadratic": [{"j": 1, "k": 1, "l": 1, "a": 0, "b": 0, "value": 1.0},
                                               {"j": 1, "k": 2, "l": 1, "a": 0, "b": 0, "value": 1.0}]}
    code, _ = cli(tmp_path, "check", {"system": system})
    assert code == EXIT_CONFIG
    assert "#2" in capsys.readouterr().err


def test_malformed_json_exits_2_naming_path(tmp_path, capsys):
    cfg = tmp_path / "broken.json"
    cfg.write_text('{"system": {"corpus": "free"},\n  "seed": }')
    assert main(["check", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "broken.json" in err and "line 2" in err


def test_undersized_domain_exits_2_before_stepping(tmp_path):
    obj = sim_config("free", 0.3)
    obj["simulate"]["grid"] = {"h": 0.125, "dt": 0.05, "half_width": 2.0, "t_end": 4.0}
    code, out = cli(tmp_path, "simulate", obj)
    assert code == EXIT_CONFIG
    assert not (out / "observables.csv").exists()


def test_task_mismatch_exits_2(tmp_path):
    code, _ = cli(tmp_path, "check", sim_config("free", 0.3))
    assert code == EXIT_CONFIG


def test_report_on_empty_dir_exits_3(tmp_path):
    (tmp_path / "empty").mkdir()
    code, _ = cli(tmp_path, "report", {"task": "report", "report": {"inputs": ["empty"]}})
    assert code == EXIT_INPUT
    code, _ = cli(tmp_path, "report", {"task": "report", "report": {"inputs": []}})
    assert code == EXIT_INPUT


def test_report_on_misaligned_series_exits_3(tmp_path):
    code, run = cli(tmp_path, "simulate", sim_config("free", 0.3), out="free")
    assert code == EXIT_OK
    lines = (run / "ghost.csv").read_text().splitlines()
    (run / "ghost.csv").write_text("\n".join(lines[:-1]) + "\n")
    code, _ = cli(tmp_path, "report", {"task": "report", "report": {"inputs": ["free"]}})
    assert code == EXIT_INPUT


def test_missing_config_exits_3(tmp_path):
    assert main(["check", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == EXIT_INPUT


# -- commands


def test_profile_rays(tmp_path):
    obj = {
        "system": {"corpus": "dissipator"},
        "weight": {"corpus": "dissipator"},
        "profile": {"rays": [{"theta": 0.0, "sigma": 0.0, "V0": [1.0]}, {"theta": 1.0, "sigma": -1.0, "V0": [0.0]}],
                    "t1": 1e3, "steps_per_decade": 64},
    }
    code, out = cli(tmp_path, "profile", obj)
    assert code == EXIT_OK
    ray = read_csv(out / "ray_000.csv")
    assert list(ray) == ["t", "s", "V_1", "Phi", "bound"]
    np.testing.assert_allclose(ray["V_1"], 1 / np.sqrt(1 + np.log(ray["t"] / 2)), rtol=1e-6)
    assert np.all(read_csv(out / "ray_001.csv")["V_1"] == 0)
    summary = json.loads((out / "profile_summary.json").read_text())
    assert summary["rays"][0]["mats"]["holds"]


def test_profile_null_cubic_rays_constant(tmp_path):
    obj = {"system": {"corpus": "null_forms"}, "profile": {"random_rays": 3, "t1": 1e3, "steps_per_decade": 32}}
    code, out = cli(tmp_path, "profile", obj, seed=7)
    assert code == EXIT_OK
    for i in range(3):
        ray = read_csv(out / f"ray_{i:03d}.csv")
        for k in ("V_1", "V_2"):
            np.testing.assert_allclose(ray[k], ray[k][0], atol=1e-14)


def test_profile_overflow_recorded_per_ray(tmp_path):
    obj = {"system": {"corpus": "cubic_violator"},
           "profile": {"rays": [{"theta": 0, "sigma": 0, "V0": [3.0]}, {"theta": 0, "sigma": 0, "V0": [0.1]}], "t1": 1e6}}
    code, out = cli(tmp_path, "profile", obj)
    assert code == EXIT_OK
    rays = json.loads((out / "profile_summary.json").read_text())["rays"]
    assert rays[0]["status"] == "overflow" and rays[1]["status"] == "completed"


def test_simulate_zero_eps_all_zero(tmp_path):
    code, out = cli(tmp_path, "simulate", sim_config("dissipator", 0.0))
    assert code == EXIT_OK
    obs = read_csv(out / "observables.csv")
    assert list(obs) == list(OBSERVABLE_COLUMNS)
    assert all(not obs[c].any() for c in OBSERVABLE_COLUMNS[1:])
    assert list(read_csv(out / "ghost.csv")) == list(GHOST_COLUMNS)


def test_simulate_outputs(tmp_path):
    code, out = cli(tmp_path, "simulate", sim_config("dissipator", 1.0, rays=[[0.0, 0.0]], snapshot_steps=[0, 8]))
    assert code == EXIT_OK
    obs = read_csv(out / "observables.csv")
    assert np.all(np.diff(obs["energy"]) <= 1e-10)
    ray = read_csv(out / "ray_000.csv")
    assert list(ray) == ["t", "U_1"] and ray["t"][0] >= 2.0
    meta, arrays = read_snapshot(out / "snapshot_000008.bin")
    assert meta["step"] == 8 and arrays["u"].shape == arrays["u_prev"].shape
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "completed"
    assert ExperimentConfig.from_json(summary["config"]).to_json() == summary["config"]


def _tree(directory):
    return {p.relative_to(directory): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


def test_simulate_and_report_deterministic(tmp_path):
    obj = sim_config("dissipator", 1.0, rays=[[0.0, 0.0]])
    cli(tmp_path, "simulate", obj, out="a")
    cli(tmp_path, "simulate", obj, out="b")
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")
    rep = {"task": "report", "report": {"inputs": ["a"]}}
    cli(tmp_path, "report", rep, out="r")
    first = _tree(tmp_path / "r")
    cli(tmp_path, "report", rep, out="r")
    assert _tree(tmp_path / "r") == first


def test_profile_seed_controls_random_rays(tmp_path):
    obj = {"system": {"corpus": "dissipator"}, "profile": {"random_rays": 2, "t1": 100.0, "steps_per_decade": 16}}
    cli(tmp_path, "profile", obj, out="a", seed=1)
    cli(tmp_path, "profile", obj, out="b", seed=1)
    cli(tmp_path, "profile", obj, out="c", seed=2)
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b") != _tree(tmp_path / "c")


def test_report_three_canonical_runs(tmp_path):
    for name, eps, t_end in (("free", 0.3, 6.0), ("dissipator", 1.0, 6.0), ("quadratic_violator", 3.0, 20.0)):
        code, _ = cli(tmp_path, "simulate", sim_config(name, eps, t_end), out=name)
        assert code == EXIT_OK
    rep = {"task": "report", "report": {"inputs": ["free", "dissipator", "quadratic_violator"]}}
    code, out = cli(tmp_path, "report", rep, out="report")
    assert code == EXIT_OK
    verdicts = {k: v["verdict"] for k, v in json.loads((out / "report.json").read_text()).items()}
    assert verdicts == {"free": "conservative", "dissipator": "dissipative", "quadratic_violator": "blow-up"}
    diss = json.loads((out / "dissipator" / "report.json").read_text())
    assert diss["ghost_identity"]["source_nonpositive"]
    assert list(read_csv(out / "dissipator" / "r.csv")) == ["t", "r"]
