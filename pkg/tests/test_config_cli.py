import json
import math

import numpy as np
import pytest

from cloudreg.cli import main
from cloudreg.config import ConfigError, dumps_toml, load_config, resolve_config
from cloudreg.clouds import TriangleCloud, triangle_membership


# -- config schema ---------------------------------------------------------------


def test_presets_load_and_resolve():
    for name in ("paper-pendulum", "paper-lti", "paper-compare", "paper-decompose", "gen-cloud-demo"):
        resolved = load_config(name)
        assert resolved["name"] == name
        assert "kind" in resolved


def test_unknown_keys_rejected_by_name():
    with pytest.raises(ConfigError, match="mistyped"):
        resolve_config({"kind": "simulate", "mistyped": 1})
    with pytest.raises(ConfigError, match="sim.dtt"):
        resolve_config({"kind": "simulate", "sim": {"dtt": 0.1}})
    with pytest.raises(ConfigError, match=r"\[cloud\]"):
        resolve_config({"kind": "simulate", "cloud": {"ex": 0.0}})


def test_kind_required_and_validated():
    with pytest.raises(ConfigError, match="kind"):
        resolve_config({})
    with pytest.raises(ConfigError, match="kind"):
        resolve_config({"kind": "fly"})


def test_type_checking():
    with pytest.raises(ConfigError, match="seed"):
        resolve_config({"kind": "stability", "seed": "abc"})
    with pytest.raises(ConfigError, match="sim.dt"):
        resolve_config({"kind": "simulate", "sim": {"dt": "fast"}})


def test_setpoint_profile_accepted():
    r = resolve_config(
        {"kind": "simulate", "sim": {"setpoint": [[0.0, 0.0], [1.0, 2.0]]}}
    )
    assert r["sim"]["setpoint"] == [[0.0, 0.0], [1.0, 2.0]]
    with pytest.raises(ConfigError, match="setpoint"):
        resolve_config({"kind": "simulate", "sim": {"setpoint": [[0.0], [1.0]]}})


def test_dumps_toml_round_trip(tmp_path):
    resolved = load_config("paper-pendulum")
    text = dumps_toml(resolved)
    p = tmp_path / "rt.toml"
    p.write_text(text)
    again = load_config(p)
    again["name"] = resolved["name"]  # stem differs; everything else must not
    assert again == resolved


def test_unknown_preset_lists_alternatives():
    with pytest.raises(ConfigError, match="paper-pendulum"):
        load_config("no-such-preset")


# -- CLI end to end ---------------------------------------------------------------


def test_gen_cloud_cli_deterministic_and_on_curve(tmp_path, capsys):
    cfg = tmp_path / "g.toml"
    cfg.write_text(
        'kind = "gen-cloud"\nseed = 3\n[cloud]\nex = 0.0\nen1 = 1.0\nen2 = 1.0\n'
        "he = 0.0\ncount = 3000\n"
    )
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["gen-cloud", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["gen-cloud", "--config", str(cfg), "--out", str(out2)]) == 0
    b1 = (out1 / "drops.csv").read_bytes()
    assert b1 == (out2 / "drops.csv").read_bytes()
    assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()
    # he = 0: every row sits on the base triangle curve
    c = TriangleCloud(0.0, 1.0, 1.0)
    rows = b1.decode().strip().split("\n")[1:]
    assert len(rows) == 3000
    for row in rows[:200]:
        x, mu = (float(v) for v in row.split(","))
        assert mu == pytest.approx(triangle_membership(c, x), abs=1e-15)
    summary = json.loads((out1 / "summary.json").read_text())
    assert abs(summary["backward_mean"]) <= 0.06  # 3 sigma / sqrt(3000)


def test_cli_rejects_invalid_cloud_parameter(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('kind = "gen-cloud"\n[cloud]\nen1 = -1.0\n')
    assert main(["gen-cloud", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "en1" in err


def test_cli_kind_mismatch(tmp_path, capsys):
    assert main(["simulate", "--config", "gen-cloud-demo", "--out", str(tmp_path)]) == 1
    assert "kind" in capsys.readouterr().err


def test_simulate_cli_writes_artifacts_and_trace(tmp_path):
    cfg = tmp_path / "s.toml"
    cfg.write_text(
        'kind = "simulate"\nseed = 5\n'
        '[plant]\ntype = "pendulum"\n'
        '[controller]\ntype = "cloud"\nmode = "deterministic"\ndrops = 1\n'
        'ke = 0.1908\nkde = 0.0367\nku = 1.2\nh = 2000.0\nderror = "rate"\n'
        "[sim]\ndt = 0.005\nt_final = 1.0\ncontrol_every = 2\nx0 = [0.2, 0.0]\n"
    )
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--trace"]) == 0
    for f in ("trajectory.csv", "metrics.json", "plot.svg", "resolved.toml", "trace.csv"):
        assert (out / f).is_file(), f
    trace = (out / "trace.csv").read_text().strip().split("\n")
    assert trace[0] == "es,des,i,j,w1,w2,w3,w4,ustar"
    assert len(trace) == 1 + math.ceil((1.0 / 0.005 + 1) / 2)
    w = [float(v) for v in trace[1].split(",")[4:8]]
    assert sum(w) == pytest.approx(1.0)


def test_resolved_config_round_trip_reproduces_bytes(tmp_path):
    out1 = tmp_path / "r1"
    out2 = tmp_path / "r2"
    assert main(["simulate", "--config", "paper-pendulum", "--out", str(out1), "--seed", "33"]) == 0
    assert main(["simulate", "--config", str(out1 / "resolved.toml"), "--out", str(out2)]) == 0
    assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()
    assert (out1 / "metrics.json").read_bytes() == (out2 / "metrics.json").read_bytes()
    assert (out1 / "plot.svg").read_bytes() == (out2 / "plot.svg").read_bytes()


def test_seed_env_override_and_flag_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "g.toml"
    cfg.write_text('kind = "gen-cloud"\nseed = 1\n[cloud]\ncount = 50\nhe = 0.0\n')
    flag_out = tmp_path / "flag"
    env_out = tmp_path / "env"
    monkeypatch.setenv("CLOUDREG_SEED", "222")
    assert main(["gen-cloud", "--config", str(cfg), "--out", str(env_out)]) == 0
    assert json.loads((env_out / "summary.json").read_text())["seed"] == 222
    assert main(["gen-cloud", "--config", str(cfg), "--out", str(flag_out), "--seed", "9"]) == 0
    assert json.loads((flag_out / "summary.json").read_text())["seed"] == 9
    monkeypatch.setenv("CLOUDREG_OUT", str(tmp_path / "envdir"))
    monkeypatch.delenv("CLOUDREG_SEED")
    assert main(["gen-cloud", "--config", str(cfg)]) == 0
    assert (tmp_path / "envdir" / "drops.csv").is_file()


def test_decompose_cli_refuses_stochastic(tmp_path, capsys):
    cfg = tmp_path / "d.toml"
    cfg.write_text(
        'kind = "decompose"\n[controller]\nmode = "stochastic"\n[decompose]\ngrid_n = 11\n'
    )
    assert main(["decompose", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "deterministic" in capsys.readouterr().err


def test_decompose_cli_artifacts(tmp_path):
    out = tmp_path / "d"
    assert main(["decompose", "--config", "paper-decompose", "--out", str(out)]) == 0
    rep = json.loads((out / "decomposition.json").read_text())
    assert rep["certified"] is True
    assert rep["max_residual"] <= 1e-12
    assert rep["product_form_max_residual"] > 0.01
    rows = (out / "relay_table.csv").read_text().strip().split("\n")
    assert rows[0] == "i,j,u_g"
    assert len(rows) == 1 + (2 * rep["j"]) ** 2
    assert (out / "relay.svg").read_text().startswith("<svg")


def test_stability_cli(tmp_path):
    out = tmp_path / "s"
    assert main(["stability", "--out", str(out)]) == 0
    rep = json.loads((out / "stability.json").read_text())
    assert rep["phi_k"] == 0.4 and rep["gamma"] == 3.0
    assert all(m["positive_definite"] for m in rep["matrices"].values())
    assert len(rep["matrices"]) == 4


def test_plot_cli_trajectory_and_drops(tmp_path):
    run = tmp_path / "run"
    assert main(["simulate", "--config", "paper-pendulum", "--out", str(run)]) == 0
    svg1 = tmp_path / "t.svg"
    assert main(["plot", str(run / "trajectory.csv"), "--out", str(svg1)]) == 0
    text = svg1.read_text()
    assert text.startswith("<svg")
    assert text.count("<polyline") == 5  # x1, x2, y, u, r
    # identical inputs -> identical bytes
    svg2 = tmp_path / "t2.svg"
    assert main(["plot", str(run / "trajectory.csv"), "--out", str(svg2)]) == 0
    assert svg1.read_bytes() == svg2.read_bytes()


def test_plot_cli_rejects_unknown_and_empty(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("alpha,beta\n1,2\n")
    assert main(["plot", str(bad), "--out", str(tmp_path / "x.svg")]) == 1
    assert "bad.csv" in capsys.readouterr().err
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["plot", str(empty), "--out", str(tmp_path / "y.svg")]) == 1
    assert "empty.csv" in capsys.readouterr().err
    assert main(["plot", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "z.svg")]) == 1
    assert "missing.csv" in capsys.readouterr().err


def test_compare_cli_smoke(tmp_path):
    # trimmed horizon keeps this a smoke test; full run lives in acceptance
    cfg = tmp_path / "c.toml"
    base = load_config("paper-compare")
    base["sim"]["t_final"] = 1.0
    base["controller"]["drops"] = 1000
    cfg.write_text(dumps_toml(base))
    out = tmp_path / "cmp"
    assert main(["compare", "--config", str(cfg), "--out", str(out)]) == 0
    rows = json.loads((out / "compare.json").read_text())
    assert len(rows) == 6
    assert all("metrics" in r for r in rows.values())
    assert (out / "compare_frictionless.svg").is_file()
    assert (out / "compare_frictional.svg").is_file()


def _rules_engine_cfg(tmp_path, skew):
    cfg = tmp_path / f"rules-{skew[0]}-{skew[1]}.toml"
    cfg.write_text(
        'kind = "simulate"\nseed = 2\n'
        '[plant]\ntype = "pendulum"\n'
        '[controller]\ntype = "cloud"\nengine = "rules"\nmode = "stochastic"\n'
        'drops = 1000\nke = 0.1908\nkde = 0.0367\nku = 1.2\nh = 2000.0\n'
        f'he = 0.02\nderror = "rate"\npremise_skew = [{skew[0]}, {skew[1]}]\n'
        "[sim]\ndt = 0.005\nt_final = 4.0\ncontrol_every = 2\nx0 = [0.2, 0.0]\n"
    )
    return cfg


def test_rules_engine_symmetric_stabilizes(tmp_path):
    out = tmp_path / "rules-sym"
    cfg = _rules_engine_cfg(tmp_path, (1.0, 1.0))
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    rows = (out / "trajectory.csv").read_text().strip().split("\n")
    theta_end = float(rows[-1].split(",")[1])
    assert abs(theta_end) < 0.05


def test_rules_engine_skewed_premises_settle_off_center(tmp_path):
    # asymmetric flanks bias the rule balance, so the loop parks at a
    # nonzero stable offset instead of the origin
    out = tmp_path / "rules-skew"
    cfg = _rules_engine_cfg(tmp_path, (0.8, 1.2))
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    rows = (out / "trajectory.csv").read_text().strip().split("\n")
    theta = np.array([float(r.split(",")[1]) for r in rows[1:]])
    assert np.abs(theta).max() < 0.6
    assert 0.1 < abs(theta[-1]) < 0.6
    assert np.ptp(theta[-100:]) < 0.05  # parked, not cycling
