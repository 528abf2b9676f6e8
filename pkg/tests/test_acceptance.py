"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines; every criterion asserts its stated tolerance.
"""

import json
import math

import numpy as np
import pytest

from cloudreg import (
    ControllerState,
    PendulumParams,
    RandomSource,
    REFERENCE_P_MATRICES,
    TriangleCloud,
    backward_mean,
    controller_step,
    fire_corner_weights,
    forward_drops,
    global_term,
    is_positive_definite,
    linearize_pendulum,
    local_gains,
    local_term,
    locate_cell,
    lq_design,
    pendulum_deriv,
    rk4_step,
    verify_decomposition,
)
from cloudreg.cli import main
from cloudreg.config import load_config
from cloudreg.experiments import run_compare, run_simulate
from tests.test_controller import make_config


def _report(n, name):
    print(f"\nACCEPTANCE {n:02d} {name}: PASS")


def test_criterion_01_structure_identity():
    worst = 0.0
    for j in (1, 2, 3):
        for ku in (0.5, 1.0, 1.2):
            cert = verify_decomposition(make_config(j=j, ku=ku), grid_n=101)
            worst = max(worst, cert.max_residual)
            assert cert.max_residual <= 1e-12, (j, ku, cert.max_residual)
    _report(1, f"relay + PD identity, max residual {worst:.2e} <= 1e-12")


def test_criterion_02_weight_identity():
    cfg = make_config(j=2)
    rng = RandomSource(1001)
    worst = 0.0
    for _ in range(10_000):
        es = rng.uniform() * 2 - 1
        des = rng.uniform() * 2 - 1
        i, jj = locate_cell(es, cfg.pe), locate_cell(des, cfg.pde)
        w = fire_corner_weights(es, des, i, jj, cfg.pe, cfg.pde)
        worst = max(worst, abs(sum(w) - 1.0))
    assert worst <= 1e-12
    _report(2, f"weight identity over 1e4 draws, worst |sum-1| = {worst:.2e}")


def test_criterion_03_relay_structure():
    cfg = make_config(j=2, ku=1.2)
    p = cfg.pe
    m = 5
    rng = RandomSource(2002)
    from cloudreg.controller import deterministic_output_scaled

    for i in range(-2, 2):
        for j in range(-2, 2):
            levels = []
            for _ in range(100):
                es = p.center(i) + rng.uniform() * p.spacing
                des = p.center(j) + rng.uniform() * p.spacing
                out = deterministic_output_scaled(cfg, es, des)
                levels.append(out - local_term(es, des, i, j, p, p, cfg.ku, m))
            assert np.ptp(levels) <= 1e-12
            assert levels[0] == pytest.approx(global_term(i, j, cfg.ku, m), abs=1e-12)
            kp, kd = local_gains(i, j, p, p, cfg.ku, m)
            es = p.center(i) + 0.5 * p.spacing
            des = p.center(j) + 0.5 * p.spacing
            h = 1e-6
            fd_e = (
                local_term(es + h, des, i, j, p, p, cfg.ku, m)
                - local_term(es - h, des, i, j, p, p, cfg.ku, m)
            ) / (2 * h)
            fd_d = (
                local_term(es, des + h, i, j, p, p, cfg.ku, m)
                - local_term(es, des - h, i, j, p, p, cfg.ku, m)
            ) / (2 * h)
            assert abs(fd_e - kp) <= 1e-9
            assert abs(fd_d - kd) <= 1e-9
    _report(3, "relay constant per cell, local slopes equal (kp, kd) to 1e-9")


def test_criterion_04_vanishing_entropy_limit():
    det = make_config(j=2, ku=1.2)
    sto = make_config(j=2, ku=1.2, he=1e-12, mode="stochastic", drops=1000)
    rng = RandomSource(3003)
    probe = RandomSource(4004)
    worst = 0.0
    for _ in range(100):
        e = probe.uniform() * 2 - 1
        de = probe.uniform() * 2 - 1
        a = controller_step(e, de, det, ControllerState())
        b = controller_step(e, de, sto, ControllerState(), rng)
        worst = max(worst, abs(a - b))
    assert worst <= 1e-6
    _report(4, f"vanishing-entropy limit, worst |diff| = {worst:.2e} <= 1e-6")


def test_criterion_05_forward_backward_statistics():
    cloud = TriangleCloud(ex=0.3, en1=0.8, en2=1.2, he=0.05)
    sigma = 0.5 * (cloud.en1 + cloud.en2)
    k = 3000
    bound = 3.0 * sigma / math.sqrt(k)
    hits = 0
    for seed in range(1000):
        drops = forward_drops(cloud, k, RandomSource(seed))
        if abs(backward_mean(drops) - cloud.ex) <= bound:
            hits += 1
    assert hits >= 990
    _report(5, f"backward mean within 3*sigma/sqrt(k) on {hits}/1000 seeded trials")


def test_criterion_06_p_matrix_checks():
    for name, rows in REFERENCE_P_MATRICES.items():
        assert is_positive_definite(np.asarray(rows)), name
    _report(6, "reference P1..P4 all positive definite")


def test_criterion_07_lq_design():
    d0 = lq_design([[0.0]], [[1.0]], [[1.0]], [[1.0]])
    assert abs(d0.p[0, 0] - 1.0) <= 1e-12 and abs(d0.k[0, 0] - 1.0) <= 1e-12
    d1 = lq_design([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    root = 1.0 + math.sqrt(2.0)
    assert abs(d1.p[0, 0] - root) <= 1e-12 and abs(d1.k[0, 0] - root) <= 1e-12
    a, b = linearize_pendulum(PendulumParams())
    d = lq_design(a, b, np.diag([20.0, 0.1]), [[0.1]])
    assert d.residual <= 1e-8
    assert np.all(np.linalg.eigvals(a - b.reshape(2, 1) @ d.k).real < 0)
    _report(7, f"Riccati residual {d.residual:.2e} <= 1e-8, closed loop Hurwitz")


def test_criterion_08_pendulum_physics():
    p = PendulumParams()
    assert pendulum_deriv((0.0, 0.0), 0.0, p) == (0.0, 0.0)
    a, b = linearize_pendulum(p)
    h = 1e-6
    jac = np.empty((2, 2))
    for col, dx in enumerate(np.eye(2) * h):
        plus = np.array(pendulum_deriv(np.array([0.0, 0.0]) + dx, 0.0, p))
        minus = np.array(pendulum_deriv(np.array([0.0, 0.0]) - dx, 0.0, p))
        jac[:, col] = (plus - minus) / (2 * h)
    assert np.abs(jac - a).max() <= 1e-6

    def integrate(dt):
        x = np.array([1.0])
        for _ in range(round(1.0 / dt)):
            x = rk4_step(lambda x, u: -x, x, 0.0, dt)
        return abs(x[0] - math.exp(-1.0))

    ratio = integrate(0.1) / integrate(0.05)
    assert 12.0 <= ratio <= 20.0
    _report(8, f"origin exact, Jacobian match <= 1e-6, RK4 ratio {ratio:.1f} in [12, 20]")


def test_criterion_09a_pendulum_preset_stabilizes(tmp_path):
    resolved = load_config("paper-pendulum")
    artifact = run_simulate(resolved, tmp_path / "pendulum", resolved["seed"])
    rows = artifact.path("trajectory").read_text().strip().split("\n")[1:]
    t = np.array([float(r.split(",")[0]) for r in rows])
    theta_deg = np.degrees(np.array([float(r.split(",")[1]) for r in rows]))
    inside = np.abs(theta_deg) < 1.0
    outside_idx = np.nonzero(~inside)[0]
    entered_at = t[outside_idx[-1] + 1] if outside_idx.size else t[0]
    assert entered_at <= 10.0
    assert np.all(np.abs(theta_deg[t >= 8.0]) < 1.0)
    _report(
        9, f"(a) preset holds |theta| < 1 deg from t = {entered_at:.2f} s on"
    )


def test_criterion_09bc_compare_bounded_and_reported(tmp_path, capsys):
    resolved = load_config("paper-compare")
    artifact = run_compare(resolved, tmp_path / "compare", resolved["seed"])
    rows = json.loads(artifact.path("compare").read_text())
    assert len(rows) == 6
    frictional_max = {}
    for key, row in sorted(rows.items()):
        assert "metrics" in row, row.get("error")
        amp = row["metrics"]["max_amplitude_deg"]
        assert amp <= 30.0, (key, amp)
        if row["condition"] == "frictional":
            frictional_max[row["controller"]] = amp
    with capsys.disabled():
        print("\nACCEPTANCE 09 (b) all controllers bounded by 30 deg under friction: PASS")
        print("ACCEPTANCE 09 (c) metrics emitted for comparison (reference values in README, not asserted):")
        for key, row in sorted(rows.items()):
            m = row["metrics"]
            print(
                f"    {key:24s} max|theta| = {m['max_amplitude_deg']:8.4g} deg, "
                f"chatter = {m['chatter_width_deg']:8.4g} deg, "
                f"settling = {m['settling_time_s']}"
            )


def test_criterion_10_byte_determinism(tmp_path):
    pairs = []
    for cmd, preset, files in (
        (["gen-cloud"], "gen-cloud-demo", ("drops.csv", "summary.json")),
        (["simulate"], "paper-pendulum", ("trajectory.csv", "metrics.json")),
        (["decompose"], "paper-decompose", ("decomposition.json", "relay_table.csv")),
    ):
        a, b = tmp_path / f"{preset}-a", tmp_path / f"{preset}-b"
        assert main([*cmd, "--config", preset, "--out", str(a)]) == 0
        assert main([*cmd, "--config", preset, "--out", str(b)]) == 0
        for f in files:
            assert (a / f).read_bytes() == (b / f).read_bytes(), f
            pairs.append(f"{preset}/{f}")
    _report(10, f"byte-identical reruns for {len(pairs)} artifacts")
