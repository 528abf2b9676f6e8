"""Config-driven experiment runners behind the CLI subcommands.

Every runner takes a resolved config (see :mod:`cloudreg.config`), writes
its artifacts plus the resolved config into one output directory, and
returns a :class:`RunArtifact`. Identical (config, seed) pairs reproduce
identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import svgplot
from .analysis import (
    LqController,
    build_stability_report,
    compute_metrics,
    lq_design,
)
from .clouds import TriangleCloud, backward_estimate_normal, backward_mean, drops_to_csv, forward_drops
from .config import ConfigError, dumps_toml
from .controller import (
    CloudController,
    ConsequentFamily,
    ControllerConfig,
    GeneralCloudController,
    InferenceRule,
    build_partition,
)
from .decomposition import verify_decomposition
from .plants import (
    FrictionModel,
    PendulumParams,
    PendulumPlant,
    SimConfig,
    StateSpacePlant,
    ZeroController,
    given_linear_system,
    linearize_pendulum,
    make_lti_from_tf,
    simulate_closed_loop,
)
from .rng import RandomSource, derive_seed

RAD_TO_DEG = 180.0 / math.pi


@dataclass(frozen=True)
class RunArtifact:
    """Paths of one run's outputs plus the seed that produced them."""

    name: str
    seed: int
    paths: tuple[tuple[str, str], ...]

    def path(self, label: str) -> Path:
        for k, v in self.paths:
            if k == label:
                return Path(v)
        raise KeyError(label)


def _write(outdir: Path, filename: str, text: str) -> tuple[str, str]:
    outdir.mkdir(parents=True, exist_ok=True)
    p = outdir / filename
    p.write_text(text)
    return filename.rsplit(".", 1)[0], str(p)


def _json_dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def controller_config_from(c: dict) -> ControllerConfig:
    """Build the grid-engine config from a [controller] table."""
    pe = build_partition(-c["l"], c["l"], c["j"], c["he"])
    pde = build_partition(-c["l"], c["l"], c["j"], c["he"])
    return ControllerConfig(
        ke=c["ke"],
        kde=c["kde"],
        ku=c["ku"],
        pe=pe,
        pde=pde,
        consequents=ConsequentFamily(h=c["h"], j=c["j"]),
        drops=c["drops"],
        mode=c["mode"],
        shape=c["shape"],
        output=c["output"],
        derror=c["derror"],
    )


def _rule_list_from(c: dict) -> tuple[InferenceRule, ...]:
    j, l, h, he = c["j"], c["l"], c["h"], c["he"]
    skew_l, skew_r = (float(v) for v in c["premise_skew"])
    if skew_l <= 0 or skew_r <= 0:
        raise ConfigError("controller.premise_skew factors must be > 0")
    s = l / j
    v = h / (2 * j)
    en_c = c["consequent_en"] if c["consequent_en"] > 0 else v
    rules = []
    for i in range(-j, j + 1):
        for jj in range(-j, j + 1):
            ante = (
                TriangleCloud(i * s, s * skew_l, s * skew_r, he),
                TriangleCloud(jj * s, s * skew_l, s * skew_r, he),
            )
            cons = TriangleCloud(-(i + jj) * v, en_c, en_c, c["consequent_he"])
            rules.append(InferenceRule(antecedents=ante, consequent=cons))
    return tuple(rules)


def build_controller(resolved: dict, rng: RandomSource, period: float, plant_adapter):
    """Instantiate the controller selected by the config."""
    c = resolved["controller"]
    kind = c["type"]
    if kind in ("none", "zero"):
        return ZeroController()
    if kind == "lq":
        if not isinstance(plant_adapter, PendulumPlant):
            raise ConfigError("controller.type = 'lq' needs the pendulum plant (full state)")
        a, b = linearize_pendulum(plant_adapter.params)
        q = np.diag([float(x) for x in resolved["lq"]["q_diag"]])
        design = lq_design(a, b, q, [[resolved["lq"]["r"]]])
        return LqController(design.k)
    if kind != "cloud":
        raise ConfigError(f"unknown controller.type {c['type']!r}")
    if c["engine"] == "rules":
        return GeneralCloudController(
            rules=_rule_list_from(c),
            ke=c["ke"],
            kde=c["kde"],
            ku=c["ku"],
            lo=-c["l"],
            hi=c["l"],
            drops=c["drops"],
            mode=c["mode"],
            output=c["output"],
            derror=c["derror"],
            rng=rng,
            period=period,
        )
    if c["engine"] != "grid":
        raise ConfigError(f"unknown controller.engine {c['engine']!r}")
    cfg = controller_config_from(c)
    return CloudController(cfg, rng=rng, period=period)


def build_plant(resolved: dict):
    p = resolved["plant"]
    if p["type"] == "pendulum":
        params = PendulumParams(
            g=p["g"],
            m=p["m"],
            mc=p["mc"],
            l=p["l"],
            a=p["a"],
            friction=FrictionModel(enabled=p["friction"], cv=p["cv"], cd=p["cd"]),
        )
        return PendulumPlant(params)
    if p["type"] == "lti":
        return StateSpacePlant(make_lti_from_tf(p["num"], p["den"], p["delay"]))
    if p["type"] == "given-linear":
        return None  # handled by given_linear_system
    raise ConfigError(f"unknown plant.type {p['type']!r}")


def sim_config_from(resolved: dict, seed: int) -> SimConfig:
    s = resolved["sim"]
    setpoint = s["setpoint"]
    if isinstance(setpoint, list):
        setpoint = tuple((t, v) for t, v in setpoint)
    return SimConfig(
        dt=s["dt"],
        t_final=s["t_final"],
        control_every=s["control_every"],
        x0=tuple(s["x0"]),
        setpoint=setpoint,
        seed=seed,
    )


def _metrics_payload(traj, amplitude_scale: float, unit: str) -> dict:
    m = compute_metrics(traj, amplitude_scale=amplitude_scale)
    return {
        "settling_time_s": m.settling_time,
        "settled": m.settled,
        "steady_state_error_pct": m.steady_state_error_pct,
        "overshoot_pct": m.overshoot_pct,
        f"chatter_width_{unit}": m.chatter_width,
        f"max_amplitude_{unit}": m.max_amplitude,
        "band": m.band,
    }


def run_gen_cloud(resolved: dict, outdir: Path, seed: int) -> RunArtifact:
    c = resolved["cloud"]
    cloud = TriangleCloud(ex=c["ex"], en1=c["en1"], en2=c["en2"], he=c["he"])
    rng = RandomSource(seed)
    drops = forward_drops(cloud, c["count"], rng)
    summary = {
        "count": c["count"],
        "seed": seed,
        "backward_mean": backward_mean(drops),
    }
    if len(drops) >= 10:
        ex, en, he = backward_estimate_normal(drops)
        summary["backward_estimate"] = {"ex": ex, "en": en, "he": he}
    paths = [
        _write(outdir, "drops.csv", drops_to_csv(drops)),
        _write(outdir, "summary.json", _json_dumps(summary)),
        _write(outdir, "resolved.toml", dumps_toml(resolved)),
    ]
    return RunArtifact(resolved["name"], seed, tuple(paths))


def _simulate_once(resolved: dict, seed: int, trace: list | None = None):
    plant = build_plant(resolved)
    sim = sim_config_from(resolved, seed)
    if plant is None:
        traj = given_linear_system(None, sim.x0, sim)
        return traj, "rad", 1.0
    period = sim.control_every * sim.dt
    rng = RandomSource(seed)
    controller = build_controller(resolved, rng, period, plant)
    if trace is not None and isinstance(controller, CloudController):
        controller.trace = trace
    traj = simulate_closed_loop(plant, controller, sim)
    if plant.kind == "pendulum":
        return traj, "deg", RAD_TO_DEG
    return traj, "y", 1.0


def run_simulate(
    resolved: dict, outdir: Path, seed: int, trace: bool = False
) -> RunArtifact:
    rows: list | None = [] if trace else None
    traj, unit, scale = _simulate_once(resolved, seed, rows)
    metrics = {
        resolved["name"]: {
            "metrics": _metrics_payload(traj, scale, unit),
            "run": traj.meta,
        }
    }
    ylabel = "angle (rad)" if traj.meta["kind"] in ("pendulum", "linear") else "output"
    svg = svgplot.line_chart(
        traj.t,
        {"y": traj.y, "setpoint": traj.r},
        xlabel="time (s)",
        ylabel=ylabel,
        title=resolved["name"],
    )
    paths = [
        _write(outdir, "trajectory.csv", traj.to_csv()),
        _write(outdir, "metrics.json", _json_dumps(metrics)),
        _write(outdir, "plot.svg", svg),
        _write(outdir, "resolved.toml", dumps_toml(resolved)),
    ]
    if rows is not None:
        buf = ["es,des,i,j,w1,w2,w3,w4,ustar"]
        for row in rows:
            buf.append(",".join(repr(v) for v in row))
        paths.append(_write(outdir, "trace.csv", "\n".join(buf) + "\n"))
    return RunArtifact(resolved["name"], seed, tuple(paths))


def run_decompose(resolved: dict, outdir: Path, seed: int) -> RunArtifact:
    c = resolved["controller"]
    if c["mode"] != "deterministic":
        raise ConfigError(
            "decompose certifies the deterministic controller; set "
            'controller.mode = "deterministic" (stochastic runs cannot be '
            "certified pointwise)"
        )
    cfg = controller_config_from(c)
    cert = verify_decomposition(cfg, resolved["decompose"]["grid_n"])
    report = {
        "j": cert.j,
        "ku": cert.ku,
        "grid_n": cert.grid_n,
        "max_residual": cert.max_residual,
        "certified": cert.certified,
        "product_form_max_residual": cert.product_form_max_residual,
        "product_form_note": (
            "the product-form local term (printed with a factor-2 gain) does "
            "not satisfy the relay + PD identity; the sum form does"
        ),
        "complement_max_mismatch": cert.complement_max_mismatch,
        "cells": [
            {
                "cell": list(rec.cell),
                "u_g": rec.u_g,
                "u_l_at_lower_corner": rec.u_l,
                "kp": rec.kp,
                "kd": rec.kd,
                "max_residual": rec.residual,
            }
            for rec in cert.cells
        ],
    }
    lines = ["i,j,u_g"]
    jm = cert.j
    for i in range(-jm, jm):
        for j in range(-jm, jm):
            lines.append(f"{i},{j},{float(cert.relay[i + jm, j + jm])!r}")
    svg = svgplot.cell_grid_chart(
        cert.relay,
        extent=(cfg.pe.lo, cfg.pe.hi, cfg.pde.lo, cfg.pde.hi),
        xlabel="scaled error",
        ylabel="scaled error change",
        title=f"relay levels (j={cert.j}, ku={cert.ku})",
    )
    paths = [
        _write(outdir, "decomposition.json", _json_dumps(report)),
        _write(outdir, "relay_table.csv", "\n".join(lines) + "\n"),
        _write(outdir, "relay.svg", svg),
        _write(outdir, "resolved.toml", dumps_toml(resolved)),
    ]
    return RunArtifact(resolved["name"], seed, tuple(paths))


_COMPARE_CONTROLLERS = ("triangle", "normal", "lq")
_COMPARE_CONDITIONS = ("frictionless", "frictional")


def _compare_one(resolved: dict, seed: int, controller: str, condition: str):
    sub = json.loads(json.dumps(resolved))  # deep copy; keeps runs independent
    sub["plant"]["friction"] = condition == "frictional"
    if controller == "lq":
        sub["controller"]["type"] = "lq"
    else:
        sub["controller"]["type"] = "cloud"
        sub["controller"]["shape"] = controller
    run_seed = derive_seed(seed, controller, condition)
    traj, unit, scale = _simulate_once(sub, run_seed)
    return traj, _metrics_payload(traj, scale, unit), run_seed


def run_compare(resolved: dict, outdir: Path, seed: int) -> RunArtifact:
    if resolved["plant"]["type"] != "pendulum":
        raise ConfigError("compare runs on the pendulum plant")
    jobs = [
        (ctrl, cond) for cond in _COMPARE_CONDITIONS for ctrl in _COMPARE_CONTROLLERS
    ]
    results: dict[str, dict] = {}
    trajs: dict[str, object] = {}
    with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
        futures = {
            pool.submit(_compare_one, resolved, seed, ctrl, cond): (ctrl, cond)
            for ctrl, cond in jobs
        }
        for fut, (ctrl, cond) in futures.items():
            key = f"{ctrl}-{cond}"
            try:
                traj, metrics, run_seed = fut.result()
                results[key] = {
                    "controller": ctrl,
                    "condition": cond,
                    "seed": run_seed,
                    "metrics": metrics,
                }
                trajs[key] = traj
            except Exception as exc:  # record and continue with the others
                results[key] = {
                    "controller": ctrl,
                    "condition": cond,
                    "error": f"{type(exc).__name__}: {exc}",
                }
    paths = [
        _write(outdir, "compare.json", _json_dumps(results)),
        _write(outdir, "resolved.toml", dumps_toml(resolved)),
    ]
    for cond in _COMPARE_CONDITIONS:
        series = {}
        t = None
        for ctrl in _COMPARE_CONTROLLERS:
            traj = trajs.get(f"{ctrl}-{cond}")
            if traj is not None:
                series[ctrl] = traj.y * RAD_TO_DEG
                t = traj.t
        if t is None:
            continue
        svg = svgplot.line_chart(
            t,
            series,
            xlabel="time (s)",
            ylabel="angle (deg)",
            title=f"pendulum, {cond}",
        )
        paths.append(_write(outdir, f"compare_{cond}.svg", svg))
    return RunArtifact(resolved["name"], seed, tuple(paths))


def run_stability(outdir: Path, seed: int = 0, name: str = "stability") -> RunArtifact:
    report = build_stability_report()
    paths = [_write(outdir, "stability.json", _json_dumps(report))]
    return RunArtifact(name, seed, tuple(paths))


def run_plot(csv_path: Path, out_path: Path) -> Path:
    """Re-plot a recognized CSV (trajectory or drops) as an SVG."""
    try:
        text = Path(csv_path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {csv_path}: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows or not rows[0]:
        raise ConfigError(f"empty CSV: {csv_path}")
    header = rows[0]
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    if data.size == 0:
        raise ConfigError(f"no data rows in CSV: {csv_path}")
    if header[0] == "t":
        series = {name: data[:, k] for k, name in enumerate(header[1:], start=1)}
        svg = svgplot.line_chart(
            data[:, 0], series, xlabel="t", ylabel="value", title=Path(csv_path).stem
        )
    elif header == ["x", "mu"]:
        svg = svgplot.points_chart(
            data[:, 0], data[:, 1], xlabel="x", ylabel="mu", title=Path(csv_path).stem
        )
    else:
        raise ConfigError(
            f"unrecognized CSV header {','.join(header)!r} in {csv_path}"
        )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(svg)
    return out_path
