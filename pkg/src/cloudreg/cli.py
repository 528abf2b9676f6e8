"""Command-line entry point.

    cloudreg <gen-cloud|simulate|decompose|compare|stability|plot> \
        --config <path-or-preset> --seed <u64> --out <dir>

Seed and output directory resolve as flag > environment (CLOUDREG_SEED,
CLOUDREG_OUT) > config file. Every subcommand exits 0 on success and 1 with
a single ``error: ...`` line on stderr otherwise.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .experiments import (
    run_compare,
    run_decompose,
    run_gen_cloud,
    run_plot,
    run_simulate,
    run_stability,
)

_KIND_BY_COMMAND = {
    "gen-cloud": "gen-cloud",
    "simulate": "simulate",
    "decompose": "decompose",
    "compare": "compare",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cloudreg",
        description="cloud-model controller toolkit: drop generation, "
        "closed-loop runs, structure certification, controller comparison",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("gen-cloud", "generate forward cloud drops as CSV"),
        ("simulate", "run one closed-loop simulation"),
        ("decompose", "certify the relay + PD structure split"),
        ("compare", "triangle / normal / LQ controllers on the pendulum"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="config file path or preset name")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        if name == "simulate":
            p.add_argument("--trace", action="store_true", help="write per-step inference rows")
    p = sub.add_parser("stability", help="check the reference P matrices")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p = sub.add_parser("plot", help="re-plot a trajectory or drops CSV as SVG")
    p.add_argument("csv", help="input CSV path")
    p.add_argument("--out", default=None, help="output SVG path or directory")
    return parser


def _resolve_seed(args, resolved: dict | None) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("CLOUDREG_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"CLOUDREG_SEED must be an integer, got {env!r}") from exc
    if resolved is not None:
        return resolved["seed"]
    return 0


def _resolve_outdir(args, resolved: dict | None, default_name: str) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    env = os.environ.get("CLOUDREG_OUT")
    if env:
        return Path(env)
    if resolved is not None:
        # an explicit config value is the directory itself; the schema
        # default gets a per-run subdirectory
        if resolved["out"] == "runs":
            return Path(resolved["out"]) / resolved["name"]
        return Path(resolved["out"])
    return Path("runs") / default_name


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            csv_path = Path(args.csv)
            if args.out and str(args.out).endswith(".svg"):
                out_path = Path(args.out)
            else:
                base = _resolve_outdir(args, None, "plots")
                out_path = base / (csv_path.stem + ".svg")
            written = run_plot(csv_path, out_path)
            print(f"wrote {written}")
            return 0
        if args.command == "stability":
            outdir = _resolve_outdir(args, None, "stability")
            artifact = run_stability(outdir, _resolve_seed(args, None))
            print(f"wrote {artifact.path('stability')}")
            return 0
        resolved = load_config(args.config)
        expected = _KIND_BY_COMMAND[args.command]
        if resolved["kind"] != expected:
            raise ConfigError(
                f"config kind {resolved['kind']!r} does not match subcommand {expected!r}"
            )
        seed = _resolve_seed(args, resolved)
        outdir = _resolve_outdir(args, resolved, resolved["name"])
        resolved["seed"] = seed
        resolved["out"] = str(outdir)  # resolved.toml re-runs land in place
        if args.command == "gen-cloud":
            artifact = run_gen_cloud(resolved, outdir, seed)
            summary = json.loads(artifact.path("summary").read_text())
            print(
                f"wrote {summary['count']} drops to {artifact.path('drops')}; "
                f"backward mean = {summary['backward_mean']:.6g}"
            )
        elif args.command == "simulate":
            artifact = run_simulate(resolved, outdir, seed, trace=args.trace)
            print(f"wrote {artifact.path('trajectory')}")
        elif args.command == "decompose":
            artifact = run_decompose(resolved, outdir, seed)
            rep = json.loads(artifact.path("decomposition").read_text())
            print(
                f"max residual = {rep['max_residual']:.3e} "
                f"(certified: {rep['certified']}); wrote {artifact.path('decomposition')}"
            )
        elif args.command == "compare":
            artifact = run_compare(resolved, outdir, seed)
            rows = json.loads(artifact.path("compare").read_text())
            for key in sorted(rows):
                row = rows[key]
                if "error" in row:
                    print(f"{key}: FAILED ({row['error']})")
                else:
                    m = row["metrics"]
                    print(
                        f"{key}: max|theta| = {m['max_amplitude_deg']:.3g} deg, "
                        f"chatter = {m['chatter_width_deg']:.3g} deg"
                    )
            print(f"wrote {artifact.path('compare')}")
        return 0
    except BrokenPipeError:
        raise
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
