"""Command line: ``skyrmion-lab <command> [--config FILE] [overrides]``."""
from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError, RunConfig
from .pipeline import EXIT_NUMERIC, EXIT_USAGE, STAGES, run

THREADS_ENV = "SKYRMION_LAB_THREADS"

# flag name -> (config key, type)
OVERRIDES = {
    "h": float, "n_radial": int, "R": float, "r0_ratio": float, "tol": float,
    "raster_n": int, "modes": str, "eig_count": int, "alpha": float, "beta": float,
    "dyn_h": float, "dyn_n": int, "dyn_L": float, "T": float, "dt": float,
    "record_every": int, "relax_steps": int, "identity_samples": int,
    "identity_scale": float, "coercivity_samples": int, "seed": int, "output": str,
    "threads": int,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="skyrmion-lab", description="Chiral skyrmion profile, stability and dynamics.")
    ap.add_argument("command", choices=list(STAGES) + ["all"])
    ap.add_argument("--config", help="JSON file with RunConfig fields")
    for name, typ in OVERRIDES.items():
        flag = "--" + name.replace("_", "-")
        ap.add_argument(flag, dest=name, type=typ, default=None)
    ap.add_argument("--v", dest="v", type=float, nargs=2, metavar=("VX", "VY"), default=None)
    for name in ("raster_graded", "write_field", "refine_check"):
        ap.add_argument("--" + name.replace("_", "-"), dest=name,
                        action=argparse.BooleanOptionalAction, default=None)
    ap.add_argument("--quiet", action="store_true")
    return ap


def resolve_config(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.from_dict({})
    overrides = {k: getattr(args, k) for k in list(OVERRIDES) + ["v", "raster_graded",
                                                                 "write_field", "refine_check"]}
    if overrides.get("threads") is None and environ.get(THREADS_ENV):
        try:
            overrides["threads"] = int(environ[THREADS_ENV])
        except ValueError:
            raise ConfigError(f"invalid value for {THREADS_ENV}: {environ[THREADS_ENV]!r}") from None
    return cfg.updated(overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ConfigError, OSError) as exc:
        print(f"skyrmion-lab: {exc}", file=sys.stderr)
        return EXIT_USAGE

    from threadpoolctl import threadpool_limits

    try:
        with threadpool_limits(limits=cfg.threads):
            manifest = run(args.command, cfg)
    except Exception as exc:
        print(f"skyrmion-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if not args.quiet:
        for name, rec in manifest.stages.items():
            extra = f"  {rec.error}" if rec.error else ""
            print(f"{name:10s} {rec.status:8s} {rec.seconds:8.2f}s{extra}")
        for name, ok in manifest.verifications.items():
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
        print(f"manifest: {os.path.join(cfg.output, 'manifest.json')}")
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
