"""Shared argument handling for the figure scripts."""

import argparse
from pathlib import Path

from bikeshare.cli import ExperimentConfig, run

SINUSOID = {"type": "sinusoidal", "base": 1.0, "amplitude": 0.5, "angular_frequency": 0.5}


def parser(description, replications=50):
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--out", default="results", help="root directory for artifacts")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--replications", type=int, default=replications)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--no-svg", action="store_true", help="skip SVG charts")
    return ap


def execute(args, name, **fields):
    cfg = ExperimentConfig.from_dict(
        dict(
            out=str(Path(args.out) / name),
            seed=args.seed,
            replications=args.replications,
            workers=args.workers,
            svg=not args.no_svg,
            **fields,
        )
    )
    files = run(cfg)
    print(f"[{name}] wrote {len(files)} artifacts to {cfg.out}")
    return cfg, files
