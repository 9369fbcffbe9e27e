"""Trip start/end profile and duration statistics from a trip-record CSV (Citi Bike schema)."""

import json
from pathlib import Path

from _common import execute, parser


def main():
    ap = parser(__doc__)
    ap.add_argument("trips", help="trip CSV, e.g. a Citi Bike monthly export")
    ap.add_argument("--fold", choices=["week", "day", "none"], default="week")
    args = ap.parse_args()
    cfg, _ = execute(args, "trip_profile", kind="ingest", trips=args.trips,
                     fold=None if args.fold == "none" else args.fold)
    s = json.loads(Path(cfg.out, "stats.json").read_text())
    print(f"{s['trips']} trips ({s['skipped']} skipped)")
    print(f"duration mean {s['duration_mean']:.1f}s, median {s['duration_median']:.1f}s, "
          f"std {s['duration_std']:.1f}s, mu estimate {s['mu_estimate']:.5f}/s")


if __name__ == "__main__":
    main()
