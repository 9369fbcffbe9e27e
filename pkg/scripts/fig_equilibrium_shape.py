"""Equilibrium occupancy distribution for K=20 at several bikes-per-station ratios."""

import json
from pathlib import Path

from _common import execute, parser


def main():
    ap = parser(__doc__)
    ap.add_argument("--gamma", type=float, nargs="+", default=[2, 4, 6, 8, 11, 14, 16, 18])
    args = ap.parse_args()
    for g in args.gamma:
        cfg, _ = execute(args, f"equilibrium_K20_gamma{g:g}", kind="equilibrium",
                         n_stations=100, gamma=g, capacity=20)
        s = json.loads(Path(cfg.out, "equilibrium.json").read_text())
        print(f"gamma={g:<5g} mean={s['mean']:.3f} median={s['median']} {s['shape']}")


if __name__ == "__main__":
    main()
