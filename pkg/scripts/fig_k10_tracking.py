"""Occupancy proportions over time for K=10: simulation mean vs mean field.

Every station starts with 5 bikes and the whole fleet docked (M = 5N).
``--nonstationary`` switches to the periodic arrival rate 1 + 0.5 sin(t/2).
"""

import numpy as np

from _common import SINUSOID, execute, parser
from bikeshare.artifacts import read_csv


def main():
    ap = parser(__doc__.splitlines()[0])
    ap.add_argument("--nonstationary", action="store_true")
    args = ap.parse_args()
    y0 = [0] * 11
    y0[5] = 100
    name = "k10_tracking" + ("_nonstationary" if args.nonstationary else "")
    cfg, _ = execute(
        args, name, kind="compare", n_stations=100, fleet_size=500, capacity=10, horizon=20.0,
        y0={"counts": y0}, demand=SINUSOID if args.nonstationary else {"type": "stationary", "rate": 1.0},
    )
    worst = 0.0
    for k in range(11):
        _, rows = read_csv(f"{cfg.out}/compare_k{k}.csv")
        rows = np.array(rows)
        worst = max(worst, float(np.max(np.abs(rows[:, 1] - rows[:, 4]))))
    print(f"sup over t, k of |sim mean - mean field| = {worst:.4f}")


if __name__ == "__main__":
    main()
