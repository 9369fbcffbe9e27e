"""Lag between arrival-rate extrema and occupancy extrema as a function of the travel rate.

Mean-field solution for K=3, gamma=1.5 under the arrival rate 1 + 0.5 sin(t/2),
with extrema after the burn-in t > 5.  Empty stations are paired peak-to-peak
with demand, stations holding bikes peak-to-valley.  Pass ``--auto`` to pick the
pairing from the sign of each correlation instead.
"""

from collections import defaultdict

import numpy as np

from _common import SINUSOID, execute, parser
from bikeshare.artifacts import read_csv


def main():
    ap = parser(__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=float, default=100.0)
    ap.add_argument("--auto", action="store_true")
    args = ap.parse_args()
    mus = [round(0.25 * i, 2) for i in range(1, 17)]
    cfg, _ = execute(args, "lag_vs_mu", kind="lag", n_stations=100, fleet_size=150, capacity=3,
                     horizon=args.horizon, demand=SINUSOID, mu_grid=mus, burn_in=5.0,
                     association="auto" if args.auto else ["positive"] + ["negative"] * 3)
    _, rows = read_csv(f"{cfg.out}/lag.csv")
    table = defaultdict(list)
    for mu, k, kind, _, _, lag in rows:
        table[(mu, k, kind)].append(lag)
    print("mu     k  lag@max  lag@min")
    for mu in mus:
        for k in range(4):
            mx = np.mean(table[(mu, k, "max")]) if table[(mu, k, "max")] else float("nan")
            mn = np.mean(table[(mu, k, "min")]) if table[(mu, k, "min")] else float("nan")
            print(f"{mu:<5}  {k}  {mx:7.3f}  {mn:7.3f}")


if __name__ == "__main__":
    main()
