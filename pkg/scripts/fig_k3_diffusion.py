"""K=3 occupancy, variance and circulation: simulation vs mean-field and diffusion limits.

N=100 stations, M=150 bikes, y0 = (0, .5, .5, 0).  Writes one comparison
table per k (mean with 2-sd bands), the diffusion covariance, and the
simulated vs predicted circulation.  ``--nonstationary`` uses the periodic
arrival rate 1 + 0.5 sin(t/2).
"""

import numpy as np

from _common import SINUSOID, execute, parser
from bikeshare.artifacts import read_csv


def main():
    ap = parser(__doc__.splitlines()[0], replications=1000)
    ap.add_argument("--nonstationary", action="store_true")
    ap.add_argument("--horizon", type=float, default=20.0)
    args = ap.parse_args()
    suffix = "_nonstationary" if args.nonstationary else ""
    common = dict(
        n_stations=100, fleet_size=150, capacity=3, horizon=args.horizon,
        y0={"counts": [0, 50, 50, 0]},
        demand=SINUSOID if args.nonstationary else {"type": "stationary", "rate": 1.0},
    )
    cfg, _ = execute(args, "k3_compare" + suffix, kind="compare", **common)
    execute(args, "k3_diffusion" + suffix, kind="diffusion", **common)
    execute(args, "k3_simulate" + suffix, kind="simulate", **common)

    _, sim = read_csv(f"{args.out}/k3_simulate{suffix}/simulate.csv")
    _, dif = read_csv(f"{args.out}/k3_diffusion{suffix}/diffusion.csv")
    header, _ = read_csv(f"{args.out}/k3_diffusion{suffix}/diffusion.csv")
    sim, dif = np.array(sim), np.array(dif)
    diag = [header.index(f"s{k}_{k}") for k in range(4)]
    print("t     k  N*Var[Y]   Sigma_kk")
    for t in (2.0, 5.0, 10.0):
        i = int(round(t / 0.1))
        for k in range(4):
            print(f"{t:4.1f}  {k}  {100 * sim[i, 5 + k]:.5f}   {dif[i, diag[k]]:.5f}")
    _, circ = read_csv(f"{cfg.out}/circulation_compare.csv")
    circ = np.array(circ)
    print(f"circulation at t={circ[-1, 0]:.1f}: simulated {circ[-1, 1]:.2f}, mean field {circ[-1, 3]:.2f}")


if __name__ == "__main__":
    main()
