"""Equilibrium average bikes per station as a function of the arrival rate (K=3, gamma=1.5)."""

from _common import execute, parser
from bikeshare.artifacts import read_csv


def main():
    ap = parser(__doc__)
    ap.add_argument("--mu", type=float, nargs="+", default=[1.0])
    args = ap.parse_args()
    grid = [round(0.25 * i, 2) for i in range(1, 17)]
    cfg, _ = execute(args, "arrival_rate", kind="sweep", n_stations=100, fleet_size=150, capacity=3,
                     lambda_grid=grid, mu_grid=args.mu)
    _, rows = read_csv(f"{cfg.out}/sweep.csv")
    for lam, mu, avg in rows:
        print(f"lambda={lam:<5} mu={mu:<4} avg bikes={avg:.4f}")


if __name__ == "__main__":
    main()
