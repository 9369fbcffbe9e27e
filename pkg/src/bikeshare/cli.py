"""Command-line driver.

Every subcommand reads an optional JSON config whose keys mirror
:class:`ExperimentConfig`; command-line flags override config values, which
override the defaults.  Artifacts go to ``--out`` together with
``manifest.json`` (resolved config, its hash, seed and artifact checksums).

Exit codes: 0 success, 2 invalid configuration, 3 non-convergence or
integration failure, 4 manifest verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import artifacts
from .errors import BikeShareError, ConvergenceError, IngestError, IntegrationError, ParameterError
from .measures import avg_bikes_vs_lambda, circulation, distribution_stats, lag_analysis
from .model import ModelParams, Sinusoidal, Stationary, UtilizationClass
from .ode import equilibrium, solve_covariance, solve_mean_field
from .sim import SimConfig, replicate

KINDS = ("simulate", "meanfield", "diffusion", "compare", "equilibrium", "sweep", "lag", "ingest")


@dataclass
class ExperimentConfig:
    kind: str = "meanfield"
    n_stations: int = 100
    fleet_size: Optional[int] = None
    gamma: Optional[float] = None
    capacity: int = 3
    travel_rate: float = 1.0
    demand: dict = field(default_factory=lambda: {"type": "stationary", "rate": 1.0})
    utilization: list = field(default_factory=lambda: [[1.0, 1.0]])
    y0: dict = field(default_factory=lambda: {"proportions": [0.0, 0.5, 0.5, 0.0]})
    horizon: float = 20.0
    step: float = 0.01
    dt: float = 0.1
    replications: int = 50
    seed: int = 0
    out: str = "out"
    series_k: Optional[list] = None
    lambda_grid: list = field(default_factory=lambda: [0.5, 1.0, 1.5, 2.0])
    mu_grid: list = field(default_factory=lambda: [1.0])
    burn_in: float = 5.0
    association: object = "auto"
    svg: bool = False
    workers: int = 1
    trips: Optional[str] = None
    bin_seconds: int = 300
    fold: Optional[str] = "week"
    tz: str = "America/New_York"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ParameterError(f"unknown config field(s): {', '.join(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self):
        if self.kind not in KINDS:
            raise ParameterError(f"kind: must be one of {', '.join(KINDS)}, got {self.kind!r}")
        for name in ("horizon", "step", "dt"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name}: must be positive")
        if self.kind != "ingest":
            params = self.params()
            if self.kind not in ("equilibrium", "sweep"):
                self.initial_measure(params)
            if self.kind in ("simulate", "compare"):
                self.sim_config(params)
        elif not self.trips:
            raise ParameterError("trips: path to a trip CSV is required for ingest")

    def _fleet(self) -> int:
        if self.fleet_size is not None:
            return int(self.fleet_size)
        if self.gamma is None:
            raise ParameterError("fleet_size: give fleet_size or gamma")
        m = self.gamma * self.n_stations
        if abs(m - round(m)) > 1e-9:
            raise ParameterError("gamma: gamma * n_stations must be an integer")
        return int(round(m))

    def _demand(self):
        d = dict(self.demand)
        kind = d.pop("type", "stationary")
        try:
            if kind == "stationary":
                return Stationary(**d)
            if kind == "sinusoidal":
                return Sinusoidal(**d)
        except TypeError as exc:
            raise ParameterError(f"demand: {exc}") from exc
        raise ParameterError(f"demand.type: unknown demand type {kind!r}")

    def params(self, **overrides) -> ModelParams:
        try:
            kw = dict(
                n_stations=self.n_stations,
                fleet_size=self._fleet(),
                capacity=self.capacity,
                demand=self._demand(),
                travel_rate=self.travel_rate,
                classes=tuple(UtilizationClass(float(r), float(w)) for r, w in self.utilization),
            )
            kw.update(overrides)
            return ModelParams(**kw)
        except ParameterError as exc:
            raise ParameterError(f"model: {exc}") from exc

    def initial_measure(self, params: ModelParams) -> np.ndarray:
        y0 = self.y0
        if "counts" in y0:
            arr = np.asarray(y0["counts"], dtype=float) / params.n_stations
        elif "proportions" in y0:
            arr = np.asarray(y0["proportions"], dtype=float)
        else:
            raise ParameterError("y0: give 'counts' or 'proportions'")
        arr = arr.reshape(params.shape) if arr.size == int(np.prod(params.shape)) else arr
        if arr.shape != params.shape and not (arr.ndim == 1 and arr.size == params.capacity + 1):
            raise ParameterError(f"y0: expected {params.capacity + 1} entries per class")
        if arr.ndim == 1 and params.n_classes > 1:
            arr = np.outer(params.weights, arr)
        arr = arr.reshape(params.shape)
        if np.any(arr < 0) or abs(arr.sum() - 1) > 1e-9:
            raise ParameterError("y0: proportions must be non-negative and sum to 1")
        return arr

    def sim_config(self, params: ModelParams) -> SimConfig:
        y = self.initial_measure(params)
        counts = y * params.n_stations
        if np.any(np.abs(counts - np.round(counts)) > 1e-9):
            raise ParameterError("y0: proportions times n_stations must be integers for simulation")
        try:
            return SimConfig(
                params=params, y0_counts=np.round(counts).astype(np.int64), horizon=self.horizon,
                dt=self.dt, replications=self.replications, master_seed=self.seed,
            )
        except ParameterError as exc:
            raise ParameterError(f"simulation: {exc}") from exc


def load_config(path=None, overrides=None) -> ExperimentConfig:
    data = {}
    if path:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParameterError(f"config: cannot load {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ParameterError("config: top level must be a JSON object")
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    return ExperimentConfig.from_dict(data)


# ---- experiment runners: each returns the list of artifact paths ----


def _k_list(cfg, params):
    return list(range(params.capacity + 1)) if cfg.series_k is None else [int(k) for k in cfg.series_k]


def _write_meanfield(out, mf):
    y = mf.aggregate
    header = ["t"] + [f"y{k}" for k in range(y.shape[1])]
    return artifacts.write_csv(out / "meanfield.csv", header, ([t, *row] for t, row in zip(mf.times, y)))


def _write_circulation(out, circ, name="circulation.csv"):
    rows = zip(circ.times, circ.mean, circ.var, circ.lo, circ.hi)
    return artifacts.write_csv(out / name, ["t", "mean", "var", "lo", "hi"], rows)


def run_meanfield(cfg, out):
    p = cfg.params()
    mf = solve_mean_field(p, cfg.initial_measure(p), cfg.horizon, cfg.step, cfg.dt)
    files = [_write_meanfield(out, mf), _write_circulation(out, circulation(mf, None, p))]
    if cfg.svg:
        files.append(artifacts.line_chart(
            out / "meanfield.svg", mf.times,
            {f"y{k}": mf.aggregate[:, k] for k in range(p.capacity + 1)}, "mean-field occupancy"))
    return files


def _diffusion(cfg, p):
    mf = solve_mean_field(p, cfg.initial_measure(p), cfg.horizon, cfg.step, cfg.dt)
    return mf, solve_covariance(p, mf)


def run_diffusion(cfg, out):
    p = cfg.params()
    mf, cov = _diffusion(cfg, p)
    n = p.capacity + 1
    iu = np.triu_indices(n)
    header = ["t"] + [f"s{i}_{j}" for i, j in zip(*iu)]
    rows = ([t, *c.cov[iu]] for t, c in zip(mf.times, cov))
    files = [
        _write_meanfield(out, mf),
        artifacts.write_csv(out / "diffusion.csv", header, rows),
        _write_circulation(out, circulation(mf, cov, p)),
    ]
    if cfg.svg:
        files.append(artifacts.line_chart(
            out / "diffusion.svg", mf.times,
            {f"var D{k}": [c.cov[k, k] for c in cov] for k in range(n)}, "diffusion variance"))
    return files


def run_simulate(cfg, out):
    p = cfg.params()
    stats = replicate(cfg.sim_config(p), workers=cfg.workers)
    n = p.capacity + 1
    header = ["t"] + [f"mean_y{k}" for k in range(n)] + [f"var_y{k}" for k in range(n)] + ["circ_mean", "circ_var"]
    rows = (
        [t, *m, *v, cm, cv]
        for t, m, v, cm, cv in zip(stats.times, stats.mean, stats.var, stats.circ_mean, stats.circ_var)
    )
    files = [artifacts.write_csv(out / "simulate.csv", header, rows)]
    if cfg.svg:
        files.append(artifacts.line_chart(
            out / "simulate.svg", stats.times, {f"Y{k}": stats.mean[:, k] for k in range(n)},
            "simulated occupancy (mean over paths)"))
    return files


def run_compare(cfg, out):
    p = cfg.params()
    stats = replicate(cfg.sim_config(p), workers=cfg.workers)
    mf, cov = _diffusion(cfg, p)
    y = mf.aggregate
    files = []
    for k in _k_list(cfg, p):
        half = 2.0 * np.sqrt(np.maximum([c.cov[k, k] for c in cov], 0.0) / p.n_stations)
        header = ["t", f"sim_mean_k{k}", "sim_band_lo", "sim_band_hi", f"mf_k{k}", "diff_band_lo", "diff_band_hi"]
        rows = zip(mf.times, stats.mean[:, k], stats.band_lo[:, k], stats.band_hi[:, k],
                   y[:, k], y[:, k] - half, y[:, k] + half)
        files.append(artifacts.write_csv(out / f"compare_k{k}.csv", header, rows))
        if cfg.svg:
            files.append(artifacts.line_chart(
                out / f"compare_k{k}.svg", mf.times,
                {"sim mean": stats.mean[:, k], "mean field": y[:, k],
                 "sim -2sd": stats.band_lo[:, k], "sim +2sd": stats.band_hi[:, k],
                 "diff -2sd": y[:, k] - half, "diff +2sd": y[:, k] + half},
                f"Y(k={k}): simulation vs limits"))
    circ = circulation(mf, cov, p)
    files.append(_write_circulation(out, circ))
    rows = zip(stats.times, stats.circ_mean, stats.circ_var, circ.mean, circ.var)
    files.append(artifacts.write_csv(
        out / "circulation_compare.csv", ["t", "sim_mean", "sim_var", "mf_mean", "diff_var"], rows))
    return files


def run_equilibrium(cfg, out):
    p = cfg.params()
    eq = equilibrium(p)
    y = eq.aggregate
    st = distribution_stats(y)
    files = [
        artifacts.write_csv(out / "equilibrium.csv", ["k", "y"], enumerate(y)),
        artifacts.write_json(out / "equilibrium.json", {
            "mean": st.mean, "median": st.median, "skew": st.skew, "shape": st.shape,
            "circulation": p.n_stations * (p.gamma - st.mean),
        }),
    ]
    if cfg.svg:
        files.append(artifacts.line_chart(out / "equilibrium.svg", np.arange(y.size), {"y": y},
                                          "equilibrium occupancy distribution"))
    return files


def run_sweep(cfg, out):
    base = cfg.params()
    rows = []
    for mu in cfg.mu_grid:
        p = base.replace(travel_rate=float(mu))
        for lam, avg in avg_bikes_vs_lambda(p, cfg.lambda_grid):
            rows.append([lam, float(mu), avg])
    files = [artifacts.write_csv(out / "sweep.csv", ["lambda", "mu", "avg_bikes"], rows)]
    if cfg.svg:
        series = {f"mu={mu}": [r[2] for r in rows if r[1] == float(mu)] for mu in cfg.mu_grid}
        files.append(artifacts.line_chart(out / "sweep.svg", cfg.lambda_grid, series,
                                          "average bikes per station vs arrival rate"))
    return files


def run_lag(cfg, out):
    base = cfg.params()
    if not isinstance(base.demand, Sinusoidal):
        raise ParameterError("demand: lag analysis needs sinusoidal demand")
    ks = _k_list(cfg, base)
    assoc = cfg.association
    if isinstance(assoc, str):
        assoc = [assoc] * len(ks)
    if len(assoc) != len(ks):
        raise ParameterError("association: give one mode or one per series_k entry")
    rows = []
    for mu in cfg.mu_grid:
        p = base.replace(travel_rate=float(mu))
        mf = solve_mean_field(p, cfg.initial_measure(p), cfg.horizon, cfg.step, cfg.dt)
        for k, a in zip(ks, assoc):
            rep = lag_analysis(mf.times, mf.aggregate[:, k], p.demand, cfg.burn_in,
                               series_k=k, mu=float(mu), association=a)
            for e in rep.entries:
                rows.append([float(mu), k, e.extremum_type, e.lambda_time, e.series_time, e.lag])
    header = ["mu", "series_k", "extremum_type", "lambda_time", "series_time", "lag"]
    return [artifacts.write_csv(out / "lag.csv", header, rows)]


def run_ingest(cfg, out):
    from .ingest import binned_rates, duration_stats, fit_profile, parse_trips

    parsed = parse_trips(cfg.trips, tz=cfg.tz)
    if not parsed.records:
        raise IngestError(f"{cfg.trips}: no valid trip rows")
    prof = binned_rates(parsed.records, cfg.bin_seconds, cfg.fold)
    stats = duration_stats(parsed.records)
    fit = fit_profile(prof)
    summary = {
        "trips": len(parsed.records),
        "skipped": parsed.skipped,
        "duration_mean": stats.mean,
        "duration_median": stats.median,
        "duration_std": stats.std,
        "mu_estimate": stats.mu_estimate,
        "fold": cfg.fold,
        "periods": prof.periods,
        "sinusoid_base_per_hour": fit.demand.base,
        "sinusoid_amplitude": fit.demand.amplitude,
        "sinusoid_phase": fit.demand.phase,
        "sinusoid_residual_norm": fit.residual_norm,
        "sinusoid_clamped": fit.clamped,
    }
    prof.write_csv(out / "bins.csv")
    return [out / "bins.csv", artifacts.write_json(out / "stats.json", summary)]


RUNNERS = {
    "simulate": run_simulate,
    "meanfield": run_meanfield,
    "diffusion": run_diffusion,
    "compare": run_compare,
    "equilibrium": run_equilibrium,
    "sweep": run_sweep,
    "lag": run_lag,
    "ingest": run_ingest,
}


def run(cfg: ExperimentConfig) -> list:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files = RUNNERS[cfg.kind](cfg, out)
    artifacts.write_manifest(out, cfg.to_dict(), cfg.seed, files)
    return files


def _parser():
    ap = argparse.ArgumentParser(prog="bikeshare", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--replications", type=int, help="number of simulated paths (overrides config)")
        p.add_argument("--horizon", type=float, help="time horizon (overrides config)")
        p.add_argument("--svg", action="store_true", default=None, help="also write SVG charts")
        p.add_argument("--workers", type=int, help="processes for replications")

    common(sub.add_parser("run", help="run the experiment kind named in the config"))
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        common(p)
        if kind == "ingest":
            p.add_argument("--trips", help="trip CSV path")
    v = sub.add_parser("verify", help="check artifact checksums against manifest.json")
    v.add_argument("directory")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "verify":
        try:
            bad = artifacts.verify_manifest(args.directory)
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            print(f"error: cannot read manifest: {exc}", file=sys.stderr)
            return 4
        if bad:
            print("modified or missing: " + ", ".join(bad), file=sys.stderr)
            return 4
        print("ok")
        return 0
    overrides = {
        "seed": args.seed, "out": args.out, "replications": args.replications,
        "horizon": args.horizon, "svg": args.svg, "workers": args.workers,
        "trips": getattr(args, "trips", None),
    }
    if args.command != "run":
        overrides["kind"] = args.command
    try:
        cfg = load_config(args.config, overrides)
        files = run(cfg)
    except (ParameterError, IngestError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, IntegrationError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except BikeShareError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
