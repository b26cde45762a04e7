"""Command-line front end: run, sweep, oracle, marginals, selftest."""

from __future__ import annotations

import argparse
import copy
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, resolve_scheme_for_model
from .ensemble import run_ensemble
from .estimators import EnsembleSeries, ObservableSpec
from .models.factory import from_spec
from .models.lvcm import AU_TO_FS
from .marginals import marginal_mc
from .phasespace import SingleGamma, SymmetricPairGamma, gamma_star
from .selftest import run_selftest

FAIL_WARN_FRACTION = 0.01
FAIL_ERROR_FRACTION = 0.10


def _echo_params(params: dict, limit: int = 8) -> dict:
    out = {}
    for key, val in params.items():
        if isinstance(val, (tuple, list)) and len(val) > limit:
            out[key] = f"[{len(val)} values; first={val[0]!r}, last={val[-1]!r}]"
        else:
            out[key] = val
    return out


def _execute_run(run: RunConfig, out_dir: Path, seed=None, workers=None) -> EnsembleSeries:
    model = from_spec(run.model_spec)
    resolve_scheme_for_model(run, model.F)
    if seed is not None:
        run.ensemble.seed = seed
    if workers is not None:
        run.ensemble.workers = workers
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {"time_unit": run.time_unit, "normalize": run.normalize}
    t0 = time.time()
    observables = list(run.observables)
    if run.normalize and not any(o.kind == "total_population" for o in observables):
        observables.append(ObservableSpec("total_population"))
    result = run_ensemble(
        run.model_spec,
        run.method,
        run.integrator,
        observables,
        run.ensemble,
        metadata=meta,
        time_scale=run.time_scale,
    )
    series = result.series
    if run.normalize:
        tot_idx = series.columns.index("total")
        tot = series.values[tot_idx]
        keep = [i for i, c in enumerate(series.columns) if i != tot_idx]
        series = EnsembleSeries(
            times=series.times,
            values=series.values[keep] / tot,
            stderr=series.stderr[keep] / np.abs(tot),
            columns=[series.columns[i] for i in keep],
            n_trajectories=series.n_trajectories,
            n_failed=series.n_failed,
            metadata=series.metadata,
        )
    elapsed = time.time() - t0
    series.to_csv(out_dir / "series.csv")
    if result.channels is not None:
        result.channels.to_csv(out_dir / "channels.csv")
    with open(out_dir / "meta.txt", "w") as fh:
        fh.write(f"mapdyn version = {__version__}\n")
        fh.write(f"elapsed_seconds = {elapsed:.2f}\n")
        fh.write(f"n_trajectories = {run.ensemble.n_trajectories}\n")
        fh.write(f"n_failed = {result.n_failed}\n")
        fh.write(f"n_in_coupling_region = {result.n_in_coupling_region}\n")
        fh.write(f"max_energy_drift_rel = {result.max_energy_drift:.3e}\n")
        fh.write(f"seed = {run.ensemble.seed}\n")
        fh.write(f"workers = {run.ensemble.workers}\n")
        fh.write(f"batch_size = {run.ensemble.batch_size}\n")
        fh.write(f"method = {run.method.label()}\n")
        fh.write(f"representation = {run.integrator.representation}\n")
        fh.write(f"dt_au = {run.integrator.dt!r}\n")
        fh.write(f"max_time_au = {run.integrator.max_time!r}\n")
        fh.write(f"model = {model.name}\n")
        for key, val in _echo_params(model.params).items():
            fh.write(f"model.{key} = {val}\n")
        fh.write(f"resolved_config = {run.raw}\n")
    frac = result.n_failed / run.ensemble.n_trajectories
    if frac > FAIL_ERROR_FRACTION:
        raise RuntimeError(f"{frac:.1%} of trajectories failed")
    if frac > FAIL_WARN_FRACTION:
        print(f"warning: {frac:.1%} of trajectories failed", file=sys.stderr)
    if result.n_in_coupling_region:
        print(
            f"warning: {result.n_in_coupling_region} trajectories still inside "
            f"the coupling region at the final time",
            file=sys.stderr,
        )
    return series


def cmd_run(args) -> int:
    run = load_config(args.config)
    out_dir = Path(args.out or run.output_dir)
    _execute_run(run, out_dir, seed=args.seed, workers=args.workers)
    print(f"wrote {out_dir / 'series.csv'}")
    return 0


def _set_by_path(data: dict, path: str, value) -> None:
    keys = path.split(".")
    node = data
    for key in keys[:-1]:
        if key not in node:
            raise ConfigError(f"sweep parameter path '{path}' not in config")
        node = node[key]
    if keys[-1] not in node:
        raise ConfigError(f"sweep parameter path '{path}' not in config")
    node[keys[-1]] = value


def cmd_sweep(args) -> int:
    from .config import parse_config

    base = load_config(args.config)
    values = [float(v) for v in args.values.split(",") if v != ""]
    if not values:
        raise ConfigError("sweep needs a non-empty value list")
    out_root = Path(args.out or base.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    rows = []
    for val in values:
        raw = copy.deepcopy(base.raw)
        _set_by_path(raw, args.param, val)
        run = parse_config(raw)
        sub = out_root / f"{args.param.split('.')[-1]}_{val:g}"
        series = _execute_run(run, sub, seed=args.seed, workers=args.workers)
        chan_path = sub / "channels.csv"
        if chan_path.exists():
            chan = EnsembleSeries.from_csv(chan_path)
            rows.append([val] + list(chan.values[:, -1]) + list(chan.stderr[:, -1]))
            columns = chan.columns
        else:
            rows.append([val] + list(series.values[:, -1]) + list(series.stderr[:, -1]))
            columns = series.columns
    with open(out_root / "summary.csv", "w") as fh:
        fh.write(f"# sweep = {args.param}\n")
        header = [args.param.split(".")[-1]]
        header += columns + [f"{c}_err" for c in columns]
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    print(f"wrote {out_root / 'summary.csv'}")
    return 0


def cmd_oracle(args) -> int:
    from .oracles import (
        GridSpec,
        FockSpec,
        fock_propagate,
        frozen_nuclei_exact,
        split_operator_dvr,
    )

    run = load_config(args.config)
    model = from_spec(run.model_spec)
    out_dir = Path(args.out or run.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kind = args.kind
    t_final = run.integrator.max_time
    if kind == "frozen":
        # nuclear gradients disabled: exact evolution under V at the mean geometry
        V = model.potential(model.nuclear_init.mean_R)
        psi0 = np.zeros(model.F, dtype=complex)
        psi0[model.init_state] = 1.0
        stride = run.integrator.dt * run.integrator.record_stride
        times = np.arange(int(t_final / stride + 1e-9) + 1) * stride
        pops = frozen_nuclei_exact(V, psi0, times)
        series = EnsembleSeries(
            times=times * run.time_scale,
            values=pops.T,
            stderr=np.zeros_like(pops.T),
            columns=[f"pop{n}" for n in range(model.F)],
            metadata={"method": "oracle:frozen", "model": model.name, "time_unit": run.time_unit},
        )
        series.to_csv(out_dir / "series.csv")
        print(f"wrote {out_dir / 'series.csv'}")
        return 0
    if kind == "dvr":
        if model.N != 1:
            raise ConfigError("the DVR oracle needs a 1-D model")
        spec = GridSpec(args.r_min, args.r_max, args.n_points, dt=run.integrator.dt)
        res = split_operator_dvr(model, spec, t_final, record_stride=run.integrator.record_stride)
        times = res.times * run.time_scale
        series = EnsembleSeries(
            times=times,
            values=res.populations.T,
            stderr=np.zeros_like(res.populations.T),
            columns=[f"pop{n}" for n in range(model.F)],
            metadata={"method": "oracle:dvr", "model": model.name, "time_unit": run.time_unit},
        )
        series.to_csv(out_dir / "series.csv")
        chan = EnsembleSeries(
            times=np.asarray([times[-1]]),
            values=np.concatenate([res.channels_diabatic, res.channels_adiabatic])[:, None],
            stderr=np.zeros((8, 1)),
            columns=["T1", "T2", "R1", "R2", "T1_ad", "T2_ad", "R1_ad", "R2_ad"],
            metadata={"method": "oracle:dvr", "model": model.name},
        )
        chan.to_csv(out_dir / "channels.csv")
    elif kind == "fock":
        res = fock_propagate(
            model,
            FockSpec(n_max=args.n_max),
            t_final,
            run.integrator.dt * run.integrator.record_stride,
        )
        series = EnsembleSeries(
            times=res.times * run.time_scale,
            values=res.populations.T,
            stderr=np.zeros_like(res.populations.T),
            columns=[f"pop{n}" for n in range(model.F)],
            metadata={"method": "oracle:fock", "model": model.name, "time_unit": run.time_unit},
        )
        series.to_csv(out_dir / "series.csv")
    else:
        raise ConfigError(f"unknown oracle kind {kind!r}")
    print(f"wrote {out_dir / 'series.csv'}")
    return 0


def cmd_marginals(args) -> int:
    scheme: object
    if args.delta is not None:
        scheme = SymmetricPairGamma(args.delta, args.F)
    elif args.gamma is not None:
        scheme = SingleGamma(args.gamma)
    else:
        scheme = SingleGamma(gamma_star(args.F))
    lim = args.limit
    axis = np.linspace(-lim, lim, args.bins + 1)
    rng = np.random.Generator(np.random.Philox(key=[args.seed, 0]))
    n, m = (int(v) for v in args.pair.split(","))
    grid = marginal_mc(
        n, m, scheme, args.F, axis, axis, rng, n_samples=args.samples, axes=args.axes
    )
    out = Path(args.out or "marginal.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    grid.to_csv(out)
    print(f"wrote {out}")
    return 0


def cmd_selftest(args) -> int:
    ok = run_selftest()
    print("selftest:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mapdyn",
        description="Trajectory-ensemble nonadiabatic dynamics on (weighted) "
        "constraint coordinate-momentum phase space",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an ensemble from a TOML config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--workers", type=int)
    p_run.add_argument("--out")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="re-run a config over a parameter list")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--param", required=True, help="dotted key path, e.g. model.P0")
    p_sweep.add_argument("--values", required=True, help="comma-separated numbers")
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--workers", type=int)
    p_sweep.add_argument("--out")
    p_sweep.set_defaults(func=cmd_sweep)

    p_oracle = sub.add_parser("oracle", help="exact reference run for a config's model")
    p_oracle.add_argument("--config", required=True)
    p_oracle.add_argument("--kind", choices=["dvr", "fock", "frozen"], required=True)
    p_oracle.add_argument("--out")
    p_oracle.add_argument("--r-min", type=float, default=-40.0)
    p_oracle.add_argument("--r-max", type=float, default=40.0)
    p_oracle.add_argument("--n-points", type=int, default=4096)
    p_oracle.add_argument("--n-max", type=int, default=16)
    p_oracle.set_defaults(func=cmd_oracle)

    p_marg = sub.add_parser("marginals", help="Monte Carlo marginal grid to CSV")
    p_marg.add_argument("--F", type=int, default=2)
    p_marg.add_argument("--gamma", type=float)
    p_marg.add_argument("--delta", type=float)
    p_marg.add_argument("--pair", default="0,0", help="kernel entry, e.g. 0,1")
    p_marg.add_argument("--axes", choices=["xx", "xp"], default="xx")
    p_marg.add_argument("--bins", type=int, default=40)
    p_marg.add_argument("--limit", type=float, default=2.0)
    p_marg.add_argument("--samples", type=int, default=1_000_000)
    p_marg.add_argument("--seed", type=int, default=0)
    p_marg.add_argument("--out")
    p_marg.set_defaults(func=cmd_marginals)

    p_self = sub.add_parser("selftest", help="fast invariant suite")
    p_self.set_defaults(func=cmd_selftest)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
