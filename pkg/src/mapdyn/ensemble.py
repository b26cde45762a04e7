"""Deterministic batched ensemble runner.

Trajectory i draws all of its randomness from a dedicated counter-based
stream keyed by (master_seed, i), so any trajectory is reproducible in
isolation and results are independent of worker count and scheduling.
Trajectories are grouped into fixed-size batches by index; workers
parallelize over whole batches and the reduction combines batch partial sums
in batch order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .dynamics import BatchState, IntegratorConfig, make_engine, FsshEngine, MappingEngine
from .estimators import ObservableSpec, EnsembleSeries, combine_moments
from .models import DiabaticModel, adiabatize_batch
from .models.factory import from_spec
from .phasespace import (
    GammaScheme,
    SingleGamma,
    SymmetricPairGamma,
    draw_gamma,
    gamma_star,
)

__all__ = ["MethodSpec", "EnsembleSpec", "run_ensemble", "EnsembleResult"]

DEFAULT_BATCH = 1024


@dataclass
class MethodSpec:
    name: str  # cmm | wmm | ehrenfest | fssh
    scheme: Optional[GammaScheme] = None
    init_state: Optional[int] = None  # defaults to the model's initial state
    frustrated_reversal: bool = True

    def resolve_scheme(self, F: int) -> Optional[GammaScheme]:
        if self.name in ("ehrenfest", "fssh"):
            return None
        if self.scheme is None:
            return SingleGamma(gamma_star(F))
        self.scheme.validate(F)
        return self.scheme

    def label(self) -> str:
        if self.name in ("ehrenfest", "fssh"):
            return self.name
        scheme = self.scheme
        return f"{self.name}[{scheme.label() if scheme is not None else 'gamma_star'}]"


@dataclass
class EnsembleSpec:
    n_trajectories: int
    seed: int = 0
    workers: int = 1
    batch_size: int = DEFAULT_BATCH


@dataclass
class EnsembleResult:
    series: EnsembleSeries
    channels: Optional[EnsembleSeries] = None
    n_failed: int = 0
    n_in_coupling_region: int = 0
    max_energy_drift: float = 0.0


@dataclass
class _BatchOut:
    sum_s: np.ndarray
    sum_s2: np.ndarray
    n_live: int
    n_failed: int
    chan_sum: Optional[np.ndarray]
    chan_sum2: Optional[np.ndarray]
    n_inside: int
    max_drift: float


def _trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), index]))


def _init_batch(
    model: DiabaticModel,
    method: MethodSpec,
    scheme: Optional[GammaScheme],
    seed: int,
    lo: int,
    hi: int,
    representation: str,
):
    """Sample initial conditions for trajectories [lo, hi)."""
    B = hi - lo
    N, F = model.N, model.F
    init_state = model.init_state if method.init_state is None else method.init_state
    R = np.empty((B, N))
    P = np.empty((B, N))
    weights = np.ones(B)
    rngs = []
    spec = model.nuclear_init
    sig_R = np.sqrt(spec.var_R)
    sig_P = np.sqrt(spec.var_P)
    if method.name in ("cmm", "wmm"):
        g = np.empty((B, F), dtype=complex)
        gammas = np.empty(B)
        init_w = np.empty(B)
        for b in range(B):
            i = lo + b
            rng = _trajectory_rng(seed, i)
            rngs.append(rng)
            R[b] = spec.mean_R + sig_R * rng.standard_normal(N)
            P[b] = spec.mean_P + sig_P * rng.standard_normal(N)
            branch = i % scheme.n_branches
            gamma, w = draw_gamma(scheme, branch)
            # equal counts per branch: rescale so the plain mean over all
            # trajectories reproduces the branch-weighted average
            weights[b] = w * scheme.n_branches
            gammas[b] = gamma
            z = rng.standard_normal(2 * F)
            z *= math.sqrt(2.0 * (1.0 + F * gamma)) / np.linalg.norm(z)
            g[b] = z[:F] + 1j * z[F:]
            init_w[b] = F * (0.5 * np.abs(g[b, init_state]) ** 2 - gamma)
        st = BatchState(R=R, P=P, g=g, gamma=gammas)
        if representation == "adiabatic":
            ad = adiabatize_batch(model.potential(R), model.potential_gradient(R), None)
            st.U = ad.U
            st.g = np.einsum("bnk,bn->bk", ad.U, st.g)
        return st, weights * init_w, rngs
    # Ehrenfest / FSSH: delta initial amplitudes on the diabatic init state
    c = np.zeros((B, F), dtype=complex)
    active = np.zeros(B, dtype=int)
    for b in range(B):
        i = lo + b
        rng = _trajectory_rng(seed, i)
        rngs.append(rng)
        R[b] = spec.mean_R + sig_R * rng.standard_normal(N)
        P[b] = spec.mean_P + sig_P * rng.standard_normal(N)
        c[b, init_state] = 1.0
    st = BatchState(R=R, P=P, c=c)
    if method.name == "fssh":
        ad = adiabatize_batch(model.potential(R), model.potential_gradient(R), None)
        st.U = ad.U
        st.c = np.einsum("bnk,bn->bk", ad.U, st.c)
        probs = np.abs(st.c) ** 2
        for b in range(B):
            active[b] = np.searchsorted(np.cumsum(probs[b]), rngs[b].random())
        st.active = np.minimum(active, F - 1)
    return st, weights, rngs


def _run_batch(args) -> _BatchOut:
    (
        model_or_spec,
        method,
        cfg,
        obs_list,
        chan_spec,
        seed,
        lo,
        hi,
    ) = args
    model = (
        model_or_spec
        if isinstance(model_or_spec, DiabaticModel)
        else from_spec(model_or_spec)
    )
    scheme = method.resolve_scheme(model.F)
    cfg = IntegratorConfig(**cfg) if isinstance(cfg, dict) else cfg
    engine = make_engine(
        method.name if method.name not in ("cmm", "wmm") else "mapping", model, cfg
    )
    st, traj_w, rngs = _init_batch(model, method, scheme, seed, lo, hi, cfg.representation)
    if isinstance(engine, FsshEngine):
        engine.set_rngs(rngs)
    B = hi - lo
    n_steps = cfg.n_steps
    n_rec = n_steps // cfg.record_stride
    n_cols = sum(len(o.column_names(model.F)) for o in obs_list)
    est = np.empty((B, n_rec + 1, n_cols))
    energies = np.empty((B, n_rec + 1))

    def record(k):
        pops = engine.populations(st, basis="diabatic")
        est[:, k, :] = np.concatenate([o.evaluate(pops) for o in obs_list], axis=1)
        energies[:, k] = engine.energy(st)

    record(0)
    for k in range(1, n_rec + 1):
        if st.live.any():
            engine.advance(st, cfg.record_stride, cfg.dt)
            engine.freeze_exited(st)
        else:
            st.t += cfg.record_stride * cfg.dt
        record(k)

    finite = np.isfinite(est).all(axis=(1, 2)) & np.isfinite(energies).all(axis=1)
    n_failed = int(B - finite.sum())
    w = traj_w * finite  # failed trajectories contribute nothing
    s = w[:, None, None] * np.nan_to_num(est)
    sum_s = np.einsum("bkc->ck", s)
    sum_s2 = np.einsum("bkc,bkc->ck", s, s)
    E0 = energies[:, 0]
    scale = np.abs(E0) + 1e-30
    drift = np.nan_to_num(
        np.max(np.abs(energies - E0[:, None]), axis=1) / scale, nan=np.inf
    )
    max_drift = float(np.max(drift[finite], initial=0.0))

    chan_sum = chan_sum2 = None
    n_inside = 0
    if chan_spec is not None:
        pops = _final_basis_populations(engine, st, chan_spec.basis, model)
        r_final = st.R[:, 0]
        trans = r_final > chan_spec.divide_R
        contrib = np.zeros((B, 4))
        contrib[trans, 0:2] = pops[trans]
        contrib[~trans, 2:4] = pops[~trans]
        contrib *= w[:, None]
        chan_sum = contrib.sum(axis=0)
        chan_sum2 = (contrib * contrib).sum(axis=0)
        if cfg.exit_radius is not None:
            n_inside = int(np.sum(finite & (np.abs(r_final) <= cfg.exit_radius)))
    return _BatchOut(
        sum_s=sum_s,
        sum_s2=sum_s2,
        n_live=int(finite.sum()),
        n_failed=n_failed,
        chan_sum=chan_sum,
        chan_sum2=chan_sum2,
        n_inside=n_inside,
        max_drift=max_drift,
    )


def _final_basis_populations(engine, st: BatchState, basis: str, model) -> np.ndarray:
    if isinstance(engine, MappingEngine):
        return engine.populations(st, basis=basis)
    return engine.populations(st, basis=basis)


def run_ensemble(
    model_or_spec,
    method: MethodSpec,
    cfg: IntegratorConfig,
    observables: Sequence[ObservableSpec],
    ens: EnsembleSpec,
    metadata: Optional[dict] = None,
    time_scale: float = 1.0,
) -> EnsembleResult:
    """Run n_trajectories and reduce to an EnsembleSeries (plus channels if asked).

    model_or_spec may be a DiabaticModel (single process only) or a model
    spec dict (required for workers > 1, which rebuild the model per worker).
    """
    model = (
        model_or_spec
        if isinstance(model_or_spec, DiabaticModel)
        else from_spec(model_or_spec)
    )
    scheme = method.resolve_scheme(model.F)
    if isinstance(scheme, SymmetricPairGamma) and ens.n_trajectories % 2:
        raise ValueError("weighted two-branch runs need an even trajectory count")
    if ens.n_trajectories < 1:
        raise ValueError("n_trajectories must be positive")
    series_obs = [o for o in observables if o.kind != "scattering_channels"]
    chan_specs = [o for o in observables if o.kind == "scattering_channels"]
    if not series_obs:
        series_obs = [ObservableSpec("populations")]
    for o in series_obs:
        o.validate(model.F)
    chan_spec = chan_specs[0] if chan_specs else None

    batches = []
    lo = 0
    while lo < ens.n_trajectories:
        hi = min(lo + ens.batch_size, ens.n_trajectories)
        batches.append((lo, hi))
        lo = hi
    payload = model_or_spec if isinstance(model_or_spec, dict) else model
    jobs = [
        (payload, method, cfg, series_obs, chan_spec, ens.seed, lo, hi)
        for lo, hi in batches
    ]
    if ens.workers > 1 and len(jobs) > 1:
        if not isinstance(model_or_spec, dict):
            raise ValueError("parallel runs require a model spec dict")
        with ProcessPoolExecutor(max_workers=ens.workers) as pool:
            outs = list(pool.map(_run_batch, jobs))
    else:
        outs = [_run_batch(j) for j in jobs]

    sum_s = sum(o.sum_s for o in outs)
    sum_s2 = sum(o.sum_s2 for o in outs)
    n_live = sum(o.n_live for o in outs)
    n_failed = sum(o.n_failed for o in outs)
    if n_live == 0:
        raise RuntimeError("all trajectories failed")
    values, stderr = combine_moments(sum_s, sum_s2, n_live)
    n_rec = values.shape[1] - 1
    times = np.arange(n_rec + 1) * cfg.dt * cfg.record_stride * time_scale
    columns = []
    for o in series_obs:
        columns += o.column_names(model.F)
    meta = dict(metadata or {})
    meta.update(
        {
            "model": model.name,
            "method": method.label(),
            "seed": ens.seed,
            "dt": cfg.dt,
            "representation": cfg.representation,
            "batch_size": ens.batch_size,
            "version": __version__,
        }
    )
    series = EnsembleSeries(
        times=times,
        values=values,
        stderr=stderr,
        columns=columns,
        n_trajectories=n_live,
        n_failed=n_failed,
        metadata=meta,
    )
    channels = None
    n_inside = sum(o.n_inside for o in outs)
    if chan_spec is not None:
        chan_sum = sum(o.chan_sum for o in outs)
        chan_sum2 = sum(o.chan_sum2 for o in outs)
        cvals, cerr = combine_moments(chan_sum, chan_sum2, n_live)
        channels = EnsembleSeries(
            times=np.asarray([times[-1]]),
            values=cvals[:, None],
            stderr=cerr[:, None],
            columns=["T1", "T2", "R1", "R2"],
            n_trajectories=n_live,
            n_failed=n_failed,
            metadata={**meta, "observable": "scattering_channels", "basis": chan_spec.basis},
        )
    return EnsembleResult(
        series=series,
        channels=channels,
        n_failed=n_failed,
        n_in_coupling_region=n_inside,
        max_energy_drift=max(o.max_drift for o in outs),
    )
