"""Trajectory integrators: mapping dynamics (diabatic/adiabatic), Ehrenfest, FSSH.

All methods share one symmetric splitting per step,

    kick(dt/2) -> drift(dt/2) -> electronic rotation(dt) -> drift(dt/2) -> kick(dt/2),

with the electronic substep applied exactly (matrix exponential of the
potential, or of the effective adiabatic potential, at the midpoint
configuration).  The scheme is time-reversible and second order; the
electronic rotation is unitary, so mapping-sphere / amplitude norms are
preserved to floating point.

The engines are vectorized over a batch of independent trajectories; the
single-trajectory operations wrap a batch of one.  Nothing here draws random
numbers except FSSH hop decisions, which consume per-trajectory streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .models import DiabaticModel, adiabatize_batch
from .phasespace import MappingState

__all__ = [
    "IntegratorConfig",
    "TrajectoryState",
    "TrajectoryRecord",
    "electronic_propagator",
    "step_diabatic",
    "step_adiabatic",
    "ehrenfest_step",
    "fssh_step",
    "run_trajectory",
    "MappingEngine",
    "EhrenfestEngine",
    "FsshEngine",
    "make_engine",
]


@dataclass
class IntegratorConfig:
    dt: float
    max_time: float
    record_stride: int = 1
    representation: str = "diabatic"
    frustrated_reversal: bool = True
    exit_radius: Optional[float] = None  # freeze trajectories beyond |R| moving outward (1-D)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.representation not in ("diabatic", "adiabatic"):
            raise ValueError("representation must be 'diabatic' or 'adiabatic'")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.max_time / self.dt + 1e-9))


@dataclass
class TrajectoryState:
    """Full phase point of a single trajectory."""

    R: np.ndarray
    P: np.ndarray
    electronic: Optional[MappingState] = None  # mapping methods
    c: Optional[np.ndarray] = None  # Ehrenfest / FSSH amplitudes
    active_state: Optional[int] = None  # FSSH
    t: float = 0.0


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    populations: np.ndarray  # (n_records, F) per-trajectory estimates
    energies: np.ndarray  # (n_records,)
    failed: bool
    final_state: TrajectoryState


# ---------------------------------------------------------------------------
# exact electronic propagators


def electronic_propagator(V: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i V dt) for a Hermitian matrix, via eigendecomposition."""
    E, U = np.linalg.eigh(V)
    return (U * np.exp(-1j * dt * E)) @ U.conj().T


def _expm_batch(H: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i H dt) for a batch (B,F,F) of Hermitian matrices.

    F=2 uses the closed Pauli form; larger F falls back to batched eigh.
    """
    F = H.shape[-1]
    if F == 2:
        a = 0.5 * np.real(H[:, 0, 0] + H[:, 1, 1])
        bz = 0.5 * np.real(H[:, 0, 0] - H[:, 1, 1])
        bx = np.real(H[:, 0, 1])
        by = -np.imag(H[:, 0, 1])
        theta = np.sqrt(bx * bx + by * by + bz * bz)
        cos = np.cos(theta * dt)
        safe = np.where(theta > 0.0, theta, 1.0)
        sinc = np.where(theta > 0.0, np.sin(theta * dt) / safe, dt)
        U = np.empty(H.shape, dtype=complex)
        U[:, 0, 0] = cos - 1j * sinc * bz
        U[:, 1, 1] = cos + 1j * sinc * bz
        U[:, 0, 1] = sinc * (-1j * bx - by)
        U[:, 1, 0] = sinc * (-1j * bx + by)
        return U * np.exp(-1j * a * dt)[:, None, None]
    E, U = np.linalg.eigh(H)
    phase = np.exp(-1j * dt * E)
    return np.einsum("bik,bk,bjk->bij", U, phase, U.conj())


def _rotate_batch(H: np.ndarray, g: np.ndarray, dt: float) -> np.ndarray:
    """Apply exp(-i H dt) to amplitude rows g without materializing the matrix.

    F=2 uses the closed Pauli form acting on the components; larger F goes
    through _expm_batch.
    """
    if H.shape[-1] == 2:
        h00 = H[:, 0, 0].real
        h11 = H[:, 1, 1].real
        a = 0.5 * (h00 + h11)
        bz = 0.5 * (h00 - h11)
        w = H[:, 0, 1]  # = bx - i*by
        theta = np.sqrt(bz * bz + np.abs(w) ** 2)
        cos = np.cos(theta * dt)
        safe = np.where(theta > 0.0, theta, 1.0)
        sinc = np.where(theta > 0.0, np.sin(theta * dt) / safe, dt)
        g0, g1 = g[:, 0], g[:, 1]
        s0 = bz * g0 + w * g1
        s1 = np.conj(w) * g0 - bz * g1
        phase = np.exp(-1j * a * dt)
        out = np.empty_like(g)
        out[:, 0] = phase * (cos * g0 - 1j * sinc * s0)
        out[:, 1] = phase * (cos * g1 - 1j * sinc * s1)
        return out
    return np.einsum("bij,bj->bi", _expm_batch(H, dt), g)


# ---------------------------------------------------------------------------
# batched engines


@dataclass
class BatchState:
    """State arrays for a batch of independent trajectories."""

    R: np.ndarray  # (B, N)
    P: np.ndarray  # (B, N)
    g: Optional[np.ndarray] = None  # (B, F) mapping variables x + i p
    gamma: Optional[np.ndarray] = None  # (B,)
    c: Optional[np.ndarray] = None  # (B, F) amplitudes
    active: Optional[np.ndarray] = None  # (B,) int
    U: Optional[np.ndarray] = None  # (B, F, F) eigenvector cache
    t: float = 0.0
    live: np.ndarray = None  # (B,) False once frozen by the exit condition

    def __post_init__(self):
        if self.live is None:
            self.live = np.ones(self.R.shape[0], dtype=bool)

    @property
    def B(self) -> int:
        return self.R.shape[0]


class _EngineBase:
    def __init__(self, model: DiabaticModel, cfg: IntegratorConfig):
        self.model = model
        self.cfg = cfg
        self.inv_m = model.inv_masses

    # masked in-place update helpers (frozen trajectories keep their state)
    def _upd(self, old: np.ndarray, new: np.ndarray, live: np.ndarray) -> np.ndarray:
        if live.all():
            return new
        mask = live.reshape((-1,) + (1,) * (old.ndim - 1))
        return np.where(mask, new, old)

    def advance(self, st: BatchState, n_steps: int, dt: float) -> None:
        """Advance n_steps of size dt with one force evaluation per step.

        Interior half-kicks of consecutive steps are merged (leapfrog style);
        the state is synchronized at segment boundaries.
        """
        if n_steps < 1:
            return
        self._begin_segment(st, n_steps)
        ctx = self._force_context(st)
        self._kick(st, ctx, 0.5 * dt)
        for k in range(n_steps):
            self._drift_rotate_drift(st, dt)
            ctx = self._force_context(st)
            self._kick(st, ctx, dt if k < n_steps - 1 else 0.5 * dt)
            self._post_step(st, ctx, dt)
        st.t += n_steps * dt

    def _begin_segment(self, st: BatchState, n_steps: int) -> None:
        pass

    def freeze_exited(self, st: BatchState) -> None:
        radius = self.cfg.exit_radius
        if radius is None or self.model.N != 1:
            return
        r = st.R[:, 0]
        outward = (np.abs(r) > radius) & (r * st.P[:, 0] > 0)
        st.live &= ~outward

    def _post_step(self, st: BatchState, ctx, dt: float) -> None:
        pass


class MappingEngine(_EngineBase):
    """CMM/wMM trajectories; representation chosen by the integrator config."""

    def __init__(self, model, cfg):
        super().__init__(model, cfg)
        self.adiabatic = cfg.representation == "adiabatic"

    # -- diabatic pieces ---------------------------------------------------
    def _density(self, g: np.ndarray, gamma: np.ndarray) -> np.ndarray:
        x, p = g.real, g.imag
        D = 0.5 * (x[:, :, None] * x[:, None, :] + p[:, :, None] * p[:, None, :])
        idx = np.arange(g.shape[1])
        D[:, idx, idx] -= gamma[:, None]
        return D

    def _force_context(self, st: BatchState):
        if not self.adiabatic:
            grad = self.model.potential_gradient(st.R)
            force = -np.einsum("blnm,bnm->bl", grad, self._density(st.g, st.gamma))
            return {"force": force}
        V = self.model.potential(st.R)
        grad = self.model.potential_gradient(st.R)
        ad = adiabatize_batch(V, grad, st.U)
        st.U = ad.U
        # Hermitian force matrix: grad E on the diagonal, (E_k-E_l) d_lk off it
        W = np.einsum("bnk,blnm,bmj->blkj", ad.U, grad, ad.U)
        force = -np.einsum("blnm,bnm->bl", W, self._density(st.g, st.gamma))
        return {"force": force, "E": ad.E, "d": ad.d}

    def _kick(self, st: BatchState, ctx, dt: float) -> None:
        st.P = self._upd(st.P, st.P + dt * ctx["force"], st.live)

    def _drift_rotate_drift(self, st: BatchState, dt: float) -> None:
        half = 0.5 * dt * self.inv_m * st.P
        R_mid = st.R + half
        if not self.adiabatic:
            H = self.model.potential(R_mid)
        else:
            V = self.model.potential(R_mid)
            grad = self.model.potential_gradient(R_mid)
            ad = adiabatize_batch(V, grad, st.U)
            st.U = ad.U
            Rdot = self.inv_m * st.P
            H = np.zeros(ad.U.shape, dtype=complex)
            idx = np.arange(H.shape[-1])
            H[:, idx, idx] = ad.E
            H -= 1j * np.einsum("bl,blkm->bkm", Rdot, ad.d)
        st.g = self._upd(st.g, _rotate_batch(H, st.g, dt), st.live)
        st.R = self._upd(st.R, R_mid + half, st.live)

    # -- observables --------------------------------------------------------
    def populations(self, st: BatchState, basis: str = "diabatic") -> np.ndarray:
        g = self.basis_g(st, basis)
        return 0.5 * np.abs(g) ** 2 - st.gamma[:, None]

    def basis_g(self, st: BatchState, basis: str) -> np.ndarray:
        if basis == self.cfg.representation:
            return st.g
        V = self.model.potential(st.R)
        grad = self.model.potential_gradient(st.R)
        ad = adiabatize_batch(V, grad, st.U if self.adiabatic else None)
        if basis == "adiabatic":  # propagated diabatic -> rotate down
            return np.einsum("bnk,bn->bk", ad.U, st.g)
        return np.einsum("bnk,bk->bn", ad.U, st.g)

    def energy(self, st: BatchState) -> np.ndarray:
        kin = 0.5 * np.einsum("bl,l,bl->b", st.P, self.inv_m, st.P)
        if not self.adiabatic:
            V = self.model.potential(st.R)
            pot = np.einsum("bnm,bnm->b", V, self._density(st.g, st.gamma))
        else:
            V = self.model.potential(st.R)
            grad = self.model.potential_gradient(st.R)
            ad = adiabatize_batch(V, grad, st.U)
            occ = 0.5 * np.abs(st.g) ** 2 - st.gamma[:, None]
            pot = np.einsum("bn,bn->b", ad.E, occ)
        return kin + pot


class EhrenfestEngine(_EngineBase):
    """Mean-field trajectories in the diabatic representation."""

    def _force_context(self, st: BatchState):
        grad = self.model.potential_gradient(st.R)
        D = np.real(st.c[:, :, None] * st.c.conj()[:, None, :])
        force = -np.einsum("blnm,bnm->bl", grad, D)
        return {"force": force}

    def _kick(self, st, ctx, dt):
        st.P = self._upd(st.P, st.P + dt * ctx["force"], st.live)

    def _drift_rotate_drift(self, st, dt):
        half = 0.5 * dt * self.inv_m * st.P
        R_mid = st.R + half
        st.c = self._upd(st.c, _rotate_batch(self.model.potential(R_mid), st.c, dt), st.live)
        st.R = self._upd(st.R, R_mid + half, st.live)

    def populations(self, st, basis="diabatic"):
        if basis == "diabatic":
            return np.abs(st.c) ** 2
        V = self.model.potential(st.R)
        grad = self.model.potential_gradient(st.R)
        ad = adiabatize_batch(V, grad, None)
        c_ad = np.einsum("bnk,bn->bk", ad.U, st.c)
        return np.abs(c_ad) ** 2

    def energy(self, st):
        kin = 0.5 * np.einsum("bl,l,bl->b", st.P, self.inv_m, st.P)
        V = self.model.potential(st.R)
        pot = np.real(np.einsum("bn,bnm,bm->b", st.c.conj(), V, st.c))
        return kin + pot


class FsshEngine(_EngineBase):
    """Fewest-switches surface hopping (adiabatic representation, no decoherence)."""

    def __init__(self, model, cfg, rngs=None):
        super().__init__(model, cfg)
        self.rngs = rngs  # per-trajectory generators for hop decisions
        self._uniform_queue = None

    def set_rngs(self, rngs):
        self.rngs = rngs

    def _adiabatic(self, st: BatchState):
        V = self.model.potential(st.R)
        grad = self.model.potential_gradient(st.R)
        ad = adiabatize_batch(V, grad, st.U)
        st.U = ad.U
        return ad

    def _force_context(self, st: BatchState):
        ad = self._adiabatic(st)
        gradE = np.einsum("bnk,blnm,bmk->blk", ad.U, self.model.potential_gradient(st.R), ad.U)
        B = st.B
        force = -gradE[np.arange(B), :, st.active]
        return {"force": force, "ad": ad}

    def _kick(self, st, ctx, dt):
        st.P = self._upd(st.P, st.P + dt * ctx["force"], st.live)

    def _drift_rotate_drift(self, st, dt):
        half = 0.5 * dt * self.inv_m * st.P
        R_mid = st.R + half
        V = self.model.potential(R_mid)
        grad = self.model.potential_gradient(R_mid)
        ad = adiabatize_batch(V, grad, st.U)
        st.U = ad.U
        Rdot = self.inv_m * st.P
        H = np.zeros(ad.U.shape, dtype=complex)
        idx = np.arange(H.shape[-1])
        H[:, idx, idx] = ad.E
        H -= 1j * np.einsum("bl,blkm->bkm", Rdot, ad.d)
        st.c = self._upd(st.c, _rotate_batch(H, st.c, dt), st.live)
        st.R = self._upd(st.R, R_mid + half, st.live)

    def _post_step(self, st: BatchState, ctx, dt: float) -> bool:
        """Hop attempt after each full step, using end-of-step quantities."""
        ad = ctx["ad"]
        B, F = st.c.shape
        rows = np.arange(B)
        Rdot = self.inv_m * st.P
        coup = np.einsum("bl,blkm->bkm", Rdot, ad.d)  # Rdot . d_{km}
        c_act = st.c[rows, st.active]
        denom = np.abs(c_act) ** 2
        denom = np.where(denom < 1e-30, 1e-30, denom)
        # fewest-switches probability of leaving the active state k toward l:
        # the density-matrix flux out of k, 2 Re[c_k c_l^* Rdot.d_{kl}] dt / |c_k|^2
        flux = 2.0 * dt * np.real(
            c_act[:, None] * st.c.conj() * coup[rows, st.active, :]
        ) / denom[:, None]
        flux[rows, st.active] = 0.0
        probs = np.clip(flux, 0.0, None)
        xi = self._draw_uniforms(B)
        cum = np.cumsum(probs, axis=1)
        hop_target = np.full(B, -1)
        for l in range(F - 1, -1, -1):
            hop_target = np.where((xi < cum[:, l]) & st.live, l, hop_target)
        hopped = False
        for b in np.nonzero(hop_target >= 0)[0]:
            hopped |= self._attempt_hop(st, ad, int(b), int(hop_target[b]))
        return hopped

    def advance(self, st: BatchState, n_steps: int, dt: float) -> None:
        """FSSH steps are not kick-merged: hops need the synchronized momentum,
        and a hop changes the force for the following half-kick."""
        if n_steps < 1:
            return
        self._begin_segment(st, n_steps)
        ctx = self._force_context(st)
        self._kick(st, ctx, 0.5 * dt)
        for k in range(n_steps):
            self._drift_rotate_drift(st, dt)
            ctx = self._force_context(st)
            self._kick(st, ctx, 0.5 * dt)
            hopped = self._post_step(st, ctx, dt)
            if k < n_steps - 1:
                if hopped:
                    ctx = self._force_context(st)
                self._kick(st, ctx, 0.5 * dt)
        st.t += n_steps * dt

    def _begin_segment(self, st: BatchState, n_steps: int) -> None:
        # pre-draw one uniform per trajectory per step; columns are consumed
        # step by step, so trajectory i sees an identical stream regardless of
        # segmentation into record strides
        if self.rngs is None:
            raise RuntimeError("FSSH requires per-trajectory random streams")
        self._uniform_queue = np.stack([r.random(n_steps) for r in self.rngs], axis=0)
        self._uniform_col = 0

    def _draw_uniforms(self, B: int) -> np.ndarray:
        col = self._uniform_col
        self._uniform_col += 1
        return self._uniform_queue[:, col]

    def _attempt_hop(self, st: BatchState, ad, b: int, target: int) -> bool:
        k = int(st.active[b])
        dvec = ad.d[b, :, k, target]
        norm = np.linalg.norm(dvec)
        if norm < 1e-30:
            return False
        dhat = dvec / norm
        a = 0.5 * np.sum(dhat * self.inv_m * dhat)
        bb = np.sum(dhat * self.inv_m * st.P[b])
        cc = ad.E[b, target] - ad.E[b, k]
        disc = bb * bb - 4.0 * a * cc
        if disc >= 0.0:
            lam = (-bb + math.sqrt(disc)) / (2.0 * a)
            lam2 = (-bb - math.sqrt(disc)) / (2.0 * a)
            if abs(lam2) < abs(lam):
                lam = lam2
            st.P[b] = st.P[b] + lam * dhat
            st.active[b] = target
            return True
        if self.cfg.frustrated_reversal:
            # reverse the momentum component along the coupling direction
            st.P[b] = st.P[b] - 2.0 * (bb / (2.0 * a)) * dhat
        return False

    def populations(self, st, basis="adiabatic"):
        B, F = st.c.shape
        pops = np.zeros((B, F))
        if basis == "adiabatic":
            pops[np.arange(B), st.active] = 1.0
            return pops
        # project the active adiabatic state onto the diabatic basis
        U = st.U
        if U is None:
            ad = self._adiabatic(st)
            U = ad.U
        return np.abs(U[np.arange(B), :, st.active]) ** 2

    def energy(self, st):
        ad = self._adiabatic(st)
        kin = 0.5 * np.einsum("bl,l,bl->b", st.P, self.inv_m, st.P)
        return kin + ad.E[np.arange(st.B), st.active]


def make_engine(method: str, model: DiabaticModel, cfg: IntegratorConfig):
    method = method.lower()
    if method in ("cmm", "wmm", "mapping"):
        return MappingEngine(model, cfg)
    if method == "ehrenfest":
        if cfg.representation != "diabatic":
            raise ValueError("Ehrenfest runs in the diabatic representation")
        return EhrenfestEngine(model, cfg)
    if method == "fssh":
        if cfg.representation != "adiabatic":
            raise ValueError("FSSH requires the adiabatic representation")
        return FsshEngine(model, cfg)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# single-trajectory wrappers


def _pack_mapping(state: TrajectoryState) -> BatchState:
    es = state.electronic
    return BatchState(
        R=np.atleast_2d(np.asarray(state.R, dtype=float)).copy(),
        P=np.atleast_2d(np.asarray(state.P, dtype=float)).copy(),
        g=np.atleast_2d(es.x + 1j * es.p).copy(),
        gamma=np.atleast_1d(float(es.gamma)).copy(),
        t=state.t,
    )


def _unpack_mapping(bst: BatchState, state: TrajectoryState) -> TrajectoryState:
    es = MappingState(
        x=bst.g[0].real.copy(),
        p=bst.g[0].imag.copy(),
        gamma=float(bst.gamma[0]),
        weight=state.electronic.weight,
    )
    return TrajectoryState(R=bst.R[0], P=bst.P[0], electronic=es, t=bst.t)


def step_diabatic(state: TrajectoryState, model: DiabaticModel, dt: float) -> TrajectoryState:
    """One symmetric-splitting step of mapping dynamics in the diabatic representation."""
    cfg = IntegratorConfig(dt=abs(dt), max_time=abs(dt), representation="diabatic")
    eng = MappingEngine(model, cfg)
    bst = _pack_mapping(state)
    eng.advance(bst, 1, dt)
    if not (np.all(np.isfinite(bst.R)) and np.all(np.isfinite(bst.g))):
        raise FloatingPointError("trajectory state became non-finite")
    return _unpack_mapping(bst, state)


def step_adiabatic(state: TrajectoryState, model: DiabaticModel, dt: float) -> TrajectoryState:
    """One step of mapping dynamics in the adiabatic representation.

    The electronic variables of `state` are the adiabatic-frame ones; P is the
    kinematic momentum.
    """
    cfg = IntegratorConfig(dt=abs(dt), max_time=abs(dt), representation="adiabatic")
    eng = MappingEngine(model, cfg)
    bst = _pack_mapping(state)
    eng.advance(bst, 1, dt)
    if not (np.all(np.isfinite(bst.R)) and np.all(np.isfinite(bst.g))):
        raise FloatingPointError("trajectory state became non-finite")
    return _unpack_mapping(bst, state)


def ehrenfest_step(state: TrajectoryState, model: DiabaticModel, dt: float) -> TrajectoryState:
    cfg = IntegratorConfig(dt=abs(dt), max_time=abs(dt), representation="diabatic")
    eng = EhrenfestEngine(model, cfg)
    bst = BatchState(
        R=np.atleast_2d(np.asarray(state.R, dtype=float)).copy(),
        P=np.atleast_2d(np.asarray(state.P, dtype=float)).copy(),
        c=np.atleast_2d(np.asarray(state.c, dtype=complex)).copy(),
        t=state.t,
    )
    eng.advance(bst, 1, dt)
    return TrajectoryState(R=bst.R[0], P=bst.P[0], c=bst.c[0], t=bst.t)


def fssh_step(
    state: TrajectoryState, model: DiabaticModel, dt: float, rng: np.random.Generator
) -> TrajectoryState:
    cfg = IntegratorConfig(dt=abs(dt), max_time=abs(dt), representation="adiabatic")
    eng = FsshEngine(model, cfg, rngs=[rng])
    bst = BatchState(
        R=np.atleast_2d(np.asarray(state.R, dtype=float)).copy(),
        P=np.atleast_2d(np.asarray(state.P, dtype=float)).copy(),
        c=np.atleast_2d(np.asarray(state.c, dtype=complex)).copy(),
        active=np.atleast_1d(int(state.active_state)).copy(),
        t=state.t,
    )
    eng.advance(bst, 1, dt)
    return TrajectoryState(
        R=bst.R[0], P=bst.P[0], c=bst.c[0], active_state=int(bst.active[0]), t=bst.t
    )


def run_trajectory(
    model: DiabaticModel,
    method: str,
    init: TrajectoryState,
    cfg: IntegratorConfig,
    sink: Optional[Callable[[TrajectoryState, float], None]] = None,
    rng: Optional[np.random.Generator] = None,
) -> TrajectoryRecord:
    """Integrate one trajectory, invoking sink(state, energy) at every record point.

    A non-finite state aborts the trajectory; the record is marked failed and
    the ensemble reduction excludes it.
    """
    eng = make_engine(method, model, cfg)
    if isinstance(eng, FsshEngine):
        eng.set_rngs([rng if rng is not None else np.random.default_rng(0)])
    if isinstance(eng, MappingEngine):
        bst = _pack_mapping(init)
    else:
        bst = BatchState(
            R=np.atleast_2d(np.asarray(init.R, dtype=float)).copy(),
            P=np.atleast_2d(np.asarray(init.P, dtype=float)).copy(),
            c=np.atleast_2d(np.asarray(init.c, dtype=complex)).copy(),
            active=None
            if init.active_state is None
            else np.atleast_1d(int(init.active_state)).copy(),
            t=init.t,
        )
    n_steps = cfg.n_steps
    n_rec = n_steps // cfg.record_stride
    times = [0.0]
    pops = [eng.populations(bst)[0]]
    energies = [float(eng.energy(bst)[0])]
    failed = False
    if sink is not None:
        sink(_snapshot(bst, init), energies[0])
    for _ in range(n_rec):
        eng.advance(bst, cfg.record_stride, cfg.dt)
        if not (np.all(np.isfinite(bst.R)) and np.all(np.isfinite(bst.P))):
            failed = True
            break
        times.append(bst.t)
        pops.append(eng.populations(bst)[0])
        energies.append(float(eng.energy(bst)[0]))
        if sink is not None:
            sink(_snapshot(bst, init), energies[-1])
    final = _snapshot(bst, init)
    return TrajectoryRecord(
        times=np.asarray(times),
        populations=np.asarray(pops),
        energies=np.asarray(energies),
        failed=failed,
        final_state=final,
    )


def _snapshot(bst: BatchState, template: TrajectoryState) -> TrajectoryState:
    if bst.g is not None:
        es = MappingState(
            x=bst.g[0].real.copy(),
            p=bst.g[0].imag.copy(),
            gamma=float(bst.gamma[0]),
            weight=template.electronic.weight if template.electronic else 1.0,
        )
        return TrajectoryState(R=bst.R[0].copy(), P=bst.P[0].copy(), electronic=es, t=bst.t)
    return TrajectoryState(
        R=bst.R[0].copy(),
        P=bst.P[0].copy(),
        c=None if bst.c is None else bst.c[0].copy(),
        active_state=None if bst.active is None else int(bst.active[0]),
        t=bst.t,
    )
