"""Independent exact-quantum references at desk scale.

Three oracles: matrix-exponential evolution for frozen nuclei, 1-D two-state
split-operator wavepacket propagation on a Fourier grid, and truncated-Fock
(Lanczos-propagated) evolution for harmonic-mode composite models.  These are
kept independent of the trajectory engine; they share only the model
definitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .models import DiabaticModel
from .models.lvcm import EV_TO_AU

__all__ = [
    "GridSpec",
    "FockSpec",
    "frozen_nuclei_exact",
    "split_operator_dvr",
    "DvrResult",
    "fock_propagate",
    "FockResult",
    "lanczos_expm_apply",
    "BoundaryLeakError",
    "FockConvergenceError",
]


class BoundaryLeakError(RuntimeError):
    """Wavepacket amplitude reached the grid boundary; enlarge the grid."""


class FockConvergenceError(RuntimeError):
    """Populations not converged with respect to the Fock-space truncation."""


# ---------------------------------------------------------------------------
# frozen nuclei


def frozen_nuclei_exact(V: np.ndarray, psi0: np.ndarray, t) -> np.ndarray:
    """Populations |<n|exp(-iVt)|psi0>|^2 for constant Hermitian V.

    t may be a scalar or an array; the result has shape t.shape + (F,).
    """
    V = np.asarray(V)
    if not np.allclose(V, V.conj().T):
        raise ValueError("V must be Hermitian")
    E, U = np.linalg.eigh(V)
    c = U.conj().T @ np.asarray(psi0, dtype=complex)
    t = np.asarray(t, dtype=float)
    phase = np.exp(-1j * np.multiply.outer(t, E))
    psi_t = np.einsum("nk,...k,k->...n", U, phase, c)
    return np.abs(psi_t) ** 2


def frozen_nuclei_propagator(V: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i V dt) by eigendecomposition (Hermitian V)."""
    E, U = np.linalg.eigh(V)
    return (U * np.exp(-1j * dt * E)) @ U.conj().T


# ---------------------------------------------------------------------------
# split-operator DVR


@dataclass
class GridSpec:
    R_min: float
    R_max: float
    n_points: int = 2048
    dt: float = 1.0

    def __post_init__(self):
        if self.R_max <= self.R_min:
            raise ValueError("R_max must exceed R_min")
        if self.n_points < 4 or (self.n_points & (self.n_points - 1)) != 0:
            raise ValueError("n_points must be a power of two")

    def axis(self) -> np.ndarray:
        return np.linspace(self.R_min, self.R_max, self.n_points, endpoint=False)


@dataclass
class DvrResult:
    times: np.ndarray
    populations: np.ndarray  # (n_times, F) diabatic-basis norms
    channels_diabatic: np.ndarray  # (T1, T2, R1, R2) at t_final
    channels_adiabatic: np.ndarray
    final_psi: np.ndarray
    grid: np.ndarray


def _pointwise_expm_2x2_hermitian(V: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i V dt) for a stack of real-symmetric 2x2 matrices via Pauli split."""
    a = 0.5 * (V[..., 0, 0] + V[..., 1, 1])
    bz = 0.5 * (V[..., 0, 0] - V[..., 1, 1])
    bx = V[..., 0, 1]
    theta = np.sqrt(bx * bx + bz * bz)
    cos = np.cos(theta * dt)
    sinc = np.where(theta > 0, np.sin(theta * dt) / np.where(theta > 0, theta, 1.0), dt)
    U = np.empty(V.shape, dtype=complex)
    phase = np.exp(-1j * a * dt)
    U[..., 0, 0] = phase * (cos - 1j * sinc * bz)
    U[..., 1, 1] = phase * (cos + 1j * sinc * bz)
    U[..., 0, 1] = phase * (-1j * sinc * bx)
    U[..., 1, 0] = U[..., 0, 1]
    return U


def split_operator_dvr(
    model: DiabaticModel,
    grid: GridSpec,
    t_final: float,
    P0: Optional[float] = None,
    R0: Optional[float] = None,
    alpha: Optional[float] = None,
    init_state: Optional[int] = None,
    divide_R: float = 0.0,
    record_stride: int = 50,
    leak_tol: float = 1e-6,
) -> DvrResult:
    """Exact two-state wavepacket propagation by symmetric kinetic/potential splitting.

    The kinetic half-steps act in momentum space via FFT; the potential step is
    a pointwise 2x2 matrix exponential.  Aborts when the probability in the
    outermost 2% of the grid exceeds leak_tol.
    """
    if model.F != 2 or model.N != 1:
        raise ValueError("split-operator oracle requires a 1-D two-state model")
    mass = float(model.masses[0])
    spec = model.nuclear_init
    R0 = float(spec.mean_R[0]) if R0 is None else R0
    P0 = float(spec.mean_P[0]) if P0 is None else P0
    alpha = 1.0 / (2.0 * float(spec.var_R[0])) if alpha is None else alpha
    init_state = model.init_state if init_state is None else init_state

    x = grid.axis()
    dx = x[1] - x[0]
    psi = np.zeros((grid.n_points, 2), dtype=complex)
    envelope = np.exp(-alpha * (x - R0) ** 2 / 2.0 + 1j * (x - R0) * P0)
    psi[:, init_state] = envelope
    psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * dx)

    k = 2.0 * np.pi * np.fft.fftfreq(grid.n_points, d=dx)
    half_kin = np.exp(-1j * grid.dt / 2.0 * k * k / (2.0 * mass))[:, None]
    Vx = model.potential(x[:, None])
    expV = _pointwise_expm_2x2_hermitian(Vx, grid.dt)

    n_steps = int(round(t_final / grid.dt))
    n_edge = max(2, grid.n_points // 50)
    times = [0.0]
    pops = [np.sum(np.abs(psi) ** 2, axis=0) * dx]
    for step in range(1, n_steps + 1):
        psi = np.fft.ifft(half_kin * np.fft.fft(psi, axis=0), axis=0)
        psi = np.einsum("xij,xj->xi", expV, psi)
        psi = np.fft.ifft(half_kin * np.fft.fft(psi, axis=0), axis=0)
        if step % record_stride == 0 or step == n_steps:
            edge = (
                np.sum(np.abs(psi[:n_edge]) ** 2) + np.sum(np.abs(psi[-n_edge:]) ** 2)
            ) * dx
            if edge > leak_tol:
                raise BoundaryLeakError(
                    f"boundary probability {edge:.2e} at t={step * grid.dt:.1f}; "
                    "enlarge the grid"
                )
            times.append(step * grid.dt)
            pops.append(np.sum(np.abs(psi) ** 2, axis=0) * dx)

    dens = np.abs(psi) ** 2
    trans = x >= divide_R
    chan_dia = np.array(
        [
            np.sum(dens[trans, 0]) * dx,
            np.sum(dens[trans, 1]) * dx,
            np.sum(dens[~trans, 0]) * dx,
            np.sum(dens[~trans, 1]) * dx,
        ]
    )
    # pointwise rotation to the adiabatic basis before integrating
    E, U = np.linalg.eigh(Vx)
    psi_ad = np.einsum("xnk,xn->xk", U, psi)
    dens_ad = np.abs(psi_ad) ** 2
    chan_adi = np.array(
        [
            np.sum(dens_ad[trans, 0]) * dx,
            np.sum(dens_ad[trans, 1]) * dx,
            np.sum(dens_ad[~trans, 0]) * dx,
            np.sum(dens_ad[~trans, 1]) * dx,
        ]
    )
    return DvrResult(
        times=np.asarray(times),
        populations=np.asarray(pops),
        channels_diabatic=chan_dia,
        channels_adiabatic=chan_adi,
        final_psi=psi,
        grid=x,
    )


# ---------------------------------------------------------------------------
# truncated-Fock propagation


def lanczos_expm_apply(
    matvec,
    psi: np.ndarray,
    z: complex,
    k_max: int = 40,
    tol: float = 1e-12,
) -> np.ndarray:
    """exp(z*H) @ psi via a Lanczos Krylov subspace (H Hermitian, given as matvec).

    The subspace grows until the propagated coefficient vector stops changing
    to tol, the residual vanishes (invariant subspace), or k_max is reached.
    Full reorthogonalization keeps the basis clean at these small dimensions.
    """

    def small_exp(alphas, betas):
        T = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
        eT, uT = np.linalg.eigh(T)
        return uT @ (np.exp(z * eT) * uT[0, :])

    norm0 = float(np.linalg.norm(psi))
    if norm0 == 0.0:
        return psi.copy()
    V = [psi / norm0]
    alphas: list[float] = []
    betas: list[float] = []
    y_prev = None
    for j in range(k_max):
        w = matvec(V[j])
        alphas.append(float(np.real(np.vdot(V[j], w))))
        w = w - alphas[j] * V[j]
        if j > 0:
            w = w - betas[j - 1] * V[j - 1]
        for u in V:
            w = w - np.vdot(u, w) * u
        beta = float(np.linalg.norm(w))
        y = small_exp(alphas, betas)
        converged = y_prev is not None and (
            np.linalg.norm(y - np.pad(y_prev, (0, 1))) < tol
        )
        if converged or beta < 1e-14 or j == k_max - 1:
            basis = np.asarray(V[: j + 1])
            return norm0 * (basis.T @ y)
        betas.append(beta)
        V.append(w / beta)
        y_prev = y
    raise AssertionError("unreachable")


@dataclass
class FockSpec:
    n_max: int = 10  # Fock levels per mode (occupations 0..n_max-1)
    krylov_dim: int = 40
    check_convergence: bool = True
    convergence_tol: float = 1e-3

    def __post_init__(self):
        if self.n_max < 2:
            raise ValueError("n_max must be >= 2")


@dataclass
class FockResult:
    times: np.ndarray
    populations: np.ndarray  # (n_times, F)
    dimension: int
    energy_drift: float
    mode_R_expect: Optional[np.ndarray] = None


@dataclass
class FockModel:
    """Ladder-operator specification of a linear-coupling composite model.

    H = H_el + sum_j omega_j (n_j + 1/2) + sum_j C_j R_j, with C_j an F x F
    electronic coupling matrix and R_j = r_scale_j * (a_j + a_j^dagger).
    """

    H_el: np.ndarray
    omegas: np.ndarray
    couplings: np.ndarray  # (N_modes, F, F)
    r_scales: np.ndarray


def fock_model_from_diabatic(model: DiabaticModel) -> FockModel:
    """Extract ladder-operator data from a model whose V(R) is linear in R.

    The harmonic diagonal is identified from the mass convention: unit masses
    mean modes of the form (P^2 + w^2 R^2)/2 with R = (a+a')/sqrt(2w);
    masses 1/w mean weighted modes w(P^2+R^2)/2 with R = (a+a')/sqrt(2).
    Mode frequencies are taken from the model parameters ("omegas") when
    present and recovered by finite differences of the diagonal otherwise.
    """
    N, F = model.N, model.F
    zero = np.zeros(N)
    H_el = model.potential(zero)
    # gradient at R=0: the harmonic restoring force vanishes there, so this
    # is exactly the matrix of linear couplings
    couplings = model.potential_gradient(zero).copy()
    if np.allclose(model.masses, 1.0):
        if "omegas" in model.params:
            omegas = np.asarray(model.params["omegas"], dtype=float)
        else:
            step = 1e-3
            omegas = np.empty(N)
            for j in range(N):
                dR = np.zeros(N)
                dR[j] = step
                d2 = (
                    model.potential(dR)[0, 0]
                    - 2 * H_el[0, 0]
                    + model.potential(-dR)[0, 0]
                ) / step**2
                omegas[j] = math.sqrt(max(d2, 0.0))
        r_scales = 1.0 / np.sqrt(2.0 * omegas)
    else:
        omegas = 1.0 / model.masses
        r_scales = np.full(N, 1.0 / math.sqrt(2.0))
    return FockModel(H_el=H_el, omegas=omegas, couplings=couplings, r_scales=r_scales)


def _build_sparse_hamiltonian(fm: FockModel, n_max: int):
    N = fm.omegas.shape[0]
    F = fm.H_el.shape[0]
    dim_modes = n_max**N
    n = np.arange(n_max)
    a = sp.diags(np.sqrt(n[1:]), 1, format="csr")
    num = sp.diags(n.astype(float), 0, format="csr")
    x_op = a + a.T  # (a + a^dagger)
    eye_mode = sp.identity(n_max, format="csr")
    eye_el = sp.identity(F, format="csr")

    def mode_kron(ops: dict[int, sp.spmatrix]) -> sp.spmatrix:
        out = None
        for j in range(N):
            term = ops.get(j, eye_mode)
            out = term if out is None else sp.kron(out, term, format="csr")
        return out

    H = sp.kron(sp.csr_matrix(fm.H_el), sp.identity(dim_modes, format="csr"), format="csr")
    for j in range(N):
        h_mode = fm.omegas[j] * (num + 0.5 * eye_mode)
        H = H + sp.kron(eye_el, mode_kron({j: h_mode}), format="csr")
        C = sp.csr_matrix(fm.couplings[j])
        if C.nnz:
            R_j = fm.r_scales[j] * x_op
            H = H + sp.kron(C, mode_kron({j: R_j}), format="csr")
    return H.tocsr()


def fock_propagate(
    model: DiabaticModel,
    fock: FockSpec,
    t_final: float,
    dt_record: float,
    init_state: Optional[int] = None,
    init_occupations: Optional[np.ndarray] = None,
    init_mode_states: Optional[list] = None,
    track_mode_R: bool = False,
    _already_checked: bool = False,
) -> FockResult:
    """Exact populations of a linear-coupling model in a truncated Fock basis.

    The initial state is |init_state> x |n_1 n_2 ...> (vacuum by default);
    init_occupations selects other Fock products, init_mode_states accepts
    arbitrary per-mode amplitude vectors (e.g. coherent states).
    Populations are converged with respect to n_max: the run is repeated at
    n_max + 2 and must agree to fock.convergence_tol at all recorded times.
    """
    init_state = model.init_state if init_state is None else init_state
    fm = fock_model_from_diabatic(model)
    N, F = model.N, model.F
    dim = F * fock.n_max**N
    if dim > 2_200_000:
        raise ValueError(f"Fock dimension {dim} exceeds the desk-scale limit")
    H = _build_sparse_hamiltonian(fm, fock.n_max)

    if init_mode_states is not None:
        modes = np.ones(1, dtype=complex)
        for amp in init_mode_states:
            amp = np.asarray(amp, dtype=complex)
            if amp.shape[0] > fock.n_max:
                amp = amp[: fock.n_max]
            elif amp.shape[0] < fock.n_max:
                amp = np.pad(amp, (0, fock.n_max - amp.shape[0]))
            modes = np.kron(modes, amp)
        modes /= np.linalg.norm(modes)
    else:
        occ = (
            np.zeros(N, dtype=int)
            if init_occupations is None
            else np.asarray(init_occupations)
        )
        if np.any(occ >= fock.n_max):
            raise ValueError("initial occupation exceeds n_max")
        mode_index = 0
        for j in range(N):
            mode_index = mode_index * fock.n_max + int(occ[j])
        modes = np.zeros(fock.n_max**N, dtype=complex)
        modes[mode_index] = 1.0
    psi = np.zeros(dim, dtype=complex)
    psi[init_state * fock.n_max**N : (init_state + 1) * fock.n_max**N] = modes

    matvec = lambda v: H @ v
    n_rec = int(round(t_final / dt_record))
    times = np.arange(n_rec + 1) * dt_record
    pops = np.empty((n_rec + 1, F))
    pops[0] = _electronic_populations(psi, F)
    E0 = float(np.real(np.vdot(psi, H @ psi)))
    R_ops = None
    R_expect = None
    if track_mode_R:
        R_ops = _mode_position_operators(fm, fock.n_max, F)
        R_expect = np.empty((n_rec + 1, N))
        R_expect[0] = [np.real(np.vdot(psi, op @ psi)) for op in R_ops]
    max_drift = 0.0
    for i in range(1, n_rec + 1):
        psi = lanczos_expm_apply(matvec, psi, -1j * dt_record, k_max=fock.krylov_dim)
        nrm = np.linalg.norm(psi)
        psi /= nrm
        pops[i] = _electronic_populations(psi, F)
        max_drift = max(max_drift, abs(float(np.real(np.vdot(psi, H @ psi))) - E0))
        if track_mode_R:
            R_expect[i] = [np.real(np.vdot(psi, op @ psi)) for op in R_ops]

    if fock.check_convergence and not _already_checked:
        bigger = FockSpec(
            n_max=fock.n_max + 2, krylov_dim=fock.krylov_dim, check_convergence=False
        )
        ref = fock_propagate(
            model,
            bigger,
            t_final,
            dt_record,
            init_state=init_state,
            init_occupations=init_occupations,
            init_mode_states=init_mode_states,
            _already_checked=True,
        )
        err = float(np.max(np.abs(ref.populations - pops)))
        if err > fock.convergence_tol:
            raise FockConvergenceError(
                f"populations change by {err:.2e} when n_max -> {fock.n_max + 2}; "
                f"increase n_max"
            )
    rel_scale = abs(E0) + 1e-12
    return FockResult(
        times=times,
        populations=pops,
        dimension=dim,
        energy_drift=max_drift / rel_scale,
        mode_R_expect=R_expect,
    )


def _electronic_populations(psi: np.ndarray, F: int) -> np.ndarray:
    blocks = psi.reshape(F, -1)
    return np.sum(np.abs(blocks) ** 2, axis=1)


def _mode_position_operators(fm: FockModel, n_max: int, F: int):
    N = fm.omegas.shape[0]
    n = np.arange(n_max)
    a = sp.diags(np.sqrt(n[1:]), 1, format="csr")
    x_op = a + a.T
    eye_mode = sp.identity(n_max, format="csr")
    eye_el = sp.identity(F, format="csr")
    ops = []
    for j in range(N):
        out = None
        for i in range(N):
            term = fm.r_scales[j] * x_op if i == j else eye_mode
            out = term if out is None else sp.kron(out, term, format="csr")
        ops.append(sp.kron(eye_el, out, format="csr"))
    return ops


def boltzmann_sample_occupations(
    omegas: np.ndarray, beta: float, rng: np.random.Generator, n_max: int
) -> np.ndarray:
    """Sample per-mode Fock occupations from the truncated thermal distribution."""
    occ = np.empty(omegas.shape[0], dtype=int)
    for j, w in enumerate(omegas):
        p = np.exp(-beta * w * np.arange(n_max))
        p /= p.sum()
        occ[j] = rng.choice(n_max, p=p)
    return occ
