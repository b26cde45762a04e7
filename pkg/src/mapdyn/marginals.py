"""Marginal quasi-probability distributions on (weighted) constraint phase space.

For two states the marginal of the kernel over the remaining sphere
coordinates has a closed quadratic form supported on the disc
x1^2 + x2^2 <= 2(1 + 2 gamma); the weighted variant is a signed combination
of two such discs whose cancellation produces a hollow ring.  Monte Carlo
histograms of sampled kernels converge to the same functions and extend the
tomography to F > 2 and to (x, p) axis pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .phasespace import (
    GammaScheme,
    SingleGamma,
    SymmetricPairGamma,
    draw_gamma,
    sample_constraint_sphere_batch,
)

__all__ = [
    "Grid2D",
    "marginal_f2_analytic",
    "marginal_f2_weighted",
    "marginal_mc",
    "harmonic_wigner_01",
    "hybrid_joint_grid",
]


@dataclass
class Grid2D:
    """Uniform 2-D grid of (complex) marginal values with per-bin errors."""

    axis1: np.ndarray
    axis2: np.ndarray
    values: np.ndarray  # (n1, n2) complex
    stderr: np.ndarray  # (n1, n2) real
    meta: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            for key in sorted(self.meta):
                fh.write(f"# {key} = {self.meta[key]}\n")
            fh.write("x1,x2,re,im,stderr\n")
            for i, a in enumerate(self.axis1):
                for j, b in enumerate(self.axis2):
                    v = complex(self.values[i, j])
                    fh.write(
                        f"{float(a)!r},{float(b)!r},{v.real!r},{v.imag!r},"
                        f"{float(self.stderr[i, j])!r}\n"
                    )

    @classmethod
    def from_csv(cls, path) -> "Grid2D":
        meta = {}
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, val = line[1:].partition("=")
                    meta[key.strip()] = val.strip()
                    continue
                if line.startswith("x1,"):
                    continue
                rows.append([float(v) for v in line.split(",")])
        data = np.asarray(rows)
        a1 = np.unique(data[:, 0])
        a2 = np.unique(data[:, 1])
        vals = (data[:, 2] + 1j * data[:, 3]).reshape(a1.size, a2.size)
        err = data[:, 4].reshape(a1.size, a2.size)
        return cls(axis1=a1, axis2=a2, values=vals, stderr=err, meta=meta)


def marginal_f2_analytic(x1, x2, gamma: float) -> np.ndarray:
    """Closed-form 2x2 marginal matrix at (x1, x2) for a two-state system.

    Broadcasts over array inputs; returns shape broadcast(x1, x2) + (2, 2).
    Zero outside the support disc.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    r2 = x1 * x1 + x2 * x2
    inside = r2 <= 2.0 * (1.0 + 2.0 * gamma)
    pref = inside / (2.0 * math.pi * (1.0 + 2.0 * gamma))
    out = np.empty(np.broadcast(x1, x2).shape + (2, 2))
    quad = 0.5 * (x1 * x1 - x2 * x2)
    out[..., 0, 0] = pref * (1.0 + quad)
    out[..., 1, 1] = pref * (1.0 - quad)
    out[..., 0, 1] = pref * x1 * x2
    out[..., 1, 0] = out[..., 0, 1]
    return out


def marginal_f2_weighted(x1, x2, delta: float) -> np.ndarray:
    """Two-state marginal on symmetrically weighted constraint phase space.

    Signed combination of the single-gamma forms at gamma = +delta and
    -delta on their respective discs; exactly zero outside the larger disc
    and strongly cancelling inside the smaller one.
    """
    if not 0.0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2) for two states")
    w_plus = (1.0 - 2.0 * delta * delta + 2.0 * delta) / (4.0 * delta)
    w_minus = 1.0 - w_plus  # negative
    return w_plus * marginal_f2_analytic(x1, x2, delta) + w_minus * marginal_f2_analytic(
        x1, x2, -delta
    )


def _kernel_entry(x: np.ndarray, p: np.ndarray, n: int, m: int, gamma: float) -> np.ndarray:
    g_n = x[:, n] + 1j * p[:, n]
    g_m = x[:, m] - 1j * p[:, m]
    val = 0.5 * g_n * g_m
    if n == m:
        val = val - gamma
    return val


def marginal_mc(
    n: int,
    m: int,
    scheme: GammaScheme,
    F: int,
    axis1: np.ndarray,
    axis2: np.ndarray,
    rng: np.random.Generator,
    n_samples: int,
    axes: str = "xx",
    axis_states: Optional[tuple] = None,
    chunk: int = 500_000,
) -> Grid2D:
    """Histogram estimate of the kernel-entry (n, m) marginal on a coordinate plane.

    axis_states = (i, j) selects the plane: axes = "xx" bins (x_i, x_j),
    axes = "xp" bins (x_i, p_j).  By default the plane follows the entry,
    (i, j) = (n, m); for diagonal entries, where that would be degenerate,
    it falls back to the first two distinct states -- matching the closed
    two-state forms, which put every entry on the (x_1, x_2) plane.  The
    estimate in a bin is F * mean(K_nm * indicator) / bin_area, accumulated
    per gamma branch with the branch weights.  Warns (in meta) when the
    expected count per bin inside the support is below 10.
    """
    if F < 2:
        raise ValueError("marginals need at least two states")
    if axes not in ("xx", "xp"):
        raise ValueError("axes must be 'xx' or 'xp'")
    if axis_states is None:
        # diagonal entries on the fixed (x_0, x_1) plane, matching the
        # closed two-state forms; off-diagonal entries on their own plane
        axis_states = (n, m) if (n != m or axes == "xp") else (0, 1)
    ax_i, ax_j = axis_states
    n_bins1 = axis1.size - 1
    n_bins2 = axis2.size - 1
    area = (axis1[1] - axis1[0]) * (axis2[1] - axis2[0])
    scheme.validate(F)
    n_branches = scheme.n_branches
    per_branch = n_samples // n_branches
    sum_re = np.zeros((n_bins1, n_bins2))
    sum_im = np.zeros((n_bins1, n_bins2))
    sum_sq = np.zeros((n_bins1, n_bins2))
    for branch in range(n_branches):
        gamma, w = draw_gamma(scheme, branch)
        b_sum = np.zeros((n_bins1, n_bins2), dtype=complex)
        b_sq = np.zeros((n_bins1, n_bins2))
        done = 0
        while done < per_branch:
            size = min(chunk, per_branch - done)
            x, p = sample_constraint_sphere_batch(F, gamma, rng, size)
            k_val = _kernel_entry(x, p, n, m, gamma) * (F / area)
            c1 = x[:, ax_i]
            c2 = x[:, ax_j] if axes == "xx" else p[:, ax_j]
            i1 = np.digitize(c1, axis1) - 1
            i2 = np.digitize(c2, axis2) - 1
            ok = (i1 >= 0) & (i1 < n_bins1) & (i2 >= 0) & (i2 < n_bins2)
            flat = i1[ok] * n_bins2 + i2[ok]
            b_sum += (
                np.bincount(flat, weights=k_val[ok].real, minlength=n_bins1 * n_bins2)
                + 1j
                * np.bincount(flat, weights=k_val[ok].imag, minlength=n_bins1 * n_bins2)
            ).reshape(n_bins1, n_bins2)
            b_sq += np.bincount(
                flat, weights=np.abs(k_val[ok]) ** 2, minlength=n_bins1 * n_bins2
            ).reshape(n_bins1, n_bins2)
            done += size
        mean = b_sum / per_branch
        # per-bin variance of the indicator-weighted variable
        var = np.maximum(b_sq / per_branch - np.abs(mean) ** 2, 0.0) / per_branch
        sum_re += w * mean.real
        sum_im += w * mean.imag
        sum_sq += w * w * var
    centers1 = 0.5 * (axis1[:-1] + axis1[1:])
    centers2 = 0.5 * (axis2[:-1] + axis2[1:])
    gamma_max = max(abs(draw_gamma(scheme, b)[0]) for b in range(n_branches))
    disc_area = math.pi * 2.0 * (1.0 + F * gamma_max)
    expected = per_branch * area / disc_area
    meta = {
        "axes": axes,
        "axis-states": f"{ax_i},{ax_j}",
        "gamma-scheme": scheme.label(),
        "nm-pair": f"{n},{m}",
        "n_samples": n_samples,
    }
    if expected < 10:
        meta["warning"] = f"expected count per bin {expected:.1f} < 10"
    return Grid2D(
        axis1=centers1,
        axis2=centers2,
        values=sum_re + 1j * sum_im,
        stderr=np.sqrt(sum_sq),
        meta=meta,
    )


# ---------------------------------------------------------------------------
# hybrid joint distributions for a harmonic mode x spin-1/2 composite


def harmonic_wigner_01(R, P) -> np.ndarray:
    """Wigner kernels of |0><0|, |0><1|, |1><0|, |1><1| for a unit-frequency mode.

    Returns shape broadcast(R, P) + (2, 2) complex, in the convention where
    the phase-space integral with measure dR dP / (2 pi) gives the trace.
    """
    R = np.asarray(R, dtype=float)
    P = np.asarray(P, dtype=float)
    r2 = R * R + P * P
    gauss = 2.0 * np.exp(-r2)
    out = np.empty(np.broadcast(R, P).shape + (2, 2), dtype=complex)
    out[..., 0, 0] = gauss
    out[..., 0, 1] = gauss * math.sqrt(2.0) * (R + 1j * P)
    out[..., 1, 0] = np.conj(out[..., 0, 1])
    out[..., 1, 1] = gauss * (2.0 * r2 - 1.0)
    return out


def _spin_half_density(kind: str) -> np.ndarray:
    # basis index 0 = up, 1 = down
    if kind == "cat":
        v = np.array([1.0, 1.0]) / math.sqrt(2.0)
        return np.outer(v, v)
    if kind == "mixed":
        return 0.5 * np.eye(2)
    if kind == "up":
        return np.diag([1.0, 0.0])
    raise ValueError(f"unknown spin state {kind!r}")


def _discrete_marginal(scheme, x1, x2) -> np.ndarray:
    if isinstance(scheme, SingleGamma):
        return marginal_f2_analytic(x1, x2, scheme.gamma)
    if isinstance(scheme, SymmetricPairGamma):
        return marginal_f2_weighted(x1, x2, scheme.delta)
    raise TypeError(f"unknown scheme {scheme!r}")


def hybrid_joint_grid(
    grid_R: np.ndarray,
    grid_P: np.ndarray,
    psi: str,
    scheme: GammaScheme,
    x1: float = 0.8,
    x2: float = 0.8,
) -> np.ndarray:
    """Joint phase-space blocks of a (harmonic mode x spin-1/2) composite state.

    psi = "bell" is (|0>|down> + |1>|up>)/sqrt(2); psi = "product_cat" is the
    product of the two single-DOF cat states.  The result has shape
    (nR, nP, 2, 2): for each continuous-variable cell, the 2x2 discrete
    marginal block evaluated at the fixed mapping point (x1, x2).
    """
    RR, PP = np.meshgrid(grid_R, grid_P, indexing="ij")
    W = harmonic_wigner_01(RR, PP)  # (nR, nP, 2, 2) nuclear cross-Wigner W_ij
    disc = _discrete_marginal(scheme, x1, x2)  # (2, 2)
    if psi == "bell":
        # |Psi> = (|0>|down> + |1>|up>)/sqrt(2); rho_(i s),(j s')
        rho = np.zeros((2, 2, 2, 2))  # [i, s, j, s']; spin index 0=up, 1=down
        amps = {(0, 1): 1.0 / math.sqrt(2.0), (1, 0): 1.0 / math.sqrt(2.0)}
        for (i, s), a in amps.items():
            for (jj, s2), b in amps.items():
                rho[i, s, jj, s2] = a * b
    elif psi == "product_cat":
        nuc = np.full((2, 2), 0.5)
        spin = _spin_half_density("cat")
        rho = np.einsum("ij,st->isjt", nuc, spin)
    else:
        raise ValueError(f"unsupported composite state {psi!r}")
    # C_nm(R,P) = sum_ij rho[(i,m),(j,n)] W_ji
    C = np.einsum("imjn,...ji->...nm", rho, W)
    return C * disc[None, None, :, :]
