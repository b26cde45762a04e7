"""Fast invariant suite behind `mapdyn selftest` (< 2 minutes).

Each check returns (name, measured, tolerance, passed); the CLI prints one
line per check and exits nonzero on any failure.  Checks accept parameter
overrides so negative controls (e.g. an injected wrong gamma) are testable.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from . import models as md
from . import phasespace as ps
from .dynamics import IntegratorConfig, MappingEngine, BatchState
from .marginals import marginal_f2_analytic
from .oracles import frozen_nuclei_propagator

__all__ = ["run_selftest", "CHECKS"]


def check_gamma_star_algebra(gamma_fn: Optional[Callable] = None):
    gamma_fn = gamma_fn or ps.gamma_star
    worst = 0.0
    for F in (1, 2, 3, 5, 8):
        g = gamma_fn(F)
        worst = max(worst, abs(ps.chi(g, F) - 1.0))
    return "gamma-star solves F*g^2+2g=1", worst, 1e-14


def check_pair_weights():
    worst = 0.0
    rng = np.random.default_rng(0)
    for F in (2, 3, 5):
        for _ in range(30):
            delta = rng.uniform(1e-3, 1.0 / F * 0.999)
            wp, wm = ps.pair_weights(delta, F)
            worst = max(worst, abs(wp + wm - 1.0))
            worst = max(worst, abs(wp * ps.chi(delta, F) + wm * ps.chi(-delta, F) - 1.0))
    return "two-point weights normalize", worst, 1e-12


def check_sphere_moments(gamma_fn: Optional[Callable] = None, n: int = 200_000):
    gamma_fn = gamma_fn or ps.gamma_star
    rng = np.random.default_rng(7)
    worst_sigma = 0.0
    for F in (2, 3):
        gamma = gamma_fn(F)
        x, p = ps.sample_constraint_sphere_batch(F, gamma, rng, n)
        m2 = np.mean(x[:, 0] ** 2)
        se = np.std(x[:, 0] ** 2) / math.sqrt(n)
        worst_sigma = max(worst_sigma, abs(m2 - ps.sphere_moment2(F, gamma)) / se)
    return "sphere second moments (sigmas)", worst_sigma, 4.0


def check_kernel_duality(gamma_fn: Optional[Callable] = None, n: int = 200_000):
    """F<K_nm K^-1_lk> = delta_nk delta_ml; with gamma-star the kernel is its own inverse."""
    gamma_fn = gamma_fn or ps.gamma_star
    rng = np.random.default_rng(11)
    F = 2
    gamma = gamma_fn(F)
    x, p = ps.sample_constraint_sphere_batch(F, gamma, rng, n)
    g = x + 1j * p
    K = 0.5 * g[:, :, None] * g.conj()[:, None, :] - gamma * np.eye(F)
    prod = F * np.einsum("bnm,blk->bnmlk", K, K)
    mean = prod.mean(axis=0)
    se = np.std(prod.real, axis=0) / math.sqrt(n) + 1e-30
    target = np.einsum("nk,ml->nmlk", np.eye(F), np.eye(F))
    worst = float(np.max(np.abs(mean - target) / se))
    return "kernel self-duality at gamma-star (sigmas)", worst, 5.0


def check_frozen_nuclei():
    delta = 0.4

    def pot(R):
        R = np.asarray(R, dtype=float)
        V = np.zeros(R.shape[:-1] + (2, 2))
        V[..., 0, 1] = delta
        V[..., 1, 0] = delta
        return V

    def grad(R):
        R = np.asarray(R, dtype=float)
        return np.zeros(R.shape[:-1] + (1, 2, 2))

    model = md.DiabaticModel(
        "frozen", 2, 1, [1.0], pot, grad,
        md.InitialNuclearSpec([0.0], [0.0], [1.0], [1.0]), 0,
    )
    rng = np.random.default_rng(3)
    s = ps.sample_constraint_sphere(2, ps.gamma_star(2), rng)
    eng = MappingEngine(model, IntegratorConfig(dt=0.05, max_time=1.0))
    st = BatchState(
        R=np.zeros((1, 1)), P=np.zeros((1, 1)),
        g=(s.x + 1j * s.p)[None, :].copy(), gamma=np.array([s.gamma]),
    )
    eng.advance(st, 200, 0.05)
    exact = frozen_nuclei_propagator(pot(np.zeros(1)), 10.0) @ (s.x + 1j * s.p)
    return "frozen-nuclei electronic evolution", float(np.max(np.abs(st.g[0] - exact))), 1e-10


def check_energy_drift():
    model = md.build_tully(md.TullyParams("sac", P0=20.0))
    rng = np.random.default_rng(5)
    s = ps.sample_constraint_sphere(2, ps.gamma_star(2), rng)
    eng = MappingEngine(model, IntegratorConfig(dt=1.0, max_time=1.0))
    st = BatchState(
        R=np.array([[-3.8]]), P=np.array([[20.0]]),
        g=(s.x + 1j * s.p)[None, :].copy(), gamma=np.array([s.gamma]),
    )
    E0 = float(eng.energy(st)[0])
    worst = 0.0
    for _ in range(8):
        eng.advance(st, 100, 1.0)
        worst = max(worst, abs(float(eng.energy(st)[0]) - E0) / abs(E0))
    return "SAC mapping-energy drift (relative)", worst, 1e-5


def check_marginal_trace():
    xs = np.linspace(-2.5, 2.5, 41)
    X1, X2 = np.meshgrid(xs, xs, indexing="ij")
    gamma = ps.gamma_star(2)
    M = marginal_f2_analytic(X1, X2, gamma)
    h = xs[1] - xs[0]
    integral = np.sum(M[..., 0, 0] + M[..., 1, 1]) * h * h
    return "analytic marginal trace integral", abs(integral - 2.0), 0.02


CHECKS = [
    check_gamma_star_algebra,
    check_pair_weights,
    check_sphere_moments,
    check_kernel_duality,
    check_frozen_nuclei,
    check_energy_drift,
    check_marginal_trace,
]


def run_selftest(out=print) -> bool:
    ok = True
    for fn in CHECKS:
        name, measured, tol = fn()
        passed = measured <= tol
        ok &= passed
        out(f"[{'PASS' if passed else 'FAIL'}] {name}: measured {measured:.3e} (tolerance {tol:.1e})")
    return ok
