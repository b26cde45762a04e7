import math

import numpy as np
import pytest

from mapdyn import dynamics as dyn
from mapdyn import models as md
from mapdyn import phasespace as ps
from mapdyn.oracles import frozen_nuclei_propagator

from conftest import make_frozen_model


def mapping_state(F=2, gamma=None, seed=0):
    gamma = ps.gamma_star(F) if gamma is None else gamma
    return ps.sample_constraint_sphere(F, gamma, np.random.default_rng(seed))


class TestElectronicPropagator:
    def test_identity_for_zero(self):
        U = dyn.electronic_propagator(np.zeros((2, 2)), 0.7)
        assert np.allclose(U, np.eye(2))

    def test_two_level_cosine(self):
        delta, t = 0.3, 2.1
        V = np.array([[0.0, delta], [delta, 0.0]])
        U = dyn.electronic_propagator(V, t)
        g = U @ np.array([1.0, 0.0])
        assert abs(g[0]) ** 2 == pytest.approx(math.cos(delta * t) ** 2, abs=1e-12)

    def test_unitarity(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((4, 4))
        V = 0.5 * (A + A.T)
        U = dyn.electronic_propagator(V, 0.37)
        assert np.max(np.abs(U @ dyn.electronic_propagator(V, -0.37) - np.eye(4))) < 1e-12

    def test_batch_matches_single(self):
        rng = np.random.default_rng(2)
        H = rng.standard_normal((5, 2, 2))
        H = 0.5 * (H + np.swapaxes(H, -1, -2))
        for b in range(5):
            assert np.allclose(
                dyn._expm_batch(H, 0.21)[b], dyn.electronic_propagator(H[b], 0.21), atol=1e-13
            )

    def test_rotate_batch_matches_matrix(self):
        rng = np.random.default_rng(3)
        H = rng.standard_normal((6, 2, 2)) + 1j * rng.standard_normal((6, 2, 2))
        H = 0.5 * (H + np.swapaxes(H.conj(), -1, -2))
        g = rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2))
        out = dyn._rotate_batch(H, g, 0.13)
        ref = np.einsum("bij,bj->bi", dyn._expm_batch(H, 0.13), g)
        assert np.max(np.abs(out - ref)) < 1e-12


class TestStepDiabatic:
    def test_frozen_nuclei_matches_unitary(self, frozen_model):
        s = mapping_state(seed=4)
        state = dyn.TrajectoryState(R=np.zeros(1), P=np.zeros(1), electronic=s)
        n, dt = 500, 0.02
        for _ in range(n):
            state = dyn.step_diabatic(state, frozen_model, dt)
        U = frozen_nuclei_propagator(frozen_model.potential(np.zeros(1)), n * dt)
        g_exact = U @ (s.x + 1j * s.p)
        g_num = state.electronic.x + 1j * state.electronic.p
        assert np.max(np.abs(g_exact - g_num)) < 1e-10
        assert np.all(state.R == 0.0) and np.all(state.P == 0.0)

    def test_diagonal_constant_v(self):
        model = make_frozen_model(delta=0.0, diag=(0.2, -0.1))
        s = mapping_state(seed=5)
        state = dyn.TrajectoryState(R=np.zeros(1), P=np.zeros(1), electronic=s)
        mods0 = np.abs(s.x + 1j * s.p)
        for _ in range(100):
            state = dyn.step_diabatic(state, model, 0.05)
        mods = np.abs(state.electronic.x + 1j * state.electronic.p)
        assert np.max(np.abs(mods - mods0)) < 1e-12

    def test_sphere_norm_preserved(self):
        model = md.build_tully(md.TullyParams("sac", P0=15.0))
        s = mapping_state(seed=6)
        eng = dyn.MappingEngine(model, dyn.IntegratorConfig(dt=0.5, max_time=1.0))
        st = dyn.BatchState(
            R=np.array([[-3.8]]), P=np.array([[15.0]]),
            g=(s.x + 1j * s.p)[None, :].copy(), gamma=np.array([s.gamma]),
        )
        r0 = np.sum(np.abs(st.g) ** 2) / 2
        eng.advance(st, 10_000, 0.5)
        assert abs(np.sum(np.abs(st.g) ** 2) / 2 - r0) < 1e-10

    def test_energy_conservation_and_order(self):
        model = md.build_tully(md.TullyParams("sac", P0=20.0))
        s = mapping_state(seed=7)

        def max_drift(dt):
            eng = dyn.MappingEngine(model, dyn.IntegratorConfig(dt=dt, max_time=1.0))
            st = dyn.BatchState(
                R=np.array([[-3.8]]), P=np.array([[20.0]]),
                g=(s.x + 1j * s.p)[None, :].copy(), gamma=np.array([s.gamma]),
            )
            E0 = eng.energy(st)[0]
            worst = 0.0
            for _ in range(20):
                eng.advance(st, int(40 / dt), dt)
                worst = max(worst, abs(eng.energy(st)[0] - E0) / abs(E0))
            return worst

        d2, d1 = max_drift(2.0), max_drift(1.0)
        assert d1 < 1e-5
        assert d2 / d1 >= 3.5

    def test_time_reversal(self):
        model = md.build_tully(md.TullyParams("sac", P0=20.0))
        s = mapping_state(seed=8)
        eng = dyn.MappingEngine(model, dyn.IntegratorConfig(dt=0.5, max_time=1.0))
        st = dyn.BatchState(
            R=np.array([[-3.8]]), P=np.array([[20.0]]),
            g=(s.x + 1j * s.p)[None, :].copy(), gamma=np.array([s.gamma]),
        )
        R0, P0, g0 = st.R.copy(), st.P.copy(), st.g.copy()
        eng.advance(st, 400, 0.5)
        eng.advance(st, 400, -0.5)
        assert np.max(np.abs(st.R - R0)) < 1e-8
        assert np.max(np.abs(st.P - P0)) < 1e-8
        assert np.max(np.abs(st.g - g0)) < 1e-8

    def test_nonfinite_aborts(self, frozen_model):
        s = mapping_state(seed=9)
        s.x[0] = np.nan
        state = dyn.TrajectoryState(R=np.zeros(1), P=np.zeros(1), electronic=s)
        with pytest.raises(FloatingPointError):
            dyn.step_diabatic(state, frozen_model, 0.1)


class TestStepAdiabatic:
    def test_uncoupled_surface_motion(self):
        # constant eigenvectors: adiabatic dynamics = independent surfaces
        model = make_frozen_model(delta=0.1, diag=(0.3, -0.3))
        s = mapping_state(seed=10)
        state = dyn.TrajectoryState(R=np.zeros(1), P=np.zeros(1), electronic=s)
        for _ in range(50):
            state = dyn.step_adiabatic(state, model, 0.05)
        mods = np.abs(state.electronic.x + 1j * state.electronic.p)
        s_mods = np.abs(s.x + 1j * s.p)
        assert np.max(np.abs(mods - s_mods)) < 1e-12

    def test_cross_representation_consistency(self):
        model = md.build_tully(md.TullyParams("sac", P0=20.0))
        s = mapping_state(seed=11)
        ad0 = md.adiabatize(model.potential(np.array([-3.8])), model.potential_gradient(np.array([-3.8])))
        gaps = []
        for dt in (0.8, 0.4, 0.2):
            n = int(round(600.0 / dt))
            engD = dyn.MappingEngine(model, dyn.IntegratorConfig(dt=dt, max_time=1.0))
            stD = dyn.BatchState(
                R=np.array([[-3.8]]), P=np.array([[20.0]]),
                g=(s.x + 1j * s.p)[None, :].copy(), gamma=np.array([s.gamma]),
            )
            engD.advance(stD, n, dt)
            engA = dyn.MappingEngine(
                model, dyn.IntegratorConfig(dt=dt, max_time=1.0, representation="adiabatic")
            )
            stA = dyn.BatchState(
                R=np.array([[-3.8]]), P=np.array([[20.0]]),
                g=(ad0.U.T @ (s.x + 1j * s.p))[None, :].copy(),
                gamma=np.array([s.gamma]),
                U=ad0.U[None].copy(),
            )
            engA.advance(stA, n, dt)
            popD = 0.5 * np.abs(stD.g[0]) ** 2
            popA = 0.5 * np.abs(engA.basis_g(stA, "diabatic")[0]) ** 2
            gaps.append(np.max(np.abs(popD - popA)) + abs(stD.R[0, 0] - stA.R[0, 0]))
        assert gaps[2] < 0.5 * gaps[0]  # Richardson-style trend toward agreement

    def test_adiabatic_energy_conservation_ecr(self):
        model = md.build_tully(md.TullyParams("ecr", P0=25.0))
        s = mapping_state(seed=12)
        ad0 = md.adiabatize(model.potential(np.array([-13.0])), model.potential_gradient(np.array([-13.0])))
        eng = dyn.MappingEngine(
            model, dyn.IntegratorConfig(dt=0.5, max_time=1.0, representation="adiabatic")
        )
        st = dyn.BatchState(
            R=np.array([[-13.0]]), P=np.array([[25.0]]),
            g=(ad0.U.T @ (s.x + 1j * s.p))[None, :].copy(),
            gamma=np.array([s.gamma]),
            U=ad0.U[None].copy(),
        )
        E0 = eng.energy(st)[0]
        worst = 0.0
        for _ in range(30):
            eng.advance(st, 100, 0.5)
            worst = max(worst, abs(eng.energy(st)[0] - E0) / abs(E0))
        assert worst < 1e-5


class TestEhrenfest:
    def test_frozen_exact(self, frozen_model):
        state = dyn.TrajectoryState(R=np.zeros(1), P=np.zeros(1), c=np.array([1.0, 0.0], dtype=complex))
        for _ in range(200):
            state = dyn.ehrenfest_step(state, frozen_model, 0.05)
        expect = math.cos(0.3 * 10.0) ** 2
        assert abs(state.c[0]) ** 2 == pytest.approx(expect, abs=1e-10)

    def test_single_surface_classical(self):
        model = md.build_tully(md.TullyParams("sac", P0=10.0, overrides={"C": 0.0}))
        state = dyn.TrajectoryState(
            R=np.array([-3.0]), P=np.array([10.0]), c=np.array([1.0, 0.0], dtype=complex)
        )
        for _ in range(100):
            state = dyn.ehrenfest_step(state, model, 1.0)
        assert abs(state.c[0]) ** 2 == pytest.approx(1.0, abs=1e-12)
        # energy on surface 0 conserved
        E = state.P[0] ** 2 / (2 * 2000.0) + model.potential(state.R)[0, 0]
        E0 = 10.0**2 / (2 * 2000.0) + model.potential(np.array([-3.0]))[0, 0]
        assert E == pytest.approx(E0, rel=1e-6)

    def test_norm_preserved(self):
        model = md.build_tully(md.TullyParams("dac", P0=30.0))
        state = dyn.TrajectoryState(
            R=np.array([-10.0]), P=np.array([30.0]), c=np.array([1.0, 0.0], dtype=complex)
        )
        for _ in range(2000):
            state = dyn.ehrenfest_step(state, model, 0.5)
        assert np.sum(np.abs(state.c) ** 2) == pytest.approx(1.0, abs=1e-8)


class TestFssh:
    def test_zero_coupling_no_hops(self):
        model = make_frozen_model(delta=0.0, diag=(0.5, -0.5))
        state = dyn.TrajectoryState(
            R=np.zeros(1), P=np.zeros(1), c=np.array([0.0, 1.0], dtype=complex), active_state=1
        )
        rng = np.random.default_rng(0)
        for _ in range(100):
            state = dyn.fssh_step(state, model, 0.1, rng)
        assert state.active_state == 1

    def test_frustrated_hop_keeps_state(self):
        # active on the lower surface with almost no kinetic energy: upward
        # hops are always frustrated
        model = md.build_tully(md.TullyParams("sac", P0=0.5))
        ad = md.adiabatize(model.potential(np.zeros(1)), model.potential_gradient(np.zeros(1)))
        c = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2)
        state = dyn.TrajectoryState(
            R=np.zeros(1), P=np.array([0.5]), c=c, active_state=0
        )
        rng = np.random.default_rng(1)
        for _ in range(50):
            state = dyn.fssh_step(state, model, 0.5, rng)
            assert state.active_state == 0

    def test_hop_conserves_energy(self):
        B = 16
        model = md.build_tully(md.TullyParams("sac", P0=20.0))
        cfg = dyn.IntegratorConfig(dt=0.5, max_time=1.0, representation="adiabatic")
        eng = dyn.FsshEngine(model, cfg, rngs=[np.random.default_rng(100 + b) for b in range(B)])
        R = np.full((B, 1), -3.8)
        P = np.full((B, 1), 20.0)
        ad0 = md.adiabatize(model.potential(np.array([-3.8])), model.potential_gradient(np.array([-3.8])))
        st = dyn.BatchState(
            R=R, P=P,
            c=np.tile(ad0.U[0, :].astype(complex), (B, 1)),
            active=np.zeros(B, dtype=int), U=np.tile(ad0.U, (B, 1, 1)),
        )
        E0 = eng.energy(st).copy()
        for _ in range(40):
            eng.advance(st, 40, 0.5)
            assert np.max(np.abs(eng.energy(st) - E0) / np.abs(E0)) < 1e-4
        # SAC at P0=20 transfers about half the ensemble to the upper surface
        assert 2 <= int(np.sum(st.active)) <= 14


class TestRunTrajectory:
    def test_record_counts(self, frozen_model):
        s = mapping_state(seed=13)
        init = dyn.TrajectoryState(R=np.zeros(1), P=np.zeros(1), electronic=s)
        cfg = dyn.IntegratorConfig(dt=0.1, max_time=1.0, record_stride=1)
        rec = dyn.run_trajectory(frozen_model, "cmm", init, cfg)
        assert rec.times.shape[0] == 11
        cfg0 = dyn.IntegratorConfig(dt=0.1, max_time=0.0, record_stride=1)
        rec0 = dyn.run_trajectory(frozen_model, "cmm", init, cfg0)
        assert rec0.times.shape[0] == 1

    def test_deterministic_replay(self, frozen_model):
        s = mapping_state(seed=14)
        init = dyn.TrajectoryState(R=np.zeros(1), P=np.zeros(1), electronic=s)
        cfg = dyn.IntegratorConfig(dt=0.05, max_time=2.0, record_stride=5)
        r1 = dyn.run_trajectory(frozen_model, "cmm", init, cfg)
        r2 = dyn.run_trajectory(frozen_model, "cmm", init, cfg)
        assert np.array_equal(r1.populations, r2.populations)
        assert np.array_equal(r1.energies, r2.energies)

    def test_sink_called(self, frozen_model):
        s = mapping_state(seed=15)
        init = dyn.TrajectoryState(R=np.zeros(1), P=np.zeros(1), electronic=s)
        seen = []
        cfg = dyn.IntegratorConfig(dt=0.1, max_time=1.0, record_stride=2)
        dyn.run_trajectory(frozen_model, "cmm", init, cfg, sink=lambda st, E: seen.append(st.t))
        assert len(seen) == 6
