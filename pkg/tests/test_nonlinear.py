import math

import numpy as np
import pytest

from nlscontrol.dirichlet import build_smooth_controller, dirichlet_control, assemble_S
from nlscontrol.internal import InternalController, bump_profile
from nlscontrol.lattice import (
    SpectralField,
    free_propagate,
    make_lattice,
    resonance_integral,
    sobolev_norm,
)
from nlscontrol.nonlinear import (
    FixedPointOptions,
    NonContractionError,
    NonlinearitySpec,
    cumulative_duhamel,
    dirichlet_trace_time_norm,
    duhamel,
    fixed_point_dirichlet,
    fixed_point_internal,
    nonlinearity,
    omega,
    rk4_replay_dirichlet,
    strang_replay_internal,
)


def even_bump(N=12, fraction=0.25, center=0.0):
    a = bump_profile(make_lattice(1, N, "exponential"), fraction=fraction, center=center)
    return SpectralField(a.lattice, 0.5 * (a.coeffs + np.flip(a.coeffs)))


def small_random(lat, seed, scale=1e-3):
    rng = np.random.default_rng(seed)
    return SpectralField(
        lat, scale * (rng.normal(size=lat.size) + 1j * rng.normal(size=lat.size))
    )


class TestNonlinearity:
    def test_zero_lambda(self):
        lat = make_lattice(1, 6, "exponential")
        u = small_random(lat, 0, scale=1.0)
        out = nonlinearity(u, NonlinearitySpec(0.0, 2, 1))
        assert np.max(np.abs(out.coeffs)) == 0.0

    def test_constant_field(self):
        # u = c constant, (2,1): lambda |c|^2 c constant
        lat = make_lattice(1, 4, "exponential")
        c = 0.7 - 0.2j
        u = SpectralField.zeros(lat)
        u.coeffs[lat.flat_index(0)] = c
        out = nonlinearity(u, NonlinearitySpec(2.0, 2, 1))
        expect = 2.0 * abs(c) ** 2 * c
        assert out.coeffs[lat.flat_index(0)] == pytest.approx(expect, abs=1e-14)
        rest = np.delete(out.coeffs, lat.flat_index(0))
        assert np.max(np.abs(rest)) < 1e-14

    def test_odd_parity_preserved_for_even_alpha(self):
        lat = make_lattice(1, 6, "sine")
        u = small_random(lat, 1, scale=1.0)
        out = nonlinearity(u, NonlinearitySpec(1.0, 2, 1), out_basis="sine")
        # compare with the torus computation through the odd extension
        from nlscontrol.lattice import odd_extend, power_product, restrict

        ext = odd_extend(u)
        torus = 1.0 * power_product(ext, 2, 1)
        back = restrict(torus, "odd", tol=1e-10)
        assert np.max(np.abs(out.coeffs - back.coeffs)) < 1e-12

    def test_invalid_powers(self):
        with pytest.raises(ValueError):
            NonlinearitySpec(1.0, 1, 0)


class TestDuhamelQuadrature:
    def test_zero_source(self):
        lat = make_lattice(1, 4, "exponential")
        tg = np.linspace(0, 1, 17)
        frames = np.zeros((17, lat.size), dtype=complex)
        out = duhamel(frames, lat, tg, 1.0)
        assert np.max(np.abs(out.coeffs)) == 0.0

    def test_free_flow_source_exact(self):
        # f(tau) = W(tau) g has constant phase-factored integrand
        lat = make_lattice(1, 8, "exponential")
        rng = np.random.default_rng(2)
        g0 = SpectralField(lat, rng.normal(size=lat.size) + 1j * rng.normal(size=lat.size))
        tg = np.linspace(0, 1, 257)
        frames = np.array([free_propagate(g0, t).coeffs for t in tg])
        cum = cumulative_duhamel(frames, lat, tg)
        for j in (0, 100, 256):
            expect = tg[j] * free_propagate(g0, tg[j]).coeffs
            assert np.max(np.abs(cum[j] - expect)) < 1e-13

    def test_fourth_order_refinement(self):
        lat = make_lattice(1, 8, "exponential")
        rng = np.random.default_rng(3)
        g0 = SpectralField(lat, rng.normal(size=lat.size) + 1j * rng.normal(size=lat.size))

        def run(K):
            tg = np.linspace(0, 1, K + 1)
            fr = np.array(
                [np.exp(-1j * lat.ksq * t) * np.sin(3 * t) * g0.coeffs for t in tg]
            )
            return cumulative_duhamel(fr, lat, tg)[-1]

        ref = run(4096)
        e1 = np.max(np.abs(run(64) - ref))
        e2 = np.max(np.abs(run(128) - ref))
        assert 10.0 < e1 / e2 < 25.0  # ~16x per halving

    def test_grid_must_cover(self):
        lat = make_lattice(1, 4, "exponential")
        tg = np.linspace(0, 0.5, 9)
        frames = np.zeros((9, lat.size), dtype=complex)
        with pytest.raises(ValueError):
            duhamel(frames, lat, tg, 1.0)


class TestOmega:
    def test_zero_cases(self):
        lat = make_lattice(1, 6, "exponential")
        tg = np.linspace(0, 1, 65)
        frames = np.zeros((65, lat.size), dtype=complex)
        out = omega(frames, lat, tg, NonlinearitySpec(1.0, 2, 1))
        assert np.max(np.abs(out.coeffs)) == 0.0

    def test_single_mode_closed_form(self):
        lat = make_lattice(1, 8, "exponential")
        k, c = 2, 0.3 - 0.1j
        spec = NonlinearitySpec(1.5, 2, 1)
        T = 0.8
        tg = np.linspace(0, T, 257)
        frames = np.zeros((257, lat.size), dtype=complex)
        for j, t in enumerate(tg):
            frames[j, lat.flat_index(k)] = c * np.exp(-1j * k * k * t)
        out = omega(frames, lat, tg, spec)
        # N(v) has single mode K = k with phase e^{-i k^2 t} and amplitude
        # lam c^2 conj(c); omega = i e^{-iK^2 T} E(K^2 - k^2, T) amp
        amp = spec.lam * c**2 * np.conj(c)
        expect = 1j * np.exp(-1j * k * k * T) * complex(
            resonance_integral(np.array(0), T)
        ) * amp
        got = out.coeffs[lat.flat_index(k)]
        assert abs(got - expect) < 1e-9
        rest = np.delete(out.coeffs, lat.flat_index(k))
        assert np.max(np.abs(rest)) < 1e-12


class TestFixedPointInternal:
    def setup_method(self):
        self.lat = make_lattice(1, 16, "exponential")
        self.a = even_bump(12, 0.25)
        self.phi = small_random(self.lat, 4)
        self.psi = small_random(self.lat, 5)

    def test_linear_limit_one_iteration(self):
        ctrl = InternalController(a=self.a, s=0.6, T=1.0, lattice=self.lat)
        traj, sig, rep = fixed_point_internal(
            self.phi, self.psi, ctrl, NonlinearitySpec(0.0, 2, 1)
        )
        assert rep.iterates == 1
        assert rep.final_residual < 1e-12

    def test_cubic_acceptance_configuration(self):
        ctrl = InternalController(a=self.a, s=0.6, T=1.0, lattice=self.lat)
        spec = NonlinearitySpec(1.0, 2, 1)
        traj, sig, rep = fixed_point_internal(self.phi, self.psi, ctrl, spec)
        assert rep.endpoint_residual < 1e-7
        assert rep.converged
        assert np.all(rep.contraction_factors <= 0.55)
        replay = strang_replay_internal(ctrl, self.phi, sig, spec, steps=4096)
        err = sobolev_norm(replay - self.psi, 0.6) / sobolev_norm(self.psi, 0.6)
        assert err < 1e-6

    def test_gauge_symmetry(self):
        ctrl = InternalController(a=self.a, s=0.6, T=1.0, lattice=self.lat)
        spec = NonlinearitySpec(1.0, 2, 1)  # |u|^2 u, phase invariant
        traj, sig, rep = fixed_point_internal(self.phi, self.psi, ctrl, spec)
        ph = np.exp(0.9j)
        traj2, sig2, rep2 = fixed_point_internal(ph * self.phi, ph * self.psi, ctrl, spec)
        scale = np.max(np.abs(traj.frames))
        assert np.max(np.abs(traj2.frames - ph * traj.frames)) < 1e-10 * scale
        sscale = max(np.max(np.abs(sig.frames)), 1e-300)
        assert np.max(np.abs(sig2.frames - ph * sig.frames)) < 1e-10 * sscale

    def test_lambda_continuity(self):
        ctrl = InternalController(a=self.a, s=0.6, T=1.0, lattice=self.lat)
        base = fixed_point_internal(
            self.phi, self.psi, ctrl, NonlinearitySpec(0.0, 2, 1)
        )[1].frames
        devs = []
        for lam in (1e-3, 1e-2, 1e-1):
            sig = fixed_point_internal(
                self.phi, self.psi, ctrl, NonlinearitySpec(lam, 2, 1)
            )[1]
            devs.append(np.max(np.abs(sig.frames - base)))
        # control deviation scales linearly in lambda
        assert devs[0] < devs[1] < devs[2]
        assert 5.0 < devs[1] / devs[0] < 20.0
        assert 5.0 < devs[2] / devs[1] < 20.0

    def test_superposition_failure_witness(self):
        ctrl = InternalController(a=self.a, s=0.6, T=1.0, lattice=self.lat)
        spec = NonlinearitySpec(1.0, 2, 1)
        traj1 = fixed_point_internal(self.phi, self.psi, ctrl, spec)[0]
        traj2 = fixed_point_internal(2 * self.phi, 2 * self.psi, ctrl, spec)[0]
        assert np.max(np.abs(traj2.frames - 2 * traj1.frames)) > 0

    def test_non_contraction_raises(self):
        lat = make_lattice(1, 8, "exponential")
        ctrl = InternalController(a=even_bump(6, 0.3), s=0.6, T=1.0, lattice=lat)
        big_phi = small_random(lat, 6, scale=40.0)
        big_psi = small_random(lat, 7, scale=40.0)
        opts = FixedPointOptions(auto_shrink=False, max_iterations=12)
        with pytest.raises(NonContractionError):
            fixed_point_internal(big_phi, big_psi, ctrl, NonlinearitySpec(1.0, 2, 1), opts)

    def test_auto_shrink_recovers(self):
        lat = make_lattice(1, 8, "exponential")
        ctrl = InternalController(a=even_bump(6, 0.3), s=0.6, T=1.0, lattice=lat)
        big_phi = small_random(lat, 6, scale=0.2)
        big_psi = small_random(lat, 7, scale=0.2)
        traj, sig, rep = fixed_point_internal(
            big_phi, big_psi, ctrl, NonlinearitySpec(1.0, 2, 1)
        )
        assert rep.shrinks >= 1
        assert rep.endpoint_residual < 1e-7

    def test_odd_parity_variant(self):
        latS = make_lattice(1, 12, "sine")
        latT = make_lattice(1, 12, "exponential")
        a = even_bump(8, 0.3, center=1.1)
        ctrl = InternalController(a=a, s=0.6, T=1.0, lattice=latT)
        phi, psi = small_random(latS, 8), small_random(latS, 9)
        traj, sig, rep = fixed_point_internal(
            phi, psi, ctrl, NonlinearitySpec(1.0, 2, 1), parity="odd"
        )
        assert traj.lattice.basis == "sine"
        assert rep.endpoint_residual < 1e-7
        # control frames stay odd
        asym = max(
            float(np.max(np.abs(row + np.flip(row)))) for row in sig.frames[::64]
        )
        assert asym < 1e-10 * max(np.max(np.abs(sig.frames)), 1e-300)

    def test_odd_parity_rejects_odd_alpha(self):
        latS = make_lattice(1, 8, "sine")
        latT = make_lattice(1, 8, "exponential")
        ctrl = InternalController(a=even_bump(6, 0.3), s=0.6, T=1.0, lattice=latT)
        with pytest.raises(ValueError):
            fixed_point_internal(
                small_random(latS, 10),
                small_random(latS, 11),
                ctrl,
                NonlinearitySpec(1.0, 1, 1),  # alpha = 1 odd
                parity="odd",
            )

    def test_even_parity_variant(self):
        latC = make_lattice(1, 10, "cosine")
        latT = make_lattice(1, 10, "exponential")
        ctrl = InternalController(a=even_bump(8, 0.3), s=0.6, T=1.0, lattice=latT)
        phi, psi = small_random(latC, 12), small_random(latC, 13)
        traj, sig, rep = fixed_point_internal(
            phi, psi, ctrl, NonlinearitySpec(1.0, 1, 1), parity="even"
        )
        assert traj.lattice.basis == "cosine"
        assert rep.endpoint_residual < 1e-7


class TestFixedPointDirichlet:
    def test_linear_limit_matches_moment_control(self):
        lat = make_lattice(1, 12, "sine")
        g = build_smooth_controller(1.2, transition=3)
        u0 = SpectralField.zeros(lat)
        uT = small_random(lat, 14)
        traj, sig, rep = fixed_point_dirichlet(
            u0, uT, g, NonlinearitySpec(0.0, 1, 1), s=0.0, b=0.25, T=1.0
        )
        assert rep.iterates == 1
        S = assemble_S(g, 1.0, lat)
        v0_lin, *_ = dirichlet_control(uT, S, g, 1.0)
        assert np.max(np.abs(sig.generator.v0.coeffs - v0_lin.coeffs)) < 1e-10

    def test_vertex_cubic_type_case(self):
        # one-vertex control with N(u) = lam |u|^2 (alpha = 1 < 5/4)
        lat = make_lattice(1, 16, "sine")
        g = build_smooth_controller(1.2, transition=3)
        u0 = small_random(lat, 15)
        uT = small_random(lat, 16)
        spec = NonlinearitySpec(1.0, 1, 1)
        traj, sig, rep = fixed_point_dirichlet(u0, uT, g, spec, s=0.0, b=0.25, T=1.0)
        assert rep.endpoint_residual < 1e-6
        assert np.all(rep.contraction_factors <= 0.55)
        v0_ctrl = sig.generator.v0
        u_rep = rk4_replay_dirichlet(lat, u0, v0_ctrl, g, spec, 1.0, steps=8192)
        err = sobolev_norm(u_rep - uT, 0.0) / sobolev_norm(uT, 0.0)
        assert err < 1e-6

    def test_conjugate_square_2d(self):
        lat = make_lattice(2, 6, "sine")
        g = build_smooth_controller(2.0, transition=3, dimension=2)
        u0 = small_random(lat, 17)
        uT = small_random(lat, 18)
        spec = NonlinearitySpec(1.0, 0, 2)
        traj, sig, rep = fixed_point_dirichlet(u0, uT, g, spec, s=-0.36, b=0.40, T=1.0)
        assert rep.converged
        assert rep.endpoint_residual < 1e-6
        assert np.all(rep.contraction_factors <= 0.55)
        assert np.isfinite(sig.metadata["trace_time_norm"])

    def test_rejects_out_of_range_s(self):
        lat = make_lattice(1, 8, "sine")
        g = build_smooth_controller(1.2)
        with pytest.raises(ValueError):
            fixed_point_dirichlet(
                SpectralField.zeros(lat),
                SpectralField.zeros(lat),
                g,
                NonlinearitySpec(1.0, 1, 1),
                s=0.7,
                b=0.2,
                T=1.0,
            )


class TestTraceTimeNorm:
    def test_single_mode(self):
        lat = make_lattice(1, 8, "sine")
        v0 = SpectralField.zeros(lat)
        v0.coeffs[lat.flat_index(3)] = 2.0
        # mass = 2 p^2 (both endpoints), weight (1 + p^2)^(2 sigma)
        sigma = 0.5
        expect = math.sqrt((1.0 + 9.0) ** (2 * sigma) * 2.0 * 9.0 * 4.0)
        assert dirichlet_trace_time_norm(v0, sigma) == pytest.approx(expect, rel=1e-12)
