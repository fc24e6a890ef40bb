import math

import numpy as np
import pytest

from wiet import channel, closedform, linalg, programs, subsolver
from wiet.closedform import (INFEASIBLE_CASE, MIXTURE, MRT,
                             max_quad_energy_floor, max_quad_leakage_cap,
                             second_difference_concave, tdma_slot_solve,
                             tdms_eh_minimize)
from wiet.errors import AssumptionViolated, NonPositiveEnergy


def orth_basis_pair(ha, hb):
    M = np.column_stack([ha, hb])
    q = np.linalg.qr(M)[0]
    return q[:, 0], q[:, 1] if q.shape[1] > 1 else q[:, 0]


def _full_grid_max(ha, hb, p, feasible, n=512):
    """Coarse full sweep of the 2-D subspace on the power sphere."""
    b1, b2 = orth_basis_pair(ha, hb)
    ts = np.linspace(0.0, np.pi / 2, n)
    phis = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    T, PH = np.meshgrid(ts, phis, indexing="ij")
    ca = np.cos(T).ravel()
    cb = (np.sin(T) * np.exp(1j * PH)).ravel()
    V = math.sqrt(p) * (ca[:, None] * b1[None, :] + cb[:, None] * b2[None, :])
    val = np.abs(V @ ha.conj()) ** 2
    val[~feasible(V)] = -np.inf
    return float(val.max())


def _boundary_circle_max(ha, hb, p, c, n=2_000_000):
    """Dense sweep of the full-power beamformers whose constrained quadratic
    |hb^H v|^2 sits exactly at c: a one-parameter family in the relative
    phase between the hb direction and its in-span complement."""
    nb2 = np.linalg.norm(hb) ** 2
    if c < 0 or c > p * nb2:
        return -np.inf
    bu = hb / math.sqrt(nb2)
    q = np.linalg.qr(np.column_stack([hb, ha]))[0]
    u2 = q[:, 1] if q.shape[1] > 1 else q[:, 0]
    amp1 = math.sqrt(c / nb2)
    amp2 = math.sqrt(max(p - c / nb2, 0.0))
    A = ha.conj() @ bu
    B = ha.conj() @ u2
    psi = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    vals = np.abs(amp1 * A + amp2 * np.exp(1j * psi) * B) ** 2
    return float(vals.max())


def oracle_leakage_cap(ha, hb, p, c):
    mask = lambda V: np.abs(V @ hb.conj()) ** 2 <= c + 1e-9
    best = _full_grid_max(ha, hb, p, mask)
    # cap-active candidates
    best = max(best, _boundary_circle_max(ha, hb, p, min(c, p * np.linalg.norm(hb) ** 2)))
    # cap slack at full power along ha
    ha_unit = ha / np.linalg.norm(ha)
    if p * abs(hb.conj() @ ha_unit) ** 2 <= c + 1e-12:
        best = max(best, p * np.linalg.norm(ha) ** 2)
    return best


def oracle_energy_floor(ha, hb, p, c):
    mask = lambda V: np.abs(V @ hb.conj()) ** 2 >= c - 1e-9
    best = _full_grid_max(ha, hb, p, mask)
    best = max(best, _boundary_circle_max(ha, hb, p, c))
    ha_unit = ha / np.linalg.norm(ha)
    if p * abs(hb.conj() @ ha_unit) ** 2 >= c - 1e-12:
        best = max(best, p * np.linalg.norm(ha) ** 2)
    return best


def rand_vec(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


class TestLeakageCap:
    def test_orthogonal_is_mrt(self):
        ha = np.array([1.0, 0.0], dtype=complex)
        hb = np.array([0.0, 1.0], dtype=complex)
        r = max_quad_leakage_cap(ha, hb, 2.0, 0.3)
        assert r.case == MRT
        assert r.value == pytest.approx(2.0)
        assert abs(hb.conj() @ r.v) ** 2 <= 1e-12

    def test_zero_cap_forces_null_space(self):
        rng = np.random.default_rng(1)
        ha, hb = rand_vec(rng, 3), rand_vec(rng, 3)
        r = max_quad_leakage_cap(ha, hb, 1.5, 0.0)
        assert r.case == MIXTURE
        assert abs(hb.conj() @ r.v) ** 2 <= 1e-12
        perp = linalg.proj_orth_unit(ha, hb)
        expect = 1.5 * abs(ha.conj() @ perp) ** 2
        assert r.value == pytest.approx(expect, rel=1e-10)

    def test_fixed_case_vs_grid(self):
        ha = np.array([1.0, 0.0], dtype=complex)
        hb = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2)
        r = max_quad_leakage_cap(ha, hb, 1.0, 0.1)
        assert r.value == pytest.approx(oracle_leakage_cap(ha, hb, 1.0, 0.1), abs=1e-4)

    @pytest.mark.parametrize("seed", range(8))
    def test_random_vs_grid(self, seed):
        rng = np.random.default_rng(seed)
        ha, hb = rand_vec(rng, 3), rand_vec(rng, 3)
        p = float(rng.uniform(0.5, 2.0))
        c = float(rng.uniform(0.0, 1.0) * p * np.linalg.norm(hb) ** 2)
        r = max_quad_leakage_cap(ha, hb, p, c)
        assert r.feasible
        assert r.value == pytest.approx(oracle_leakage_cap(ha, hb, p, c), rel=1e-4, abs=1e-4)
        # constraint pattern matches the case label
        leak = abs(hb.conj() @ r.v) ** 2
        if r.case == MIXTURE:
            assert leak == pytest.approx(c, abs=1e-9 * max(1.0, c))
        else:
            assert leak <= c + 1e-9
        assert np.linalg.norm(r.v) ** 2 <= p * (1 + 1e-9)


class TestEnergyFloor:
    def test_unreachable_floor(self):
        rng = np.random.default_rng(2)
        ha, hb = rand_vec(rng, 3), rand_vec(rng, 3)
        p = 1.0
        c = 1.01 * p * np.linalg.norm(hb) ** 2
        r = max_quad_energy_floor(ha, hb, p, c)
        assert not r.feasible
        assert r.case == INFEASIBLE_CASE

    def test_zero_floor_is_mrt(self):
        rng = np.random.default_rng(3)
        ha, hb = rand_vec(rng, 3), rand_vec(rng, 3)
        r = max_quad_energy_floor(ha, hb, 1.3, 0.0)
        assert r.case == MRT
        assert r.value == pytest.approx(1.3 * np.linalg.norm(ha) ** 2, rel=1e-12)

    def test_fixed_case_vs_grid(self):
        ha = np.array([1.0, 0.0], dtype=complex)
        hb = np.array([0.6, 0.8], dtype=complex)
        r = max_quad_energy_floor(ha, hb, 1.0, 0.9)
        assert r.value == pytest.approx(oracle_energy_floor(ha, hb, 1.0, 0.9), abs=1e-4)

    @pytest.mark.parametrize("seed", range(8))
    def test_random_vs_grid(self, seed):
        rng = np.random.default_rng(100 + seed)
        ha, hb = rand_vec(rng, 3), rand_vec(rng, 3)
        p = float(rng.uniform(0.5, 2.0))
        c = float(rng.uniform(0.0, 0.98) * p * np.linalg.norm(hb) ** 2)
        r = max_quad_energy_floor(ha, hb, p, c)
        assert r.feasible
        assert r.value == pytest.approx(oracle_energy_floor(ha, hb, p, c), rel=1e-4, abs=1e-4)
        harv = abs(hb.conj() @ r.v) ** 2
        if r.case == MIXTURE:
            assert harv == pytest.approx(c, rel=1e-9, abs=1e-9)
        else:
            assert harv >= c - 1e-9


def random_instance(seed, k=2, nt=2, eta=2.0, E=(1.0, 1.0)):
    cs = channel.generate_instance(channel.GenConfig(K=k, Nt=nt, eta=eta, seed=seed))
    return cs.with_requirements(E=list(E))


class TestEhSlot:
    def test_doubling_energy_halves_beta(self):
        cs = random_instance(5, nt=3)
        r1 = tdms_eh_minimize(cs)
        r2 = tdms_eh_minimize(cs.with_requirements(E=[2.0, 2.0]))
        assert r2.beta == pytest.approx(r1.beta / 2.0, rel=1e-9)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_dual_grid(self, seed):
        cs = random_instance(seed, nt=3)
        r = tdms_eh_minimize(cs)
        beta_grid = max(closedform._eh_beta(cs, closedform._eh_dual_point(cs, mu)[0])
                        for mu in np.linspace(0.0, 1.0 / cs.E[0], 10_000))
        assert r.beta == pytest.approx(beta_grid, rel=1e-4)
        assert beta_grid <= r.beta + 1e-12  # every dual point is primal-feasible

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_generic_solver(self, seed):
        cs = random_instance(40 + seed, nt=4)
        r = tdms_eh_minimize(cs)
        p, recover = programs.eh_program(cs)
        rep = subsolver.solve_convex(p)
        assert rep.status == subsolver.OPTIMAL
        assert r.beta == pytest.approx(rep.objective, rel=1e-5)

    def test_solution_is_feasible_scaling(self):
        cs = random_instance(7, nt=4)
        r = tdms_eh_minimize(cs)
        e = channel.energies(cs, r.S)
        assert min(e / cs.E) == pytest.approx(r.beta, rel=1e-10)
        for k in range(2):
            assert np.trace(r.S[k]).real <= cs.P[k] * (1 + 1e-9)
            assert linalg.is_psd(r.S[k])

    def test_rejects_bad_inputs(self):
        cs = random_instance(8)
        with pytest.raises(NonPositiveEnergy):
            tdms_eh_minimize(cs.with_requirements(E=[0.0, 1.0]))
        h = cs.h.copy()
        h[0, 1] = 2.0 * h[0, 0]  # parallel pair for transmitter 0
        bad = channel.ChannelSet(K=2, Nt=cs.Nt, h=h, sigma2=cs.sigma2,
                                 tilde_sigma2=cs.tilde_sigma2, hat_sigma2=cs.hat_sigma2,
                                 P=cs.P, E=cs.E, w=cs.w)
        with pytest.raises(AssumptionViolated):
            tdms_eh_minimize(bad)


def decoupled_instance(nt=4, sigma2=0.1, E=(0.2, 0.2)):
    h = np.zeros((2, 2, nt), dtype=complex)
    h[0, 0, 0] = 1.2   # tx1 -> rx1
    h[0, 1, 1] = 0.9   # tx1 -> rx2, orthogonal to h11
    h[1, 0, 2] = 0.7   # tx2 -> rx1
    h[1, 1, 3] = 1.1   # tx2 -> rx2, orthogonal to h21
    s = np.full(2, sigma2)
    return channel.ChannelSet(K=2, Nt=nt, h=h, sigma2=s, tilde_sigma2=s / 2,
                              hat_sigma2=s / 2, P=np.ones(2), E=np.asarray(E, dtype=float),
                              w=np.ones(2))


class TestTdmaSlot:
    def test_decoupled_construction(self):
        cs = decoupled_instance()
        alpha = 0.5
        assert alpha * cs.P[1] * np.linalg.norm(cs.h[1, 1]) ** 2 >= cs.E[1]
        res = tdma_slot_solve(cs, alpha, slot=1)
        expect = alpha * np.log2(1.0 + cs.P[0] * np.linalg.norm(cs.h[0, 0]) ** 2 / cs.sigma2[0])
        assert res.rate == pytest.approx(expect, rel=1e-9)
        mrt1 = cs.P[0] * linalg.outer(cs.h[0, 0] / np.linalg.norm(cs.h[0, 0]))
        mrt2 = cs.P[1] * linalg.outer(cs.h[1, 1] / np.linalg.norm(cs.h[1, 1]))
        assert np.linalg.norm(res.S[0] - mrt1) <= 1e-8
        assert np.linalg.norm(res.S[1] - mrt2) <= 1e-8

    def test_zero_energy_requirement_uses_top_of_range(self):
        cs = random_instance(11, nt=3, E=(0.0, 0.0))
        res = tdma_slot_solve(cs, 0.7, slot=1)
        assert res.y == pytest.approx(1.0 / cs.sigma2[0], rel=1e-12)
        # interference-plus-noise normalization holds at the optimum
        X2 = res.y * res.S[1]
        lhs = linalg.quad_form(X2, cs.h[1, 0]) + res.y * cs.sigma2[0]
        assert lhs == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("seed", range(6))
    def test_normalization_active_at_optimum(self, seed):
        cs = random_instance(60 + seed, nt=3, eta=1.5, E=(0.6, 0.6))
        lo, hi = channel.feasible_alpha_interval(cs)
        alpha = 0.5 * (lo + hi)
        res = tdma_slot_solve(cs, alpha, slot=1)
        X2 = res.y * res.S[1]
        lhs = linalg.quad_form(X2, cs.h[1, 0]) + res.y * cs.sigma2[0]
        assert lhs == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_generic_solver(self, seed):
        cs = random_instance(200 + seed, nt=2, eta=1.5, E=(0.5, 0.5))
        lo, hi = channel.feasible_alpha_interval(cs)
        alpha = 0.5 * (lo + hi)
        res = tdma_slot_solve(cs, alpha, slot=1)
        p, recover = programs.cc_slot_program(cs, alpha, slot=1)
        rep = subsolver.solve_convex(p)
        assert rep.status == subsolver.OPTIMAL
        # compare the transformed objective |h11^H v1|^2 = y * own signal power
        closed_obj = res.y * linalg.quad_form(res.S[0], cs.h[0, 0])
        assert closed_obj == pytest.approx(rep.objective, rel=1e-5)

    def test_slot_two_mirrors(self):
        cs = random_instance(77, nt=3, E=(0.4, 0.4))
        lo, hi = channel.feasible_alpha_interval(cs)
        alpha = 0.5 * (lo + hi)
        res2 = tdma_slot_solve(cs, 1.0 - alpha, slot=2)
        sw = channel.swap_users(cs)
        res1 = tdma_slot_solve(sw, 1.0 - alpha, slot=1)
        assert res2.rate == pytest.approx(res1.rate, rel=1e-12)
        assert np.allclose(res2.S[0], res1.S[1])

    def test_round_trip_transform(self):
        # the normalized-variable map and its inverse compose to identity
        cs = random_instance(13, nt=3, E=(0.3, 0.3))
        rng = np.random.default_rng(0)
        S1 = channel.random_psd(rng, 3, 0.3)
        S2 = channel.random_psd(rng, 3, 0.3)
        y = 1.0 / (linalg.quad_form(S2, cs.h[1, 0]) + cs.sigma2[0])
        X1, X2 = y * S1, y * S2
        assert np.linalg.norm(X1 / y - S1) <= 1e-10 * np.linalg.norm(S1)
        assert np.linalg.norm(X2 / y - S2) <= 1e-10 * np.linalg.norm(S2)
        assert linalg.quad_form(X2, cs.h[1, 0]) + y * cs.sigma2[0] == pytest.approx(1.0, abs=1e-12)


class TestConcavity:
    def test_linear_sequence_passes(self):
        assert second_difference_concave(np.linspace(0, 5, 50))

    def test_convex_bump_fails(self):
        x = np.linspace(-1, 1, 50)
        assert not second_difference_concave(x ** 2)

    @pytest.mark.parametrize("seed", range(10))
    def test_slot_objective_concave(self, seed):
        cs = random_instance(300 + seed, nt=3, eta=1.5, E=(0.5, 0.5))
        lo, hi = channel.feasible_alpha_interval(cs)
        alpha = 0.5 * (lo + hi)
        assert closedform.concavity_probe(cs, alpha, grid_size=64)
