import math

import numpy as np
import pytest

from wiet import subsolver
from wiet.subsolver import (INFEASIBLE, OPTIMAL, ConvexProgram, SolveOptions,
                            check_kkt, solve_convex)


def test_exp_toy():
    # maximize x s.t. e^x <= 2, x >= 0  ->  x = ln 2
    p = ConvexProgram()
    x = p.add_scalar("x", lower=0.0)
    p.set_initial("x", 0.1)
    p.maximize(p.scalar("x"))
    p.add_exp_leq(1.0, "x", subsolver.const_expr(2.0))
    rep = solve_convex(p)
    assert rep.status == OPTIMAL
    assert rep.objective == pytest.approx(math.log(2.0), abs=1e-6)


def test_trace_cap_toy():
    # maximize tr(S) s.t. tr(S) <= 3, S PSD 2x2 -> 3
    p = ConvexProgram()
    p.add_block("S", 2)
    p.maximize(p.trace("S"))
    p.add_leq(p.trace("S"), subsolver.const_expr(3.0))
    rep = solve_convex(p)
    assert rep.status == OPTIMAL
    assert rep.objective == pytest.approx(3.0, abs=1e-6)
    S = rep.values["S"]
    assert np.trace(S).real <= 3.0 + 1e-7


def test_quad_objective_direction():
    # maximize h^H S h s.t. tr(S) <= p picks the rank-one MRT solution p*||h||^2
    p = ConvexProgram()
    p.add_block("S", 3)
    h = np.array([1.0, 1.0j, 0.5])
    p.maximize(p.quad("S", h))
    p.add_leq(p.trace("S"), subsolver.const_expr(2.0))
    rep = solve_convex(p)
    assert rep.status == OPTIMAL
    assert rep.objective == pytest.approx(2.0 * np.linalg.norm(h) ** 2, rel=1e-6)


def test_equality_toy():
    # maximize x s.t. x + y = 1, y >= 0 -> x = 1
    p = ConvexProgram()
    p.add_scalar("x")
    p.add_scalar("y", lower=0.0)
    p.maximize(p.scalar("x"))
    p.add_eq(p.scalar("x") + p.scalar("y"), subsolver.const_expr(1.0))
    p.set_initial("x", 0.3)
    p.set_initial("y", 0.7)
    rep = solve_convex(p)
    assert rep.status == OPTIMAL
    assert rep.objective == pytest.approx(1.0, abs=1e-6)
    assert rep.values["x"] + rep.values["y"] == pytest.approx(1.0, abs=1e-9)


def test_product_toy():
    # maximize -x s.t. x*y >= 1, y <= 2, x >= 0 -> x = 1/2
    p = ConvexProgram()
    p.add_scalar("x", lower=0.0)
    p.add_scalar("y", lower=0.0)
    p.maximize(p.scalar("x", -1.0))
    p.add_product_geq(p.scalar("x"), p.scalar("y"), 1.0)
    p.add_leq(p.scalar("y"), subsolver.const_expr(2.0))
    p.set_initial("x", 2.0)
    p.set_initial("y", 1.0)
    rep = solve_convex(p)
    assert rep.status == OPTIMAL
    assert rep.values["x"] == pytest.approx(0.5, abs=1e-5)


def test_perspective_toy():
    # maximize t s.t. a ln(b/a) >= t with a = 1 fixed, b <= 2  ->  t = ln 2
    p = ConvexProgram()
    p.add_scalar("a", lower=0.0)
    p.add_scalar("b", lower=0.0)
    p.add_scalar("t")
    p.maximize(p.scalar("t"))
    p.add_eq(p.scalar("a"), subsolver.const_expr(1.0))
    p.add_leq(p.scalar("b"), subsolver.const_expr(2.0))
    p.add_perspective_geq(p.scalar("a"), p.scalar("b"), p.scalar("t"))
    p.set_initial("a", 1.0)
    p.set_initial("b", 1.5)
    p.set_initial("t", 0.1)
    rep = solve_convex(p)
    assert rep.status == OPTIMAL
    assert rep.objective == pytest.approx(math.log(2.0), abs=1e-6)


def test_perspective_scales_like_time_share():
    # maximize a*ln(1 + e/a) with e fixed = 1, a <= 0.5: increasing in a -> a = 0.5
    p = ConvexProgram()
    p.add_scalar("a", lower=0.0)
    p.add_scalar("t")
    p.maximize(p.scalar("t"))
    p.add_leq(p.scalar("a"), subsolver.const_expr(0.5))
    # a ln((a + 1)/a) >= t
    p.add_perspective_geq(p.scalar("a"), p.scalar("a") + 1.0, p.scalar("t"))
    p.set_initial("a", 0.25)
    p.set_initial("t", 0.05)
    rep = solve_convex(p)
    assert rep.status == OPTIMAL
    expected = 0.5 * math.log(1 + 1 / 0.5)
    assert rep.objective == pytest.approx(expected, abs=1e-6)


def test_infeasible():
    p = ConvexProgram()
    p.add_scalar("x", lower=2.0)
    p.maximize(p.scalar("x"))
    p.add_leq(p.scalar("x"), subsolver.const_expr(1.0))
    p.set_initial("x", 3.0)
    rep = solve_convex(p)
    assert rep.status == INFEASIBLE


def test_scale_invariance_of_argmax():
    rng = np.random.default_rng(0)
    h = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    g = rng.standard_normal(2) + 1j * rng.standard_normal(2)

    def solve_scaled(t):
        p = ConvexProgram()
        p.add_block("S", 2)
        p.maximize(p.quad("S", h) * t)
        p.add_leq(p.quad("S", g), subsolver.const_expr(1.0))
        p.add_leq(p.trace("S"), subsolver.const_expr(1.0))
        return solve_convex(p)

    r1 = solve_scaled(1.0)
    r2 = solve_scaled(50.0)
    assert r1.status == OPTIMAL and r2.status == OPTIMAL
    assert np.linalg.norm(r1.values["S"] - r2.values["S"]) <= 1e-6
    assert r2.objective == pytest.approx(50.0 * r1.objective, rel=1e-6)


def test_relaxation_keeps_feasibility():
    # relaxing a <= constraint's right side never flips optimal -> infeasible
    for rhs in (1.1, 1.5, 4.0):
        p = ConvexProgram()
        p.add_scalar("x", lower=1.0)
        p.maximize(p.scalar("x", -1.0))
        p.add_leq(p.scalar("x"), subsolver.const_expr(rhs))
        p.set_initial("x", 1.2)
        rep = solve_convex(p)
        assert rep.status == OPTIMAL


def test_check_kkt_trace_cap():
    p = ConvexProgram()
    p.add_block("S", 2)
    p.maximize(p.trace("S"))
    p.add_leq(p.trace("S"), subsolver.const_expr(3.0))
    rep = solve_convex(p)
    r = check_kkt(p, rep.values)
    assert r.stationarity <= 1e-6
    assert r.complementarity <= 1e-5
    assert r.feasibility <= 1e-8

    # a strictly interior, suboptimal point has a large stationarity residual
    r2 = check_kkt(p, {"S": 0.5 * np.eye(2)})
    assert r2.stationarity > 1e-3


def test_report_violation_bound():
    p = ConvexProgram()
    p.add_block("S", 2)
    h = np.array([1.0, 0.5 + 0.25j])
    p.maximize(p.quad("S", h))
    p.add_geq(p.quad("S", np.array([0.1, 0.9])), subsolver.const_expr(0.05))
    p.add_leq(p.trace("S"), subsolver.const_expr(1.0))
    rep = solve_convex(p)
    assert rep.status == OPTIMAL
    assert rep.max_violation <= 1e-7 * (1.0 + 1.0)


def test_dump_mentions_all_parts():
    p = ConvexProgram()
    p.add_block("S", 2)
    p.add_scalar("x", lower=0.0)
    p.maximize(p.scalar("x"))
    p.add_exp_leq(1.0, "x", p.trace("S"))
    p.add_leq(p.trace("S"), subsolver.const_expr(3.0))
    text = p.dump()
    assert "block S dim 2" in text
    assert "exp:" in text
    assert "maximize:" in text
