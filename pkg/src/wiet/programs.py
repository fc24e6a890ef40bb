"""ConvexProgram builders for the scheme solvers and cross-check tests.

Each builder returns (program, recover) where recover(values) maps solver
output back to full-size covariance matrices.  Quadratic forms only see
the projection of a covariance onto the span of that transmitter's K
channel vectors, and shrinking the orthogonal part never hurts a trace
budget, so blocks are built in that span (dimension min(Nt, K) generically)
and inflated afterwards.
"""

import math

import numpy as np

from . import linalg
from .subsolver import ConvexProgram, const_expr

LN2_INV = 1.0 / math.log(2.0)


def span_bases(cs):
    """Orthonormal basis of span{h_k1..h_kK} per transmitter k."""
    bases = []
    for k in range(cs.K):
        Hk = cs.h[k].T  # (Nt, K)
        U, sv, _ = np.linalg.svd(Hk, full_matrices=False)
        keep = sv > 1e-12 * max(float(sv[0]) if sv.size else 0.0, 1.0)
        B = U[:, keep]
        if B.shape[1] == 0:
            B = np.eye(cs.Nt, 1, dtype=complex)
        bases.append(B)
    return bases


def _reduced(cs):
    """Per-transmitter bases and reduced channel vectors g[k][i] = B_k^H h[k, i]."""
    bases = span_bases(cs)
    g = [[bases[k].conj().T @ cs.h[k, i] for i in range(cs.K)] for k in range(cs.K)]
    return bases, g


def _recover_factory(cs, bases, names):
    def recover(values):
        out = []
        for k, name in enumerate(names):
            C = np.asarray(values[name], dtype=complex)
            S = bases[k] @ C @ bases[k].conj().T
            out.append(linalg.herm(S))
        return out

    return recover


def _add_cov_blocks(p, cs, bases, scale=0.25):
    names = []
    for k in range(cs.K):
        d = bases[k].shape[1]
        name = p.add_block(f"S{k}", d)
        p.set_initial(name, (scale * cs.P[k] / d) * np.eye(d))
        names.append(name)
    return names


def _energy_expr(p, cs, g, names, i, skip=()):
    e = const_expr(0.0)
    for k in range(cs.K):
        if k in skip:
            continue
        e = e + p.quad(names[k], g[k][i])
    return e


def eh_program(cs):
    """Common-harvest slot: maximize the worst ratio of delivered energy to
    requirement, subject to per-transmitter power budgets.

    Also the feasibility certificate shared by the simultaneous schemes:
    the instance is serviceable iff the optimum is >= 1.
    """
    bases, g = _reduced(cs)
    p = ConvexProgram()
    names = _add_cov_blocks(p, cs, bases)
    p.add_scalar("beta")
    p.set_initial("beta", 0.0)
    p.maximize(p.scalar("beta"))
    for i in range(cs.K):
        if cs.E[i] > 0:
            p.add_geq(_energy_expr(p, cs, g, names, i), p.scalar("beta", float(cs.E[i])))
    for k in range(cs.K):
        p.add_leq(p.trace(names[k]), const_expr(float(cs.P[k])))
    return p, _recover_factory(cs, bases, names)


def feasibility_program(cs):
    """Energy floors plus trace caps with a zero objective; the solver's
    phase I decides feasibility and the result is an interior point."""
    bases, g = _reduced(cs)
    p = ConvexProgram()
    names = _add_cov_blocks(p, cs, bases)
    p.maximize(const_expr(0.0))
    for i in range(cs.K):
        if cs.E[i] > 0:
            p.add_geq(_energy_expr(p, cs, g, names, i), const_expr(float(cs.E[i])))
    for k in range(cs.K):
        p.add_leq(p.trace(names[k]), const_expr(float(cs.P[k])))
    return p, _recover_factory(cs, bases, names)


def random_vertex_program(cs, rng):
    """Feasible-set exploration: maximize a random linear functional of the
    covariances over the floors + traces set (used for multistart seeds)."""
    bases, g = _reduced(cs)
    p = ConvexProgram()
    names = _add_cov_blocks(p, cs, bases)
    obj = const_expr(0.0)
    for k in range(cs.K):
        d = bases[k].shape[1]
        G = linalg.herm(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
        obj = obj + p.block_term(names[k], G)
    p.maximize(obj)
    for i in range(cs.K):
        if cs.E[i] > 0:
            p.add_geq(_energy_expr(p, cs, g, names, i), const_expr(float(cs.E[i])))
    for k in range(cs.K):
        p.add_leq(p.trace(names[k]), const_expr(float(cs.P[k])))
    return p, _recover_factory(cs, bases, names)


def sca_subproblem(cs, ybar):
    """One ascent step of the simultaneous scheme.

    The rate of each user is written as (x_i - y_i) / ln 2 with
    e^{x_i} <= total received power + noise and interference + noise bounded
    by the tangent-line upper model of e^{y_i} at ybar_i, which makes the
    step a small convex program whose optimum never overstates the truth.
    """
    bases, g = _reduced(cs)
    p = ConvexProgram()
    names = _add_cov_blocks(p, cs, bases)
    obj = const_expr(0.0)
    for i in range(cs.K):
        xi = p.add_scalar(f"x{i}")
        yi = p.add_scalar(f"y{i}")
        obj = obj + (p.scalar(xi) - p.scalar(yi)) * (float(cs.w[i]) * LN2_INV)
        total = _energy_expr(p, cs, g, names, i) + const_expr(float(cs.sigma2[i]))
        interf = _energy_expr(p, cs, g, names, i, skip=(i,)) + const_expr(float(cs.sigma2[i]))
        p.add_exp_leq(1.0, xi, total)
        eyb = math.exp(ybar[i])
        p.add_leq(interf, p.scalar(yi, eyb) + const_expr(eyb * (1.0 - ybar[i])))
        if cs.E[i] > 0:
            p.add_geq(_energy_expr(p, cs, g, names, i), const_expr(float(cs.E[i])))
        p.set_initial(xi, float(ybar[i]))
        p.set_initial(yi, float(ybar[i]) + 0.5)
    for k in range(cs.K):
        p.add_leq(p.trace(names[k]), const_expr(float(cs.P[k])))
    p.maximize(obj)
    return p, _recover_factory(cs, bases, names)


def ps_feasibility_program(cs):
    """Power-splitting feasibility: covariances, split fractions rho and
    their reciprocals theta, with hyperbolic couplings."""
    bases, g = _reduced(cs)
    p = ConvexProgram()
    names = _add_cov_blocks(p, cs, bases)
    p.maximize(const_expr(0.0))
    _add_ps_splitting(p, cs, g, names)
    for k in range(cs.K):
        p.add_leq(p.trace(names[k]), const_expr(float(cs.P[k])))
    return p, _recover_factory(cs, bases, names)


def _add_ps_splitting(p, cs, g, names):
    for i in range(cs.K):
        rho = p.add_scalar(f"rho{i}", lower=0.0)
        theta = p.add_scalar(f"theta{i}", lower=0.0)
        p.add_leq(p.scalar(rho), const_expr(1.0))
        p.add_product_geq(p.scalar(theta), p.scalar(rho), 1.0)
        if cs.E[i] > 0:
            # harvested share must cover the requirement: energy * (1 - rho) >= E
            p.add_product_geq(_energy_expr(p, cs, g, names, i),
                              const_expr(1.0) - p.scalar(rho), float(cs.E[i]))
        p.set_initial(rho, 0.5)
        p.set_initial(theta, 2.5)


def ps_subproblem(cs, ybar, rho0=None, theta0=None):
    """One ascent step of the power-splitting scheme: same tangent-line
    treatment of the rate, with the split-dependent noise in both the
    signal-plus-noise total and the interference model."""
    bases, g = _reduced(cs)
    p = ConvexProgram()
    names = _add_cov_blocks(p, cs, bases)
    _add_ps_splitting(p, cs, g, names)
    obj = const_expr(0.0)
    for i in range(cs.K):
        xi = p.add_scalar(f"x{i}")
        yi = p.add_scalar(f"y{i}")
        obj = obj + (p.scalar(xi) - p.scalar(yi)) * (float(cs.w[i]) * LN2_INV)
        noise = p.scalar(f"theta{i}", float(cs.hat_sigma2[i])) + const_expr(float(cs.tilde_sigma2[i]))
        total = _energy_expr(p, cs, g, names, i) + noise
        interf = _energy_expr(p, cs, g, names, i, skip=(i,)) + noise
        p.add_exp_leq(1.0, xi, total)
        eyb = math.exp(ybar[i])
        p.add_leq(interf, p.scalar(yi, eyb) + const_expr(eyb * (1.0 - ybar[i])))
        p.set_initial(xi, float(ybar[i]))
        p.set_initial(yi, float(ybar[i]) + 0.5)
        if rho0 is not None:
            p.set_initial(f"rho{i}", float(rho0[i]))
        if theta0 is not None:
            p.set_initial(f"theta{i}", float(theta0[i]))
    for k in range(cs.K):
        p.add_leq(p.trace(names[k]), const_expr(float(cs.P[k])))
    p.maximize(obj)
    return p, _recover_factory(cs, bases, names)


def tdma_d_program(cs):
    """Joint slot-length and covariance design when energy is sent as known
    waveforms: per slot one decoder free of cross-link interference, a
    perspective-form rate, per-slot scaled power budgets, and energy floors
    collected over the other users' slots.

    Variables W[k, l] absorb the slot length (W = alpha_l * S_{k in slot l});
    recover() divides it back out and drops empty slots.
    """
    bases, g = _reduced(cs)
    K = cs.K
    p = ConvexProgram()
    names = {}
    for l in range(K):
        for k in range(K):
            d = bases[k].shape[1]
            nm = p.add_block(f"W{k}_{l}", d)
            p.set_initial(nm, (0.2 * cs.P[k] / (K * d)) * np.eye(d))
            names[k, l] = nm
    alphas = []
    obj = const_expr(0.0)
    for l in range(K):
        al = p.add_scalar(f"alpha{l}", lower=0.0)
        p.set_initial(al, 1.0 / (K + 1.0))
        alphas.append(al)
        tl = p.add_scalar(f"t{l}")
        p.set_initial(tl, 0.0)
        obj = obj + p.scalar(tl, float(cs.w[l]) * LN2_INV)
        # alpha_l * ln(1 + own_power / (alpha_l sigma2)) >= t_l, written with
        # a = alpha_l sigma2 and b = a + own slot power
        a = p.scalar(al, float(cs.sigma2[l]))
        b = a + p.quad(names[l, l], g[l][l])
        p.add_perspective_geq(a, b, p.scalar(tl, float(cs.sigma2[l])))
    p.add_leq(sum((p.scalar(a) for a in alphas), const_expr(0.0)), const_expr(1.0))
    for i in range(K):
        if cs.E[i] > 0:
            e = const_expr(0.0)
            for l in range(K):
                if l == i:
                    continue
                for k in range(K):
                    e = e + p.quad(names[k, l], g[k][i])
            p.add_geq(e, const_expr(float(cs.E[i])))
    for l in range(K):
        for k in range(K):
            p.add_leq(p.trace(names[k, l]), p.scalar(alphas[l], float(cs.P[k])))
    p.maximize(obj)

    def recover(values):
        # keep one slot per user (index l belongs to decoder l); a slot with
        # no time gets zero covariances rather than being dropped, so the
        # user association survives
        slots = []
        for l in range(K):
            al = float(values[f"alpha{l}"])
            if al <= 1e-9:
                slots.append((0.0, [np.zeros((cs.Nt, cs.Nt), dtype=complex)
                                    for _ in range(K)]))
                continue
            covs = []
            for k in range(K):
                C = np.asarray(values[f"W{k}_{l}"], dtype=complex) / al
                covs.append(linalg.herm(bases[k] @ C @ bases[k].conj().T))
            slots.append((al, covs))
        return slots

    return p, recover


def cc_slot_program(cs, alpha, slot):
    """Transformed single-slot TDMA program (decoder = `slot` user).

    Cross-check target for the closed-form slot solver: variables are the
    normalized covariances X_i = y S_i and the normalization y itself, the
    objective is the decoder's (linearized) signal power.
    """
    if cs.K != 2:
        raise ValueError("two users only")
    if slot == 2:
        from .channel import swap_users
        p, rec = cc_slot_program(swap_users(cs), alpha, 1)

        def recover(values):
            out = rec(values)
            return [out[1], out[0]]

        return p, recover

    bases, g = _reduced(cs)
    p = ConvexProgram()
    names = _add_cov_blocks(p, cs, bases, scale=0.25)
    y = p.add_scalar("y", lower=0.0)
    s1 = float(cs.sigma2[0])
    p.set_initial(y, 0.5 / s1)
    p.maximize(p.quad(names[0], g[0][0]))
    p.add_leq(p.quad(names[1], g[1][0]) + p.scalar(y, s1), const_expr(1.0))
    if cs.E[1] > 0:
        p.add_geq(p.quad(names[0], g[0][1]) + p.quad(names[1], g[1][1]),
                  p.scalar(y, float(cs.E[1]) / alpha))
    for k in range(2):
        p.add_leq(p.trace(names[k]), p.scalar(y, float(cs.P[k])))
    base_recover = _recover_factory(cs, bases, names)

    def recover(values):
        X = base_recover(values)
        yv = float(values["y"])
        return [Xk / yv for Xk in X]

    return p, recover
