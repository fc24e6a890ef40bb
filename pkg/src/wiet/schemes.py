"""Scheme orchestrators: five transmit designs producing Strategy + Evaluation.

Schemes
  ideal   simultaneous decode-and-harvest receivers, ascent via successive
          convex subproblems
  tdms    one common harvest slot (as short as possible), one decode slot
  tdma    two user slots; the decoder tolerates the harvester's interference
  tdma_d  per-user slots with deterministic (cancellable) energy waveforms
  ps      receivers split power between the decoder and the harvester

Slot conventions inside Strategy: tdms stores [harvest slot, decode slot];
tdma/tdma_d store the slot of user l at index l; ideal/ps use one slot of
fraction one.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import channel as chan
from . import closedform, linalg, programs, subsolver
from .channel import ChannelSet, Evaluation
from .errors import (AssumptionViolated, InstanceInfeasible, NonPositiveEnergy,
                     SlotInfeasible, SubsolverFailure, UnsupportedConfiguration)

IDEAL = "ideal"
TDMS = "tdms"
TDMA = "tdma"
TDMA_D = "tdma_d"
PS = "ps"
ALL_SCHEMES = (IDEAL, TDMS, TDMA, TDMA_D, PS)


@dataclass
class SchemeOptions:
    multistarts: int = 5
    sca_tol: float = 1e-3          # relative objective improvement stop
    sca_max_iters: int = 100
    seed: int = 0
    alpha_grid: int = 50           # coarse line-search points for tdma
    alpha_refine: float = 1e-5     # final bracket width for time-fraction searches
    beta_feas_tol: float = 1e-9    # harvest ratio >= 1 - tol counts as feasible
    solver: subsolver.SolveOptions = field(default_factory=subsolver.SolveOptions)
    # ascent steps re-solve near-identical programs; a looser gap and a
    # shorter barrier ladder keep them cheap without affecting the guarded
    # monotone outcome
    sca_solver: subsolver.SolveOptions = field(
        default_factory=lambda: subsolver.SolveOptions(t0=1.0, mu=30.0, gap_tol=1e-7))
    sca_warm_solver: subsolver.SolveOptions = field(
        default_factory=lambda: subsolver.SolveOptions(t0=10.0, mu=30.0, gap_tol=1e-7))


@dataclass
class Slot:
    alpha: float
    covariances: list


@dataclass
class Strategy:
    scheme: str
    slots: list
    rho: np.ndarray = None     # power-splitting fractions, ps only
    meta: dict = field(default_factory=dict)


# --- evaluation --------------------------------------------------------------

def evaluate(cs: ChannelSet, s: Strategy) -> Evaluation:
    """Recompute rates, harvested energies and feasibility from first
    principles for any strategy.

    Harvest accounting is scheme-specific: time-weighted slot sums for the
    slotted schemes, the (1 - rho) branch share for power splitting (where
    the slack is measured against the inflated requirement E / (1 - rho)),
    and the plain received sum for the ideal receivers.
    """
    K = cs.K
    w = cs.w
    tol = cs.feasibility_tol()

    if s.scheme == IDEAL:
        S = s.slots[0].covariances
        rate = chan.rates(cs, S)
        energy = chan.energies(cs, S)
        slack = energy - cs.E
    elif s.scheme == PS:
        S = s.slots[0].covariances
        rho = np.asarray(s.rho, dtype=float)
        q = chan.link_powers(cs, S)
        rate = np.zeros(K)
        energy = np.zeros(K)
        slack = np.zeros(K)
        for i in range(K):
            sig = q[i, i]
            interf = q[:, i].sum() - sig
            denom = rho[i] * (interf + cs.tilde_sigma2[i]) + cs.hat_sigma2[i]
            rate[i] = np.log2(1.0 + rho[i] * sig / denom) if denom > 0 else 0.0
            received = q[:, i].sum()
            energy[i] = (1.0 - rho[i]) * received
            if cs.E[i] <= 0:
                slack[i] = received
            elif rho[i] >= 1.0:
                slack[i] = -np.inf
            else:
                slack[i] = received - cs.E[i] / (1.0 - rho[i])
    elif s.scheme == TDMS:
        eh, id_ = s.slots
        rate = (1.0 - eh.alpha) * chan.rates(cs, id_.covariances) \
            if id_.alpha > 0 else np.zeros(K)
        energy = eh.alpha * chan.energies(cs, eh.covariances)
        slack = energy - cs.E
    elif s.scheme in (TDMA, TDMA_D):
        rate = np.zeros(K)
        energy = np.zeros(K)
        for l, slot in enumerate(s.slots):
            q = chan.link_powers(cs, slot.covariances)
            sig = q[l, l]
            interf = 0.0 if s.scheme == TDMA_D else q[:, l].sum() - sig
            rate[l] = slot.alpha * np.log2(1.0 + sig / (interf + cs.sigma2[l]))
            for i in range(K):
                if i != l:
                    energy[i] += slot.alpha * q[:, i].sum()
        slack = energy - cs.E
    else:
        raise UnsupportedConfiguration(f"unknown scheme {s.scheme!r}")

    slack = np.asarray(slack, dtype=float)
    min_slack = float(np.min(slack)) if slack.size else 0.0
    return Evaluation(
        rate=np.asarray(rate, dtype=float),
        weighted_sum_rate=float(w @ rate),
        energy=np.asarray(energy, dtype=float),
        feasible=bool(min_slack >= -tol),
        min_energy_slack=min_slack,
    )


def validate_strategy(cs: ChannelSet, s: Strategy, tol=1e-8):
    """Structural invariants: slot fractions and per-slot covariances."""
    total = sum(slot.alpha for slot in s.slots)
    assert total <= 1.0 + 1e-9, f"slot fractions sum to {total}"
    for slot in s.slots:
        assert -1e-12 <= slot.alpha <= 1.0 + 1e-12
        for k, S in enumerate(slot.covariances):
            assert np.trace(S).real <= cs.P[k] + tol
            wv = np.linalg.eigvalsh(linalg.herm(S))
            assert wv[0] >= -1e-9 * max(wv[-1], 1.0)


# --- shared helpers ----------------------------------------------------------

def _mrt_covariances(cs):
    out = []
    for k in range(cs.K):
        h = cs.h[k, k]
        n = np.linalg.norm(h)
        out.append(cs.P[k] * linalg.outer(h / n) if n > 0 else np.zeros((cs.Nt, cs.Nt), complex))
    return out


def _slnr_covariances(cs):
    """Signal-to-leakage beamformers: balance own-link gain against the
    interference caused to everyone else; good start in the
    interference-limited regime where pure own-link beams are poor."""
    out = []
    for k in range(cs.K):
        A = np.mean(cs.sigma2) * np.eye(cs.Nt, dtype=complex)
        for j in range(cs.K):
            if j != k:
                A = A + linalg.outer(cs.h[k, j])
        v = np.linalg.solve(A, cs.h[k, k])
        n = np.linalg.norm(v)
        out.append(cs.P[k] * linalg.outer(v / n) if n > 0 else np.zeros((cs.Nt, cs.Nt), complex))
    return out


def _blend_to_floors(cs, S_target, S_interior, shade=0.95):
    """Largest convex step from the interior point toward the target that
    keeps every energy floor satisfied."""
    if np.all(cs.E <= 0):
        return S_target
    e_t = chan.energies(cs, S_target)
    e_c = chan.energies(cs, S_interior)
    lam = 1.0
    for i in range(cs.K):
        if cs.E[i] <= 0 or e_t[i] >= cs.E[i]:
            continue
        denom = e_c[i] - e_t[i]
        if denom <= 0:
            return [M.copy() for M in S_interior]
        lam = min(lam, (e_c[i] - cs.E[i]) / denom)
    lam = max(0.0, min(1.0, lam)) * shade
    return [lam * a + (1.0 - lam) * b for a, b in zip(S_target, S_interior)]


def max_energy_ratio(cs, opts=None):
    """Best achievable min_i(delivered energy / E_i) and the covariances
    that attain it; (inf, None, False) when no user requires energy.

    Uses the two-user dual bisection when its channel assumptions hold,
    otherwise (or for K > 2) the generic solver.  The instance is
    serviceable by the simultaneous schemes iff the ratio is >= 1.
    """
    opts = opts or SchemeOptions()
    active = [i for i in range(cs.K) if cs.E[i] > 0]
    if not active:
        return np.inf, None, False
    if cs.K == 2 and len(active) == 1:
        i = active[0]
        caps = sum(cs.P[k] * np.linalg.norm(cs.h[k, i]) ** 2 for k in range(2))
        S = []
        for k in range(2):
            h = cs.h[k, i]
            n = np.linalg.norm(h)
            S.append(cs.P[k] * linalg.outer(h / n) if n > 0 else np.zeros((cs.Nt, cs.Nt), complex))
        return caps / cs.E[i], S, False
    if cs.K == 2:
        try:
            res = closedform.tdms_eh_minimize(cs)
            return res.beta, res.S, False
        except AssumptionViolated:
            pass
    prog, recover = programs.eh_program(cs)
    rep = subsolver.solve_convex(prog, opts.solver)
    if rep.status != subsolver.OPTIMAL:
        raise SubsolverFailure(f"harvest-ratio program: status {rep.status}")
    return rep.objective, recover(rep.values), True


def instance_feasible(cs, scheme, opts=None):
    """Scheme-specific feasibility check without running the full solver."""
    opts = opts or SchemeOptions()
    if np.all(cs.E <= 0):
        return True
    if scheme in (TDMA, TDMA_D):
        if cs.K != 2 and scheme == TDMA:
            raise UnsupportedConfiguration("tdma feasibility is defined for K = 2")
        if cs.K == 2:
            return chan.tdma_feasible(cs)
        prog, _ = programs.tdma_d_program(cs)
        return subsolver.solve_convex(prog, opts.solver).status != subsolver.INFEASIBLE
    if scheme == TDMS:
        beta, _, _ = max_energy_ratio(cs, opts)
        return beta >= 1.0 - opts.beta_feas_tol
    if scheme == IDEAL:
        prog, _ = programs.feasibility_program(cs)
        return subsolver.solve_convex(prog, opts.solver).status != subsolver.INFEASIBLE
    if scheme == PS:
        prog, _ = programs.ps_feasibility_program(cs)
        return subsolver.solve_convex(prog, opts.solver).status != subsolver.INFEASIBLE
    raise UnsupportedConfiguration(f"unknown scheme {scheme!r}")


# --- ideal scheme (successive convex ascent) ---------------------------------

def _sca_ideal(cs, S0, opts):
    """Monotone ascent from one starting covariance set.

    Each step maximizes a concave model of the weighted sum rate that is
    tight at the current point and never above the truth, so accepting a
    step can only help; steps that fail to improve terminate the run.
    """
    bases = programs.span_bases(cs)
    S = [M.copy() for M in S0]
    rate = chan.weighted_sum_rate(cs, S)
    trace = [rate]
    gaps = []
    for n in range(1, opts.sca_max_iters + 1):
        q = chan.link_powers(cs, S)
        interf = np.array([q[:, i].sum() - q[i, i] + cs.sigma2[i] for i in range(cs.K)])
        ybar = np.log(interf)
        prog, recover = programs.sca_subproblem(cs, ybar)
        init = {f"S{k}": bases[k].conj().T @ S[k] @ bases[k] for k in range(cs.K)}
        for i in range(cs.K):
            total = q[:, i].sum() + cs.sigma2[i]
            init[f"x{i}"] = math.log(max(total, 1e-300)) - 1e-6
            init[f"y{i}"] = float(ybar[i]) + 1e-6
        solver_opts = opts.sca_solver if n == 1 else opts.sca_warm_solver
        rep = subsolver.solve_convex(prog, solver_opts, init=init)
        if rep.status != subsolver.OPTIMAL:
            rep = subsolver.solve_convex(prog, opts.solver)  # precise cold retry
        if rep.status != subsolver.OPTIMAL:
            raise SubsolverFailure(f"ascent step {n}: status {rep.status}", trace)
        S_new = recover(rep.values)
        rate_new = chan.weighted_sum_rate(cs, S_new)
        if rate_new < rate:
            # a cheap solve failed to improve; confirm with a precise one
            # before declaring the ascent finished
            rep = subsolver.solve_convex(prog, opts.solver, init=init)
            if rep.status == subsolver.OPTIMAL:
                S_new = recover(rep.values)
                rate_new = chan.weighted_sum_rate(cs, S_new)
        gaps.append(rate_new - rep.objective)
        if rate_new < rate:
            break
        S = S_new
        trace.append(rate_new)
        improved = rate_new - rate
        rate = rate_new
        if improved <= opts.sca_tol * max(rate, 1e-12):
            break
    return S, rate, trace, gaps


def _ideal_starts(cs, opts):
    prog, recover = programs.feasibility_program(cs)
    rep = subsolver.solve_convex(prog, opts.solver)
    if rep.status == subsolver.INFEASIBLE:
        raise InstanceInfeasible("energy requirements exceed what the channels deliver")
    if rep.status != subsolver.OPTIMAL:
        raise SubsolverFailure(f"feasibility program: status {rep.status}")
    center = recover(rep.values)
    starts = [_blend_to_floors(cs, _mrt_covariances(cs), center),
              _blend_to_floors(cs, _slnr_covariances(cs), center)]
    if np.any(cs.E > 0):
        # energy-first start: the covariances with the best worst-case
        # harvest margin, useful when the floors bind at the optimum
        try:
            _, S_eh, _ = max_energy_ratio(cs, opts)
            if S_eh is not None:
                starts.append([(1.0 - 1e-9) * M for M in S_eh])
        except (SubsolverFailure, NonPositiveEnergy):
            pass
    rng = np.random.default_rng(opts.seed)
    while len(starts) < max(1, opts.multistarts):
        vprog, vrecover = programs.random_vertex_program(cs, rng)
        vrep = subsolver.solve_convex(vprog, opts.sca_solver)
        if vrep.status != subsolver.OPTIMAL:
            raise SubsolverFailure(f"start exploration: status {vrep.status}")
        starts.append(_blend_to_floors(cs, vrecover(vrep.values), center, shade=0.9))
    # a hair below the power budget so every start is strictly interior
    return [[(1.0 - 1e-9) * M for M in S] for S in starts[: max(1, opts.multistarts)]]


def solve_ideal(cs, opts=None):
    """Weighted sum rate maximization for simultaneous decode-and-harvest
    receivers, multistart ascent, best run kept."""
    opts = opts or SchemeOptions()
    starts = _ideal_starts(cs, opts)
    best = None
    for S0 in starts:
        S, rate, trace, gaps = _sca_ideal(cs, S0, opts)
        if best is None or rate > best[1]:
            best = (S, rate, trace, gaps)
    S, rate, trace, gaps = best
    strat = Strategy(IDEAL, [Slot(1.0, S)], meta={
        "iterations": len(trace) - 1,
        "trace": [float(v) for v in trace],
        "surrogate_gaps": [float(v) for v in gaps],
        "starts": len(starts),
    })
    return strat, evaluate(cs, strat)


# --- mode switching ----------------------------------------------------------

def solve_tdms(cs, opts=None):
    """Shortest common harvest slot, then unconstrained sum-rate decoding in
    the remaining time."""
    opts = opts or SchemeOptions()
    beta, S_eh, used_fallback = max_energy_ratio(cs, opts)
    if beta < 1.0 - opts.beta_feas_tol:
        raise InstanceInfeasible(f"harvest ratio {beta:.6f} < 1")
    if np.isinf(beta):
        alpha = 0.0
        S_eh = [np.zeros((cs.Nt, cs.Nt), dtype=complex) for _ in range(cs.K)]
    else:
        alpha = min(1.0, 1.0 / beta)
    id_strat, _ = solve_ideal(cs.with_requirements(E=np.zeros(cs.K)), opts)
    S_id = id_strat.slots[0].covariances
    strat = Strategy(TDMS, [Slot(alpha, S_eh), Slot(1.0 - alpha, S_id)], meta={
        "beta": float(beta) if np.isfinite(beta) else None,
        "alpha": float(alpha),
        "iterations": id_strat.meta["iterations"],
        "trace": id_strat.meta["trace"],
        "fallback": used_fallback,
    })
    return strat, evaluate(cs, strat)


# --- TDMA (Gaussian signalling, two users) -----------------------------------

def _tdma_objective(cs, alpha):
    try:
        r1 = closedform.tdma_slot_solve(cs, alpha, slot=1)
        r2 = closedform.tdma_slot_solve(cs, 1.0 - alpha, slot=2)
    except SlotInfeasible:
        return None
    return float(cs.w[0] * r1.rate + cs.w[1] * r2.rate), (r1, r2)


def solve_tdma(cs, opts=None):
    """Two decode slots with Gaussian energy signals: line search over the
    slot split, semi-analytical covariances per slot."""
    opts = opts or SchemeOptions()
    if cs.K != 2:
        raise UnsupportedConfiguration("tdma with Gaussian signalling is offered for K = 2 only")
    if not chan.tdma_feasible(cs):
        raise InstanceInfeasible("slot-time budget cannot cover the energy requirements")
    lo, hi = chan.feasible_alpha_interval(cs)
    cache = {}

    def F(alpha):
        alpha = min(max(alpha, lo), hi)
        key = round(alpha, 15)
        if key not in cache:
            cache[key] = _tdma_objective(cs, alpha)
        out = cache[key]
        return -np.inf if out is None else out[0]

    if hi - lo <= 1e-15:
        best_alpha = lo
    else:
        grid = np.linspace(lo, hi, max(2, opts.alpha_grid))
        vals = [F(a) for a in grid]
        j = int(np.argmax(vals))
        a_lo = grid[max(0, j - 1)]
        a_hi = grid[min(len(grid) - 1, j + 1)]
        best_alpha, _ = closedform._golden_max(F, a_lo, a_hi, opts.alpha_refine)
    out = _tdma_objective(cs, min(max(best_alpha, lo), hi))
    if out is None:
        raise InstanceInfeasible("no usable slot split found")
    obj, (r1, r2) = out
    strat = Strategy(TDMA, [Slot(float(best_alpha), r1.S), Slot(float(1.0 - best_alpha), r2.S)],
                     meta={"alpha": float(best_alpha), "objective": obj, "iterations": 0})
    return strat, evaluate(cs, strat)


# --- TDMA with deterministic energy waveforms --------------------------------

def _tdma_d_two_user_slots(cs, alpha):
    """Closed forms for both slots at a fixed split: the harvesting-side
    transmitter always beams straight at its receiver (its waveform is
    known, so it costs no rate), the decoding-side transmitter covers the
    residual energy floor."""
    res = []
    for slot, a in ((1, alpha), (2, 1.0 - alpha)):
        d = 0 if slot == 1 else 1   # decoder index
        o = 1 - d
        h_dd = cs.h[d, d]
        h_do = cs.h[d, o]
        h_oo = cs.h[o, o]
        helper_gain = cs.P[o] * np.linalg.norm(h_oo) ** 2
        need = 0.0 if cs.E[o] <= 0 else (np.inf if a <= 0 else cs.E[o] / a)
        floor = need - helper_gain
        if floor > cs.P[d] * np.linalg.norm(h_do) ** 2 * (1 + 1e-12):
            return None
        n_oo = np.linalg.norm(h_oo)
        S_helper = cs.P[o] * linalg.outer(h_oo / n_oo) if n_oo > 0 \
            else np.zeros((cs.Nt, cs.Nt), complex)
        if floor <= 0:
            n_dd = np.linalg.norm(h_dd)
            S_dec = cs.P[d] * linalg.outer(h_dd / n_dd) if n_dd > 0 \
                else np.zeros((cs.Nt, cs.Nt), complex)
        else:
            r = closedform.max_quad_energy_floor(h_dd, h_do, cs.P[d], floor)
            if not r.feasible:
                return None
            S_dec = linalg.outer(r.v)
        covs = [None, None]
        covs[d] = S_dec
        covs[o] = S_helper
        sig = linalg.quad_form(S_dec, h_dd)
        rate = a * np.log2(1.0 + sig / cs.sigma2[d])
        res.append((a, covs, rate))
    return res


def solve_tdma_d(cs, opts=None):
    """Per-user slots with deterministic energy waveforms; the decoder sees
    no cross-link interference.  Two users: concave line search over the
    split with closed-form covariances.  K users: one convex program over
    slot lengths and per-slot covariances."""
    opts = opts or SchemeOptions()
    if cs.K == 2:
        if not chan.tdma_feasible(cs):
            raise InstanceInfeasible("slot-time budget cannot cover the energy requirements")
        lo, hi = chan.feasible_alpha_interval(cs)

        def F(alpha):
            out = _tdma_d_two_user_slots(cs, min(max(alpha, lo), hi))
            if out is None:
                return -np.inf
            return float(sum(cs.w[l] * out[l][2] for l in range(2)))

        if hi - lo <= 1e-15:
            best_alpha = lo
        else:
            best_alpha, _ = closedform._golden_max(F, lo, hi, opts.alpha_refine)
        out = _tdma_d_two_user_slots(cs, min(max(best_alpha, lo), hi))
        if out is None:
            raise InstanceInfeasible("no usable slot split found")
        slots = [Slot(float(a), covs) for a, covs, _ in out]
        strat = Strategy(TDMA_D, slots, meta={"alpha": float(best_alpha), "iterations": 0})
        return strat, evaluate(cs, strat)

    prog, recover = programs.tdma_d_program(cs)
    rep = subsolver.solve_convex(prog, opts.solver)
    if rep.status == subsolver.INFEASIBLE:
        raise InstanceInfeasible("slot-time budget cannot cover the energy requirements")
    if rep.status != subsolver.OPTIMAL:
        raise SubsolverFailure(f"slotted program: status {rep.status}")
    slots = [Slot(a, covs) for a, covs in recover(rep.values)]
    strat = Strategy(TDMA_D, slots, meta={"objective": float(rep.objective),
                                          "iterations": int(rep.iterations)})
    return strat, evaluate(cs, strat)


# --- power splitting ---------------------------------------------------------

def _ps_objective(cs, S, theta):
    q = chan.link_powers(cs, S)
    total = 0.0
    for i in range(cs.K):
        sig = q[i, i]
        interf = q[:, i].sum() - sig
        denom = interf + theta[i] * cs.hat_sigma2[i] + cs.tilde_sigma2[i]
        total += cs.w[i] * np.log2(1.0 + sig / denom)
    return float(total)


def _sca_ps(cs, S0, rho0, theta0, opts):
    bases = programs.span_bases(cs)
    S = [M.copy() for M in S0]
    rho = np.asarray(rho0, dtype=float).copy()
    theta = np.asarray(theta0, dtype=float).copy()
    obj = _ps_objective(cs, S, theta)
    trace = [obj]
    gaps = []
    for n in range(1, opts.sca_max_iters + 1):
        q = chan.link_powers(cs, S)
        ybar = np.array([
            math.log(q[:, i].sum() - q[i, i] + theta[i] * cs.hat_sigma2[i] + cs.tilde_sigma2[i])
            for i in range(cs.K)
        ])
        prog, recover = programs.ps_subproblem(cs, ybar, rho0=rho, theta0=theta)
        init = {f"S{k}": bases[k].conj().T @ S[k] @ bases[k] for k in range(cs.K)}
        for i in range(cs.K):
            total = q[:, i].sum() + theta[i] * cs.hat_sigma2[i] + cs.tilde_sigma2[i]
            init[f"x{i}"] = math.log(max(total, 1e-300)) - 1e-6
            init[f"y{i}"] = float(ybar[i]) + 1e-6
            # back off the active hyperbolic couplings so the restart point
            # stays strictly interior
            r0 = float(np.clip(rho[i] - 1e-9, 1e-9, 1.0 - 1e-9))
            init[f"rho{i}"] = r0
            init[f"theta{i}"] = max(float(theta[i]), (1.0 + 1e-9) / r0)
        solver_opts = opts.sca_solver if n == 1 else opts.sca_warm_solver
        rep = subsolver.solve_convex(prog, solver_opts, init=init)
        if rep.status != subsolver.OPTIMAL:
            rep = subsolver.solve_convex(prog, opts.solver)  # precise cold retry
        if rep.status != subsolver.OPTIMAL:
            raise SubsolverFailure(f"ascent step {n}: status {rep.status}", trace)
        S_new = recover(rep.values)
        rho_new = np.array([rep.values[f"rho{i}"] for i in range(cs.K)])
        theta_new = np.array([rep.values[f"theta{i}"] for i in range(cs.K)])
        obj_new = _ps_objective(cs, S_new, theta_new)
        if obj_new < obj:
            rep = subsolver.solve_convex(prog, opts.solver, init=init)
            if rep.status == subsolver.OPTIMAL:
                S_new = recover(rep.values)
                rho_new = np.array([rep.values[f"rho{i}"] for i in range(cs.K)])
                theta_new = np.array([rep.values[f"theta{i}"] for i in range(cs.K)])
                obj_new = _ps_objective(cs, S_new, theta_new)
        gaps.append(obj_new - rep.objective)
        if obj_new < obj:
            break
        S, rho, theta = S_new, rho_new, theta_new
        trace.append(obj_new)
        improved = obj_new - obj
        obj = obj_new
        if improved <= opts.sca_tol * max(obj, 1e-12):
            break
    return S, rho, theta, obj, trace, gaps


def _ps_start_from(cs, S, center):
    """Attach split fractions to a covariance start, blending toward the
    interior point so every user keeps harvest margin."""
    S = [0.8 * a + 0.2 * b for a, b in zip(S, center)]
    e = chan.energies(cs, S)
    rho = np.zeros(cs.K)
    for i in range(cs.K):
        if cs.E[i] <= 0:
            rho[i] = 0.9
        else:
            if e[i] <= cs.E[i]:
                return None
            rho[i] = float(np.clip(0.5 * (1.0 - cs.E[i] / e[i]), 0.02, 0.95))
    theta = 1.0 / rho + 0.05
    return S, rho, theta


def solve_ps(cs, opts=None):
    """Joint covariances and power-split fractions via the same ascent as the
    ideal scheme, with reciprocal split variables kept feasible by
    hyperbolic constraints."""
    opts = opts or SchemeOptions()
    prog, recover = programs.ps_feasibility_program(cs)
    rep = subsolver.solve_convex(prog, opts.solver)
    if rep.status == subsolver.INFEASIBLE:
        raise InstanceInfeasible("energy requirements exceed what the channels deliver")
    if rep.status != subsolver.OPTIMAL:
        raise SubsolverFailure(f"feasibility program: status {rep.status}")
    center = recover(rep.values)
    rho_c = np.array([rep.values[f"rho{i}"] for i in range(cs.K)])
    theta_c = np.array([rep.values[f"theta{i}"] for i in range(cs.K)])

    starts = [(center, rho_c, theta_c)]
    for target in (_slnr_covariances(cs), _mrt_covariances(cs)):
        cand = _ps_start_from(cs, target, center)
        if cand is not None:
            starts.insert(0, cand)
    rng = np.random.default_rng(opts.seed + 1)
    while len(starts) < max(1, opts.multistarts):
        vprog, vrecover = programs.random_vertex_program(cs, rng)
        vrep = subsolver.solve_convex(vprog, opts.sca_solver)
        if vrep.status != subsolver.OPTIMAL:
            break
        cand = _ps_start_from(cs, vrecover(vrep.values), center)
        starts.append(cand if cand is not None else (center, rho_c, theta_c))
    best = None
    for S0, rho0, theta0 in starts[: max(1, opts.multistarts)]:
        S, rho, theta, obj, trace, gaps = _sca_ps(cs, S0, rho0, theta0, opts)
        if best is None or obj > best[3]:
            best = (S, rho, theta, obj, trace, gaps)
    S, rho, theta, obj, trace, gaps = best
    strat = Strategy(PS, [Slot(1.0, S)], rho=np.asarray(rho, dtype=float), meta={
        "iterations": len(trace) - 1,
        "trace": [float(v) for v in trace],
        "surrogate_gaps": [float(v) for v in gaps],
        "theta": [float(v) for v in theta],
        "starts": len(starts),
    })
    return strat, evaluate(cs, strat)


# --- dispatch ----------------------------------------------------------------

def solve_scheme(cs, scheme, opts=None):
    if scheme == IDEAL:
        return solve_ideal(cs, opts)
    if scheme == TDMS:
        return solve_tdms(cs, opts)
    if scheme == TDMA:
        return solve_tdma(cs, opts)
    if scheme == TDMA_D:
        return solve_tdma_d(cs, opts)
    if scheme == PS:
        return solve_ps(cs, opts)
    raise UnsupportedConfiguration(f"unknown scheme {scheme!r}")


# --- serialization -----------------------------------------------------------

def _cmat_to_json(M):
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def _cmat_from_json(rows):
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def strategy_to_json(s: Strategy) -> dict:
    return {
        "scheme": s.scheme,
        "slots": [{"alpha": float(slot.alpha),
                   "S": [_cmat_to_json(M) for M in slot.covariances]}
                  for slot in s.slots],
        "rho": None if s.rho is None else [float(r) for r in s.rho],
        "meta": s.meta,
    }


def strategy_from_json(d: dict) -> Strategy:
    slots = [Slot(float(sl["alpha"]), [_cmat_from_json(M) for M in sl["S"]])
             for sl in d["slots"]]
    rho = None if d.get("rho") is None else np.asarray(d["rho"], dtype=float)
    return Strategy(d["scheme"], slots, rho=rho, meta=d.get("meta", {}))


def evaluation_to_json(ev: Evaluation) -> dict:
    return {
        "rate": [float(r) for r in ev.rate],
        "weighted_sum_rate": float(ev.weighted_sum_rate),
        "energy": [float(e) for e in ev.energy],
        "feasible": bool(ev.feasible),
        "min_energy_slack": float(ev.min_energy_slack),
    }
