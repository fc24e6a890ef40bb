"""Semi-analytical solvers for the two-user schemes.

Three building blocks:

  * rank-one quadratic maximizers under a leakage cap or an energy floor
    (both reduce to mixing the constraint direction with its orthogonal
    complement inside a two-dimensional subspace);
  * the minimal-EH-slot solver for mode switching, via bisection on the
    dual variable of the first energy constraint;
  * the per-slot TDMA solver, via a fractional-to-linear change of
    variables (Charnes-Cooper style) and a concave one-dimensional search.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (AssumptionViolated, DegenerateParallel, NonPositiveEnergy,
                     SlotInfeasible, UnsupportedConfiguration)

MRT = "mrt"              # full power on the objective channel; constraint slack
MIXTURE = "mixture"      # constraint active; remainder on the orthogonal direction
INFEASIBLE_CASE = "infeasible"

BISECT_MAX_ITERS = 200


@dataclass
class QuadMaxResult:
    """Outcome of a constrained rank-one quadratic maximization."""

    feasible: bool
    v: np.ndarray        # beamformer, None when infeasible
    value: float         # |ha^H v|^2 at the optimum, -inf when infeasible
    case: str


def _mixture_beamformer(ha, hb, p, c):
    """Beamformer with |hb^H v|^2 = c exactly and ||v||^2 = p, maximizing |ha^H v|.

    Splits power between the unit direction of hb (phase-aligned with ha)
    and the component of ha orthogonal to hb.
    """
    nb = np.linalg.norm(hb)
    u_perp = linalg.proj_orth_unit(ha, hb)   # raises DegenerateParallel
    bu = hb / nb
    inner = ha.conj() @ bu
    phase = inner / abs(inner) if abs(inner) > 0 else 1.0
    amp_b = math.sqrt(max(c, 0.0)) / nb
    amp_perp = math.sqrt(max(p - max(c, 0.0) / nb**2, 0.0))
    return amp_b * phase.conjugate() * bu + amp_perp * u_perp


def max_quad_leakage_cap(ha, hb, p, c):
    """Maximize |ha^H v|^2 subject to |hb^H v|^2 <= c and ||v||^2 <= p.

    Full power along ha when the cap is slack there; otherwise the cap is
    met with equality by a two-direction mixture.  Raises DegenerateParallel
    if the mixture is required but ha is parallel to hb.
    """
    ha = np.asarray(ha, dtype=complex)
    hb = np.asarray(hb, dtype=complex)
    if p <= 0 or c < 0:
        raise ValueError("need p > 0 and c >= 0")
    na = np.linalg.norm(ha)
    if na == 0.0:
        return QuadMaxResult(True, np.zeros_like(ha), 0.0, MRT)
    ha_unit = ha / na
    if p * abs(hb.conj() @ ha_unit) ** 2 <= c:
        v = math.sqrt(p) * ha_unit
        return QuadMaxResult(True, linalg.fix_phase(v), p * na**2, MRT)
    v = _mixture_beamformer(ha, hb, p, c)
    value = abs(ha.conj() @ v) ** 2
    return QuadMaxResult(True, linalg.fix_phase(v), float(value), MIXTURE)


def max_quad_energy_floor(ha, hb, p, c):
    """Maximize |ha^H v|^2 subject to |hb^H v|^2 >= c and ||v||^2 <= p.

    Infeasible when the floor exceeds p * ||hb||^2 (returned as a typed
    result, not an exception); full power along ha when that already meets
    the floor; otherwise the floor binds and the rest of the power rides
    the orthogonal complement of hb.
    """
    ha = np.asarray(ha, dtype=complex)
    hb = np.asarray(hb, dtype=complex)
    if p <= 0:
        raise ValueError("need p > 0")
    nb2 = float(np.linalg.norm(hb) ** 2)
    na = np.linalg.norm(ha)
    if c > p * nb2 * (1.0 + 1e-12):
        return QuadMaxResult(False, None, -np.inf, INFEASIBLE_CASE)
    if na == 0.0:
        # any floor-meeting vector works; value is zero regardless
        if c <= 0:
            return QuadMaxResult(True, np.zeros_like(ha), 0.0, MRT)
        v = math.sqrt(min(c / nb2, p)) * hb / math.sqrt(nb2)
        return QuadMaxResult(True, linalg.fix_phase(v), 0.0, MIXTURE)
    ha_unit = ha / na
    if c <= p * abs(ha_unit.conj() @ hb) ** 2:
        v = math.sqrt(p) * ha_unit
        return QuadMaxResult(True, linalg.fix_phase(v), p * na**2, MRT)
    if linalg.sin_angle(ha, hb) <= linalg.PARALLEL_TOL:
        # parallel pair: the MRT test above already covers every feasible c
        return QuadMaxResult(False, None, -np.inf, INFEASIBLE_CASE)
    c_eff = min(c, p * nb2)
    v = _mixture_beamformer(ha, hb, p, c_eff)
    value = abs(ha.conj() @ v) ** 2
    return QuadMaxResult(True, linalg.fix_phase(v), float(value), MIXTURE)


# --- minimal EH slot for mode switching (two users) ------------------------

@dataclass
class EhSlotResult:
    beta: float              # max of min_i (energy_i / E_i); 1/beta is the slot length
    S: list                  # two rank-one covariances
    mu: float                # dual variable of the first energy constraint
    used_fallback: bool = False


def _eh_dual_point(cs, mu):
    """Primal recovery at dual point mu: principal eigenvectors of the
    weighted energy matrices, full transmit power."""
    E1, E2 = cs.E
    eta = (1.0 - mu * E1) / E2
    S = []
    gaps = []
    for i in range(2):
        Psi = mu * linalg.outer(cs.h[i, 0]) + eta * linalg.outer(cs.h[i, 1])
        w, U = linalg.herm_eig(Psi)
        v = U[:, 0]
        S.append(cs.P[i] * linalg.outer(v))
        gaps.append((w[0] - w[1]) if len(w) > 1 else np.inf)
    return S, gaps


def _eh_beta(cs, S):
    e1 = linalg.quad_form(S[0], cs.h[0, 0]) + linalg.quad_form(S[1], cs.h[1, 0])
    e2 = linalg.quad_form(S[0], cs.h[0, 1]) + linalg.quad_form(S[1], cs.h[1, 1])
    return min(e1 / cs.E[0], e2 / cs.E[1])


def _eh_dual_gradient(cs, S):
    E1, E2 = cs.E
    r = E1 / E2
    return (linalg.quad_form(S[0], cs.h[0, 0])
            - r * linalg.quad_form(S[1], cs.h[1, 1])
            - r * linalg.quad_form(S[0], cs.h[0, 1])
            + linalg.quad_form(S[1], cs.h[1, 0]))


def tdms_eh_minimize(cs, interval_tol=1e-10, grad_tol=1e-8):
    """Best achievable min_i(energy_i / E_i) over rank-one full-power pairs.

    The dual problem is one-dimensional in the multiplier mu of the first
    energy constraint; its gradient is monotone, so a bisection over
    [0, 1/E_1] locates the optimum.  Requires each transmitter's two
    channels to be linearly independent and non-orthogonal; raises
    AssumptionViolated otherwise (callers fall back to the generic solver).
    """
    if cs.K != 2:
        raise UnsupportedConfiguration("tdms_eh_minimize is defined for K = 2")
    if cs.E[0] <= 0 or cs.E[1] <= 0:
        raise NonPositiveEnergy("both energy requirements must be positive")
    for i in range(2):
        if linalg.sin_angle(cs.h[i, 0], cs.h[i, 1]) <= linalg.PARALLEL_TOL:
            raise AssumptionViolated(f"transmitter {i} channels are parallel")
        if linalg.cos_angle(cs.h[i, 0], cs.h[i, 1]) <= linalg.PARALLEL_TOL:
            raise AssumptionViolated(f"transmitter {i} channels are orthogonal")

    lo, hi = 0.0, 1.0 / cs.E[0]
    S_lo, _ = _eh_dual_point(cs, lo)
    if _eh_dual_gradient(cs, S_lo) >= 0.0:
        mu = lo
    else:
        S_hi, _ = _eh_dual_point(cs, hi)
        if _eh_dual_gradient(cs, S_hi) <= 0.0:
            mu = hi
        else:
            mu = 0.5 * (lo + hi)
            for _ in range(BISECT_MAX_ITERS):
                mu = 0.5 * (lo + hi)
                S_mid, _ = _eh_dual_point(cs, mu)
                g = _eh_dual_gradient(cs, S_mid)
                if abs(g) <= grad_tol or (hi - lo) <= interval_tol:
                    break
                if g > 0:
                    hi = mu
                else:
                    lo = mu
    S, gaps = _eh_dual_point(cs, mu)
    lam_scale = max(linalg.lambda_max(mu * linalg.outer(cs.h[0, 0])
                                      + ((1 - mu * cs.E[0]) / cs.E[1]) * linalg.outer(cs.h[0, 1])), 1e-30)
    for i, gap in enumerate(gaps):
        Psi_lmax = max(abs(gap), lam_scale)
        if gap <= 1e-9 * Psi_lmax:
            raise AssumptionViolated(f"top eigenvalue of weighted energy matrix {i} is not isolated")
    return EhSlotResult(beta=float(_eh_beta(cs, S)), S=S, mu=float(mu))


# --- per-slot TDMA solver ---------------------------------------------------

def _golden_max(f, lo, hi, tol, max_iters=BISECT_MAX_ITERS):
    """Golden-section maximization of a unimodal function on [lo, hi]."""
    if hi <= lo:
        return lo, f(lo)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iters):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    xs = [(a, f(a)), (c, fc), (d, fd), (b, f(b))]
    return max(xs, key=lambda p: p[1])


@dataclass
class SlotResult:
    rate: float              # time-weighted rate of the decoding user
    S: list                  # two covariances (decoder's transmitter first by user index)
    y: float                 # optimal normalization variable of the transformed program
    sinr: float


def _slot_solve_canonical(cs, alpha):
    """Slot with receiver 1 decoding and receiver 2 harvesting.

    Transformed variables: y = 1 / (interference + noise at rx 1) and
    X_i = y S_i, which turns the fractional SINR objective into the linear
    form |h11^H v1|^2 under a unit normalization of rx-1 interference
    plus noise.  For each y the two covariances have closed forms (leakage
    cap for tx 2, energy floor for tx 1) and the resulting objective is
    concave in y.
    """
    h11, h12 = cs.h[0, 0], cs.h[0, 1]
    h21, h22 = cs.h[1, 0], cs.h[1, 1]
    P1, P2 = cs.P
    s1 = cs.sigma2[0]
    E2 = cs.E[1]
    need = 0.0 if alpha <= 0 and E2 <= 0 else (np.inf if alpha <= 0 else E2 / alpha)
    if not np.isfinite(need):
        raise SlotInfeasible("zero slot length with a positive energy requirement")

    cap2 = P2 * linalg.cos_angle(h21, h22) ** 2 * np.linalg.norm(h21) ** 2
    y_lo = 1.0 / (cap2 + s1)
    y_hi = 1.0 / s1

    def x2_of(y):
        return max_quad_leakage_cap(h22, h21, y * P2, max(1.0 - y * s1, 0.0))

    def floor_of(y, g):
        return y * need - g

    def x1_of(y, g):
        f = floor_of(y, g)
        if f <= 0:
            v = math.sqrt(y * P1) * linalg.fix_phase(h11 / np.linalg.norm(h11))
            return QuadMaxResult(True, v, y * P1 * np.linalg.norm(h11) ** 2, MRT)
        return max_quad_energy_floor(h11, h12, y * P1, f)

    def objective(y):
        r2 = x2_of(y)
        g = abs(h22.conj() @ r2.v) ** 2
        r1 = x1_of(y, g)
        if not r1.feasible:
            return -np.inf
        return r1.value

    def feasible_at(y):
        r2 = x2_of(y)
        g = abs(h22.conj() @ r2.v) ** 2
        return floor_of(y, g) <= y * P1 * np.linalg.norm(h12) ** 2 * (1.0 + 1e-12)

    if not feasible_at(y_lo):
        raise SlotInfeasible("energy floor exceeds what the slot can deliver")

    # the floor never binds anywhere iff it does not bind at the top of the
    # range, where the harvest assist from tx 2 is weakest relative to y
    r2_hi = x2_of(y_hi)
    g_hi = abs(h22.conj() @ r2_hi.v) ** 2
    if floor_of(y_hi, g_hi) <= y_hi * P1 * linalg.cos_angle(h11, h12) ** 2 * np.linalg.norm(h12) ** 2:
        y_star = y_hi
    else:
        if feasible_at(y_hi):
            y_max = y_hi
        else:
            lo_f, hi_f = y_lo, y_hi
            for _ in range(BISECT_MAX_ITERS):
                mid = 0.5 * (lo_f + hi_f)
                if feasible_at(mid):
                    lo_f = mid
                else:
                    hi_f = mid
                if hi_f - lo_f <= 1e-12 * (y_hi - y_lo):
                    break
            y_max = lo_f
        y_star, _ = _golden_max(objective, y_lo, y_max, 1e-10 * (y_hi - y_lo))

    r2 = x2_of(y_star)
    g = abs(h22.conj() @ r2.v) ** 2
    r1 = x1_of(y_star, g)
    if not r1.feasible:
        raise SlotInfeasible("energy floor exceeds what the slot can deliver")
    X1 = linalg.outer(r1.v)
    X2 = linalg.outer(r2.v)
    S1 = X1 / y_star
    S2 = X2 / y_star
    sinr = linalg.quad_form(S1, h11) / (linalg.quad_form(S2, h21) + s1)
    return SlotResult(rate=float(alpha * np.log2(1.0 + sinr)), S=[S1, S2],
                      y=float(y_star), sinr=float(sinr))


def tdma_slot_solve(cs, alpha, slot):
    """Solve one TDMA slot; slot=1 has receiver 1 decoding, slot=2 receiver 2.

    alpha is the length of the slot in question.  Returns a SlotResult with
    the covariances indexed by user (transmitter 1 first, regardless of
    which slot this is).
    """
    if cs.K != 2:
        raise UnsupportedConfiguration("tdma_slot_solve is defined for K = 2")
    if slot == 1:
        return _slot_solve_canonical(cs, alpha)
    if slot == 2:
        from .channel import swap_users
        res = _slot_solve_canonical(swap_users(cs), alpha)
        return SlotResult(rate=res.rate, S=[res.S[1], res.S[0]], y=res.y, sinr=res.sinr)
    raise ValueError("slot must be 1 or 2")


def second_difference_concave(values, tol_scale=1e-6):
    """True when a sampled sequence has no second difference above
    +tol_scale * max|values| (i.e. looks concave)."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return True
    scale = max(1.0, float(np.max(np.abs(v[np.isfinite(v)]))) if np.any(np.isfinite(v)) else 1.0)
    d2 = v[2:] - 2.0 * v[1:-1] + v[:-2]
    return bool(np.all(d2 <= tol_scale * scale))


def concavity_probe(cs, alpha, grid_size=64):
    """Sample the slot-1 transformed objective over its feasible range and
    check concavity via second differences."""
    h11, h12 = cs.h[0, 0], cs.h[0, 1]
    h21, h22 = cs.h[1, 0], cs.h[1, 1]
    P1, P2 = cs.P
    s1 = cs.sigma2[0]
    need = cs.E[1] / alpha if alpha > 0 else (0.0 if cs.E[1] <= 0 else np.inf)
    cap2 = P2 * linalg.cos_angle(h21, h22) ** 2 * np.linalg.norm(h21) ** 2
    y_lo = 1.0 / (cap2 + s1)
    y_hi = 1.0 / s1
    vals = []
    for y in np.linspace(y_lo, y_hi, grid_size):
        r2 = max_quad_leakage_cap(h22, h21, y * P2, max(1.0 - y * s1, 0.0))
        g = abs(h22.conj() @ r2.v) ** 2
        f = y * need - g
        if f <= 0:
            vals.append(y * P1 * np.linalg.norm(h11) ** 2)
            continue
        r1 = max_quad_energy_floor(h11, h12, y * P1, f)
        if not r1.feasible:
            break
        vals.append(r1.value)
    return second_difference_concave(vals)
