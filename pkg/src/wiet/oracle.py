"""Independent brute-force verifiers.

Rank-one beamformer grid search for the two-user simultaneous scheme,
a dual-grid check for the minimal-harvest-slot value, and probes of the
tangent-line surrogate used by the ascent solvers.  These are deliberately
simple and slow: they exist to catch bugs in the fast paths.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import channel as chan
from . import closedform, linalg
from .errors import UnsupportedConfiguration


@dataclass
class GridSpec:
    points_per_axis: int = 64
    power_tolerance: float = 1e-9
    constraint_tolerance: float = 1e-9

    def validate(self):
        if self.points_per_axis < 8:
            raise ValueError("points_per_axis must be >= 8")


def _user_grid(cs, k, n):
    """Full-power beamformers for transmitter k on a 2-angle grid.

    The optimal beamformer lies in span{h_k1, h_k2} with full power, so a
    magnitude-split angle and a relative phase cover everything up to a
    global phase.  Returns the two received-power columns (to rx 1, rx 2).
    """
    h1 = cs.h[k, 0]
    h2 = cs.h[k, 1]
    M = np.column_stack([h1, h2])
    q = np.linalg.qr(M)[0]
    b1 = q[:, 0]
    b2 = q[:, 1] if q.shape[1] > 1 else q[:, 0]
    ts = np.linspace(0.0, np.pi / 2, n)
    phis = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    T, PH = np.meshgrid(ts, phis, indexing="ij")
    ca = np.cos(T).ravel()
    cb = (np.sin(T) * np.exp(1j * PH)).ravel()
    V = math.sqrt(cs.P[k]) * (ca[:, None] * b1[None, :] + cb[:, None] * b2[None, :])
    p_to_1 = np.abs(V @ h1.conj()) ** 2
    p_to_2 = np.abs(V @ h2.conj()) ** 2
    return V, p_to_1, p_to_2


def _next_greater(values):
    """next_greater[j] = smallest index > j with a strictly larger value."""
    n = len(values)
    out = np.full(n, n, dtype=np.int64)
    stack = []
    for j in range(n):
        while stack and values[stack[-1]] < values[j]:
            out[stack.pop()] = j
        stack.append(j)
    return out


def oracle_ideal_2user(cs, spec: GridSpec = None):
    """Exhaustive rank-one search of the two-user simultaneous scheme.

    Evaluates every pair of grid beamformers meeting both energy floors
    (within constraint_tolerance) and keeps the best weighted sum rate.
    The inner maximization over transmitter 1's grid is pruned to the
    points that are undominated in (own signal up, leakage down) within
    the floor-respecting region, which is exact for this objective.
    Returns (best_rate, (v1, v2)); best_rate = -inf if no grid pair is
    feasible.
    """
    if cs.K != 2:
        raise UnsupportedConfiguration("the beamformer grid oracle is defined for K = 2")
    spec = spec or GridSpec()
    spec.validate()
    n = spec.points_per_axis
    ctol = spec.constraint_tolerance

    V1, p11, p12 = _user_grid(cs, 0, n)
    V2, p21, p22 = _user_grid(cs, 1, n)

    order = np.argsort(p12, kind="stable")
    p11s = p11[order]
    p12s = p12[order]
    nge = _next_greater(p11s)
    suffix_max = np.maximum.accumulate(p11s[::-1])[::-1]

    w1, w2 = float(cs.w[0]), float(cs.w[1])
    s1, s2 = float(cs.sigma2[0]), float(cs.sigma2[1])
    E1, E2 = float(cs.E[0]), float(cs.E[1])
    log2 = math.log2

    best = -np.inf
    best_pair = (-1, -1)
    m = len(p11s)
    for j in range(len(p21)):
        c1 = p21[j] + s1
        own2 = p22[j]
        f1 = E1 - p21[j] - ctol   # required own-signal power of user 1
        f2 = E2 - own2 - ctol     # required leakage of user 1 toward rx 2
        k = int(np.searchsorted(p12s, f2, side="left")) if f2 > 0 else 0
        while k < m:
            if p11s[k] >= f1:
                # upper bound of anything further along the chain
                bound = w1 * log2(1.0 + suffix_max[k] / c1) \
                    + w2 * log2(1.0 + own2 / (p12s[k] + s2))
                if bound <= best:
                    break
                val = w1 * log2(1.0 + p11s[k] / c1) \
                    + w2 * log2(1.0 + own2 / (p12s[k] + s2))
                if val > best:
                    best = val
                    best_pair = (int(order[k]), j)
            k = int(nge[k])
    if not np.isfinite(best):
        return -np.inf, None
    return float(best), (V1[best_pair[0]], V2[best_pair[1]])


def oracle_ideal_2user_dense(cs, spec: GridSpec = None, chunk=256):
    """Unpruned reference evaluation of the same grid (for testing the
    pruned search); chunked to bound memory."""
    if cs.K != 2:
        raise UnsupportedConfiguration("the beamformer grid oracle is defined for K = 2")
    spec = spec or GridSpec()
    spec.validate()
    n = spec.points_per_axis
    ctol = spec.constraint_tolerance
    _, p11, p12 = _user_grid(cs, 0, n)
    _, p21, p22 = _user_grid(cs, 1, n)
    w1, w2 = float(cs.w[0]), float(cs.w[1])
    s1, s2 = float(cs.sigma2[0]), float(cs.sigma2[1])
    best = -np.inf
    for a in range(0, len(p11), chunk):
        q11 = p11[a:a + chunk][:, None]
        q12 = p12[a:a + chunk][:, None]
        r1 = w1 * np.log2(1.0 + q11 / (p21[None, :] + s1))
        r2 = w2 * np.log2(1.0 + p22[None, :] / (q12 + s2))
        ok = (q11 + p21[None, :] >= cs.E[0] - ctol) & (q12 + p22[None, :] >= cs.E[1] - ctol)
        val = np.where(ok, r1 + r2, -np.inf)
        best = max(best, float(val.max()))
    return best


def oracle_eh_dual_grid(cs, n=10_000):
    """Best harvest ratio over a uniform grid of the dual variable.

    Every dual point yields a feasible primal pair, so the grid maximum
    lower-bounds (and at the optimum matches) the bisection result.
    """
    if cs.K != 2:
        raise UnsupportedConfiguration("the dual grid oracle is defined for K = 2")
    best = -np.inf
    for mu in np.linspace(0.0, 1.0 / cs.E[0], n):
        S, _ = closedform._eh_dual_point(cs, mu)
        best = max(best, closedform._eh_beta(cs, S))
    return float(best)


def surrogate_rate(cs, S, ybar, extra_noise=None):
    """Value of the tangent-line lower model of the weighted sum rate around
    the interference levels e^{ybar}."""
    q = chan.link_powers(cs, S)
    total = 0.0
    for i in range(cs.K):
        noise = cs.sigma2[i] if extra_noise is None else extra_noise[i]
        tot = q[:, i].sum() + noise
        interf = tot - q[i, i]
        y_lin = interf * math.exp(-ybar[i]) + ybar[i] - 1.0
        total += cs.w[i] * (math.log(tot) - y_lin) / math.log(2.0)
    return float(total)


def true_rate(cs, S, extra_noise=None):
    q = chan.link_powers(cs, S)
    total = 0.0
    for i in range(cs.K):
        noise = cs.sigma2[i] if extra_noise is None else extra_noise[i]
        interf = q[:, i].sum() - q[i, i] + noise
        total += cs.w[i] * math.log2(1.0 + q[i, i] / interf)
    return float(total)


def surrogate_gap_probe(cs, point, ybar, n_samples=1000, seed=0):
    """(min gap over random covariance samples, gap at the expansion point).

    The gap true - surrogate must be nonnegative everywhere and zero where
    the model was expanded.
    """
    rng = np.random.default_rng(seed)
    gap_at_point = true_rate(cs, point) - surrogate_rate(cs, point, ybar)
    min_gap = np.inf
    for _ in range(n_samples):
        S = []
        for k in range(cs.K):
            M = chan.random_psd(rng, cs.Nt)
            tr = float(np.trace(M).real)
            S.append(M * (rng.uniform(0.05, 1.0) * cs.P[k] / tr))
        min_gap = min(min_gap, true_rate(cs, S) - surrogate_rate(cs, S, ybar))
    return float(min_gap), float(gap_at_point)
