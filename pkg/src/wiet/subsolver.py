"""Embedded convex solver for the small dense programs used by the schemes.

Supports Hermitian PSD matrix blocks, scalar variables with optional lower
bounds, affine equality/inequality constraints, and three special convex
constraint forms:

  * exponential epigraph:  k * e^{u} <= affine        (scalar variable u)
  * hyperbolic floor:      (affine_a) * (affine_b) >= c,  both factors > 0
  * perspective floor:     a * ln(b / a) >= affine_s, with a, b affine > 0

Solved by a log-barrier interior-point method with an auxiliary-slack
phase I.  Problems here have at most a handful of matrix blocks of
dimension <= 8 and a few dozen constraints, so everything is dense.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, SubsolverFailure

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration_limit"
NUMERICAL_FAILURE = "numerical_failure"


# --- Hermitian block <-> real coordinate mapping -------------------------
#
# A d x d Hermitian block occupies d^2 real coordinates: the d diagonal
# entries, then (Re, Im) of each strict upper-triangle entry in row-major
# order.

def _pairs(d):
    return [(j, k) for j in range(d) for k in range(j + 1, d)]


def herm_to_coords(C):
    """Coefficient/gradient mapping: tr(C S) = herm_to_coords(C) . coords(S)."""
    C = np.asarray(C, dtype=complex)
    d = C.shape[0]
    out = np.empty(d * d)
    out[:d] = C.diagonal().real
    m = d
    for j, k in _pairs(d):
        out[m] = 2.0 * C[j, k].real
        out[m + 1] = 2.0 * C[j, k].imag
        m += 2
    return out


def coords_to_herm(theta, d):
    S = np.zeros((d, d), dtype=complex)
    idx = np.arange(d)
    S[idx, idx] = theta[:d]
    m = d
    for j, k in _pairs(d):
        S[j, k] = theta[m] + 1j * theta[m + 1]
        S[k, j] = theta[m] - 1j * theta[m + 1]
        m += 2
    return S


def herm_coords(S):
    """Real coordinates of a Hermitian matrix (inverse of coords_to_herm)."""
    S = np.asarray(S, dtype=complex)
    d = S.shape[0]
    out = np.empty(d * d)
    out[:d] = S.diagonal().real
    m = d
    for j, k in _pairs(d):
        out[m] = S[j, k].real
        out[m + 1] = S[j, k].imag
        m += 2
    return out


_BASIS_CACHE = {}


def _herm_basis(d):
    """Basis matrices matching the real coordinate layout."""
    if d not in _BASIS_CACHE:
        mats = []
        for j in range(d):
            B = np.zeros((d, d), dtype=complex)
            B[j, j] = 1.0
            mats.append(B)
        for j, k in _pairs(d):
            B = np.zeros((d, d), dtype=complex)
            B[j, k] = 1.0
            B[k, j] = 1.0
            mats.append(B)
            B = np.zeros((d, d), dtype=complex)
            B[j, k] = 1j
            B[k, j] = -1j
            mats.append(B)
        stack = np.stack(mats)
        _BASIS_CACHE[d] = (stack, stack.reshape(d * d, d * d))
    return _BASIS_CACHE[d]


def _logdet_hess(Sinv, d):
    """Hessian of -log det in the real coordinates: H[a,b] = tr(Sinv B_a Sinv B_b)."""
    B, Bflat = _herm_basis(d)
    M = Sinv @ B @ Sinv                       # (d^2, d, d) batched
    Mt = np.ascontiguousarray(M.transpose(0, 2, 1)).reshape(d * d, d * d)
    return (Bflat @ Mt.T).real


# --- expressions ----------------------------------------------------------

class LinExpr:
    """Affine expression: sum of tr(C_b S_b) terms, scalar terms, constant."""

    __slots__ = ("blocks", "scalars", "const")

    def __init__(self, blocks=None, scalars=None, const=0.0):
        self.blocks = dict(blocks) if blocks else {}
        self.scalars = dict(scalars) if scalars else {}
        self.const = float(const)

    def copy(self):
        return LinExpr({k: v.copy() for k, v in self.blocks.items()},
                       dict(self.scalars), self.const)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            out = self.copy()
            out.const += float(other)
            return out
        out = self.copy()
        for name, C in other.blocks.items():
            out.blocks[name] = out.blocks.get(name, 0) + C
        for name, c in other.scalars.items():
            out.scalars[name] = out.scalars.get(name, 0.0) + c
        out.const += other.const
        return out

    __radd__ = __add__

    def __mul__(self, t):
        t = float(t)
        return LinExpr({k: t * v for k, v in self.blocks.items()},
                       {k: t * v for k, v in self.scalars.items()},
                       t * self.const)

    __rmul__ = __mul__

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self + (-float(other))
        return self + (other * -1.0)

    def __rsub__(self, other):
        return (self * -1.0) + other

    def __neg__(self):
        return self * -1.0


def const_expr(c):
    return LinExpr(const=c)


@dataclass
class SolveOptions:
    t0: float = 1.0
    mu: float = 10.0
    gap_tol: float = 1e-8
    newton_tol: float = 1e-10
    max_newton: int = 60          # per centering step
    max_outer: int = 60
    feas_margin: float = 1e-7     # phase-I slack needed to call a program feasible
    phase1_exit: float = 1e-6     # early phase-I exit once min slack exceeds this
    max_total_newton: int = 5000


@dataclass
class SolveReport:
    status: str
    objective: float
    iterations: int
    values: dict
    max_violation: float
    message: str = ""
    gap_bound: float = 0.0


@dataclass
class KktReport:
    stationarity: float
    complementarity: float
    feasibility: float


class ConvexProgram:
    """Builder for one solver instance."""

    def __init__(self):
        self._blocks = []        # (name, dim)
        self._scalars = []       # (name, lower or None)
        self._names = set()
        self._objective = LinExpr()
        self._affine = []        # LinExpr e meaning e <= 0
        self._equalities = []    # LinExpr e meaning e == 0
        self._exps = []          # (coef, var name, rhs LinExpr): coef * e^var <= rhs
        self._prods = []         # (LinExpr a, LinExpr b, floor): a * b >= floor
        self._persps = []        # (LinExpr a, LinExpr b, LinExpr s): a ln(b/a) >= s
        self._initial = {}

    # -- variables --
    def add_block(self, name, dim):
        if name in self._names:
            raise ValueError(f"duplicate variable name {name!r}")
        if not (1 <= dim <= 16):
            raise ValueError("block dimension out of supported range")
        self._names.add(name)
        self._blocks.append((name, int(dim)))
        return name

    def add_scalar(self, name, lower=None):
        if name in self._names:
            raise ValueError(f"duplicate variable name {name!r}")
        self._names.add(name)
        self._scalars.append((name, None if lower is None else float(lower)))
        return name

    # -- expression helpers --
    def quad(self, block, h):
        """h^H S_block h as a LinExpr."""
        h = np.asarray(h, dtype=complex)
        return LinExpr(blocks={block: np.outer(h, h.conj())})

    def trace(self, block):
        dim = dict(self._blocks)[block]
        return LinExpr(blocks={block: np.eye(dim, dtype=complex)})

    def block_term(self, block, C):
        """tr(C S_block) for a Hermitian coefficient C."""
        return LinExpr(blocks={block: np.asarray(C, dtype=complex)})

    def scalar(self, name, coef=1.0):
        return LinExpr(scalars={name: float(coef)})

    # -- objective / constraints --
    def maximize(self, expr):
        self._objective = expr.copy()

    def add_leq(self, lhs, rhs):
        lhs = lhs if isinstance(lhs, LinExpr) else const_expr(lhs)
        rhs = rhs if isinstance(rhs, LinExpr) else const_expr(rhs)
        self._affine.append(lhs - rhs)

    def add_geq(self, lhs, rhs):
        self.add_leq(rhs, lhs)

    def add_eq(self, lhs, rhs):
        lhs = lhs if isinstance(lhs, LinExpr) else const_expr(lhs)
        rhs = rhs if isinstance(rhs, LinExpr) else const_expr(rhs)
        self._equalities.append(lhs - rhs)

    def add_exp_leq(self, coef, var, rhs):
        if coef <= 0:
            raise ValueError("exponential coefficient must be positive")
        self._exps.append((float(coef), var, rhs.copy()))

    def add_product_geq(self, a, b, floor):
        if floor <= 0:
            raise ValueError("product floor must be positive (drop the constraint otherwise)")
        self._prods.append((a.copy(), b.copy(), float(floor)))

    def add_perspective_geq(self, a, b, s):
        s = s if isinstance(s, LinExpr) else const_expr(s)
        self._persps.append((a.copy(), b.copy(), s.copy()))

    def set_initial(self, name, value):
        self._initial[name] = value

    # -- canonical text dump (debug aid) --
    def dump(self):
        comp = _Compiled(self)

        def fmt(expr):
            w, c = comp.vec(expr)
            terms = [f"{w[j]:+.9g}*x{j}" for j in np.flatnonzero(np.abs(w) > 0)]
            if c or not terms:
                terms.append(f"{c:+.9g}")
            return " ".join(terms)

        lines = []
        for name, dim in self._blocks:
            lines.append(f"block {name} dim {dim}")
        for name, lower in self._scalars:
            lines.append(f"scalar {name} lower {lower}")
        lines.append(f"maximize: {fmt(self._objective)}")
        for e in self._affine:
            lines.append(f"affine: {fmt(e)} <= 0")
        for e in self._equalities:
            lines.append(f"affine: {fmt(e)} == 0")
        for coef, var, rhs in self._exps:
            lines.append(f"exp: {coef:.9g}*e^{var} <= {fmt(rhs)}")
        for a, b, c in self._prods:
            lines.append(f"prod: ({fmt(a)})*({fmt(b)}) >= {c:.9g}")
        for a, b, s in self._persps:
            lines.append(f"persp: ({fmt(a)})*ln(({fmt(b)})/({fmt(a)})) >= {fmt(s)}")
        return "\n".join(lines)


# --- compiled form --------------------------------------------------------

class _Compiled:
    def __init__(self, p: ConvexProgram):
        self.p = p
        self.block_info = []   # (name, dim, offset)
        off = 0
        for name, dim in p._blocks:
            self.block_info.append((name, dim, off))
            off += dim * dim
        self.scalar_info = []  # (name, offset, lower)
        for name, lower in p._scalars:
            self.scalar_info.append((name, off, lower))
            off += 1
        self.n = off
        self.offset = {name: o for name, _, o in self.block_info}
        self.offset.update({name: o for name, o, _ in self.scalar_info})
        self.scalar_offset = {name: o for name, o, _ in self.scalar_info}
        self.dim = {name: d for name, d, _ in self.block_info}

        self.obj_w, self.obj_c = self.vec(p._objective)

        rows = [self.vec(e) for e in p._affine]
        # lower bounds become plain affine rows so phase I can relax them too
        # (they are also cheap).  Domain-critical positivity (blocks, product
        # and perspective factors) stays un-relaxed.
        for name, o, lower in self.scalar_info:
            if lower is not None:
                w = np.zeros(self.n)
                w[o] = -1.0
                rows.append((w, lower))
        if rows:
            self.A = np.vstack([r[0] for r in rows])
            self.b = -np.array([r[1] for r in rows])   # slack = b - A x
        else:
            self.A = np.zeros((0, self.n))
            self.b = np.zeros(0)

        eq = [self.vec(e) for e in p._equalities]
        if eq:
            self.eqA = np.vstack([r[0] for r in eq])
            self.eqb = -np.array([r[1] for r in eq])
        else:
            self.eqA = np.zeros((0, self.n))
            self.eqb = np.zeros(0)

        self.exp_k = np.array([k for k, _, _ in p._exps])
        self.exp_u = np.array([self.scalar_offset[v] for _, v, _ in p._exps], dtype=int)
        if p._exps:
            vw = [self.vec(rhs) for _, _, rhs in p._exps]
            self.expW = np.vstack([v[0] for v in vw])
            self.expc = np.array([v[1] for v in vw])
        else:
            self.expW = np.zeros((0, self.n))
            self.expc = np.zeros(0)

        def vecstack(exprs):
            if not exprs:
                return np.zeros((0, self.n)), np.zeros(0)
            vw = [self.vec(e) for e in exprs]
            return np.vstack([v[0] for v in vw]), np.array([v[1] for v in vw])

        self.prWa, self.prca = vecstack([a for a, _, _ in p._prods])
        self.prWb, self.prcb = vecstack([b for _, b, _ in p._prods])
        self.prfloor = np.array([c for _, _, c in p._prods])

        self.ppWa, self.ppca = vecstack([a for a, _, _ in p._persps])
        self.ppWb, self.ppcb = vecstack([b for _, b, _ in p._persps])
        self.ppWs, self.ppcs = vecstack([s for _, _, s in p._persps])

        self.m_scalar_cons = (len(self.b) + len(self.exp_k)
                              + len(self.prfloor) + len(self.ppcs))
        # barrier parameter total: 1 per scalarized constraint, dim per block,
        # plus the positivity terms attached to product/perspective factors
        self.nu = (len(self.b) + 2 * len(self.exp_k) + 2 * len(self.prfloor)
                   + 3 * len(self.ppcs) + sum(d for _, d, _ in self.block_info))

    def vec(self, expr: LinExpr):
        w = np.zeros(self.n)
        for name, C in expr.blocks.items():
            if name not in self.dim:
                raise DimensionMismatch(f"unknown block {name!r} in expression")
            d = self.dim[name]
            C = np.asarray(C, dtype=complex)
            if C.shape != (d, d):
                raise DimensionMismatch(f"coefficient for block {name!r} has shape {C.shape}")
            o = self.offset[name]
            w[o:o + d * d] += herm_to_coords(C)
        for name, c in expr.scalars.items():
            if name not in self.scalar_offset:
                raise DimensionMismatch(f"unknown scalar {name!r} in expression")
            w[self.scalar_offset[name]] += c
        return w, expr.const

    # -- point assembly / extraction --
    def default_x0(self):
        x = np.zeros(self.n)
        for name, d, o in self.block_info:
            init = self.p._initial.get(name)
            S = np.asarray(init, dtype=complex) if init is not None else np.eye(d)
            x[o:o + d * d] = herm_coords(S)
        for name, o, lower in self.scalar_info:
            init = self.p._initial.get(name)
            if init is not None:
                x[o] = float(init)
            else:
                x[o] = 1.0 if lower is None else lower + 1.0
        return x

    def x_from_values(self, values):
        x = np.zeros(self.n)
        for name, d, o in self.block_info:
            S = np.asarray(values[name], dtype=complex)
            x[o:o + d * d] = herm_coords(S)
        for name, o, _ in self.scalar_info:
            x[o] = float(values[name])
        return x

    def values_from_x(self, x):
        out = {}
        for name, d, o in self.block_info:
            out[name] = coords_to_herm(x[o:o + d * d], d)
        for name, o, _ in self.scalar_info:
            out[name] = float(x[o])
        return out

    # -- feasibility quantities --
    def scalar_slacks(self, x):
        """All scalarized slacks (must be >= 0 at feasible points)."""
        parts = []
        if len(self.b):
            parts.append(self.b - self.A @ x)
        if len(self.exp_k):
            u = np.minimum(x[self.exp_u], 700.0)
            parts.append(self.expW @ x + self.expc - self.exp_k * np.exp(u))
        if len(self.prfloor):
            a = self.prWa @ x + self.prca
            bb = self.prWb @ x + self.prcb
            parts.append(a * bb - self.prfloor)
        if len(self.ppcs):
            a = self.ppWa @ x + self.ppca
            bb = self.ppWb @ x + self.ppcb
            s = self.ppWs @ x + self.ppcs
            with np.errstate(divide="ignore", invalid="ignore"):
                val = np.where((a > 0) & (bb > 0), a * np.log(np.maximum(bb, 1e-300) /
                                                              np.maximum(a, 1e-300)), -np.inf)
            parts.append(val - s)
        if parts:
            return np.concatenate(parts)
        return np.zeros(0)

    def domain_ok(self, x):
        """Positivity of product/perspective factors and PD blocks."""
        for name, d, o in self.block_info:
            S = coords_to_herm(x[o:o + d * d], d)
            try:
                np.linalg.cholesky(S)
            except np.linalg.LinAlgError:
                return False
        if len(self.prfloor):
            if np.any(self.prWa @ x + self.prca <= 0) or np.any(self.prWb @ x + self.prcb <= 0):
                return False
        if len(self.ppcs):
            if np.any(self.ppWa @ x + self.ppca <= 0) or np.any(self.ppWb @ x + self.ppcb <= 0):
                return False
        return True

    def block_lambda_min(self, x):
        out = 0.0
        for name, d, o in self.block_info:
            S = coords_to_herm(x[o:o + d * d], d)
            out = min(out, float(np.linalg.eigvalsh(S)[0]))
        return out

    def max_violation(self, x):
        v = 0.0
        s = self.scalar_slacks(x)
        if s.size:
            v = max(v, float(-np.min(s)))
        v = max(v, -self.block_lambda_min(x))
        if len(self.eqb):
            v = max(v, float(np.max(np.abs(self.eqA @ x - self.eqb))))
        return max(0.0, v)


# --- barrier model (shared by phase I and phase II) -----------------------

class _Model:
    """Barrier value/gradient/Hessian of one program, optionally with the
    phase-I slack variable appended as the final coordinate."""

    def __init__(self, comp: _Compiled, with_tau: bool):
        self.c = comp
        self.tau = with_tau
        self.N = comp.n + (1 if with_tau else 0)

    def split(self, z):
        return (z[:-1], z[-1]) if self.tau else (z, 0.0)

    def value(self, z):
        """Barrier value or +inf outside the domain."""
        c = self.c
        x, tau = self.split(z)
        if not c.domain_ok(x):
            return np.inf
        s = c.scalar_slacks(x) + (tau if self.tau else 0.0)
        if np.any(s <= 0) or not np.all(np.isfinite(s)):
            return np.inf
        val = -np.sum(np.log(s))
        for name, d, o in c.block_info:
            S = coords_to_herm(x[o:o + d * d], d)
            L = np.linalg.cholesky(S)
            val -= 2.0 * np.sum(np.log(np.real(np.diag(L))))
        # positivity terms of product / perspective factors
        for Wa, ca, Wb, cb in ((c.prWa, c.prca, c.prWb, c.prcb),
                               (c.ppWa, c.ppca, c.ppWb, c.ppcb)):
            if len(ca):
                val -= np.sum(np.log(Wa @ x + ca))
                val -= np.sum(np.log(Wb @ x + cb))
        return val

    def grad_hess(self, z):
        """(value, gradient, Hessian) of the barrier at an interior point."""
        c = self.c
        x, tau = self.split(z)
        n, N = c.n, self.N
        g = np.zeros(N)
        H = np.zeros((N, N))
        val = 0.0

        def ext(rows):
            if not self.tau:
                return rows
            col = np.ones((rows.shape[0], 1))
            return np.hstack([rows, col])

        # affine rows: slack = b - A x (+ tau)
        if len(c.b):
            s = c.b - c.A @ x + tau
            if np.any(s <= 0):
                return None
            G = ext(-c.A)
            ws = 1.0 / s
            val += -np.sum(np.log(s))
            g += -(G.T @ ws)
            H += (G * (ws ** 2)[:, None]).T @ G

        # exponential rows: slack = Wx + c - k e^{x_u} (+ tau)
        if len(c.exp_k):
            u = x[c.exp_u]
            keu = c.exp_k * np.exp(u)
            s = c.expW @ x + c.expc - keu + tau
            if np.any(s <= 0):
                return None
            G = ext(c.expW.copy())
            for r, uo in enumerate(c.exp_u):
                G[r, uo] -= keu[r]
            ws = 1.0 / s
            val += -np.sum(np.log(s))
            g += -(G.T @ ws)
            Hl = (G * (ws ** 2)[:, None]).T @ G
            # curvature of -k e^u inside the slack: -(1/s) * d2s, d2s = -k e^u e_u e_u^T
            for r, uo in enumerate(c.exp_u):
                Hl[uo, uo] += keu[r] * ws[r]
            H += Hl

        # product rows: slack = a*b - floor (+ tau); also -log a - log b
        if len(c.prfloor):
            a = c.prWa @ x + c.prca
            bb = c.prWb @ x + c.prcb
            if np.any(a <= 0) or np.any(bb <= 0):
                return None
            s = a * bb - c.prfloor + tau
            if np.any(s <= 0):
                return None
            for r in range(len(s)):
                wa = c.prWa[r]
                wb = c.prWb[r]
                ds = bb[r] * wa + a[r] * wb
                G = np.concatenate([ds, [1.0]]) if self.tau else ds
                val += -math.log(s[r])
                g += -G / s[r]
                H += np.outer(G, G) / s[r] ** 2
                cross = np.outer(wa, wb)
                H[:n, :n] += -(cross + cross.T) / s[r]
                # positivity of each factor
                val += -math.log(a[r]) - math.log(bb[r])
                g[:n] += -wa / a[r] - wb / bb[r]
                H[:n, :n] += np.outer(wa, wa) / a[r] ** 2 + np.outer(wb, wb) / bb[r] ** 2

        # perspective rows: slack = a ln(b/a) - s_expr (+ tau); also -log a - log b
        if len(c.ppcs):
            a = c.ppWa @ x + c.ppca
            bb = c.ppWb @ x + c.ppcb
            if np.any(a <= 0) or np.any(bb <= 0):
                return None
            se = c.ppWs @ x + c.ppcs
            for r in range(len(se)):
                ar, br = a[r], bb[r]
                wa, wb, wsv = c.ppWa[r], c.ppWb[r], c.ppWs[r]
                lg = math.log(br / ar)
                s = ar * lg - se[r] + tau
                if s <= 0:
                    return None
                ds = (lg - 1.0) * wa + (ar / br) * wb - wsv
                G = np.concatenate([ds, [1.0]]) if self.tau else ds
                val += -math.log(s)
                g += -G / s
                H += np.outer(G, G) / s ** 2
                # -(1/s) * Hess(a ln(b/a)) which is NSD, so this adds PSD curvature
                Hs = (-(1.0 / ar) * np.outer(wa, wa)
                      + (1.0 / br) * (np.outer(wa, wb) + np.outer(wb, wa))
                      - (ar / br ** 2) * np.outer(wb, wb))
                H[:n, :n] += -Hs / s
                val += -math.log(ar) - math.log(br)
                g[:n] += -wa / ar - wb / br
                H[:n, :n] += np.outer(wa, wa) / ar ** 2 + np.outer(wb, wb) / br ** 2

        # block log-det barriers
        for name, d, o in c.block_info:
            S = coords_to_herm(x[o:o + d * d], d)
            try:
                L = np.linalg.cholesky(S)
            except np.linalg.LinAlgError:
                return None
            val += -2.0 * float(np.sum(np.log(np.real(np.diag(L)))))
            Linv = np.linalg.inv(L)  # triangular with positive diagonal
            Sinv = Linv.conj().T @ Linv
            g[o:o + d * d] += -herm_to_coords(Sinv)
            H[o:o + d * d, o:o + d * d] += _logdet_hess(Sinv, d)

        return val, g, H


def _newton(model, comp, f_lin, t, z0, opts, eqN=None):
    """Damped Newton for minimize t * f_lin . z + barrier(z).

    eqN: optional orthonormal null-space basis of the equality constraints
    (steps are restricted to its span).  Returns (z, newton_iters, ok).
    """
    z = z0.copy()
    total = 0
    best_lam2 = np.inf
    stall = 0
    soft_tol = 1e-4  # decrement deemed "centered enough" when progress stalls
    for _ in range(opts.max_newton):
        out = model.grad_hess(z)
        if out is None:
            return z, total, False
        val, g, H = out
        F = t * (f_lin @ z) + val
        gt = t * f_lin + g
        if eqN is not None:
            gr = eqN.T @ gt
            Hr = eqN.T @ H @ eqN
        else:
            gr, Hr = gt, H
        reg = 0.0
        scale = max(1.0, float(np.trace(Hr)) / max(1, Hr.shape[0]))
        for _try in range(8):
            try:
                d = np.linalg.solve(Hr + reg * np.eye(Hr.shape[0]), -gr)
                lam2 = float(-gr @ d)
                if lam2 >= -1e-12:
                    break
            except np.linalg.LinAlgError:
                pass
            reg = max(reg * 10.0, 1e-12 * scale)
        else:
            return z, total, False
        lam2 = max(lam2, 0.0)
        if lam2 / 2.0 <= opts.newton_tol:
            return z, total, True
        if lam2 < 0.7 * best_lam2:
            best_lam2 = lam2
            stall = 0
        else:
            stall += 1
            if stall >= 5:
                # floating-point plateau: accept if reasonably centered
                return z, total, lam2 / 2.0 <= soft_tol
        step_dir = eqN @ d if eqN is not None else d
        # backtracking line search on t*f + barrier
        step = 1.0
        accepted = False
        gd = float(gt @ step_dir)
        for _ls in range(60):
            zn = z + step * step_dir
            Fn = t * (f_lin @ zn) + model.value(zn)
            if np.isfinite(Fn) and Fn <= F + 0.25 * step * gd:
                z = zn
                accepted = True
                break
            step *= 0.5
        total += 1
        if not accepted:
            # no usable progress along the Newton direction
            return z, total, lam2 / 2.0 <= soft_tol
    return z, total, lam2 / 2.0 <= soft_tol


class _Phase1Model(_Model):
    """Phase-I model: adds a floor on the slack variable so the auxiliary
    problem stays bounded once strict feasibility is reachable."""

    def __init__(self, comp, tau_floor):
        super().__init__(comp, with_tau=True)
        self.tau_floor = tau_floor

    def value(self, z):
        room = z[-1] - self.tau_floor
        if room <= 0:
            return np.inf
        return super().value(z) - math.log(room)

    def grad_hess(self, z):
        out = super().grad_hess(z)
        if out is None:
            return None
        val, g, H = out
        room = z[-1] - self.tau_floor
        if room <= 0:
            return None
        val -= math.log(room)
        g[-1] += -1.0 / room
        H[-1, -1] += 1.0 / room ** 2
        return val, g, H


def _phase1(comp, opts, x0):
    """Find a strictly feasible point; returns (x, iters, feasible, tau)."""
    if not comp.domain_ok(x0):
        return x0, 0, False, np.inf
    base = float(np.max(np.abs(comp.b))) if len(comp.b) else 1.0
    exit_slack = opts.phase1_exit * (1.0 + base)

    def min_slack_of(x):
        s = comp.scalar_slacks(x)
        return float(np.min(s)) if s.size else np.inf

    # already comfortably interior: nothing to do
    if min_slack_of(x0) > exit_slack and len(comp.eqb) == 0:
        return x0, 0, True, -min_slack_of(x0)

    tau_floor = -4.0 * exit_slack
    model = _Phase1Model(comp, tau_floor)
    s0 = min_slack_of(x0)
    tau = max(0.0, -s0 if np.isfinite(s0) else 0.0) + max(1.0, 0.1 * base)
    z = np.concatenate([x0, [tau]])
    f_lin = np.zeros(comp.n + 1)
    f_lin[-1] = 1.0
    if len(comp.eqb):
        eqA_ext = np.hstack([comp.eqA, np.zeros((len(comp.eqb), 1))])
        _, sv, Vt = np.linalg.svd(eqA_ext)
        rank = int(np.sum(sv > 1e-12 * max(1.0, sv[0])))
        eqN = Vt[rank:].T
        corr, *_ = np.linalg.lstsq(eqA_ext, eqA_ext @ z - comp.eqb, rcond=None)
        z = z - corr
        if not comp.domain_ok(z[:-1]):
            return x0, 0, False, np.inf
        if min_slack_of(z[:-1]) > exit_slack:
            return z[:-1], 0, True, -min_slack_of(z[:-1])
        z[-1] = max(z[-1], -min_slack_of(z[:-1]) + max(1.0, 0.1 * base))
    else:
        eqN = None

    total = 0
    # phase I ignores the caller's ladder tuning: its objective (the max
    # violation) is O(1) and the infeasibility call needs full precision
    t = 1.0
    gap_tol = min(opts.gap_tol, 1e-8)
    nu = comp.m_scalar_cons + comp.nu + 1
    for _ in range(opts.max_outer):
        z, it, ok = _newton(model, comp, f_lin, t, z, opts, eqN=eqN)
        total += it
        x = z[:-1]
        ms = min_slack_of(x)
        if ms > exit_slack:
            return x, total, True, z[-1]
        if nu / t <= gap_tol * max(1.0, abs(z[-1])):
            break
        t *= opts.mu
        if total > opts.max_total_newton:
            break
    x = z[:-1]
    return x, total, min_slack_of(x) >= opts.feas_margin, z[-1]


def solve_convex(p: ConvexProgram, opts: SolveOptions = None, init=None) -> SolveReport:
    """Solve a program built with ConvexProgram.

    init: optional dict of variable values used as a warm start; phase I is
    skipped when it is strictly feasible.
    """
    opts = opts or SolveOptions()
    comp = _Compiled(p)
    total = 0

    x = None
    if init is not None:
        try:
            cand = comp.x_from_values(init)
        except (KeyError, DimensionMismatch):
            cand = None
        if cand is not None and comp.domain_ok(cand):
            s = comp.scalar_slacks(cand)
            eq_ok = (len(comp.eqb) == 0
                     or np.max(np.abs(comp.eqA @ cand - comp.eqb)) <= 1e-12)
            if (s.size == 0 or np.min(s) > 0) and eq_ok:
                x = cand

    if x is None:
        x0 = comp.default_x0()
        if init is not None:
            try:
                cand = comp.x_from_values(init)
                if comp.domain_ok(cand):
                    x0 = cand
            except (KeyError, DimensionMismatch):
                pass
        if not comp.domain_ok(x0):
            return SolveReport(NUMERICAL_FAILURE, np.nan, 0, {}, np.inf,
                               "initial point outside the barrier domain")
        x, it1, feas, tau = _phase1(comp, opts, x0)
        total += it1
        if not feas:
            return SolveReport(INFEASIBLE, np.nan, total, comp.values_from_x(x),
                               comp.max_violation(x),
                               f"phase-I optimum slack {tau:.3e}")

    # phase II
    model = _Model(comp, with_tau=False)
    if len(comp.eqb):
        _, sv, Vt = np.linalg.svd(comp.eqA)
        rank = int(np.sum(sv > 1e-12 * max(1.0, sv[0])))
        eqN = Vt[rank:].T
    else:
        eqN = None
    f_lin = -comp.obj_w  # maximize -> minimize negative
    t = opts.t0
    status = ITERATION_LIMIT
    scale0 = 1.0 + (float(np.max(np.abs(comp.b))) if len(comp.b) else 0.0)
    for _ in range(opts.max_outer):
        x, it, ok = _newton(model, comp, f_lin, t, x, opts, eqN=eqN)
        total += it
        if not ok and not np.isfinite(model.value(x)):
            status = NUMERICAL_FAILURE
            break
        if abs(comp.obj_w @ x) > 1e14 * scale0 or not np.all(np.isfinite(x)):
            return SolveReport(NUMERICAL_FAILURE, np.nan, total, comp.values_from_x(x),
                               np.inf, "objective escaped; problem may be unbounded")
        if comp.nu / t <= opts.gap_tol:
            status = OPTIMAL
            break
        t *= opts.mu
        if total > opts.max_total_newton:
            break

    obj = float(comp.obj_w @ x + comp.obj_c)
    viol = comp.max_violation(x)
    scale = float(np.max(np.abs(comp.b))) if len(comp.b) else 1.0
    if status == OPTIMAL and viol > 1e-7 * (1.0 + scale):
        status = NUMERICAL_FAILURE
    return SolveReport(status, obj, total, comp.values_from_x(x), viol,
                       gap_bound=comp.nu / t)


# --- KKT residual check ----------------------------------------------------

def _constraint_gradients(comp, x):
    """Slack values and gradients d(slack)/dx for every scalarized constraint."""
    slacks = []
    grads = []
    if len(comp.b):
        s = comp.b - comp.A @ x
        for r in range(len(s)):
            slacks.append(s[r])
            grads.append(-comp.A[r])
    if len(comp.exp_k):
        u = x[comp.exp_u]
        keu = comp.exp_k * np.exp(u)
        s = comp.expW @ x + comp.expc - keu
        for r in range(len(s)):
            grad = comp.expW[r].copy()
            grad[comp.exp_u[r]] -= keu[r]
            slacks.append(s[r])
            grads.append(grad)
    if len(comp.prfloor):
        a = comp.prWa @ x + comp.prca
        bb = comp.prWb @ x + comp.prcb
        s = a * bb - comp.prfloor
        for r in range(len(s)):
            slacks.append(s[r])
            grads.append(bb[r] * comp.prWa[r] + a[r] * comp.prWb[r])
    if len(comp.ppcs):
        a = comp.ppWa @ x + comp.ppca
        bb = comp.ppWb @ x + comp.ppcb
        se = comp.ppWs @ x + comp.ppcs
        for r in range(len(se)):
            lg = math.log(bb[r] / a[r])
            slacks.append(a[r] * lg - se[r])
            grads.append((lg - 1.0) * comp.ppWa[r] + (a[r] / bb[r]) * comp.ppWb[r]
                         - comp.ppWs[r])
    return np.array(slacks), grads


def check_kkt(p: ConvexProgram, values, act_tol=1e-6) -> KktReport:
    """Stationarity/complementarity residuals of a candidate primal point.

    Fits nonnegative multipliers for the active scalar constraints and a
    Hermitian multiplier supported on each block's numerical null space,
    then reports the remaining gradient residual (normalized), the worst
    |multiplier * slack| product, and the primal feasibility defect.
    """
    from scipy.optimize import lsq_linear

    comp = _Compiled(p)
    x = comp.x_from_values(values)
    slacks, grads = _constraint_gradients(comp, x)
    feas = comp.max_violation(x)

    scale_b = 1.0 + (float(np.max(np.abs(comp.b))) if len(comp.b) else 0.0)
    active = [j for j in range(len(slacks)) if slacks[j] <= act_tol * scale_b]

    cols = []
    col_kind = []  # "ineq" multipliers are sign-constrained
    for j in active:
        cols.append(grads[j])
        col_kind.append("ineq")
    # block null-space multipliers: Z = U0 M U0^H
    for name, d, o in comp.block_info:
        S = coords_to_herm(x[o:o + d * d], d)
        wv, U = np.linalg.eigh(S)
        lmax = max(wv[-1], 1e-30)
        null = [i for i in range(d) if wv[i] <= act_tol * lmax]
        if not null:
            continue
        U0 = U[:, null]
        r = len(null)
        for Bsmall in _herm_basis(r)[0]:
            Z = U0 @ Bsmall @ U0.conj().T
            col = np.zeros(comp.n)
            col[o:o + d * d] = herm_to_coords(Z)
            cols.append(col)
            col_kind.append("free")
    for r in range(len(comp.eqb)):
        cols.append(comp.eqA[r])
        col_kind.append("free")

    c = comp.obj_w
    nrm = max(1.0, float(np.linalg.norm(c)))
    if not cols:
        return KktReport(float(np.linalg.norm(c)) / nrm, 0.0, feas)

    Amat = np.column_stack(cols)
    lb = np.array([0.0 if k == "ineq" else -np.inf for k in col_kind])
    ub = np.full(len(cols), np.inf)
    res = lsq_linear(Amat, -c, bounds=(lb, ub))
    stationarity = float(np.linalg.norm(Amat @ res.x + c)) / nrm
    comp_resid = 0.0
    for idx, j in enumerate(active):
        comp_resid = max(comp_resid, abs(res.x[idx] * slacks[j]))
    return KktReport(stationarity, comp_resid, feas)
