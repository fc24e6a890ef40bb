"""Problem instances: random channel generation, rate/energy evaluation,
and the closed-form feasibility predicates of the two-user case.

Index convention: h[k, i] is the channel vector from transmitter k to
receiver i.  Receiver i decodes transmitter i and harvests energy from
everybody.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (ConfigError, DegenerateParallel, DimensionMismatch,
                     EmptyInterval, UnsupportedConfiguration)
from . import linalg


def crandn(rng, *shape):
    """Standard circular complex Gaussian samples (unit variance per entry)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_hermitian(rng, n, scale=1.0):
    return linalg.herm(scale * crandn(rng, n, n))


def random_psd(rng, n, scale=1.0):
    A = crandn(rng, n, n)
    return scale * (A @ A.conj().T)


@dataclass(frozen=True)
class GenConfig:
    """Random-instance generator settings.

    Per-link covariances Q[k][i] are drawn as rescaled Wishart matrices
    unless given explicitly; direct links are normalized to unit top
    eigenvalue and cross links to eta.
    """

    K: int
    Nt: int
    eta: float = 1.0
    snr_db: float = 10.0
    seed: int = 0
    power: float = 1.0
    rf_noise_fraction: float = 0.5  # share of sigma2 assigned to the RF stage for power splitting
    Q: object = None  # optional explicit (K, K) nested list / array of Nt x Nt covariances

    def validate(self):
        if self.K < 2:
            raise ConfigError("K must be >= 2")
        if self.Nt < 1:
            raise ConfigError("Nt must be >= 1")
        if not (self.eta > 0):
            raise ConfigError("eta must be > 0")
        if not (self.power > 0):
            raise ConfigError("power must be > 0")
        if not (0.0 <= self.rf_noise_fraction <= 1.0):
            raise ConfigError("rf_noise_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class ChannelSet:
    """One problem instance: channels, noise powers, budgets, requirements."""

    K: int
    Nt: int
    h: np.ndarray            # (K, K, Nt) complex; h[k, i] = tx k -> rx i
    sigma2: np.ndarray       # (K,) receiver noise power
    tilde_sigma2: np.ndarray  # (K,) RF-stage noise power (power splitting)
    hat_sigma2: np.ndarray   # (K,) processing noise power (power splitting)
    P: np.ndarray            # (K,) transmit power budgets
    E: np.ndarray            # (K,) energy-harvesting requirements
    w: np.ndarray            # (K,) rate weights

    def validate(self):
        if self.K < 2:
            raise ConfigError("K must be >= 2")
        if self.h.shape != (self.K, self.K, self.Nt):
            raise DimensionMismatch(f"h has shape {self.h.shape}, expected {(self.K, self.K, self.Nt)}")
        for name in ("sigma2", "tilde_sigma2", "hat_sigma2", "P", "E", "w"):
            arr = getattr(self, name)
            if arr.shape != (self.K,):
                raise DimensionMismatch(f"{name} has shape {arr.shape}, expected ({self.K},)")
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"{name} contains non-finite entries")
        if not np.all(np.isfinite(self.h)):
            raise ConfigError("h contains non-finite entries")
        if not np.any(self.sigma2 > 0):
            raise ConfigError("at least one sigma2 entry must be positive")
        if np.any(self.P <= 0):
            raise ConfigError("P entries must be positive")
        if np.any(self.E < 0):
            raise ConfigError("E entries must be nonnegative")
        if np.any(self.w <= 0):
            raise ConfigError("w entries must be positive")

    def with_requirements(self, E=None, w=None):
        """Copy with replaced energy requirements and/or rate weights."""
        kw = {}
        if E is not None:
            E = np.asarray(E, dtype=float)
            if E.ndim == 0:
                E = np.full(self.K, float(E))
            kw["E"] = E
        if w is not None:
            w = np.asarray(w, dtype=float)
            if w.ndim == 0:
                w = np.full(self.K, float(w))
            kw["w"] = w
        return replace(self, **kw)

    def feasibility_tol(self):
        """Absolute tolerance on energy slack used for feasibility calls."""
        emax = float(np.max(self.E)) if self.E.size else 0.0
        return 1e-6 * emax if emax > 0 else 1e-9


@dataclass
class Evaluation:
    """Per-user rates and harvested energies of one strategy on one instance."""

    rate: np.ndarray
    weighted_sum_rate: float
    energy: np.ndarray
    feasible: bool
    min_energy_slack: float


def _draw_link_covariance(rng, n, target_lmax):
    Q = random_psd(rng, n)
    lam = linalg.lambda_max(Q)
    return Q * (target_lmax / lam)


def _validated_link_covariance(Q, n, target_lmax):
    Q = np.asarray(Q, dtype=complex)
    if Q.shape != (n, n):
        raise ConfigError(f"explicit Q entry has shape {Q.shape}, expected ({n}, {n})")
    if not linalg.is_hermitian(Q):
        raise ConfigError("explicit Q entry is not Hermitian")
    if not linalg.is_psd(Q):
        raise ConfigError("explicit Q entry is not PSD")
    lam = linalg.lambda_max(Q)
    if abs(lam - target_lmax) > 1e-10 * max(1.0, target_lmax):
        raise ConfigError(f"explicit Q entry has max eigenvalue {lam}, expected {target_lmax}")
    return Q


def generate_instance(cfg: GenConfig) -> ChannelSet:
    """Draw one random instance; bit-deterministic for a fixed config/seed.

    Each channel h[k, i] ~ CN(0, Q[k, i]) with lambda_max(Q[i, i]) = 1 and
    lambda_max(Q[k, i]) = eta for k != i.  P[k] = power, sigma2 = power /
    10^(snr_db / 10).  Energy requirements default to zero (set them per
    experiment with with_requirements).
    """
    cfg.validate()
    rng = np.random.default_rng(int(cfg.seed) % 2**64)
    K, n = cfg.K, cfg.Nt
    h = np.zeros((K, K, n), dtype=complex)
    for k in range(K):
        for i in range(K):
            target = 1.0 if k == i else cfg.eta
            if cfg.Q is not None:
                Q = _validated_link_covariance(cfg.Q[k][i], n, target)
            else:
                Q = _draw_link_covariance(rng, n, target)
            try:
                L = np.linalg.cholesky(Q)
            except np.linalg.LinAlgError:
                L = np.linalg.cholesky(Q + 1e-14 * target * np.eye(n))
            h[k, i] = L @ crandn(rng, n)
    sigma2 = np.full(K, cfg.power / 10.0 ** (cfg.snr_db / 10.0))
    f = cfg.rf_noise_fraction
    return ChannelSet(
        K=K,
        Nt=n,
        h=h,
        sigma2=sigma2,
        tilde_sigma2=f * sigma2,
        hat_sigma2=(1.0 - f) * sigma2,
        P=np.full(K, float(cfg.power)),
        E=np.zeros(K),
        w=np.ones(K),
    )


def link_powers(cs: ChannelSet, S):
    """Matrix q with q[k, i] = h_ki^H S_k h_ki for covariances S = [S_1..S_K]."""
    if len(S) != cs.K:
        raise DimensionMismatch(f"expected {cs.K} covariances, got {len(S)}")
    q = np.zeros((cs.K, cs.K))
    for k in range(cs.K):
        Sk = np.asarray(S[k], dtype=complex)
        for i in range(cs.K):
            q[k, i] = linalg.quad_form(Sk, cs.h[k, i])
    return q


def rates(cs: ChannelSet, S):
    """Per-user information rates log2(1 + SINR_i) for one covariance set."""
    q = link_powers(cs, S)
    out = np.zeros(cs.K)
    for i in range(cs.K):
        interf = q[:, i].sum() - q[i, i]
        out[i] = np.log2(1.0 + max(0.0, q[i, i]) / (max(0.0, interf) + cs.sigma2[i]))
    return out


def energies(cs: ChannelSet, S):
    """Per-receiver harvested energies sum_k h_ki^H S_k h_ki."""
    return link_powers(cs, S).sum(axis=0)


def weighted_sum_rate(cs: ChannelSet, S):
    return float(cs.w @ rates(cs, S))


def zero_leakage_thresholds(cs: ChannelSet):
    """Guaranteed harvest levels (T_1, T_2) below which energy floors are free.

    T_i is the energy receiver i collects when its own transmitter uses
    full power in the direction of its direct channel projected orthogonal
    to the cross link, i.e. the best energy obtainable with zero leakage
    to the other receiver.  Energy requirements at or below these levels
    never cost any rate.  Two-user only; returns 0 for a parallel pair.
    """
    if cs.K != 2:
        raise UnsupportedConfiguration("zero_leakage_thresholds is defined for K = 2")
    out = []
    for i, j in ((0, 1), (1, 0)):
        h_own = cs.h[i, i]
        h_cross = cs.h[i, j]
        try:
            u = linalg.proj_orth_unit(h_own, h_cross)
            out.append(cs.P[i] * abs(h_own.conj() @ u) ** 2)
        except DegenerateParallel:
            out.append(0.0)
    return float(out[0]), float(out[1])


def _receivable(cs: ChannelSet, i):
    """Max total instantaneous energy receiver i can be served: sum_k P_k ||h_ki||^2."""
    return float(sum(cs.P[k] * np.linalg.norm(cs.h[k, i]) ** 2 for k in range(cs.K)))


def tdma_feasible(cs: ChannelSet) -> bool:
    """Two-user TDMA feasibility: the fractions of slot time each receiver
    needs at maximum service must fit in the unit interval."""
    if cs.K != 2:
        raise UnsupportedConfiguration("tdma_feasible is defined for K = 2")
    total = 0.0
    for i in range(2):
        cap = _receivable(cs, i)
        if cs.E[i] > 0 and cap <= 0:
            return False
        if cap > 0:
            total += cs.E[i] / cap
    return total <= 1.0 + 1e-12


def feasible_alpha_interval(cs: ChannelSet):
    """Interval of slot-1 time fractions alpha feasible for two-user TDMA.

    lo = E_2 / (max energy deliverable to rx 2), hi = 1 - E_1 / (max
    energy deliverable to rx 1).  Raises EmptyInterval when infeasible.
    """
    if cs.K != 2:
        raise UnsupportedConfiguration("feasible_alpha_interval is defined for K = 2")
    cap2 = _receivable(cs, 1)
    cap1 = _receivable(cs, 0)
    lo = 0.0 if cs.E[1] == 0 else (np.inf if cap2 <= 0 else cs.E[1] / cap2)
    hi = 1.0 if cs.E[0] == 0 else (-np.inf if cap1 <= 0 else 1.0 - cs.E[0] / cap1)
    if lo > hi + 1e-12:
        raise EmptyInterval(f"no feasible time fraction: lo={lo}, hi={hi}")
    lo = min(lo, hi)
    return float(lo), float(hi)


def swap_users(cs: ChannelSet) -> ChannelSet:
    """Two-user instance with the roles of user 1 and user 2 exchanged."""
    if cs.K != 2:
        raise UnsupportedConfiguration("swap_users is defined for K = 2")
    perm = [1, 0]
    return ChannelSet(
        K=2,
        Nt=cs.Nt,
        h=cs.h[np.ix_(perm, perm)].copy(),
        sigma2=cs.sigma2[perm].copy(),
        tilde_sigma2=cs.tilde_sigma2[perm].copy(),
        hat_sigma2=cs.hat_sigma2[perm].copy(),
        P=cs.P[perm].copy(),
        E=cs.E[perm].copy(),
        w=cs.w[perm].copy(),
    )


# --- JSON serialization (complex scalars as [re, im] pairs) ---

def _cvec_to_json(v):
    return [[float(z.real), float(z.imag)] for z in v]


def _cvec_from_json(lst):
    return np.array([complex(re, im) for re, im in lst], dtype=complex)


def channel_to_json(cs: ChannelSet) -> dict:
    return {
        "K": cs.K,
        "Nt": cs.Nt,
        "h": [[_cvec_to_json(cs.h[k, i]) for i in range(cs.K)] for k in range(cs.K)],
        "sigma2": [float(x) for x in cs.sigma2],
        "tilde_sigma2": [float(x) for x in cs.tilde_sigma2],
        "hat_sigma2": [float(x) for x in cs.hat_sigma2],
        "P": [float(x) for x in cs.P],
        "E": [float(x) for x in cs.E],
        "w": [float(x) for x in cs.w],
    }


def channel_from_json(d: dict) -> ChannelSet:
    try:
        K = int(d["K"])
        Nt = int(d["Nt"])
        h = np.zeros((K, K, Nt), dtype=complex)
        for k in range(K):
            for i in range(K):
                h[k, i] = _cvec_from_json(d["h"][k][i])
        cs = ChannelSet(
            K=K,
            Nt=Nt,
            h=h,
            sigma2=np.asarray(d["sigma2"], dtype=float),
            tilde_sigma2=np.asarray(d["tilde_sigma2"], dtype=float),
            hat_sigma2=np.asarray(d["hat_sigma2"], dtype=float),
            P=np.asarray(d["P"], dtype=float),
            E=np.asarray(d["E"], dtype=float),
            w=np.asarray(d["w"], dtype=float),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"malformed channel JSON: {exc}") from exc
    cs.validate()
    return cs
