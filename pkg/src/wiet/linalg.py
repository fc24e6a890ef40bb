"""Dense complex linear algebra for small Hermitian problems (dims <= 8).

Everything here operates on plain numpy arrays: channel vectors are 1-D
complex arrays, covariances are square complex Hermitian arrays.
"""

import numpy as np

from .errors import DegenerateParallel, DimensionMismatch, NonHermitianError

HERM_TOL = 1e-12
PARALLEL_TOL = 1e-8
PSD_TOL = 1e-9


def herm(M):
    """Hermitian part (M + M^H) / 2."""
    M = np.asarray(M, dtype=complex)
    return 0.5 * (M + M.conj().T)


def is_hermitian(M, tol=HERM_TOL):
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    scale = max(np.linalg.norm(M), 1.0)
    return np.linalg.norm(M - M.conj().T) <= tol * scale


def herm_eig(M):
    """Eigendecomposition of a Hermitian matrix.

    Returns (w, U): eigenvalues sorted descending and the matching
    orthonormal eigenvectors as columns, so M = U @ diag(w) @ U^H.

    Raises NonHermitianError if the symmetry defect exceeds tolerance.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    if not is_hermitian(M):
        raise NonHermitianError("matrix is not Hermitian within tolerance")
    w, U = np.linalg.eigh(M)
    return w[::-1].copy(), U[:, ::-1].copy()


def lambda_max(M):
    """Largest eigenvalue of a Hermitian matrix."""
    return float(np.linalg.eigvalsh(herm(M))[-1])


def lambda_min(M):
    """Smallest eigenvalue of a Hermitian matrix."""
    return float(np.linalg.eigvalsh(herm(M))[0])


def is_psd(M, tol=PSD_TOL):
    """True when min eigenvalue >= -tol * max(|max eigenvalue|, 1)."""
    w = np.linalg.eigvalsh(herm(M))
    return w[0] >= -tol * max(abs(w[-1]), 1.0)


def unit(v):
    """v / ||v||; raises on the zero vector."""
    v = np.asarray(v, dtype=complex)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise DegenerateParallel("cannot normalize the zero vector")
    return v / n


def outer(v):
    """Rank-one Hermitian matrix v v^H."""
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def proj_orth_unit(a, b):
    """Unit vector in span{a, b} orthogonal to b, built from a.

    Computes a - (b_hat^H a) b_hat normalized, i.e. the direction a
    retains after removing its component along b.  Raises
    DegenerateParallel when the sine of the angle between a and b is
    below PARALLEL_TOL.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape mismatch {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateParallel("zero vector has no direction")
    bu = b / nb
    r = a - (bu.conj() @ a) * bu
    nr = np.linalg.norm(r)
    if nr <= PARALLEL_TOL * na:
        raise DegenerateParallel("vectors are numerically parallel")
    return r / nr


def quad_form(S, h):
    """Real quadratic form h^H S h for Hermitian S."""
    S = np.asarray(S, dtype=complex)
    h = np.asarray(h, dtype=complex)
    if S.shape != (h.size, h.size):
        raise DimensionMismatch(f"matrix {S.shape} incompatible with vector of length {h.size}")
    return float(np.real(h.conj() @ S @ h))


def sin_angle(a, b):
    """Sine of the principal angle between two nonzero vectors."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    c = abs(a.conj() @ b) / (na * nb)
    return float(np.sqrt(max(0.0, 1.0 - min(c, 1.0) ** 2)))


def cos_angle(a, b):
    """|a^H b| / (||a|| ||b||) for nonzero vectors, else 0."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(abs(a.conj() @ b) / (na * nb))


def fix_phase(v):
    """Rotate v so its first nonzero coordinate is real positive.

    Rank-one covariances v v^H are invariant to this rotation; fixing the
    phase makes beamformer outputs reproducible.
    """
    v = np.asarray(v, dtype=complex)
    idx = np.flatnonzero(np.abs(v) > 0)
    if idx.size == 0:
        return v
    ph = v[idx[0]] / abs(v[idx[0]])
    return v / ph
