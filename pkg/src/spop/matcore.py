"""Dense real linear algebra core.

Matrices are 2-D float64 numpy arrays.  The SVD and the symmetric
eigensolver are one-sided / two-sided Jacobi iterations working on the
smaller Gram dimension; they are deterministic (fixed sweep schedule,
fixed sign convention) so every downstream spectrum is reproducible
bit-for-bit across calls.
"""

from dataclasses import dataclass
import struct

import numpy as np

from . import backend

# Jacobi sweep control: relative off-diagonal tolerance and sweep cap.
SWEEP_TOL = 1e-12
MAX_SWEEPS = 100
# Singular values below RANK_TOL * sigma_max are treated as exact zeros.
RANK_TOL = 1e-14

MAT1_MAGIC = b"SPOPMAT1"


def _safe_scale(a: np.ndarray) -> float:
    """Scale factor keeping squared entries inside the float64 range.

    Jacobi sweeps are exactly scale-equivariant, so dividing extreme inputs
    by a power-of-two-free scalar changes nothing but the magnitude.
    """
    peak = float(np.abs(a).max())
    if peak > 1e150 or (0.0 < peak < 1e-150):
        return peak
    return 1.0


class ConvergenceError(RuntimeError):
    """Jacobi iteration did not reach tolerance within the sweep cap."""


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Validate and normalize a matrix argument.

    Returns a C-contiguous float64 2-D array.  Rejects empty shapes and
    non-finite entries.
    """
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must have positive dimensions, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return np.ascontiguousarray(a)


@dataclass(frozen=True)
class SVDResult:
    """Thin SVD: u (m x r), sigma (r,) non-increasing, v (n x r)."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


def _complete_orthonormal(u: np.ndarray, zero_idx: np.ndarray) -> None:
    """Fill the columns ``zero_idx`` of u with orthonormal completions.

    Greedy choice: the canonical basis vector with the largest residual
    against the already-known columns, ties broken toward the lowest index.
    Deterministic; operates in place.
    """
    m, r = u.shape
    zeros = set(zero_idx.tolist())
    cols = [k for k in range(r) if k not in zeros]
    kn = np.empty((m, len(cols) + len(zero_idx)))
    kn[:, : len(cols)] = u[:, cols]
    count = len(cols)
    resid = 1.0 - np.einsum("ij,ij->i", kn[:, :count], kn[:, :count])
    for k in zero_idx:
        pick = int(np.argmax(resid))
        w = np.zeros(m)
        w[pick] = 1.0
        for _ in range(2):  # twice-is-enough re-orthogonalization
            w = w - kn[:, :count] @ (kn[:, :count].T @ w)
        nrm = float(np.linalg.norm(w))
        if nrm == 0.0:
            raise ConvergenceError("orthonormal completion failed")
        w /= nrm
        u[:, k] = w
        kn[:, count] = w
        count += 1
        resid = resid - w * w


def _fix_signs(u: np.ndarray, v: np.ndarray) -> None:
    """Make the first nonzero entry of each u-column non-negative."""
    for k in range(u.shape[1]):
        col = u[:, k]
        nz = np.nonzero(col)[0]
        if nz.size and col[nz[0]] < 0.0:
            u[:, k] = -col
            v[:, k] = -v[:, k]


def svd(m) -> SVDResult:
    """Thin SVD via one-sided Jacobi on the smaller Gram dimension.

    Deterministic for a fixed input; the sign convention makes the first
    nonzero entry of each u-column non-negative.  Singular values below
    RANK_TOL * sigma_max are clamped to exactly 0 and their u-columns are
    completed to an orthonormal set.
    """
    a = as_matrix(m, "svd input")
    transposed = a.shape[0] < a.shape[1]
    tall = a.T if transposed else a
    # one vector per row: contiguous access inside the sweep kernel
    vecs = tall.T.copy()
    scale = _safe_scale(vecs)
    if scale != 1.0:
        vecs /= scale
    n = vecs.shape[0]
    acc = np.eye(n)
    sweeps = backend.svd_sweeps(vecs, acc, SWEEP_TOL, MAX_SWEEPS)
    if sweeps < 0:
        raise ConvergenceError("svd did not converge")
    sigma = scale * np.sqrt(np.einsum("ik,ik->i", vecs, vecs))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    vecs = vecs[order]
    acc = acc[order]
    smax = sigma[0] if sigma.size else 0.0
    nonzero = sigma > RANK_TOL * smax
    sigma = np.where(nonzero, sigma, 0.0)
    u = np.zeros((tall.shape[0], n))
    u[:, nonzero] = (vecs[nonzero] / sigma[nonzero, None]).T
    zero_idx = np.nonzero(~nonzero)[0]
    if zero_idx.size:
        _complete_orthonormal(u, zero_idx)
    v = acc.T.copy()
    if transposed:
        u, v = v, u
    _fix_signs(u, v)
    return SVDResult(u=u, sigma=sigma, v=v)


def singular_values(m) -> np.ndarray:
    """Singular values only (no U/V accumulation), non-increasing."""
    a = as_matrix(m, "input")
    tall = a.T if a.shape[0] < a.shape[1] else a
    vecs = tall.T.copy()
    scale = _safe_scale(vecs)
    if scale != 1.0:
        vecs /= scale
    sweeps = backend.svd_sweeps(vecs, None, SWEEP_TOL, MAX_SWEEPS)
    if sweeps < 0:
        raise ConvergenceError("svd did not converge")
    sigma = scale * np.sqrt(np.einsum("ik,ik->i", vecs, vecs))
    sigma = np.sort(sigma)[::-1]
    smax = sigma[0] if sigma.size else 0.0
    return np.where(sigma > RANK_TOL * smax, sigma, 0.0)


def eig_sym(x) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, sorted descending.

    The input must be square and symmetric within 1e-10 (relative to its
    largest entry); the working copy is symmetrized before sweeping.
    """
    a = as_matrix(x, "eig_sym input")
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"eig_sym needs a square matrix, got {a.shape}")
    scale = max(1.0, float(np.abs(a).max()))
    if float(np.abs(a - a.T).max()) > 1e-10 * scale:
        raise ValueError("eig_sym input is not symmetric")
    work = np.ascontiguousarray((a + a.T) / 2.0)
    eig_scale = _safe_scale(work)
    if eig_scale != 1.0:
        work /= eig_scale
    sweeps = backend.eig_sweeps(work, SWEEP_TOL, MAX_SWEEPS)
    if sweeps < 0:
        raise ConvergenceError("eig_sym did not converge")
    return eig_scale * np.sort(np.diag(work))[::-1]


def schatten_norm(m, q) -> float:
    """Schatten norm: the l_q norm of the singular values.

    q=1 nuclear, q=2 Frobenius, q=inf spectral.  q < 1 is not a norm and is
    rejected.
    """
    q = float(q)
    if not (q >= 1.0):
        raise ValueError(f"schatten_norm requires q >= 1, got {q}")
    sigma = singular_values(m)
    smax = float(sigma[0])
    if smax == 0.0:
        return 0.0
    if np.isinf(q):
        return smax
    if q == 1.0:
        return float(sigma.sum())
    # scale by sigma_max so large q does not overflow
    return smax * float(np.sum((sigma / smax) ** q) ** (1.0 / q))


def mat1_encode(m) -> bytes:
    """Serialize a matrix in the MAT1 container format.

    Layout: 8-byte magic "SPOPMAT1", rows and cols as little-endian u64,
    then rows*cols little-endian f64 in row-major order.
    """
    a = as_matrix(m, "matrix")
    header = MAT1_MAGIC + struct.pack("<QQ", a.shape[0], a.shape[1])
    return header + a.astype("<f8").tobytes(order="C")


def mat1_decode(blob: bytes, origin: str = "buffer") -> np.ndarray:
    """Parse MAT1 bytes; ``origin`` names the source in error messages."""
    if len(blob) < 24 or blob[:8] != MAT1_MAGIC:
        raise ValueError(f"{origin}: not a MAT1 matrix")
    rows, cols = struct.unpack("<QQ", blob[8:24])
    expected = 24 + rows * cols * 8
    if rows < 1 or cols < 1 or len(blob) != expected:
        raise ValueError(f"{origin}: corrupt MAT1 payload")
    data = np.frombuffer(blob, dtype="<f8", count=rows * cols, offset=24)
    a = data.astype(np.float64).reshape(rows, cols)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{origin}: non-finite entries")
    return a


def save_matrix(path, m) -> None:
    """Write a matrix as a MAT1 file."""
    with open(path, "wb") as fh:
        fh.write(mat1_encode(m))


def load_matrix(path) -> np.ndarray:
    """Read a MAT1 file written by :func:`save_matrix`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    return mat1_decode(blob, origin=str(path))
