"""
Dense complex linear algebra for small Hilbert spaces.

Matrices are ``numpy.complex128`` arrays of dimension 1 to 8. This module
provides:
- a cyclic Jacobi eigensolver for Hermitian matrices
- the PSD square root and the polar decomposition built on it
- structural predicates (unitary, positive semi-definite)

All functions are pure; returned arrays are marked read-only.
"""
import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .conf import get_config
from .exceptions import NoConvergence, NonFiniteMatrix, NotHermitian, NotPsd, NotSquare

logger = logging.getLogger(__name__)

ComplexMatrix = NDArray[np.complex128]

_EPS = np.finfo(np.float64).eps


def _frozen(array):
    """Mark ``array`` read-only in place and return it."""
    array.setflags(write=False)
    return array


def as_matrix(m):
    """
    Coerce ``m`` to a finite, square ``complex128`` matrix.

    Args:
        m: nested sequence or array convertible to complex

    Returns:
        ndarray: a new ``complex128`` array; the input is never aliased

    Raises:
        NotSquare: if ``m`` is not a non-empty 2-D square array
        NonFiniteMatrix: if any entry is NaN or infinite
    """
    arr = np.array(m, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise NotSquare(f'expected a non-empty square matrix, got shape {arr.shape}')
    if not np.all(np.isfinite(arr)):
        raise NonFiniteMatrix('matrix has NaN or infinite entries')
    return arr


def dagger(m):
    """Conjugate transpose."""
    return np.conj(m).T


def max_abs(m):
    """Max-norm of a matrix or vector; 0.0 for an empty array."""
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def projector(vector):
    """Outer product |v><v| of a (not necessarily normalized) vector."""
    v = np.asarray(vector, dtype=np.complex128).reshape(-1)
    return np.outer(v, v.conj())


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted descending with matching orthonormal eigenvector columns."""

    eigenvalues: NDArray[np.float64]
    eigenvectors: ComplexMatrix

    def reconstruct(self):
        """Rebuild ``Q diag(lambda) Q^dagger`` from the stored factors."""
        # scaling the columns of Q avoids forming diag(lambda)
        return (self.eigenvectors * self.eigenvalues) @ dagger(self.eigenvectors)

    @property
    def max_eigenvalue(self):
        """Largest eigenvalue (first, since the order is descending)."""
        return float(self.eigenvalues[0])

    @property
    def min_eigenvalue(self):
        """Smallest eigenvalue."""
        return float(self.eigenvalues[-1])


@dataclass(frozen=True)
class PolarFactors:
    """``k = unitary @ psd_root``."""

    unitary: ComplexMatrix
    psd_root: ComplexMatrix

    def reconstruct(self):
        """Return ``unitary @ psd_root``, which equals the decomposed matrix."""
        return self.unitary @ self.psd_root


def _jacobi_sweeps(a, max_sweeps, eps):
    """
    Diagonalize a Hermitian matrix by cyclic complex Jacobi rotations.

    Each rotation first removes the phase of a[p, q] and then applies the
    real symmetric Jacobi rotation, so the combined factor is

        G = [[c, s], [-s * conj(phase), c * conj(phase)]]

    acting on rows/columns (p, q). Sweep order is row-major over p < q.

    Returns:
        tuple: (diagonal, accumulated unitary, sweeps used) or None when the
        sweep budget is exhausted
    """
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n, dtype=np.complex128)
    scale = float(np.linalg.norm(a))
    if scale == 0.0 or n == 1:
        return np.real(np.diag(a)).copy(), v, 0

    off_mask = ~np.eye(n, dtype=bool)
    threshold = eps * scale
    skip = threshold / n

    for sweep in range(max_sweeps + 1):
        off = float(np.linalg.norm(a[off_mask]))
        if off <= threshold:
            logger.debug('Jacobi converged after %d sweeps (dim=%d, off=%.3e)', sweep, n, off)
            return np.real(np.diag(a)).copy(), v, sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                b = abs(apq)
                if b <= skip:
                    continue
                phase = apq / b
                tau = (a[q, q].real - a[p, p].real) / (2.0 * b)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                g = np.eye(n, dtype=np.complex128)
                g[p, p] = c
                g[p, q] = s
                g[q, p] = -s * np.conj(phase)
                g[q, q] = c * np.conj(phase)
                a = dagger(g) @ a @ g
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v = v @ g
    return None


def hermitian_eig(m, tol=None):
    """
    Eigendecomposition of a Hermitian matrix.

    Args:
        m: square complex matrix, Hermitian within ``tol`` in max-norm
        tol: symmetry tolerance (defaults to ``HERMITIAN_TOL``)

    Returns:
        EigenDecomposition: eigenvalues sorted descending

    Raises:
        NotHermitian: if ||m - m^dagger||_max exceeds ``tol``
        NoConvergence: if the Jacobi sweep budget is exhausted
    """
    config = get_config()
    tol = config.hermitian_tol if tol is None else tol
    m = as_matrix(m)
    residual = max_abs(m - dagger(m))
    if residual > tol:
        raise NotHermitian(f'matrix is not Hermitian (residual {residual:.3e} > {tol:.1e})')
    # symmetrize so the solver sees an exactly Hermitian input
    h = 0.5 * (m + dagger(m))

    result = _jacobi_sweeps(h, config.jacobi_max_sweeps, config.jacobi_eps)
    if result is None:
        raise NoConvergence(
            f'Jacobi eigensolver did not converge in {config.jacobi_max_sweeps} sweeps'
        )
    values, vectors, _ = result
    order = np.argsort(-values, kind='stable')
    return EigenDecomposition(
        eigenvalues=_frozen(values[order]),
        eigenvectors=_frozen(vectors[:, order]),
    )


def _noise_floor(eigenvalues):
    n = len(eigenvalues)
    return 4.0 * n * _EPS * max(1.0, float(np.max(np.abs(eigenvalues))))


def psd_sqrt(m, clamp_tol=None):
    """
    Principal square root of a positive semi-definite matrix.

    Eigenvalues in [-clamp_tol, noise floor] are treated as zero.

    Raises:
        NotPsd: if any eigenvalue is below ``-clamp_tol``
    """
    clamp_tol = get_config().psd_clamp_tol if clamp_tol is None else clamp_tol
    eig = hermitian_eig(m)
    if eig.min_eigenvalue < -clamp_tol:
        raise NotPsd(
            f'matrix has eigenvalue {eig.min_eigenvalue:.3e} below -{clamp_tol:.1e}'
        )
    values = np.array(eig.eigenvalues)
    # clamp roundoff-level eigenvalues, including the tolerated negatives
    values[values < _noise_floor(values)] = 0.0
    q = eig.eigenvectors
    root = (q * np.sqrt(values)) @ dagger(q)
    return _frozen(0.5 * (root + dagger(root)))


def _orthonormal_completion(columns, n):
    """
    Extend orthonormal-ish ``columns`` to an orthonormal basis of C^n.

    Modified Gram-Schmidt (two passes) over the given columns, then over
    the standard basis vectors e_0 .. e_{n-1} in order.
    """
    basis = []
    candidates = [np.asarray(c, dtype=np.complex128) for c in columns]
    candidates += [np.eye(n, dtype=np.complex128)[:, j] for j in range(n)]
    for vec in candidates:
        if len(basis) == n:
            break
        v = vec.copy()
        for _ in range(2):
            for b in basis:
                v = v - (np.vdot(b, v)) * b
        norm = float(np.linalg.norm(v))
        if norm > 1e-3:
            basis.append(v / norm)
    return np.column_stack(basis)


def polar_decompose(k, rank_tol=None):
    """
    Right polar decomposition ``k = U P`` with ``P = psd_sqrt(k^dagger k)``.

    For rank-deficient ``k`` the unitary factor is completed on the null
    space by Gram-Schmidt over the standard basis in index order.

    Args:
        k: square complex matrix
        rank_tol: singular values at or below ``rank_tol * max(1, sigma_max)``
            are treated as zero (defaults to ``RANK_TOL``)

    Returns:
        PolarFactors
    """
    rank_tol = get_config().rank_tol if rank_tol is None else rank_tol
    k = as_matrix(k)
    n = k.shape[0]
    gram = dagger(k) @ k
    eig = hermitian_eig(0.5 * (gram + dagger(gram)))
    values = np.clip(np.array(eig.eigenvalues), 0.0, None)
    values[values < _noise_floor(values)] = 0.0
    sigma = np.sqrt(values)
    q = eig.eigenvectors

    psd_root = (q * sigma) @ dagger(q)
    psd_root = 0.5 * (psd_root + dagger(psd_root))

    # left singular vectors k q_i / sigma_i span the range of k
    cutoff = rank_tol * max(1.0, float(sigma[0]))
    range_columns = []
    for i in range(n):
        if sigma[i] <= cutoff:
            break
        image = k @ q[:, i]
        norm = float(np.linalg.norm(image))
        if norm == 0.0:
            break
        range_columns.append(image / norm)
    if len(range_columns) < n:
        logger.debug('polar_decompose: rank %d of %d, completing unitary factor', len(range_columns), n)

    w = _orthonormal_completion(range_columns, n)
    unitary = w @ dagger(q)
    return PolarFactors(unitary=_frozen(unitary), psd_root=_frozen(psd_root))


def is_unitary(m, tol=None):
    """True iff ||m^dagger m - I||_max <= tol."""
    tol = get_config().unitary_tol if tol is None else tol
    m = as_matrix(m)
    return max_abs(dagger(m) @ m - np.eye(m.shape[0])) <= tol


def is_psd(m, tol=None):
    """True iff ``m`` is Hermitian within ``tol`` and its smallest eigenvalue is >= -tol."""
    tol = get_config().povm_tol if tol is None else tol
    m = as_matrix(m)
    if max_abs(m - dagger(m)) > tol:
        return False
    return hermitian_eig(m, tol=tol).min_eigenvalue >= -tol


def haar_unitary(dim, rng):
    """
    Haar-random unitary from a NumPy ``Generator``.

    QR of a complex Ginibre matrix with the phases of R's diagonal
    absorbed into Q.
    """
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
