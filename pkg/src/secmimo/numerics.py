"""Hermitian linear algebra and seeded complex Gaussian sampling.

Every other module goes through these helpers so that the tolerances used for
Hermiticity and positive semidefiniteness are defined in one place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_ATOL = 1e-12
HERMITIAN_RTOL = 1e-10
PSD_NEG_TOL = 1e-6


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class NotPSDError(InvalidInputError):
    """Raised when a matrix has an eigenvalue clearly below zero."""


@dataclass(frozen=True)
class RngStream:
    """Identifies an independent random stream.

    A stream is fully determined by ``(seed, stream_id)``. Monte Carlo trials
    use the trial index as ``stream_id`` so each trial draws the same numbers
    no matter how the trials are scheduled.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng) -> np.random.Generator:
    """Accept an ``RngStream``, a ``numpy.random.Generator`` or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(int(rng)).generator()


def hermitize(A, what: str = "matrix") -> np.ndarray:
    """Return ``(A + A^H)/2`` after checking that ``A`` is Hermitian.

    The check is absolute at ``1e-12`` with a relative allowance scaled by the
    largest entry, which absorbs round-off from quadrature and products.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"{what} must be square, got shape {A.shape}")
    dev = np.abs(A - A.conj().T).max(initial=0.0)
    scale = np.abs(A).max(initial=0.0)
    if dev > HERMITIAN_ATOL + HERMITIAN_RTOL * scale:
        raise InvalidInputError(f"{what} is not Hermitian (max deviation {dev:.3e})")
    return 0.5 * (A + A.conj().T)


def hermitian_eig(A) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Parameters
    ----------
    A : array_like
        Square Hermitian matrix.

    Returns
    -------
    w : ndarray
        Real eigenvalues sorted in descending order.
    V : ndarray
        Unitary matrix whose columns are the matching eigenvectors, so that
        ``A = V @ diag(w) @ V^H``.
    """
    A = hermitize(A)
    w, V = np.linalg.eigh(A)
    return w[::-1].copy(), V[:, ::-1].copy()


def psd_sqrt(A) -> np.ndarray:
    """Hermitian PSD square root through the eigendecomposition.

    Eigenvalues below the round-off floor ``n * eps * lambda_max`` are set
    to zero, so rank-deficient inputs keep their rank; anything below
    ``-1e-6 * lambda_max`` is rejected. Rank-deficient inputs
    are fine, which is why a Cholesky factor is not used.
    """
    w, V = hermitian_eig(A)
    lam_max = max(w[0], 0.0) if w.size else 0.0
    if w.size and w[-1] < -PSD_NEG_TOL * max(lam_max, np.finfo(float).tiny):
        raise NotPSDError(f"matrix is not PSD (min eigenvalue {w[-1]:.3e}, max {lam_max:.3e})")
    floor = w.size * np.finfo(float).eps * lam_max
    s = np.sqrt(np.where(w > floor, w, 0.0))
    S = (V * s) @ V.conj().T
    return 0.5 * (S + S.conj().T)


def check_psd(A, what: str = "matrix", rtol: float = 1e-9) -> None:
    """Raise ``NotPSDError`` unless ``min eig(A) >= -rtol * max(|eig(A)|)``."""
    w = np.linalg.eigvalsh(hermitize(A, what))
    scale = max(np.abs(w).max(initial=0.0), np.finfo(float).tiny)
    if w.size and w[0] < -rtol * scale:
        raise NotPSDError(f"{what} is not PSD (min eigenvalue {w[0]:.3e})")


def sample_cgauss(rng, rows: int, cols: int = 1) -> np.ndarray:
    """Draw a ``rows x cols`` matrix of i.i.d. CN(0, 1) entries.

    Real and imaginary parts are independent with variance 1/2 each.
    """
    if rows < 1 or cols < 1:
        raise InvalidInputError("rows and cols must be positive")
    gen = as_generator(rng)
    x = gen.standard_normal((rows, cols, 2))
    return (x[..., 0] + 1j * x[..., 1]) * np.sqrt(0.5)


def cgauss_array(gen: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) array of arbitrary shape drawn from an existing generator."""
    x = gen.standard_normal(tuple(shape) + (2,))
    return (x[..., 0] + 1j * x[..., 1]) * np.sqrt(0.5)


def htrace(A, B=None) -> float:
    """Real part of ``tr(A)`` or of ``tr(A @ B)`` without forming the product."""
    if B is None:
        return float(np.real(np.trace(A)))
    return float(np.real(np.einsum("ij,ji->", A, B)))


def ctrace(A, B) -> complex:
    """Complex ``tr(A @ B)`` without forming the product."""
    return complex(np.einsum("ij,ji->", A, B))
