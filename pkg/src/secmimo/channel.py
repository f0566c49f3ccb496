"""System configuration, correlation-matrix synthesis and channel sampling.

Array layout used throughout the package (0-based indices):

* ``user_corr[t, k, l]`` is the N_t x N_t transmit correlation of user ``k``
  of cell ``t`` as seen by base station ``l``.
* ``eve_tx[l]`` is the N_t x N_t correlation of the eavesdropper channel at
  base station ``l``; ``eve_rx[l]`` is the N_e x N_e correlation on the
  eavesdropper side of that link.
* ``user_chan[t, k, l]`` and ``eve_chan[l]`` follow the same indexing.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import toeplitz

from .numerics import (
    InvalidInputError,
    RngStream,
    as_generator,
    cgauss_array,
    check_psd,
    psd_sqrt,
)

DEFAULT_QUAD_POINTS = 4096
# stream id reserved for correlation draws; trial streams use ids 0..n_trials-1
CORR_STREAM = 2 ** 63 + 1
PAS_MASS_TOL = 1e-6


class QuadratureResolutionError(InvalidInputError):
    """The angular grid is too coarse to resolve the power angle spectrum."""


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of the multi-cell system.

    Attributes
    ----------
    L : int
        Number of interfering cells; cells are indexed ``0..L`` and cell 0 is
        the reference cell.
    K : int
        Users per cell.
    N_t, N_e : int
        Base-station and eavesdropper antenna counts.
    tau : int
        Pilot length.
    pilot_power : float or array_like
        Uplink pilot power, either one value for every user or an
        ``(L+1, K)`` array indexed by (cell, user).
    P_E : float
        Attack power of the eavesdropper.
    N0 : float
        Uplink noise variance.
    gamma : float
        Downlink SNR ``P / N0d`` on a linear scale.
    rho : float
        Power gain of cross-cell links, in ``(0, 1]``.
    sigma_as : float
        Angular spread of the Laplacian power angle spectrum, in radians.
    target_user : int
        0-based index ``m`` of the user whose pilot is attacked.
    dl_power : float
        Downlink transmit power ``P``; only used when composing transmit
        vectors, the rate formulas depend on ``gamma`` alone.
    corr_model : {"laplacian", "iid"}
        ``"iid"`` replaces every correlation matrix by a scaled identity.
    quad_points : int
        Number of angular cells used to integrate the correlation.
    eigen_tol : float
        Eigenvalues of ``eve_tx`` below this count as null space.
    """

    L: int = 3
    K: int = 5
    N_t: int = 128
    N_e: int = 1
    tau: int = 10
    pilot_power: object = 1.0
    P_E: float = 1.0
    N0: float = 1.0
    gamma: float = 1.0
    rho: float = 0.1
    sigma_as: float = np.pi / 2
    target_user: int = 0
    dl_power: float = 1.0
    corr_model: str = "laplacian"
    quad_points: int = DEFAULT_QUAD_POINTS
    eigen_tol: float = 1e-3

    def __post_init__(self):
        if self.L < 0 or self.K < 1 or self.N_e < 1:
            raise InvalidInputError("need L >= 0, K >= 1, N_e >= 1")
        if self.tau < self.K:
            raise InvalidInputError(f"tau={self.tau} < K={self.K}: orthogonal pilots do not exist")
        if self.N_t <= self.K:
            raise InvalidInputError(f"N_t={self.N_t} must exceed K={self.K}")
        if not 0 <= self.target_user < self.K:
            raise InvalidInputError(f"target_user must lie in [0, {self.K})")
        if self.P_E < 0:
            raise InvalidInputError("P_E must be nonnegative")
        if self.N0 <= 0 or self.gamma < 0 or self.dl_power <= 0:
            raise InvalidInputError("N0 and dl_power must be positive, gamma nonnegative")
        if not 0 < self.rho <= 1:
            raise InvalidInputError("rho must lie in (0, 1]")
        if self.sigma_as <= 0:
            raise InvalidInputError("sigma_as must be positive")
        if self.corr_model not in ("laplacian", "iid"):
            raise InvalidInputError(f"unknown corr_model {self.corr_model!r}")
        P = self.pilot_powers()
        if np.any(P <= 0):
            raise InvalidInputError("pilot powers must be positive")

    @property
    def m(self) -> int:
        return self.target_user

    def pilot_powers(self) -> np.ndarray:
        """Pilot powers as an ``(L+1, K)`` array."""
        P = np.asarray(self.pilot_power, dtype=float)
        if P.ndim == 0:
            return np.full((self.L + 1, self.K), float(P))
        if P.shape != (self.L + 1, self.K):
            raise InvalidInputError(f"pilot_power must be scalar or shape {(self.L + 1, self.K)}")
        return P.copy()

    def with_(self, **changes) -> "SystemConfig":
        """Copy with some fields replaced."""
        return replace(self, **changes)


def laplacian_pas_weights(sigma_as: float, quad_points: int = DEFAULT_QUAD_POINTS):
    """Cell midpoints and probability masses of the truncated Laplacian PAS.

    The density ``exp(-sqrt(2)|x|/sigma) / (sqrt(2) sigma (1 - exp(-sqrt(2) pi/sigma)))``
    is truncated to ``|x| <= pi`` around the mean angle, which is exactly the
    window its normalizing constant is computed for. Each of the
    ``quad_points`` equal cells carries its exact probability mass, so the
    masses sum to one; the midpoint-rule mass is used to check that the grid
    resolves the density.

    Returns
    -------
    offsets : ndarray
        Cell midpoints relative to the mean angle.
    masses : ndarray
        Exact probability of each cell.
    """
    if quad_points < 256:
        raise QuadratureResolutionError(f"quad_points={quad_points} < 256")
    s = float(sigma_as)
    h = 2 * np.pi / quad_points
    edges = -np.pi + h * np.arange(quad_points + 1)
    offsets = 0.5 * (edges[1:] + edges[:-1])
    z = -np.expm1(-np.sqrt(2) * np.pi / s)
    cdf = np.sign(edges) * (-np.expm1(-np.sqrt(2) * np.abs(edges) / s)) / (2 * z)
    masses = np.diff(cdf)
    density = np.exp(-np.sqrt(2) * np.abs(offsets) / s) / (np.sqrt(2) * s * z)
    midpoint_mass = density.sum() * h
    if abs(midpoint_mass - 1.0) > PAS_MASS_TOL:
        raise QuadratureResolutionError(
            f"midpoint PAS mass {midpoint_mass:.9f} misses 1 by more than {PAS_MASS_TOL}; "
            f"increase quad_points above {quad_points}"
        )
    return offsets, masses


def laplacian_correlation(mean_aoa: float, sigma_as: float, N_t: int,
                          quad_points: int = DEFAULT_QUAD_POINTS) -> np.ndarray:
    """Transmit correlation of a half-wavelength ULA under a Laplacian PAS.

    Computes ``R = sum_q w_q a(theta_q) a(theta_q)^H`` with steering vector
    ``a(theta)_n = exp(i pi n sin(theta))``. The result is Hermitian
    Toeplitz with unit diagonal, hence trace ``N_t``.
    """
    if N_t < 1:
        raise InvalidInputError("N_t must be positive")
    offsets, masses = laplacian_pas_weights(sigma_as, quad_points)
    theta = mean_aoa + offsets
    n = np.arange(N_t)
    col = np.exp(1j * np.pi * np.outer(n, np.sin(theta))) @ masses
    col[0] = col[0].real
    return toeplitz(col, col.conj())


def exponential_correlation(phi: float, N_e: int) -> np.ndarray:
    """Exponential correlation ``R_ij = phi^|i-j|``; ``phi = 0`` gives the identity."""
    if not 0 <= phi < 1:
        raise InvalidInputError(f"phi={phi} outside [0, 1)")
    idx = np.arange(N_e)
    R = np.power(float(phi), np.abs(idx[:, None] - idx[None, :]))
    return R.astype(complex)


def normalize_trace(R, target: float) -> np.ndarray:
    """Scale ``R`` so that its trace equals ``target``."""
    R = np.asarray(R, dtype=complex)
    tr = float(np.real(np.trace(R)))
    if tr <= 0 or target <= 0:
        raise InvalidInputError("trace and target must be positive")
    return R * (target / tr)


@dataclass
class CorrelationSet:
    """All second-order channel statistics of one experiment.

    ``user_corr`` has shape ``(L+1, K, L+1, N_t, N_t)``, ``eve_tx`` has
    shape ``(L+1, N_t, N_t)`` and ``eve_rx`` has shape ``(L+1, N_e, N_e)``.
    """

    user_corr: np.ndarray
    eve_tx: np.ndarray
    eve_rx: np.ndarray
    _sqrt: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def L(self) -> int:
        return self.user_corr.shape[0] - 1

    @property
    def K(self) -> int:
        return self.user_corr.shape[1]

    @property
    def N_t(self) -> int:
        return self.user_corr.shape[-1]

    @property
    def N_e(self) -> int:
        return self.eve_rx.shape[-1]

    def R(self, t: int, k: int, l: int) -> np.ndarray:
        return self.user_corr[t, k, l]

    def validate(self, config: SystemConfig | None = None, check_traces: bool = True) -> None:
        """Check Hermitian PSD structure and, optionally, the trace normalization."""
        L1, K = self.user_corr.shape[:2]
        if self.user_corr.shape != (L1, K, L1, self.N_t, self.N_t):
            raise InvalidInputError(f"bad user_corr shape {self.user_corr.shape}")
        if self.eve_tx.shape != (L1, self.N_t, self.N_t) or self.eve_rx.shape[0] != L1:
            raise InvalidInputError("eavesdropper correlation shapes do not match user_corr")
        for idx in np.ndindex(L1, K, L1):
            check_psd(self.user_corr[idx], f"R{idx}")
        for l in range(L1):
            check_psd(self.eve_tx[l], f"R_ET[{l}]")
            check_psd(self.eve_rx[l], f"R_ER[{l}]")
        if config is None or not check_traces:
            return
        rho, N_t, N_e = config.rho, self.N_t, self.N_e
        tr_u = np.real(np.trace(self.user_corr, axis1=-2, axis2=-1))
        for t, k, l in np.ndindex(L1, K, L1):
            want = N_t if t == l else rho * N_t
            if abs(tr_u[t, k, l] - want) > 1e-9 * N_t:
                raise InvalidInputError(f"trace R[{t},{k},{l}] = {tr_u[t, k, l]} != {want}")
        for l in range(L1):
            want = N_e if l == 0 else rho * N_e
            if abs(np.real(np.trace(self.eve_rx[l])) - want) > 1e-9 * N_e:
                raise InvalidInputError(f"trace R_ER[{l}] != {want}")

    def sqrt_factors(self):
        """Cached PSD square roots ``(user, eve_tx, eve_rx)`` used for sampling."""
        if not self._sqrt:
            L1, K = self.user_corr.shape[:2]
            su = np.empty_like(self.user_corr)
            for idx in np.ndindex(L1, K, L1):
                su[idx] = psd_sqrt(self.user_corr[idx])
            st = np.stack([psd_sqrt(R) for R in self.eve_tx])
            sr = np.stack([psd_sqrt(R) for R in self.eve_rx])
            self._sqrt.update(user=su, eve_tx=st, eve_rx=sr)
        return self._sqrt["user"], self._sqrt["eve_tx"], self._sqrt["eve_rx"]

    def with_eve(self, eve_tx=None, eve_rx=None) -> "CorrelationSet":
        """Copy with the eavesdropper statistics replaced."""
        return CorrelationSet(
            self.user_corr,
            self.eve_tx if eve_tx is None else np.asarray(eve_tx, dtype=complex),
            self.eve_rx if eve_rx is None else np.asarray(eve_rx, dtype=complex),
        )


def build_correlation_set(config: SystemConfig, rng) -> CorrelationSet:
    """Draw mean AoAs and receive correlations and assemble a ``CorrelationSet``.

    Every (user, base station) pair and every (eavesdropper, base station)
    pair gets its own mean AoA, uniform on ``[-pi, pi]``; each eavesdropper
    link gets its own ``phi`` uniform on ``(0, 1)``. Draw order is fixed:
    user AoAs in (t, k, l) order, then eavesdropper AoAs, then ``phi``.

    Own-cell user correlations have trace ``N_t`` and cross-cell ones
    ``rho * N_t``. The eavesdropper transmit correlation has trace ``N_t``
    at every base station and the cross-cell loss ``rho`` is carried by the
    receive correlation, whose trace is ``N_e`` at BS 0 and ``rho * N_e``
    elsewhere.

    ``rng`` may be an ``RngStream``, a generator or an integer seed; an
    integer ``s`` means ``RngStream(s, CORR_STREAM)``.
    """
    if isinstance(rng, (int, np.integer)):
        rng = RngStream(int(rng), CORR_STREAM)
    gen = as_generator(rng)
    L1, K, N_t, N_e, rho = config.L + 1, config.K, config.N_t, config.N_e, config.rho
    user = np.empty((L1, K, L1, N_t, N_t), dtype=complex)
    eve_tx = np.empty((L1, N_t, N_t), dtype=complex)
    eve_rx = np.empty((L1, N_e, N_e), dtype=complex)
    if config.corr_model == "iid":
        eye_t, eye_e = np.eye(N_t, dtype=complex), np.eye(N_e, dtype=complex)
        for t, k, l in np.ndindex(L1, K, L1):
            user[t, k, l] = eye_t * (1.0 if t == l else rho)
        for l in range(L1):
            eve_tx[l] = eye_t
            eve_rx[l] = eye_e * (1.0 if l == 0 else rho)
        return CorrelationSet(user, eve_tx, eve_rx)

    user_aoa = gen.uniform(-np.pi, np.pi, size=(L1, K, L1))
    eve_aoa = gen.uniform(-np.pi, np.pi, size=L1)
    phis = gen.uniform(0.0, 1.0, size=L1)
    for t, k, l in np.ndindex(L1, K, L1):
        R = laplacian_correlation(user_aoa[t, k, l], config.sigma_as, N_t, config.quad_points)
        user[t, k, l] = normalize_trace(R, N_t if t == l else rho * N_t)
    for l in range(L1):
        R = laplacian_correlation(eve_aoa[l], config.sigma_as, N_t, config.quad_points)
        eve_tx[l] = normalize_trace(R, N_t)
        eve_rx[l] = normalize_trace(exponential_correlation(phis[l], N_e), N_e if l == 0 else rho * N_e)
    corr = CorrelationSet(user, eve_tx, eve_rx)
    corr.validate(config)
    return corr


@dataclass
class ChannelRealization:
    """One draw of every channel: ``user_chan[t, k, l]`` and ``eve_chan[l]``."""

    user_chan: np.ndarray
    eve_chan: np.ndarray


def draw_channel_gaussians(gen: np.random.Generator, L1: int, K: int, N_t: int, N_e: int):
    """Standard Gaussians behind one realization, in the package's fixed draw order."""
    g = cgauss_array(gen, (L1, K, L1, N_t))
    G = cgauss_array(gen, (L1, N_t, N_e))
    return g, G


def realization_from_gaussians(corr: CorrelationSet, g: np.ndarray, G: np.ndarray) -> ChannelRealization:
    """Colour standard Gaussians with the correlation square roots.

    ``g`` and ``G`` may carry a leading batch axis, in which case the result
    does too.
    """
    su, st, sr = corr.sqrt_factors()
    h = np.einsum("...ij,...j->...i", su, g) if g.ndim == 4 else np.einsum("tklij,btklj->btkli", su, g)
    if G.ndim == 3:
        H = st @ G @ sr
    else:
        H = st[None] @ G @ sr[None]
    return ChannelRealization(h, H)


def sample_realization(corr: CorrelationSet, rng) -> ChannelRealization:
    """Draw ``h = R^{1/2} g`` for every user link and ``H_E = R_T^{1/2} G R_R^{1/2}``."""
    gen = as_generator(rng)
    g, G = draw_channel_gaussians(gen, corr.L + 1, corr.K, corr.N_t, corr.N_e)
    return realization_from_gaussians(corr, g, G)


_MAGIC = b"SECMIMO-CORR\x00v1\n"


def save_correlation_set(corr: CorrelationSet, path_or_file) -> None:
    """Write a correlation set as a binary archive.

    Layout: the 16-byte magic string, four little-endian uint64 values
    ``(L+1, K, N_t, N_e)``, then ``user_corr``, ``eve_tx`` and ``eve_rx`` as
    row-major (real, imag) pairs of little-endian IEEE-754 doubles.
    """
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<4Q", corr.L + 1, corr.K, corr.N_t, corr.N_e))
    for arr in (corr.user_corr, corr.eve_tx, corr.eve_rx):
        buf.write(np.ascontiguousarray(arr, dtype="<c16").tobytes())
    data = buf.getvalue()
    if hasattr(path_or_file, "write"):
        path_or_file.write(data)
    else:
        with open(path_or_file, "wb") as fh:
            fh.write(data)


def load_correlation_set(path_or_file) -> CorrelationSet:
    """Read an archive written by ``save_correlation_set``."""
    if hasattr(path_or_file, "read"):
        data = path_or_file.read()
    else:
        with open(path_or_file, "rb") as fh:
            data = fh.read()
    if not data.startswith(_MAGIC):
        raise InvalidInputError("not a correlation archive")
    off = len(_MAGIC)
    L1, K, N_t, N_e = struct.unpack_from("<4Q", data, off)
    off += 32
    shapes = [(L1, K, L1, N_t, N_t), (L1, N_t, N_t), (L1, N_e, N_e)]
    arrays = []
    for shp in shapes:
        n = int(np.prod(shp))
        arrays.append(np.frombuffer(data, dtype="<c16", count=n, offset=off).reshape(shp).astype(complex))
        off += 16 * n
    if off != len(data):
        raise InvalidInputError("trailing bytes in correlation archive")
    return CorrelationSet(*arrays)

