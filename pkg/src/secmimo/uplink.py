"""Uplink training under a pilot contamination attack.

Covers the pilot book, the eavesdropper's attack precoder, covariance-level
MMSE quantities (estimate covariances and filters), per-realization training
observations and estimates, and the projection onto the null space of the
eavesdropper's transmit correlation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve

from .channel import ChannelRealization, CorrelationSet, SystemConfig
from .numerics import (
    InvalidInputError,
    as_generator,
    cgauss_array,
    check_psd,
    hermitian_eig,
    sample_cgauss,
)


class InfeasiblePilotsError(InvalidInputError):
    """Fewer pilot symbols than users."""


class EmptyNullSpaceError(InvalidInputError):
    """The eavesdropper transmit correlation has no eigenvalue below the threshold."""


@dataclass(frozen=True)
class PilotBook:
    """Orthogonal pilots stored as the columns of a ``tau x K`` matrix."""

    pilots: np.ndarray

    @property
    def tau(self) -> int:
        return self.pilots.shape[0]

    @property
    def K(self) -> int:
        return self.pilots.shape[1]


def make_pilot_book(K: int, tau: int, rng) -> PilotBook:
    """First ``K`` columns of a random ``tau x tau`` unitary, scaled by ``sqrt(tau)``."""
    if tau < K:
        raise InfeasiblePilotsError(f"tau={tau} < K={K}")
    A = sample_cgauss(rng, tau, tau)
    Q, Rq = np.linalg.qr(A)
    d = np.diagonal(Rq)
    Q = Q * (d / np.abs(d))
    return PilotBook(np.sqrt(tau) * Q[:, :K])


@dataclass(frozen=True)
class AttackPrecoder:
    """Attack precoder ``P_e`` (columns ``p_s``) and its effective gains.

    Attributes
    ----------
    P_e : ndarray
        ``N_e x N_e`` precoder.
    u_e : ndarray
        Dominant eigenvector of the reference-cell receive correlation.
    r_eff : ndarray
        ``r_eff[l] = (1/N_e) 1^T P_e^H R_ER^l P_e 1`` for each cell ``l``.
    mode : str
        ``"eigen_uniform"`` or ``"custom"``.
    """

    P_e: np.ndarray
    u_e: np.ndarray
    r_eff: np.ndarray
    mode: str = "eigen_uniform"

    @property
    def N_e(self) -> int:
        return self.P_e.shape[0]

    @property
    def column_sum(self) -> np.ndarray:
        """``P_e 1``, the only combination of the columns the attack depends on."""
        return self.P_e.sum(axis=1)


def attack_objective(P_e, R) -> float:
    """``1^T P_e^H R P_e 1``, the quantity the attack maximizes."""
    a = np.asarray(P_e).sum(axis=1)
    return float(np.real(a.conj() @ np.asarray(R) @ a))


def attack_precoder(R_ER, N_e: int | None = None, mode: str = "eigen_uniform", P_e=None) -> AttackPrecoder:
    """Build the attack precoder.

    Parameters
    ----------
    R_ER : array_like
        Either the reference-cell receive correlation (``N_e x N_e``) or a
        stack ``(L+1, N_e, N_e)`` of receive correlations for all cells, in
        which case ``r_eff`` is filled for every cell.
    N_e : int, optional
        Expected antenna count; checked against ``R_ER``.
    mode : {"eigen_uniform", "custom"}
        ``"eigen_uniform"`` sets every column to ``u_e / sqrt(N_e)``, which
        maximizes the objective. ``"custom"`` uses ``P_e`` as given after
        checking the power constraint ``||P_e 1||^2 <= N_e``.
    """
    R_ER = np.asarray(R_ER, dtype=complex)
    stack = R_ER[None] if R_ER.ndim == 2 else R_ER
    n = stack.shape[-1]
    if stack.ndim != 3 or stack.shape[-2] != n or (N_e is not None and n != N_e):
        raise InvalidInputError(f"receive correlation shape {R_ER.shape} does not match N_e={N_e}")
    w, V = hermitian_eig(stack[0])
    u_e = V[:, 0]
    if mode == "eigen_uniform":
        P = np.tile(u_e[:, None], (1, n)) / np.sqrt(n)
    elif mode == "custom":
        if P_e is None:
            raise InvalidInputError("custom mode needs P_e")
        P = np.asarray(P_e, dtype=complex)
        if P.shape != (n, n):
            raise InvalidInputError(f"P_e must be {n}x{n}")
        if np.linalg.norm(P.sum(axis=1)) ** 2 > n * (1 + 1e-12):
            raise InvalidInputError("custom P_e violates the attack power constraint")
    else:
        raise InvalidInputError(f"unknown mode {mode!r}")
    r_eff = np.array([attack_objective(P, R) / n for R in stack])
    return AttackPrecoder(P, u_e, r_eff, mode)


def random_feasible_precoder(gen: np.random.Generator, N_e: int) -> np.ndarray:
    """A random precoder on the boundary of the attack power constraint."""
    P = cgauss_array(gen, (N_e, N_e))
    a = P.sum(axis=1)
    return P * (np.sqrt(N_e) / np.linalg.norm(a))


@dataclass
class EstimationSet:
    """Covariance-level MMSE quantities for every (cell, user).

    ``est_cov[l, k]`` is the covariance of the estimate of user ``k``'s
    channel to its own base station ``l``; ``filt[l, k]`` is the matrix
    ``C`` with ``h_hat = C y_tilde``; ``err_cov = R - est_cov``.
    ``attack_power`` and ``r_eff`` record which attack the set was built for.
    """

    est_cov: np.ndarray
    filt: np.ndarray
    err_cov: np.ndarray
    target_user: int
    attack_power: float
    r_eff: np.ndarray

    @property
    def est_trace(self) -> np.ndarray:
        return np.real(np.trace(self.est_cov, axis1=-2, axis2=-1))


def _mmse_parts(R, Psi, gain):
    """Return ``gain R Psi^-1 R`` and ``sqrt(gain) R Psi^-1`` for Hermitian ``R``, ``Psi``."""
    X = solve(Psi, R, assume_a="pos")
    Rhat = gain * (R @ X)
    Rhat = 0.5 * (Rhat + Rhat.conj().T)
    return Rhat, np.sqrt(gain) * X.conj().T


def estimate_covariances(config: SystemConfig, corr: CorrelationSet, attack: AttackPrecoder | None,
                         check: bool = True) -> EstimationSet:
    """MMSE estimate covariances and filters for all users.

    For the attacked user ``m`` the regularized matrix is
    ``Psi = N0 I + tau (sum_t P_tm R_tm^l + P_E r_eff[l] R_ET^l)``; other
    users have no attack term. Then ``R_hat = P tau R Psi^-1 R`` and
    ``C = sqrt(P) R Psi^-1``. Passing ``attack=None`` builds the attack-free
    set.
    """
    L1, K, N_t = config.L + 1, config.K, config.N_t
    if corr.user_corr.shape[:3] != (L1, K, L1) or corr.N_t != N_t:
        raise InvalidInputError("correlation set does not match the configuration")
    P = config.pilot_powers()
    m, tau, N0 = config.m, config.tau, config.N0
    r_eff = np.zeros(L1) if attack is None else np.asarray(attack.r_eff, dtype=float)
    if r_eff.shape != (L1,):
        raise InvalidInputError("attack precoder was built without all receive correlations")
    P_E = 0.0 if attack is None else config.P_E
    est = np.empty((L1, K, N_t, N_t), dtype=complex)
    filt = np.empty_like(est)
    eye = np.eye(N_t)
    for l in range(L1):
        for k in range(K):
            S = np.einsum("t,tij->ij", P[:, k], corr.user_corr[:, k, l])
            if k == m and P_E > 0:
                S = S + P_E * r_eff[l] * corr.eve_tx[l]
            Psi = N0 * eye + tau * S
            Psi = 0.5 * (Psi + Psi.conj().T)
            est[l, k], filt[l, k] = _mmse_parts(corr.user_corr[l, k, l], Psi, P[l, k] * tau)
            filt[l, k] /= np.sqrt(tau)
    err = corr.user_corr[np.arange(L1), :, np.arange(L1)] - est
    out = EstimationSet(est, filt, err, m, P_E, r_eff)
    if check:
        for l, k in np.ndindex(L1, K):
            check_psd(est[l, k], f"R_hat[{l},{k}]")
            check_psd(err[l, k], f"R - R_hat[{l},{k}]")
    return out


@dataclass
class TrainingObservation:
    """Despread training signals ``y[l, k]`` (leading batch axes allowed)."""

    y: np.ndarray
    attack_power: float
    r_eff: np.ndarray


def training_from_parts(config: SystemConfig, pilots: PilotBook, attack: AttackPrecoder | None,
                        user_chan: np.ndarray, eve_chan: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Form the received pilot block at each BS and despread it.

    ``Y_l = sum_{t,k} sqrt(P_tk) h_tk^l w_k^T + sqrt(P_E/N_e) H_E^l P_e 1 w_m^T + sqrt(N0) N_l``
    and ``y_lk = Y_l conj(w_k)``. ``noise`` holds standard CN(0, 1) entries of
    shape ``(..., L+1, N_t, tau)``. All arrays may carry the same leading
    batch axes.
    """
    W = pilots.pilots
    sqP = np.sqrt(config.pilot_powers())
    Y = np.einsum("tk,...tkln,sk->...lns", sqP, user_chan, W)
    if attack is not None and config.P_E > 0:
        a = attack.column_sum
        He_a = eve_chan @ a
        Y = Y + np.sqrt(config.P_E / attack.N_e) * He_a[..., :, None] * W[:, config.m][None, :]
    Y = Y + np.sqrt(config.N0) * noise
    return np.einsum("...lns,sk->...lkn", Y, W.conj())


def build_training_observation(config: SystemConfig, pilots: PilotBook, realization: ChannelRealization,
                               attack: AttackPrecoder | None, rng) -> TrainingObservation:
    """Training observations ``y_tilde[l, k]`` for one channel realization.

    The attack term is present only for user ``m``; the despread noise has
    covariance ``tau N0 I``.
    """
    gen = as_generator(rng)
    noise = cgauss_array(gen, (config.L + 1, config.N_t, pilots.tau))
    y = training_from_parts(config, pilots, attack, realization.user_chan, realization.eve_chan, noise)
    P_E = 0.0 if attack is None else config.P_E
    r_eff = np.zeros(config.L + 1) if attack is None else attack.r_eff
    return TrainingObservation(y, P_E, np.asarray(r_eff))


def estimate_realization(est: EstimationSet, ytilde, which: tuple[int, int]) -> np.ndarray:
    """MMSE estimate ``h_hat_lk = C_lk y_tilde_lk`` for one (cell, user)."""
    y = ytilde
    if isinstance(ytilde, TrainingObservation):
        if ytilde.attack_power != est.attack_power or not np.allclose(ytilde.r_eff, est.r_eff):
            raise InvalidInputError("training observation and estimation set use different attacks")
        y = ytilde.y
    l, k = which
    return est.filt[l, k] @ np.asarray(y)[l, k]


@dataclass
class NullSpaceSet:
    """Per-cell null-space bases and the projected statistics of user ``m``.

    ``V[l]`` is ``N_t x M_l``. ``user_corr[l]`` holds ``V^H R_tk^l V`` for all
    (t, k) as an ``(L+1, K, M_l, M_l)`` array. ``est_cov[l]`` and ``filt[l]``
    are the attack-free MMSE covariance and filter of user ``m`` in the
    projected domain.
    """

    V: list
    eigvals: list
    user_corr: list
    eve_tx: list
    est_cov: list
    filt: list
    eigen_tol: float

    @property
    def dims(self) -> list:
        return [v.shape[1] for v in self.V]

    @property
    def est_trace(self) -> np.ndarray:
        return np.array([np.real(np.trace(R)) for R in self.est_cov])


def ns_project(corr: CorrelationSet, config: SystemConfig, eigen_tol: float | None = None) -> NullSpaceSet:
    """Project onto the null space of each cell's eavesdropper transmit correlation.

    Cell ``l`` uses the eigenvectors of ``R_ET^l`` whose eigenvalues are
    below ``eigen_tol``. The projected estimate of user ``m`` is computed
    without the attack term, whose covariance in the projected domain is
    below the threshold.
    """
    tol = config.eigen_tol if eigen_tol is None else float(eigen_tol)
    if not 0 < tol < 1:
        raise InvalidInputError("eigen_tol must lie in (0, 1)")
    L1, m = config.L + 1, config.m
    P = config.pilot_powers()
    Vs, lams, ucs, ets, ests, filts = [], [], [], [], [], []
    for l in range(L1):
        w, V = hermitian_eig(corr.eve_tx[l])
        keep = w < tol
        M = int(keep.sum())
        if M == 0:
            raise EmptyNullSpaceError(
                f"R_ET^{l} has no eigenvalue below {tol:g} (smallest {w[-1]:.3e}); fall back to MF-AN"
            )
        Vl = V[:, keep]
        proj = np.einsum("ia,tkij,jb->tkab", Vl.conj(), corr.user_corr[:, :, l], Vl)
        proj = 0.5 * (proj + np.swapaxes(proj, -1, -2).conj())
        S = np.einsum("t,tij->ij", P[:, m], proj[:, m])
        Psi = config.N0 * np.eye(M) + config.tau * S
        Rhat, C = _mmse_parts(proj[l, m], 0.5 * (Psi + Psi.conj().T), P[l, m] * config.tau)
        Vs.append(Vl)
        lams.append(w[keep])
        ucs.append(proj)
        ets.append(Vl.conj().T @ corr.eve_tx[l] @ Vl)
        ests.append(Rhat)
        filts.append(C / np.sqrt(config.tau))
    return NullSpaceSet(Vs, lams, ucs, ets, ests, filts, tol)


def estimate_null(ns: NullSpaceSet, y_m: np.ndarray, l: int) -> np.ndarray:
    """Projected estimate ``C_null (V^H y_tilde_lm)`` for cell ``l``.

    ``y_m`` may carry trailing batch columns (``N_t x B``).
    """
    return ns.filt[l] @ (ns.V[l].conj().T @ y_m)
