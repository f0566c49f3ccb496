"""Downlink precoding: matched filter, artificial noise, null-space and unified designs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import InvalidInputError


class DegenerateEstimateError(InvalidInputError):
    """A channel estimate or its covariance trace is zero."""


@dataclass(frozen=True)
class PowerSplit:
    """Per-user signal share ``p`` and per-dimension AN share ``q``.

    The split satisfies ``K p + (N_t - K) q = 1`` with ``0 <= p <= 1/K``.
    """

    p: float
    q: float

    @classmethod
    def from_p(cls, p: float, K: int, N_t: int) -> "PowerSplit":
        """Split with the given ``p`` and ``q`` fixed by the power identity."""
        p = float(p)
        if p < -1e-15 or p > 1.0 / K + 1e-12:
            raise InvalidInputError(f"p={p} outside [0, 1/K]")
        p = min(max(p, 0.0), 1.0 / K)
        return cls(p, max(0.0, (1.0 - K * p) / (N_t - K)))

    @classmethod
    def no_an(cls, K: int) -> "PowerSplit":
        return cls(1.0 / K, 0.0)

    def validate(self, K: int, N_t: int) -> None:
        if self.p < 0 or self.q < 0 or self.p > 1.0 / K + 1e-12:
            raise InvalidInputError(f"invalid split p={self.p}, q={self.q}")
        if abs(K * self.p + (N_t - K) * self.q - 1.0) > 1e-9:
            raise InvalidInputError("split violates K p + (N_t - K) q = 1")


@dataclass(frozen=True)
class DesignChoice:
    """One of the four transmit designs.

    ``kind`` is ``"naive_mf"``, ``"mf_an"``, ``"ns"`` or ``"unified"``.
    The unified design mixes an MF-AN signal with weight ``alpha`` and an NS
    signal with weight ``beta = 1 - alpha``; the other kinds are special
    cases (naive MF is MF-AN with ``p = 1/K``, ``q = 0``; NS is
    ``alpha = 0``).
    """

    kind: str
    split: PowerSplit | None = None
    alpha: float = 1.0
    beta: float = 0.0

    @classmethod
    def naive_mf(cls, K: int) -> "DesignChoice":
        return cls("naive_mf", PowerSplit.no_an(K), 1.0, 0.0)

    @classmethod
    def mf_an(cls, split: PowerSplit) -> "DesignChoice":
        return cls("mf_an", split, 1.0, 0.0)

    @classmethod
    def ns(cls, K: int) -> "DesignChoice":
        return cls("ns", PowerSplit.no_an(K), 0.0, 1.0)

    @classmethod
    def unified(cls, alpha: float, split: PowerSplit) -> "DesignChoice":
        return cls("unified", split, float(alpha), 1.0 - float(alpha))

    @property
    def uses_null_space(self) -> bool:
        return self.beta > 0

    def validate(self, K: int, N_t: int) -> None:
        if self.kind not in ("naive_mf", "mf_an", "ns", "unified"):
            raise InvalidInputError(f"unknown design {self.kind!r}")
        if self.alpha < 0 or self.beta < 0 or abs(self.alpha + self.beta - 1.0) > 1e-12:
            raise InvalidInputError("need alpha, beta >= 0 and alpha + beta = 1")
        if self.split is None:
            raise InvalidInputError("design needs a power split")
        self.split.validate(K, N_t)
        if self.kind == "naive_mf" and (abs(self.split.p - 1.0 / K) > 1e-12 or self.split.q != 0):
            raise InvalidInputError("naive MF uses p = 1/K, q = 0")

    def coefficients(self, K: int):
        """Amplitudes applied to the precoders.

        Returns ``(c_own, c_m, c_null, c_an)``: the weight of ``w_lk`` for
        ``k != m``, of ``w_lm``, of ``w_lm,null`` and of ``U_l z_l``. The two
        terms for ``k != m`` carry the same symbol and add coherently.
        """
        sp = np.sqrt(self.alpha * self.split.p)
        sb = np.sqrt(self.beta / K)
        return sp + sb, sp, sb, np.sqrt(self.alpha * self.split.q)


@dataclass
class Precoders:
    """Precoders of every cell.

    ``w[l, k]`` are unit MF precoders, ``U[l]`` the AN shaping matrices and
    ``w_null[l]`` the NS precoder of user ``m`` (``None`` when not built).
    """

    w: np.ndarray
    U: np.ndarray
    w_null: np.ndarray | None = None


def mf_precoder(hhat) -> np.ndarray:
    """Matched filter ``w = h_hat / ||h_hat||``."""
    hhat = np.asarray(hhat, dtype=complex)
    nrm = np.linalg.norm(hhat)
    if nrm == 0:
        raise DegenerateEstimateError("zero channel estimate")
    return hhat / nrm


def an_shaping(Hhat_l, traces) -> np.ndarray:
    """AN shaping ``U = I - H_hat diag(1/tr R_hat_k) H_hat^H``.

    Parameters
    ----------
    Hhat_l : array_like
        ``N_t x K`` matrix of the cell's channel estimates (``K`` may be 0).
    traces : array_like
        ``tr(R_hat_lk)`` for each column.
    """
    H = np.asarray(Hhat_l, dtype=complex)
    tr = np.asarray(traces, dtype=float).reshape(-1)
    if H.ndim != 2 or H.shape[1] != tr.size:
        raise InvalidInputError("Hhat_l must be N_t x K with one trace per column")
    if np.any(tr <= 0):
        raise DegenerateEstimateError("estimate covariance with zero trace")
    U = np.eye(H.shape[0], dtype=complex) - (H / tr) @ H.conj().T
    return 0.5 * (U + U.conj().T)


def ns_precoder(V_l, hhat_null) -> np.ndarray:
    """NS precoder ``V h_null / ||h_null||`` for the attacked user."""
    return np.asarray(V_l) @ mf_precoder(hhat_null)


def build_precoders(hhat: np.ndarray, est_trace: np.ndarray, V=None, hhat_null=None) -> Precoders:
    """Precoders for all cells from the estimates ``hhat[l, k]``.

    ``V`` and ``hhat_null`` (lists over cells) are only needed for designs
    that use the null space.
    """
    L1, K = hhat.shape[:2]
    w = np.stack([[mf_precoder(hhat[l, k]) for k in range(K)] for l in range(L1)])
    U = np.stack([an_shaping(hhat[l].T, est_trace[l]) for l in range(L1)])
    w_null = None
    if hhat_null is not None:
        w_null = np.stack([ns_precoder(V[l], hhat_null[l]) for l in range(L1)])
    return Precoders(w, U, w_null)


def effective_beams(design: DesignChoice, w: np.ndarray, w_null, m: int) -> np.ndarray:
    """Per-user transmit beams including the power weights.

    ``w`` has shape ``(..., L+1, K, N_t)`` and ``w_null`` ``(..., L+1, N_t)``.
    The returned ``v`` satisfies ``x_l = sqrt(P) (sum_k v_lk s_lk + c_an U_l z_l)``.
    """
    K = w.shape[-2]
    c_own, c_m, c_null, _ = design.coefficients(K)
    v = c_own * w
    v[..., m, :] = c_m * w[..., m, :]
    if c_null > 0:
        if w_null is None:
            raise InvalidInputError(f"design {design.kind} needs null-space precoders")
        v[..., m, :] += c_null * w_null
    return v


def compose_transmit(design: DesignChoice, precoders: Precoders, symbols, an_vector, P: float,
                     l: int = 0, m: int = 0) -> np.ndarray:
    """Transmit vector ``x_l`` of cell ``l``.

    ``x_l = sqrt(P) (sqrt(alpha) (sqrt(p) sum_k w_k s_k + sqrt(q) U z)
    + sqrt(beta/K) (w_null s_m + sum_{k != m} w_k s_k))``.
    """
    K = precoders.w.shape[1]
    design.validate(K, precoders.w.shape[-1])
    v = effective_beams(design, precoders.w[l:l + 1].copy(),
                        None if precoders.w_null is None else precoders.w_null[l:l + 1], m)[0]
    c_an = design.coefficients(K)[3]
    x = np.asarray(symbols, dtype=complex) @ v
    if c_an > 0:
        x = x + c_an * (precoders.U[l] @ np.asarray(an_vector, dtype=complex))
    return np.sqrt(P) * x
