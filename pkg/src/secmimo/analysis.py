"""Closed-form large-array analysis of the secrecy rate.

Quantities follow the notation used in the package docs:

* ``theta_m``, ``theta_bp``, ``theta_bq``: desired-signal, MF-interference
  and AN-leakage terms of the attacked user's large-array SINR.
* ``Lambda_0m[l]``: large-array value of ``|h_0m^l^H h_hat_lm^l|^2``.
* ``eta[l]``: ``N_e x N_e`` matrix with entries approximating
  ``h_E,i^l^H h_hat_lm^l h_hat_lm^l^H h_E,j^l``.
* ``Q_l[l]``: large-array value of ``H_E^l^H U_l U_l^H H_E^l``.

All rates are in bits/s/Hz (base-2 logarithms).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve

from .channel import CorrelationSet, SystemConfig
from .downlink import PowerSplit
from .numerics import InvalidInputError, ctrace, htrace
from .uplink import AttackPrecoder, EstimationSet, NullSpaceSet, attack_precoder, estimate_covariances, ns_project


class WrongSpecializationError(InvalidInputError):
    """A closed form was requested outside the topology it applies to."""


class DegenerateThresholdError(InvalidInputError):
    """``theta_bp * theta_e_tilde`` vanishes, so the SNR threshold is undefined."""


class FixedPointError(RuntimeError):
    """Damped fixed-point iteration did not converge."""

    def __init__(self, msg, last_iterate=None):
        super().__init__(msg)
        self.last_iterate = last_iterate


@dataclass(frozen=True)
class SecrecyResult:
    """Rates of the attacked user and the eavesdropper.

    ``rate_secrecy = max(0, rate_user - cap_eve)``; ``ci_halfwidth`` is zero
    for closed-form results.
    """

    rate_user: float
    cap_eve: float
    rate_secrecy: float
    method: str
    ci_halfwidth: float = 0.0
    n_trials: int = 0
    n_degenerate: int = 0

    @classmethod
    def from_rates(cls, rate_user, cap_eve, method, ci_halfwidth=0.0, **kw) -> "SecrecyResult":
        ru, ce = float(rate_user), float(cap_eve)
        return cls(ru, ce, max(0.0, ru - ce), method, float(ci_halfwidth), **kw)


@dataclass
class AsymptoticTerms:
    """Large-array building blocks of the secrecy rate.

    ``Q_asy`` and ``theta_e`` depend on the AN share ``q`` and on ``gamma``
    and are evaluated on demand from the stored ``Q_l`` and ``eta``.
    """

    theta_m: float
    theta_bp: float
    theta_bq: float
    Lambda_0m: np.ndarray
    C: np.ndarray
    eta: np.ndarray
    Q_l: np.ndarray
    theta_e_tilde: float
    est_trace_m: np.ndarray
    user_leak: np.ndarray
    eve_leak: np.ndarray
    tr_user: np.ndarray
    K: int
    N_t: int

    @property
    def est_trace_0m(self) -> float:
        return float(self.est_trace_m[0])

    def Q_asy(self, q: float, gamma: float) -> np.ndarray:
        """``q gamma sum_l Q_l + I``."""
        N_e = self.eta.shape[-1]
        return q * gamma * self.Q_l.sum(axis=0) + np.eye(N_e)

    def theta_e(self, q: float, gamma: float) -> float:
        """``tr(Q_asy^-1 eta^0)``."""
        Q = self.Q_asy(q, gamma)
        return float(np.real(np.trace(solve(Q, self.eta[0], assume_a="her"))))

    def sinr_user(self, split: PowerSplit, gamma: float) -> float:
        p, q = split.p, split.q
        return p * gamma * self.theta_m / (p * gamma * self.theta_bp + q * gamma * self.theta_bq + 1.0)

    def sinr_eve(self, split: PowerSplit, gamma: float) -> float:
        return split.p * gamma * self.theta_e(split.q, gamma) / self.est_trace_0m


def asymptotic_terms(config: SystemConfig, corr: CorrelationSet, est: EstimationSet,
                     attack: AttackPrecoder | None) -> AsymptoticTerms:
    """Compute every large-array term of the attacked user's secrecy rate.

    The attack contribution inside ``Lambda_0m[l]`` uses the effective gain
    ``r_eff[l]`` of the link to BS ``l``, the same gain that enters the
    estimation filter of that cell. The attack part of ``eta`` uses the
    precoded eavesdropper signal ``P_e 1``.
    """
    L1, K, m = config.L + 1, config.K, config.m
    tau, N0, P = config.tau, config.N0, config.pilot_powers()
    P_E = 0.0 if attack is None else config.P_E
    r_eff = np.zeros(L1) if attack is None else attack.r_eff
    N_e = corr.N_e
    a = np.zeros(N_e, dtype=complex) if attack is None else attack.column_sum
    tr_hat = est.est_trace

    Lam = np.zeros(L1)
    eta = np.zeros((L1, N_e, N_e), dtype=complex)
    Q_l = np.zeros_like(eta)
    user_leak = np.zeros(L1)
    eve_leak = np.zeros(L1)
    tr_user = np.zeros(L1)
    C = est.filt[:, m].copy()
    for l in range(L1):
        Cl, R0, RE, Rr = C[l], corr.user_corr[0, m, l], corr.eve_tx[l], corr.eve_rx[l]
        tr_user[l] = htrace(R0)
        for k in range(K):
            if k == m:
                continue
            user_leak[l] += htrace(R0, est.est_cov[l, k]) / tr_hat[l, k]
            eve_leak[l] += htrace(RE, est.est_cov[l, k]) / tr_hat[l, k]
        # |h_0m^l^H h_hat_lm^l|^2
        M = Cl.conj().T @ R0 @ Cl
        lam = tau ** 2 * P[0, m] * abs(ctrace(Cl, R0)) ** 2 + tau * N0 * htrace(M)
        lam += tau ** 2 * sum(P[t, m] * htrace(M, corr.user_corr[t, m, l]) for t in range(1, L1))
        lam += tau ** 2 * P_E * r_eff[l] * htrace(M, RE)
        Lam[l] = lam
        # h_E,i^H h_hat h_hat^H h_E,j
        E = Cl.conj().T @ RE @ Cl
        s_pilot = sum(P[t, m] * htrace(E, corr.user_corr[t, m, l]) for t in range(L1))
        coh = abs(ctrace(Cl, RE)) ** 2
        Ra = Rr @ a
        eta_l = Rr * (tau ** 2 * s_pilot + N0 * tau * htrace(E))
        eta_l = eta_l + tau ** 2 * (P_E / N_e) * coh * np.outer(Ra, Ra.conj())
        eta[l] = 0.5 * (eta_l + eta_l.conj().T)
        Q_l[l] = Rr * htrace(RE) - Rr * eve_leak[l] - eta[l] / tr_hat[l, m]

    Rh0 = est.est_cov[0, m]
    t0 = tr_hat[0, m]
    theta_m = t0 + htrace(corr.user_corr[0, m, 0] - Rh0, Rh0) / t0
    lam_ratio = Lam / tr_hat[:, m]
    theta_bp = user_leak.sum() + lam_ratio[1:].sum()
    theta_bq = tr_user.sum() - user_leak.sum() - lam_ratio.sum()
    theta_e_tilde = float(np.real(np.trace(eta[0]))) / t0
    if theta_e_tilde < -1e-9 * max(1.0, abs(theta_m)):
        raise ArithmeticError(f"theta_e_tilde = {theta_e_tilde} < 0")
    return AsymptoticTerms(
        theta_m=float(theta_m), theta_bp=float(theta_bp), theta_bq=float(theta_bq),
        Lambda_0m=Lam, C=C, eta=eta, Q_l=Q_l, theta_e_tilde=max(theta_e_tilde, 0.0),
        est_trace_m=tr_hat[:, m].copy(), user_leak=user_leak, eve_leak=eve_leak,
        tr_user=tr_user, K=K, N_t=config.N_t,
    )


def asymptotic_secrecy_rate(terms: AsymptoticTerms, split: PowerSplit, gamma: float) -> SecrecyResult:
    """Large-array secrecy rate for the MF-AN design with the given split."""
    ru = np.log2(1.0 + terms.sinr_user(split, gamma))
    ce = np.log2(1.0 + terms.sinr_eve(split, gamma))
    return SecrecyResult.from_rates(ru, ce, "asymptotic")


def prepare(config: SystemConfig, corr: CorrelationSet, attack: AttackPrecoder | None = None):
    """Attack precoder, estimation set and large-array terms for a configuration."""
    if attack is None and config.P_E > 0:
        attack = attack_precoder(corr.eve_rx, config.N_e)
    est = estimate_covariances(config, corr, attack)
    return attack, est, asymptotic_terms(config, corr, est, attack)


@dataclass(frozen=True)
class GammaThreshold:
    """SNR above which the no-AN secrecy-rate ratio decreases.

    ``raw`` is the larger root of the derivative numerator in the variable
    ``x = gamma / K`` (the per-user SNR with ``p = 1/K``); ``gamma_th`` is the
    same point on the ``gamma`` axis, ``K * raw``. ``discriminant < 0``
    means the ratio decreases for every positive SNR, and ``gamma_th`` is
    then reported as 0.
    """

    gamma_th: float
    raw: float
    discriminant: float


def no_an_ratio(terms: AsymptoticTerms, gamma, K: int, theta_e_tilde: float | None = None):
    """``(1 + SINR_user)/(1 + SINR_eve)`` with ``p = 1/K``, ``q = 0``."""
    x = np.asarray(gamma, dtype=float) / K
    te = terms.theta_e_tilde if theta_e_tilde is None else theta_e_tilde
    b, a = terms.theta_bp, terms.theta_bp + terms.theta_m
    return (a * x + 1.0) / ((b * x + 1.0) * (te * x + 1.0))


def gamma_threshold(terms: AsymptoticTerms, K: int, N_t: int | None = None) -> GammaThreshold:
    """Threshold SNR beyond which the secrecy rate without AN decreases in SNR."""
    b, c, tm = terms.theta_bp, terms.theta_e_tilde, terms.theta_m
    a = b + tm
    if b * c == 0:
        raise DegenerateThresholdError("theta_bp * theta_e_tilde = 0")
    disc = (b * c) ** 2 + a * (tm - c) * b * c
    if disc < 0:
        return GammaThreshold(0.0, float("nan"), float(disc))
    raw = (-b * c + np.sqrt(disc)) / (a * b * c)
    return GammaThreshold(float(K * raw), float(raw), float(disc))


def statistically_orthogonal(config: SystemConfig, corr: CorrelationSet, tol: float | None = None) -> bool:
    """True when ``sum_t tr(R_tm^l R_ET^l)`` vanishes for every cell."""
    tol = 1e-8 * config.N_t if tol is None else tol
    m = config.m
    for l in range(config.L + 1):
        s = sum(abs(htrace(corr.user_corr[t, m, l], corr.eve_tx[l])) for t in range(config.L + 1))
        if s > tol:
            return False
    return True


def orthogonal_rate(config: SystemConfig, corr_orth: CorrelationSet, split: PowerSplit,
                    gamma: float) -> SecrecyResult:
    """Secrecy rate when the user and eavesdropper correlations are orthogonal.

    The eavesdropper capacity is zero and the user rate is the attack-free
    large-array rate.
    """
    if not statistically_orthogonal(config, corr_orth):
        raise InvalidInputError("user and eavesdropper correlations are not orthogonal")
    est = estimate_covariances(config, corr_orth, None)
    terms = asymptotic_terms(config, corr_orth, est, None)
    ru = np.log2(1.0 + terms.sinr_user(split, gamma))
    return SecrecyResult.from_rates(ru, 0.0, "asymptotic")


@dataclass
class SingleAntennaTerms:
    """Single-antenna eavesdropper specialization used for power allocation.

    The ratio ``(1 + SINR_user)/(1 + SINR_eve)`` with
    ``q = (1 - K p)/(N_t - K)`` equals
    ``(a1 p^2 + b1 p + c1)/(a2 p^2 + b2 p + c2)``.
    """

    theta_m: float
    theta_bp: float
    theta_bq: float
    theta_ee: float
    theta_eq: float
    Lambda_E: np.ndarray
    gamma: float
    K: int
    N_t: int
    poly: tuple = field(default=())
    p1: float = float("nan")
    p2: float = float("nan")

    def ratio(self, p):
        a1, b1, c1, a2, b2, c2 = self.poly
        p = np.asarray(p, dtype=float)
        return (a1 * p ** 2 + b1 * p + c1) / (a2 * p ** 2 + b2 * p + c2)

    def rate(self, p):
        """Clipped secrecy rate as a function of ``p``."""
        return np.maximum(0.0, np.log2(self.ratio(p)))

    def at_gamma(self, gamma: float) -> "SingleAntennaTerms":
        """Same statistics at another SNR."""
        return _with_poly(SingleAntennaTerms(self.theta_m, self.theta_bp, self.theta_bq, self.theta_ee,
                                             self.theta_eq, self.Lambda_E, float(gamma), self.K, self.N_t))


def ratio_coefficients(theta_m, theta_bp, theta_bq, theta_ee, theta_eq, gamma, K, N_t):
    """Coefficients ``(a1, b1, c1, a2, b2, c2)`` of the secrecy ratio in ``p``."""
    D = N_t - K
    A = gamma * theta_bq + D
    B = gamma * theta_eq + D
    u = D * theta_m + D * theta_bp - K * theta_bq
    v = D * theta_bp - K * theta_bq
    w = D * theta_ee - K * theta_eq
    a1 = -gamma ** 2 * u * K * theta_eq
    b1 = gamma * u * B - gamma * A * K * theta_eq
    a2 = gamma ** 2 * v * w
    b2 = gamma * A * w + gamma * v * B
    c = A * B
    return a1, b1, c, a2, b2, c


def _with_poly(sat: SingleAntennaTerms) -> SingleAntennaTerms:
    sat.poly = ratio_coefficients(sat.theta_m, sat.theta_bp, sat.theta_bq, sat.theta_ee, sat.theta_eq,
                                  sat.gamma, sat.K, sat.N_t)
    a1, b1, c1, a2, b2, c2 = sat.poly
    assert c1 == c2
    A2, B2, C2 = a1 * b2 - a2 * b1, a1 * c2 - a2 * c1, b1 * c2 - b2 * c1
    disc = B2 ** 2 - A2 * C2
    if A2 != 0 and disc >= 0:
        sq = np.sqrt(disc)
        sat.p1, sat.p2 = (-B2 - sq) / A2, (-B2 + sq) / A2
    else:
        sat.p1 = sat.p2 = float("nan")
    return sat


def single_antenna_terms(config: SystemConfig, corr: CorrelationSet, est: EstimationSet,
                         attack: AttackPrecoder | None, gamma: float,
                         terms: AsymptoticTerms | None = None) -> SingleAntennaTerms:
    """Single-antenna eavesdropper terms and ratio coefficients.

    ``Lambda_E[l]`` is the large-array value of ``|h_E^l^H h_hat_lm^l|^2``
    including the scalar receive gain ``r_l = R_ER^l`` of the link, and
    ``theta_eq = sum_l (r_l tr R_ET^l - r_l sum_{k != m} tr(R_ET^l R_hat_lk)/tr R_hat_lk
    - Lambda_E[l]/tr R_hat_lm)``. With ``r_l = 1`` these are the textbook
    single-antenna forms.
    """
    if corr.N_e != 1:
        raise WrongSpecializationError("single-antenna terms need N_e = 1")
    if terms is None:
        terms = asymptotic_terms(config, corr, est, attack)
    L1, K, m = config.L + 1, config.K, config.m
    tau, N0, P = config.tau, config.N0, config.pilot_powers()
    P_E = 0.0 if attack is None else config.P_E
    Lam = np.zeros(L1)
    theta_eq = 0.0
    for l in range(L1):
        C = est.filt[l, m]
        RE = corr.eve_tx[l]
        r = float(np.real(corr.eve_rx[l][0, 0]))
        CRE = C @ RE
        lam = tau ** 2 * P_E * r ** 2 * abs(np.trace(CRE)) ** 2
        CCh = C @ C.conj().T
        lam += r * tau * N0 * float(np.real(np.sum(RE.T * CCh)))
        for t in range(L1):
            X = C @ corr.user_corr[t, m, l] @ C.conj().T
            lam += r * tau ** 2 * P[t, m] * float(np.real(np.sum(RE.T * X)))
        Lam[l] = lam
        leak = sum(float(np.real(np.sum(RE.T * est.est_cov[l, k]))) / est.est_trace[l, k]
                   for k in range(K) if k != m)
        theta_eq += r * float(np.real(np.trace(RE))) - r * leak - lam / est.est_trace[l, m]
    sat = SingleAntennaTerms(terms.theta_m, terms.theta_bp, terms.theta_bq,
                             Lam[0] / est.est_trace[0, m], theta_eq, Lam, float(gamma), K, config.N_t)
    return _with_poly(sat)


@dataclass(frozen=True)
class PowerAllocation:
    """Closed-form optimal split and the rate it achieves.

    ``raw_roots`` are the stationary points of the ratio before intersecting
    with ``[0, 1/K]``; ``degenerate`` flags a vanishing quadratic coefficient.
    """

    p_star: float
    q_star: float
    rate: float
    candidates: tuple
    raw_roots: tuple
    degenerate: bool = False

    @property
    def split(self) -> PowerSplit:
        return PowerSplit(self.p_star, self.q_star)


def optimal_power_allocation(sat: SingleAntennaTerms, terms: AsymptoticTerms | None = None,
                             gamma: float | None = None, K: int | None = None,
                             N_t: int | None = None) -> PowerAllocation:
    """Maximize the single-antenna secrecy rate over ``p`` in ``[0, 1/K]``.

    The candidates are the interval endpoints and the stationary points of
    the ratio that fall inside it.
    """
    if gamma is not None and gamma != sat.gamma:
        sat = sat.at_gamma(gamma)
    K = sat.K if K is None else K
    N_t = sat.N_t if N_t is None else N_t
    a1, b1, c1, a2, b2, c2 = sat.poly
    A2, B2 = a1 * b2 - a2 * b1, a1 * c2 - a2 * c1
    pmax = 1.0 / K
    cands = [0.0, pmax]
    degenerate = False
    roots = (sat.p1, sat.p2)
    scale = max(abs(a1 * b2), abs(a2 * b1), np.finfo(float).tiny)
    if abs(A2) <= 1e-14 * scale:
        degenerate = True
        C2 = b1 * c2 - b2 * c1
        roots = (-C2 / (2 * B2),) if B2 != 0 else ()
    for r in roots:
        if np.isfinite(r) and 0.0 <= r <= pmax:
            cands.append(float(r))
    vals = [float(np.log2(sat.ratio(p))) for p in cands]
    best = int(np.argmax(vals))
    p_star = cands[best]
    split = PowerSplit.from_p(p_star, K, N_t)
    return PowerAllocation(split.p, split.q, max(0.0, vals[best]), tuple(cands), tuple(roots), degenerate)


@dataclass(frozen=True)
class FeasibilityBound:
    """Condition on ``p`` for a positive single-antenna secrecy rate.

    ``direction`` is ``"above"`` (need ``p > bound``), ``"below"`` (need
    ``p < bound``), ``"all"`` or ``"none"``; the last two only occur when
    ``a1 = a2``.
    """

    direction: str
    bound: float
    degenerate: bool

    def feasible(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.direction == "above":
            ok = p > self.bound
        elif self.direction == "below":
            ok = p < self.bound
        else:
            ok = np.full(p.shape, self.direction == "all")
        return ok & (p > 0)


def secrecy_feasible_power(sat: SingleAntennaTerms) -> FeasibilityBound:
    """Feasibility region of ``p`` from ``(a1 - a2) p + (b1 - b2) > 0``."""
    a1, b1, _, a2, b2, _ = sat.poly
    da, db = a1 - a2, b1 - b2
    if da == 0:
        return FeasibilityBound("all" if db > 0 else "none", float("nan"), True)
    return FeasibilityBound("above" if da > 0 else "below", -db / da, False)


@dataclass(frozen=True)
class NullSpaceTerms:
    """Large-array terms of the NS design (attack independent)."""

    theta_m_null: float
    theta_bp_null: float
    Lambda_null: np.ndarray
    est_trace_null: np.ndarray
    K: int

    def rate(self, gamma: float) -> float:
        a5 = (self.theta_bp_null + self.theta_m_null) / self.K
        a6 = self.theta_bp_null / self.K
        return float(np.log2((a5 * gamma + 1.0) / (a6 * gamma + 1.0)))


def ns_asymptotic_terms(config: SystemConfig, corr: CorrelationSet, ns: NullSpaceSet,
                        est: EstimationSet | None = None) -> NullSpaceTerms:
    """Large-array terms of the NS design.

    User ``m`` is served by the projected MF precoder in every cell; the
    leakage of cell ``l``'s NS beam into the reference user is evaluated in
    the projected domain of that cell. Other users keep their MF precoders.
    """
    if est is None:
        est = estimate_covariances(config, corr, None, check=False)
    L1, K, m = config.L + 1, config.K, config.m
    tau, N0, P = config.tau, config.N0, config.pilot_powers()
    Lam = np.zeros(L1)
    tr_null = ns.est_trace
    for l in range(L1):
        C = ns.filt[l]
        R0 = ns.user_corr[l][0, m]
        M = C.conj().T @ R0 @ C
        lam = tau ** 2 * P[0, m] * abs(ctrace(C, R0)) ** 2 + tau * N0 * htrace(M)
        lam += tau ** 2 * sum(P[t, m] * htrace(M, ns.user_corr[l][t, m]) for t in range(1, L1))
        Lam[l] = lam
    leak = 0.0
    for l in range(L1):
        for k in range(K):
            if k != m:
                leak += htrace(corr.user_corr[0, m, l], est.est_cov[l, k]) / est.est_trace[l, k]
    Rn, Rh = ns.user_corr[0][0, m], ns.est_cov[0]
    theta_m = tr_null[0] + htrace(Rn - Rh, Rh) / tr_null[0]
    theta_bp = leak + float(np.sum(Lam[1:] / tr_null[1:]))
    return NullSpaceTerms(float(theta_m), float(theta_bp), Lam, tr_null, K)


def ns_asymptotic_rate(config: SystemConfig, corr: CorrelationSet, eigen_tol: float | None = None,
                       gamma: float | None = None, ns: NullSpaceSet | None = None) -> SecrecyResult:
    """Large-array secrecy rate of the NS design (eavesdropper capacity zero)."""
    gamma = config.gamma if gamma is None else gamma
    if ns is None:
        ns = ns_project(corr, config, eigen_tol)
    r = ns_asymptotic_terms(config, corr, ns).rate(gamma)
    return SecrecyResult.from_rates(r, 0.0, "asymptotic")


@dataclass(frozen=True)
class SwitchTerms:
    """Quantities deciding between optimally split MF-AN and NS.

    ``beta_of_gamma = 1`` means NS has the higher large-array secrecy rate.
    ``roots`` are the roots of ``a7 g^2 + b7 g + c7`` with the coefficients
    frozen at the current SNR; ``gamma_t1 <= gamma_t2`` are the fixed points
    of those roots viewed as functions of the SNR. ``method`` records how
    ``beta`` was decided (``"fixed_point"`` or ``"direct"``) and
    ``beta_direct`` is the plain rate comparison.
    """

    a3: float
    b3: float
    a4: float
    b4: float
    a5: float
    a6: float
    a7: float
    b7: float
    c7: float
    Delta: float
    gamma_t1: float
    gamma_t2: float
    roots: tuple
    beta_of_gamma: int
    beta_direct: int
    method: str
    rate_mfan: float
    rate_ns: float
    p_star: float


def _switch_coefficients(sat: SingleAntennaTerms, nst: NullSpaceTerms, gamma: float):
    alloc = optimal_power_allocation(sat.at_gamma(gamma))
    p, q = alloc.p_star, alloc.q_star
    tm, tbp, tbq, tee, teq = sat.theta_m, sat.theta_bp, sat.theta_bq, sat.theta_ee, sat.theta_eq
    X = p * tbp + q * tbq + p * tm
    a3, b3 = q * teq * X, q * teq + X
    a4 = (p * tbp + q * tbq) * (p * tee + q * teq)
    b4 = p * tbp + q * tbq + p * tee + q * teq
    a5 = (nst.theta_bp_null + nst.theta_m_null) / sat.K
    a6 = nst.theta_bp_null / sat.K
    a7 = a3 * a6 - a4 * a5
    b7 = a6 * b3 + a3 - a5 * b4 - a4
    c7 = a6 + b3 - a5 - b4
    return dict(a3=a3, b3=b3, a4=a4, b4=b4, a5=a5, a6=a6, a7=a7, b7=b7, c7=c7,
                Delta=b7 ** 2 - 4 * a7 * c7, alloc=alloc)


def _quadratic_roots(a, b, c):
    d = b * b - 4 * a * c
    if a == 0 or d < 0:
        return None
    s = np.sqrt(d)
    r = sorted(((-b - s) / (2 * a), (-b + s) / (2 * a)))
    return r[0], r[1]


def _fixed_point(sat, nst, gamma0, which, damping=0.5, tol=1e-8, max_iter=500):
    g = gamma0
    for _ in range(max_iter):
        c = _switch_coefficients(sat, nst, g)
        r = _quadratic_roots(c["a7"], c["b7"], c["c7"])
        if r is None or r[which] <= 0:
            raise FixedPointError("roots left the positive real axis", g)
        g_new = (1 - damping) * g + damping * r[which]
        if abs(g_new - g) <= tol * max(1.0, abs(g)):
            return g_new
        g = g_new
    raise FixedPointError("no convergence", g)


def design_switch(sat: SingleAntennaTerms, terms: AsymptoticTerms | None, ns_terms: NullSpaceTerms,
                  gamma: float, K: int | None = None) -> SwitchTerms:
    """Decide whether NS beats optimally split MF-AN at SNR ``gamma``.

    MF-AN is at least as good as NS exactly when
    ``a7 g^2 + b7 g + c7 >= 0``. ``beta`` follows the sign pattern of this
    quadratic on the SNR axis, using the fixed points of its roots as the
    switching SNRs when they exist; otherwise the direct rate comparison
    is used.
    """
    sat = sat.at_gamma(gamma)
    c = _switch_coefficients(sat, ns_terms, gamma)
    alloc = c["alloc"]
    r_mfan, r_ns = alloc.rate, max(0.0, ns_terms.rate(gamma))
    beta_direct = int(r_ns > r_mfan)
    a7, b7, c7, Delta = c["a7"], c["b7"], c["c7"], c["Delta"]
    roots = _quadratic_roots(a7, b7, c7) or ()
    scale = max(abs(c["a3"] * c["a6"]), abs(c["a4"] * c["a5"]), np.finfo(float).tiny)
    g1 = g2 = float("nan")
    method = "fixed_point"
    if abs(a7) <= 1e-14 * scale:
        beta, method = beta_direct, "direct"
    elif Delta < 0:
        beta = int(a7 < 0)
    else:
        try:
            g1 = _fixed_point(sat, ns_terms, gamma, 0) if roots[0] > 0 else roots[0]
            g2 = _fixed_point(sat, ns_terms, gamma, 1) if roots[1] > 0 else roots[1]
            if g1 > g2:
                g1, g2 = g2, g1
            inside = g1 < gamma < g2
            beta = int(inside) if a7 > 0 else int(not inside and gamma != g1 and gamma != g2)
        except FixedPointError:
            beta, method = beta_direct, "direct"
    return SwitchTerms(c["a3"], c["b3"], c["a4"], c["b4"], c["a5"], c["a6"], a7, b7, c7, Delta,
                       float(g1), float(g2), tuple(roots), int(beta), beta_direct, method,
                       float(r_mfan), float(r_ns), alloc.p_star)


@dataclass(frozen=True)
class SingleUserTerms:
    """Single-cell, single-user quantities deciding whether secrecy is possible.

    ``S``, ``X``, ``Y`` and ``T`` are the large-array pieces with
    ``SINR_user = p g S/(q g X + T)`` and ``SINR_eve = p g Lambda/(q g Y + T)``;
    ``eta1 = S Y - Lambda X`` and ``eta2 = (S - Lambda) T``.
    """

    eta1: float
    eta2: float
    Lambda: float
    Omega: np.ndarray
    S: float
    X: float
    Y: float
    T: float
    beta01: float
    betaE: float
    N_t: int

    def sinr_user(self, p, gamma):
        q = (1.0 - p) / (self.N_t - 1)
        return p * gamma * self.S / (q * gamma * self.X + self.T)

    def sinr_eve(self, p, gamma):
        q = (1.0 - p) / (self.N_t - 1)
        return p * gamma * self.Lambda / (q * gamma * self.Y + self.T)

    def predicate(self, p, gamma) -> bool:
        """True when ``SINR_user > SINR_eve`` at signal share ``p``.

        With ``K = 1`` the AN share is ``q = (1 - p)/(N_t - 1)``, so the
        condition reads ``(p - 1) gamma eta1 / (N_t - 1) < eta2``.
        """
        return bool((p - 1.0) * gamma * self.eta1 / (self.N_t - 1) < self.eta2)


def single_user_condition(config: SystemConfig, corr: CorrelationSet) -> SingleUserTerms:
    """Secrecy condition for one cell, one user and a single-antenna eavesdropper."""
    if config.L != 0 or config.K != 1 or corr.N_e != 1:
        raise WrongSpecializationError("needs L = 0, K = 1, N_e = 1")
    tau, N0 = config.tau, config.N0
    P = float(config.pilot_powers()[0, 0])
    P_E = config.P_E
    R, RE = corr.user_corr[0, 0, 0], corr.eve_tx[0]
    r = float(np.real(corr.eve_rx[0][0, 0]))
    N_t = R.shape[0]
    Psi = N0 * np.eye(N_t) + tau * (P * R + P_E * r * RE)
    Omega = solve(Psi, R, assume_a="pos").conj().T
    Rhat = tau * P * Omega @ R
    Rhat = 0.5 * (Rhat + Rhat.conj().T)
    OhREO = Omega.conj().T @ RE @ Omega
    Lam = (tau ** 2 * P ** 2 * r * htrace(OhREO, R) + tau ** 2 * P * P_E * r ** 2 * abs(ctrace(Omega, RE)) ** 2
           + tau * P * N0 * r * htrace(OhREO))
    T = htrace(Rhat)
    cross = htrace(R - Rhat, Rhat)
    S = T ** 2 + cross
    X = T * htrace(R - Rhat) - cross
    Y = r * htrace(RE) * T - Lam
    scale = max(abs(r * htrace(RE) * T), abs(Lam), 1.0)
    if Y < -1e-9 * scale:
        raise ArithmeticError(f"tr(R_ET) tr(R_hat) - Lambda = {Y} < 0")
    return SingleUserTerms(S * Y - Lam * X, (S - Lam) * T, Lam, Omega, S, X, Y, T,
                           htrace(R) / N_t, htrace(RE) / N_t, N_t)


@dataclass(frozen=True)
class IIDSign:
    """Sign of ``eta1`` for i.i.d. fading, from the leading-order closed form
    and, when ``N_t`` is small enough to build matrices, from the general
    expression."""

    sign: int
    eta1_closed: float
    eta1_general: float


def iid_sign_check(P01, beta01, PE, betaE, tau, N0, N_t, general: bool = True) -> IIDSign:
    """``eta1`` for ``R = beta01 I`` and ``R_ET = betaE I``.

    The leading-order value is ``N_t^4 (tau P01 beta01 + tau PE betaE + N0)(P01 beta01 - PE betaE)``,
    so its sign is the sign of ``P01 beta01 - PE betaE``.
    """
    closed = N_t ** 4 * (tau * P01 * beta01 + tau * PE * betaE + N0) * (P01 * beta01 - PE * betaE)
    gen_val = float("nan")
    if general:
        cfg = SystemConfig(L=0, K=1, N_t=int(N_t), N_e=1, tau=int(tau), pilot_power=P01, P_E=PE, N0=N0,
                           rho=1.0, corr_model="iid")
        eye = np.eye(int(N_t), dtype=complex)
        corr = CorrelationSet((beta01 * eye)[None, None, None], (betaE * eye)[None],
                              np.ones((1, 1, 1), dtype=complex))
        gen_val = single_user_condition(cfg, corr).eta1
    return IIDSign(int(np.sign(closed)), float(closed), float(gen_val))


def grid_best_split(terms: AsymptoticTerms, gamma: float, K: int, N_t: int, n: int = 2001):
    """Best MF-AN split by grid search over ``p`` in ``[0, 1/K]`` (any ``N_e``)."""
    ps = np.linspace(0.0, 1.0 / K, n)
    rates = [asymptotic_secrecy_rate(terms, PowerSplit.from_p(p, K, N_t), gamma).rate_secrecy for p in ps]
    i = int(np.argmax(rates))
    return PowerSplit.from_p(ps[i], K, N_t), float(rates[i])
