"""Monte Carlo estimation of the ergodic secrecy rate.

Each trial draws its channels and training noise from its own stream
``RngStream(seed, trial_index)``. Trials are processed in fixed-size chunks,
so the result does not depend on how many workers run the chunks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analysis import SecrecyResult
from .channel import ChannelRealization, CorrelationSet, SystemConfig, draw_channel_gaussians
from .downlink import DesignChoice, Precoders, effective_beams
from .numerics import InvalidInputError, RngStream, cgauss_array
from .uplink import (
    AttackPrecoder,
    EstimationSet,
    NullSpaceSet,
    PilotBook,
    attack_precoder,
    estimate_covariances,
    make_pilot_book,
    ns_project,
    training_from_parts,
)

CHUNK = 50
PILOT_STREAM = 2 ** 63
DEGENERATE_LIMIT = 0.01


class DataQualityError(RuntimeError):
    """Too many trials produced a zero channel estimate."""


@dataclass(frozen=True)
class TrialPlan:
    """Number of trials, seed, design and downlink SNR of one Monte Carlo run."""

    n_trials: int
    seed: int
    design: DesignChoice
    gamma: float

    def __post_init__(self):
        if self.n_trials < 1:
            raise InvalidInputError("n_trials must be positive")


def trial_sinr_user(realization: ChannelRealization, precoders: Precoders, design: DesignChoice,
                    gamma: float, m: int = 0) -> float:
    """SINR of user ``m`` in cell 0 for one realization.

    Sums, over every cell ``l``, the MF leakage of all beams of cell ``l``
    (except the desired one) and the AN leakage ``||h_0m^l^H U_l||^2``.
    """
    K = precoders.w.shape[1]
    v = effective_beams(design, precoders.w.copy(), precoders.w_null, m)
    c_an = design.coefficients(K)[3]
    hh = realization.user_chan[0, m]
    g = np.einsum("ln,lkn->lk", hh.conj(), v)
    sig = gamma * abs(g[0, m]) ** 2
    interf = gamma * (np.sum(np.abs(g) ** 2) - abs(g[0, m]) ** 2)
    an = 0.0
    if c_an > 0:
        an = c_an ** 2 * gamma * sum(np.linalg.norm(precoders.U[l] @ hh[l]) ** 2 for l in range(len(hh)))
    return float(sig / (interf + an + 1.0))


def trial_cap_eve(realization: ChannelRealization, precoders: Precoders, design: DesignChoice,
                  gamma: float, m: int = 0) -> float:
    """Eavesdropper capacity ``log2(1 + g v^H H_E^0 Q^-1 H_E^0^H v)`` for one realization.

    ``Q = c_an^2 g sum_l H_E^l^H U_l U_l^H H_E^l + I``: the eavesdropper knows
    its channels and cancels the other users' signals.
    """
    K = precoders.w.shape[1]
    v = effective_beams(design, precoders.w.copy(), precoders.w_null, m)[0, m]
    c_an = design.coefficients(K)[3]
    H = realization.eve_chan
    N_e = H.shape[-1]
    Q = np.eye(N_e, dtype=complex)
    if c_an > 0:
        for l in range(H.shape[0]):
            UH = precoders.U[l] @ H[l]
            Q += c_an ** 2 * gamma * UH.conj().T @ UH
    b = H[0].conj().T @ v
    s = float(np.real(b.conj() @ np.linalg.solve(Q, b)))
    return float(np.log2(1.0 + gamma * s))


@dataclass
class Setup:
    """Realization-independent inputs shared by every trial."""

    config: SystemConfig
    corr: CorrelationSet
    attack: AttackPrecoder | None
    est: EstimationSet
    pilots: PilotBook
    ns: NullSpaceSet | None


def make_setup(config: SystemConfig, corr: CorrelationSet, seed: int, need_ns: bool = False,
               attack: AttackPrecoder | None = None, est: EstimationSet | None = None,
               ns: NullSpaceSet | None = None) -> Setup:
    if attack is None and config.P_E > 0:
        attack = attack_precoder(corr.eve_rx, config.N_e)
    if est is None:
        est = estimate_covariances(config, corr, attack)
    if need_ns and ns is None:
        ns = ns_project(corr, config)
    pilots = make_pilot_book(config.K, config.tau, RngStream(seed, PILOT_STREAM))
    return Setup(config, corr, attack, est, pilots, ns)


def _chunk(setup: Setup, designs, gamma: float, seed: int, start: int, stop: int):
    cfg, corr = setup.config, setup.corr
    L1, K, N, N_e, m, tau = cfg.L + 1, cfg.K, cfg.N_t, corr.N_e, cfg.m, cfg.tau
    B = stop - start
    g = np.empty((B, L1, K, L1, N), dtype=complex)
    G = np.empty((B, L1, N, N_e), dtype=complex)
    noise = np.empty((B, L1, N, tau), dtype=complex)
    for i in range(B):
        gen = RngStream(seed, start + i).generator()
        g[i], G[i] = draw_channel_gaussians(gen, L1, K, N, N_e)
        noise[i] = cgauss_array(gen, (L1, N, tau))

    su, st, sr = corr.sqrt_factors()
    T = L1 * K * L1
    h = su.reshape(T, N, N) @ g.reshape(B, T, N).transpose(1, 2, 0)
    h = h.transpose(2, 0, 1).reshape(B, L1, K, L1, N)
    HE = st @ G.transpose(1, 2, 0, 3).reshape(L1, N, B * N_e)
    HE = HE.reshape(L1, N, B, N_e).transpose(2, 0, 1, 3) @ sr
    y = training_from_parts(cfg, setup.pilots, setup.attack, h, HE, noise)

    filt = setup.est.filt.reshape(L1 * K, N, N)
    hhat = filt @ y.reshape(B, L1 * K, N).transpose(1, 2, 0)
    hhat = hhat.transpose(2, 0, 1).reshape(B, L1, K, N)
    norms = np.linalg.norm(hhat, axis=-1)
    bad = np.any(norms <= 1e-300, axis=(1, 2))
    w = hhat / np.where(norms > 1e-300, norms, 1.0)[..., None]

    w_null = None
    if any(d.uses_null_space for d in designs):
        if setup.ns is None:
            raise InvalidInputError("null-space design requested without a null-space set")
        w_null = np.empty((B, L1, N), dtype=complex)
        for l in range(L1):
            V = setup.ns.V[l]
            hn = setup.ns.filt[l] @ (V.conj().T @ y[:, l, m].T)
            nn = np.linalg.norm(hn, axis=0)
            bad |= nn <= 1e-300
            w_null[:, l] = (V @ (hn / np.where(nn > 1e-300, nn, 1.0))).T

    tr = setup.est.est_trace
    hh = h[:, 0, m]
    # ||U_l h||^2 and U_l H_E^l with U_l = I - Hhat_l diag(1/tr) Hhat_l^H
    coef = np.einsum("blkn,bln->blk", hhat.conj(), hh) / tr[None]
    Uh = hh - np.einsum("blkn,blk->bln", hhat, coef)
    an_user = np.sum(np.abs(Uh) ** 2, axis=(1, 2))
    coefE = np.einsum("blkn,blne->blke", hhat.conj(), HE) / tr[None, :, :, None]
    UHE = HE - np.einsum("blkn,blke->blne", hhat, coefE)
    QE = np.einsum("blne,blnf->bef", UHE.conj(), UHE)

    ru = np.empty((len(designs), B))
    ce = np.empty((len(designs), B))
    eye = np.eye(N_e)
    for j, d in enumerate(designs):
        v = effective_beams(d, w.copy(), w_null, m)
        c_an = d.coefficients(K)[3]
        gl = np.einsum("bln,blkn->blk", hh.conj(), v)
        p_all = np.abs(gl) ** 2
        sig = gamma * p_all[:, 0, m]
        interf = gamma * (p_all.sum(axis=(1, 2)) - p_all[:, 0, m])
        an = c_an ** 2 * gamma * an_user
        ru[j] = np.log2(1.0 + sig / (interf + an + 1.0))
        b = np.einsum("bne,bn->be", HE[:, 0].conj(), v[:, 0, m])
        Q = eye[None] + c_an ** 2 * gamma * QE
        s = np.real(np.einsum("be,be->b", b.conj(), np.linalg.solve(Q, b[..., None])[..., 0]))
        ce[j] = np.log2(1.0 + gamma * s)
    return ru, ce, bad


def run_many(designs, gamma: float, n_trials: int, seed: int, setup: Setup, workers: int = 1):
    """Evaluate several designs on the same trials (common random numbers).

    Returns one ``SecrecyResult`` per design. The per-trial secrecy gap is
    averaged before clipping at zero, and the confidence halfwidth is
    ``1.96 * std / sqrt(n)`` of the per-trial gap.
    """
    designs = list(designs)
    cfg = setup.config
    for d in designs:
        d.validate(cfg.K, cfg.N_t)
    if n_trials < 1:
        raise InvalidInputError("n_trials must be positive")
    bounds = [(s, min(s + CHUNK, n_trials)) for s in range(0, n_trials, CHUNK)]
    job = lambda b: _chunk(setup, designs, gamma, seed, *b)
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(job, bounds))
    else:
        parts = [job(b) for b in bounds]
    ru = np.concatenate([p[0] for p in parts], axis=1)
    ce = np.concatenate([p[1] for p in parts], axis=1)
    bad = np.concatenate([p[2] for p in parts])
    n_bad = int(bad.sum())
    if n_bad > DEGENERATE_LIMIT * n_trials:
        raise DataQualityError(f"{n_bad} of {n_trials} trials had a zero channel estimate")
    keep = ~bad
    n = int(keep.sum())
    out = []
    for j in range(len(designs)):
        diff = ru[j, keep] - ce[j, keep]
        ci = 1.96 * diff.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
        out.append(SecrecyResult.from_rates(ru[j, keep].mean(), ce[j, keep].mean(), "monte_carlo", ci,
                                            n_trials=n, n_degenerate=n_bad))
    return out


def run(plan: TrialPlan, config: SystemConfig, corr: CorrelationSet, workers: int = 1,
        setup: Setup | None = None) -> SecrecyResult:
    """Monte Carlo secrecy rate of ``plan.design`` at SNR ``plan.gamma``."""
    if setup is None:
        setup = make_setup(config, corr, plan.seed, need_ns=plan.design.uses_null_space)
    return run_many([plan.design], plan.gamma, plan.n_trials, plan.seed, setup, workers)[0]
