import numpy as np
import pytest

from secmimo.channel import ChannelRealization, CorrelationSet, SystemConfig, sample_realization
from secmimo.numerics import InvalidInputError, RngStream, cgauss_array, htrace
from secmimo.uplink import (
    EmptyNullSpaceError,
    InfeasiblePilotsError,
    TrainingObservation,
    attack_objective,
    attack_precoder,
    build_training_observation,
    estimate_covariances,
    estimate_realization,
    make_pilot_book,
    ns_project,
    random_feasible_precoder,
    training_from_parts,
)

from conftest import random_psd


def single_cell(N, R, RE=None, N_e=1, **kw):
    cfg = SystemConfig(L=0, K=1, N_t=N, N_e=N_e, tau=kw.pop("tau", 10), **kw)
    RE = np.eye(N) if RE is None else RE
    corr = CorrelationSet(np.asarray(R, complex)[None, None, None], np.asarray(RE, complex)[None],
                          np.eye(N_e, dtype=complex)[None])
    return cfg, corr


def test_pilots_orthogonal():
    book = make_pilot_book(5, 10, RngStream(0))
    G = book.pilots.conj().T @ book.pilots
    assert np.max(np.abs(G - 10 * np.eye(5))) < 1e-10
    again = make_pilot_book(5, 10, RngStream(0))
    assert np.array_equal(book.pilots, again.pilots)


def test_pilot_single():
    book = make_pilot_book(1, 1, RngStream(3))
    assert np.isclose(abs(book.pilots[0, 0]), 1.0)


def test_pilots_infeasible():
    with pytest.raises(InfeasiblePilotsError):
        make_pilot_book(3, 2, RngStream(0))


def test_attack_diag():
    att = attack_precoder(np.diag([2.0, 1.0]), 2)
    assert np.allclose(np.abs(att.u_e), [1, 0])
    assert np.isclose(attack_objective(att.P_e, np.diag([2.0, 1.0])), 4.0)
    assert np.allclose(att.column_sum, np.sqrt(2) * att.u_e)


def test_attack_identity_any_direction():
    att = attack_precoder(np.eye(3), 3)
    assert np.isclose(attack_objective(att.P_e, np.eye(3)), 3.0)


def test_attack_beats_random(gen):
    R = random_psd(gen, 2)
    att = attack_precoder(R, 2)
    best = attack_objective(att.P_e, R)
    others = [attack_objective(random_feasible_precoder(gen, 2), R) for _ in range(10000)]
    assert best >= max(others) - 1e-12
    assert np.isclose(best, 2 * np.linalg.eigvalsh(R).max(), rtol=1e-12)


def test_attack_custom_power_check():
    with pytest.raises(InvalidInputError):
        attack_precoder(np.eye(2), 2, mode="custom", P_e=np.eye(2) * 2)
    att = attack_precoder(np.eye(2), 2, mode="custom", P_e=np.eye(2))
    assert np.isclose(att.r_eff[0], 1.0)


def test_mmse_scalar_case():
    cfg, corr = single_cell(4, np.eye(4), P_E=0.0)
    est = estimate_covariances(cfg, corr, None)
    assert np.allclose(est.est_cov[0, 0], 10 / 11 * np.eye(4))


def test_mmse_attack_monotone():
    g = np.random.default_rng(2)
    R = random_psd(g, 8, rank=4)
    R *= 8 / np.trace(R).real
    traces = []
    for PE in (0.0, 1.0, 10.0, 100.0):
        cfg, corr = single_cell(8, R, RE=R, P_E=PE)
        att = attack_precoder(corr.eve_rx, 1)
        traces.append(estimate_covariances(cfg, corr, att).est_trace[0, 0])
    assert all(a > b for a, b in zip(traces, traces[1:]))


def test_mmse_estimation_error_grows_with_attack_gain():
    g = np.random.default_rng(4)
    R = random_psd(g, 6)
    RE = random_psd(g, 6)
    errs = []
    for scale in (0.0, 0.5, 1.0, 2.0, 4.0):
        cfg, corr = single_cell(6, R, RE=RE, P_E=1.0)
        att = attack_precoder(corr.eve_rx * max(scale, 1e-12), 1)
        errs.append(np.trace(estimate_covariances(cfg, corr, att).err_cov[0, 0]).real)
    assert all(b >= a - 1e-12 for a, b in zip(errs, errs[1:]))


def test_mmse_orthogonal_attack_free():
    # user in the first half of the DFT basis, eavesdropper in the second
    N = 16
    F = np.fft.fft(np.eye(N)) / np.sqrt(N)
    g = np.random.default_rng(1)
    A = F[:, :8] @ random_psd(g, 8) @ F[:, :8].conj().T
    B = F[:, 8:] @ random_psd(g, 8) @ F[:, 8:].conj().T
    cfg, corr = single_cell(N, A, RE=B, P_E=5.0)
    att = attack_precoder(corr.eve_rx, 1)
    Rh = estimate_covariances(cfg, corr, att).est_cov[0, 0]
    ref = 10 * A @ np.linalg.inv(np.eye(N) + 10 * A) @ A
    assert np.max(np.abs(Rh - ref)) < 1e-9


def test_estimate_invariants(small_cfg, small_corr):
    att = attack_precoder(small_corr.eve_rx, small_cfg.N_e)
    est = estimate_covariances(small_cfg, small_corr, att)
    for l, k in np.ndindex(2, 2):
        R = small_corr.user_corr[l, k, l]
        assert np.linalg.eigvalsh(R - est.est_cov[l, k]).min() >= -1e-9 * np.linalg.eigvalsh(R).max()
        assert est.est_trace[l, k] <= np.trace(R).real + 1e-9
    assert np.all(att.r_eff >= 0)


def test_training_noiseless_single_user():
    N, tau = 6, 4
    cfg = SystemConfig(L=0, K=1, N_t=N, N_e=1, tau=tau, P_E=0.0, pilot_power=2.0)
    book = make_pilot_book(1, tau, RngStream(0))
    h = cgauss_array(np.random.default_rng(0), (1, 1, 1, N))
    y = training_from_parts(cfg, book, None, h, np.zeros((1, N, 1), complex), np.zeros((1, N, tau), complex))
    assert np.allclose(y[0, 0], np.sqrt(2.0) * tau * h[0, 0, 0])


def test_training_covariance_no_attack(small_cfg, small_corr):
    cfg = small_cfg.with_(P_E=0.0)
    book = make_pilot_book(cfg.K, cfg.tau, RngStream(0))
    gen = np.random.default_rng(9)
    n = 10000
    ys = np.empty((n, cfg.N_t), complex)
    for i in range(n):
        r = sample_realization(small_corr, gen)
        ys[i] = build_training_observation(cfg, book, r, None, gen).y[0, 1]
    S = ys.T @ ys.conj() / n
    P = cfg.pilot_powers()
    want = cfg.tau ** 2 * sum(P[t, 1] * small_corr.user_corr[t, 1, 0] for t in range(2)) \
        + cfg.tau * cfg.N0 * np.eye(cfg.N_t)
    assert np.linalg.norm(S - want) / np.linalg.norm(want) < 0.05


def test_training_attack_term_paired(small_cfg, small_corr):
    book = make_pilot_book(small_cfg.K, small_cfg.tau, RngStream(0))
    att = attack_precoder(small_corr.eve_rx, small_cfg.N_e)
    r = sample_realization(small_corr, RngStream(1))
    on = build_training_observation(small_cfg, book, r, att, RngStream(2)).y
    off = build_training_observation(small_cfg, book, r, None, RngStream(2)).y
    d = on - off
    m = small_cfg.m
    want = small_cfg.tau * np.sqrt(small_cfg.P_E / 2) * (r.eve_chan @ att.column_sum)
    assert np.allclose(d[:, m], want)
    others = [k for k in range(small_cfg.K) if k != m]
    assert np.allclose(d[:, others], 0, atol=1e-10)


def test_estimate_zero_observation(small_cfg, small_corr):
    est = estimate_covariances(small_cfg, small_corr, None)
    y = np.zeros((2, 2, small_cfg.N_t), complex)
    assert np.all(estimate_realization(est, y, (0, 1)) == 0)


def test_estimate_noise_limit():
    N = 5
    g = np.random.default_rng(3)
    R = random_psd(g, N)
    cfg, corr = single_cell(N, R, P_E=0.0, N0=1e-10)
    est = estimate_covariances(cfg, corr, None)
    h = g.standard_normal(N) + 1j * g.standard_normal(N)
    ytilde = np.sqrt(1.0) * cfg.tau * h
    hhat = estimate_realization(est, ytilde[None, None], (0, 0))
    assert np.allclose(hhat, h, atol=1e-6)


def test_estimate_provenance(small_cfg, small_corr):
    est = estimate_covariances(small_cfg, small_corr, None)
    obs = TrainingObservation(np.zeros((2, 2, small_cfg.N_t)), 1.0, np.ones(2))
    with pytest.raises(InvalidInputError):
        estimate_realization(est, obs, (0, 0))


def test_mmse_orthogonality_principle(small_cfg, small_corr):
    att = attack_precoder(small_corr.eve_rx, small_cfg.N_e)
    est = estimate_covariances(small_cfg, small_corr, att)
    book = make_pilot_book(small_cfg.K, small_cfg.tau, RngStream(0))
    gen = np.random.default_rng(5)
    n = 10000
    acc = np.zeros((small_cfg.N_t, small_cfg.N_t), complex)
    for _ in range(n):
        r = sample_realization(small_corr, gen)
        obs = build_training_observation(small_cfg, book, r, att, gen)
        hh = estimate_realization(est, obs, (0, 0))
        acc += np.outer(hh, (r.user_chan[0, 0, 0] - hh).conj())
    acc /= n
    assert np.linalg.norm(acc) / np.linalg.norm(small_corr.user_corr[0, 0, 0]) < 0.05


def test_ns_project_trivial_cases():
    N = 6
    cfg, corr = single_cell(N, np.eye(N), RE=np.zeros((N, N)))
    ns = ns_project(corr, cfg)
    assert ns.dims == [N]
    RE = np.zeros((N, N))
    RE[0, 0] = N
    cfg, corr = single_cell(N, np.eye(N), RE=RE)
    ns = ns_project(corr, cfg)
    assert ns.dims == [N - 1]
    assert np.allclose(ns.V[0][0], 0)


def test_ns_project_empty_wide_spread():
    cfg = SystemConfig(L=0, K=1, N_t=64, tau=1)
    from secmimo.channel import build_correlation_set
    corr = build_correlation_set(cfg, 0)
    with pytest.raises(EmptyNullSpaceError):
        ns_project(corr, cfg)


def test_ns_project_residual(narrow_cfg, narrow_corr):
    ns = ns_project(narrow_corr, narrow_cfg)
    for l, V in enumerate(ns.V):
        assert np.allclose(V.conj().T @ V, np.eye(V.shape[1]), atol=1e-10)
        assert np.linalg.eigvalsh(V.conj().T @ narrow_corr.eve_tx[l] @ V).max() < 1e-3


def test_ns_attack_independent(narrow_cfg, narrow_corr):
    ests = [ns_project(narrow_corr, narrow_cfg.with_(P_E=pe)).est_cov[0] for pe in (0.0, 1.0, 10.0)]
    assert np.allclose(ests[0], ests[1], atol=1e-12) and np.allclose(ests[0], ests[2], atol=1e-12)


def test_r_eff_formula(gen):
    R = random_psd(gen, 3)
    att = attack_precoder(np.stack([R, 0.5 * R]), 3)
    a = att.column_sum
    assert np.isclose(att.r_eff[0], (a.conj() @ R @ a).real / 3)
    assert np.isclose(att.r_eff[1], 0.5 * att.r_eff[0])
    assert np.isclose(htrace(np.outer(a, a.conj())), 3.0)
