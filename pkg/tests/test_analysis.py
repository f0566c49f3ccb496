import numpy as np
import pytest

from secmimo.analysis import (
    FeasibilityBound,
    NullSpaceTerms,
    SingleAntennaTerms,
    _with_poly,
    asymptotic_secrecy_rate,
    asymptotic_terms,
    design_switch,
    gamma_threshold,
    grid_best_split,
    iid_sign_check,
    no_an_ratio,
    ns_asymptotic_rate,
    ns_asymptotic_terms,
    optimal_power_allocation,
    orthogonal_rate,
    prepare,
    ratio_coefficients,
    secrecy_feasible_power,
    single_antenna_terms,
    single_user_condition,
    statistically_orthogonal,
)
from secmimo.channel import CorrelationSet, SystemConfig
from secmimo.downlink import PowerSplit
from secmimo.numerics import InvalidInputError
from secmimo.uplink import estimate_covariances, ns_project

from conftest import cached_corr, first_seed, orthogonal_corr, random_psd, random_small_config, random_unitary


@pytest.fixture(scope="module")
def paper_setup():
    cfg = SystemConfig(gamma=10 ** 0.2)
    seed = first_seed(cfg, "positive_mfan")
    corr = cached_corr(cfg, seed)
    return cfg, corr, prepare(cfg, corr)


def test_term_invariants(small_cfg, small_corr):
    att, est, t = prepare(small_cfg, small_corr)
    assert t.theta_m >= t.est_trace_0m > 0
    assert t.theta_bp >= 0 and t.theta_bq >= 0 and t.theta_e_tilde >= 0
    Q = t.Q_asy(0.01, 3.0)
    assert np.allclose(Q, Q.conj().T)
    assert np.linalg.eigvalsh(Q).min() >= 1 - 1e-12


def test_theta_m_scalar_reduction():
    N, tau, P, N0 = 16, 10, 2.0, 0.5
    cfg = SystemConfig(L=0, K=1, N_t=N, N_e=1, tau=tau, pilot_power=P, N0=N0, P_E=0.0)
    corr = CorrelationSet(np.eye(N, dtype=complex)[None, None, None], np.eye(N, dtype=complex)[None],
                          np.ones((1, 1, 1), complex))
    _, _, t = prepare(cfg, corr)
    assert np.isclose(t.theta_m, N * tau * P / (N0 + tau * P) + N0 / (N0 + tau * P), rtol=1e-12)


def test_eta_vanishes_under_orthogonality():
    cfg = SystemConfig(L=1, K=2, N_t=24, N_e=2, tau=2, P_E=3.0)
    corr = orthogonal_corr(np.random.default_rng(0), N_e=2)
    assert statistically_orthogonal(cfg, corr)
    _, _, t = prepare(cfg, corr)
    assert np.max(np.abs(t.eta)) < 1e-9


def test_rate_limits(small_cfg, small_corr):
    _, _, t = prepare(small_cfg, small_corr)
    assert asymptotic_secrecy_rate(t, PowerSplit.from_p(0.0, 2, 16), 10.0).rate_secrecy == 0.0
    r = asymptotic_secrecy_rate(t, PowerSplit.no_an(2), 1e-9)
    assert r.rate_user < 1e-6 and r.rate_secrecy < 1e-6


def test_rate_vs_p_unimodal(paper_setup):
    cfg, corr, (att, est, t) = paper_setup
    for db in (2.0, 4.0, 10.0):
        g = 10 ** (db / 10)
        ps = np.linspace(0, 0.2, 201)
        r = np.array([asymptotic_secrecy_rate(t, PowerSplit.from_p(p, 5, 128), g).rate_secrecy for p in ps])
        i = int(np.argmax(r))
        assert 0 < i < len(ps) - 1
        assert np.all(np.diff(r[: i + 1]) >= -1e-12)
        assert np.all(np.diff(r[i:]) <= 1e-12)


def test_gamma_threshold_numeric_root(small_cfg, small_corr):
    _, _, t = prepare(small_cfg.with_(N_e=1), small_corr.with_eve(eve_rx=small_corr.eve_rx[:, :1, :1]))
    gt = gamma_threshold(t, small_cfg.K)
    b, c, tm = t.theta_bp, t.theta_e_tilde, t.theta_m
    roots = np.roots([-(b + tm) * b * c, -2 * b * c, tm - c])
    real = roots[np.abs(roots.imag) < 1e-12].real
    if gt.discriminant >= 0:
        assert np.isclose(gt.raw, real.max(), rtol=1e-9)
    if gt.gamma_th > 0:
        r0 = no_an_ratio(t, gt.gamma_th, small_cfg.K)
        assert no_an_ratio(t, gt.gamma_th + 0.1, small_cfg.K) < r0


def test_gamma_threshold_equal_terms(small_cfg, small_corr):
    _, _, t = prepare(small_cfg, small_corr)
    t.theta_e_tilde = t.theta_m
    assert gamma_threshold(t, small_cfg.K).gamma_th == 0.0


def test_orthogonal_rate():
    gen = np.random.default_rng(4)
    corr = orthogonal_corr(gen)
    cfg = SystemConfig(L=1, K=2, N_t=24, N_e=1, tau=2)
    sp = PowerSplit.from_p(0.3, 2, 24)
    ref = orthogonal_rate(cfg, corr, sp, 5.0)
    for pe in (0.1, 1.0, 10.0):
        _, _, t = prepare(cfg.with_(P_E=pe), corr)
        assert abs(asymptotic_secrecy_rate(t, sp, 5.0).rate_secrecy - ref.rate_secrecy) < 1e-9
    _, _, t0 = prepare(cfg.with_(P_E=0.0), corr)
    assert abs(asymptotic_secrecy_rate(t0, sp, 5.0).rate_user - ref.rate_user) < 1e-12
    assert orthogonal_rate(cfg, corr, PowerSplit.no_an(2), 5.0).rate_secrecy > 0
    with pytest.raises(InvalidInputError):
        orthogonal_rate(cfg, cached_corr(cfg.with_(quad_points=8192), 0), sp, 5.0)


def test_single_antenna_consistency():
    gen = np.random.default_rng(7)
    for _ in range(5):
        cfg = random_small_config(gen)
        corr = cached_corr(cfg, int(gen.integers(1000)))
        att, est, t = prepare(cfg, corr)
        sat = single_antenna_terms(cfg, corr, est, att, cfg.gamma, t)
        a1, b1, c1, a2, b2, c2 = sat.poly
        assert c1 == c2
        # theta_eq is the scalar sum of the per-cell eavesdropper AN terms
        assert np.isclose(sat.theta_eq, np.real(t.Q_l.sum()), rtol=1e-9, atol=1e-9 * cfg.N_t)
        # no-AN ratio at p = 1/K
        K = cfg.K
        assert np.isclose(sat.ratio(1.0 / K), no_an_ratio(t, cfg.gamma, K), rtol=1e-9)
        # both eavesdropper SINR expressions
        for p in (0.0, 0.3 / K, 1.0 / K):
            sp = PowerSplit.from_p(p, K, cfg.N_t)
            g = cfg.gamma
            alt = p * g * sat.theta_ee / (sp.q * g * sat.theta_eq + 1)
            assert np.isclose(t.sinr_eve(sp, g), alt, rtol=1e-9, atol=1e-14)


def test_optimal_allocation_grid(paper_setup):
    cfg, corr, (att, est, t) = paper_setup
    for db in (-4.0, 2.0, 10.0):
        g = 10 ** (db / 10)
        sat = single_antenna_terms(cfg, corr, est, att, g, t)
        al = optimal_power_allocation(sat)
        ps = np.linspace(0, 0.2, 2001)
        r = [asymptotic_secrecy_rate(t, PowerSplit.from_p(p, 5, 128), g).rate_secrecy for p in ps]
        assert al.rate >= max(r) - 1e-9
    sat = single_antenna_terms(cfg, corr, est, att, 10 ** -0.4, t)
    al = optimal_power_allocation(sat)
    assert 0 < al.p_star < 0.2


def test_allocation_negative_discriminant():
    # no stationary point: the optimum is an endpoint of [0, 1/K]
    gen = np.random.default_rng(0)
    hits = 0
    for _ in range(400):
        th = 10 ** gen.uniform(-2, 2, 5)
        sat = _with_poly(SingleAntennaTerms(*th, np.zeros(1), float(10 ** gen.uniform(-1, 2)), 2, 16))
        if not np.isnan(sat.p1):
            continue
        hits += 1
        al = optimal_power_allocation(sat)
        assert al.p_star in (0.0, 0.5)
        ps = np.linspace(0, 0.5, 501)
        assert al.rate >= sat.rate(ps).max() - 1e-12
    assert hits > 0


def test_feasibility_footnote_cases():
    sat = _with_poly(SingleAntennaTerms(10.0, 1.0, 1.0, 1.0, 1.0, np.zeros(1), 1.0, 2, 16))
    a1, b1, c1, a2, b2, c2 = sat.poly
    sat.poly = (a2, b2 + 1.0, c1, a2, b2, c2)
    fb = secrecy_feasible_power(sat)
    assert fb.direction == "all" and fb.feasible([0.1, 0.5]).all()
    assert not FeasibilityBound("all", float("nan"), True).feasible(0.0)


def test_feasibility_bound_matches_discussion():
    # the quoted p < 0.15 at 2 dB sits inside the spread over random AoA draws
    cfg = SystemConfig(gamma=10 ** 0.2)
    bounds = []
    for s in range(20):
        corr = cached_corr(cfg, s)
        att, est, t = prepare(cfg, corr)
        fb = secrecy_feasible_power(single_antenna_terms(cfg, corr, est, att, cfg.gamma, t))
        assert fb.direction == "below"
        bounds.append(fb.bound)
    print("bounds over 20 draws:", np.round(bounds, 4))
    assert any(0.12 <= b <= 0.18 for b in bounds)
    assert max(bounds) < 0.2


def test_switch_coefficient_identities(narrow_cfg, narrow_corr):
    att, est, t = prepare(narrow_cfg, narrow_corr)
    sat = single_antenna_terms(narrow_cfg, narrow_corr, est, att, 10.0, t)
    nst = ns_asymptotic_terms(narrow_cfg, narrow_corr, ns_project(narrow_corr, narrow_cfg))
    sw = design_switch(sat, t, nst, 10.0)
    assert np.isclose(sw.a7, sw.a3 * sw.a6 - sw.a4 * sw.a5)
    assert np.isclose(sw.Delta, sw.b7 ** 2 - 4 * sw.a7 * sw.c7)


def test_switch_degenerate_falls_back(narrow_cfg, narrow_corr):
    att, est, t = prepare(narrow_cfg, narrow_corr)
    sat = single_antenna_terms(narrow_cfg, narrow_corr, est, att, 10.0, t)
    nst = NullSpaceTerms(0.0, 0.0, np.zeros(2), np.ones(2), narrow_cfg.K)
    sw = design_switch(sat, t, nst, 10.0)
    assert sw.a7 == 0 and sw.method == "direct" and sw.beta_of_gamma == 0


def test_ns_rate_attack_free(narrow_cfg, narrow_corr):
    rates = [ns_asymptotic_rate(narrow_cfg.with_(P_E=pe), narrow_corr).rate_secrecy for pe in (0.0, 1.0, 10.0)]
    assert max(rates) - min(rates) < 1e-9
    assert ns_asymptotic_rate(narrow_cfg, narrow_corr, gamma=0.0).rate_secrecy == 0.0


def _single_user(gen, N=32):
    cfg = SystemConfig(L=0, K=1, N_t=N, N_e=1, tau=int(gen.integers(1, 8)), pilot_power=float(gen.uniform(0.2, 3)),
                       P_E=float(gen.uniform(0.1, 3)), N0=float(gen.uniform(0.2, 2)), sigma_as=0.8, quad_points=8192)
    return cfg, cached_corr(cfg, int(gen.integers(10 ** 6)))


def _compare_single_user(cfg, corr, rtol):
    su = single_user_condition(cfg, corr)
    _, _, t = prepare(cfg, corr)
    for p in (0.2, 0.7, 1.0):
        sp = PowerSplit(p, (1 - p) / (cfg.N_t - 1))
        for g in (0.5, 5.0):
            assert np.isclose(su.sinr_user(p, g), t.sinr_user(sp, g), rtol=rtol)
            assert np.isclose(su.sinr_eve(p, g), t.sinr_eve(sp, g), rtol=rtol)
            assert su.predicate(p, g) == (su.sinr_user(p, g) > su.sinr_eve(p, g))
    return su


def test_single_user_dual_path_commuting():
    # with a shared eigenbasis the two closed forms coincide exactly
    gen = np.random.default_rng(12)
    for _ in range(5):
        N = 24
        cfg = SystemConfig(L=0, K=1, N_t=N, N_e=1, tau=int(gen.integers(1, 8)), P_E=float(gen.uniform(0.1, 3)),
                           N0=float(gen.uniform(0.2, 2)))
        U = random_unitary(gen, N)
        a, b = gen.uniform(0, 1, N) ** 3, gen.uniform(0, 1, N) ** 3
        R = (U * (a * N / a.sum())) @ U.conj().T
        RE = (U * (b * N / b.sum())) @ U.conj().T
        corr = CorrelationSet(R[None, None, None], RE[None], np.full((1, 1, 1), gen.uniform(0.5, 2), complex))
        _compare_single_user(cfg, corr, 1e-9)


def test_single_user_dual_path_general():
    # the general form drops tau^2 P tr(R C R C^H), the single-user form drops tr(R_hat^2);
    # the two only differ when R and R_ET do not commute, by O(1/N_t) relative
    gen = np.random.default_rng(11)
    for _ in range(5):
        cfg, corr = _single_user(gen)
        _compare_single_user(cfg, corr, 1.0 / cfg.N_t)


def test_single_user_eta2_sign_not_forced():
    # a strong attack can make the eavesdropper term exceed the user term
    cfg = SystemConfig(L=0, K=1, N_t=32, N_e=1, tau=2, P_E=10.0, sigma_as=0.8, quad_points=8192)
    signs = {np.sign(single_user_condition(cfg, cached_corr(cfg, s)).eta2) for s in range(10)}
    assert -1 in signs
    cfg0 = cfg.with_(P_E=0.0)
    assert all(single_user_condition(cfg0, cached_corr(cfg0, s)).eta2 > 0 for s in range(10))


def test_single_user_projected_eta1_zero():
    cfg = SystemConfig(L=0, K=1, N_t=16, N_e=1, tau=2)
    g = np.random.default_rng(0)
    corr = CorrelationSet(random_psd(g, 16)[None, None, None], np.zeros((1, 16, 16), complex),
                          np.ones((1, 1, 1), complex))
    su = single_user_condition(cfg, corr)
    assert su.eta1 == 0.0 and su.eta2 > 0
    assert all(su.predicate(p, gm) for p in (0.1, 0.9) for gm in (0.1, 10.0))


def test_single_user_wrong_topology(small_cfg, small_corr):
    from secmimo.analysis import WrongSpecializationError
    with pytest.raises(WrongSpecializationError):
        single_user_condition(small_cfg, small_corr)


def test_iid_sign_examples():
    assert iid_sign_check(1.0, 1.0, 0.5, 1.0, 10, 1.0, 64).sign > 0
    s = iid_sign_check(1.0, 0.5, 0.5, 1.0, 10, 1.0, 32)
    assert s.eta1_closed == 0.0 and s.sign == 0


def test_grid_split_any_Ne(small_cfg, small_corr):
    _, _, t = prepare(small_cfg, small_corr)
    sp, r = grid_best_split(t, 3.0, 2, 16, n=201)
    assert r >= asymptotic_secrecy_rate(t, PowerSplit.no_an(2), 3.0).rate_secrecy - 1e-12


def test_ratio_coefficients_match_rate():
    # the rational form reproduces the general large-array ratio
    gen = np.random.default_rng(3)
    cfg = random_small_config(gen)
    corr = cached_corr(cfg, 5)
    att, est, t = prepare(cfg, corr)
    sat = single_antenna_terms(cfg, corr, est, att, cfg.gamma, t)
    for p in np.linspace(0, 1 / cfg.K, 7):
        sp = PowerSplit.from_p(p, cfg.K, cfg.N_t)
        ratio = (1 + t.sinr_user(sp, cfg.gamma)) / (1 + t.sinr_eve(sp, cfg.gamma))
        assert np.isclose(sat.ratio(p), ratio, rtol=1e-9)
    co = ratio_coefficients(1, 2, 3, 4, 5, 2.0, 2, 10)
    assert co[2] == co[5]


def test_attack_free_eta_psd(small_cfg, small_corr):
    est = estimate_covariances(small_cfg, small_corr, None)
    t = asymptotic_terms(small_cfg, small_corr, est, None)
    for e in t.eta:
        assert np.allclose(e, e.conj().T)
        assert np.linalg.eigvalsh(e).min() >= -1e-9 * np.abs(e).max()
