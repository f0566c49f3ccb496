import functools

import numpy as np
import pytest

from secmimo.channel import CorrelationSet, SystemConfig, build_correlation_set
from secmimo.uplink import EmptyNullSpaceError, ns_project

# Narrow angular spread: the only setting where the eavesdropper's transmit
# correlation has eigenvalues below 1e-3, so the NS design can be built.
NARROW = dict(sigma_as=0.1, quad_points=32768)


def random_psd(gen, n, rank=None):
    rank = n if rank is None else rank
    A = gen.standard_normal((n, rank)) + 1j * gen.standard_normal((n, rank))
    return A @ A.conj().T / rank


def random_unitary(gen, n):
    A = gen.standard_normal((n, n)) + 1j * gen.standard_normal((n, n))
    Q, R = np.linalg.qr(A)
    return Q * (np.diagonal(R) / np.abs(np.diagonal(R)))


def orthogonal_corr(gen, L=1, K=2, N=24, N_e=1, split=16):
    """Users live on the first ``split`` DFT directions, the eavesdropper on the rest."""
    F = np.fft.fft(np.eye(N)) / np.sqrt(N)
    A, B = F[:, :split], F[:, split:]
    user = np.empty((L + 1, K, L + 1, N, N), complex)
    for idx in np.ndindex(L + 1, K, L + 1):
        R = A @ random_psd(gen, split) @ A.conj().T
        user[idx] = R * ((N if idx[0] == idx[2] else 0.1 * N) / np.trace(R).real)
    eve_tx = np.stack([B @ random_psd(gen, N - split) @ B.conj().T for _ in range(L + 1)])
    eve_rx = np.stack([random_psd(gen, N_e) for _ in range(L + 1)])
    return CorrelationSet(user, eve_tx, eve_rx)


def random_small_config(gen, **fixed):
    """A random valid configuration small enough for fast closed-form checks."""
    K = int(gen.integers(1, 5))
    kw = dict(
        L=int(gen.integers(0, 3)),
        K=K,
        N_t=int(gen.choice([32, 48, 64])),
        N_e=1,
        tau=int(K + gen.integers(0, 6)),
        P_E=float(10 ** gen.uniform(-1, 1)),
        gamma=float(10 ** gen.uniform(-1, 1.5)),
        rho=float(gen.uniform(0.05, 0.5)),
        sigma_as=float(gen.uniform(0.3, np.pi / 2)),
        quad_points=8192,
        target_user=int(gen.integers(0, K)),
    )
    kw.update(fixed)
    return SystemConfig(**kw)


@functools.lru_cache(maxsize=None)
def cached_corr(config: SystemConfig, seed: int):
    return build_correlation_set(config, seed)


@functools.lru_cache(maxsize=None)
def first_seed(config: SystemConfig, predicate_name: str, limit: int = 50):
    """Smallest seed whose correlation draw satisfies a named predicate."""
    pred = PREDICATES[predicate_name]
    for seed in range(limit):
        if pred(config, cached_corr(config, seed)):
            return seed
    raise RuntimeError(f"no seed below {limit} satisfies {predicate_name}")


def _positive_mfan(config, corr):
    from secmimo.analysis import optimal_power_allocation, prepare, single_antenna_terms
    att, est, terms = prepare(config, corr)
    sat = single_antenna_terms(config, corr, est, att, config.gamma, terms)
    return optimal_power_allocation(sat).rate > 0.05


def _positive_ns(config, corr):
    from secmimo.analysis import ns_asymptotic_rate
    try:
        return ns_asymptotic_rate(config, corr).rate_secrecy > 0.05
    except EmptyNullSpaceError:
        return False


PREDICATES = {"positive_mfan": _positive_mfan, "positive_ns": _positive_ns}


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_cfg():
    return SystemConfig(L=1, K=2, N_t=16, N_e=2, tau=4, sigma_as=np.pi / 2, quad_points=4096)


@pytest.fixture(scope="session")
def small_corr(small_cfg):
    return cached_corr(small_cfg, 3)


@pytest.fixture(scope="session")
def narrow_cfg():
    return SystemConfig(L=1, K=2, N_t=32, N_e=1, tau=4, gamma=10.0, **NARROW)


@pytest.fixture(scope="session")
def narrow_corr(narrow_cfg):
    for seed in range(20):
        corr = cached_corr(narrow_cfg, seed)
        try:
            ns_project(corr, narrow_cfg)
            return corr
        except EmptyNullSpaceError:
            continue
    raise RuntimeError("no narrow-spread draw with a null space")
