import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hemimac.channel import (
    BLOCK_ROWS,
    ActiveSetMode,
    ChannelParams,
    SamplingMode,
    build_codebook,
    collision_bound,
    derive_sizes,
    draw_active_set,
    transmit,
)
from hemimac.errors import ParameterError
from hemimac.harness import collision_rate_by_draws, estimate_collision_rate
from hemimac.seeding import derive_seed, make_rng
from hemimac.sphere import is_hemispherical

COND = SamplingMode.HEMISPHERE_CONDITIONED


def test_sizes():
    assert derive_sizes(10, 3, 0.2) == (1000, 2)
    assert derive_sizes(100, 2.5, 0.1) == (100_000, 10)
    assert derive_sizes(64, 2.1, 1 / 32) == (round(math.exp(2.1 * math.log(64))), 2)
    assert derive_sizes(64, 2.1, 1 / 32) == (6208, 2)


def test_sizes_floor_active_count_at_one():
    assert derive_sizes(10, 2.5, 0.01) == (316, 1)


@pytest.mark.parametrize("args", [(1, 3, 0.2), (10, 2.0, 0.2), (10, 3, 0.0), (3, 2.01, 5.0)])
def test_sizes_reject_bad_arguments(args):
    with pytest.raises(ParameterError):
        derive_sizes(*args)


def test_params_flags():
    p = ChannelParams(100, 2.5, 0.2)
    assert p.noise_variance == 1.0
    assert p.reliable_regime
    assert not ChannelParams(100, 2.5, 0.3).reliable_regime
    assert p.hemisphere_axis() is None
    axis = ChannelParams(4, 2.5, 0.5, sampling_mode=COND).hemisphere_axis()
    assert axis.tolist() == [1.0, 0.0, 0.0, 0.0]
    with pytest.raises(ParameterError):
        ChannelParams(4, 2.5, 0.5, P=0.0)
    with pytest.raises(ParameterError):
        ChannelParams(4, 2.5, 0.5, sampling_mode=COND, axis=(1.0, 1.0, 0.0, 0.0))


def test_codeword_norms():
    p = ChannelParams(20, 2.2, 0.2, P=2.0)
    x = build_codebook(p, 3).matrix
    assert x.shape == (p.M, 20)
    assert np.allclose(np.linalg.norm(x, axis=1), math.sqrt(40), rtol=1e-9, atol=0)


def test_codebook_is_reproducible():
    p = ChannelParams(12, 2.5, 0.2)
    a = build_codebook(p, 99).matrix
    b = build_codebook(p, 99).matrix
    assert np.array_equal(a, b)
    assert not np.array_equal(a, build_codebook(p, 100).matrix)


@given(seed=st.integers(0, 2**63), idx=st.lists(st.integers(0, 497), min_size=1, max_size=20))
@settings(max_examples=40, deadline=None)
def test_lazy_rows_match_full_matrix(seed, idx):
    cb = build_codebook(ChannelParams(10, 2.7, 0.2), seed)
    lazy = cb.codewords(idx)
    full = build_codebook(ChannelParams(10, 2.7, 0.2), seed).matrix[idx]
    assert np.array_equal(lazy, full)


def test_chunking_does_not_change_rows():
    cb = build_codebook(ChannelParams(9, 2.6, 0.2), 5)
    small = np.vstack([c for _, c in cb.iter_chunks(rows=BLOCK_ROWS)])
    big = np.vstack([c for _, c in cb.iter_chunks(rows=10_000)])
    assert np.array_equal(small, big)


def test_codewords_rejects_out_of_range():
    cb = build_codebook(ChannelParams(10, 3, 0.2), 1)
    with pytest.raises(ParameterError):
        cb.codewords([1000])


def test_distinct_codewords_nearly_orthogonal():
    p = ChannelParams(500, 2.01, 0.1)
    cb = build_codebook(p, 4)
    x = cb.codewords(np.arange(20_000))
    g = np.einsum("ij,ij->i", x[0::2], x[1::2]) / (p.n * p.P)
    assert np.mean(np.abs(g) < 0.2) >= 0.999


def test_conditioned_active_codewords_face_the_axis():
    p = ChannelParams(8, 2.5, 0.5, sampling_mode=COND)
    axis = p.hemisphere_axis()
    for seed in range(50):
        active = draw_active_set(p, make_rng(seed, 1))
        cb = build_codebook(p, seed, active)
        assert np.all(cb.codewords(active) @ axis >= 0)


def test_conditioning_leaves_inactive_codewords_alone():
    p = ChannelParams(8, 2.5, 0.5, sampling_mode=COND)
    full = build_codebook(p, 7).matrix
    active = [3, 40, 41]
    cb = build_codebook(p, 7, active)
    others = np.setdiff1d(np.arange(p.M), active)
    assert np.array_equal(cb.codewords(others), full[others])


def test_conditioning_requires_conditioned_mode():
    with pytest.raises(ParameterError):
        build_codebook(ChannelParams(8, 2.5, 0.5), 1, [0])


@pytest.mark.parametrize("n,beta", [(6, 0.5), (8, 1.0), (12, 0.5)])
def test_small_density_active_sets_are_hemispherical(n, beta):
    p = ChannelParams(n, 2.5, beta)
    for t in range(50):
        cb = build_codebook(p, t)
        active = draw_active_set(p, make_rng(t, 2))
        assert len(active) <= 8
        assert is_hemispherical(cb.codewords(active)).is_hemispherical


@given(seed=st.integers(0, 2**32))
@settings(max_examples=50, deadline=None)
def test_distinct_subset(seed):
    p = ChannelParams(20, 2.2, 0.3)
    s = draw_active_set(p, make_rng(seed))
    assert s.size == p.K_a
    assert np.unique(s).size == p.K_a
    assert np.all(np.diff(s) > 0)
    assert s.min() >= 0 and s.max() < p.M


def test_iid_messages_flags_collisions():
    p = ChannelParams(10, 2.2, 0.4)
    rng = make_rng(3)
    seen = False
    for _ in range(500):
        s, collided = draw_active_set(p, rng, ActiveSetMode.IID_MESSAGES)
        assert collided == (s.size < p.K_a)
        seen |= collided
    assert seen


def test_collision_frequency_birthday():
    p = ChannelParams(10, 3, 0.2)
    assert p.sizes == (1000, 2)
    freq = estimate_collision_rate(p, 1_000_000, seed=12)
    assert freq == pytest.approx(0.001, abs=1e-4)
    tight, loose = collision_bound(p)
    assert freq <= loose
    assert freq <= tight + 1e-4


def test_vectorized_and_reference_collision_estimates_agree():
    p = ChannelParams(6, 2.1, 0.5)
    a = estimate_collision_rate(p, 20_000, seed=1)
    b = collision_rate_by_draws(p, 20_000, seed=2)
    exact = 1 - math.prod((p.M - i) / p.M for i in range(p.K_a))
    se = math.sqrt(exact * (1 - exact) / 20_000)
    assert abs(a - exact) <= 4 * se and abs(b - exact) <= 4 * se


def test_collision_bound_values():
    tight, loose = collision_bound(ChannelParams(10, 3, 0.2))
    assert tight == pytest.approx(0.001)
    assert loose == pytest.approx(0.002)
    assert collision_bound(ChannelParams(10, 3, 0.1))[0] == 0.0


def test_zero_noise_single_user_returns_codeword():
    p = ChannelParams(16, 2.5, 0.05)
    assert p.K_a == 1
    cb = build_codebook(p, 8)
    obs = transmit(cb, [17], noise_seed=1, zero_noise=True)
    assert np.array_equal(obs.y, cb.codewords([17])[0])


def test_transmit_reproducible_and_validated():
    p = ChannelParams(16, 2.5, 0.2)
    cb = build_codebook(p, 8)
    a = transmit(cb, [5, 1, 9], noise_seed=3)
    b = transmit(build_codebook(p, 8), [1, 5, 9], noise_seed=3)
    assert np.array_equal(a.y, b.y)
    assert a.active_set.tolist() == [1, 5, 9]
    with pytest.raises(ParameterError):
        transmit(cb, [p.M], noise_seed=1)
    with pytest.raises(ParameterError):
        transmit(cb, [2, 2], noise_seed=1)


def test_noise_energy_per_dimension():
    n = 200
    p = ChannelParams(n, 2.1, 0.01)
    cb = build_codebook(p, 1)
    x = cb.codewords([0])[0]
    z2 = [np.sum((transmit(cb, [0], derive_seed(5, t)).y - x) ** 2) / n for t in range(1000)]
    assert np.mean(z2) == pytest.approx(1.0, abs=0.05)
