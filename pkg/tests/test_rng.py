import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from zkflpq.rng import Rng


def test_stream_matches_shake_construction():
    seed = hashlib.sha3_256(b"zkflpq-seed-int" + (0).to_bytes(32, "little")).digest()
    block0 = hashlib.shake_256(b"zkflpq-rng/v1" + seed + (0).to_bytes(8, "little")).digest(64)
    assert Rng(0).read(64) == block0


def test_reads_cross_block_boundaries():
    a, b = Rng(5), Rng(5)
    whole = a.read(200_000)
    parts = b.read(65_530) + b.read(10) + b.read(200_000 - 65_540)
    assert whole == parts


@given(st.binary(min_size=0, max_size=64))
def test_same_seed_same_stream(seed):
    assert Rng(seed).read(100) == Rng(seed).read(100)


def test_distinct_seeds_differ():
    assert Rng(1).read(32) != Rng(2).read(32)
    assert Rng("a").read(32) != Rng(b"a").read(32)


def test_spawn_is_stable_and_labelled():
    r = Rng(3)
    c1 = r.spawn("client", 1).read(16)
    r.read(1000)
    assert r.spawn("client", 1).read(16) == c1
    assert r.spawn("client", 2).read(16) != c1
    # length prefixing keeps ("ab", "c") apart from ("a", "bc")
    assert r.spawn("ab", "c").read(16) != r.spawn("a", "bc").read(16)


def test_copy_forks_state():
    r = Rng(4)
    r.read(10)
    c = r.copy()
    assert c.read(50) == r.read(50)


def test_bad_seeds():
    with pytest.raises(ValueError):
        Rng(-1)
    with pytest.raises(TypeError):
        Rng(1.5)


@settings(max_examples=30)
@given(st.integers(min_value=1, max_value=(1 << 40)), st.integers(min_value=0, max_value=500))
def test_randbelow_range(bound, size):
    x = Rng(bound).randbelow(bound, size)
    assert len(x) == size
    assert (x >= 0).all() and (x < bound).all()


def test_randbelow_uniform_chi_square():
    x = Rng(11).randbelow(97, 97 * 200)
    counts = np.bincount(x, minlength=97)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_random_and_normal_moments():
    r = Rng(12)
    u = r.random(100_000)
    assert (u >= 0).all() and (u < 1).all()
    assert abs(u.mean() - 0.5) < 0.01
    z = r.normal(100_001)
    assert len(z) == 100_001
    assert abs(z.mean()) < 0.02 and abs(z.std() - 1) < 0.02


def test_bits_are_fair():
    b = Rng(13).bits(80_000)
    assert set(np.unique(b)) <= {0, 1}
    assert abs(b.mean() - 0.5) < 0.01
