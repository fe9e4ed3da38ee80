import numpy as np
import pytest
from hypothesis import given, strategies as st

from subrad.lattice import (AtomPositions, InvalidConfigError, LatticeConfig, build_positions,
                            pairwise_separations, uniform_positions)


def test_zero_disorder_lattice():
    np.testing.assert_allclose(uniform_positions(3, 0.25).z, [0.25, 0.5, 0.75], rtol=0, atol=1e-15)


def test_two_atom_separation():
    sep = pairwise_separations(uniform_positions(2, 0.02))
    assert sep[0, 1] == pytest.approx(0.02, rel=1e-14)


def test_disorder_bound_over_many_draws():
    d, u = 0.25, 0.05
    j = np.arange(1, 11)
    worst = 0.0
    for seed in range(10_000):
        z = build_positions(LatticeConfig(10, d, u, seed)).z
        worst = max(worst, np.max(np.abs(z - j * d)))
    assert worst <= u * d * (1 + 1e-12)
    assert worst > 0.9 * u * d  # the bound is actually approached


def test_pairwise_example_and_symmetry():
    pos = AtomPositions(np.array([0.25, 0.5]), 0.25)
    np.testing.assert_allclose(pairwise_separations(pos), [[0, 0.25], [0.25, 0]])
    sep = pairwise_separations(build_positions(LatticeConfig(7, 0.1, 0.2, 3)))
    np.testing.assert_array_equal(sep, sep.T)
    np.testing.assert_array_equal(np.diag(sep), 0)
    assert pairwise_separations(uniform_positions(4, 0.13))[0, 3] == pytest.approx(0.39)


@given(st.integers(1, 50), st.floats(0.01, 0.49), st.floats(0, 0.49), st.integers(0, 2**64 - 1))
def test_seeded_reproducibility(n, d, u, seed):
    cfg = LatticeConfig(n, d, u, seed)
    a, b = build_positions(cfg), build_positions(cfg)
    np.testing.assert_array_equal(a.z, b.z)
    assert np.all(np.diff(a.z) > 0)


@given(st.integers(2, 30), st.floats(0.01, 0.49), st.floats(0, 0.4), st.integers(0, 1000),
       st.floats(0.01, 0.49))
def test_rescaling_keeps_realization(n, d, u, seed, d2):
    pos = build_positions(LatticeConfig(n, d, u, seed))
    moved = pos.at_spacing(d2)
    np.testing.assert_allclose(moved.z, pos.z * d2 / d, rtol=1e-12)
    np.testing.assert_allclose(moved.offsets, pos.offsets)


def test_mirror_image_has_same_gaps_reversed():
    pos = build_positions(LatticeConfig(6, 0.2, 0.3, 9))
    np.testing.assert_allclose(np.diff(pos.reversed().z), np.diff(pos.z)[::-1], atol=1e-15)


def test_positions_are_read_only():
    pos = uniform_positions(3, 0.1)
    with pytest.raises(ValueError):
        pos.z[0] = 1.0


@pytest.mark.parametrize("kwargs", [
    dict(n_atoms=0, spacing=0.1), dict(n_atoms=2.5, spacing=0.1), dict(n_atoms=3, spacing=0.0),
    dict(n_atoms=3, spacing=-0.1), dict(n_atoms=3, spacing=float("nan")),
    dict(n_atoms=3, spacing=0.1, disorder_amplitude=0.5),
    dict(n_atoms=3, spacing=0.1, disorder_amplitude=-0.01),
    dict(n_atoms=3, spacing=0.1, seed=-1), dict(n_atoms=3, spacing=0.1, seed=2**64),
])
def test_invalid_configs(kwargs):
    with pytest.raises(InvalidConfigError):
        build_positions(LatticeConfig(**kwargs))


def test_unordered_positions_rejected():
    with pytest.raises(InvalidConfigError):
        AtomPositions(np.array([0.5, 0.25]), 0.25)
