import math

import mpmath as mp
import numpy as np
import pytest

from fbmac.core import (
    CapacityVector,
    DispersionKind,
    DomainError,
    PowerPair,
    SecondOrderParams,
    bits_to_nats,
    capacity,
    capacity_vector,
    db_to_linear,
    dispersion,
    dispersion_matrix_iid,
    dispersion_matrix_shell,
    dispersion_matrix_sumshell,
    nats_to_bits,
)
from fbmac.shellmc import p2p_density_samples

POWER_GRID = [0.01, 0.1, 1.0, 10.0, 100.0]


def test_capacity_values():
    assert capacity(0.0) == 0.0
    assert capacity(1.0) == pytest.approx(0.5 * math.log(2.0), abs=1e-15)
    # high-precision ln oracle
    assert capacity(2.0) == pytest.approx(float(mp.log(3) / 2), abs=1e-14)
    assert capacity(2.0) == pytest.approx(0.549306, abs=5e-7)


def test_capacity_domain():
    with pytest.raises(DomainError):
        capacity(-0.5)
    with pytest.raises(DomainError):
        capacity(float("nan"))
    with pytest.raises(DomainError):
        capacity(float("inf"))


def test_dispersion_values():
    assert dispersion(0.0) == 0.0
    assert dispersion(1.0) == 0.375
    assert abs(dispersion(1e6) - 0.5) < 1e-5
    with pytest.raises(DomainError):
        dispersion(-1.0)


def test_dispersion_monte_carlo_oracle():
    # variance of the single-draw density / n, direct shell construction
    n, trials = 100, 1_000_000
    it = p2p_density_samples(n, 1.0, trials, seed=20, method="direct")
    assert it.var(ddof=1) / n == pytest.approx(dispersion(1.0), rel=0.01)


def test_capacity_and_dispersion_monotone():
    grid = np.logspace(-3, 3, 61)
    caps = [capacity(p) for p in grid]
    disps = [dispersion(p) for p in grid]
    assert all(a < b for a, b in zip(caps, caps[1:]))
    assert all(a < b for a, b in zip(disps, disps[1:]))


def test_capacity_vector_values():
    cv = capacity_vector(PowerPair(1.0, 1.0))
    assert cv.c1 == pytest.approx(0.346574, abs=5e-7)
    assert cv.c2 == cv.c1
    assert cv.c3 == pytest.approx(0.549306, abs=5e-7)
    cv13 = capacity_vector(PowerPair(1.0, 3.0))
    assert cv13.c3 == pytest.approx(float(mp.log(5) / 2), abs=1e-14)
    assert cv13.c3 == pytest.approx(0.804719, abs=5e-7)


def test_capacity_vector_inequalities():
    for p1 in POWER_GRID:
        for p2 in POWER_GRID:
            cv = capacity_vector(PowerPair(p1, p2))
            assert cv.c3 <= cv.c1 + cv.c2 + 1e-12
            assert cv.c3 >= max(cv.c1, cv.c2) - 1e-12


def test_power_pair_invariants():
    with pytest.raises(DomainError):
        PowerPair(0.0, 1.0)
    with pytest.raises(DomainError):
        PowerPair(1.0, -2.0)
    with pytest.raises(DomainError):
        PowerPair(1.0, float("inf"))


def test_second_order_params_invariants():
    SecondOrderParams(1, 0.5)
    with pytest.raises(DomainError):
        SecondOrderParams(0, 0.5)
    with pytest.raises(DomainError):
        SecondOrderParams(100, 0.0)
    with pytest.raises(DomainError):
        SecondOrderParams(100, 1.0)


def test_capacity_vector_type_invariants():
    with pytest.raises(DomainError):
        CapacityVector(0.3, 0.3, 0.7)  # c3 > c1 + c2
    with pytest.raises(DomainError):
        CapacityVector(0.3, 0.3, 0.2)  # c3 < max


def test_shell_matrix_values():
    m = dispersion_matrix_shell(PowerPair(1.0, 1.0)).entries
    assert m[0, 1] == pytest.approx(0.125, abs=1e-15)
    assert m[0, 2] == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert m[1, 2] == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert m[0, 0] == 0.375
    assert m[2, 2] == pytest.approx(4.0 / 9.0 + 1.0 / 9.0, abs=1e-15)


def test_shell_matrix_degenerates_to_p2p():
    m = dispersion_matrix_shell(PowerPair(1.0, 1e-12)).entries
    assert abs(m[0, 1]) < 1e-12
    assert abs(m[2, 2] - dispersion(1.0)) < 1e-11


def test_all_matrix_kinds_symmetric_psd():
    for p1 in POWER_GRID:
        for p2 in POWER_GRID:
            pp = PowerPair(p1, p2)
            for dm in (
                dispersion_matrix_shell(pp),
                dispersion_matrix_iid(pp),
                dispersion_matrix_sumshell(pp),
            ):
                m = dm.entries
                assert np.allclose(m, m.T, atol=0)
                assert np.linalg.eigvalsh(m).min() >= -1e-12


def test_iid_matrix_values():
    m = dispersion_matrix_iid(PowerPair(1.0, 1.0)).entries
    assert m[0, 0] == pytest.approx(0.5, abs=1e-15)
    assert m[2, 2] == pytest.approx(2.0 / 3.0, abs=1e-15)


def test_iid_matrix_user_swap_symmetry():
    perm = np.array([1, 0, 2])
    for p1, p2 in [(0.3, 2.0), (1.0, 10.0), (5.0, 0.2)]:
        a = dispersion_matrix_iid(PowerPair(p1, p2)).entries
        b = dispersion_matrix_iid(PowerPair(p2, p1)).entries
        assert np.allclose(a, b[np.ix_(perm, perm)], atol=1e-15)


def test_iid_matrix_monte_carlo_oracle():
    # i.i.d. Gaussian inputs, information densities from explicit vectors
    rng = np.random.Generator(np.random.Philox(7))
    n, trials = 300, 30_000
    p1 = p2 = 1.0
    ps = p1 + p2
    x1 = rng.standard_normal((trials, n)) * math.sqrt(p1)
    x2 = rng.standard_normal((trials, n)) * math.sqrt(p2)
    z = rng.standard_normal((trials, n))
    zsq = np.einsum("ij,ij->i", z, z)
    i1 = n * capacity(p1) + (
        np.einsum("ij,ij->i", x1, x1) - n * p1 + p1 * (n - zsq) + 2 * np.einsum("ij,ij->i", x1, z)
    ) / (2 * (1 + p1))
    i3 = n * capacity(ps) + (
        np.einsum("ij,ij->i", x1 + x2, x1 + x2) - n * ps + ps * (n - zsq)
        + 2 * np.einsum("ij,ij->i", x1 + x2, z)
    ) / (2 * (1 + ps))
    m = dispersion_matrix_iid(PowerPair(p1, p2)).entries
    assert i1.var(ddof=1) / n == pytest.approx(m[0, 0], rel=0.05)
    assert i3.var(ddof=1) / n == pytest.approx(m[2, 2], rel=0.05)


def test_sumshell_matrix():
    pp = PowerPair(1.0, 1.0)
    m = dispersion_matrix_sumshell(pp)
    assert m.kind is DispersionKind.SUM_SHELL
    assert m.entries[2, 2] == pytest.approx(4.0 / 9.0, abs=1e-15)
    diff = dispersion_matrix_shell(pp).entries - m.entries
    expect = np.zeros((3, 3))
    expect[2, 2] = 1.0 / 9.0
    assert np.allclose(diff, expect, atol=1e-15)
    assert np.linalg.eigvalsh(m.entries).min() < 1e-10  # rank 2


def test_shell_minus_sumshell_positive_everywhere():
    for p1 in POWER_GRID:
        for p2 in POWER_GRID:
            pp = PowerPair(p1, p2)
            d = dispersion_matrix_shell(pp).entries - dispersion_matrix_sumshell(pp).entries
            assert d[2, 2] > 0
            d[2, 2] = 0.0
            assert np.allclose(d, 0.0, atol=0)


def test_nats_bits_conversions():
    assert nats_to_bits(math.log(2.0)) == pytest.approx(1.0, abs=1e-15)
    assert nats_to_bits(0.0) == 0.0
    for x in [1e-9, 0.3, 17.0]:
        assert bits_to_nats(nats_to_bits(x)) == pytest.approx(x, rel=1e-15)


def test_db_conversion():
    assert db_to_linear(0.0) == 1.0
    assert db_to_linear(10.0) == pytest.approx(10.0, rel=1e-15)
