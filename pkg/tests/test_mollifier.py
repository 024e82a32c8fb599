import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ultranet.core import EpsilonLadder, Grid, classify_net, grid_fft
from ultranet.errors import AliasingError, ConstructionError, DomainError
from ultranet.mollifier import (
    build_gevrey_bump,
    build_mollifier,
    default_mollifier,
    gevrey_cutoff,
    gevrey_step,
    mollifier_net,
    seminorm_estimate,
)


@pytest.fixture(scope="module")
def moll(s2):
    return default_mollifier(s2, 1)


# ---------------------------------------------------------------- bump


def test_bump_plateau_and_support(s2):
    b = build_gevrey_bump(s2, 2.0, 12.0)
    assert b.evaluate(np.array([1.0]))[0] == 1.0
    assert b.evaluate(np.array([24.0]))[0] == 0.0


def test_bump_midpoint_is_half():
    assert gevrey_cutoff(7.0, 2.0, 12.0, 2.0) == pytest.approx(0.5, abs=1e-15)


def test_gluing_function_values():
    t = np.array([-1.0, 0.0, 0.25, 1.0])
    np.testing.assert_allclose(gevrey_step(t, 2.0), [0, 0, math.exp(-4.0), math.exp(-1.0)])


@given(r=st.floats(min_value=0, max_value=20), s=st.floats(min_value=1.2, max_value=5))
def test_bump_range_and_symmetry(r, s):
    v = gevrey_cutoff(r, 2.0, 12.0, s)
    assert 0.0 <= v <= 1.0
    assert v == gevrey_cutoff(-r, 2.0, 12.0, s)


@given(s=st.floats(min_value=1.2, max_value=5))
@settings(max_examples=20)
def test_bump_monotone(s):
    r = np.linspace(0, 14, 2001)
    assert np.all(np.diff(gevrey_cutoff(r, 2.0, 12.0, s)) <= 0)


def test_bump_aliasing_error(s2):
    with pytest.raises(AliasingError):
        build_gevrey_bump(s2, 2.0, 12.0, Grid(1, 48.0, 256))


def test_bump_rejects_radii(s2):
    with pytest.raises(DomainError):
        build_gevrey_bump(s2, 3.0, 2.0)


# ---------------------------------------------------------------- mollifier


def test_mass_and_moments(moll):
    res = dict(moll.moment_residuals)
    assert res[(0,)] <= 1e-8
    for k in range(1, 6):
        assert res[(k,)] <= 1e-6


def test_moment_oracle_direct_quadrature(moll):
    x = moll.grid.axis
    h = moll.grid.spacing
    assert abs(np.sum(moll.phi) * h - 1) <= 1e-8
    assert abs(np.sum(x * moll.phi) * h) <= 1e-6


def test_phi_at_zero_frequency_quadrature(moll, s2):
    # phi(0) = (2 pi)^-1 int bump; the integral is done on a fine independent mesh
    xi = np.linspace(-12.0, 12.0, 200001)
    integral = np.trapezoid(gevrey_cutoff(xi, 2.0, 12.0, 2.0), xi)
    phi0 = moll.phi[np.argmin(np.abs(moll.grid.axis))]
    assert phi0 == pytest.approx(integral / (2 * np.pi), rel=1e-8)


def test_phi_real_and_even(moll):
    phi = moll.phi
    # node i at -L + i h; its mirror -x is node N - i
    np.testing.assert_allclose(phi[1:], phi[1:][::-1], rtol=0, atol=1e-13 * np.abs(phi).max())


def test_fourier_plateau(moll):
    spec = grid_fft(moll.phi[None].astype(complex), moll.grid)[0]
    r = np.abs(moll.grid.freqs)
    assert np.abs(spec[r <= 2.0] - 1).max() <= 1e-8
    assert np.abs(spec[r >= 12.0]).max() <= 1e-8


def test_grid_converged(s2, moll):
    fine = Grid(1, 48.0, 8192)
    m2 = build_mollifier(build_gevrey_bump(s2, 2.0, 12.0, fine), fine, seminorm_bs=())
    peak = np.abs(moll.phi).max()
    assert np.abs(m2.phi[::2] - moll.phi).max() <= 1e-8 * peak


def test_moment_failure_names_alpha(s2):
    # a narrow domain truncates the tails and the first odd moment survives periodization poorly
    g = Grid(1, 2.0, 1024)
    with pytest.raises(ConstructionError) as info:
        build_mollifier(build_gevrey_bump(s2, 2.0, 12.0, g), g, seminorm_bs=())
    assert info.value.alpha is not None


def test_2d_mollifier_is_tensor_product(s2):
    m2 = default_mollifier(s2, 2)
    m1 = build_mollifier(build_gevrey_bump(s2, 2.0, 12.0, Grid(1, 48.0, 512)), Grid(1, 48.0, 512),
                         seminorm_bs=())
    np.testing.assert_allclose(m2.phi, np.multiply.outer(m1.phi, m1.phi), atol=1e-12)
    assert dict(m2.moment_residuals)[(0, 0)] <= 1e-8


# ---------------------------------------------------------------- seminorms


def test_seminorm_monotone_in_b(moll):
    s1 = seminorm_estimate(moll, 1.0)
    s2_ = seminorm_estimate(moll, 2.0)
    assert s1 >= s2_ > 0 and math.isfinite(s1)


def test_seminorm_large_b_is_l1_norm(moll):
    l1 = np.sum(np.abs(moll.phi)) * moll.grid.spacing
    assert seminorm_estimate(moll, 1e3) == pytest.approx(l1, rel=1e-9)


def test_seminorm_resolution_oracle(s2, moll):
    fine = Grid(1, 48.0, 8192)
    m2 = build_mollifier(build_gevrey_bump(s2, 2.0, 12.0, fine), fine, seminorm_bs=())
    assert seminorm_estimate(m2, 1.0) == pytest.approx(seminorm_estimate(moll, 1.0), rel=0.01)


def test_seminorm_rejects_b(moll):
    with pytest.raises(DomainError):
        seminorm_estimate(moll, 0.0)


# ---------------------------------------------------------------- scaled net


def test_net_mass_and_scaling(mnet1, moll):
    g = mnet1.grid
    phi0 = moll.phi[np.argmin(np.abs(moll.grid.axis))]
    for k, eps in enumerate(mnet1.ladder):
        sl = mnet1.slices[k]
        assert abs(np.sum(sl) * g.spacing - 1) <= 1e-6
        assert np.abs(sl).max() / phi0 == pytest.approx(1 / eps, rel=1e-6)


def test_net_truncation_metadata(mnet1):
    assert mnet1.dropped == tuple(2.0 ** -j for j in range(7, 11))
    assert any("truncated" in n for n in mnet1.net.notes)


def test_net_spectrum_matches_fft(mnet1):
    for k in (0, len(mnet1.ladder) - 1):
        spec = grid_fft(mnet1.slices[k][None].astype(complex), mnet1.grid)[0]
        np.testing.assert_allclose(spec, mnet1.spectrum(k), atol=1e-10)


def test_net_is_moderate(mnet1):
    assert classify_net(mnet1.net).is_moderate


def test_net_needs_four_entries(s2, moll):
    with pytest.raises(DomainError):
        mollifier_net(moll, EpsilonLadder.geometric(2, 10), Grid(1, 8.0, 256))
