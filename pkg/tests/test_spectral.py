import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ultranet.core import EpsilonLadder, Grid, SampledNet, net_mul
from ultranet.embedding import DistributionSpec, canonical_embed, embed_distribution, gevrey_bump_samples
from ultranet.errors import DomainError, PreconditionError, UnderdeterminedFitError
from ultranet.mollifier import default_mollifier, mollifier_net
from ultranet.spectral import (
    DecayFit,
    DirectionBins,
    Thresholds,
    bin_is_regular,
    compact_support_bound_check,
    fit_all_bins,
    fit_decay,
    fourier_net,
    inverse_fourier_net,
    regularity_test,
)

B1 = DirectionBins(1, 2)


@pytest.fixture(scope="module")
def dirac(mnet1):
    return embed_distribution(DistributionSpec("dirac"), mnet1)


@pytest.fixture(scope="module")
def bump_net(s2, ladder, grid1):
    return canonical_embed(gevrey_bump_samples(grid1, s2), ladder, grid1, s2)


@pytest.fixture(scope="module")
def bv_minus(mnet1):
    return embed_distribution(DistributionSpec("boundary_value_minus"), mnet1)


# ---------------------------------------------------------------- direction bins


def test_bins_1d():
    assert list(B1.bin_of(np.array([2.0, -1.0, 0.0]))) == [0, 1, -1]
    assert B1.label(0) == "+" and B1.label(1) == "-"
    assert B1.antipodal(0) == 1


@pytest.mark.parametrize("dim,count", [(1, 3), (2, 5), (2, 2), (3, 4)])
def test_bins_invalid(dim, count):
    with pytest.raises(DomainError):
        DirectionBins(dim, count)


@given(count=st.sampled_from([4, 8, 16, 64]),
       x=st.floats(-100, 100, allow_nan=False), y=st.floats(-100, 100, allow_nan=False))
def test_bins_partition_and_antipodal(count, x, y):
    bins = DirectionBins(2, count)
    b = int(bins.bin_of(x, y))
    if x == 0 and y == 0:
        assert b == -1
        return
    assert 0 <= b < count
    theta = math.atan2(y, x)
    gap = (theta - bins.angle(b) + math.pi) % (2 * math.pi) - math.pi
    assert abs(gap) <= bins.width / 2 + 1e-12
    bm = int(bins.bin_of(-x, -y))
    # on a sector edge rounding may pick either side
    if abs(abs(gap) - bins.width / 2) > 1e-9:
        assert bm == bins.antipodal(b)


# ---------------------------------------------------------------- transforms


def _random_net(seed, grid, ladder, order):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(len(ladder),) + grid.shape) + 1j * rng.normal(size=(len(ladder),) + grid.shape)
    return SampledNet.from_values(order, ladder, grid, vals)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), dim=st.sampled_from([1, 2]))
def test_roundtrip_and_parseval(seed, dim, s2):
    grid = Grid(dim, 3.0, 64)
    net = _random_net(seed, grid, EpsilonLadder.geometric(1, 4), s2)
    spec = fourier_net(net)
    back = inverse_fourier_net(spec)
    assert np.abs(back.samples - net.samples).max() <= 1e-10 * np.abs(net.samples).max()
    assert spec.parseval_residuals(net).max() <= 1e-8


def test_parseval_corpus(dirac, bv_minus, bump_net):
    for net in (dirac, bv_minus, bump_net):
        assert fourier_net(net).parseval_residuals(net).max() <= 1e-8


def test_dirac_spectrum_is_mollifier_transform(dirac, mnet1):
    spec = fourier_net(dirac)
    xi = dirac.grid.freqs
    for k, eps in enumerate(dirac.ladder):
        mag = np.abs(spec.mantissa_hat[k]) * math.exp(spec.log_scale[k])
        np.testing.assert_allclose(mag, np.abs(mnet1.spectrum(k)), atol=1e-10)
        plateau = np.abs(xi) <= mnet1.base.bump.r1 / eps
        assert np.abs(mag[plateau] - 1).max() <= 1e-6


def test_constant_spectrum_at_origin(s2, ladder, grid1):
    spec = fourier_net(canonical_embed(np.ones(grid1.shape), ladder, grid1, s2))
    mag = np.abs(spec.mantissa_hat)
    zero = grid1.freqs == 0
    assert np.all(mag[:, ~zero] <= 1e-12 * mag[:, zero])


def test_boundary_value_one_sided(s2, ladder, bv_minus):
    # 1/(x - i eps) has transform 2 pi i exp(eps xi) H(-xi): nothing on the positive half-line
    def positive_fraction(net):
        mag2 = np.abs(fourier_net(net).mantissa_hat) ** 2
        pos = net.grid.freqs > 0
        return mag2[:, pos].sum(axis=1) / mag2.sum(axis=1)

    assert positive_fraction(bv_minus).max() <= 1e-6
    fine = Grid(1, 8.0, 8192)
    m2 = mollifier_net(default_mollifier(s2, 1), ladder, fine)
    assert positive_fraction(embed_distribution(DistributionSpec("boundary_value_minus"), m2)).max() <= 1e-6


# ---------------------------------------------------------------- compact support bound


def test_bound_check_dirac(dirac):
    r = compact_support_bound_check(dirac)
    assert r["passes"]


def test_bound_check_bump(bump_net):
    r = compact_support_bound_check(bump_net)
    assert r["passes"] and r["xi_coefficient"] <= 0


def test_bound_check_line_delta(s2, mnet2, grid2):
    # the line itself is unbounded, so cut it off with a regular bump to get a support box
    line = embed_distribution(DistributionSpec("line_delta_2d"), mnet2)
    cut = canonical_embed(gevrey_bump_samples(grid2, s2, (0.0, 0.0), 0.3, 0.8), line.ladder, grid2, s2)
    r = compact_support_bound_check(net_mul(cut, line))
    assert r["passes"]


def test_bound_check_needs_support(bv_minus):
    with pytest.raises(PreconditionError):
        compact_support_bound_check(bv_minus.replace(support_box=None))


# ---------------------------------------------------------------- decay fits


def test_dirac_fit_no_decay(dirac):
    for b in B1.all():
        assert fit_decay(fourier_net(dirac), B1, b).k2 <= 0.05


def test_bump_fit_matches_direct_oracle(s2, bump_net, grid1):
    # oracle: direct quadrature of f_hat at the window's shell centres, line fit in |xi|**(1/s)
    thr = Thresholds()
    fit = fit_decay(fourier_net(bump_net), B1, 0, s2)
    assert fit.k2 >= thr.kappa_reg
    assert abs(fit.k1_raw) <= 0.05
    f = gevrey_bump_samples(grid1, s2)
    x, h = grid1.axis, grid1.spacing
    xi = np.arange(8 * grid1.dxi, grid1.nyquist / 2, 4 * grid1.dxi)
    fhat = np.array([abs(np.sum(f * np.exp(-1j * x * w)) * h) for w in xi])
    keep = fhat > 1e-14 * np.abs(f).sum() * h
    slope = np.polyfit(xi[keep] ** s2.inv_s, np.log(fhat[keep]), 1)[0]
    assert fit.k2 == pytest.approx(-slope, rel=0.1)


def test_bv_minus_positive_bin_regular(bv_minus):
    # the empty side holds only FFT roundoff: most shells sit under the noise floor and the
    # survivors shrink with eps, so the bin is regular by vacuity or by the negligible witness
    fits = fit_all_bins(fourier_net(bv_minus), B1)
    assert bin_is_regular(fits[0])
    assert fits[0].vacuous or fits[0].k1_raw <= -Thresholds().k_min
    assert fits[0].excluded_count > 0
    assert not bin_is_regular(fits[1])


def test_underdetermined_fit(s2, ladder):
    g = Grid(1, 8.0, 64)
    net = canonical_embed(gevrey_bump_samples(g, s2), ladder, g, s2)
    with pytest.raises(UnderdeterminedFitError):
        fit_decay(fourier_net(net), B1, 0)


def test_fit_row_fields():
    row = DecayFit(1, 0.5, 0.0, 2.0, 0.1, 40).to_row()
    assert list(row) == ["bin", "c0", "k1", "k2", "residual_rms", "samples"]


@pytest.mark.parametrize("fit,regular", [
    (DecayFit(0, 0, 0, 0, 0, 0, 5, 0, True), True),
    (DecayFit(0, 0, 0, 0.1, 3.0, 50, 0, -3.5), True),
    (DecayFit(0, 0, 0, 0.6, 0.9, 50), True),
    (DecayFit(0, 0, 0, 0.6, 1.1, 50), False),
    (DecayFit(0, 0, 0, 0.4, 0.1, 50), False),
])
def test_bin_verdict_table(fit, regular):
    assert bin_is_regular(fit) is regular


# ---------------------------------------------------------------- regularity test


def test_regularity_bump(bump_net):
    assert regularity_test(bump_net)[0]


def test_regularity_dirac(dirac):
    ok, fits = regularity_test(dirac)
    assert not ok and not any(bin_is_regular(f) for f in fits)


def test_regularity_cut_heaviside(mnet1):
    # the cut step keeps a 1/|xi| tail in both directions, far slower than any exp(-k2 |xi|**(1/s))
    net = embed_distribution(DistributionSpec("heaviside", params={"plateau": 2.0, "support": 4.0}), mnet1)
    ok, fits = regularity_test(net)
    assert not ok and not any(bin_is_regular(f) for f in fits)


# ---------------------------------------------------------------- invariants


def test_antipodal_symmetry_2d(mnet2):
    net = embed_distribution(DistributionSpec("line_delta_2d"), mnet2)
    bins = DirectionBins(2, 16)
    fits = fit_all_bins(fourier_net(net), bins)
    for b in bins.all():
        a, c = fits[b], fits[bins.antipodal(b)]
        assert a.vacuous == c.vacuous
        assert a.k2 == pytest.approx(c.k2, abs=1e-6)


def test_antipodal_symmetry_1d(dirac, bump_net):
    for net in (dirac, bump_net):
        f0, f1 = fit_all_bins(fourier_net(net), B1)
        assert f0.k2 == pytest.approx(f1.k2, abs=1e-6)


def test_monotone_windows(dirac, bump_net, mnet1):
    heav = embed_distribution(DistributionSpec("heaviside", params={"plateau": 2.0, "support": 4.0}), mnet1)
    narrow = Thresholds(r_min_bins=12.0, r_max_frac=0.4)
    for net in (dirac, bump_net, heav):
        wide_fits = fit_all_bins(fourier_net(net), B1)
        narrow_fits = fit_all_bins(fourier_net(net), B1, narrow)
        for w, n in zip(wide_fits, narrow_fits):
            if bin_is_regular(w) and w.residual_rms <= Thresholds().rho_max / 2:
                assert bin_is_regular(n, narrow)


@pytest.mark.parametrize("which", ["dirac", "bump"])
def test_scaling_covariance(which, dirac, bump_net):
    net = dirac if which == "dirac" else bump_net
    boost = net.ladder.as_array() ** (-net.order.a)
    scaled = net.replace(log_scale=net.log_scale + boost)
    for a, b in zip(fit_all_bins(fourier_net(net), B1), fit_all_bins(fourier_net(scaled), B1)):
        assert b.k1_raw - a.k1_raw == pytest.approx(1.0, abs=0.05)
        assert b.k2 == pytest.approx(a.k2, abs=0.05)


def test_regular_factor_keeps_regular(s2, bump_net, ladder, grid1):
    g = canonical_embed(np.cos(3 * grid1.axis) * gevrey_bump_samples(grid1, s2, (0.3,)), ladder, grid1, s2)
    assert regularity_test(net_mul(bump_net, g))[0]
