import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ultranet.core import net_mul
from ultranet.embedding import DistributionSpec, embed_distribution
from ultranet.errors import DomainError, SeparationError
from ultranet.microlocal import ConeSet, LocalizerPlan, WavefrontEstimate, localizer_plan, wavefront
from ultranet.product import (
    cone_separation,
    cone_sum,
    dense_closure,
    hormander_check,
    random_cone_trials,
    sampled_cone_sum,
    wf_sum,
)
from ultranet.spectral import DirectionBins, fourier_net

B1 = DirectionBins(1, 2)
B16 = DirectionBins(2, 16)
PLUS, MINUS = ConeSet(B1, (0,)), ConeSet(B1, (1,))


def cones(bins):
    return st.sets(st.integers(0, bins.count - 1), max_size=bins.count).map(lambda s: ConeSet(bins, tuple(s)))


# ---------------------------------------------------------------- cone sums


def test_sum_1d_same_sign():
    cp = cone_sum(PLUS, PLUS)
    assert cp.sum_defined and cp.sum == PLUS and cp.closure_union == PLUS


def test_sum_1d_opposite():
    assert not cone_sum(PLUS, MINUS).sum_defined
    assert not cone_sum(ConeSet(B1, (0, 1)), PLUS).sum_defined


def test_sum_2d_axes():
    a, b = ConeSet(B16, (4, 12)), ConeSet(B16, (0, 8))
    cp = cone_sum(a, b)
    assert cp.sum_defined
    assert set(cp.sum) == set(range(16))
    assert set(cp.closure_union) == set(range(16))
    brute = sampled_cone_sum(a, b)
    assert brute.sum_defined and set(brute.sum) == set(range(16))


def test_sum_2d_opposite_undefined():
    assert not cone_sum(ConeSet(B16, (0,)), ConeSet(B16, (8,))).sum_defined
    assert not sampled_cone_sum(ConeSet(B16, (0,)), ConeSet(B16, (8,))).sum_defined


def test_sum_2d_arc():
    cp = cone_sum(ConeSet(B16, (1,)), ConeSet(B16, (4,)))
    assert cp.sum.members == (1, 2, 3, 4)
    assert cp.to_dict()["sum_defined"] is True


def test_sum_with_empty():
    cp = cone_sum(ConeSet(B16), ConeSet(B16, (3,)))
    assert cp.sum_defined and cp.sum.is_empty and cp.closure_union.members == (3,)


def test_mixed_bins_rejected():
    with pytest.raises(DomainError):
        cone_sum(PLUS, ConeSet(B16, (0,)))


@given(a=cones(B16), b=cones(B16))
def test_sum_commutative(a, b):
    assert cone_sum(a, b) == cone_sum(b, a)


@given(a=cones(B16), b=cones(B16), extra=st.integers(0, 15))
def test_sum_monotone(a, b, extra):
    big = a.union(ConeSet(B16, (extra,)))
    small, large = cone_sum(a, b), cone_sum(big, b)
    assert small.sum.issubset(large.sum)
    assert large.sum_defined <= small.sum_defined


@given(a=cones(B16), b=cones(B16))
def test_closure_union_formula(a, b):
    cp = cone_sum(a, b)
    if cp.sum_defined:
        assert set(cp.closure_union) == set(cp.sum) | set(a) | set(b)


@settings(max_examples=40, deadline=None)
@given(a=cones(B16), b=cones(B16))
def test_exact_against_dense_oracle(a, b):
    cp = cone_sum(a, b)
    if cp.sum_defined and not a.is_empty and not b.is_empty:
        assert dense_closure(a, b) == cp.closure_union


def test_random_trials_exact():
    r = random_cone_trials(trials=100, count=64, seed=3)
    assert r["matches"] == 100 and r["mismatches"] == []


# ---------------------------------------------------------------- separation


def test_separation_1d():
    assert cone_separation(PLUS, PLUS, PLUS) == (PLUS, PLUS)


def test_separation_quadrant():
    a, b = ConeSet(B16, (4,)), ConeSet(B16, (0,))
    gamma = ConeSet(B16, (0, 1, 2, 3, 4))
    g1, g2 = cone_separation(a, b, gamma)
    assert g1.members == (3, 4) and g2.members == (0, 1)
    brute = sampled_cone_sum(g1, g2)
    assert brute.sum_defined and brute.closure_union.issubset(gamma)


def test_separation_fails_with_witness():
    a, b = ConeSet(B16, (4,)), ConeSet(B16, (0,))
    with pytest.raises(SeparationError) as exc:
        cone_separation(a, b, a.union(b))
    assert exc.value.witness_bin == 1
    assert exc.value.witness_bin in sampled_cone_sum(a, b).sum


def test_separation_undefined_sum():
    with pytest.raises(SeparationError) as exc:
        cone_separation(PLUS, MINUS, ConeSet(B1, (0, 1)))
    assert exc.value.witness_bin is None


@given(a=cones(B16), b=cones(B16), gamma=cones(B16))
def test_separation_contract(a, b, gamma):
    try:
        g1, g2 = cone_separation(a, b, gamma)
    except SeparationError:
        cp = cone_sum(a, b)
        assert not cp.sum_defined or not cp.closure_union.issubset(gamma)
        return
    assert a.issubset(g1) and b.issubset(g2)
    cp = cone_sum(g1, g2)
    assert cp.sum_defined and cp.closure_union.issubset(gamma)


# ---------------------------------------------------------------- wave-front sums


@pytest.fixture(scope="module")
def plan16(s2, grid2):
    return LocalizerPlan(grid2, s2, B16, 0.5, 1, 64, (1.0, 1.0))


def _wf(plan, pairs):
    return WavefrontEstimate(plan, tuple(sorted(pairs)))


def test_wf_sum_disjoint(plan16):
    s = wf_sum(_wf(plan16, [((1, 1), 0)]), _wf(plan16, [((3, 3), 8)]))
    assert s.pairs == () and s.hypothesis_ok
    assert set(s.allowed) == {((1, 1), 0), ((3, 3), 8)}


def test_wf_sum_shared_cell(plan16):
    s = wf_sum(_wf(plan16, [((2, 2), 4)]), _wf(plan16, [((2, 2), 0), ((5, 5), 3)]))
    assert s.hypothesis_ok
    assert s.pairs == tuple(((2, 2), b) for b in range(5))
    assert ((5, 5), 3) in s.allowed


def test_wf_sum_cancellation(plan16):
    s = wf_sum(_wf(plan16, [((2, 2), 4)]), _wf(plan16, [((2, 2), 12)]))
    assert not s.hypothesis_ok and s.failing_cells == ((2, 2),)


def test_wf_sum_needs_same_plan(plan16, s2, grid2):
    other = LocalizerPlan(grid2, s2, B16, 0.5, 1, 32, (1.0, 1.0))
    with pytest.raises(DomainError):
        wf_sum(_wf(plan16, []), _wf(other, []))


@pytest.fixture(scope="module")
def nets1(mnet1):
    return {t: embed_distribution(DistributionSpec.parse(t), mnet1)
            for t in ("dirac", "dirac:at=3", "boundary_value_minus")}


@pytest.fixture(scope="module")
def plan1(mnet1, s2):
    return localizer_plan(mnet1.grid, s2, B1)


def test_wf_sum_real_disjoint(nets1, plan1):
    s = wf_sum(wavefront(nets1["dirac"], plan=plan1), wavefront(nets1["dirac:at=3"], plan=plan1))
    assert s.pairs == () and s.hypothesis_ok


def test_wf_sum_boundary_value_square(nets1, plan1):
    w = wavefront(nets1["boundary_value_minus"], plan=plan1)
    s = wf_sum(w, w)
    c0 = plan1.cell_of((0.0,))
    assert s.hypothesis_ok and s.pairs == ((c0, 1),)


def test_wf_sum_dirac_square(nets1, plan1):
    w = wavefront(nets1["dirac"], plan=plan1)
    s = wf_sum(w, w)
    assert not s.hypothesis_ok and s.failing_cells == (plan1.cell_of((0.0,)),)


# ---------------------------------------------------------------- product check


def test_hormander_boundary_value_square(nets1, plan1):
    f = nets1["boundary_value_minus"]
    r = hormander_check(f, f, plan=plan1)
    c0 = list(plan1.cell_of((0.0,)))
    assert r["hypothesis_ok"] and r["inclusion"] is True
    assert r["allowed"] == [{"cell": c0, "bins": [1]}]
    assert r["wf_fg"] == [{"cell": c0, "bins": [1]}]
    json.dumps(r)


def test_square_spectrum_one_sided(nets1):
    # oracle: (x - i eps)**-2 is still a boundary value from the same side
    sq = net_mul(nets1["boundary_value_minus"], nets1["boundary_value_minus"])
    mag2 = np.abs(fourier_net(sq).mantissa_hat) ** 2
    pos = sq.grid.freqs > 0
    assert (mag2[:, pos].sum(axis=1) / mag2.sum(axis=1)).max() <= 1e-6


def test_hormander_dirac_square(nets1, plan1):
    r = hormander_check(nets1["dirac"], nets1["dirac"], plan=plan1)
    assert not r["hypothesis_ok"]
    assert r["inclusion"] is None and r["status"].startswith("hypothesis violated")
    assert r["wf_f"] and r["wf_g"]
    json.dumps(r)
