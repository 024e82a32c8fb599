import numpy as np
import pytest
from hypothesis import given, strategies as st

from ultranet.core import spectral_derivative
from ultranet.embedding import DistributionSpec, canonical_embed, embed_distribution, gevrey_bump_samples
from ultranet.errors import PreconditionError
from ultranet.microlocal import (
    ConeSet,
    check_wf_properties,
    dilate_pairs,
    localizer,
    localizer_plan,
    sigma_cone,
    sigma_localized,
    sing_supp,
    wavefront,
)
from ultranet.spectral import DirectionBins, regularity_test

B1 = DirectionBins(1, 2)
B16 = DirectionBins(2, 16)


def _embed(mnet, text):
    return embed_distribution(DistributionSpec.parse(text), mnet)


@pytest.fixture(scope="module")
def corpus(mnet1, s2, ladder, grid1):
    nets = {t: _embed(mnet1, t) for t in ("dirac", "heaviside", "boundary_value_minus", "gevrey_bump_function")}
    nets["heaviside_cut"] = _embed(mnet1, "heaviside:plateau=2,support=4")
    nets["canonical_bump"] = canonical_embed(gevrey_bump_samples(grid1, s2), mnet1.ladder, grid1, s2)
    return nets


@pytest.fixture(scope="module")
def plan1(mnet1, s2):
    return localizer_plan(mnet1.grid, s2, B1)


# ---------------------------------------------------------------- cone sets


def test_coneset_canonical():
    c = ConeSet(B16, (5, 2, 5, 3))
    assert c.members == (2, 3, 5) and len(c) == 3 and 3 in c
    assert c.dilate().members == (1, 2, 3, 4, 5, 6)
    assert ConeSet(B16, (0,)).dilate().members == (0, 1, 15)
    with pytest.raises(ValueError):
        ConeSet(B1, (2,))


def test_coneset_1d_dilation_identity():
    assert ConeSet(B1, (1,)).dilate().members == (1,)
    assert ConeSet(B1, (0, 1)).labels() == ["+", "-"]


@given(a=st.sets(st.integers(0, 15)), b=st.sets(st.integers(0, 15)))
def test_coneset_algebra(a, b):
    A, B = ConeSet(B16, tuple(a)), ConeSet(B16, tuple(b))
    assert set(A.union(B)) == a | b
    assert set(A.intersection(B)) == a & b
    assert A.issubset(A.dilate())
    assert A.intersection(B).issubset(A)


# ---------------------------------------------------------------- global cones


def test_sigma_dirac(corpus):
    assert sigma_cone(corpus["dirac"])[0].members == (0, 1)


def test_sigma_boundary_value_minus(corpus):
    # 1/(x - i0) carries its spectrum on xi < 0, so only the minus bin is singular
    assert sigma_cone(corpus["boundary_value_minus"])[0].labels() == ["-"]


def test_sigma_boundary_value_plus(mnet1):
    assert sigma_cone(_embed(mnet1, "boundary_value_plus"))[0].labels() == ["+"]


def test_sigma_bump_empty(corpus):
    assert sigma_cone(corpus["canonical_bump"])[0].is_empty


def test_empty_sigma_equivalence(corpus):
    for name, net in corpus.items():
        if net.support_box is None:
            continue
        assert regularity_test(net)[0] == sigma_cone(net)[0].is_empty, name


# ---------------------------------------------------------------- localizers


def test_localizer_shape(s2, grid1):
    psi = localizer(grid1, s2, (1.0,), 2.0, 1)
    d = np.abs(grid1.axis - 1.0)
    assert np.all(psi[d <= 2.0 / 3] == 1.0)
    assert np.all(psi[d >= 4.0 / 3] == 0.0)


def test_localizer_wraps(s2, grid1):
    psi = localizer(grid1, s2, (7.5,), 2.0, 0)
    assert psi[0] == 1.0


def test_plan_cells(plan1):
    assert plan1.depth >= 1
    assert plan1.cell_points & (plan1.cell_points - 1) == 0 and plan1.cell_points >= 8
    assert plan1.cell_center(plan1.cell_of((0.0,))) == (0.0,)
    assert plan1.cells_per_axis * plan1.cell_points == plan1.grid.points


def test_sigma_localized_dirac(corpus):
    assert sigma_localized(corpus["dirac"], 0.0).cone.members == (0, 1)


def test_sigma_localized_far_point(corpus):
    assert sigma_localized(corpus["dirac"], 1.0).cone.is_empty


def test_sigma_localized_heaviside(corpus):
    assert sigma_localized(corpus["heaviside"], 0.0).cone.labels() == ["+", "-"]


def test_sigma_localized_outside(corpus):
    with pytest.raises(PreconditionError):
        sigma_localized(corpus["dirac"], 9.0)


def test_monotone_localization(corpus, plan1):
    for name, net in corpus.items():
        for x0 in (0.0, 0.25, 1.0):
            assert sigma_localized(net, x0, plan=plan1).nested_violations == (), (name, x0)


# ---------------------------------------------------------------- wave fronts


def test_wavefront_dirac(corpus, plan1):
    c0 = plan1.cell_of((0.0,))
    assert wavefront(corpus["dirac"], plan=plan1).pairs == ((c0, 0), (c0, 1))


def test_wavefront_boundary_value(corpus, plan1):
    c0 = plan1.cell_of((0.0,))
    assert wavefront(corpus["boundary_value_minus"], plan=plan1).pairs == ((c0, 1),)


def test_sing_supp(corpus, plan1):
    c0 = plan1.cell_of((0.0,))[0]
    width = 2 * plan1.radius / 3 ** plan1.depth
    reach = int(np.ceil(width / plan1.cell_width))
    for name in ("dirac", "heaviside_cut", "boundary_value_minus"):
        cells = sing_supp(corpus[name], plan=plan1)
        assert (c0,) in cells
        assert all(abs(c[0] - c0) <= reach for c in cells), name
    assert sing_supp(corpus["canonical_bump"], plan=plan1) == ()
    assert sing_supp(corpus["gevrey_bump_function"], plan=plan1) == ()


def test_projection_consistency(corpus, plan1):
    for net in corpus.values():
        wf = wavefront(net, plan=plan1)
        assert set(wf.cells) == set(sing_supp(net, plan=plan1))


def test_translation_covariance(mnet1, plan1):
    shift = 3
    dx = shift * plan1.cell_width
    a = wavefront(_embed(mnet1, "dirac"), plan=plan1)
    b = wavefront(_embed(mnet1, f"dirac:at={dx}"), plan=plan1)
    assert b.pairs == tuple(((c[0] + shift,), k) for c, k in a.pairs)


def test_threads_deterministic(corpus, plan1, monkeypatch):
    one = wavefront(corpus["heaviside"], plan=plan1)
    monkeypatch.setenv("ULTRANET_THREADS", "4")
    four = wavefront(corpus["heaviside"], plan=plan1)
    assert one.pairs == four.pairs


def test_dilate_pairs(plan1):
    n = plan1.cells_per_axis
    out = dilate_pairs([((0,), 1)], plan1)
    assert out == {((n - 1,), 1), ((0,), 1), ((1,), 1)}


@pytest.mark.slow
def test_wavefront_line_delta_2d(mnet2):
    net = _embed(mnet2, "line_delta_2d:axis=x")
    wf = wavefront(net, B16)
    cy = wf.plan.cell_of((0.0, 0.0))[1]
    assert wf.pairs
    assert {c[1] for c in wf.cells} == {cy}
    # the normal directions, up to the one-bin tolerance for sector edges
    found = {b for _, b in wf.pairs}
    assert {4, 12} <= found <= set(ConeSet(B16, (4, 12)).dilate())
    assert len(wf.cells) == wf.plan.cells_per_axis


# ---------------------------------------------------------------- functorial properties


def test_wf_properties_dirac_derivative(corpus):
    r = check_wf_properties(corpus["dirac"], (1,), corpus["canonical_bump"])
    assert r["passes"]
    assert r["wf_derivative"] == r["wf"]


def test_wf_properties_factor_one_near_singularity(corpus):
    r = check_wf_properties(corpus["boundary_value_minus"], (1,), corpus["canonical_bump"])
    assert r["passes"]
    assert r["wf_factor"] == r["wf"]


@pytest.mark.parametrize("alpha", [(0,), (1,), (2,)])
def test_wf_properties_bump(corpus, alpha):
    r = check_wf_properties(corpus["canonical_bump"], alpha, corpus["canonical_bump"])
    assert r["passes"] and r["wf"] == [] and r["wf_derivative"] == [] and r["wf_factor"] == []


def test_wf_properties_needs_regular_factor(corpus):
    with pytest.raises(PreconditionError):
        check_wf_properties(corpus["dirac"], (1,), corpus["dirac"])


def test_periodized_heaviside_jumps_back(corpus, plan1):
    # without a cutoff the periodic step drops from 1 to 0 at the domain edge
    assert set(wavefront(corpus["heaviside"], plan=plan1).cells) == {(0,), plan1.cell_of((0.0,))}


def test_derivative_wavefront_direct(corpus, plan1):
    base = wavefront(corpus["heaviside_cut"], plan=plan1)
    d = wavefront(spectral_derivative(corpus["heaviside_cut"], (1,)), plan=plan1)
    assert set(d.pairs) <= dilate_pairs(base.pairs, plan1)
