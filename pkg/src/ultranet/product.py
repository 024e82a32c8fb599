"""Cone arithmetic and the product wave-front check.

Direction bins are closed sectors (1D: the two half-lines).  The Minkowski
sum of two closed sectors whose covering arc is shorter than a half-turn is
that covering arc; when the arc reaches a half-turn some pair of directions
is antipodal and the sum contains 0.  At bin level this gives an exact
formula, computed by :func:`cone_sum`.  :func:`sampled_cone_sum` evaluates
the same sum by brute force over sampled directions and magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import SampledNet, check_compatible, net_mul
from .errors import DomainError, SeparationError
from .microlocal import (
    Cell,
    ConeSet,
    LocalizerPlan,
    WavefrontEstimate,
    dilate_pairs,
    localizer_plan,
    wavefront,
)
from .spectral import DEFAULT_THRESHOLDS, DirectionBins, Thresholds

CANCEL_TOL = 1e-9


@dataclass(frozen=True)
class ConePair:
    """Minkowski sum of two bin cones and the closure of the sum.

    ``closure_union`` is ``sum | A | B``; ``sum_defined`` is false when some
    pair of directions cancels.
    """

    sum_defined: bool
    sum: ConeSet
    closure_union: ConeSet

    def to_dict(self) -> dict:
        return {
            "sum_defined": self.sum_defined,
            "sum": list(self.sum.members),
            "closure_union": list(self.closure_union.members),
        }


def _check_bins(a: ConeSet, b: ConeSet) -> DirectionBins:
    if a.bins != b.bins:
        raise DomainError("cones live on different direction bins")
    return a.bins


def _arc(bins: DirectionBins, i: int, j: int) -> Optional[List[int]]:
    """Bins on the short arc from ``i`` to ``j``, or None if it reaches a half-turn."""
    n = bins.count
    fwd = (j - i) % n
    d = min(fwd, n - fwd)
    # closed sectors i, j span (d + 1) bin widths; a half-turn is n/2 widths
    if d + 1 >= n / 2:
        return None
    step = 1 if fwd == d else -1
    return [(i + step * k) % n for k in range(d + 1)]


def cone_sum(a: ConeSet, b: ConeSet) -> ConePair:
    """Bin-exact Minkowski sum ``A + B`` with its closure ``(A+B) | A | B``.

    In 1D the half-lines add to themselves and opposite half-lines cancel.
    In 2D each pair of bins contributes the bins of its covering arc; a pair
    whose covering arc reaches a half-turn makes the sum undefined.  When
    undefined, ``sum`` still lists the arcs of the non-cancelling pairs.
    """
    bins = _check_bins(a, b)
    out = set()
    defined = True
    for i in a:
        for j in b:
            if bins.dim == 1:
                if i == j:
                    out.add(i)
                else:
                    defined = False
                continue
            arc = _arc(bins, i, j)
            if arc is None:
                defined = False
            else:
                out.update(arc)
    s = ConeSet(bins, tuple(out))
    return ConePair(defined, s, s.union(a).union(b))


def _bin_directions(bins: DirectionBins, b: int, per_bin: int) -> np.ndarray:
    if bins.dim == 1:
        return bins.unit_vector(b)[None]
    t = bins.angle(b) + bins.width * ((np.arange(per_bin) + 0.5) / per_bin - 0.5)
    return np.column_stack([np.cos(t), np.sin(t)])


def sampled_cone_sum(a: ConeSet, b: ConeSet, per_bin: int = 8,
                     ratios: Optional[Sequence[float]] = None) -> ConePair:
    """Brute-force Minkowski sum over sampled directions and magnitude ratios.

    Directions sit at the midpoints of ``per_bin`` equal sub-sectors of each
    bin.  Every pair ``(u, v)`` is summed as ``u + t v`` for each ratio ``t``
    (default ``2**-4 .. 2**4``), normalized and re-binned.  The sum is
    undefined when some ``|u + t v|`` falls below ``1e-9`` relative to the
    larger summand.
    """
    bins = _check_bins(a, b)
    if ratios is None:
        ratios = 2.0 ** np.arange(-4, 5)
    t = np.asarray(ratios, dtype=float)
    if a.is_empty or b.is_empty:
        return ConePair(True, ConeSet(bins), a.union(b))
    u = np.concatenate([_bin_directions(bins, i, per_bin) for i in a])
    v = np.concatenate([_bin_directions(bins, j, per_bin) for j in b])
    w = u[:, None, None, :] + t[None, None, :, None] * v[None, :, None, :]
    w = w.reshape(-1, bins.dim)
    scale = np.maximum(1.0, np.broadcast_to(t[None, None, :], (len(u), len(v), len(t))).ravel())
    mag = np.linalg.norm(w, axis=1)
    defined = bool(np.all(mag >= CANCEL_TOL * scale))
    keep = mag >= CANCEL_TOL * scale
    hit = bins.bin_of(*w[keep].T)
    s = ConeSet(bins, tuple(int(h) for h in np.unique(hit) if h >= 0))
    return ConePair(defined, s, s.union(a).union(b))


# ---------------------------------------------------------------------------
# Wave-front sums and the product check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WFSum:
    """Per-cell cone sums of two wave fronts and the cancellation hypothesis.

    Attributes
    ----------
    pairs : tuple of (cell, bin)
        ``{(x, xi + eta)}`` over cells shared by both wave fronts.
    allowed : tuple of (cell, bin)
        ``(WF f + WF g) | WF f | WF g``.
    hypothesis_ok : bool
        No shared cell has a cancelling pair of directions.
    failing_cells : tuple of cells
    per_cell : dict
        Cell -> :class:`ConePair` for shared cells.
    """

    pairs: Tuple[Tuple[Cell, int], ...]
    allowed: Tuple[Tuple[Cell, int], ...]
    hypothesis_ok: bool
    failing_cells: Tuple[Cell, ...]
    per_cell: Dict[Cell, ConePair] = field(default_factory=dict, compare=False)


def _cones_by_cell(wf: WavefrontEstimate) -> Dict[Cell, ConeSet]:
    return {c: wf.cone_at(c) for c in wf.cells}


def wf_sum(wf_f: WavefrontEstimate, wf_g: WavefrontEstimate) -> WFSum:
    """Sum of two wave-front estimates on the same cell decomposition."""
    if wf_f.plan != wf_g.plan:
        raise DomainError("wave fronts use different cell decompositions")
    cf, cg = _cones_by_cell(wf_f), _cones_by_cell(wf_g)
    per_cell = {c: cone_sum(cf[c], cg[c]) for c in sorted(set(cf) & set(cg))}
    pairs = sorted((c, b) for c, cp in per_cell.items() for b in cp.sum)
    allowed = set(wf_f.pairs) | set(wf_g.pairs)
    allowed.update((c, b) for c, cp in per_cell.items() for b in cp.closure_union)
    failing = tuple(c for c, cp in per_cell.items() if not cp.sum_defined)
    return WFSum(tuple(pairs), tuple(sorted(allowed)), not failing, failing, per_cell)


def _cells_json(pairs: Iterable[Tuple[Cell, int]]) -> List[dict]:
    by_cell: Dict[Cell, List[int]] = {}
    for c, b in pairs:
        by_cell.setdefault(c, []).append(b)
    return [{"cell": list(c), "bins": sorted(bs)} for c, bs in sorted(by_cell.items())]


def hormander_check(f: SampledNet, g: SampledNet, bins: Optional[DirectionBins] = None,
                    thresholds: Thresholds = DEFAULT_THRESHOLDS, plan: Optional[LocalizerPlan] = None) -> dict:
    """Check ``WF(fg)`` against ``(WF f + WF g) | WF f | WF g``.

    The allowed set (never the estimate of ``WF(fg)``) is dilated by one cell
    and one bin.  When the cancellation hypothesis fails the inclusion is not
    asserted; ``inclusion`` is then None and ``status`` says why.  All three
    estimates are recorded either way.
    """
    check_compatible(f, g)
    bins = bins or DirectionBins.for_grid(f.grid)
    plan = plan or localizer_plan(f.grid, f.order, bins, thresholds=thresholds)
    wf_f = wavefront(f, bins, thresholds, plan)
    wf_g = wavefront(g, bins, thresholds, plan)
    wf_fg = wavefront(net_mul(f, g), bins, thresholds, plan)
    s = wf_sum(wf_f, wf_g)
    report = {
        "plan": plan.to_dict(),
        "bins": bins.count,
        "wf_f": _cells_json(wf_f.pairs),
        "wf_g": _cells_json(wf_g.pairs),
        "wf_fg": _cells_json(wf_fg.pairs),
        "allowed": _cells_json(s.allowed),
        "hypothesis_ok": s.hypothesis_ok,
        "failing_cells": [list(c) for c in s.failing_cells],
    }
    if not s.hypothesis_ok:
        report.update(status="hypothesis violated - theorem not applicable", inclusion=None, violations=[])
        return report
    allowed = dilate_pairs(s.allowed, plan)
    bad = [(c, b) for c, b in wf_fg.pairs if (c, b) not in allowed]
    report.update(status="inclusion holds" if not bad else "inclusion violated",
                  inclusion=not bad, violations=[{"cell": list(c), "bin": b} for c, b in bad])
    return report


# ---------------------------------------------------------------------------
# Separation
# ---------------------------------------------------------------------------


def cone_separation(a: ConeSet, b: ConeSet, gamma: ConeSet, max_rounds: int = 1) -> Tuple[ConeSet, ConeSet]:
    """Enlarge ``A`` and ``B`` to ``G1``, ``G2`` with ``closure(G1 + G2) <= Gamma``.

    Bins adjacent to the current cones are tried in increasing order,
    alternating between ``A`` and ``B``, and kept when the enlarged sum stays
    defined and inside ``Gamma``.  At most ``max_rounds`` rings are added.

    Raises
    ------
    SeparationError
        When ``closure(A + B)`` already leaves ``Gamma`` or the sum is
        undefined; ``witness_bin`` names a violating bin (None when undefined).
    """
    bins = _check_bins(a, b)
    _check_bins(a, gamma)
    base = cone_sum(a, b)
    if not base.sum_defined:
        raise SeparationError("A + B contains opposite directions", witness_bin=None)
    outside = [x for x in base.closure_union if x not in gamma]
    if outside:
        raise SeparationError(f"closure of A + B leaves Gamma at bin {outside[0]}", witness_bin=outside[0])

    def fits(c1: ConeSet, c2: ConeSet) -> bool:
        cp = cone_sum(c1, c2)
        return cp.sum_defined and cp.closure_union.issubset(gamma)

    g1, g2 = a, b
    for _ in range(max_rounds):
        ring1 = [x for x in g1.dilate() if x not in g1]
        ring2 = [x for x in g2.dilate() if x not in g2]
        grown = False
        for k in range(max(len(ring1), len(ring2))):
            for ring, first in ((ring1, True), (ring2, False)):
                if k >= len(ring):
                    continue
                cand = (g1 if first else g2).union(ConeSet(bins, (ring[k],)))
                if fits(cand, g2) if first else fits(g1, cand):
                    if first:
                        g1 = cand
                    else:
                        g2 = cand
                    grown = True
        if not grown:
            break
    return g1, g2


# ---------------------------------------------------------------------------
# Randomized closure trials
# ---------------------------------------------------------------------------


def random_cone(bins: DirectionBins, rng: np.random.Generator, max_arcs: int = 2, max_len: int = 4) -> ConeSet:
    """Union of 1..max_arcs random arcs, each 1..max_len bins long."""
    members = set()
    for _ in range(int(rng.integers(1, max_arcs + 1))):
        start = int(rng.integers(bins.count))
        length = int(rng.integers(1, max_len + 1))
        members.update((start + k) % bins.count for k in range(length))
    return ConeSet(bins, tuple(members))


def dense_closure(a: ConeSet, b: ConeSet, per_bin: int = 4, steps: int = 1025) -> ConeSet:
    """Brute-force closure of ``A + B``: bins hit by ``(1-l) u + l v``.

    ``l`` runs over ``steps`` uniform values in ``[0, 1]``, so the endpoints
    contribute ``A`` and ``B`` themselves.  A uniform grid in ``l`` resolves
    the fast turning of the sum direction near ``l = 1/2`` for nearly
    opposite summands.
    """
    bins = _check_bins(a, b)
    lam = np.linspace(0.0, 1.0, steps)
    u = np.concatenate([_bin_directions(bins, i, per_bin) for i in a])
    v = np.concatenate([_bin_directions(bins, j, per_bin) for j in b])
    hit = set()
    for row in u:
        w = (1 - lam)[None, :, None] * row[None, None, :] + lam[None, :, None] * v[:, None, :]
        w = w.reshape(-1, bins.dim)
        ok = np.linalg.norm(w, axis=1) > CANCEL_TOL
        hit.update(int(h) for h in np.unique(bins.bin_of(*w[ok].T)) if h >= 0)
    return ConeSet(bins, tuple(hit))


def random_cone_trials(trials: int = 100, count: int = 64, seed: int = 0, max_draws: int = 100000) -> dict:
    """Compare :func:`cone_sum` closures with :func:`dense_closure` on random cones.

    Pairs are drawn until ``trials`` of them have a defined sum.  Returns the
    number of exact bin-set matches and the mismatching pairs.
    """
    bins = DirectionBins(2, count)
    rng = np.random.default_rng(seed)
    matches, mismatches, draws = 0, [], 0
    done = 0
    while done < trials:
        draws += 1
        if draws > max_draws:
            raise DomainError(f"only {done} defined pairs in {max_draws} draws")
        a, b = random_cone(bins, rng), random_cone(bins, rng)
        cp = cone_sum(a, b)
        if not cp.sum_defined:
            continue
        done += 1
        oracle = dense_closure(a, b)
        if oracle.members == cp.closure_union.members:
            matches += 1
        else:
            mismatches.append({"a": list(a.members), "b": list(b.members),
                               "formula": list(cp.closure_union.members), "oracle": list(oracle.members)})
    return {"trials": trials, "bins": count, "seed": seed, "draws": draws, "matches": matches,
            "mismatches": mismatches}
