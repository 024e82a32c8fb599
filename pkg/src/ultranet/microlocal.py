"""Singular cones, singular support and wave-front estimates.

The singular cone of a net collects the direction bins where the decay fit
fails.  Localizing with Gevrey cutoffs ``psi_j`` of radius ``r / 3**j`` around
a point and intersecting the cones over ``j`` estimates the cone at that
point.  Doing this at every cell center of a uniform cell decomposition gives
the wave-front estimate, whose projection is the singular support.
"""

from __future__ import annotations

import functools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    EpsilonLadder,
    GevreyOrder,
    Grid,
    SampledNet,
    net_mul,
    spectral_derivative,
)
from .errors import PreconditionError
from .mollifier import gevrey_cutoff
from .spectral import (
    DEFAULT_THRESHOLDS,
    DecayFit,
    DirectionBins,
    Thresholds,
    bin_is_regular,
    fit_all_bins,
    fourier_net,
    spectral_reference,
)

Cell = Tuple[int, ...]
MIN_SUPPORT_SPACINGS = 16


def thread_count() -> int:
    """Worker cap from ``ULTRANET_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("ULTRANET_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ConeSet:
    """Set of direction bins, stored sorted."""

    bins: DirectionBins
    members: Tuple[int, ...] = ()

    def __post_init__(self):
        mem = tuple(sorted(set(int(b) for b in self.members)))
        for b in mem:
            if not 0 <= b < self.bins.count:
                raise ValueError(f"bin {b} out of range for {self.bins.count} bins")
        object.__setattr__(self, "members", mem)

    def __contains__(self, b) -> bool:
        return b in self.members

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def is_empty(self) -> bool:
        return not self.members

    def dilate(self) -> "ConeSet":
        out = set()
        for b in self.members:
            out.update(self.bins.neighbors(b))
        return ConeSet(self.bins, tuple(out))

    def union(self, other: "ConeSet") -> "ConeSet":
        return ConeSet(self.bins, self.members + other.members)

    def intersection(self, other: "ConeSet") -> "ConeSet":
        return ConeSet(self.bins, tuple(set(self.members) & set(other.members)))

    def issubset(self, other: "ConeSet") -> bool:
        return set(self.members) <= set(other.members)

    def labels(self) -> List[str]:
        return [self.bins.label(b) for b in self.members]


def sigma_cone(net: SampledNet, bins: Optional[DirectionBins] = None,
               thresholds: Thresholds = DEFAULT_THRESHOLDS, floor_ref=None) -> Tuple[ConeSet, List[DecayFit]]:
    """Singular cone of a net: bins whose decay fit fails the regularity rule.

    ``floor_ref`` (per-eps log magnitudes) raises the noise floor to a
    reference scale, as used for localized pieces of a larger net.  Returns
    the cone and the per-bin fits.
    """
    bins = bins or DirectionBins.for_grid(net.grid)
    fits = fit_all_bins(fourier_net(net), bins, thresholds, floor_ref)
    members = tuple(f.bin for f in fits if not bin_is_regular(f, thresholds))
    return ConeSet(bins, members), fits


# ---------------------------------------------------------------------------
# Localizers
# ---------------------------------------------------------------------------


def periodic_offset(grid: Grid, x0: Sequence[float]) -> List[np.ndarray]:
    """Per-axis offsets ``x - x0`` wrapped into ``[-L, L)``."""
    L = grid.extent
    return [np.mod(x - c + L, 2 * L) - L for x, c in zip(grid.mesh(), x0)]


def localizer(grid: Grid, order: GevreyOrder, x0: Sequence[float], radius: float, j: int) -> np.ndarray:
    """Gevrey cutoff ``psi_j``: 1 within ``radius/3**j`` of ``x0``, 0 beyond twice that."""
    r = np.sqrt(sum(d ** 2 for d in periodic_offset(grid, x0)))
    rho = radius / 3 ** j
    return gevrey_cutoff(r, rho, 2 * rho, order.s)


@dataclass(frozen=True)
class LocalizerPlan:
    """Usable localizer scales and the induced cell decomposition.

    Attributes
    ----------
    radius : float
        Plateau radius of ``psi_0``.
    depth : int
        Largest usable ``j``.
    cell_points : int
        Cell width in grid points.
    localizer_k2 : tuple of float
        Smallest fitted ``k2`` of each tested localizer.
    """

    grid: Grid
    order: GevreyOrder
    bins: DirectionBins
    radius: float
    depth: int
    cell_points: int
    localizer_k2: Tuple[float, ...]

    @property
    def cell_width(self) -> float:
        return self.cell_points * self.grid.spacing

    @property
    def cells_per_axis(self) -> int:
        return self.grid.points // self.cell_points

    def cell_center(self, cell: Cell) -> Tuple[float, ...]:
        return tuple(-self.grid.extent + k * self.cell_width for k in cell)

    def cell_of(self, x: Sequence[float]) -> Cell:
        n = self.cells_per_axis
        return tuple(int(round((v + self.grid.extent) / self.cell_width)) % n for v in x)

    def all_cells(self) -> List[Cell]:
        n = self.cells_per_axis
        if self.grid.dim == 1:
            return [(k,) for k in range(n)]
        return [(a, b) for a in range(n) for b in range(n)]

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "depth": self.depth,
            "cell_points": self.cell_points,
            "cell_width": self.cell_width,
            "localizer_radii": [self.radius / 3 ** j for j in range(self.depth + 1)],
            "localizer_k2": list(self.localizer_k2),
        }


def default_radius(grid: Grid) -> float:
    return grid.extent / 4


@functools.lru_cache(maxsize=32)
def localizer_plan(grid: Grid, order: GevreyOrder, bins: DirectionBins, radius: Optional[float] = None,
                   thresholds: Thresholds = DEFAULT_THRESHOLDS, j_max: int = 12) -> LocalizerPlan:
    """Certify localizer scales on ``grid`` and derive the cell width.

    ``psi_j`` is usable while its support diameter spans at least 16 grid
    spacings and its own decay fit gives ``k2 >= localizer_margin *
    kappa_reg`` in every bin.  Cells are as wide as the smallest power of two
    (at least 8 points) covering the finest usable support radius, so a
    singularity at a cell center lies outside the finest localizer of every
    other cell.
    """
    radius = default_radius(grid) if radius is None else float(radius)
    ladder = EpsilonLadder.geometric(2, 5)
    ks = []
    depth = -1
    for j in range(j_max + 1):
        support = 2 * radius / 3 ** j
        if 2 * support < MIN_SUPPORT_SPACINGS * grid.spacing:
            break
        psi = localizer(grid, order, (0.0,) * grid.dim, radius, j)
        net = SampledNet.constant_in_eps(order, ladder, grid, psi)
        fits = fit_all_bins(fourier_net(net), bins, thresholds)
        k2 = min(f.k2 if not f.vacuous else np.inf for f in fits)
        ok = all(
            f.vacuous or (f.k2 >= thresholds.localizer_margin * thresholds.kappa_reg
                          and f.residual_rms <= thresholds.rho_max)
            for f in fits
        )
        ks.append(float(k2))
        if not ok:
            break
        depth = j
    if depth < 0:
        raise PreconditionError(
            f"no localizer of radius {radius} is resolved as regular on this grid; increase N or the radius"
        )
    finest = 2 * radius / 3 ** depth / grid.spacing
    cell = 8
    while cell < finest:
        cell *= 2
    cell = min(cell, grid.points // 2)
    return LocalizerPlan(grid, order, bins, radius, depth, cell, tuple(ks))


# ---------------------------------------------------------------------------
# Localized cones
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalCone:
    """Singular cone at a point with its per-scale trace.

    ``scales`` holds ``(j, members, fits)`` for every localizer used.
    ``nested_violations`` lists the ``j`` where the nesting
    ``Sigma(psi_{j+1} f) within Sigma(psi_j f)`` fails beyond one bin.
    """

    cone: ConeSet
    point: Tuple[float, ...]
    scales: Tuple[Tuple[int, Tuple[int, ...], Tuple[DecayFit, ...]], ...]
    nested_violations: Tuple[int, ...] = ()
    vacuous: bool = False


def _check_point(grid: Grid, x0: Sequence[float]) -> Tuple[float, ...]:
    x0 = tuple(float(v) for v in np.atleast_1d(x0))
    if len(x0) != grid.dim:
        raise PreconditionError(f"point {x0} does not match grid dimension {grid.dim}")
    L = grid.extent
    if any(not (-L <= v <= L) for v in x0):
        raise PreconditionError(f"point {x0} lies outside the grid domain")
    return x0


def sigma_localized(net: SampledNet, x0, j_max: Optional[int] = None, bins: Optional[DirectionBins] = None,
                    thresholds: Thresholds = DEFAULT_THRESHOLDS, plan: Optional[LocalizerPlan] = None,
                    floor_ref=None) -> LocalCone:
    """Singular cone at ``x0``: intersection of the cones of ``psi_j * net``.

    ``j`` runs from 0 to ``min(j_max, plan.depth)``.  Noise floors are
    measured against the spectrum of the unlocalized net, so roundoff left
    in far-away localized pieces is not mistaken for a singularity.
    """
    bins = bins or DirectionBins.for_grid(net.grid)
    x0 = _check_point(net.grid, x0)
    plan = plan or localizer_plan(net.grid, net.order, bins, thresholds=thresholds)
    depth = plan.depth if j_max is None else min(j_max, plan.depth)
    psi0 = localizer(net.grid, net.order, x0, plan.radius, 0)
    if np.abs(net.mantissa * psi0).max() <= thresholds.noise_floor:
        return LocalCone(ConeSet(bins), x0, (), (), True)
    if floor_ref is None:
        floor_ref = spectral_reference(fourier_net(net))
    cone = None
    prev = None
    scales = []
    violations = []
    for j in range(depth + 1):
        psi = psi0 if j == 0 else localizer(net.grid, net.order, x0, plan.radius, j)
        loc = net_mul(net, SampledNet.constant_in_eps(net.order, net.ladder, net.grid, psi))
        members, fits = sigma_cone(loc, bins, thresholds, floor_ref)
        scales.append((j, members.members, tuple(fits)))
        if prev is not None and not members.issubset(prev.dilate()):
            violations.append(j)
        prev = members
        cone = members if cone is None else cone.intersection(members)
    return LocalCone(cone, x0, tuple(scales), tuple(violations))


# ---------------------------------------------------------------------------
# Wave front
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WavefrontEstimate:
    """Set of (cell, bin) pairs with the per-cell local cones.

    Attributes
    ----------
    plan : LocalizerPlan
        Cell decomposition and localizer scales used.
    pairs : tuple of (cell, bin)
        Sorted pairs.
    local : dict
        Cell -> :class:`LocalCone` for every evaluated cell.
    """

    plan: LocalizerPlan
    pairs: Tuple[Tuple[Cell, int], ...]
    local: Dict[Cell, LocalCone] = field(default_factory=dict, compare=False)

    @property
    def bins(self) -> DirectionBins:
        return self.plan.bins

    @property
    def cells(self) -> Tuple[Cell, ...]:
        return tuple(sorted({c for c, _ in self.pairs}))

    def cone_at(self, cell: Cell) -> ConeSet:
        return ConeSet(self.bins, tuple(b for c, b in self.pairs if c == cell))

    def metadata(self) -> dict:
        return self.plan.to_dict()


def _cell_job(args):
    net, cell, plan, bins, thresholds, ref = args
    return cell, sigma_localized(net, plan.cell_center(cell), bins=bins, thresholds=thresholds, plan=plan,
                                 floor_ref=ref)


def wavefront(net: SampledNet, bins: Optional[DirectionBins] = None, thresholds: Thresholds = DEFAULT_THRESHOLDS,
              plan: Optional[LocalizerPlan] = None, cells: Optional[Iterable[Cell]] = None) -> WavefrontEstimate:
    """Wave-front estimate over all cells (or the given subset).

    Cells are processed in parallel up to ``ULTRANET_THREADS`` workers and
    merged in sorted order.
    """
    bins = bins or DirectionBins.for_grid(net.grid)
    plan = plan or localizer_plan(net.grid, net.order, bins, thresholds=thresholds)
    todo = sorted(cells) if cells is not None else plan.all_cells()
    ref = spectral_reference(fourier_net(net))
    jobs = [(net, c, plan, bins, thresholds, ref) for c in todo]
    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell_job, jobs))
    else:
        results = [_cell_job(j) for j in jobs]
    local = dict(results)
    pairs = tuple(sorted((c, b) for c, lc in local.items() for b in lc.cone.members))
    est = WavefrontEstimate(plan, pairs, local)
    assert set(est.cells) == {c for c, lc in local.items() if not lc.cone.is_empty}
    return est


def sing_supp(net: SampledNet, bins: Optional[DirectionBins] = None, thresholds: Thresholds = DEFAULT_THRESHOLDS,
              plan: Optional[LocalizerPlan] = None) -> Tuple[Cell, ...]:
    """Cells whose center carries a nonempty localized singular cone."""
    return wavefront(net, bins, thresholds, plan).cells


def dilate_pairs(pairs: Iterable[Tuple[Cell, int]], plan: LocalizerPlan) -> set:
    """One-cell (Chebyshev, periodic) and one-bin dilation of a pair set."""
    n = plan.cells_per_axis
    out = set()
    offsets = [(-1,), (0,), (1,)] if plan.grid.dim == 1 else [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)]
    for cell, b in pairs:
        for off in offsets:
            c2 = tuple((c + o) % n for c, o in zip(cell, off))
            for b2 in plan.bins.neighbors(b):
                out.add((c2, b2))
    return out


def _inclusion(sub: WavefrontEstimate, sup: WavefrontEstimate) -> List[dict]:
    allowed = dilate_pairs(sup.pairs, sup.plan)
    bad = []
    for cell, b in sub.pairs:
        if (cell, b) not in allowed:
            lc = sub.local.get(cell)
            fits = [f.to_row() for j, _, fs in (lc.scales if lc else ()) for f in fs if f.bin == b]
            bad.append({"cell": list(cell), "bin": b, "fits": fits})
    return bad


def check_wf_properties(net: SampledNet, alpha, regular_factor: SampledNet,
                        bins: Optional[DirectionBins] = None, thresholds: Thresholds = DEFAULT_THRESHOLDS) -> dict:
    """Derivative and regular-factor inclusions of the wave front.

    Checks ``WF(d^alpha f)`` and ``WF(g f)`` against ``WF(f)`` dilated by one
    cell and one bin, and that each projection equals the singular support
    of the same run.  Violations are reported with their fits.
    """
    from .spectral import regularity_test

    bins = bins or DirectionBins.for_grid(net.grid)
    ok, _ = regularity_test(regular_factor, bins, thresholds)
    if not ok:
        raise PreconditionError("regular_factor does not pass the regularity test")
    plan = localizer_plan(net.grid, net.order, bins, thresholds=thresholds)
    base = wavefront(net, bins, thresholds, plan)
    deriv = wavefront(spectral_derivative(net, alpha), bins, thresholds, plan)
    prod = wavefront(net_mul(regular_factor, net), bins, thresholds, plan)
    d_bad = _inclusion(deriv, base)
    p_bad = _inclusion(prod, base)
    projection_ok = all(
        set(w.cells) == {c for c, lc in w.local.items() if not lc.cone.is_empty} for w in (base, deriv, prod)
    )
    return {
        "derivative_inclusion": not d_bad,
        "factor_inclusion": not p_bad,
        "projection_consistent": projection_ok,
        "derivative_violations": d_bad,
        "factor_violations": p_bad,
        "wf": [list(p) for p in base.pairs],
        "wf_derivative": [list(p) for p in deriv.pairs],
        "wf_factor": [list(p) for p in prod.pairs],
        "passes": not d_bad and not p_bad and projection_ok,
    }
