"""Fourier transforms of nets and the exponential decay-model fit.

A net is regular in a cone of directions when its slice spectra obey

    |f_hat_eps(xi)| <= C exp(k1 eps**(-a) - k2 |xi|**(1/s))

for some ``k2 > 0``.  :func:`fit_decay` estimates ``(c0, k1, k2)`` by ordinary
least squares on the shell maxima of ``log |f_hat_eps|`` inside one direction
bin, and :func:`bin_is_regular` turns the fit into a verdict.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .core import (
    EpsilonLadder,
    GevreyOrder,
    Grid,
    SampledNet,
    grid_fft,
    grid_ifft,
)
from .errors import DomainError, PreconditionError, UnderdeterminedFitError


@dataclass(frozen=True)
class Thresholds:
    """Tunable constants of the regularity and wave-front tests.

    Attributes
    ----------
    kappa_reg : float
        Smallest decay coefficient ``k2`` accepted as regular.
    rho_max : float
        Largest fit residual (log units) accepted as regular.
    k_min : float
        Negligibility witness; a bin whose spectrum shrinks like
        ``exp(-k_min eps**(-a))`` or faster is regular.
    noise_floor : float
        Samples below ``noise_floor * max |f_hat_eps|`` are excluded.
    min_samples : int
        Minimum number of shell samples for a fit.
    shell_width : int
        Radial shell width in units of the frequency spacing; 0 selects 4
        in 1D and 1 in 2D.
    r_min_bins : float
        Inner window radius in units of the frequency spacing.
    r_max_frac : float
        Outer window radius as a fraction of the Nyquist frequency.
    localizer_margin : float
        A localizer is usable only if its own fit has ``k2 >= margin * kappa_reg``.
    """

    kappa_reg: float = 0.5
    rho_max: float = 1.0
    k_min: float = 3.0
    noise_floor: float = 1e-14
    min_samples: int = 30
    shell_width: int = 0
    r_min_bins: float = 8.0
    r_max_frac: float = 0.5
    localizer_margin: float = 1.5

    def shell_width_for(self, dim: int) -> int:
        if self.shell_width > 0:
            return self.shell_width
        return 4 if dim == 1 else 1

    def to_dict(self) -> dict:
        return dict(self.__dict__)


DEFAULT_THRESHOLDS = Thresholds()


# ---------------------------------------------------------------------------
# Direction bins
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DirectionBins:
    """Partition of the unit sphere into direction bins.

    In 1D there are two bins, ``0`` for ``xi > 0`` and ``1`` for ``xi < 0``.
    In 2D bin ``k`` is the angular sector centered at ``2 pi k / count`` with
    width ``2 pi / count``, so the coordinate axes are bin centers.
    """

    dim: int
    count: int

    def __post_init__(self):
        if self.dim == 1 and self.count != 2:
            raise DomainError("1D direction bins must have count 2")
        if self.dim == 2 and (self.count < 4 or self.count % 2):
            raise DomainError("2D direction bins need an even count >= 4")
        if self.dim not in (1, 2):
            raise DomainError(f"unsupported dimension {self.dim}")

    @classmethod
    def for_grid(cls, grid: Grid, count: int = 16) -> "DirectionBins":
        return cls(1, 2) if grid.dim == 1 else cls(2, count)

    @property
    def width(self) -> float:
        return 2 * np.pi / self.count

    def angle(self, b: int) -> float:
        if self.dim == 1:
            return 0.0 if b == 0 else float(np.pi)
        return float(self.width * b)

    def label(self, b: int) -> str:
        if self.dim == 1:
            return "+" if b == 0 else "-"
        return f"{math.degrees(self.angle(b)):.2f}"

    def antipodal(self, b: int) -> int:
        return (b + self.count // 2) % self.count

    def neighbors(self, b: int) -> Tuple[int, ...]:
        """Bins within one step of ``b`` (in 1D the two bins are not adjacent)."""
        if self.dim == 1:
            return (b,)
        return tuple(sorted({(b - 1) % self.count, b, (b + 1) % self.count}))

    def bin_of(self, *xi) -> np.ndarray:
        """Bin index of each frequency vector (``-1`` at the origin)."""
        if self.dim == 1:
            x = np.asarray(xi[0], dtype=float)
            return np.where(x > 0, 0, np.where(x < 0, 1, -1))
        x, y = (np.asarray(v, dtype=float) for v in xi)
        theta = np.arctan2(y, x)
        b = np.mod(np.rint(theta / self.width).astype(int), self.count)
        return np.where((x == 0) & (y == 0), -1, b)

    def unit_vector(self, b: int) -> np.ndarray:
        t = self.angle(b)
        if self.dim == 1:
            return np.array([1.0 if b == 0 else -1.0])
        return np.array([math.cos(t), math.sin(t)])

    def all(self) -> range:
        return range(self.count)


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NetSpectrum:
    """Per-eps spectra ``f_hat_eps = exp(log_scale) * mantissa_hat``.

    ``provenance`` records the localization window, if any.
    """

    order: GevreyOrder
    ladder: EpsilonLadder
    grid: Grid
    mantissa_hat: np.ndarray
    log_scale: np.ndarray
    reg_scale: Optional[float] = None
    provenance: Dict[str, object] = field(default_factory=dict)

    def log_abs(self) -> np.ndarray:
        mag = np.abs(self.mantissa_hat)
        with np.errstate(divide="ignore"):
            return np.log(mag) + self.log_scale.reshape((-1,) + (1,) * self.grid.dim)

    def parseval_residuals(self, net: SampledNet) -> np.ndarray:
        """Relative gap between spatial and spectral energy per slice."""
        g = self.grid
        space = np.sum(np.abs(net.mantissa) ** 2, axis=tuple(range(1, g.dim + 1))) * g.cell_volume
        freq = np.sum(np.abs(self.mantissa_hat) ** 2, axis=tuple(range(1, g.dim + 1))) / (2 * g.extent) ** g.dim
        return np.abs(space - freq) / np.where(space > 0, space, 1.0)


def fourier_net(net: SampledNet, provenance: Optional[dict] = None) -> NetSpectrum:
    """Forward transform of every slice with kernel ``exp(-i x.xi)``."""
    spec = grid_fft(net.mantissa, net.grid)
    return NetSpectrum(net.order, net.ladder, net.grid, spec, np.array(net.log_scale),
                       net.reg_scale, dict(provenance or {"window": "none"}))


def inverse_fourier_net(spec: NetSpectrum) -> SampledNet:
    """Inverse of :func:`fourier_net`."""
    vals = grid_ifft(spec.mantissa_hat, spec.grid)
    return SampledNet(spec.order, spec.ladder, spec.grid, vals, spec.log_scale, reg_scale=spec.reg_scale)


# ---------------------------------------------------------------------------
# Decay fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of ``log|f_hat| ~ c0 + k1 eps**(-a) - k2 |xi|**(1/s)`` in one bin.

    ``k1`` is clamped at 0; the unclamped value is ``k1_raw``.  A vacuous fit
    has (almost) no samples above the noise floor and is regular.
    """

    bin: int
    c0: float
    k1: float
    k2: float
    residual_rms: float
    sample_count: int
    excluded_count: int = 0
    k1_raw: float = 0.0
    vacuous: bool = False

    def to_row(self) -> dict:
        return {
            "bin": self.bin,
            "c0": self.c0,
            "k1": self.k1,
            "k2": self.k2,
            "residual_rms": self.residual_rms,
            "samples": self.sample_count,
        }


@functools.lru_cache(maxsize=32)
def _geometry(grid: Grid, bins: DirectionBins, shell_width: int):
    mesh = grid.freq_mesh()
    r = np.sqrt(sum(x ** 2 for x in mesh)).ravel()
    b = bins.bin_of(*mesh).ravel()
    width = shell_width * grid.dxi
    shell = np.floor(r / width).astype(int)
    n_shell = int(shell.max()) + 1
    centers = (np.arange(n_shell) + 0.5) * width
    return r, b, shell, n_shell, centers


def _shell_table(spec: NetSpectrum, bins: DirectionBins, thr: Thresholds, floor_ref=None):
    """Shell maxima of ``log|f_hat_eps|`` per (eps, bin, shell).

    Each entry is the maximum over the bin's admissible frequencies in the
    shell and its two neighbours.  Sparse shells close to an axis can land on
    oscillation zeros of the transform, and the neighbour maximum keeps such
    isolated dips out of the fit.  Only shells lying wholly inside the radial
    window and the slice's regularization band are used.

    Returns the table (``-inf`` where a shell holds only exact zeros), the
    occupancy counts (admissible points per shell), the per-eps noise floors
    in absolute log units and the shell centers.  ``floor_ref`` optionally
    supplies reference log magnitudes per eps (for example those of the net
    before localization); the floor is then taken relative to the larger of
    the two references.
    """
    grid = spec.grid
    if bins.dim != grid.dim:
        raise DomainError("direction bins and grid dimensions differ")
    r, b, shell, n_shell, centers = _geometry(grid, bins, thr.shell_width_for(grid.dim))
    r_min = thr.r_min_bins * grid.dxi
    r_max = thr.r_max_frac * grid.nyquist
    width = centers[0] * 2
    lo, hi = shell * width, (shell + 1) * width
    # whole shells only: a clipped shell keeps a few points that may sit on zeros
    window = (lo >= r_min - 1e-9) & (hi <= r_max + 1e-9) & (b >= 0)
    mag = np.abs(spec.mantissa_hat).reshape(len(spec.ladder), -1)
    n_eps = len(spec.ladder)
    table = np.full((n_eps, bins.count, n_shell), -np.inf)
    counts = np.zeros((n_eps, bins.count, n_shell), dtype=int)
    floors = np.empty(n_eps)
    flat_index = b * n_shell + shell
    for k, eps in enumerate(spec.ladder):
        cap = r_max if spec.reg_scale is None else min(r_max, spec.reg_scale / eps)
        sel = window & (hi <= cap + 1e-9)
        peak = mag[k].max()
        ref = math.log(peak) + spec.log_scale[k] if peak > 0 else -np.inf
        if floor_ref is not None:
            ref = max(ref, float(floor_ref[k]))
        floors[k] = math.log(thr.noise_floor) + ref
        with np.errstate(divide="ignore"):
            vals = np.log(mag[k, sel]) + spec.log_scale[k]
        row = np.full(bins.count * n_shell, -np.inf)
        np.maximum.at(row, flat_index[sel], vals)
        row = row.reshape(bins.count, n_shell)
        # neighbour max: sparse shells near an axis can sit on transform zeros
        padded = np.pad(row, ((0, 0), (1, 1)), constant_values=-np.inf)
        table[k] = np.maximum(np.maximum(padded[:, :-2], padded[:, 1:-1]), padded[:, 2:])
        counts[k] = np.bincount(flat_index[sel], minlength=bins.count * n_shell).reshape(bins.count, n_shell)
    return table, counts, floors, centers


def spectral_reference(spec: NetSpectrum) -> np.ndarray:
    """Per-eps ``log max |f_hat_eps|``, the reference for noise floors."""
    peak = np.abs(spec.mantissa_hat).reshape(len(spec.ladder), -1).max(axis=1)
    with np.errstate(divide="ignore"):
        return np.log(peak) + spec.log_scale


def _fit_from_table(tab, spec: NetSpectrum, b: int, thr: Thresholds) -> DecayFit:
    table, counts, floors, centers = tab
    order = spec.order
    rows = []
    excluded = 0
    present = 0
    for k, eps in enumerate(spec.ladder):
        vals = table[k, b]
        occupied = counts[k, b] > 0
        present += int(occupied.sum())
        keep = occupied & (vals >= floors[k])
        excluded += int((occupied & ~keep).sum())
        for c, v in zip(centers[keep], vals[keep]):
            rows.append((eps ** (-order.a), -(c ** order.inv_s), v))
    n = len(rows)
    if present == 0:
        raise UnderdeterminedFitError(f"bin {b} has no frequencies inside the radial window")
    if n < thr.min_samples:
        if excluded > 0:
            return DecayFit(b, 0.0, 0.0, 0.0, 0.0, n, excluded, 0.0, True)
        raise UnderdeterminedFitError(f"bin {b}: only {n} samples (< {thr.min_samples})")
    data = np.asarray(rows)
    A = np.column_stack([np.ones(n), data[:, 0], data[:, 1]])
    coef, *_ = np.linalg.lstsq(A, data[:, 2], rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - data[:, 2]) ** 2)))
    c0, k1, k2 = (float(c) for c in coef)
    return DecayFit(b, c0, max(k1, 0.0), k2, resid, n, excluded, k1, False)


def fit_decay(spec: NetSpectrum, bins: DirectionBins, bin: int, order: Optional[GevreyOrder] = None,
              thresholds: Thresholds = DEFAULT_THRESHOLDS) -> DecayFit:
    """Fit the exponential decay model inside one direction bin.

    Samples are shell maxima (radial shells ``shell_width`` frequency steps
    wide) within ``[r_min, r_max]``, further capped per slice at
    ``reg_scale / eps`` when the net carries a regularization band.  Shells
    below the noise floor are excluded and counted.

    Raises
    ------
    UnderdeterminedFitError
        When fewer than ``min_samples`` samples remain and none was excluded
        by the noise floor.
    """
    if order is not None and order != spec.order:
        spec = NetSpectrum(order, spec.ladder, spec.grid, spec.mantissa_hat, spec.log_scale,
                           spec.reg_scale, spec.provenance)
    tab = _shell_table(spec, bins, thresholds)
    return _fit_from_table(tab, spec, bin, thresholds)


def fit_all_bins(spec: NetSpectrum, bins: DirectionBins, thresholds: Thresholds = DEFAULT_THRESHOLDS,
                 floor_ref=None) -> List[DecayFit]:
    """:func:`fit_decay` for every bin, sharing the shell table."""
    tab = _shell_table(spec, bins, thresholds, floor_ref)
    return [_fit_from_table(tab, spec, b, thresholds) for b in bins.all()]


def bin_is_regular(fit: DecayFit, thresholds: Thresholds = DEFAULT_THRESHOLDS) -> bool:
    """Regularity verdict for one bin.

    Regular when the bin is vacuous, when its spectrum vanishes at least like
    ``exp(-k_min eps**(-a))`` (negligible content), or when
    ``k2 >= kappa_reg`` with ``residual_rms <= rho_max``.
    """
    if fit.vacuous:
        return True
    if fit.k1_raw <= -thresholds.k_min:
        return True
    return fit.k2 >= thresholds.kappa_reg and fit.residual_rms <= thresholds.rho_max


def regularity_test(net: SampledNet, bins: Optional[DirectionBins] = None,
                    thresholds: Thresholds = DEFAULT_THRESHOLDS) -> Tuple[bool, List[DecayFit]]:
    """Fourier test for regular nets: every bin must show exponential decay.

    Returns the verdict and the per-bin fits.
    """
    bins = bins or DirectionBins.for_grid(net.grid)
    fits = fit_all_bins(fourier_net(net), bins, thresholds)
    return all(bin_is_regular(f, thresholds) for f in fits), fits


def compact_support_bound_check(net: SampledNet, thresholds: Thresholds = DEFAULT_THRESHOLDS,
                                coef_max: float = 0.1) -> dict:
    """Check the growth bound for compactly supported nets.

    Fits the shell maxima over all directions against ``{1, eps**(-a),
    |xi|**(1/s)}``.  The check passes when the ``|xi|**(1/s)`` coefficient is
    at most ``coef_max`` with residual at most ``rho_max``.
    """
    if net.support_box is None:
        raise PreconditionError("compact_support_bound_check needs a net with a support_box")
    spec = fourier_net(net)
    bins = DirectionBins.for_grid(net.grid, 4)
    table, counts, floors, centers = _shell_table(spec, bins, thresholds)
    merged = table.max(axis=1)
    order = net.order
    rows = []
    for k, eps in enumerate(net.ladder):
        keep = (merged[k] > -np.inf) & (merged[k] >= floors[k])
        for c, v in zip(centers[keep], merged[k][keep]):
            rows.append((1.0, eps ** (-order.a), c ** order.inv_s, v))
    if len(rows) < thresholds.min_samples:
        return {"passes": True, "vacuous": True, "samples": len(rows)}
    data = np.asarray(rows)
    coef, *_ = np.linalg.lstsq(data[:, :3], data[:, 3], rcond=None)
    resid = float(np.sqrt(np.mean((data[:, :3] @ coef - data[:, 3]) ** 2)))
    passes = bool(coef[2] <= coef_max and resid <= thresholds.rho_max)
    return {
        "passes": passes,
        "vacuous": False,
        "c0": float(coef[0]),
        "k1": float(coef[1]),
        "xi_coefficient": float(coef[2]),
        "residual_rms": resid,
        "samples": len(rows),
    }
