"""Nets of grid functions indexed by a regularization parameter.

A generalized Gevrey ultradistribution is represented by one of its
representatives, a net ``(f_eps)`` of smooth functions sampled on a periodic
grid for finitely many values of ``eps``.  Moderate nets grow at most like
``exp(k * eps**(-a))`` with ``a = 1/(2s-1)``; negligible nets decay faster than
every ``exp(-k * eps**(-a))``.  Since "for every k" cannot be checked on a
finite ladder, classification uses the growth indicator

    G(eps) = eps**a * ln sup |d^alpha f_eps|

together with the witness rules documented in :func:`classify_net`.

Slices are stored as a complex *mantissa* scaled by ``exp(log_scale)`` per
``eps``.  This keeps nets such as ``exp(1/eps)`` representable on ladders that
reach ``eps = 2**-10``, where the raw values overflow double precision.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from itertools import product as _iproduct
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    DomainError,
    IncompatibilityError,
    InvalidNetError,
    UnsupportedOrderError,
)

DEFAULT_ALPHA_MAX = 2
DEFAULT_K_MIN = 3.0
DEFAULT_RESIDUAL_TOL = 0.5
SUPPORT_TOL = 1e-12
WRAP_MARGIN = 8

Box = Tuple[Tuple[float, float], ...]
MultiIndex = Tuple[int, ...]


# ---------------------------------------------------------------------------
# Discretization types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GevreyOrder:
    """Gevrey order ``s > 1`` with its derived exponents.

    Attributes
    ----------
    s : float
        The Gevrey order.
    """

    s: float

    def __post_init__(self):
        s = float(self.s)
        if not math.isfinite(s) or s <= 1.0:
            raise DomainError(f"GevreyOrder invariant violated: s must be > 1, got {self.s!r}")
        object.__setattr__(self, "s", s)

    @property
    def a(self) -> float:
        """Growth exponent ``1/(2s-1)`` of the moderate/negligible scale."""
        return 1.0 / (2.0 * self.s - 1.0)

    @property
    def inv_s(self) -> float:
        """Frequency decay exponent ``1/s``."""
        return 1.0 / self.s


@dataclass(frozen=True)
class EpsilonLadder:
    """Strictly decreasing finite list of regularization parameters in (0, 1)."""

    values: Tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 4:
            raise DomainError(f"EpsilonLadder needs at least 4 entries, got {len(vals)}")
        for v in vals:
            if not (0.0 < v < 1.0):
                raise DomainError(f"EpsilonLadder values must lie in (0, 1), got {v}")
        if any(b >= a for a, b in zip(vals, vals[1:])):
            raise DomainError("EpsilonLadder values must be strictly decreasing")
        object.__setattr__(self, "values", vals)

    @classmethod
    def geometric(cls, j_min: int = 2, j_max: int = 10, base: float = 2.0) -> "EpsilonLadder":
        """Ladder ``base**-j`` for ``j = j_min..j_max``."""
        return cls(tuple(float(base) ** (-j) for j in range(j_min, j_max + 1)))

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def compatible_with(self, grid: "Grid", min_spacings: float = 4.0) -> Tuple["EpsilonLadder", List[float]]:
        """Drop entries finer than ``min_spacings`` grid spacings.

        Returns the truncated ladder and the list of dropped values.  Raises
        :class:`DomainError` when fewer than four entries survive.
        """
        keep = [e for e in self.values if e >= min_spacings * grid.spacing - 1e-15]
        dropped = [e for e in self.values if e not in keep]
        return EpsilonLadder(tuple(keep)), dropped


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L, L)**dim``.

    Attributes
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    extent : float
        Half-length ``L`` of each axis.
    points : int
        Samples per axis, a power of two.
    """

    dim: int
    extent: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError(f"Grid dim must be 1 or 2, got {self.dim}")
        n = int(self.points)
        if n < 8 or n & (n - 1):
            raise DomainError(f"Grid points must be a power of two >= 8, got {self.points}")
        if not (math.isfinite(self.extent) and self.extent > 0):
            raise DomainError(f"Grid extent must be positive, got {self.extent}")
        object.__setattr__(self, "points", n)
        object.__setattr__(self, "extent", float(self.extent))

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / self.points

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def axis(self) -> np.ndarray:
        """Node coordinates along one axis, starting at ``-L``."""
        return -self.extent + self.spacing * np.arange(self.points)

    def mesh(self) -> List[np.ndarray]:
        """Coordinate arrays (``ij`` indexing), one per axis."""
        if self.dim == 1:
            return [self.axis]
        return list(np.meshgrid(self.axis, self.axis, indexing="ij"))

    @property
    def freqs(self) -> np.ndarray:
        """Angular frequencies of the DFT along one axis (FFT order)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)

    def freq_mesh(self) -> List[np.ndarray]:
        if self.dim == 1:
            return [self.freqs]
        return list(np.meshgrid(self.freqs, self.freqs, indexing="ij"))

    @property
    def nyquist(self) -> float:
        return np.pi / self.spacing

    @property
    def dxi(self) -> float:
        """Frequency resolution ``pi / L``."""
        return np.pi / self.extent

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    def full_box(self) -> Box:
        return tuple((-self.extent, self.extent) for _ in range(self.dim))

    def region_mask(self, region: Optional[Box]) -> np.ndarray:
        """Boolean mask of the nodes inside a closed box (``None`` = everything)."""
        if region is None:
            return np.ones(self.shape, dtype=bool)
        region = as_box(region, self.dim)
        mask = np.ones(self.shape, dtype=bool)
        for ax, (coords, (lo, hi)) in enumerate(zip(self.mesh(), region)):
            mask &= (coords >= lo - 1e-12) & (coords <= hi + 1e-12)
        return mask

    def to_dict(self) -> dict:
        return {"dim": self.dim, "extent": self.extent, "points": self.points}


def as_box(box, dim: int) -> Box:
    """Normalize a box given as ``(lo, hi)`` or a sequence of such pairs."""
    arr = np.asarray(box, dtype=float)
    if arr.shape == (2,) and dim == 1:
        arr = arr.reshape(1, 2)
    if arr.shape != (dim, 2):
        raise DomainError(f"box must have shape ({dim}, 2), got {arr.shape}")
    if np.any(arr[:, 1] < arr[:, 0]):
        raise DomainError("box bounds must satisfy lo <= hi")
    return tuple((float(lo), float(hi)) for lo, hi in arr)


def as_multi_index(alpha, dim: int) -> MultiIndex:
    """Normalize an int or tuple to a multi-index of length ``dim``."""
    if isinstance(alpha, (int, np.integer)):
        alpha = (int(alpha),) + (0,) * (dim - 1)
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != dim or any(a < 0 for a in alpha):
        raise UnsupportedOrderError(f"invalid multi-index {alpha} for dim {dim}")
    return alpha


def multi_indices(dim: int, max_order: int) -> List[MultiIndex]:
    """All multi-indices with ``|alpha| <= max_order`` in graded order."""
    out = [a for a in _iproduct(range(max_order + 1), repeat=dim) if sum(a) <= max_order]
    return sorted(out, key=lambda a: (sum(a), tuple(-x for x in a)))


# ---------------------------------------------------------------------------
# Nets
# ---------------------------------------------------------------------------


def _normalize(mantissa: np.ndarray, log_scale: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Rescale each slice so its mantissa has max modulus 1 (zero slices stay 0)."""
    m = np.asarray(mantissa, dtype=complex)
    ls = np.asarray(log_scale, dtype=float).copy()
    flat = np.abs(m.reshape(m.shape[0], -1))
    peak = flat.max(axis=1)
    nz = peak > 0
    scale = np.ones_like(peak)
    scale[nz] = peak[nz]
    m = m / scale.reshape((-1,) + (1,) * (m.ndim - 1))
    ls[nz] = ls[nz] + np.log(peak[nz])
    ls[~nz] = 0.0
    return m, ls


@dataclass(frozen=True, eq=False)
class SampledNet:
    """Representative net ``(f_eps)`` sampled on a grid.

    The slice for ``ladder[k]`` equals ``exp(log_scale[k]) * mantissa[k]``.
    Mantissas are normalized to max modulus 1 per slice.

    Attributes
    ----------
    order, ladder, grid
        Discretization data shared by all nets that are combined together.
    mantissa : ndarray, complex, shape ``(len(ladder), *grid.shape)``
    log_scale : ndarray, shape ``(len(ladder),)``
    support_box : box or None
        Closed box outside of which every slice vanishes to ``1e-12`` relative.
    reg_scale : float or None
        Regularization band: slice ``eps`` is a faithful representative only
        for ``|xi| <= reg_scale / eps``.  ``None`` means unlimited.
    notes : tuple of str
        Warnings collected while building the net.
    """

    order: GevreyOrder
    ladder: EpsilonLadder
    grid: Grid
    mantissa: np.ndarray
    log_scale: np.ndarray
    support_box: Optional[Box] = None
    reg_scale: Optional[float] = None
    notes: Tuple[str, ...] = ()

    def __post_init__(self):
        m = np.asarray(self.mantissa, dtype=complex)
        ls = np.asarray(self.log_scale, dtype=float)
        expected = (len(self.ladder),) + self.grid.shape
        if m.shape != expected:
            raise InvalidNetError(f"samples shape {m.shape} does not match {expected}")
        if ls.shape != (len(self.ladder),):
            raise InvalidNetError("log_scale must hold one value per ladder entry")
        if not np.all(np.isfinite(m)) or not np.all(np.isfinite(ls)):
            raise InvalidNetError("net samples must be finite")
        m, ls = _normalize(m, ls)
        m.setflags(write=False)
        ls.setflags(write=False)
        object.__setattr__(self, "mantissa", m)
        object.__setattr__(self, "log_scale", ls)
        if self.support_box is not None:
            box = as_box(self.support_box, self.grid.dim)
            object.__setattr__(self, "support_box", box)
            outside = ~self.grid.region_mask(box)
            if outside.any():
                leak = np.abs(m[:, outside]).max()
                if leak > SUPPORT_TOL:
                    raise InvalidNetError(
                        f"samples do not vanish outside support_box (relative leak {leak:.3e})"
                    )
        if self.reg_scale is not None and not self.reg_scale > 0:
            raise InvalidNetError("reg_scale must be positive")
        object.__setattr__(self, "notes", tuple(self.notes))

    # construction helpers -------------------------------------------------
    @classmethod
    def from_values(cls, order, ladder, grid, values, **kw) -> "SampledNet":
        """Build from raw slice values, shape ``(len(ladder), *grid.shape)``."""
        values = np.asarray(values, dtype=complex)
        if not np.all(np.isfinite(values)):
            raise InvalidNetError("net samples must be finite")
        return cls(order, ladder, grid, values, np.zeros(len(ladder)), **kw)

    @classmethod
    def constant_in_eps(cls, order, ladder, grid, f, **kw) -> "SampledNet":
        """Net whose slices all equal the grid function ``f``."""
        f = np.asarray(f, dtype=complex)
        if f.shape != grid.shape:
            raise InvalidNetError(f"function shape {f.shape} does not match grid {grid.shape}")
        stack = np.broadcast_to(f, (len(ladder),) + grid.shape)
        return cls.from_values(order, ladder, grid, stack, **kw)

    def replace(self, **changes) -> "SampledNet":
        kw = dict(
            order=self.order,
            ladder=self.ladder,
            grid=self.grid,
            mantissa=self.mantissa,
            log_scale=self.log_scale,
            support_box=self.support_box,
            reg_scale=self.reg_scale,
            notes=self.notes,
        )
        kw.update(changes)
        return SampledNet(**kw)

    # accessors --------------------------------------------------------------
    @property
    def n_eps(self) -> int:
        return len(self.ladder)

    def slice(self, k: int) -> np.ndarray:
        """Actual values of slice ``k`` (may overflow for extreme scales)."""
        with np.errstate(over="ignore"):
            return self.mantissa[k] * np.exp(self.log_scale[k])

    @property
    def samples(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.mantissa * np.exp(self.log_scale).reshape((-1,) + (1,) * self.grid.dim)

    def is_real(self, tol: float = 1e-13) -> bool:
        return bool(np.abs(self.mantissa.imag).max() <= tol)


def check_compatible(*nets) -> None:
    """Raise :class:`IncompatibilityError` unless all nets share grid, ladder and order."""
    first = nets[0]
    for other in nets[1:]:
        if other.grid != first.grid:
            raise IncompatibilityError(f"grid mismatch: {first.grid} vs {other.grid}")
        if other.ladder != first.ladder:
            raise IncompatibilityError("ladder mismatch")
        if other.order != first.order:
            raise IncompatibilityError(f"order mismatch: {first.order} vs {other.order}")


def _min_optional(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def _box_union(a: Optional[Box], b: Optional[Box]) -> Optional[Box]:
    if a is None or b is None:
        return None
    return tuple((min(p[0], q[0]), max(p[1], q[1])) for p, q in zip(a, b))


def _box_intersection(a: Optional[Box], b: Optional[Box]) -> Optional[Box]:
    if a is None:
        return b
    if b is None:
        return a
    out = []
    for p, q in zip(a, b):
        lo, hi = max(p[0], q[0]), min(p[1], q[1])
        if hi < lo:
            lo = hi = 0.5 * (lo + hi)
        out.append((lo, hi))
    return tuple(out)


def _bcast(v: np.ndarray, ndim: int) -> np.ndarray:
    return v.reshape((-1,) + (1,) * ndim)


def net_add(a: SampledNet, b: SampledNet) -> SampledNet:
    """Slice-wise sum of two compatible nets."""
    check_compatible(a, b)
    d = a.grid.dim
    top = np.maximum(a.log_scale, b.log_scale)
    m = a.mantissa * _bcast(np.exp(a.log_scale - top), d) + b.mantissa * _bcast(np.exp(b.log_scale - top), d)
    return SampledNet(
        a.order, a.ladder, a.grid, m, top,
        support_box=_box_union(a.support_box, b.support_box),
        reg_scale=_min_optional(a.reg_scale, b.reg_scale),
        notes=a.notes + b.notes,
    )


def net_mul(a: SampledNet, b: SampledNet) -> SampledNet:
    """Slice-wise product of two compatible nets."""
    check_compatible(a, b)
    box = _box_intersection(a.support_box, b.support_box)
    m = a.mantissa * b.mantissa
    if box is not None:
        # the product of two tails can sit slightly above the support tolerance
        m = np.where(a.grid.region_mask(box), m, 0.0)
    return SampledNet(
        a.order, a.ladder, a.grid, m, a.log_scale + b.log_scale,
        support_box=box,
        reg_scale=_min_optional(a.reg_scale, b.reg_scale),
        notes=a.notes + b.notes,
    )


def net_scale(net: SampledNet, c: Union[complex, "GeneralizedScalar"]) -> SampledNet:
    """Multiply a net by a constant or by a generalized scalar (per-eps factor)."""
    d = net.grid.dim
    if isinstance(c, GeneralizedScalar):
        if c.ladder != net.ladder or c.order != net.order:
            raise IncompatibilityError("scalar and net use different ladders or orders")
        return net.replace(mantissa=net.mantissa * _bcast(c.mantissa, d), log_scale=net.log_scale + c.log_scale)
    c = complex(c)
    if c == 0:
        return net.replace(mantissa=np.zeros_like(net.mantissa), log_scale=np.zeros(net.n_eps))
    return net.replace(mantissa=net.mantissa * (c / abs(c)), log_scale=net.log_scale + math.log(abs(c)))


def net_neg(net: SampledNet) -> SampledNet:
    return net_scale(net, -1.0)


def net_sub(a: SampledNet, b: SampledNet) -> SampledNet:
    return net_add(a, net_neg(b))


# ---------------------------------------------------------------------------
# Discrete Fourier transform with the continuous convention
# ---------------------------------------------------------------------------


def _phase(grid: Grid) -> np.ndarray:
    """``exp(i L xi)`` on the frequency mesh (accounts for nodes starting at -L)."""
    p1 = np.exp(1j * grid.extent * grid.freqs)
    if grid.dim == 1:
        return p1
    return np.multiply.outer(p1, p1)


def grid_fft(stack: np.ndarray, grid: Grid) -> np.ndarray:
    """Approximate ``f_hat(xi) = int f(x) exp(-i x.xi) dx`` for each slice.

    ``stack`` has the eps index first; frequencies are in FFT order.
    """
    axes = tuple(range(1, grid.dim + 1))
    return np.fft.fftn(stack, axes=axes) * (grid.cell_volume * _phase(grid))


def grid_ifft(spec: np.ndarray, grid: Grid) -> np.ndarray:
    """Inverse of :func:`grid_fft`."""
    axes = tuple(range(1, grid.dim + 1))
    return np.fft.ifftn(spec * np.conj(_phase(grid)), axes=axes) / grid.cell_volume


def effective_support(stack: np.ndarray, grid: Grid, tol: float = SUPPORT_TOL) -> Box:
    """Bounding box of the nodes where some slice exceeds ``tol`` times its max."""
    mag = np.abs(np.asarray(stack))
    peak = mag.reshape(mag.shape[0], -1).max(axis=1)
    peak = np.where(peak > 0, peak, 1.0)
    above = (mag / peak.reshape((-1,) + (1,) * grid.dim) > tol).any(axis=0)
    if not above.any():
        return tuple((0.0, 0.0) for _ in range(grid.dim))
    box = []
    ax = grid.axis
    for d in range(grid.dim):
        other = tuple(i for i in range(grid.dim) if i != d)
        hit = np.nonzero(above.any(axis=other) if other else above)[0]
        box.append((float(ax[hit.min()]), float(ax[hit.max()])))
    return tuple(box)


# ---------------------------------------------------------------------------
# Spectral derivatives
# ---------------------------------------------------------------------------


def _derivative_stack(stack: np.ndarray, alpha: MultiIndex, grid: Grid) -> np.ndarray:
    """Spectral ``d^alpha`` of every slice in ``stack`` (leading axis = eps)."""
    if sum(alpha) == 0:
        return np.array(stack, dtype=complex)
    spec = np.fft.fftn(stack, axes=tuple(range(1, grid.dim + 1)))
    xi = grid.freqs
    for ax, k in enumerate(alpha):
        if k == 0:
            continue
        mult = (1j * xi) ** k
        if k % 2 == 1:
            # the Nyquist mode has no odd derivative for real data
            mult[grid.points // 2] = 0.0
        shape = [1] * (grid.dim + 1)
        shape[ax + 1] = grid.points
        spec = spec * mult.reshape(shape)
    return np.fft.ifftn(spec, axes=tuple(range(1, grid.dim + 1)))


def boundary_leak(net: SampledNet, margin: int = WRAP_MARGIN) -> float:
    """Largest relative modulus within ``margin`` nodes of the periodic seam."""
    m = np.abs(net.mantissa)
    strip = np.zeros(net.grid.shape, dtype=bool)
    for ax in range(net.grid.dim):
        idx = [slice(None)] * net.grid.dim
        idx[ax] = np.r_[0:margin, net.grid.points - margin: net.grid.points]
        strip[tuple(idx)] = True
    return float(m[:, strip].max())


def spectral_derivative(net: SampledNet, alpha) -> SampledNet:
    """Derivative ``d^alpha`` of every slice, computed with the FFT.

    Exact for band-limited periodic slices.  When the support box comes within
    eight spacings of the periodic seam and the slices do not vanish there, a
    wraparound warning is appended to ``notes``.
    """
    alpha = as_multi_index(alpha, net.grid.dim)
    if sum(alpha) == 0:
        return net
    notes = net.notes
    if net.support_box is not None:
        h = net.grid.spacing
        close = any(
            lo - (-net.grid.extent) < WRAP_MARGIN * h or net.grid.extent - hi < WRAP_MARGIN * h
            for lo, hi in net.support_box
        )
        if close and boundary_leak(net) > 1e-10:
            notes = notes + (f"wraparound: support within {WRAP_MARGIN} spacings of the periodic boundary",)
    deriv = _derivative_stack(net.mantissa, alpha, net.grid)
    if net.is_real():
        deriv = deriv.real
    box = net.support_box
    if box is not None:
        deriv = np.where(net.grid.region_mask(box), deriv, 0.0)
    return net.replace(mantissa=deriv, notes=notes)


# ---------------------------------------------------------------------------
# Growth classification
# ---------------------------------------------------------------------------


class NetClass(str, enum.Enum):
    NEGLIGIBLE = "negligible"
    MODERATE = "moderate"
    NON_MODERATE = "non_moderate"


@dataclass(frozen=True)
class GrowthVerdict:
    """Outcome of classifying a net or a generalized scalar.

    ``indicator_series`` is the series for ``alpha = 0``; all tested
    multi-indices are kept in ``series_by_alpha``.  ``G = -inf`` marks a slice
    whose supremum is exactly zero.
    """

    classification: NetClass
    fitted_k: float
    fitted_C: float
    indicator_series: Tuple[Tuple[float, float], ...]
    series_by_alpha: Dict[MultiIndex, Tuple[Tuple[float, float], ...]] = field(default_factory=dict)
    slopes: Dict[MultiIndex, float] = field(default_factory=dict)
    residuals: Dict[MultiIndex, float] = field(default_factory=dict)

    @property
    def is_negligible(self) -> bool:
        return self.classification is NetClass.NEGLIGIBLE

    @property
    def is_moderate(self) -> bool:
        return self.classification is not NetClass.NON_MODERATE

    def to_dict(self) -> dict:
        def enc(v):
            return v if math.isfinite(v) else ("-inf" if v < 0 else "inf")

        return {
            "class": self.classification.value,
            "fitted_k": enc(self.fitted_k),
            "fitted_C": enc(self.fitted_C),
            "series": {
                ",".join(map(str, a)): [[e, enc(g)] for e, g in s] for a, s in self.series_by_alpha.items()
            },
        }


def _tail(n: int) -> int:
    return max(2, math.ceil(n / 3))


def _strictly_decreasing(g: np.ndarray) -> bool:
    for g0, g1 in zip(g[:-1], g[1:]):
        if g0 == -np.inf and g1 == -np.inf:
            continue
        if not g1 < g0:
            return False
    return True


def _series_verdict(eps, logsup, a, k_min, residual_tol):
    """Classify one series ``ln sup |d^alpha f_eps|``.

    Returns ``(klass, slope, intercept, residual)``.
    """
    eps = np.asarray(eps, dtype=float)
    logsup = np.asarray(logsup, dtype=float)
    g = eps ** a * logsup
    t = _tail(len(g))
    tail = g[-t:]
    if _strictly_decreasing(tail) and tail[-1] < -k_min:
        klass = NetClass.NEGLIGIBLE
    else:
        klass = None
    fin = np.isfinite(logsup)
    slope, intercept, resid = 0.0, -np.inf, 0.0
    if fin.sum() >= 2:
        x = eps[fin] ** (-a)
        A = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(A, logsup[fin], rcond=None)
        intercept, slope = float(coef[0]), float(coef[1])
        resid = float(np.sqrt(np.mean((A @ coef - logsup[fin]) ** 2)))
    elif fin.sum() == 1:
        intercept = float(logsup[fin][0])
    if klass is None:
        if fin.sum() < 2 or resid <= residual_tol:
            klass = NetClass.MODERATE
        else:
            gt = tail[np.isfinite(tail)]
            nonincreasing = np.all(np.diff(gt) <= 1e-12 * np.maximum(1.0, np.abs(gt[:-1])))
            klass = NetClass.MODERATE if nonincreasing else NetClass.NON_MODERATE
    return klass, slope, intercept, resid


def _combine(order, ladder, logsups: Dict[MultiIndex, np.ndarray], k_min, residual_tol) -> GrowthVerdict:
    eps = ladder.as_array()
    a = order.a
    classes, slopes, inters, resids, series = {}, {}, {}, {}, {}
    for alpha, ls in logsups.items():
        klass, slope, inter, resid = _series_verdict(eps, ls, a, k_min, residual_tol)
        classes[alpha], slopes[alpha], inters[alpha], resids[alpha] = klass, slope, inter, resid
        series[alpha] = tuple((float(e), float(e ** a * v)) for e, v in zip(eps, ls))
    if all(c is NetClass.NEGLIGIBLE for c in classes.values()):
        overall = NetClass.NEGLIGIBLE
    elif any(c is NetClass.NON_MODERATE for c in classes.values()):
        overall = NetClass.NON_MODERATE
    else:
        overall = NetClass.MODERATE
    worst = max(slopes, key=lambda k: slopes[k])
    fitted_k = max(0.0, slopes[worst])
    with np.errstate(over="ignore"):
        fitted_C = float(np.exp(inters[worst])) if np.isfinite(inters[worst]) else 0.0
    zero = next(iter(logsups))
    return GrowthVerdict(overall, fitted_k, fitted_C, series[zero], series, slopes, resids)


def _log_sup(net: SampledNet, alpha: MultiIndex, mask: np.ndarray) -> np.ndarray:
    deriv = _derivative_stack(net.mantissa, alpha, net.grid)
    peak = np.abs(deriv[:, mask]).max(axis=1)
    with np.errstate(divide="ignore"):
        return np.where(peak > 0, net.log_scale + np.log(np.where(peak > 0, peak, 1.0)), -np.inf)


def _checked_mask(net: SampledNet, region) -> np.ndarray:
    if region is not None:
        region = as_box(region, net.grid.dim)
        L = net.grid.extent
        for lo, hi in region:
            if lo < -L - 1e-12 or hi > L + 1e-12:
                raise DomainError(f"region {region} is not inside the grid domain [-{L}, {L}]")
    mask = net.grid.region_mask(region)
    if not mask.any():
        raise DomainError("region contains no grid nodes")
    return mask


def growth_indicator(net: SampledNet, alpha=0, region=None, alpha_max: int = DEFAULT_ALPHA_MAX):
    """Indicator ``G(eps) = eps**a * ln sup_region |d^alpha f_eps|``.

    Parameters
    ----------
    net : SampledNet
    alpha : int or tuple of int
    region : box, optional
        Closed box; the sup is taken over grid nodes inside it.
    alpha_max : int
        Largest admissible ``|alpha|``.

    Returns
    -------
    list of (eps, G)
        ``G`` is ``-inf`` when the supremum vanishes.
    """
    alpha = as_multi_index(alpha, net.grid.dim)
    if sum(alpha) > alpha_max:
        raise UnsupportedOrderError(f"|alpha| = {sum(alpha)} exceeds alpha_max = {alpha_max}")
    mask = _checked_mask(net, region)
    ls = _log_sup(net, alpha, mask)
    a = net.order.a
    return [(float(e), float(e ** a * v)) for e, v in zip(net.ladder, ls)]


def classify_net(
    net: SampledNet,
    alpha_max: int = DEFAULT_ALPHA_MAX,
    region=None,
    k_min: float = DEFAULT_K_MIN,
    residual_tol: float = DEFAULT_RESIDUAL_TOL,
) -> GrowthVerdict:
    """Classify a net as negligible, moderate or non-moderate.

    Every multi-index with ``|alpha| <= alpha_max`` is tested.  A series is
    negligible when the last third of its indicator is strictly decreasing
    and ends below ``-k_min``.  It is moderate when ``ln sup`` is fitted by a
    line in ``eps**(-a)`` with residual at most ``residual_tol``, or when the
    indicator is non-increasing on the last third (polynomial growth such as
    ``eps**-5`` bends the log curve but still has ``G -> 0``).  The net is
    negligible when all series are, non-moderate when any series is.
    """
    if len(net.ladder) < 4:
        raise DomainError("classification needs at least 4 ladder entries")
    mask = _checked_mask(net, region)
    logsups = {alpha: _log_sup(net, alpha, mask) for alpha in multi_indices(net.grid.dim, alpha_max)}
    return _combine(net.order, net.ladder, logsups, k_min, residual_tol)


# ---------------------------------------------------------------------------
# Generalized numbers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GeneralizedScalar:
    """Representative ``(x_eps)`` of a generalized complex number.

    Stored like nets: ``x_eps = exp(log_scale) * mantissa`` with ``|mantissa|``
    equal to 1 or 0.
    """

    order: GevreyOrder
    ladder: EpsilonLadder
    mantissa: np.ndarray
    log_scale: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mantissa, dtype=complex).reshape(-1)
        ls = np.asarray(self.log_scale, dtype=float).reshape(-1)
        if m.shape != (len(self.ladder),) or ls.shape != m.shape:
            raise InvalidNetError("one value per ladder entry is required")
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(ls))):
            raise InvalidNetError("generalized scalar values must be finite")
        mag = np.abs(m)
        nz = mag > 0
        ls = np.where(nz, ls + np.log(np.where(nz, mag, 1.0)), 0.0)
        m = np.where(nz, m / np.where(nz, mag, 1.0), 0.0)
        object.__setattr__(self, "mantissa", m)
        object.__setattr__(self, "log_scale", ls)

    @classmethod
    def from_values(cls, order, ladder, values) -> "GeneralizedScalar":
        values = np.asarray(values, dtype=complex)
        return cls(order, ladder, values, np.zeros(len(ladder)))

    @classmethod
    def from_log(cls, order, ladder, log_abs, phase=None) -> "GeneralizedScalar":
        """Build from ``ln |x_eps|`` (and an optional phase in radians)."""
        phase = np.zeros(len(ladder)) if phase is None else np.asarray(phase, dtype=float)
        return cls(order, ladder, np.exp(1j * phase), np.asarray(log_abs, dtype=float))

    @property
    def values(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.mantissa * np.exp(self.log_scale)

    def log_abs(self) -> np.ndarray:
        return np.where(self.mantissa != 0, self.log_scale, -np.inf)


def classify_scalar(x: GeneralizedScalar, k_min: float = DEFAULT_K_MIN,
                    residual_tol: float = DEFAULT_RESIDUAL_TOL) -> GrowthVerdict:
    """Classify a generalized number with the same rules as :func:`classify_net`."""
    return _combine(x.order, x.ladder, {(0,): x.log_abs()}, k_min, residual_tol)


def closed_form_net(order, ladder, grid, log_abs: Sequence[float], profile=None, **kw) -> SampledNet:
    """Net ``f_eps = exp(log_abs[k]) * profile`` with ``profile`` defaulting to 1."""
    profile = np.ones(grid.shape) if profile is None else np.asarray(profile, dtype=complex)
    stack = np.broadcast_to(profile, (len(ladder),) + grid.shape)
    return SampledNet(order, ladder, grid, stack, np.asarray(log_abs, dtype=float), **kw)
