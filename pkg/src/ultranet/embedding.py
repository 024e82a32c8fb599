"""Embedding classical objects into the net algebra.

Two embeddings coexist.  The canonical one sends a smooth function ``f`` to
the constant net ``f_eps = f``.  The mollifier embedding sends a distribution
``T`` to ``T * phi_eps``; all convolutions are evaluated spectrally as
``T_hat(xi) * bump(eps xi)`` on the periodic grid.  For Gevrey test functions
the two agree modulo negligible nets, which :func:`diagram_check` verifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import (
    DEFAULT_ALPHA_MAX,
    EpsilonLadder,
    GevreyOrder,
    Grid,
    GrowthVerdict,
    MultiIndex,
    SampledNet,
    _derivative_stack,
    as_multi_index,
    classify_net,
    effective_support,
    grid_fft,
    grid_ifft,
    multi_indices,
    net_add,
    net_scale,
    net_sub,
)
from .errors import DomainError, InvalidOperatorError, WraparoundError
from .mollifier import MollifierNet, gevrey_cutoff

KINDS = (
    "dirac",
    "heaviside",
    "boundary_value_minus",
    "boundary_value_plus",
    "line_delta_2d",
    "gevrey_bump_function",
    "finite_linear_combination",
)

LEAK_TOL = 1e-5
LEAK_MARGIN = 8


@dataclass(frozen=True)
class DistributionSpec:
    """Textual description of a distribution to embed.

    Attributes
    ----------
    kind : str
        One of :data:`KINDS`.
    location : tuple of float
        Point mass location, jump location, boundary-value pole, bump center,
        or (for ``line_delta_2d``) the offset of the line.
    axis : str
        ``"x"`` or ``"y"``: the axis a ``line_delta_2d`` lies on.
    params : tuple of (name, value)
        Kind-specific options: ``plateau``/``support`` radii for bumps and
        cutoffs, ``representation`` (``"analytic"`` or ``"mollified"``) for
        boundary values.
    terms : tuple of (coefficient, DistributionSpec)
        Terms of a ``finite_linear_combination``.
    """

    kind: str
    location: Tuple[float, ...] = (0.0,)
    axis: str = "x"
    params: Tuple[Tuple[str, object], ...] = ()
    terms: Tuple[Tuple[complex, "DistributionSpec"], ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown distribution kind {self.kind!r}; expected one of {KINDS}")
        loc = self.location
        if isinstance(loc, (int, float)):
            loc = (float(loc),)
        object.__setattr__(self, "location", tuple(float(v) for v in loc))
        if self.axis not in ("x", "y"):
            raise DomainError(f"axis must be 'x' or 'y', got {self.axis!r}")
        if isinstance(self.params, dict):
            object.__setattr__(self, "params", tuple(sorted(self.params.items())))
        if self.kind == "finite_linear_combination" and not self.terms:
            raise DomainError("finite_linear_combination needs at least one term")

    def param(self, name, default=None):
        return dict(self.params).get(name, default)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "location": list(self.location)}
        if self.kind == "line_delta_2d":
            out["axis"] = self.axis
        if self.params:
            out["params"] = dict(self.params)
        if self.terms:
            out["terms"] = [{"coefficient": _enc_complex(c), "spec": t.to_dict()} for c, t in self.terms]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionSpec":
        if not isinstance(d, dict) or "kind" not in d:
            raise DomainError("distribution spec must be an object with a 'kind' field")
        terms = tuple(
            (_dec_complex(t["coefficient"]), cls.from_dict(t["spec"])) for t in d.get("terms", ())
        )
        return cls(
            kind=d["kind"],
            location=tuple(d.get("location", (0.0,))),
            axis=d.get("axis", "x"),
            params=tuple(sorted(dict(d.get("params", {})).items())),
            terms=terms,
        )

    @classmethod
    def parse(cls, text: str) -> "DistributionSpec":
        """Read ``kind[:name=value,...]``.

        ``at`` sets the location (coordinates separated by ``/``) and ``axis``
        the line axis; other names become params, numeric when possible.
        Example: ``heaviside:at=0.5,plateau=2,support=4``.
        """
        kind, _, rest = text.strip().partition(":")
        location, axis, params = (0.0,), "x", {}
        for item in filter(None, (p.strip() for p in rest.split(","))):
            name, sep, value = item.partition("=")
            if not sep:
                raise DomainError(f"expected name=value in distribution spec, got {item!r}")
            name, value = name.strip(), value.strip()
            if name == "at":
                try:
                    location = tuple(float(v) for v in value.split("/"))
                except ValueError:
                    raise DomainError(f"bad location {value!r}") from None
            elif name == "axis":
                axis = value
            else:
                try:
                    params[name] = float(value)
                except ValueError:
                    params[name] = value
        if kind == "finite_linear_combination":
            raise DomainError("finite_linear_combination has no textual form; use the JSON config")
        return cls(kind.strip(), location, axis, tuple(sorted(params.items())))

    def to_text(self) -> str:
        if self.kind == "finite_linear_combination":
            raise DomainError("finite_linear_combination has no textual form")
        items = ["at=" + "/".join(repr(v) for v in self.location)]
        if self.kind == "line_delta_2d":
            items.append(f"axis={self.axis}")
        items += [f"{k}={v}" for k, v in self.params]
        return f"{self.kind}:" + ",".join(items)

    def translated(self, shift: Sequence[float]) -> "DistributionSpec":
        """The same distribution translated by ``shift``."""
        if self.kind == "finite_linear_combination":
            return DistributionSpec(self.kind, self.location, self.axis, self.params,
                                    tuple((c, t.translated(shift)) for c, t in self.terms))
        shift = tuple(float(v) for v in shift)
        if self.kind == "line_delta_2d":
            normal = 1 if self.axis == "x" else 0
            loc = (self.location[0] + shift[normal],)
        else:
            loc = tuple(a + b for a, b in zip(_pad(self.location, len(shift)), shift))
        return DistributionSpec(self.kind, loc, self.axis, self.params, self.terms)


def _enc_complex(c):
    c = complex(c)
    return c.real if c.imag == 0 else [c.real, c.imag]


def _dec_complex(v):
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def _pad(loc: Tuple[float, ...], dim: int) -> Tuple[float, ...]:
    if len(loc) == dim:
        return loc
    if len(loc) == 1:
        return loc + (0.0,) * (dim - 1)
    raise DomainError(f"location {loc} does not match dimension {dim}")


# ---------------------------------------------------------------------------
# Canonical embedding
# ---------------------------------------------------------------------------


def canonical_embed(f: np.ndarray, ladder: EpsilonLadder, grid: Grid, order: GevreyOrder,
                    support_box=None) -> SampledNet:
    """Constant net ``f_eps = f`` for every ``eps``."""
    f = np.asarray(f, dtype=complex)
    if support_box is None and np.any(f):
        support_box = effective_support(f[None], grid)
        # derivatives are masked to the box, so drop the sub-tolerance tail up front
        f = np.where(grid.region_mask(support_box), f, 0.0)
    return SampledNet.constant_in_eps(order, ladder, grid, f, support_box=support_box)


def gevrey_bump_samples(grid: Grid, order: GevreyOrder, center=(0.0,), plateau: float = 0.5,
                        support: float = 1.5) -> np.ndarray:
    """Radial Gevrey bump: 1 within ``plateau`` of ``center``, 0 beyond ``support``."""
    c = _pad(tuple(np.atleast_1d(center).astype(float)), grid.dim)
    r = np.sqrt(sum((x - x0) ** 2 for x, x0 in zip(grid.mesh(), c)))
    return gevrey_cutoff(r, plateau, support, order.s)


# ---------------------------------------------------------------------------
# Mollifier embedding
# ---------------------------------------------------------------------------


def _shift_phase(grid: Grid, loc: Tuple[float, ...]) -> np.ndarray:
    mesh = grid.freq_mesh()
    return np.exp(-1j * sum(x0 * xi for x0, xi in zip(loc, mesh)))


def _bump_stack(mnet: MollifierNet) -> np.ndarray:
    return np.stack([mnet.spectrum(k) for k in range(len(mnet.ladder))]).astype(complex)


def _mollify(t_hat: np.ndarray, mnet: MollifierNet) -> np.ndarray:
    """Slices of ``T * phi_eps`` from the (periodic) spectrum of ``T``."""
    return grid_ifft(_bump_stack(mnet) * t_hat, mnet.grid)


def _check_leak(vals: np.ndarray, grid: Grid, axes: Sequence[int], what: str) -> None:
    mag = np.abs(vals)
    peak = mag.reshape(mag.shape[0], -1).max(axis=1).reshape((-1,) + (1,) * grid.dim)
    rel = mag / np.where(peak > 0, peak, 1.0)
    for ax in axes:
        idx = [slice(None)] * (grid.dim + 1)
        idx[ax + 1] = np.r_[0:LEAK_MARGIN, grid.points - LEAK_MARGIN: grid.points]
        leak = float(rel[tuple(idx)].max())
        if leak > LEAK_TOL:
            raise WraparoundError(f"{what}: support too close to the periodic boundary (relative leak {leak:.2e})")


def _as_real(vals: np.ndarray) -> np.ndarray:
    peak = np.abs(vals).max()
    if peak == 0 or np.abs(vals.imag).max() <= 1e-12 * peak:
        return vals.real
    return vals


def _cutoff_samples(grid: Grid, spec: DistributionSpec, order: GevreyOrder, center) -> Optional[np.ndarray]:
    plateau, support = spec.param("plateau"), spec.param("support")
    if plateau is None or support is None:
        return None
    return gevrey_bump_samples(grid, order, center, float(plateau), float(support))


def embed_distribution(spec: DistributionSpec, mnet: MollifierNet) -> SampledNet:
    """Mollifier embedding ``T -> (T * phi_eps)_eps``.

    Boundary values default to the analytic nets ``1/(x - x0 -+ i eps)``
    (periodized with the cotangent kernel); ``representation="mollified"``
    selects the mollifier embedding of the boundary-value distribution.

    Raises
    ------
    WraparoundError
        When a compactly supported kind leaks onto the periodic seam.
    """
    grid, order, ladder = mnet.grid, mnet.base.order, mnet.ladder
    kind = spec.kind
    r1 = mnet.base.bump.r1
    if kind == "finite_linear_combination":
        total = None
        for c, term in spec.terms:
            part = net_scale(embed_distribution(term, mnet), c)
            total = part if total is None else net_add(total, part)
        return total

    if kind == "dirac":
        loc = _pad(spec.location, grid.dim)
        vals = _as_real(_mollify(_shift_phase(grid, loc)[None], mnet))
        _check_leak(vals, grid, range(grid.dim), "dirac")
        return SampledNet.from_values(order, ladder, grid, vals, reg_scale=r1,
                                      support_box=effective_support(vals, grid))

    if kind == "gevrey_bump_function":
        loc = _pad(spec.location, grid.dim)
        f = gevrey_bump_samples(grid, order, loc, float(spec.param("plateau", 0.5)),
                                float(spec.param("support", 1.5)))
        vals = _as_real(_mollify(grid_fft(f[None], grid), mnet))
        _check_leak(vals, grid, range(grid.dim), "gevrey_bump_function")
        return SampledNet.from_values(order, ladder, grid, vals, reg_scale=r1,
                                      support_box=effective_support(vals, grid))

    if kind == "heaviside":
        if grid.dim != 1:
            raise DomainError("heaviside is one-dimensional")
        x0 = spec.location[0]
        dens = _mollify(_shift_phase(grid, (x0,))[None], mnet).real
        vals = _primitive(dens, grid)
        cut = _cutoff_samples(grid, spec, order, (x0,))
        box = None
        if cut is not None:
            vals = vals * cut
            _check_leak(vals, grid, (0,), "heaviside")
            box = effective_support(vals, grid)
        return SampledNet.from_values(order, ladder, grid, vals, reg_scale=r1, support_box=box)

    if kind in ("boundary_value_minus", "boundary_value_plus"):
        if grid.dim != 1:
            raise DomainError("boundary values are one-dimensional")
        x0 = spec.location[0]
        sign = -1.0 if kind == "boundary_value_minus" else 1.0
        if spec.param("representation", "analytic") == "mollified":
            xi = grid.freqs
            # 1/(x - i0) has transform 2 pi i H(-xi); 1/(x + i0) has -2 pi i H(xi)
            if sign < 0:
                t_hat = 2j * np.pi * np.where(xi < 0, 1.0, np.where(xi == 0, 0.5, 0.0))
            else:
                t_hat = -2j * np.pi * np.where(xi > 0, 1.0, np.where(xi == 0, 0.5, 0.0))
            vals = _mollify((t_hat * _shift_phase(grid, (x0,)))[None], mnet)
            return SampledNet.from_values(order, ladder, grid, vals, reg_scale=r1,
                                          notes=("boundary value: mollified representative",))
        L = grid.extent
        x = grid.axis
        z = np.stack([(x - x0) + sign * 1j * e for e in ladder])
        vals = (np.pi / (2 * L)) / np.tan(np.pi * z / (2 * L))
        return SampledNet.from_values(order, ladder, grid, vals, reg_scale=1.0,
                                      notes=("boundary value: analytic representative",))

    if kind == "line_delta_2d":
        if grid.dim != 2:
            raise DomainError("line_delta_2d needs a 2D grid")
        offset = spec.location[0]
        xi = grid.freqs
        eps = mnet.ladder.as_array()
        bump1 = mnet.base.bump.evaluate
        # normal profile: 1D mollifier centered on the line
        normal = grid_ifft1(np.stack([bump1(e * xi) for e in eps]) * np.exp(-1j * offset * xi), grid)
        cut1 = None
        plateau, support = spec.param("plateau"), spec.param("support")
        if plateau is not None and support is not None:
            along = gevrey_cutoff(grid.axis, float(plateau), float(support), order.s)
            along_hat = np.fft.fft(along) * grid.spacing * np.exp(1j * grid.extent * xi)
            cut1 = grid_ifft1(np.stack([bump1(e * xi) for e in eps]) * along_hat, grid)
        tangent = np.ones((len(eps), grid.points)) if cut1 is None else cut1
        vals = tangent[:, :, None] * normal[:, None, :]
        if spec.axis == "y":
            vals = np.swapaxes(vals, 1, 2)
        normal_axis = 1 if spec.axis == "x" else 0
        axes = (0, 1) if cut1 is not None else (normal_axis,)
        _check_leak(vals, grid, axes, "line_delta_2d")
        box = effective_support(vals, grid) if cut1 is not None else None
        return SampledNet.from_values(order, ladder, grid, vals, reg_scale=r1, support_box=box)

    raise DomainError(f"unsupported kind {kind!r}")


def grid_ifft1(spec: np.ndarray, grid: Grid) -> np.ndarray:
    """1D inverse transform along the last axis with the grid's convention."""
    phase = np.exp(-1j * grid.extent * grid.freqs)
    return (np.fft.ifft(spec * phase, axis=-1) / grid.spacing).real


def _primitive(dens: np.ndarray, grid: Grid) -> np.ndarray:
    """``x -> int_{-L}^x dens`` per slice, spectrally exact for band-limited data."""
    h, L = grid.spacing, grid.extent
    x = grid.axis
    mass = dens.sum(axis=1) * h
    mean = mass / (2 * L)
    centered = dens - mean[:, None]
    spec = np.fft.fft(centered, axis=1)
    xi = grid.freqs
    with np.errstate(divide="ignore", invalid="ignore"):
        spec = np.where(xi != 0, spec / (1j * xi), 0.0)
    spec[:, grid.points // 2] = 0.0
    prim = np.fft.ifft(spec, axis=1).real
    return mean[:, None] * (x + L)[None, :] + prim - prim[:, :1]


# ---------------------------------------------------------------------------
# Mollification error and the embedding diagram
# ---------------------------------------------------------------------------


def density_embed(f: np.ndarray, mnet: MollifierNet) -> SampledNet:
    """Mollifier embedding of a grid function viewed as a density."""
    f = np.asarray(f, dtype=complex)
    vals = _as_real(_mollify(grid_fft(f[None], mnet.grid), mnet))
    return SampledNet.from_values(mnet.base.order, mnet.ladder, mnet.grid, vals, reg_scale=mnet.base.bump.r1)


def mollification_difference(f: np.ndarray, mnet: MollifierNet) -> SampledNet:
    """The net ``f - f * phi_eps``."""
    canon = SampledNet.constant_in_eps(mnet.base.order, mnet.ladder, mnet.grid, f)
    return net_sub(canon, density_embed(f, mnet))


def mollification_error(f: np.ndarray, mnet: MollifierNet, alpha_max: int = DEFAULT_ALPHA_MAX,
                        region=None, k_min: float = 3.0) -> GrowthVerdict:
    """Classify the mollification error ``(f - f * phi_eps)_eps``.

    Gevrey test functions give negligible errors.  The per-``alpha`` slopes
    and intercepts of the verdict feed :func:`prefactor_pattern`.
    """
    diff = mollification_difference(f, mnet)
    return classify_net(diff, alpha_max=alpha_max, region=region, k_min=k_min)


def prefactor_pattern(verdict: GrowthVerdict, order: GevreyOrder) -> dict:
    """Per-``alpha`` local decay rates and log-prefactors of an error net.

    The local rate between consecutive ladder entries is
    ``-(ln sup_{k+1} - ln sup_k) / (x_{k+1} - x_k)`` with ``x = eps**(-a)``.
    The log-prefactor is the intercept of the straight line through the last
    two points, to be compared with ``(|alpha| + 1) log C + s log alpha!``.
    """
    a = order.a
    out = {}
    for alpha, series in verdict.series_by_alpha.items():
        eps = np.array([e for e, _ in series])
        g = np.array([v for _, v in series])
        logsup = g / eps ** a
        x = eps ** (-a)
        fin = np.isfinite(logsup)
        rates = []
        for i in range(len(x) - 1):
            if fin[i] and fin[i + 1]:
                rates.append(float(-(logsup[i + 1] - logsup[i]) / (x[i + 1] - x[i])))
        idx = np.nonzero(fin)[0]
        prefactor = None
        if len(idx) >= 2:
            i, j = idx[-2], idx[-1]
            slope = (logsup[j] - logsup[i]) / (x[j] - x[i])
            prefactor = float(logsup[j] - slope * x[j])
        out[alpha] = {"local_rates": rates, "log_prefactor": prefactor}
    return out


def diagram_check(f: np.ndarray, mnet: MollifierNet, alpha_max: int = DEFAULT_ALPHA_MAX,
                  k_min: float = 3.0) -> dict:
    """Commutativity of the embedding diagram for a Gevrey test function.

    Passes iff ``canonical_embed(f) - (f * phi_eps)`` classifies negligible.
    """
    verdict = mollification_error(f, mnet, alpha_max=alpha_max, k_min=k_min)
    return {"passes": verdict.is_negligible, "verdict": verdict}


# ---------------------------------------------------------------------------
# Ultradifferential operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UltradiffOperator:
    """Truncated operator ``P(D) = sum a_gamma d^gamma``.

    Coefficients must obey ``|a_gamma| <= c h**|gamma| / (gamma!)**s``.
    """

    order: GevreyOrder
    coeffs: Tuple[Tuple[MultiIndex, complex], ...]
    c: float = 1.0
    h: float = 1.0
    dim: int = 1

    def __post_init__(self):
        coeffs = self.coeffs.items() if isinstance(self.coeffs, dict) else self.coeffs
        norm = []
        for gamma, a in coeffs:
            gamma = as_multi_index(gamma, self.dim)
            bound = self.c * self.h ** sum(gamma) / _gamma_factorial(gamma) ** self.order.s
            if abs(a) > bound * (1 + 1e-12):
                raise InvalidOperatorError(
                    f"coefficient for gamma={gamma} has modulus {abs(a):.3e} above the bound {bound:.3e}"
                )
            norm.append((gamma, complex(a)))
        object.__setattr__(self, "coeffs", tuple(sorted(norm)))

    @property
    def gamma_max(self) -> int:
        return max((sum(g) for g, _ in self.coeffs), default=0)

    @classmethod
    def gevrey_series(cls, order: GevreyOrder, h: float = 0.5, c: float = 1.0, gamma_max: Optional[int] = None,
                      dim: int = 1) -> "UltradiffOperator":
        """Operator with the extremal coefficients ``c h**|gamma| / gamma!**s``."""
        gamma_max = gamma_max if gamma_max is not None else (12 if dim == 1 else 8)
        coeffs = tuple(
            (g, c * h ** sum(g) / _gamma_factorial(g) ** order.s) for g in multi_indices(dim, gamma_max)
        )
        return cls(order, coeffs, c, h, dim)


def _gamma_factorial(gamma: MultiIndex) -> float:
    out = 1.0
    for k in gamma:
        out *= math.factorial(k)
    return out


def ultradiff_tail_bound(P: UltradiffOperator, bandwidth: float, terms: int = 200) -> float:
    """Bound on the omitted symbol ``sum_{|gamma| > gamma_max} c h**|g| B**|g| / g!**s``."""
    s = P.order.s
    log_hb = math.log(P.h * bandwidth) if bandwidth > 0 else -math.inf
    total, prev = 0.0, math.inf
    for n in range(P.gamma_max + 1, P.gamma_max + 1 + terms):
        # log space: (h B)**n alone overflows long before the factorials win
        logs = [n * log_hb - s * sum(math.lgamma(gi + 1) for gi in g)
                for g in multi_indices(P.dim, n) if sum(g) == n]
        log_term = max(logs)
        if log_term > 700:
            return math.inf
        term = P.c * sum(math.exp(v) for v in logs)
        total += term
        if log_term < -690 and log_term < prev:
            break
        prev = log_term
    return total


def slice_bandwidth(net: SampledNet, floor: float = 1e-14) -> np.ndarray:
    """Largest ``|xi|`` where each slice spectrum exceeds ``floor`` times its max."""
    spec = np.abs(grid_fft(net.mantissa, net.grid))
    r = np.sqrt(sum(x ** 2 for x in net.grid.freq_mesh()))
    out = []
    for k in range(net.n_eps):
        above = spec[k] >= floor * spec[k].max() if spec[k].max() > 0 else np.zeros_like(r, bool)
        out.append(float(r[above].max()) if above.any() else 0.0)
    return np.asarray(out)


def apply_ultradiff(P: UltradiffOperator, net: SampledNet) -> SampledNet:
    """Apply ``P(D)`` slice-wise through the spectral derivatives.

    The tail bound for the truncation, evaluated at the largest slice
    bandwidth, is appended to ``notes``; a bandwidth above half the Nyquist
    frequency is flagged there too.
    """
    if P.dim != net.grid.dim:
        raise DomainError("operator and net dimensions differ")
    total = np.zeros_like(net.mantissa)
    for gamma, a in P.coeffs:
        if a == 0:
            continue
        total = total + a * _derivative_stack(net.mantissa, gamma, net.grid)
    if net.is_real() and all(a.imag == 0 for _, a in P.coeffs):
        total = total.real
    band = float(slice_bandwidth(net).max())
    notes = net.notes + (f"ultradiff truncation tail bound {ultradiff_tail_bound(P, band):.3e} at bandwidth {band:.3g}",)
    if band > net.grid.nyquist / 2:
        notes = notes + ("ultradiff: slice bandwidth exceeds half the Nyquist frequency",)
    box = net.support_box
    if box is not None:
        total = np.where(net.grid.region_mask(box), total, 0.0)
    return net.replace(mantissa=total, notes=notes)
