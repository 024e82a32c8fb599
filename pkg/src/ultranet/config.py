"""Experiment configuration: a versioned JSON document validated up front.

Every validation error is a :class:`ConfigError` whose ``field`` names the
offending entry (dotted path, e.g. ``grid.points`` or ``corpus[2].kind``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Tuple, Union

from .core import EpsilonLadder, GevreyOrder, Grid
from .embedding import DistributionSpec
from .errors import ConfigError, UltranetError
from .mollifier import DEFAULT_R1, DEFAULT_R2
from .spectral import DirectionBins, Thresholds

SCHEMA_VERSION = 1
STAGES = ("classify", "mollifier", "embed", "sigma", "wavefront", "product-check", "lemma-trials")

_TOP_KEYS = {"schema_version", "order", "ladder", "grid", "mollifier", "bins", "thresholds", "corpus",
             "pipeline", "products", "alpha_max", "trials", "seed", "lemma_bins"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    Attributes
    ----------
    order : float
        Gevrey order ``s``.
    ladder : (base, j_min, j_max)
        Geometric ladder ``base**-j``.
    grid : (dim, extent, points)
    mollifier : (r1, r2)
        Cutoff radii of the mollifier's Fourier transform.
    bins : int
        Direction bins in 2D (1D always uses the two half-lines).
    thresholds : (kappa_reg, rho_max, k_min)
    corpus : tuple of DistributionSpec
    pipeline : tuple of stage names, run in the listed order
    products : tuple of (i, j)
        Corpus index pairs for ``product-check``.
    alpha_max : int
        Derivative order bound for classification.
    trials, seed, lemma_bins : int
        Parameters of ``lemma-trials`` (random 2D cone pairs on ``lemma_bins`` bins).
    """

    order: float = 2.0
    ladder: Tuple[float, int, int] = (2.0, 2, 10)
    grid: Tuple[int, float, int] = (1, 8.0, 4096)
    mollifier: Tuple[float, float] = (DEFAULT_R1, DEFAULT_R2)
    bins: int = 16
    thresholds: Tuple[float, float, float] = (0.5, 1.0, 3.0)
    corpus: Tuple[DistributionSpec, ...] = ()
    pipeline: Tuple[str, ...] = ("classify",)
    products: Tuple[Tuple[int, int], ...] = ()
    alpha_max: int = 2
    trials: int = 100
    seed: int = 0
    lemma_bins: int = 64
    schema_version: int = SCHEMA_VERSION

    # derived objects ------------------------------------------------------
    @property
    def gevrey_order(self) -> GevreyOrder:
        return GevreyOrder(self.order)

    @property
    def epsilon_ladder(self) -> EpsilonLadder:
        base, j0, j1 = self.ladder
        return EpsilonLadder.geometric(j0, j1, base)

    @property
    def spatial_grid(self) -> Grid:
        return Grid(*self.grid)

    @property
    def direction_bins(self) -> DirectionBins:
        return DirectionBins(1, 2) if self.grid[0] == 1 else DirectionBins(2, self.bins)

    @property
    def threshold_set(self) -> Thresholds:
        kappa, rho, kmin = self.thresholds
        return Thresholds(kappa_reg=kappa, rho_max=rho, k_min=kmin)

    def to_dict(self) -> dict:
        base, j0, j1 = self.ladder
        dim, extent, points = self.grid
        kappa, rho, kmin = self.thresholds
        return {
            "schema_version": self.schema_version,
            "order": self.order,
            "ladder": {"base": base, "j_min": j0, "j_max": j1},
            "grid": {"dim": dim, "extent": extent, "points": points},
            "mollifier": {"r1": self.mollifier[0], "r2": self.mollifier[1]},
            "bins": self.bins,
            "thresholds": {"kappa_reg": kappa, "rho_max": rho, "k_min": kmin},
            "corpus": [s.to_dict() for s in self.corpus],
            "pipeline": list(self.pipeline),
            "products": [list(p) for p in self.products],
            "alpha_max": self.alpha_max,
            "trials": self.trials,
            "seed": self.seed,
            "lemma_bins": self.lemma_bins,
        }

    def with_overrides(self, **kw) -> "ExperimentConfig":
        """Copy with the given fields replaced, then re-validated."""
        return validate(replace(self, **kw))


def _num(d: dict, key: str, path: str, default, kind=float):
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key} must be a number, got {v!r}", field=f"{path}.{key}".lstrip("."))
    if kind is int and int(v) != v:
        raise ConfigError(f"{path}.{key} must be an integer, got {v!r}", field=f"{path}.{key}".lstrip("."))
    return kind(v)


def _section(d: dict, key: str) -> dict:
    v = d.get(key, {})
    if not isinstance(v, dict):
        raise ConfigError(f"{key} must be an object", field=key)
    return v


def from_dict(d: Any) -> ExperimentConfig:
    """Build and validate a config from parsed JSON."""
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object", field="<root>")
    unknown = sorted(set(d) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown config field {unknown[0]!r}", field=unknown[0])
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}", field="schema_version")
    lad, grd, mol, thr = (_section(d, k) for k in ("ladder", "grid", "mollifier", "thresholds"))
    corpus = []
    raw_corpus = d.get("corpus", [])
    if not isinstance(raw_corpus, list):
        raise ConfigError("corpus must be a list", field="corpus")
    for i, item in enumerate(raw_corpus):
        try:
            corpus.append(DistributionSpec.from_dict(item))
        except (UltranetError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"corpus[{i}]: {exc}", field=f"corpus[{i}]") from exc
    pipeline = d.get("pipeline", ["classify"])
    if not isinstance(pipeline, list) or not all(isinstance(p, str) for p in pipeline):
        raise ConfigError("pipeline must be a list of stage names", field="pipeline")
    products = d.get("products", [])
    if not isinstance(products, list) or not all(isinstance(p, list) and len(p) == 2 for p in products):
        raise ConfigError("products must be a list of [i, j] pairs", field="products")
    cfg = ExperimentConfig(
        order=_num(d, "order", "", 2.0),
        ladder=(_num(lad, "base", "ladder", 2.0), _num(lad, "j_min", "ladder", 2, int),
                _num(lad, "j_max", "ladder", 10, int)),
        grid=(_num(grd, "dim", "grid", 1, int), _num(grd, "extent", "grid", 8.0),
              _num(grd, "points", "grid", 4096, int)),
        mollifier=(_num(mol, "r1", "mollifier", DEFAULT_R1), _num(mol, "r2", "mollifier", DEFAULT_R2)),
        bins=_num(d, "bins", "", 16, int),
        thresholds=(_num(thr, "kappa_reg", "thresholds", 0.5), _num(thr, "rho_max", "thresholds", 1.0),
                    _num(thr, "k_min", "thresholds", 3.0)),
        corpus=tuple(corpus),
        pipeline=tuple(pipeline),
        products=tuple((int(i), int(j)) for i, j in products),
        alpha_max=_num(d, "alpha_max", "", 2, int),
        trials=_num(d, "trials", "", 100, int),
        seed=_num(d, "seed", "", 0, int),
        lemma_bins=_num(d, "lemma_bins", "", 64, int),
    )
    return validate(cfg)


def _guard(fieldname: str, fn):
    try:
        return fn()
    except ConfigError:
        raise
    except UltranetError as exc:
        raise ConfigError(f"{fieldname}: {exc}", field=fieldname) from exc


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check ``cfg`` against the preconditions of every module it feeds.

    Raises
    ------
    ConfigError
        Naming the first offending field.
    """
    if cfg.schema_version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}", field="schema_version")
    _guard("order", lambda: cfg.gevrey_order)
    _guard("ladder", lambda: cfg.epsilon_ladder)
    grid = _guard("grid", lambda: cfg.spatial_grid)
    r1, r2 = cfg.mollifier
    if not 0 < r1 < r2:
        raise ConfigError(f"mollifier radii must satisfy 0 < r1 < r2, got {r1}, {r2}", field="mollifier")
    if grid.dim == 2 and (cfg.bins < 4 or cfg.bins % 2):
        raise ConfigError(f"bins must be an even number >= 4, got {cfg.bins}", field="bins")
    for name, v in zip(("kappa_reg", "rho_max", "k_min"), cfg.thresholds):
        if not v > 0:
            raise ConfigError(f"thresholds.{name} must be positive, got {v}", field=f"thresholds.{name}")
    for i, spec in enumerate(cfg.corpus):
        if spec.kind == "line_delta_2d" and grid.dim != 2:
            raise ConfigError(f"corpus[{i}]: line_delta_2d needs a 2D grid", field=f"corpus[{i}].kind")
    for p in cfg.pipeline:
        if p not in STAGES:
            raise ConfigError(f"unknown pipeline stage {p!r}; expected one of {STAGES}", field="pipeline")
    for i, j in cfg.products:
        if not (0 <= i < len(cfg.corpus) and 0 <= j < len(cfg.corpus)):
            raise ConfigError(f"product pair ({i}, {j}) is outside the corpus", field="products")
    if cfg.alpha_max < 0:
        raise ConfigError("alpha_max must be >= 0", field="alpha_max")
    if cfg.lemma_bins < 4 or cfg.lemma_bins % 2:
        raise ConfigError(f"lemma_bins must be an even number >= 4, got {cfg.lemma_bins}", field="lemma_bins")
    if cfg.trials < 1:
        raise ConfigError("trials must be >= 1", field="trials")
    return cfg


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", field="<file>") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}", field="<file>") from exc
    return from_dict(data)
