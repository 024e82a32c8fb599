"""Command-line experiment runner.

``ultranet run --config exp.json`` executes the configured pipeline; the
other subcommands run one stage with flag overrides.  Outputs go to
``--out-dir``: ``report.json``, ``<stage>/*.csv`` and ``plots/*.svg``.
Exit codes: 0 when every assertion passes, 2 when one fails, 1 on a
configuration or runtime error.  A ``FAILED`` marker file is left in the
output directory whenever the exit code is not 0.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .config import STAGES, ExperimentConfig, load_config, validate
from .core import classify_net, closed_form_net, grid_fft
from .embedding import DistributionSpec, diagram_check, embed_distribution, gevrey_bump_samples
from .errors import ConfigError, ConstructionError, UltranetError
from .microlocal import localizer_plan, sigma_cone, wavefront
from .mollifier import default_mollifier, mollifier_net
from .product import hormander_check, random_cone_trials
from .serialize import (
    DECAY_FIT_HEADER,
    decay_fit_rows,
    wavefront_header,
    wavefront_rows,
    wavefront_summary,
    write_csv,
)

EXIT_OK, EXIT_ERROR, EXIT_ASSERT = 0, 1, 2
FAILURE_MARKER = "FAILED"
INDICATOR_RTOL = 1e-6
SPECTRUM_TOL = 1e-8

DEFAULT_2D = {"grid": (2, 2.0, 512), "ladder": (2.0, 2, 5)}


# ---------------------------------------------------------------------------
# Stage results
# ---------------------------------------------------------------------------


@dataclass
class StageResult:
    data: dict = field(default_factory=dict)
    tables: List[Tuple[str, Sequence[str], List[list]]] = field(default_factory=list)
    plots: List[Tuple[str, Callable]] = field(default_factory=list)
    assertions: List[Tuple[str, bool]] = field(default_factory=list)
    lines: List[str] = field(default_factory=list)

    def check(self, name: str, ok: bool) -> None:
        self.assertions.append((name, bool(ok)))


class Context:
    """Objects shared between stages of one run (mollifier, embeddings)."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.order = cfg.gevrey_order
        self.ladder = cfg.epsilon_ladder
        self.grid = cfg.spatial_grid
        self.bins = cfg.direction_bins
        self.thresholds = cfg.threshold_set
        self._mnet = None
        self._nets: Dict[int, object] = {}

    @property
    def mollifier(self):
        r1, r2 = self.cfg.mollifier
        return default_mollifier(self.order, self.grid.dim, r1, r2)

    @property
    def mnet(self):
        if self._mnet is None:
            self._mnet = mollifier_net(self.mollifier, self.ladder, self.grid)
        return self._mnet

    def net(self, i: int):
        if i not in self._nets:
            self._nets[i] = embed_distribution(self.cfg.corpus[i], self.mnet)
        return self._nets[i]

    @property
    def plan(self):
        return localizer_plan(self.grid, self.order, self.bins, thresholds=self.thresholds)


def _name(i: int, spec: DistributionSpec) -> str:
    return f"{i}_{spec.kind}"


def _closed_forms(ctx: Context):
    inv = 1.0 / ctx.ladder.as_array()
    return [
        ("exp_minus_inv_eps", -inv, "negligible"),
        ("constant_one", np.zeros_like(inv), "moderate"),
        ("exp_inv_eps", inv, "non_moderate"),
    ]


def _series_rows(name, verdict):
    rows = []
    for alpha, series in sorted(verdict.series_by_alpha.items()):
        for eps, g in series:
            rows.append([name, ",".join(map(str, alpha)), eps, g])
    return rows


def stage_classify(ctx: Context) -> StageResult:
    res = StageResult()
    verdicts, series = [], []
    curves = []
    a = ctx.order.a
    for name, log_abs, expected in _closed_forms(ctx):
        net = closed_form_net(ctx.order, ctx.ladder, ctx.grid, log_abs)
        v = classify_net(net, alpha_max=ctx.cfg.alpha_max, k_min=ctx.thresholds.k_min)
        eps = ctx.ladder.as_array()
        analytic = eps ** a * np.asarray(log_abs)
        got = np.array([g for _, g in v.indicator_series])
        err = float(np.max(np.abs(got - analytic) / np.maximum(np.abs(analytic), 1.0)))
        res.check(f"{name} is {expected}", v.classification.value == expected)
        res.check(f"{name} indicator within {INDICATOR_RTOL:g}", err <= INDICATOR_RTOL)
        verdicts.append([name, v.classification.value, expected, v.fitted_k, v.fitted_C, err])
        series += _series_rows(name, v)
        curves.append((name, eps, got))
        res.lines.append(f"classify {name}: {v.classification.value}")
    for i, spec in enumerate(ctx.cfg.corpus):
        net = ctx.net(i)
        v = classify_net(net, alpha_max=ctx.cfg.alpha_max, k_min=ctx.thresholds.k_min)
        name = _name(i, spec)
        res.check(f"{name} embedding is moderate", v.is_moderate)
        verdicts.append([name, v.classification.value, "moderate", v.fitted_k, v.fitted_C, float("nan")])
        series += _series_rows(name, v)
        curves.append((name, np.array([e for e, _ in v.indicator_series]),
                       np.array([g for _, g in v.indicator_series])))
        res.lines.append(f"classify {spec.kind}: {v.classification.value}")
    res.data = {"verdicts": [dict(zip(("name", "class", "expected", "fitted_k", "fitted_C", "indicator_error"), r))
                             for r in verdicts]}
    res.tables.append(("verdicts", ["name", "class", "expected", "fitted_k", "fitted_C", "indicator_error"],
                       verdicts))
    res.tables.append(("indicator", ["name", "alpha", "eps", "G"], series))

    def plot(ax):
        for name, eps, g in curves:
            ax.plot(eps, g, marker="o", label=name)
        ax.set_xscale("log")
        ax.set_xlabel("eps")
        ax.set_ylabel("G(eps)")
        ax.legend(fontsize=7)

    res.plots.append(("classify_indicator", plot))
    return res


def stage_mollifier(ctx: Context) -> StageResult:
    res = StageResult()
    try:
        m = ctx.mollifier
    except ConstructionError as exc:
        res.check("moment conditions", False)
        res.data = {"error": str(exc), "alpha": list(exc.alpha) if exc.alpha else None}
        res.lines.append(f"mollifier: {exc}")
        return res
    res.check("moment conditions", True)
    spec = grid_fft(m.phi[None].astype(complex), m.grid)[0]
    r = np.sqrt(sum(x ** 2 for x in m.grid.freq_mesh()))
    plateau = float(np.abs(spec[r <= m.bump.r1] - 1).max())
    decay = float(np.abs(spec[r >= m.bump.r2]).max())
    res.check("plateau of phi_hat", plateau <= SPECTRUM_TOL)
    res.check("decay of phi_hat", decay <= SPECTRUM_TOL)
    rows = [[",".join(map(str, a)), v] for a, v in m.moment_residuals]
    res.tables.append(("moments", ["alpha", "residual"], rows))
    res.data = {
        "grid": m.grid.to_dict(),
        "r1": m.bump.r1,
        "r2": m.bump.r2,
        "max_moment_residual": max(v for _, v in m.moment_residuals),
        "plateau_error": plateau,
        "decay_error": decay,
        "seminorms": [[b, v] for b, v in m.seminorm_estimates],
        "dropped_eps": list(ctx.mnet.dropped),
    }
    res.lines.append(f"mollifier: max moment residual {res.data['max_moment_residual']:.3e}")
    if m.grid.dim == 1:
        x, phi = m.grid.axis, m.phi

        def plot(ax):
            ax.plot(x, phi)
            ax.set_xlim(-8, 8)
            ax.set_xlabel("x")
            ax.set_ylabel("phi")

        res.plots.append(("mollifier_phi", plot))
    return res


def stage_embed(ctx: Context) -> StageResult:
    res = StageResult()
    rows, items = [], []
    for i, spec in enumerate(ctx.cfg.corpus):
        net = ctx.net(i)
        item = {
            "name": _name(i, spec),
            "spec": spec.to_dict(),
            "ladder": list(net.ladder.values),
            "support_box": None if net.support_box is None else [list(b) for b in net.support_box],
            "reg_scale": net.reg_scale,
            "real": net.is_real(),
            "notes": list(net.notes),
        }
        if spec.kind == "gevrey_bump_function":
            f = gevrey_bump_samples(ctx.grid, ctx.order, spec.location,
                                    spec.param("plateau", 0.5), spec.param("support", 1.5))
            d = diagram_check(f, ctx.mnet, alpha_max=ctx.cfg.alpha_max)
            item["diagram_negligible"] = d["passes"]
            res.check(f"{item['name']} canonical and mollified embeddings agree", d["passes"])
        items.append(item)
        rows.append([item["name"], len(item["ladder"]), item["real"], item["reg_scale"] or "", len(item["notes"])])
        res.lines.append(f"embed {spec.kind}: {len(item['ladder'])} slices")
    res.data = {"embeddings": items}
    res.tables.append(("summary", ["name", "slices", "real", "reg_scale", "notes"], rows))
    return res


def stage_sigma(ctx: Context) -> StageResult:
    res = StageResult()
    items = []
    for i, spec in enumerate(ctx.cfg.corpus):
        cone, fits = sigma_cone(ctx.net(i), ctx.bins, ctx.thresholds)
        name = _name(i, spec)
        items.append({"name": name, "members": list(cone.members), "labels": cone.labels(),
                      "fits": [f.to_row() for f in fits]})
        res.tables.append((name, DECAY_FIT_HEADER, decay_fit_rows(fits)))
        res.lines.append(f"sigma {spec.kind}: members = {{{', '.join(cone.labels())}}}")
        b = [f.bin for f in fits]
        k2 = [f.k2 for f in fits]

        def plot(ax, b=b, k2=k2):
            ax.bar(b, k2)
            ax.axhline(ctx.thresholds.kappa_reg, color="k", linestyle="--")
            ax.set_xlabel("bin")
            ax.set_ylabel("fitted k2")

        res.plots.append((f"sigma_{name}", plot))
    res.data = {"cones": items}
    return res


def stage_wavefront(ctx: Context) -> StageResult:
    res = StageResult()
    items = []
    plan = ctx.plan
    for i, spec in enumerate(ctx.cfg.corpus):
        wf = wavefront(ctx.net(i), ctx.bins, ctx.thresholds, plan)
        name = _name(i, spec)
        summary = wavefront_summary(wf)
        summary["name"] = name
        summary["nested_violations"] = sorted(
            [list(c), list(lc.nested_violations)] for c, lc in wf.local.items() if lc.nested_violations
        )
        items.append(summary)
        res.tables.append((name, wavefront_header(ctx.grid.dim), wavefront_rows(wf)))
        cells = ", ".join(f"{tuple(c['center'])}:{c['bins']}" for c in summary["cells"])
        res.lines.append(f"wavefront {spec.kind}: {cells or 'empty'}")
        pts = [(c["center"], b) for c in summary["cells"] for b in c["bins"]]

        def plot(ax, pts=pts):
            for center, b in pts:
                if ctx.grid.dim == 1:
                    ax.plot(center[0], ctx.bins.angle(b), "s")
                else:
                    u = ctx.bins.unit_vector(b) * plan.cell_width * 0.45
                    ax.arrow(center[0], center[1], u[0], u[1], head_width=0.02)
            ax.set_xlim(-ctx.grid.extent, ctx.grid.extent)
            ax.set_xlabel("x")
            ax.set_ylabel("direction angle" if ctx.grid.dim == 1 else "y")

        res.plots.append((f"wavefront_{name}", plot))
    res.data = {"plan": plan.to_dict(), "wavefronts": items}
    return res


def stage_product(ctx: Context) -> StageResult:
    res = StageResult()
    default = ((0, 1),) if len(ctx.cfg.corpus) > 1 else ((0, 0),)
    pairs = ctx.cfg.products or default
    items, rows = [], []
    for i, j in pairs:
        rep = hormander_check(ctx.net(i), ctx.net(j), ctx.bins, ctx.thresholds, ctx.plan)
        name = f"{_name(i, ctx.cfg.corpus[i])}__{_name(j, ctx.cfg.corpus[j])}"
        rep["name"] = name
        items.append(rep)
        rows.append([name, rep["hypothesis_ok"], "" if rep["inclusion"] is None else rep["inclusion"],
                     len(rep["violations"])])
        res.check(f"{name} inclusion", rep["inclusion"] is not False)
        res.lines.append(f"product-check {name}: {rep['status']}")
    res.data = {"checks": items}
    res.tables.append(("summary", ["pair", "hypothesis_ok", "inclusion", "violations"], rows))
    return res


def stage_lemma(ctx: Context) -> StageResult:
    res = StageResult()
    out = random_cone_trials(ctx.cfg.trials, ctx.cfg.lemma_bins, ctx.cfg.seed)
    res.check("closure formula matches brute force", out["matches"] == out["trials"])
    res.data = out
    res.tables.append(("mismatches", ["a", "b", "formula", "oracle"],
                       [[m["a"], m["b"], m["formula"], m["oracle"]] for m in out["mismatches"]]))
    res.lines.append(f"lemma-trials: {out['matches']}/{out['trials']} exact equalities")
    return res


STAGE_FUNCS = {
    "classify": stage_classify,
    "mollifier": stage_mollifier,
    "embed": stage_embed,
    "sigma": stage_sigma,
    "wavefront": stage_wavefront,
    "product-check": stage_product,
    "lemma-trials": stage_lemma,
}
assert set(STAGE_FUNCS) == set(STAGES)


# ---------------------------------------------------------------------------
# Report writing
# ---------------------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def strip_timings(report: dict) -> dict:
    """Report without its ``timings`` entry, for reproducibility comparisons."""
    return {k: v for k, v in report.items() if k != "timings"}


def _save_plot(path: Path, draw: Callable) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "ultranet"
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        draw(ax)
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)


def run_pipeline(cfg: ExperimentConfig, out_dir, plots: bool = True, echo: Callable[[str], None] = print) -> Tuple[dict, int]:
    """Run every stage of ``cfg.pipeline`` and write the outputs.

    Returns the report and the exit code.  Errors inside a stage stop the run
    with exit code 1 after flushing what was produced so far.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / FAILURE_MARKER
    if marker.exists():
        marker.unlink()
    report = {
        "tool": "ultranet",
        "version": __version__,
        "config": cfg.to_dict(),
        "stages": {},
        "assertions": [],
        "timings": {},
    }
    code = EXIT_OK
    ctx = Context(cfg)
    for stage in cfg.pipeline:
        t0 = time.perf_counter()
        try:
            res = STAGE_FUNCS[stage](ctx)
        except Exception as exc:  # flushed to the report, then exit 1
            report["stages"][stage] = {"error": f"{type(exc).__name__}: {exc}"}
            report["timings"][stage] = time.perf_counter() - t0
            report["status"] = "error"
            _write_report(out, report)
            marker.write_text(f"stage {stage} raised {type(exc).__name__}: {exc}\n{traceback.format_exc()}")
            echo(f"error in stage {stage}: {exc}")
            return report, EXIT_ERROR
        report["timings"][stage] = time.perf_counter() - t0
        report["stages"][stage] = res.data
        for name, ok in res.assertions:
            report["assertions"].append({"stage": stage, "name": name, "passed": ok})
            if not ok:
                code = EXIT_ASSERT
        stage_dir = out / stage
        if res.tables:
            stage_dir.mkdir(exist_ok=True)
            for name, header, rows in res.tables:
                write_csv(stage_dir / f"{name}.csv", header, rows)
        if plots and res.plots:
            (out / "plots").mkdir(exist_ok=True)
            for name, draw in res.plots:
                _save_plot(out / "plots" / f"{name}.svg", draw)
        for line in res.lines:
            echo(line)
    report["status"] = "pass" if code == EXIT_OK else "fail"
    _write_report(out, report)
    if code != EXIT_OK:
        failed = [a["name"] for a in report["assertions"] if not a["passed"]]
        marker.write_text("assertion failures:\n" + "\n".join(failed) + "\n")
        echo(f"{len(failed)} assertion(s) failed: " + "; ".join(failed))
    return report, code


def _write_report(out: Path, report: dict) -> None:
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True, allow_nan=False)
    (out / "report.json").write_text(text + "\n")


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with status 1 and the usage text."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--s", type=float, help="Gevrey order s > 1")
    common.add_argument("--grid-n", type=int, help="grid points per axis (power of two)")
    common.add_argument("--ladder-jmax", type=int, help="finest ladder exponent: eps down to base**-jmax")
    common.add_argument("--bins", type=int, help="direction bins in 2D")
    common.add_argument("--out-dir", default="ultranet-out", help="output directory (default: ultranet-out)")
    common.add_argument("--spec", action="append", default=[],
                        help="distribution, e.g. dirac or heaviside:at=0.5,plateau=2,support=4 (repeatable)")
    common.add_argument("--no-plots", action="store_true", help="skip SVG plots")

    parser = _Parser(prog="ultranet", description="Gevrey generalized-function experiments")
    parser.add_argument("--version", action="version", version=f"ultranet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("run", parents=[common], help="run the configured pipeline")
    for stage in STAGES:
        p = sub.add_parser(stage, parents=[common], help=f"run the {stage} stage")
        if stage == "lemma-trials":
            p.add_argument("--trials", type=int, help="number of cone pairs with a defined sum")
            p.add_argument("--seed", type=int, help="random seed")
    return parser


def config_from_args(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {}
    if args.spec:
        try:
            corpus = tuple(DistributionSpec.parse(t) for t in args.spec)
        except UltranetError as exc:
            raise ConfigError(f"--spec: {exc}", field="corpus") from exc
        over["corpus"] = corpus
        if not args.config and any(s.kind == "line_delta_2d" for s in corpus):
            over.update(DEFAULT_2D)
    if args.command != "run":
        over["pipeline"] = (args.command,)
        over["products"] = ()
    if args.s is not None:
        over["order"] = args.s
    if args.grid_n is not None:
        dim, extent, _ = over.get("grid", cfg.grid)
        over["grid"] = (dim, extent, args.grid_n)
    if args.ladder_jmax is not None:
        base, j0, _ = over.get("ladder", cfg.ladder)
        over["ladder"] = (base, j0, args.ladder_jmax)
    if args.bins is not None:
        over["bins"] = args.bins
    if getattr(args, "trials", None) is not None:
        over["trials"] = args.trials
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    cfg = cfg.with_overrides(**over) if over else validate(cfg)
    needs_corpus = {"embed", "sigma", "wavefront", "product-check"}
    if not cfg.corpus and needs_corpus & set(cfg.pipeline):
        raise ConfigError("this stage needs a corpus (--spec or config corpus)", field="corpus")
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out_dir)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        msg = f"config error ({exc.field}): {exc}"
        print(msg, file=sys.stderr)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / FAILURE_MARKER).write_text(msg + "\n")
        except OSError:
            pass
        return EXIT_ERROR
    _, code = run_pipeline(cfg, out, plots=not args.no_plots)
    return code


if __name__ == "__main__":
    sys.exit(main())
