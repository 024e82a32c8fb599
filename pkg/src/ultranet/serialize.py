"""File formats: ``.npz`` containers for nets and CSV tables for fits and wave fronts.

A net container holds ``format``, ``version``, ``order``, ``ladder``,
``grid`` (dim, extent, points), the row-major complex ``mantissa`` with one
row per eps, ``log_scale`` and a JSON ``meta`` string with the support box,
regularization band and notes.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np

from .core import EpsilonLadder, GevreyOrder, Grid, SampledNet
from .errors import InvalidNetError
from .microlocal import WavefrontEstimate
from .spectral import DecayFit

FORMAT = "ultranet-net"
VERSION = 1

DECAY_FIT_HEADER = ["bin", "c0", "k1", "k2", "residual_rms", "samples"]
WAVEFRONT_HEADER_1D = ["cell_x", "bin_index", "bin_angle", "verdict", "k2", "residual"]
WAVEFRONT_HEADER_2D = ["cell_x", "cell_y", "bin_index", "bin_angle", "verdict", "k2", "residual"]


def save_net(path: Union[str, Path], net: SampledNet) -> None:
    meta = {
        "support_box": None if net.support_box is None else [list(iv) for iv in net.support_box],
        "reg_scale": net.reg_scale,
        "notes": list(net.notes),
    }
    with open(path, "wb") as fh:
        np.savez(
            fh,
            format=np.array(FORMAT),
            version=np.array(VERSION),
            order=np.array(net.order.s),
            ladder=net.ladder.as_array(),
            grid=np.array([net.grid.dim, net.grid.extent, net.grid.points], dtype=float),
            mantissa=np.ascontiguousarray(net.mantissa),
            log_scale=np.asarray(net.log_scale),
            meta=np.array(json.dumps(meta, sort_keys=True)),
        )


def load_net(path: Union[str, Path]) -> SampledNet:
    """Read a container written by :func:`save_net`.

    Raises
    ------
    InvalidNetError
        If the file is not a net container of a supported version.
    """
    with np.load(path, allow_pickle=False) as data:
        if "format" not in data or str(data["format"]) != FORMAT:
            raise InvalidNetError(f"{path} is not an {FORMAT} container")
        if int(data["version"]) != VERSION:
            raise InvalidNetError(f"unsupported container version {int(data['version'])}")
        dim, extent, points = data["grid"]
        meta = json.loads(str(data["meta"]))
        box = meta["support_box"]
        return SampledNet(
            GevreyOrder(float(data["order"])),
            EpsilonLadder(tuple(float(e) for e in data["ladder"])),
            Grid(int(dim), float(extent), int(points)),
            data["mantissa"],
            data["log_scale"],
            support_box=None if box is None else tuple(tuple(iv) for iv in box),
            reg_scale=meta["reg_scale"],
            notes=tuple(meta["notes"]),
        )


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else ("-inf" if v < 0 else "nan"))
    return str(v)


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def decay_fit_rows(fits: Iterable[DecayFit]) -> List[list]:
    return [[f.to_row()[k] for k in DECAY_FIT_HEADER] for f in fits]


def wavefront_rows(wf: WavefrontEstimate) -> List[list]:
    """One row per (evaluated cell, bin) with the finest-scale fit.

    Cells whose localized net vanishes carry no fits and are omitted.
    """
    rows = []
    bins = wf.bins
    for cell in sorted(wf.local):
        lc = wf.local[cell]
        if lc.vacuous or not lc.scales:
            continue
        _, members, fits = lc.scales[-1]
        by_bin = {f.bin: f for f in fits}
        for b in bins.all():
            f = by_bin.get(b)
            verdict = "singular" if b in lc.cone else "regular"
            k2 = f.k2 if f is not None else float("nan")
            res = f.residual_rms if f is not None else float("nan")
            rows.append(list(cell) + [b, bins.angle(b), verdict, k2, res])
    return rows


def wavefront_header(dim: int) -> List[str]:
    return WAVEFRONT_HEADER_1D if dim == 1 else WAVEFRONT_HEADER_2D


def wavefront_summary(wf: WavefrontEstimate) -> dict:
    """Plot-ready JSON summary: plan, cells with their singular bins."""
    return {
        "plan": wf.plan.to_dict(),
        "bins": wf.bins.count,
        "bin_angles": [wf.bins.angle(b) for b in wf.bins.all()],
        "cells": [
            {"cell": list(c), "center": list(wf.plan.cell_center(c)), "bins": list(wf.cone_at(c).members)}
            for c in wf.cells
        ],
    }
