"""Telemetry ingestion and log-slope primitives.

A TimeSeries is an immutable, unit-tagged, versioned run of scalar samples
with strictly increasing timestamps.  All downstream estimation works on
log-slopes computed from these series, so the transforms here are kept
deliberately small: CSV/JSON round-trips, linear resampling without
extrapolation, kernel-weighted local log-slopes, rolling elasticities, and
the effective-dataset combination D_real + rho * D_synth.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateRegressor,
    GridMismatch,
    InsufficientWindow,
    NonMonotoneTime,
    NonPositiveValue,
    OutOfRange,
    ParseError,
    RhoOutOfRange,
    UnitMismatch,
)

GRID_RTOL = 1e-9
VAR_LOG_TOL = 1e-12  # minimum Var(log x) for a usable regressor window


@dataclass(frozen=True)
class Sample:
    """One telemetry point: epoch seconds, value in the series unit, and an
    optional quality weight in [0, 1]."""

    t: float
    value: float
    quality: float | None = None


class TimeSeries:
    """Immutable sampled scalar signal.

    Timestamps are float epoch seconds and strictly increasing; all samples
    share the declared unit.  ``snapshot_version`` identifies the data
    snapshot the samples came from (a content hash for ingested files), so
    revised inputs become distinct series rather than silent overwrites.
    """

    __slots__ = ("name", "unit", "t", "values", "weights", "snapshot_version")

    def __init__(self, name, unit, t, values, weights=None, snapshot_version=""):
        t = np.asarray(t, dtype=float)
        values = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise NonMonotoneTime("series must contain at least one sample")
        if t.shape != values.shape:
            raise GridMismatch("timestamp and value arrays differ in length")
        if not np.all(np.isfinite(t)):
            raise NonMonotoneTime("timestamps must be finite")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise NonMonotoneTime(f"timestamps not strictly increasing in {name!r}")
        if not np.all(np.isfinite(values)):
            raise NonPositiveValue(f"non-finite value in series {name!r}")
        if weights is not None:
            weights = np.asarray(weights, dtype=float)
            if weights.shape != t.shape:
                raise GridMismatch("quality array length mismatch")
            if np.any((weights < 0) | (weights > 1) | ~np.isfinite(weights)):
                raise NonPositiveValue("quality weights must lie in [0, 1]")
            weights = weights.copy()
            weights.flags.writeable = False
        t = t.copy()
        values = values.copy()
        t.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "name", str(name))
        object.__setattr__(self, "unit", str(unit))
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "snapshot_version", str(snapshot_version))

    def __setattr__(self, key, value):
        raise AttributeError("TimeSeries is immutable")

    def __len__(self):
        return self.t.size

    def __repr__(self):
        return (f"TimeSeries({self.name!r}, unit={self.unit!r}, n={len(self)}, "
                f"span=[{self.t[0]:g}, {self.t[-1]:g}])")

    # -- derived views ----------------------------------------------------

    @property
    def samples(self) -> list[Sample]:
        w = self.weights
        return [Sample(float(tt), float(vv), None if w is None else float(ww))
                for tt, vv, ww in zip(self.t, self.values,
                                      w if w is not None else np.ones_like(self.t))]

    def effective_weights(self) -> np.ndarray:
        """Quality weights, defaulting to 1 where the column was absent."""
        if self.weights is None:
            return np.ones_like(self.values)
        return self.weights

    def replace(self, *, name=None, unit=None, values=None, t=None,
                weights=None, snapshot_version=None) -> "TimeSeries":
        return TimeSeries(
            self.name if name is None else name,
            self.unit if unit is None else unit,
            self.t if t is None else t,
            self.values if values is None else values,
            self.weights if weights is None and t is None else weights,
            self.snapshot_version if snapshot_version is None else snapshot_version,
        )

    def restrict(self, t_lo, t_hi) -> "TimeSeries":
        mask = (self.t >= t_lo) & (self.t <= t_hi)
        if not mask.any():
            raise OutOfRange(f"no samples of {self.name!r} in [{t_lo}, {t_hi}]")
        w = None if self.weights is None else self.weights[mask]
        return TimeSeries(self.name, self.unit, self.t[mask], self.values[mask],
                          w, self.snapshot_version)

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        samples = []
        for s in self.samples:
            rec = {"t": s.t, "value": s.value}
            if self.weights is not None:
                rec["quality"] = s.quality
            samples.append(rec)
        return {
            "name": self.name,
            "unit": self.unit,
            "snapshot_version": self.snapshot_version,
            "samples": samples,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TimeSeries":
        samples = d["samples"]
        t = [s["t"] for s in samples]
        v = [s["value"] for s in samples]
        has_quality = any("quality" in s and s["quality"] is not None for s in samples)
        w = [s.get("quality", 1.0) if s.get("quality") is not None else 1.0
             for s in samples] if has_quality else None
        return cls(d["name"], d["unit"], t, v, w, d.get("snapshot_version", ""))

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# unit={self.unit}\n")
        if self.weights is None:
            buf.write("t,value\n")
            for tt, vv in zip(self.t, self.values):
                buf.write(f"{float(tt)!r},{float(vv)!r}\n")
        else:
            buf.write("t,value,quality\n")
            for tt, vv, ww in zip(self.t, self.values, self.weights):
                buf.write(f"{float(tt)!r},{float(vv)!r},{float(ww)!r}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class SlopePoint:
    """Local log-slope estimate at one window center."""

    t: float
    slope: float
    se: float
    window_half_width: float
    n_eff: float = 0.0


class SlopeSeries:
    """Rolling local-slope estimates (log-derivatives or elasticities).

    Points exist only where the window held at least three usable samples;
    standard errors are the plain weighted-least-squares ones (HAC-corrected
    variants live in the estimation layer).
    """

    __slots__ = ("t", "slope", "se", "window_half_width")

    def __init__(self, t, slope, se, window_half_width):
        self.t = np.asarray(t, dtype=float)
        self.slope = np.asarray(slope, dtype=float)
        self.se = np.asarray(se, dtype=float)
        self.window_half_width = float(window_half_width)
        if not (self.t.shape == self.slope.shape == self.se.shape):
            raise GridMismatch("slope series arrays differ in length")
        if np.any(self.se < 0):
            raise NonPositiveValue("standard errors must be nonnegative")

    def __len__(self):
        return self.t.size

    def points(self) -> list[SlopePoint]:
        return [SlopePoint(float(a), float(b), float(c), self.window_half_width)
                for a, b, c in zip(self.t, self.slope, self.se)]


# ---------------------------------------------------------------------------
# ingestion


def _parse_timestamp(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        pass
    iso = text.strip()
    if iso.endswith("Z"):
        iso = iso[:-1] + "+00:00"
    try:
        return datetime.fromisoformat(iso).timestamp()
    except ValueError as exc:
        raise ValueError(f"unparseable timestamp {text!r}") from exc


def ingest_csv(path, expected_unit: str | None = None) -> TimeSeries:
    """Read a telemetry CSV into a validated TimeSeries.

    Expected layout: a ``# unit=<unit>`` comment line, a ``t,value[,quality]``
    header, then one row per sample.  Timestamps may be epoch seconds or
    RFC3339.  The snapshot version is a content hash of the file, so
    re-ingesting a revised file yields a distinct series.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    snapshot = hashlib.sha256(raw).hexdigest()[:16]
    text = raw.decode("utf-8")

    unit = None
    header = None
    t, values, qualities = [], [], []
    saw_quality = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped.lstrip("#").strip()
            if body.startswith("unit="):
                unit = body[len("unit="):].strip()
            continue
        row = next(csv.reader([line]))
        row = [cell.strip() for cell in row]
        if header is None:
            header = [c.lower() for c in row]
            if header not in (["t", "value"], ["t", "value", "quality"]):
                raise ParseError(f"unexpected header {row!r}; "
                                 "want t,value[,quality]", line=lineno)
            saw_quality = len(header) == 3
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}",
                             line=lineno)
        try:
            t.append(_parse_timestamp(row[0]))
            values.append(float(row[1]))
            if saw_quality:
                qualities.append(float(row[2]) if row[2] != "" else 1.0)
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc

    if unit is None:
        raise ParseError("missing '# unit=<unit>' declaration")
    if header is None or not t:
        raise ParseError("no data rows found")
    if expected_unit is not None and unit != expected_unit:
        raise UnitMismatch(f"file declares unit {unit!r}, expected {expected_unit!r}")

    import os
    name = os.path.splitext(os.path.basename(str(path)))[0]
    return TimeSeries(name, unit, t, values,
                      qualities if saw_quality else None, snapshot)


def write_csv(series: TimeSeries, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(series.to_csv_text())


def write_json(series: TimeSeries, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(series.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> TimeSeries:
    with open(path, "r", encoding="utf-8") as fh:
        return TimeSeries.from_json_dict(json.load(fh))


# ---------------------------------------------------------------------------
# grid utilities


def same_grid(a: TimeSeries, b: TimeSeries) -> bool:
    if len(a) != len(b):
        return False
    scale = max(1.0, float(np.max(np.abs(a.t))))
    return bool(np.allclose(a.t, b.t, rtol=0.0, atol=GRID_RTOL * scale))


def require_same_grid(a: TimeSeries, b: TimeSeries) -> None:
    if not same_grid(a, b):
        raise GridMismatch(f"series {a.name!r} and {b.name!r} are not on a "
                           "common grid; resample first")


def resample(x: TimeSeries, grid: float, start: float | None = None,
             end: float | None = None) -> TimeSeries:
    """Linearly interpolate onto a uniform grid with step ``grid``.

    The grid never extends past the sampled range: requesting points before
    the first or after the last sample raises OutOfRange rather than
    extrapolating.
    """
    if grid <= 0:
        raise OutOfRange("grid step must be positive")
    t0 = x.t[0] if start is None else float(start)
    t1 = x.t[-1] if end is None else float(end)
    if t0 < x.t[0] - GRID_RTOL or t1 > x.t[-1] + GRID_RTOL:
        raise OutOfRange(
            f"requested grid [{t0}, {t1}] exceeds sampled range "
            f"[{x.t[0]}, {x.t[-1]}] of {x.name!r}")
    if t1 < t0:
        raise OutOfRange("grid end precedes grid start")
    n = int(math.floor((t1 - t0) / grid + GRID_RTOL)) + 1
    grid_t = t0 + grid * np.arange(n)
    values = np.interp(grid_t, x.t, x.values)
    weights = None
    if x.weights is not None:
        weights = np.clip(np.interp(grid_t, x.t, x.weights), 0.0, 1.0)
    return TimeSeries(x.name, x.unit, grid_t, values, weights, x.snapshot_version)


def align(y: TimeSeries, x: TimeSeries) -> tuple[TimeSeries, TimeSeries]:
    """Put two series on the common grid given by x's timestamps restricted
    to the overlap of both ranges (linear interpolation of y)."""
    if same_grid(y, x):
        return y, x
    lo = max(y.t[0], x.t[0])
    hi = min(y.t[-1], x.t[-1])
    if hi <= lo:
        raise GridMismatch(f"series {y.name!r} and {x.name!r} do not overlap in time")
    mask = (x.t >= lo) & (x.t <= hi)
    grid_t = x.t[mask]
    y_vals = np.interp(grid_t, y.t, y.values)
    y_on = TimeSeries(y.name, y.unit, grid_t, y_vals, None, y.snapshot_version)
    x_on = TimeSeries(x.name, x.unit, grid_t, x.values[mask],
                      None if x.weights is None else x.weights[mask],
                      x.snapshot_version)
    return y_on, x_on


# ---------------------------------------------------------------------------
# local regression primitives


def epanechnikov(u: np.ndarray) -> np.ndarray:
    """Compactly supported parabolic kernel on |u| <= 1."""
    w = 1.0 - u * u
    w[w < 0] = 0.0
    return w


def wls_slope(x: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Weighted least-squares fit y ~ a + b*x.

    Returns (slope, intercept, se_slope, residuals).  The slope SE is the
    classical weighted one; zero when the fit is exact.
    """
    w = np.asarray(w, dtype=float)
    sw = w.sum()
    if sw <= 0:
        raise InsufficientWindow("all kernel weights vanish in window")
    xbar = (w * x).sum() / sw
    ybar = (w * y).sum() / sw
    dx = x - xbar
    sxx = (w * dx * dx).sum()
    if sxx <= 0:
        raise DegenerateRegressor("zero regressor variance in window")
    slope = (w * dx * (y - ybar)).sum() / sxx
    intercept = ybar - slope * xbar
    resid = y - (intercept + slope * x)
    n_eff = sw * sw / (w * w).sum()
    dof = max(n_eff - 2.0, 1.0)
    sigma2 = (w * resid * resid).sum() / sw * (n_eff / dof)
    se = math.sqrt(max(sigma2 / sxx, 0.0))
    return slope, intercept, se, resid


def _window_mask(t: np.ndarray, center: float, half: float) -> np.ndarray:
    return np.abs(t - center) <= half * (1 + GRID_RTOL)


def log_slope(x: TimeSeries, window: float, center_t: float) -> SlopePoint:
    """Local growth rate d log x / dt at ``center_t``.

    Fits log(value) against t over the window of full width ``window``
    centered at ``center_t``, with Epanechnikov kernel weights times any
    quality weights.  Requires at least three strictly positive samples in
    the window.
    """
    half = window / 2.0
    mask = _window_mask(x.t, center_t, half)
    if mask.sum() < 3:
        raise InsufficientWindow(
            f"window [{center_t - half}, {center_t + half}] holds "
            f"{int(mask.sum())} samples; need >= 3")
    tt = x.t[mask]
    vv = x.values[mask]
    if np.any(vv <= 0):
        raise NonPositiveValue(
            f"log_slope needs strictly positive values in window of {x.name!r}")
    w = epanechnikov((tt - center_t) / half) * x.effective_weights()[mask]
    slope, _, se, _ = wls_slope(tt, np.log(vv), w)
    n_eff = w.sum() ** 2 / (w * w).sum()
    return SlopePoint(float(center_t), float(slope), float(se), half, float(n_eff))


def rolling_log_slope(x: TimeSeries, window: float) -> SlopeSeries:
    """log_slope evaluated at every sample time with enough neighbors."""
    half = window / 2.0
    ts, slopes, ses = [], [], []
    for center in x.t:
        try:
            pt = log_slope(x, window, float(center))
        except (InsufficientWindow, DegenerateRegressor):
            continue
        ts.append(pt.t)
        slopes.append(pt.slope)
        ses.append(pt.se)
    return SlopeSeries(ts, slopes, ses, half)


def elasticity(y: TimeSeries, x: TimeSeries, window: float) -> SlopeSeries:
    """Rolling local slope of log y against log x (the elasticity of y
    with respect to x).

    The series are aligned onto x's grid over their time overlap.  Windows
    where Var(log x) falls below tolerance are skipped; if no window
    survives, DegenerateRegressor is raised.
    """
    y_on, x_on = align(y, x)
    if np.any(y_on.values <= 0) or np.any(x_on.values <= 0):
        raise NonPositiveValue("elasticity requires strictly positive series")
    ly = np.log(y_on.values)
    lx = np.log(x_on.values)
    half = window / 2.0
    qual = x_on.effective_weights()
    ts, slopes, ses = [], [], []
    for center in x_on.t:
        mask = _window_mask(x_on.t, center, half)
        if mask.sum() < 3:
            continue
        w = epanechnikov((x_on.t[mask] - center) / half) * qual[mask]
        sw = w.sum()
        if sw <= 0:
            continue
        mx = (w * lx[mask]).sum() / sw
        varx = (w * (lx[mask] - mx) ** 2).sum() / sw
        if varx < VAR_LOG_TOL:
            continue
        slope, _, se, _ = wls_slope(lx[mask], ly[mask], w)
        ts.append(float(center))
        slopes.append(slope)
        ses.append(se)
    if not ts:
        raise DegenerateRegressor(
            f"Var(log {x.name}) below {VAR_LOG_TOL} in every window")
    return SlopeSeries(ts, slopes, ses, half)


def effective_dataset(d_real: TimeSeries, d_synth: TimeSeries,
                      rho_syn: float) -> TimeSeries:
    """Pointwise effective dataset D_real + rho_syn * D_synth.

    ``rho_syn`` discounts synthetic data to its real-data equivalent and must
    lie in [0, 1]; both inputs must share grid and unit.
    """
    if not 0.0 <= rho_syn <= 1.0:
        raise RhoOutOfRange(f"rho_syn={rho_syn} outside [0, 1]")
    require_same_grid(d_real, d_synth)
    if d_real.unit != d_synth.unit:
        raise UnitMismatch(
            f"cannot combine units {d_real.unit!r} and {d_synth.unit!r}")
    vals = d_real.values + rho_syn * d_synth.values
    return TimeSeries(f"{d_real.name}_eff", d_real.unit, d_real.t, vals,
                      None, d_real.snapshot_version)
