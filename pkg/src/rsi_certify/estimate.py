"""Statistical estimation layer for telemetry elasticities.

Rolling log-log slopes with heteroskedasticity- and autocorrelation-robust
(Newey-West) standard errors are the workhorse.  On top of those sit
regular-variation index diagnostics with wild-bootstrap constancy checks,
Potter-bound verification for the slowly varying part, instrumental-variable
slopes against measurement-error attenuation, a local-linear-trend Kalman
smoother for de-noising, sup-Wald structural-break segmentation, the
sample-size rule for detecting a given superlinearity margin, and
cooperative-structure (antagonism) diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import series as ts
from .errors import (
    AllWindowsDegenerate,
    InsufficientRange,
    NonPositiveSeries,
    SingularDesign,
    TooShort,
    WeakInstrument,
)

WEAK_INSTRUMENT_F = 10.0  # Staiger-Stock rule of thumb for one instrument


# ---------------------------------------------------------------------------
# HAC covariance


def auto_lag(n: int) -> int:
    """Standard automatic truncation lag floor(4 * (n/100)^(2/9))."""
    return int(math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def newey_west_cov(X: np.ndarray, residuals: np.ndarray, lag: int) -> np.ndarray:
    """HAC sandwich covariance of least-squares coefficients.

    Bartlett weights w_l = 1 - l/(lag+1) taper the autocovariance terms;
    lag 0 collapses to the heteroskedasticity-robust (White) covariance.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    e = np.asarray(residuals, dtype=float)
    n, k = X.shape
    if e.shape != (n,):
        raise SingularDesign("residual length does not match design")
    if not 0 <= lag < n:
        raise SingularDesign(f"lag={lag} must satisfy 0 <= lag < n={n}")
    xtx = X.T @ X
    try:
        bread = np.linalg.inv(xtx)
    except np.linalg.LinAlgError as exc:
        raise SingularDesign("X'X is singular") from exc
    if np.linalg.cond(xtx) > 1e14:
        raise SingularDesign("X'X is numerically singular")

    xe = X * e[:, None]
    meat = xe.T @ xe
    for ell in range(1, lag + 1):
        w = 1.0 - ell / (lag + 1.0)
        gamma = xe[ell:].T @ xe[:-ell]
        meat += w * (gamma + gamma.T)
    return bread @ meat @ bread


def newey_west_se(X: np.ndarray, residuals: np.ndarray, lag: int) -> np.ndarray:
    """HAC standard errors (square root of the sandwich diagonal)."""
    cov = newey_west_cov(X, residuals, lag)
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))


def _hac_slope_fit(x: np.ndarray, y: np.ndarray, w: np.ndarray, lag: int):
    """Kernel-weighted slope of y on x with HAC standard error.

    The weighted problem is rescaled by sqrt(w) so the HAC machinery sees a
    plain least-squares design; a degrees-of-freedom factor
    n_eff/(n_eff - 2) corrects the small-sample shrinkage of residual
    outer products.
    """
    sw = np.sqrt(w)
    X = np.column_stack([np.ones_like(x), x]) * sw[:, None]
    Y = y * sw
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    resid = Y - X @ coef
    cov = newey_west_cov(X, resid, lag)
    n_eff = float(w.sum() ** 2 / (w * w).sum())
    dof_factor = n_eff / max(n_eff - 2.0, 1.0)
    se = math.sqrt(max(cov[1, 1] * dof_factor, 0.0))
    return float(coef[1]), se, float(coef[0])


def _prewhitened_slope_fit(x: np.ndarray, y: np.ndarray, w: np.ndarray,
                           lag: int):
    """One Cochrane-Orcutt pass: estimate the AR(1) coefficient of the
    initial residuals, quasi-difference both variables, refit with HAC
    errors on the whitened problem.  The slope is invariant to the
    transformation; only its uncertainty changes."""
    slope0, _, intercept0 = _hac_slope_fit(x, y, w, lag)
    resid = y - (intercept0 + slope0 * x)
    num = float((resid[1:] * resid[:-1]).sum())
    den = float((resid[:-1] ** 2).sum())
    rho = 0.0 if den <= 0 else max(-0.99, min(0.99, num / den))
    if abs(rho) < 1e-3 or x.size < 4:
        return slope0, _hac_slope_fit(x, y, w, lag)[1]
    xq = x[1:] - rho * x[:-1]
    yq = y[1:] - rho * y[:-1]
    wq = np.sqrt(w[1:] * w[:-1])
    slope, se, _ = _hac_slope_fit(xq, yq, wq, min(lag, xq.size - 2))
    return slope, se


# ---------------------------------------------------------------------------
# rolling feedback elasticity


@dataclass(frozen=True)
class ElasticityEstimate:
    """One local elasticity with its HAC uncertainty."""

    t: float
    value: float
    se: float
    ci: tuple[float, float]
    window: float
    n_eff: float

    def to_json_dict(self) -> dict:
        return {"t": self.t, "value": self.value, "se": self.se,
                "ci": list(self.ci), "window": self.window,
                "n_eff": self.n_eff}


@dataclass
class RollingElasticity:
    """Rolling feedback-elasticity profile with gap markers for skipped
    windows (nonpositive rates or degenerate regressors)."""

    estimates: list[ElasticityEstimate]
    gaps: list[tuple[float, str]]
    alpha: float

    @property
    def t(self) -> np.ndarray:
        return np.array([e.t for e in self.estimates])

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.estimates])

    @property
    def ses(self) -> np.ndarray:
        return np.array([e.se for e in self.estimates])

    def envelope(self) -> tuple[ElasticityEstimate, ElasticityEstimate]:
        """(lowest, highest) pointwise estimates over the profile."""
        lo = min(self.estimates, key=lambda e: e.value)
        hi = max(self.estimates, key=lambda e: e.value)
        return lo, hi

    def to_slope_series(self) -> ts.SlopeSeries:
        half = self.estimates[0].window / 2 if self.estimates else 0.0
        return ts.SlopeSeries(self.t, self.values, self.ses, half)


def rolling_elasticity(I: ts.TimeSeries, Idot: ts.TimeSeries, window: float,
                       lag: int | str = "auto", alpha: float = 0.05,
                       min_points: int = 5, centers=None,
                       prewhiten: bool = False) -> RollingElasticity:
    """Local log-log slope of the rate against the state, per window center.

    The feedback elasticity is only defined where the rate is positive;
    windows containing nonpositive rates are skipped and recorded as gaps
    rather than clamped.  Standard errors are Newey-West with Bartlett
    weights (lag "auto" uses the floor(4(n/100)^(2/9)) rule per window).
    ``centers`` restricts evaluation to the given window centers (default:
    every shared sample time).  ``prewhiten`` applies one AR(1)
    quasi-differencing pass (off by default): the slope is refit on
    rho-differenced data, which tightens HAC errors under strong serial
    correlation and is inert on white residuals.
    """
    # join on the common timestamps (the rate grid is the state grid minus
    # its last point when produced by the capability layer)
    common, ia, ib = np.intersect1d(I.t, Idot.t, return_indices=True)
    if common.size < min_points:
        raise AllWindowsDegenerate("series share too few timestamps")
    i_vals = I.values[ia]
    r_vals = Idot.values[ib]

    half = window / 2.0
    estimates: list[ElasticityEstimate] = []
    gaps: list[tuple[float, str]] = []
    z = float(norm.ppf(1 - alpha / 2.0))
    eval_centers = common if centers is None \
        else np.asarray(centers, dtype=float)
    for center in eval_centers:
        mask = np.abs(common - center) <= half * (1 + 1e-9)
        n_win = int(mask.sum())
        if n_win < min_points:
            continue
        iw = i_vals[mask]
        rw = r_vals[mask]
        if np.any(rw <= 0):
            gaps.append((float(center), "nonpositive rate in window"))
            continue
        if np.any(iw <= 0):
            gaps.append((float(center), "nonpositive state in window"))
            continue
        lx = np.log(iw)
        ly = np.log(rw)
        w = ts.epanechnikov((common[mask] - center) / half)
        sw = w.sum()
        varx = (w * (lx - (w * lx).sum() / sw) ** 2).sum() / sw
        if varx < ts.VAR_LOG_TOL:
            gaps.append((float(center), "degenerate regressor"))
            continue
        eff_lag = auto_lag(n_win) if lag == "auto" else int(lag)
        eff_lag = min(eff_lag, n_win - 2)
        if prewhiten:
            slope, se = _prewhitened_slope_fit(lx, ly, w, eff_lag)
        else:
            slope, se, _ = _hac_slope_fit(lx, ly, w, eff_lag)
        n_eff = float(sw * sw / (w * w).sum())
        estimates.append(ElasticityEstimate(
            float(center), slope, se, (slope - z * se, slope + z * se),
            window, n_eff))
    if not estimates:
        raise AllWindowsDegenerate(
            "no window produced a usable elasticity estimate")
    return RollingElasticity(estimates, gaps, alpha)


# ---------------------------------------------------------------------------
# regular-variation indices


@dataclass(frozen=True)
class IndexEstimate:
    """A local log-log index with min/max envelopes over the validation
    range and the constancy verdict."""

    hat: float
    minus: float
    plus: float
    accepted: bool
    fluctuation: float
    bootstrap_threshold: float
    profile_abscissa: tuple[float, ...] = ()
    profile_slopes: tuple[float, ...] = ()


@dataclass
class RVIndices:
    """Index diagnostics for the state factor (q), efficiency factor (xi),
    and learning-curve slope (rho)."""

    q: IndexEstimate | None = None
    xi: IndexEstimate | None = None
    rho: IndexEstimate | None = None

    @property
    def rv_accepted(self) -> bool:
        parts = [e.accepted for e in (self.q, self.xi, self.rho) if e is not None]
        return bool(parts) and all(parts)


def _local_index_profile(abscissa: np.ndarray, values: np.ndarray,
                         window_decades: float, min_points: int = 5):
    """Rolling log-log slopes over windows of fixed width in log-abscissa.

    Returns (centers, slopes, masses, local_fit) where masses are the
    kernel mass per window (the weights of the band-weighted mean) and
    local_fit holds each sample's fitted log-value from the window centered
    on it (global-fit fallback at the edges); the local residuals feed the
    wild bootstrap.
    """
    order = np.argsort(abscissa)
    s = np.asarray(abscissa, dtype=float)[order]
    v = np.asarray(values, dtype=float)[order]
    if np.any(s <= 0) or np.any(v <= 0):
        raise NonPositiveSeries("index estimation requires positive samples")
    span = math.log10(s[-1] / s[0])
    if span < 1.0:
        raise InsufficientRange(
            f"abscissa spans {span:.2f} decades; need at least one")
    ls = np.log(s)
    lv = np.log(v)
    half = 0.5 * window_decades * math.log(10.0)
    slope_g, intercept_g, _, _ = ts.wls_slope(ls, lv, np.ones_like(ls))
    local_fit = intercept_g + slope_g * ls
    centers, slopes, masses = [], [], []
    for idx, c in enumerate(ls):
        mask = np.abs(ls - c) <= half * (1 + 1e-12)
        if mask.sum() < min_points:
            continue
        w = ts.epanechnikov((ls[mask] - c) / half)
        varx = (w * (ls[mask] - (w * ls[mask]).sum() / w.sum()) ** 2).sum()
        if varx <= 0:
            continue
        slope, intercept, _, _ = ts.wls_slope(ls[mask], lv[mask], w)
        centers.append(math.exp(c))
        slopes.append(slope)
        masses.append(w.sum())
        local_fit[idx] = intercept + slope * c
    if not slopes:
        raise AllWindowsDegenerate("no index window had enough points")
    return np.array(centers), np.array(slopes), np.array(masses), local_fit


def _index_estimate(abscissa, values, window_decades, bootstrap_reps,
                    seed, accept_quantile) -> IndexEstimate:
    centers, slopes, masses, local_fit = _local_index_profile(
        abscissa, values, window_decades)
    hat = float((masses * slopes).sum() / masses.sum())
    fluct = float(np.max(np.abs(slopes - hat)))

    # wild bootstrap of the fluctuation statistic under a constant index:
    # rebuild on the global power-law fit plus Rademacher-flipped LOCAL
    # residuals (global residuals would absorb breakpoint structure into
    # the null and mask genuine index changes)
    order = np.argsort(abscissa)
    s = np.asarray(abscissa, dtype=float)[order]
    v = np.asarray(values, dtype=float)[order]
    ls, lv = np.log(s), np.log(v)
    slope_g, intercept_g, _, _ = ts.wls_slope(ls, lv, np.ones_like(ls))
    resid_local = lv - local_fit
    rng = np.random.default_rng(seed)
    boot_fluct = np.empty(bootstrap_reps)
    for b in range(bootstrap_reps):
        flips = rng.choice([-1.0, 1.0], size=ls.size)
        lv_b = intercept_g + slope_g * ls + flips * resid_local
        _, slopes_b, masses_b, _ = _local_index_profile(
            s, np.exp(lv_b), window_decades)
        hat_b = (masses_b * slopes_b).sum() / masses_b.sum()
        boot_fluct[b] = np.max(np.abs(slopes_b - hat_b))
    threshold = float(np.quantile(boot_fluct, accept_quantile))
    accepted = fluct <= threshold + 1e-12
    return IndexEstimate(hat, float(slopes.min()), float(slopes.max()),
                         accepted, fluct, threshold,
                         tuple(map(float, centers)), tuple(map(float, slopes)))


def rv_indices(phi_samples=None, eta_samples=None, neg_lprime_samples=None,
               window_decades: float = 0.5, bootstrap_reps: int = 999,
               seed: int = 0, accept_quantile: float = 0.95) -> RVIndices:
    """Estimate local power-law indices by log-derivative regressions.

    Each input is a pair of positive arrays (abscissa, values) spanning at
    least a decade.  The state-factor index q and efficiency index xi are
    the local slopes themselves; the learning-curve index is recovered
    from the slope of the negated loss derivative via rho = -1 - slope.
    Constancy (the regular-variation hypothesis) is accepted when the
    profile fluctuation stays below a wild-bootstrap quantile.
    """
    out = RVIndices()
    if phi_samples is not None:
        out.q = _index_estimate(*phi_samples, window_decades, bootstrap_reps,
                                seed, accept_quantile)
    if eta_samples is not None:
        out.xi = _index_estimate(*eta_samples, window_decades, bootstrap_reps,
                                 seed + 1, accept_quantile)
    if neg_lprime_samples is not None:
        base = _index_estimate(*neg_lprime_samples, window_decades,
                               bootstrap_reps, seed + 2, accept_quantile)
        # rho = -1 - slope flips the envelope ordering
        out.rho = IndexEstimate(
            hat=-1.0 - base.hat, minus=-1.0 - base.plus,
            plus=-1.0 - base.minus, accepted=base.accepted,
            fluctuation=base.fluctuation,
            bootstrap_threshold=base.bootstrap_threshold,
            profile_abscissa=base.profile_abscissa,
            profile_slopes=tuple(-1.0 - s for s in base.profile_slopes))
    return out


# ---------------------------------------------------------------------------
# Potter bounds


@dataclass(frozen=True)
class PotterResult:
    passed: bool
    worst_pair: tuple[int, int] | None
    worst_margin: float  # max of |log L ratio| - eps|log I ratio| - log c
    pairs_checked: int

    def __bool__(self):
        return self.passed


def potter_check(I_values, L_values, eps: float, c_eps: float,
                 max_pairs: int = 250_000, seed: int = 0) -> PotterResult:
    """Check |log(L_i/L_j)| <= eps |log(I_i/I_j)| + log(c_eps) over pairs.

    All pairs are scanned when their count is below ``max_pairs``; beyond
    that a seeded random subsample keeps the scan deterministic.  Returns
    the worst pair and its violation margin (positive means violated).
    """
    I = np.asarray(I_values, dtype=float)
    L = np.asarray(L_values, dtype=float)
    if I.shape != L.shape or I.ndim != 1:
        raise InsufficientRange("paired samples required")
    if np.any(I <= 0) or np.any(L <= 0):
        raise NonPositiveSeries("Potter check requires positive samples")
    if c_eps < 1.0:
        raise InsufficientRange("c_eps must be >= 1")
    n = I.size
    li = np.log(I)
    ll = np.log(L)
    total_pairs = n * (n - 1) // 2
    if total_pairs <= max_pairs:
        iu, ju = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(seed)
        iu = rng.integers(0, n, size=max_pairs)
        ju = rng.integers(0, n, size=max_pairs)
        keep = iu != ju
        iu, ju = iu[keep], ju[keep]
    margin = np.abs(ll[iu] - ll[ju]) - eps * np.abs(li[iu] - li[ju]) \
        - math.log(c_eps)
    worst = int(np.argmax(margin))
    worst_margin = float(margin[worst])
    return PotterResult(worst_margin <= 1e-12,
                        (int(iu[worst]), int(ju[worst])),
                        worst_margin, int(iu.size))


# ---------------------------------------------------------------------------
# instrumental-variable slope


@dataclass(frozen=True)
class IvSlopeResult:
    beta: float
    se: float
    first_stage_f: float


def iv_slope(Y: ts.TimeSeries, X: ts.TimeSeries, Z: ts.TimeSeries,
             lag: int | str = "auto") -> IvSlopeResult:
    """Instrumented log-log slope Cov(log Y, log Z) / Cov(log X, log Z).

    Consistent when the instrument is uncorrelated with the measurement
    error in X but correlated with the latent regressor.  The standard
    error is HAC on the instrument-weighted moment condition.  A first-stage
    F below 10 raises WeakInstrument.
    """
    ts.require_same_grid(Y, X)
    ts.require_same_grid(Z, X)
    for s in (Y, X, Z):
        if np.any(s.values <= 0):
            raise NonPositiveSeries(f"series {s.name!r} must be positive")
    ly = np.log(Y.values)
    lx = np.log(X.values)
    lz = np.log(Z.values)
    n = ly.size
    dy = ly - ly.mean()
    dx = lx - lx.mean()
    dz = lz - lz.mean()

    szx = float((dz * dx).sum())
    szz = float((dz * dz).sum())
    # first-stage F of X on Z
    r2 = szx ** 2 / (szz * float((dx * dx).sum())) if szz > 0 else 0.0
    f_stat = (n - 2) * r2 / max(1.0 - r2, 1e-300)
    if f_stat < WEAK_INSTRUMENT_F or abs(szx) < 1e-12:
        raise WeakInstrument("instrument too weak for a reliable slope",
                             first_stage_f=f_stat)
    beta = float((dz * dy).sum()) / szx

    # HAC variance of the moment m_t = z_t * e_t around the IV solution
    e = dy - beta * dx
    m = (dz * e)[:, None]
    eff_lag = auto_lag(n) if lag == "auto" else int(lag)
    s_long = newey_west_cov(np.ones((n, 1)), (m[:, 0]), min(eff_lag, n - 1))
    # newey_west_cov with a constant design returns the long-run variance of
    # the moment divided by n^2
    var_beta = float(s_long[0, 0]) * n * n / szx ** 2
    return IvSlopeResult(beta, math.sqrt(max(var_beta, 0.0)), float(f_stat))


def ols_loglog_slope(Y: ts.TimeSeries, X: ts.TimeSeries) -> float:
    """Plain log-log least-squares slope (attenuated under measurement
    error; the IV variant corrects it)."""
    ly = np.log(Y.values)
    lx = np.log(X.values)
    dx = lx - lx.mean()
    return float((dx * (ly - ly.mean())).sum() / (dx * dx).sum())


# ---------------------------------------------------------------------------
# Kalman local-linear-trend smoother


def kalman_trend(series: ts.TimeSeries, process_var: float,
                 obs_var: float) -> ts.TimeSeries:
    """Smooth a positive series with a local linear trend on its logarithm.

    State is (level, slope) of log(value); the forward filter is followed
    by a Rauch-Tung-Striebel backward pass and the smoothed level is
    exponentiated back.  The filter is initialized from the first two
    observations with a prior variance tied to the process noise, so an
    enormous observation variance reproduces the free trend from the
    initial state, and model-consistent noiseless data pass through
    unchanged.
    """
    if process_var <= 0 or obs_var <= 0:
        raise NonPositiveSeries("variances must be positive")
    if np.any(series.values <= 0):
        raise NonPositiveSeries(f"series {series.name!r} must be positive")
    y = np.log(series.values)
    t = series.t
    n = y.size
    if n < 3:
        raise TooShort("need at least 3 samples to smooth a trend")

    dt0 = t[1] - t[0]
    x = np.array([y[0], (y[1] - y[0]) / dt0])
    P = np.diag([process_var, process_var / dt0 ** 2])

    H = np.array([[1.0, 0.0]])
    xs_pred = np.empty((n, 2))
    Ps_pred = np.empty((n, 2, 2))
    xs_filt = np.empty((n, 2))
    Ps_filt = np.empty((n, 2, 2))
    Fs = np.empty((n, 2, 2))

    for k in range(n):
        if k == 0:
            F = np.eye(2)
            x_pred, P_pred = x, P
        else:
            dt = t[k] - t[k - 1]
            F = np.array([[1.0, dt], [0.0, 1.0]])
            Q = process_var * np.array([[dt, 0.0], [0.0, dt]])
            x_pred = F @ xs_filt[k - 1]
            P_pred = F @ Ps_filt[k - 1] @ F.T + Q
        Fs[k] = F
        xs_pred[k] = x_pred
        Ps_pred[k] = P_pred
        innov = y[k] - float((H @ x_pred)[0])
        S = float((H @ P_pred @ H.T)[0, 0]) + obs_var
        K = (P_pred @ H.T / S).ravel()
        xs_filt[k] = x_pred + K * innov
        Ps_filt[k] = (np.eye(2) - np.outer(K, H)) @ P_pred

    xs_smooth = np.empty_like(xs_filt)
    xs_smooth[-1] = xs_filt[-1]
    P_smooth = Ps_filt[-1]
    for k in range(n - 2, -1, -1):
        P_pred_next = Ps_pred[k + 1]
        G = Ps_filt[k] @ Fs[k + 1].T @ np.linalg.inv(P_pred_next)
        xs_smooth[k] = xs_filt[k] + G @ (xs_smooth[k + 1] - xs_pred[k + 1])
        P_smooth = Ps_filt[k] + G @ (P_smooth - P_pred_next) @ G.T

    return ts.TimeSeries(f"{series.name}_smoothed", series.unit, t,
                         np.exp(xs_smooth[:, 0]), None, series.snapshot_version)


# ---------------------------------------------------------------------------
# structural breaks


# Asymptotic critical values for the sup-Wald test of one coefficient with
# 15% trimming (Andrews 1993, as corrected 2003).
SUP_WALD_CRITICAL_15 = {0.10: 7.17, 0.05: 8.85, 0.01: 12.35}


@dataclass
class BreakSegmentation:
    """Sorted breakpoints and the half-open segments they induce."""

    breakpoints: list[float]
    segments: list[tuple[float, float]]

    def to_json_dict(self) -> dict:
        return {"breakpoints": list(self.breakpoints),
                "segments": [list(s) for s in self.segments]}


def _sup_wald_mean_shift(y: np.ndarray, trim: float):
    """Sup of Wald statistics for a single mean shift at unknown time.

    Each candidate split compares pooled and split residual sums of squares;
    the statistic is the F form for one restriction.
    """
    n = y.size
    k_lo = max(int(math.floor(trim * n)), 2)
    k_hi = min(int(math.ceil((1 - trim) * n)), n - 2)
    if k_hi <= k_lo:
        return 0.0, None
    rss0 = float(((y - y.mean()) ** 2).sum())
    best_w, best_k = -1.0, None
    csum = np.cumsum(y)
    csum2 = np.cumsum(y * y)
    total = csum[-1]
    total2 = csum2[-1]
    for k in range(k_lo, k_hi + 1):
        s1, s2 = csum[k - 1], total - csum[k - 1]
        q1, q2 = csum2[k - 1], total2 - csum2[k - 1]
        rss1 = (q1 - s1 * s1 / k) + (q2 - s2 * s2 / (n - k))
        denom = rss1 / max(n - 2, 1)
        w = (rss0 - rss1) / denom if denom > 0 else math.inf
        if w > best_w:
            best_w, best_k = w, k
    return best_w, best_k


def sup_wald_breaks(slope_series: ts.SlopeSeries, trim: float = 0.15,
                    alpha: float = 0.05, min_segment: int = 30) -> BreakSegmentation:
    """Segment a local-slope process at mean shifts found by sup-Wald scans.

    A single-break scan with the asymptotic critical value is applied
    recursively (binary segmentation) until no segment of at least
    ``min_segment`` points rejects stability.  No break yields one segment
    covering the whole window.
    """
    if not 0 < trim < 0.45:
        raise TooShort(f"trim={trim} outside (0, 0.45)")
    if alpha not in SUP_WALD_CRITICAL_15:
        raise TooShort(f"no tabulated critical value for alpha={alpha}; "
                       f"choose from {sorted(SUP_WALD_CRITICAL_15)}")
    y = np.asarray(slope_series.slope, dtype=float)
    t = np.asarray(slope_series.t, dtype=float)
    if y.size < min_segment:
        raise TooShort(f"need >= {min_segment} points, got {y.size}")
    critical = SUP_WALD_CRITICAL_15[alpha]

    breaks: list[int] = []

    def scan(lo: int, hi: int):
        if hi - lo < min_segment:
            return
        w, k = _sup_wald_mean_shift(y[lo:hi], trim)
        if k is None or w <= critical:
            return
        split = lo + k
        breaks.append(split)
        scan(lo, split)
        scan(split, hi)

    scan(0, y.size)
    breaks.sort()
    bp_times = [float(t[k]) for k in breaks]
    edges = [float(t[0])] + bp_times + [float(t[-1]) + 1e-9]
    segments = [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]
    return BreakSegmentation(bp_times, segments)


# ---------------------------------------------------------------------------
# power analysis


def required_samples(sigma: float, tau: float, delta: float,
                     alpha: float, beta: float) -> int:
    """Effective samples needed to detect an elasticity margin delta.

    Ceiling of (z_{1-alpha} + z_{1-beta})^2 sigma^2 / (delta^2 tau^2), where
    sigma^2 is the log-rate noise variance and tau^2 the log-state spread
    in the window.
    """
    if min(sigma, tau, delta) <= 0:
        raise TooShort("sigma, tau, delta must be positive")
    if not (0 < alpha < 0.5 and 0 < beta < 0.5):
        raise TooShort("alpha and beta must lie in (0, 0.5)")
    z = float(norm.ppf(1 - alpha) + norm.ppf(1 - beta))
    return int(math.ceil(z * z * sigma * sigma / (delta * delta * tau * tau)))


# ---------------------------------------------------------------------------
# excitation diagnostic


def excitation_infimum(u: ts.TimeSeries, window: float) -> ts.SlopeSeries:
    """Rolling infimum of an allocation signal.

    Persistence of excitation has no agreed test threshold, so this is a
    diagnostic only: a window infimum bounded away from zero supports the
    elasticity-bound hypotheses, a vanishing one flags them.
    """
    half = window / 2.0
    t_out, inf_out = [], []
    for center in u.t:
        mask = np.abs(u.t - center) <= half * (1 + 1e-9)
        if mask.sum() < 2:
            continue
        t_out.append(float(center))
        inf_out.append(float(u.values[mask].min()))
    return ts.SlopeSeries(t_out, inf_out, np.zeros(len(t_out)), half)


# ---------------------------------------------------------------------------
# antagonism diagnostics


@dataclass(frozen=True)
class AntagonismResult:
    viol: float
    sigma_I_hat: float
    sigma_x_hat: float
    cooperative_accepted: bool
    statistically_zero: bool
    residual_bound_ok: bool


def antagonism_diagnostics(partials, a_hat: float, theta: float,
                           residuals_I=(), residuals_x=(),
                           alpha: float = 0.05) -> AntagonismResult:
    """Test the cooperative-structure assumptions behind the envelopes.

    ``partials`` are estimated off-diagonal cross-partials as (value, se)
    pairs; the violation magnitude sums the negative parts.  The sector
    residuals are deviations from the cooperative fit whose positive parts
    bound the antagonistic channel.  The cooperative envelope is accepted
    when no partial is statistically negative and the residual bound
    sigma_I + sigma_x <= theta * a_hat holds with theta < 1.
    """
    if not 0 <= theta < 1:
        raise TooShort(f"theta={theta} must lie in [0, 1)")
    z = float(norm.ppf(1 - alpha))
    viol = 0.0
    stat_zero = True
    for value, se in partials:
        viol += max(0.0, -float(value))
        if value + z * se < 0:
            stat_zero = False
    sigma_i = float(max([max(0.0, float(r)) for r in residuals_I], default=0.0))
    sigma_x = float(max([max(0.0, float(r)) for r in residuals_x], default=0.0))
    bound_ok = sigma_i + sigma_x <= theta * a_hat + 1e-12
    return AntagonismResult(viol, sigma_i, sigma_x,
                            stat_zero and bound_ok, stat_zero, bound_ok)
