from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ContractError, DegenerateFitError

Z95 = 1.96


@dataclass
class SummaryStats:
    """Mean, spread and box-plot quantities of per-episode accuracies.

    ``std`` is the sample (n-1) deviation and is NaN for a single value.
    Whiskers are the most extreme values inside ``[q25 - 1.5 IQR, q75 + 1.5 IQR]``.
    """

    n: int
    mean: float
    std: float
    ci95: float
    median: float
    q25: float
    q75: float
    whisker_low: float
    whisker_high: float

    @property
    def iqr(self):
        return self.q75 - self.q25

    def to_json(self):
        return {k: (None if isinstance(v, float) and math.isnan(v) else v)
                for k, v in asdict(self).items()}


def summarize(values) -> SummaryStats:
    x = np.asarray(list(values), dtype=np.float64)
    n = len(x)
    if n == 0:
        raise ContractError("summarize needs at least one value")
    mean = float(x.mean())
    std = float(x.std(ddof=1)) if n > 1 else float("nan")
    ci = Z95 * std / math.sqrt(n) if n > 1 else float("nan")
    q25, med, q75 = (float(v) for v in np.quantile(x, [0.25, 0.5, 0.75]))
    iqr = q75 - q25
    lo_fence, hi_fence = q25 - 1.5 * iqr, q75 + 1.5 * iqr
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    return SummaryStats(n, mean, std, ci, med, q25, q75,
                        float(inside.min()), float(inside.max()))


@dataclass
class RegressionFit:
    """OLS line ``accuracy% = intercept + slope * omega``.

    ``area`` is NaN (and ``area_defined`` False) when the slope is not negative.
    """

    intercept: float
    slope: float
    area: float
    n: int
    residual_rms: float
    area_defined: bool = True

    def to_json(self):
        d = asdict(self)
        if not self.area_defined:
            d["area"] = None
        return d


def first_quadrant_area(intercept, slope, ceiling=100.0):
    """Area under ``clip(a + b x, 0, ceiling)`` for ``x`` from 0 to the x-intercept.

    Only defined for ``b < 0``; returns 0 when the line starts at or below zero.
    """
    a, b = float(intercept), float(slope)
    if b >= 0:
        raise DegenerateFitError("first-quadrant area needs a negative slope")
    if a <= 0:
        return 0.0
    x0 = -a / b
    if a <= ceiling:
        return a * x0 / 2.0
    # flat at the ceiling until the line drops below it
    x1 = (ceiling - a) / b
    return ceiling * x1 + ceiling * (x0 - x1) / 2.0


def fit_hardness_curve(points) -> RegressionFit:
    """Least-squares fit of accuracy (percent) against hardness."""
    pts = np.asarray(list(points), dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2:
        raise DegenerateFitError("need at least two points")
    x, y = pts[:, 0], pts[:, 1]
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx == 0.0 or np.ptp(x) == 0.0:
        raise DegenerateFitError("all hardness values are equal")
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    rms = float(math.sqrt((resid ** 2).mean()))
    if slope < 0:
        return RegressionFit(intercept, slope, first_quadrant_area(intercept, slope), len(pts), rms)
    warnings.warn("non-negative slope: first-quadrant area undefined", RuntimeWarning,
                  stacklevel=2)
    return RegressionFit(intercept, slope, float("nan"), len(pts), rms, area_defined=False)


def correlate(points) -> float:
    """Pearson correlation of the two coordinates."""
    pts = np.asarray(list(points), dtype=np.float64).reshape(-1, 2)
    if len(pts) < 3:
        raise ContractError("correlation needs at least three points")
    x, y = pts[:, 0] - pts[:, 0].mean(), pts[:, 1] - pts[:, 1].mean()
    sx, sy = float((x * x).sum()), float((y * y).sum())
    if sx == 0.0 or sy == 0.0:
        raise ContractError("correlation undefined for zero variance")
    return float((x * y).sum() / math.sqrt(sx * sy))
