"""Verification reports and the small statistics shared by the verifiers."""

import json
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class VerificationReport:
    """Pass/fail record tying a numerical experiment to a theorem.

    ``passed`` is computed by the producing verifier from ``constants``,
    tolerances and standard errors that are all stored in the report, so a
    reader can recompute it.
    """

    theorem_tag: str
    passed: bool
    constants: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)
    mc_se: float = float("nan")
    details: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "theorem_tag": self.theorem_tag,
            "pass": bool(self.passed),
            "constants": _clean(self.constants),
            "grids": _clean(self.grids),
            "mc_se": _clean(self.mc_se),
            "details": _clean(self.details),
            "warnings": list(self.warnings),
        }

    def to_json(self, **extra):
        payload = self.to_dict()
        payload.update(_clean(extra))
        return dumps(payload)


def dumps(obj):
    """Deterministic JSON: sorted keys, fixed separators, NaN/inf as null."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def loglog_slope(x, y, sigma=None):
    """Least-squares slope of log y against log x, with its standard error."""
    lx = np.log(np.asarray(x, float))
    ly = np.log(np.asarray(y, float))
    w = None if sigma is None else 1.0 / np.maximum(np.asarray(sigma, float), 1e-300) ** 2
    A = np.vstack([lx, np.ones_like(lx)]).T
    if w is None:
        w = np.ones_like(lx)
    W = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(A * W[:, None], ly * W, rcond=None)
    resid = ly - A @ coef
    n = len(lx)
    if n > 2:
        s2 = float(np.sum(w * resid**2) / (n - 2))
        cov = s2 * np.linalg.inv((A * w[:, None]).T @ A)
        se = math.sqrt(max(cov[0, 0], 0.0))
    else:
        se = float("nan")
    return float(coef[0]), se


def no_upward_trend(r, values, slope_floor=-0.1, max_ratio=3.0):
    """Finite-sample proxy for r-uniformity of a constant.

    The slope of log C against log r must be at least ``slope_floor`` (a
    negative slope means C grows as r shrinks) and max/min at most
    ``max_ratio``.
    """
    values = np.asarray(values, float)
    if len(values) < 2 or not np.all(np.isfinite(values)) or np.any(values <= 0):
        return False, float("nan"), float("nan")
    slope, _ = loglog_slope(r, values)
    spread = float(values.max() / values.min())
    return (slope >= slope_floor and spread <= max_ratio), slope, spread
