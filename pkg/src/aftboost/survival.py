"""Accelerated failure time likelihood for censored time-to-event labels.

The model is ``ln Y = tau(x) + sigma * Z`` where ``Z`` follows one of three
standard error distributions. Everything here works on the standardized
residual ``s(y) = (ln y - tau) / sigma``.

Log-probabilities are evaluated in whichever tail keeps them accurate, so the
censored loss stays finite and differentiable far out in the tails. The
probability floor only applies when the interval mass is not positive in
floating point.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from .exceptions import DomainError, LabelError

PROB_FLOOR = 1e-12
HESS_FLOOR = 1e-16
_LOG_PROB_FLOOR = math.log(PROB_FLOOR)


class Distribution(str, enum.Enum):
    NORMAL = "normal"
    LOGISTIC = "logistic"
    EXTREME = "extreme"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            for member in cls:
                if member.value == value.lower():
                    return member
        return None


# Per-distribution primitives. All accept arrays and +/-inf.

def _log_pdf(z, dist):
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        if dist is Distribution.NORMAL:
            out = -0.5 * z * z - 0.5 * math.log(2.0 * math.pi)
        elif dist is Distribution.LOGISTIC:
            a = np.abs(z)
            out = -a - 2.0 * np.log1p(np.exp(-a))
        else:
            out = z - np.exp(z)
    return np.where(np.isinf(z), -np.inf, out)


def _dlog_pdf(z, dist):
    """Derivative of ``ln f(z)``."""
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        if dist is Distribution.NORMAL:
            return -z
        if dist is Distribution.LOGISTIC:
            return -np.tanh(0.5 * z)
        return 1.0 - np.exp(z)


def _d2log_pdf(z, dist):
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        if dist is Distribution.NORMAL:
            return np.full_like(z, -1.0)
        if dist is Distribution.LOGISTIC:
            p = special.expit(z)
            return -2.0 * p * (1.0 - p)
        return -np.exp(z)


def _log_cdf(z, dist):
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore", divide="ignore"):
        if dist is Distribution.NORMAL:
            return special.log_ndtr(z)
        if dist is Distribution.LOGISTIC:
            return -np.logaddexp(0.0, -z)
        return np.log(-np.expm1(-np.exp(z)))


def _log_sf(z, dist):
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        if dist is Distribution.NORMAL:
            return special.log_ndtr(-z)
        if dist is Distribution.LOGISTIC:
            return -np.logaddexp(0.0, z)
        return -np.exp(z)


def dist_pdf(z: float, dist: Distribution | str) -> float:
    """Density of the standard error distribution at finite ``z``."""
    dist = Distribution(dist)
    if not math.isfinite(z):
        raise DomainError(f"pdf requires a finite argument, got {z!r}")
    return float(np.exp(_log_pdf(z, dist)))


def dist_cdf(z: float, dist: Distribution | str) -> float:
    """Cumulative distribution at ``z``; ``z`` may be infinite but not NaN."""
    dist = Distribution(dist)
    if math.isnan(z):
        raise DomainError("cdf is undefined for NaN")
    return float(np.exp(_log_cdf(z, dist)))


@dataclass(frozen=True)
class SurvivalLabel:
    """Censoring-aware target in days.

    ``event=True`` is an exact observation (``lower_days == upper_days``).
    ``event=False`` with ``upper_days=inf`` is right-censored; with a finite
    upper bound it is interval-censored (left censoring is the interval
    starting at the minimum-time floor).
    """

    event: bool
    lower_days: float
    upper_days: float

    def __post_init__(self):
        lo, hi = self.lower_days, self.upper_days
        if math.isnan(lo) or math.isnan(hi):
            raise LabelError("label bounds must not be NaN")
        if not (lo > 0 and math.isfinite(lo)):
            raise LabelError(f"lower_days must be positive and finite, got {lo}")
        if lo > hi:
            raise LabelError(f"lower_days {lo} exceeds upper_days {hi}")
        if self.event and lo != hi:
            raise LabelError("an observed event needs lower_days == upper_days")
        if not self.event and lo == hi:
            raise LabelError("a censored label needs upper_days > lower_days")

    @classmethod
    def observed(cls, days: float) -> "SurvivalLabel":
        return cls(True, float(days), float(days))

    @classmethod
    def right_censored(cls, lower_days: float) -> "SurvivalLabel":
        return cls(False, float(lower_days), math.inf)

    @classmethod
    def interval(cls, lower_days: float, upper_days: float) -> "SurvivalLabel":
        return cls(False, float(lower_days), float(upper_days))

    @property
    def kind(self) -> str:
        if self.event:
            return "uncensored"
        return "right" if math.isinf(self.upper_days) else "interval"


@dataclass(frozen=True)
class AftParams:
    sigma: float = 1.0
    distribution: Distribution = Distribution.NORMAL

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")
        object.__setattr__(self, "distribution", Distribution(self.distribution))


def standardized_residual(days, tau, sigma: float):
    """``(ln days - tau) / sigma``; ``days=inf`` maps to ``+inf``."""
    with np.errstate(divide="ignore"):
        return (np.log(days) - tau) / sigma


def labels_to_bounds(labels: Iterable[SurvivalLabel]) -> tuple[np.ndarray, np.ndarray]:
    labels = list(labels)
    lower = np.array([lab.lower_days for lab in labels], dtype=float)
    upper = np.array([lab.upper_days for lab in labels], dtype=float)
    return lower, upper


def bounds_to_labels(lower, upper) -> list[SurvivalLabel]:
    return [SurvivalLabel(bool(lo == hi), float(lo), float(hi)) for lo, hi in zip(lower, upper)]


def check_bounds(lower, upper) -> tuple[np.ndarray, np.ndarray]:
    """Validate label bound arrays without building label objects."""
    lower = np.asarray(lower, dtype=float).ravel()
    upper = np.asarray(upper, dtype=float).ravel()
    if lower.shape != upper.shape:
        raise LabelError("lower and upper bounds differ in length")
    if np.isnan(lower).any() or np.isnan(upper).any():
        raise LabelError("label bounds must not be NaN")
    if not (np.isfinite(lower).all() and (lower > 0).all()):
        raise LabelError("lower bounds must be positive and finite")
    if (lower > upper).any():
        raise LabelError("lower bound exceeds upper bound")
    return lower, upper


def check_survival_target(y) -> tuple[np.ndarray, np.ndarray]:
    """Accept a sequence of :class:`SurvivalLabel` or an ``(n, 2)`` array of bounds."""
    if isinstance(y, Sequence) and len(y) and isinstance(y[0], SurvivalLabel):
        return labels_to_bounds(y)
    arr = np.asarray(y, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise LabelError("expected SurvivalLabel objects or an (n, 2) array of [lower, upper] days")
    return check_bounds(arr[:, 0], arr[:, 1])


def _log_interval_mass(s_lo, s_hi, dist):
    """``ln(F(s_hi) - F(s_lo))`` computed in the tail where it is accurate."""
    upper_tail = s_lo > 0
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        a = np.where(upper_tail, _log_sf(s_lo, dist), _log_cdf(s_hi, dist))
        b = np.where(upper_tail, _log_sf(s_hi, dist), _log_cdf(s_lo, dist))
        out = a + np.log(-np.expm1(b - a))
    clamped = ~(np.isfinite(out) & (b < a))
    return np.where(clamped, _LOG_PROB_FLOOR, out), clamped


def _prepare(lower, upper, tau, params):
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    tau = np.broadcast_to(np.asarray(tau, dtype=float), lower.shape)
    s_lo = standardized_residual(lower, tau, params.sigma)
    s_hi = standardized_residual(upper, tau, params.sigma)
    return lower, upper, s_lo, s_hi, lower == upper


def aft_loss_array(lower, upper, tau, params: AftParams = AftParams(), return_clamped: bool = False):
    """Per-row negative log-likelihood.

    Uncensored rows use the density of ``ln y`` (so the value can be negative);
    censored rows use the probability mass between the bounds.
    """
    lower, upper, s_lo, s_hi, exact = _prepare(lower, upper, tau, params)
    dist = params.distribution
    dens = -_log_pdf(s_lo, dist) + math.log(params.sigma) + np.log(lower)
    log_mass, clamped = _log_interval_mass(s_lo, s_hi, dist)
    loss = np.where(exact, dens, -log_mass)
    clamped = clamped & ~exact
    if return_clamped:
        return loss, clamped
    return loss


def aft_grad_hess_array(lower, upper, tau, params: AftParams = AftParams()):
    """First and second derivatives of :func:`aft_loss_array` in ``tau``."""
    lower, upper, s_lo, s_hi, exact = _prepare(lower, upper, tau, params)
    dist = params.distribution
    sigma = params.sigma

    grad_exact = _dlog_pdf(s_lo, dist) / sigma
    hess_exact = -_d2log_pdf(s_lo, dist) / sigma**2

    log_mass, _ = _log_interval_mass(s_lo, s_hi, dist)
    with np.errstate(over="ignore", invalid="ignore"):
        r_hi = np.exp(_log_pdf(s_hi, dist) - log_mass)
        r_lo = np.exp(_log_pdf(s_lo, dist) - log_mass)
        # 0 * inf from the infinite bound must contribute nothing
        t_hi = np.where(r_hi > 0, _dlog_pdf(s_hi, dist) * r_hi, 0.0)
        t_lo = np.where(r_lo > 0, _dlog_pdf(s_lo, dist) * r_lo, 0.0)
        diff = r_hi - r_lo
        grad_cens = diff / sigma
        hess_cens = (diff * diff - (t_hi - t_lo)) / sigma**2

    grad = np.where(exact, grad_exact, grad_cens)
    hess = np.where(exact, hess_exact, hess_cens)
    grad = np.where(np.isfinite(grad), grad, 0.0)
    hess = np.where(np.isfinite(hess), hess, HESS_FLOOR)
    return grad, np.maximum(hess, HESS_FLOOR)


def aft_loss(label: SurvivalLabel, tau: float, params: AftParams = AftParams()) -> float:
    return float(aft_loss_array(label.lower_days, label.upper_days, tau, params))


def aft_loss_flagged(label: SurvivalLabel, tau: float, params: AftParams = AftParams()) -> tuple[float, bool]:
    """Like :func:`aft_loss` but also reports whether the probability floor was hit."""
    loss, clamped = aft_loss_array(label.lower_days, label.upper_days, tau, params, return_clamped=True)
    return float(loss), bool(clamped)


def aft_grad_hess(label: SurvivalLabel, tau: float, params: AftParams = AftParams()) -> tuple[float, float]:
    if not math.isfinite(tau):
        raise DomainError("tau must be finite")
    g, h = aft_grad_hess_array(label.lower_days, label.upper_days, tau, params)
    return float(g), float(h)
