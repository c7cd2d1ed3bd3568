"""Class-weighted sigmoid focal losses with outlier clamping.

Every loss works on a batch of logits ``z`` of shape ``(B, C)`` with
integer targets ``y`` of shape ``(B,)`` and returns per-sample values and
the analytic gradient with respect to ``z``. The single-sample helpers
(:func:`focal_loss`, :func:`mwnl_loss`, :func:`loss_for_family`) accept a
1-D ``z`` and a scalar ``y`` and return a :class:`LossOutput`.

The focal family uses per-class sigmoids on sign-flipped logits: the
target logit keeps its sign, every other logit is negated, and
``p_t = sigmoid(z_t)`` is the probability of being right about that class.
"""

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import DataError, ParameterError

FAMILIES = ("ce", "ce_rw", "cb_focal", "mwl_focal", "mwnl")


class LossOutput(NamedTuple):
    value: float
    grad: np.ndarray


@dataclass(frozen=True)
class ClassStats:
    counts: tuple

    def __post_init__(self):
        counts = tuple(int(n) for n in self.counts)
        object.__setattr__(self, "counts", counts)
        if not counts:
            raise ParameterError("class counts are empty")
        bad = [i for i, n in enumerate(counts) if n < 1]
        if bad:
            raise ParameterError(f"class(es) {bad} have no samples; their weights are undefined")

    @property
    def num_classes(self):
        return len(self.counts)

    @classmethod
    def from_labels(cls, labels, num_classes):
        return cls(tuple(np.bincount(np.asarray(labels, dtype=int), minlength=num_classes)))


@dataclass(frozen=True)
class LossConfig:
    """Hyperparameters selecting one member of the loss family.

    ``alpha`` is the weighting exponent, ``gamma`` the focal exponent,
    ``clamp_t`` the outlier threshold on ``p_t`` (ignored by ``mwl_focal``),
    ``class_coeff`` the per-class multipliers (``None`` means all ones),
    and ``beta_cb`` the class-balanced beta read only by ``cb_focal``.
    """

    family: str = "mwnl"
    alpha: float = 1.1
    gamma: float = 2.0
    clamp_t: float = 0.1
    class_coeff: tuple = None
    beta_cb: float = 0.999

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown loss family {self.family!r}; expected one of {FAMILIES}")
        if self.alpha < 0:
            raise ParameterError("alpha must be >= 0")
        if self.gamma < 0:
            raise ParameterError("gamma must be >= 0")
        if not 0.0 <= self.clamp_t < 1.0:
            raise ParameterError("clamp_t must lie in [0, 1)")
        if self.family == "mwnl" and self.clamp_t <= 0:
            raise ParameterError("mwnl needs clamp_t > 0; use mwl_focal for an unclamped loss")
        if not 0.0 <= self.beta_cb < 1.0:
            raise ParameterError("beta_cb must lie in [0, 1)")
        if self.class_coeff is not None:
            coeff = tuple(float(c) for c in self.class_coeff)
            if any(c <= 0 for c in coeff):
                raise ParameterError("class coefficients must be > 0")
            object.__setattr__(self, "class_coeff", coeff)

    @property
    def threshold(self):
        return self.clamp_t if self.family == "mwnl" else 0.0

    @cached_property
    def clamp_constant(self):
        """``(1 - T)^gamma * log(T)``: the value a clamped class term takes."""
        t = self.threshold
        return (1.0 - t) ** self.gamma * math.log(t) if t > 0 else -math.inf

    def coefficients(self, num_classes):
        if self.class_coeff is None:
            return np.ones(num_classes)
        if len(self.class_coeff) != num_classes:
            raise ParameterError(f"{len(self.class_coeff)} class coefficients for {num_classes} classes")
        return np.asarray(self.class_coeff)


# -- elementwise helpers ------------------------------------------------------

def log_sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(-np.abs(x))))


def sigmoid(x):
    return np.exp(log_sigmoid(x))


def _check_targets(z, y):
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y)
    if z.ndim != 2 or y.shape != (z.shape[0],):
        raise ParameterError(f"logits {z.shape} and targets {y.shape} do not match")
    if y.size and (y.min() < 0 or y.max() >= z.shape[1]):
        raise ParameterError(f"target class out of range [0, {z.shape[1]})")
    return z, y.astype(np.intp)


def _signs(z, y):
    s = -np.ones_like(z)
    s[np.arange(z.shape[0]), y] = 1.0
    return s


def transformed_probs(z, y):
    """``p_t``: sigmoid of the target logit, sigmoid of minus every other logit."""
    single = np.ndim(z) == 1
    z2, y2 = _check_targets(np.atleast_2d(z), np.atleast_1d(y))
    p = sigmoid(_signs(z2, y2) * z2)
    return p[0] if single else p


def _focal_terms(zt, gamma):
    """Per-class ``(1 - p)^gamma log p`` and its derivative in ``zt``.

    With ``p = sigmoid(zt)``: d/dzt = (1-p)^(gamma+1) - gamma p (1-p)^gamma log p.
    Powers of ``1 - p`` are taken in log space so saturated logits stay finite.
    """
    log_p = log_sigmoid(zt)
    log_q = log_sigmoid(-zt)
    q_gamma = np.exp(gamma * log_q)
    term = q_gamma * log_p
    dterm = np.exp((gamma + 1.0) * log_q) - gamma * np.exp(log_p) * q_gamma * log_p
    return term, dterm


def focal_batch(z, y, gamma):
    z, y = _check_targets(z, y)
    s = _signs(z, y)
    term, dterm = _focal_terms(s * z, gamma)
    return -term.sum(axis=1), -dterm * s


def ce_batch(z, y):
    """Softmax cross-entropy."""
    z, y = _check_targets(z, y)
    shifted = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(z.shape[0])
    value = lse - shifted[rows, y]
    grad = np.exp(shifted - lse[:, None])
    grad[rows, y] -= 1.0
    return value, grad


# -- class weights ------------------------------------------------------------

def cb_weight(n, beta_cb):
    """Class-balanced weight ``(1 - beta) / (1 - beta^n)``."""
    n = np.asarray(n, dtype=np.float64)
    if beta_cb == 0:
        return np.ones_like(n)[()]
    # -expm1(n log beta) = 1 - beta^n without cancellation near beta = 1
    return ((1.0 - beta_cb) / -np.expm1(n * math.log(beta_cb)))[()]


def mw_weight(n, alpha, c=1.0):
    """Multi-weight ``c * (1 / n)^alpha``."""
    return (c * np.power(1.0 / np.asarray(n, dtype=np.float64), alpha))[()]


def effective_weight(counts, coeff, alpha, beta_eff):
    """``(C*_i / N_i)^beta_eff`` with ``C*_i^alpha = C_i``.

    At ``beta_eff = alpha`` this is ``C_i (1/N_i)^alpha``; at 0 it is 1.
    """
    counts = np.asarray(counts, dtype=np.float64)
    coeff = np.asarray(coeff, dtype=np.float64)
    if not 0.0 <= beta_eff <= alpha + 1e-12:
        raise ParameterError(f"beta_eff {beta_eff} outside [0, alpha={alpha}]")
    if alpha == 0:
        if np.any(coeff != 1.0):
            raise ParameterError("class coefficients other than 1 are undefined at alpha = 0")
        return np.ones_like(counts)
    if beta_eff == 0:
        return np.ones_like(counts)
    return np.exp(beta_eff * (np.log(coeff) / alpha - np.log(counts)))


# -- the weighted, clamped focal loss -----------------------------------------

def mwnl_batch(z, y, stats, cfg, beta_eff=None):
    """Weighted focal loss; class terms with ``p_t <= T`` are frozen at the clamp constant.

    ``beta_eff`` defaults to ``cfg.alpha`` (the static, fully weighted form).
    For ``mwl_focal`` the threshold is 0 and nothing is clamped.
    """
    if cfg.family not in ("mwl_focal", "mwnl"):
        raise ParameterError(f"mwnl_batch does not handle family {cfg.family!r}")
    z, y = _check_targets(z, y)
    if z.shape[1] != stats.num_classes:
        raise ParameterError(f"{z.shape[1]} logits for {stats.num_classes} classes")
    beta_eff = cfg.alpha if beta_eff is None else beta_eff
    w_class = effective_weight(stats.counts, cfg.coefficients(stats.num_classes), cfg.alpha, beta_eff)
    w = w_class[y]

    s = _signs(z, y)
    zt = s * z
    term, dterm = _focal_terms(zt, cfg.gamma)
    t = cfg.threshold
    if t > 0:
        # p_t > T  <=>  z_t > logit(T); comparing logits avoids sigmoid underflow
        # NaN stays live so a diverged logit is not silently frozen
        live = ~(zt <= math.log(t) - math.log1p(-t))
        term = np.where(live, term, cfg.clamp_constant)
        dterm = np.where(live, dterm, 0.0)
    value = -w * term.sum(axis=1)
    grad = -w[:, None] * dterm * s
    return value, grad


def loss_batch(z, y, stats, cfg, beta_eff=None):
    """Dispatch on ``cfg.family``; returns per-sample values ``(B,)`` and grads ``(B, C)``."""
    z, y = _check_targets(z, y)
    if cfg.family in ("mwl_focal", "mwnl"):
        return mwnl_batch(z, y, stats, cfg, beta_eff)
    if z.shape[1] != stats.num_classes:
        raise ParameterError(f"{z.shape[1]} logits for {stats.num_classes} classes")
    counts = np.asarray(stats.counts, dtype=np.float64)
    if cfg.family == "ce":
        return ce_batch(z, y)
    if cfg.family == "ce_rw":
        value, grad = ce_batch(z, y)
        w = 1.0 / counts[y]
    else:  # cb_focal
        value, grad = focal_batch(z, y, cfg.gamma)
        w = cb_weight(counts, cfg.beta_cb)[y]
    return w * value, w[:, None] * grad


def _single(fn, z, y, *args):
    value, grad = fn(np.atleast_2d(z), np.atleast_1d(y), *args)
    return LossOutput(float(value[0]), grad[0])


def focal_loss(z, y, gamma=2.0):
    return _single(focal_batch, z, y, gamma)


def mwnl_loss(z, y, stats, cfg, beta_eff=None):
    return _single(mwnl_batch, z, y, stats, cfg, beta_eff)


def loss_for_family(z, y, stats, cfg, beta_eff=None):
    return _single(loss_batch, z, y, stats, cfg, beta_eff)


# -- batch file format --------------------------------------------------------

def read_logits(fh):
    """Parse rows ``sample_id, y, z_0..z_{C-1}``; a leading header row is skipped.

    Returns ``(ids, y, z)``.
    """
    ids, ys, zs = [], [], []
    width = None
    for lineno, row in enumerate(csv.reader(fh), start=1):
        row = [f.strip() for f in row]
        if not row or not any(row) or row[0].startswith("#"):
            continue
        if lineno == 1 and not _is_int(row[1] if len(row) > 1 else ""):
            continue
        if len(row) < 3:
            raise DataError("expected sample_id, y and at least one logit", line=lineno)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataError(f"expected {width} fields, got {len(row)}", line=lineno)
        try:
            y = int(row[1])
            z = [float(v) for v in row[2:]]
        except ValueError as exc:
            raise DataError(f"malformed number ({exc})", line=lineno) from None
        if not 0 <= y < len(z):
            raise DataError(f"class {y} outside [0, {len(z)})", line=lineno)
        if not all(math.isfinite(v) for v in z):
            raise DataError("non-finite logit", line=lineno)
        ids.append(row[0])
        ys.append(y)
        zs.append(z)
    if not ids:
        raise DataError("no logit rows found")
    return ids, np.array(ys, dtype=np.intp), np.array(zs, dtype=np.float64)


def _is_int(text):
    try:
        int(text)
    except ValueError:
        return False
    return True


def fmt9(v):
    return f"{v:.9g}"


def write_loss_rows(fh, ids, values, grads):
    """Write ``sample_id, value, grad_0..grad_{C-1}`` with 9 significant digits."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["sample_id", "value"] + [f"grad_{i}" for i in range(grads.shape[1])])
    for sid, v, g in zip(ids, values, grads):
        writer.writerow([sid, fmt9(v)] + [fmt9(x) for x in g])
