"""A small from-scratch MLP trainer for the weighted losses and schedules.

The model is ``x -> relu(x W1 + b1) * mask -> (.) W2 + b2`` trained with
Adam on mean-reduced minibatch losses. It stands in for a convolutional
backbone: the losses, schedules and samplers do not care what produced
the logits.
"""

import csv
import math
from dataclasses import dataclass, field, fields
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from . import loss as losses
from . import metrics
from .datasets import FeatureDataset, stratified_indices
from .errors import NumericalError, ParameterError
from .rng import as_generator, substream
from .schedule import cls_beta, lr_at

CHECKPOINT_MAGIC = "mwnl-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class ModelParams:
    w1: np.ndarray  # (input_dim, hidden_dim)
    b1: np.ndarray  # (hidden_dim,)
    w2: np.ndarray  # (hidden_dim, num_classes)
    b2: np.ndarray  # (num_classes,)

    @property
    def names(self):
        return [f.name for f in fields(self)]

    def arrays(self):
        return [getattr(self, n) for n in self.names]

    def copy(self):
        return ModelParams(*(a.copy() for a in self.arrays()))

    def map(self, fn, *others):
        return ModelParams(*(fn(*arrs) for arrs in zip(self.arrays(), *(o.arrays() for o in others))))

    def flat(self):
        return np.concatenate([a.ravel() for a in self.arrays()])

    @classmethod
    def from_flat(cls, flat, like):
        out, i = [], 0
        for a in like.arrays():
            out.append(flat[i:i + a.size].reshape(a.shape).copy())
            i += a.size
        return cls(*out)


def init_params(input_dim, hidden_dim, num_classes, rng):
    """Uniform in +-1/sqrt(fan_in) for weights and biases alike."""
    rng = as_generator(rng)
    k1 = 1.0 / math.sqrt(input_dim)
    k2 = 1.0 / math.sqrt(hidden_dim)
    return ModelParams(
        w1=rng.uniform(-k1, k1, (input_dim, hidden_dim)),
        b1=rng.uniform(-k1, k1, hidden_dim),
        w2=rng.uniform(-k2, k2, (hidden_dim, num_classes)),
        b2=rng.uniform(-k2, k2, num_classes),
    )


# -- regularizer masks --------------------------------------------------------

@dataclass(frozen=True)
class RegularizerConfig:
    kind: str = "dropout"  # dropout | dropblock | none
    drop_prob: float = 0.1
    block_size: int = 5

    def __post_init__(self):
        if self.kind not in ("dropout", "dropblock", "none"):
            raise ParameterError(f"unknown regularizer {self.kind!r}")
        if not 0.0 <= self.drop_prob < 1.0:
            raise ParameterError("drop_prob must lie in [0, 1)")
        if self.block_size < 1:
            raise ParameterError("block_size must be >= 1")


def dropout_mask(shape, p, rng):
    """Bernoulli keep-mask scaled by ``1/(1-p)``."""
    if p == 0:
        return np.ones(shape)
    keep = as_generator(rng).random(shape) >= p
    return keep / (1.0 - p)


def _coverage(n, s):
    # how many seed positions along one axis put cell i inside their block
    lo = np.arange(n) - (s - 1 - s // 2)
    hi = np.arange(n) + s // 2
    return np.minimum(hi, n - 1) - np.maximum(lo, 0) + 1


@lru_cache(maxsize=64)
def dropblock_seed_rate(h, w, p, s):
    """Seed probability making the expected zeroed fraction exactly ``p``.

    Seeds may sit anywhere and blocks are clipped at the border, so edge
    cells are covered by fewer seeds; the rate is solved numerically.
    """
    if p == 0:
        return 0.0
    k = np.outer(_coverage(h, s), _coverage(w, s)).ravel()
    return brentq(lambda g: np.mean(1.0 - (1.0 - g) ** k) - p, 0.0, 1.0, xtol=1e-14)


def dropblock_mask(h, w, p, s, rng):
    """An ``h x w`` mask with zeroed ``s x s`` blocks; survivors scaled by total/kept."""
    if s > min(h, w):
        raise ParameterError(f"block size {s} exceeds the {h}x{w} map")
    if not 0.0 <= p < 1.0:
        raise ParameterError("p must lie in [0, 1)")
    if p == 0:
        return np.ones((h, w))
    seeds = as_generator(rng).random((h, w)) < dropblock_seed_rate(h, w, p, s)
    dropped = np.zeros((h, w), dtype=bool)
    off = s // 2
    for dy in range(s):
        for dx in range(s):
            # block of a seed at (r, c) spans rows r-off .. r-off+s-1
            sy, sx = dy - off, dx - off
            ys, yd = (slice(0, h - sy), slice(sy, h)) if sy >= 0 else (slice(-sy, h), slice(0, h + sy))
            xs, xd = (slice(0, w - sx), slice(sx, w)) if sx >= 0 else (slice(-sx, w), slice(0, w + sx))
            dropped[yd, xd] |= seeds[ys, xs]
    keep = ~dropped
    kept = keep.sum()
    if kept == 0:
        return np.zeros((h, w))
    return keep * (h * w / kept)


def hidden_mask(batch, hidden_dim, reg, rng):
    if reg.kind == "none" or reg.drop_prob == 0:
        return None
    if reg.kind == "dropout":
        return dropout_mask((batch, hidden_dim), reg.drop_prob, rng)
    side = math.isqrt(hidden_dim)
    if side * side != hidden_dim:
        raise ParameterError(f"dropblock needs a square hidden size, got {hidden_dim}")
    return np.stack([dropblock_mask(side, side, reg.drop_prob, reg.block_size, rng).ravel()
                     for _ in range(batch)])


# -- forward / backward -------------------------------------------------------

def forward(params, x, mask=None):
    """Logits for a batch ``x (B, input_dim)``; ``mask (B, hidden)`` is None at eval time.

    Returns ``(z, cache)``; ``cache`` feeds :func:`backward`.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != params.w1.shape[0]:
        raise ParameterError(f"input has {x.shape[1]} features, model expects {params.w1.shape[0]}")
    pre = x @ params.w1 + params.b1
    h = np.maximum(pre, 0.0)
    if mask is not None:
        h = h * mask
    z = h @ params.w2 + params.b2
    return z, (x, pre, h, mask)


def backward(params, cache, dz):
    """Gradients of ``sum_b dz[b] . z[b]`` with respect to every parameter."""
    x, pre, h, mask = cache
    dh = dz @ params.w2.T
    if mask is not None:
        dh = dh * mask
    dpre = dh * (pre > 0)
    return ModelParams(w1=x.T @ dpre, b1=dpre.sum(axis=0), w2=h.T @ dz, b2=dz.sum(axis=0))


def predict_proba(params, x):
    z, _ = forward(params, x)
    return losses.sigmoid(z)


# -- Adam ---------------------------------------------------------------------

@dataclass
class AdamState:
    m: ModelParams
    v: ModelParams
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params):
        zero = params.map(np.zeros_like)
        return cls(zero, zero.copy())


def adam_step(state, params, grads, lr):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    b1, b2 = state.beta1, state.beta2
    t = state.step + 1
    m = state.m.map(lambda m, g: b1 * m + (1 - b1) * g, grads)
    v = state.v.map(lambda v, g: b2 * v + (1 - b2) * g * g, grads)
    c1, c2 = 1 - b1 ** t, 1 - b2 ** t
    new = params.map(lambda p, m, v: p - lr * (m / c1) / (np.sqrt(v / c2) + state.eps), m, v)
    return new, AdamState(m, v, t, b1, b2, state.eps)


# -- data ---------------------------------------------------------------------

def make_synthetic(counts, dim, separation, noise=0.0, seed=0):
    """Gaussian blobs with unit covariance, one per class.

    Class means sit on a scaled simplex so every pair is ``separation``
    apart (``dim`` must be at least the number of classes). Exactly
    ``round(noise * n)`` samples get a label drawn uniformly from the
    wrong classes; the untouched labels are kept in ``y_clean``.
    """
    counts = [int(c) for c in counts]
    c = len(counts)
    if any(n < 1 for n in counts):
        raise ParameterError("class counts must be positive")
    if dim < c:
        raise ParameterError(f"dim {dim} < number of classes {c}")
    if not 0.0 <= noise < 0.5:
        raise ParameterError("noise must lie in [0, 0.5)")
    rng = substream(seed, "synth")
    means = np.zeros((c, dim))
    means[np.arange(c), np.arange(c)] = separation / math.sqrt(2.0)
    y_clean = np.repeat(np.arange(c), counts)
    x = means[y_clean] + rng.standard_normal((y_clean.size, dim))
    y = y_clean.copy()
    n_flip = int(math.floor(noise * y.size + 0.5))
    if n_flip and c > 1:
        flip = rng.choice(y.size, n_flip, replace=False)
        shift = rng.integers(1, c, n_flip)
        y[flip] = (y[flip] + shift) % c
    return FeatureDataset(x, y, c, y_clean=y_clean)


def oversample_indices(labels, rng):
    """One epoch where every class appears ``max_i N_i`` times.

    The largest classes contribute a permutation of themselves; smaller
    ones are drawn with replacement. The result is shuffled.
    """
    labels = np.asarray(labels, dtype=np.intp)
    rng = as_generator(rng)
    classes, counts = np.unique(labels, return_counts=True)
    target = counts.max()
    parts = []
    for c, n in zip(classes, counts):
        idx = np.flatnonzero(labels == c)
        parts.append(rng.permutation(idx) if n == target else rng.choice(idx, target, replace=True))
    return rng.permutation(np.concatenate(parts))


# -- training loop ------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    hidden_dim: int = 64
    batch_size: int = 128
    val_fraction: float = 0.2
    sampler: str = "plain"  # plain | oversample
    regularizer: RegularizerConfig = field(default_factory=RegularizerConfig)

    def __post_init__(self):
        if self.hidden_dim < 1 or self.batch_size < 1:
            raise ParameterError("hidden_dim and batch_size must be >= 1")
        if self.sampler not in ("plain", "oversample"):
            raise ParameterError(f"unknown sampler {self.sampler!r}")
        if not 0.0 < self.val_fraction < 1.0:
            raise ParameterError("val_fraction must lie in (0, 1)")


@dataclass
class EpochRecord:
    epoch: int
    beta: float
    lr: float
    train_loss: float
    val_bacc: float
    val_sens: tuple


@dataclass
class TrainResult:
    params: ModelParams
    log: list
    train_idx: np.ndarray
    val_idx: np.ndarray


def evaluate(params, ds):
    """Validation metrics on ``ds``, scored against clean labels when known."""
    y = ds.y if ds.y_clean is None else ds.y_clean
    scores = predict_proba(params, ds.x)
    cm = metrics.confusion_matrix(y, metrics.predicted_class(scores), ds.num_classes)
    rep = metrics.class_report(cm)
    try:
        bacc = metrics.balanced_accuracy(cm)
    except metrics.UndefinedClassError:
        bacc = float(np.nanmean(rep.sensitivity))
    return bacc, tuple(float(s) for s in rep.sensitivity)


def train(dataset, train_cfg, loss_cfg, sched_cfg, seed=0, augment=None):
    """Train on a stratified split of ``dataset``; returns params and per-epoch log.

    Each epoch sets the weighting exponent from the schedule and the
    learning rate from the step decay, shuffles (or oversamples) the
    training split, and runs Adam over mean-reduced minibatches.
    ``augment(x_batch, rng)`` optionally perturbs feature batches.

    Raises:
        NumericalError: a minibatch loss became non-finite.
    """
    if len(dataset) == 0:
        raise ParameterError("dataset is empty")
    if loss_cfg.family in ("mwl_focal", "mwnl") and not math.isclose(sched_cfg.alpha, loss_cfg.alpha):
        raise ParameterError("schedule alpha and loss alpha differ")
    train_idx, val_idx = stratified_indices(dataset.y, 1.0 - train_cfg.val_fraction,
                                            substream(seed, "split"))
    tr = dataset.subset(train_idx)
    va = dataset.subset(val_idx)
    stats = tr.stats()
    params = init_params(dataset.x.shape[1], train_cfg.hidden_dim, dataset.num_classes,
                         substream(seed, "init"))
    opt = AdamState.zeros_like(params)
    log = []
    for epoch in range(sched_cfg.max_epochs):
        beta = cls_beta(epoch, sched_cfg)
        lr = lr_at(epoch, sched_cfg)
        shuffle_rng = substream(seed, "shuffle", epoch)
        if train_cfg.sampler == "oversample":
            order = oversample_indices(tr.y, substream(seed, "sampler", epoch))
        else:
            order = shuffle_rng.permutation(len(tr))
        drop_rng = substream(seed, "dropout", epoch)
        aug_rng = substream(seed, "policy", epoch)
        total, seen = 0.0, 0
        for start in range(0, order.size, train_cfg.batch_size):
            idx = order[start:start + train_cfg.batch_size]
            xb = tr.x[idx]
            if augment is not None:
                xb = augment(xb, aug_rng)
            mask = hidden_mask(idx.size, train_cfg.hidden_dim, train_cfg.regularizer, drop_rng)
            z, cache = forward(params, xb, mask)
            values, dz = losses.loss_batch(z, tr.y[idx], stats, loss_cfg, beta)
            batch_loss = values.mean()
            if not np.isfinite(batch_loss):
                raise NumericalError(f"epoch {epoch}: non-finite training loss at batch offset {start}")
            grads = backward(params, cache, dz / idx.size)
            params, opt = adam_step(opt, params, grads, lr)
            total += values.sum()
            seen += idx.size
        bacc, sens = evaluate(params, va)
        log.append(EpochRecord(epoch, beta, lr, total / seen, bacc, sens))
    return TrainResult(params, log, train_idx, val_idx)


# -- files --------------------------------------------------------------------

def write_epoch_log(fh, log, num_classes):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["epoch", "beta", "lr", "train_loss", "val_bacc"]
                    + [f"val_sens_{i}" for i in range(num_classes)])
    for r in log:
        writer.writerow([r.epoch, repr(r.beta), repr(r.lr), repr(float(r.train_loss)),
                         repr(float(r.val_bacc))] + [repr(s) for s in r.val_sens])


def save_checkpoint(fh, params):
    """Text dump: a version line, then per array a ``name d0 [d1]`` line and its values."""
    fh.write(f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n")
    for name, arr in zip(params.names, params.arrays()):
        fh.write(" ".join([name] + [str(d) for d in arr.shape]) + "\n")
        fh.write(" ".join(repr(float(v)) for v in arr.ravel()) + "\n")


def load_checkpoint(fh):
    head = fh.readline().split()
    if len(head) != 2 or head[0] != CHECKPOINT_MAGIC:
        raise ValueError("not a checkpoint file")
    if int(head[1]) != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {head[1]}")
    arrays = {}
    for _ in range(4):
        name, *shape = fh.readline().split()
        values = np.array([float(v) for v in fh.readline().split()])
        arrays[name] = values.reshape([int(d) for d in shape])
    return ModelParams(**arrays)
