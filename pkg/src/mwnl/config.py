"""Flat ``key = value`` run configuration shared by every command.

Lines starting with ``#`` are comments. Unknown keys are rejected. Values
given on the command line override the file.
"""

import os
from dataclasses import dataclass

from .errors import ParameterError
from .loss import LossConfig
from .policy import PolicyConfig, parse_magnitude_mode
from .schedule import ScheduleConfig, parse_mode
from .trainer import RegularizerConfig, TrainConfig

ENV_VAR = "MWNL_CONFIG"

# key -> (type, default, help)
KEYS = {
    "seed": (int, 0, "master seed; every random stream derives from it"),
    # augmentation policy
    "n": (int, 2, "transform draws per image"),
    "p_exec": (float, 0.7, "probability each drawn transform is executed"),
    "order": (str, "color,shape", "subset per slot: color, shape or any"),
    "magnitude_mode": (str, "full_random", "full_random, cm(L) or rm(L)"),
    "with_replacement": (bool, True, "allow the same kind twice when slots share a subset"),
    "crop_size": (int, 224, "square crop side in pixels"),
    "partner_source": (str, "dataset", "sample_pairing partners from the whole 'dataset' or the 'batch'"),
    "augment_batch": (int, 32, "images per batch when partner_source = batch"),
    "jpeg_quality": (int, 95, "quality for JPEG output"),
    # loss
    "family": (str, "mwnl", "ce, ce_rw, cb_focal, mwl_focal or mwnl"),
    "alpha": (float, 1.1, "class weighting exponent"),
    "gamma": (float, 2.0, "focal exponent"),
    "clamp_t": (float, 0.1, "outlier threshold on p_t (mwnl)"),
    "class_coeff": (str, "", "comma-separated per-class coefficients; empty = all 1.0"),
    "beta_cb": (float, 0.999, "class-balanced beta (cb_focal)"),
    "class_counts": (str, "", "comma-separated class counts for the loss command; empty = all 1"),
    "beta_eff": (str, "", "weighting exponent for the loss command; empty = alpha"),
    # schedule
    "schedule": (str, "cls", "static, drw, drw(E) or cls"),
    "e1": (int, 20, "epoch where the cls ramp starts"),
    "e2": (int, 60, "epoch where the cls ramp reaches alpha"),
    "lr_start": (float, 0.001, "initial learning rate"),
    "lr_decay": (float, 0.1, "learning-rate decay factor"),
    "lr_milestone_start": (int, 30, "first decay epoch"),
    "lr_milestone_step": (int, 10, "epochs between decays"),
    "max_epochs": (int, 70, "number of training epochs"),
    # regularizer
    "regularizer": (str, "dropout", "dropout, dropblock or none"),
    "drop_prob": (float, 0.1, "drop rate p"),
    "block_size": (int, 5, "dropblock block side s"),
    # trainer
    "hidden_dim": (int, 64, "hidden units"),
    "batch_size": (int, 128, "minibatch size"),
    "input_dim": (int, 16, "feature dimension of synthetic data"),
    "val_fraction": (float, 0.2, "stratified validation share"),
    "sampler": (str, "plain", "plain or oversample"),
    # data
    "features": (str, "", "feature CSV (sample_id,label,f_0..); empty = synthetic data"),
    "synth_counts": (str, "1000,500,100,50,20", "synthetic class counts"),
    "synth_separation": (float, 2.5, "distance between synthetic class means"),
    "synth_noise": (float, 0.0, "fraction of synthetic labels flipped"),
    # evaluation
    "k_crops": (int, 16, "crops per test image"),
    "crop_average": (str, "probs", "average crop 'probs' as given, or 'logits' then sigmoid"),
}


def _convert(key, raw):
    typ = KEYS[key][0]
    if isinstance(raw, typ) and not (typ is int and isinstance(raw, bool)):
        return raw
    text = str(raw).strip()
    try:
        if typ is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return typ(text)
    except ValueError:
        raise ParameterError(f"bad value {text!r} for {key} ({typ.__name__} expected)") from None


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


@dataclass(frozen=True)
class RunConfig:
    values: dict

    @classmethod
    def build(cls, overrides=None):
        values = {k: spec[1] for k, spec in KEYS.items()}
        for key, raw in (overrides or {}).items():
            if key not in KEYS:
                raise ParameterError(f"unknown config key {key!r}")
            values[key] = _convert(key, raw)
        return cls(values)

    def __getattr__(self, key):
        try:
            return self.values[key]
        except KeyError:
            raise AttributeError(key) from None

    # -- typed views ----------------------------------------------------------

    def policy(self):
        mode, level = parse_magnitude_mode(self.magnitude_mode)
        order = tuple(s.strip() for s in self.order.split(",") if s.strip())
        return PolicyConfig(n=self.n, p_exec=self.p_exec, order=order, magnitude_mode=mode,
                            level=level, crop_size=self.crop_size,
                            with_replacement=self.with_replacement)

    def loss(self):
        coeff = _floats(self.class_coeff) or None
        family = self.family
        if family == "mwnl" and self.clamp_t == 0:
            family = "mwl_focal"  # T=0 clamps nothing
        return LossConfig(family=family, alpha=self.alpha, gamma=self.gamma,
                          clamp_t=self.clamp_t, class_coeff=coeff, beta_cb=self.beta_cb)

    def schedule(self):
        mode, e_switch = parse_mode(self.values["schedule"])
        return ScheduleConfig(mode=mode, e1=self.e1, e2=self.e2, e_switch=e_switch,
                              alpha=self.alpha, lr_start=self.lr_start, lr_decay=self.lr_decay,
                              lr_milestone_start=self.lr_milestone_start,
                              lr_milestone_step=self.lr_milestone_step, max_epochs=self.max_epochs)

    def train(self):
        reg = RegularizerConfig(self.regularizer, self.drop_prob, self.block_size)
        return TrainConfig(hidden_dim=self.hidden_dim, batch_size=self.batch_size,
                           val_fraction=self.val_fraction, sampler=self.sampler, regularizer=reg)

    def synth_counts_list(self):
        return [int(v) for v in _floats(self.synth_counts)]


def parse_config_text(text):
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"config line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ParameterError(f"config line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def load_config(path=None, overrides=None):
    """File (or ``$MWNL_CONFIG``) values, then ``overrides`` on top."""
    path = path or os.environ.get(ENV_VAR) or None
    values = {}
    if path:
        try:
            with open(path) as fh:
                values = parse_config_text(fh.read())
        except OSError as exc:
            raise ParameterError(f"cannot read config {path}: {exc.strerror}") from None
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig.build(values)


def dump_config(cfg):
    return "".join(f"{k} = {_fmt(cfg.values[k])}\n" for k in KEYS)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)
