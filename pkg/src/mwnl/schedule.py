"""Epoch schedules for the weighting exponent and the learning rate.

Epochs are 0-indexed integers and values are fixed for a whole epoch.
"""

import csv
import re
from dataclasses import dataclass

from .errors import ParameterError

MODES = ("static", "drw", "cls")


@dataclass(frozen=True)
class ScheduleConfig:
    mode: str = "cls"
    e1: int = 20
    e2: int = 60
    e_switch: int = None  # drw only; defaults to e1
    alpha: float = 1.1
    lr_start: float = 0.001
    lr_decay: float = 0.1
    lr_milestone_start: int = 30
    lr_milestone_step: int = 10
    max_epochs: int = 70

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"unknown schedule mode {self.mode!r}; expected one of {MODES}")
        if not self.e1 < self.e2:
            raise ParameterError("e1 must be < e2")
        if not 0 < self.lr_decay <= 1:
            raise ParameterError("lr_decay must lie in (0, 1]")
        if self.lr_start <= 0:
            raise ParameterError("lr_start must be > 0")
        if self.lr_milestone_step < 1:
            raise ParameterError("lr_milestone_step must be >= 1")
        if self.max_epochs < 0:
            raise ParameterError("max_epochs must be >= 0")
        if self.alpha < 0:
            raise ParameterError("alpha must be >= 0")
        if self.e_switch is None:
            object.__setattr__(self, "e_switch", self.e1)


@dataclass(frozen=True)
class ScheduleState:
    epoch: int
    beta_eff: float
    lr: float


def parse_mode(text):
    """``"cls"``, ``"static"``, ``"drw"`` or ``"drw(25)"`` -> (mode, e_switch or None)."""
    text = text.strip().lower()
    m = re.fullmatch(r"drw\((\d+)\)", text)
    if m:
        return "drw", int(m.group(1))
    if text not in MODES:
        raise ParameterError(f"unknown schedule mode {text!r}")
    return text, None


def cls_beta(epoch, cfg):
    """Weighting exponent at ``epoch``.

    ``cls`` ramps quadratically from 0 at ``e1`` to ``alpha`` at ``e2``;
    ``drw`` steps from 0 to ``alpha`` at ``e_switch``; ``static`` is
    always ``alpha``.
    """
    if epoch < 0:
        raise ParameterError("epoch must be >= 0")
    if cfg.mode == "static":
        return cfg.alpha
    if cfg.mode == "drw":
        return cfg.alpha if epoch >= cfg.e_switch else 0.0
    if epoch <= cfg.e1:
        return 0.0
    if epoch >= cfg.e2:
        return cfg.alpha
    frac = (epoch - cfg.e1) / (cfg.e2 - cfg.e1)
    return frac * frac * cfg.alpha


def lr_at(epoch, cfg):
    """Step decay: ``lr_start * lr_decay^k`` with one decay per milestone passed."""
    if epoch < 0:
        raise ParameterError("epoch must be >= 0")
    if epoch < cfg.lr_milestone_start:
        return cfg.lr_start
    k = (epoch - cfg.lr_milestone_start) // cfg.lr_milestone_step + 1
    # dividing by (1/decay)^k keeps decimal rates exact: 0.001 / 10**2 == 1e-05
    return cfg.lr_start / (1.0 / cfg.lr_decay) ** k


def state_at(epoch, cfg):
    return ScheduleState(epoch, cls_beta(epoch, cfg), lr_at(epoch, cfg))


def write_schedule(fh, cfg):
    """Dump ``epoch, beta, lr`` rows for epochs ``0..max_epochs`` inclusive."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["epoch", "beta", "lr"])
    for epoch in range(cfg.max_epochs + 1):
        writer.writerow([epoch, repr(cls_beta(epoch, cfg)), repr(lr_at(epoch, cfg))])
