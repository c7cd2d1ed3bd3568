"""
Training on an imbalanced synthetic set
=======================================

Plain cross-entropy, reweighted cross-entropy and the clamped multi-weight
loss on the same data, a few seeds each. Takes about ten seconds.
"""

import numpy as np

from mwnl import trainer
from mwnl.loss import LossConfig
from mwnl.schedule import ScheduleConfig

counts = [1000, 500, 100, 50, 20]
static = ScheduleConfig(mode="static", alpha=1.1, max_epochs=40)

for family in ("ce", "ce_rw", "mwnl"):
    scores = []
    for seed in range(3):
        ds = trainer.make_synthetic(counts, dim=16, separation=2.5, seed=seed)
        res = trainer.train(ds, trainer.TrainConfig(), LossConfig(family), static, seed=seed)
        scores.append(res.log[-1].val_bacc)
    last = res.log[-1]
    print(f"{family:6s} median BACC {np.median(scores):.3f}  last-seed recalls {np.round(last.val_sens, 2)}")

# the per-epoch log carries beta and lr; with the cls schedule beta ramps up
ds = trainer.make_synthetic(counts, dim=16, separation=2.5, seed=0)
res = trainer.train(ds, trainer.TrainConfig(), LossConfig("mwnl"),
                    ScheduleConfig(mode="cls", e1=2, e2=8, max_epochs=10), seed=0)
for r in res.log:
    print(r.epoch, round(r.beta, 4), r.lr, round(r.train_loss, 5), round(r.val_bacc, 3))
