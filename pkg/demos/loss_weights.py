"""
Class weights and the clamped focal loss
========================================

"""

import numpy as np

from mwnl import loss
from mwnl.loss import ClassStats, LossConfig

counts = (1000, 500, 100, 50, 20)
stats = ClassStats(counts)

# per-class weights: 1/N, class-balanced, and the multi-weight (1/N)^alpha
for n in counts:
    print(f"N={n:5d}  1/N={1 / n:.5f}  cb(0.999)={loss.cb_weight(n, 0.999):.5f}"
          f"  mw(1.1)={loss.mw_weight(n, 1.1):.5f}")

# a sample whose target logit is very negative: every class term is clamped
cfg = LossConfig("mwnl", alpha=1.1, gamma=2.0, clamp_t=0.1)
out = loss.mwnl_loss([-6.0, 5.0, 4.0, -1.0, -2.0], 0, stats, cfg)
print("clamped value", out.value, "grad", out.grad)
print("clamp constant", cfg.clamp_constant)

# the same logits without clamping keep pulling on the outlier
free = loss.mwnl_loss([-6.0, 5.0, 4.0, -1.0, -2.0], 0, stats, LossConfig("mwl_focal"))
print("unclamped grad", np.round(free.grad, 6))

# beta_eff slides the weighting from none (0) to full (alpha)
z = np.array([0.3, -0.2, 0.1, -1.0, 0.4])
for beta in (0.0, 0.55, 1.1):
    print(f"beta={beta:4.2f}", loss.mwnl_loss(z, 4, stats, cfg, beta_eff=beta).value)
