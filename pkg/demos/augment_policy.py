"""
Modified RandAugment on a synthetic image
=========================================

Writes a few augmented crops and their replayable plan log to a temp dir.
"""

import io
import os
import tempfile

import numpy as np

from mwnl import imaging, policy

rng = np.random.default_rng(0)
yy, xx = np.mgrid[0:256, 0:256]
img = np.stack([xx, yy, (xx + yy) // 2], axis=-1).astype(np.uint8)
img[96:160, 96:160] = (200, 40, 40)

cfg = policy.PolicyConfig()  # N=2, P=0.7, one color draw then one shape draw
print(cfg.to_json())

out_dir = tempfile.mkdtemp(prefix="mwnl_demo_")
records = []
for i in range(6):
    out, plan = policy.augment(img, cfg, seed=7, index=i, dataset=[img])
    imaging.write_image(os.path.join(out_dir, f"aug_{i}.png"), out)
    records.append((f"aug_{i}", plan))
    print(i, [(d.kind.label, d.executed, d.magnitude) for d in plan.draws], plan.crop_offset)

log = io.StringIO()
policy.write_plan_log(log, records, cfg.n)
with open(os.path.join(out_dir, "plans.csv"), "w") as fh:
    fh.write(log.getvalue())

# replay the first plan from the log and compare
_, plan0 = policy.read_plan_log(io.StringIO(log.getvalue()))[0]
again = policy.execute_plan(img, plan0, [img], cfg.crop_size)
print("replay identical:", np.array_equal(again, imaging.read_image(os.path.join(out_dir, "aug_0.png"))))

# fixed strength levels: cm pins the magnitude, rm draws below it
for level in (2, 5, 10):
    print(level, policy.level_to_magnitude("rotate", level, "cm", rng),
          policy.level_to_magnitude("rotate", level, "rm", rng))
print("outputs in", out_dir)
