"""
Balanced accuracy, AUC and 16-crop averaging
============================================

"""

import numpy as np

from mwnl import imaging, metrics

cm = np.array([[8, 2], [3, 7]])
print("bacc", metrics.balanced_accuracy(cm))
rep = metrics.class_report(cm)
print("sensitivity", rep.sensitivity, "specificity", rep.specificity)

# ties count half in the rank statistic
print(metrics.binary_auc([1, 1, 0, 0], [0.9, 0.4, 0.6, 0.1]))
print(metrics.binary_auc([1, 0, 1, 0], [0.5, 0.5, 0.5, 0.5]))

# a 448 image gives a 4x4 grid of 224 crops
print(imaging.grid_origins(448, 224, 4))
img = np.random.default_rng(0).integers(0, 256, (448, 448, 3), dtype=np.uint8)
crops = imaging.multi_crop_grid(img, 224, 16)
print(len(crops), crops[0].shape)

# averaged crop scores feed the report
rng = np.random.default_rng(1)
y = rng.integers(0, 3, 50)
crop_scores = rng.random((50, 16, 3)) + 0.08 * np.eye(3)[y][:, None, :]
scores = np.array([metrics.aggregate_crops(s) for s in crop_scores])
print(metrics.format_report(metrics.report(y, scores)), end="")
