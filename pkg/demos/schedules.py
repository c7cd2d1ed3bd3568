"""
Cumulative learning schedule versus a deferred switch
=====================================================

"""

from mwnl.schedule import ScheduleConfig, cls_beta, lr_at

cls = ScheduleConfig(mode="cls", e1=20, e2=60, alpha=1.1)
drw = ScheduleConfig(mode="drw", alpha=1.1)  # switches at e1

print("epoch   cls    drw     lr")
for epoch in range(0, 71, 5):
    print(f"{epoch:5d}  {cls_beta(epoch, cls):.3f}  {cls_beta(epoch, drw):.3f}  {lr_at(epoch, cls):.0e}")

# beta/alpha only depends on where the epoch sits between e1 and e2
strong = ScheduleConfig(alpha=3.0)
print(cls_beta(40, strong) / 3.0, cls_beta(40, cls) / 1.1)
