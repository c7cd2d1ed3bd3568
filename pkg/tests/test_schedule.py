import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mwnl.errors import ParameterError
from mwnl.schedule import ScheduleConfig, cls_beta, lr_at, parse_mode, write_schedule

DEFAULT = ScheduleConfig(alpha=1.1)


def test_cls_boundaries():
    assert cls_beta(20, DEFAULT) == 0.0
    assert cls_beta(60, DEFAULT) == 1.1
    assert cls_beta(40, DEFAULT) == 0.275
    assert cls_beta(0, DEFAULT) == 0.0
    assert cls_beta(69, DEFAULT) == 1.1


def test_lr_steps():
    assert lr_at(0, DEFAULT) == 0.001
    assert lr_at(29, DEFAULT) == 0.001
    assert lr_at(30, DEFAULT) == 0.0001
    assert lr_at(45, DEFAULT) == 1e-5


def test_static_and_drw():
    static = ScheduleConfig(mode="static", alpha=0.7)
    assert {cls_beta(e, static) for e in range(80)} == {0.7}
    drw = ScheduleConfig(mode="drw", alpha=1.1)
    assert drw.e_switch == 20
    assert [cls_beta(e, drw) for e in (0, 19, 20, 50)] == [0.0, 0.0, 1.1, 1.1]


def test_cls_nondecreasing_and_continuous():
    betas = [cls_beta(e, DEFAULT) for e in range(100)]
    assert betas == sorted(betas)
    assert all(0 <= b <= 1.1 for b in betas)
    eps = 1e-9
    frac = lambda e: ((e - 20) / 40) ** 2 * 1.1  # noqa: E731
    assert abs(frac(20 + eps) - cls_beta(20, DEFAULT)) < 1e-12
    assert abs(frac(60 - eps) - cls_beta(60, DEFAULT)) < 1e-9


@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.integers(0, 100))
def test_cls_shape_independent_of_alpha(a1, a2, epoch):
    c1, c2 = ScheduleConfig(alpha=a1), ScheduleConfig(alpha=a2)
    assert cls_beta(epoch, c1) / a1 == pytest.approx(cls_beta(epoch, c2) / a2, rel=1e-12, abs=1e-15)


def test_lr_nonincreasing():
    lrs = [lr_at(e, DEFAULT) for e in range(120)]
    assert all(b <= a for a, b in zip(lrs, lrs[1:]))


@pytest.mark.parametrize("e_switch", [1, 5, 20, 33])
def test_drw_is_limit_of_cls(e_switch):
    drw = ScheduleConfig(mode="drw", e_switch=e_switch, alpha=1.3)
    cls = ScheduleConfig(mode="cls", e1=e_switch - 1, e2=e_switch, alpha=1.3)
    for e in range(0, 60):
        assert cls_beta(e, cls) == cls_beta(e, drw)


def test_invalid_configs():
    with pytest.raises(ParameterError):
        ScheduleConfig(e1=60, e2=20)
    with pytest.raises(ParameterError):
        ScheduleConfig(lr_decay=0.0)
    with pytest.raises(ParameterError):
        cls_beta(-1, DEFAULT)


def test_parse_mode():
    assert parse_mode("drw(25)") == ("drw", 25)
    assert parse_mode("cls") == ("cls", None)


def test_schedule_dump():
    buf = io.StringIO()
    write_schedule(buf, DEFAULT)
    rows = [line.split(",") for line in buf.getvalue().splitlines()]
    assert rows[0] == ["epoch", "beta", "lr"]
    assert len(rows) == 1 + 71
    by_epoch = {int(r[0]): (float(r[1]), float(r[2])) for r in rows[1:]}
    assert by_epoch[20] == (0.0, 0.001)
    assert by_epoch[40] == (0.275, 1e-5)
    assert by_epoch[60][0] == 1.1
    betas = np.array([v[0] for _, v in sorted(by_epoch.items())])
    assert np.all(np.diff(betas) >= 0)
