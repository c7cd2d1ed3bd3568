import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mwnl import loss
from mwnl.errors import ParameterError
from mwnl.loss import ClassStats, LossConfig

# Reference values below were computed with mpmath at 40 digits.
SIG2 = 0.8807970779778824
SIG1 = 0.7310585786300049
FOCAL_2_M1 = 0.024461620343707707
CB_100_099 = 0.015773675300856054
MW_100_11 = 0.006309573444801932
MW_50_11_C2 = 0.027049733512249657
CLAMP_01_G2 = -1.865093925325177
MWNL_EXAMPLE = 0.17328711108501425


def test_transformed_probs_values():
    np.testing.assert_allclose(loss.transformed_probs([0.0, 0.0], 0), [0.5, 0.5])
    np.testing.assert_allclose(loss.transformed_probs([2.0, -1.0], 0), [SIG2, SIG1], rtol=1e-15)


def test_transformed_probs_permutes_with_non_targets():
    z = np.array([0.3, -1.2, 2.5, 0.7])
    perm = [0, 3, 1, 2]
    np.testing.assert_array_equal(loss.transformed_probs(z[perm], 0), loss.transformed_probs(z, 0)[perm])


def test_transformed_probs_rejects_bad_target():
    with pytest.raises(ParameterError):
        loss.transformed_probs([0.0, 1.0], 2)


def test_focal_loss_examples():
    assert loss.focal_loss([0.0, 0.0], 0, 0.0).value == pytest.approx(2 * math.log(2), rel=1e-15)
    assert loss.focal_loss([2.0, -1.0], 0, 2.0).value == pytest.approx(FOCAL_2_M1, rel=1e-13)
    assert loss.focal_loss([30.0, -30.0], 0, 2.0).value < 1e-10


def test_focal_saturated_logits_stay_finite():
    out = loss.focal_loss([800.0, 900.0, -700.0], 0, 2.0)
    assert np.isfinite(out.value) and np.all(np.isfinite(out.grad))


def test_cb_weight():
    assert loss.cb_weight(57, 0.0) == 1.0
    assert loss.cb_weight(1, 0.7) == pytest.approx(1.0, rel=1e-15)
    assert loss.cb_weight(100, 0.99) == pytest.approx(CB_100_099, rel=1e-12)


def test_mw_weight():
    assert loss.mw_weight(123, 0.0) == 1.0
    assert loss.mw_weight(100, 1.1) == pytest.approx(MW_100_11, rel=1e-13)
    assert loss.mw_weight(50, 1.1, 2.0) == pytest.approx(MW_50_11_C2, rel=1e-13)


@given(st.integers(2, 10_000), st.floats(1.0001, 4.0))
def test_mw_weight_extends_below_inverse_count(n, alpha):
    assert loss.mw_weight(n, alpha) < 1.0 / n


def test_clamp_constant():
    cfg = LossConfig("mwnl", clamp_t=0.1, gamma=2.0)
    assert cfg.clamp_constant == pytest.approx(0.81 * math.log(0.1), abs=1e-15)
    assert cfg.clamp_constant == pytest.approx(CLAMP_01_G2, abs=1e-14)


def test_clamp_branch_matches_live_branch_at_threshold():
    t = 0.1
    logit_t = math.log(t / (1 - t))
    term, _ = loss._focal_terms(np.array([logit_t]), 2.0)
    assert term[0] == pytest.approx(0.81 * math.log(0.1), abs=1e-14)


def test_mwnl_example_value():
    stats = ClassStats((1, 1, 1))
    out = loss.mwnl_loss([5.0, -6.0, 0.0], 0, stats, LossConfig("mwnl", alpha=1.1), beta_eff=1.1)
    assert out.value == pytest.approx(MWNL_EXAMPLE, rel=1e-13)


def test_mwl_focal_is_unclamped_mwnl():
    rng = np.random.default_rng(3)
    stats = ClassStats((40, 7, 300, 12))
    z = rng.normal(0, 0.5, (50, 4))  # every p_t well above 0.1
    y = rng.integers(0, 4, 50)
    assert np.all(loss.transformed_probs(z, y) > 0.1)
    a = loss.loss_batch(z, y, stats, LossConfig("mwl_focal"))
    b = loss.loss_batch(z, y, stats, LossConfig("mwnl", clamp_t=0.1))
    np.testing.assert_allclose(a[0], b[0], rtol=1e-15)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-15)


def test_static_weight_equals_mw_weight():
    stats = ClassStats((50, 200))
    cfg = LossConfig("mwl_focal", alpha=1.1, class_coeff=(2.0, 1.0))
    z = np.array([0.4, -0.2])
    base = loss.focal_loss(z, 0, 2.0).value
    assert loss.mwnl_loss(z, 0, stats, cfg).value == pytest.approx(loss.mw_weight(50, 1.1, 2.0) * base, rel=1e-12)
    assert loss.mwnl_loss(z, 0, stats, cfg, beta_eff=0.0).value == pytest.approx(base, rel=1e-15)


def test_alpha_zero_with_coefficients_is_rejected():
    cfg = LossConfig("mwl_focal", alpha=0.0, class_coeff=(2.0, 1.0))
    with pytest.raises(ParameterError):
        loss.mwnl_loss([0.0, 0.0], 0, ClassStats((3, 4)), cfg, beta_eff=0.0)


def test_mwnl_requires_positive_threshold():
    with pytest.raises(ParameterError):
        LossConfig("mwnl", clamp_t=0.0)


def test_fully_clamped_sample_has_zero_gradient():
    stats = ClassStats((10, 20, 30))
    cfg = LossConfig("mwnl", clamp_t=0.1)
    # target very negative, non-targets very positive: every p_t is tiny
    out = loss.mwnl_loss([-8.0, 9.0, 7.0], 0, stats, cfg)
    assert np.all(out.grad == 0.0)
    w = loss.mw_weight(10, 1.1)
    assert out.value == pytest.approx(-w * 3 * cfg.clamp_constant, rel=1e-12)


def test_clamp_continuity():
    t = 0.1
    stats = ClassStats((1, 1))
    cfg = LossConfig("mwnl", clamp_t=t)
    logit_t = math.log(t / (1 - t))
    eps = 1e-9
    lo = loss.mwnl_loss([logit_t - eps, -5.0], 0, stats, cfg, beta_eff=0.0).value
    hi = loss.mwnl_loss([logit_t + eps, -5.0], 0, stats, cfg, beta_eff=0.0).value
    assert abs(hi - lo) < 1e-7


def test_ce_examples():
    stats = ClassStats((1, 1))
    assert loss.loss_for_family([0.0, 0.0], 0, stats, LossConfig("ce")).value == pytest.approx(math.log(2))


def test_ce_rw_uniform_counts_scale_ce():
    rng = np.random.default_rng(0)
    z = rng.normal(size=(20, 3))
    y = rng.integers(0, 3, 20)
    stats = ClassStats((8, 8, 8))
    ce, gce = loss.loss_batch(z, y, stats, LossConfig("ce"))
    rw, grw = loss.loss_batch(z, y, stats, LossConfig("ce_rw"))
    np.testing.assert_allclose(rw, ce / 8, rtol=1e-15)
    np.testing.assert_allclose(grw, gce / 8, rtol=1e-15)


def test_cb_focal_limit_matches_mwl_focal_alpha_one():
    rng = np.random.default_rng(1)
    counts = (500, 120, 35, 9)
    stats = ClassStats(counts)
    z = rng.normal(0, 2, (200, 4))
    y = rng.integers(0, 4, 200)
    cb, _ = loss.loss_batch(z, y, stats, LossConfig("cb_focal", beta_cb=0.999999))
    mw, _ = loss.loss_batch(z, y, stats, LossConfig("mwl_focal", alpha=1.0))
    np.testing.assert_allclose(cb, mw, rtol=1e-3)


def _fd_grad(fn, z, h=1e-5):
    g = np.zeros_like(z)
    for i in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        g[i] = (fn(zp) - fn(zm)) / (2 * h)
    return g


@pytest.mark.parametrize("family", loss.FAMILIES)
def test_gradients_match_finite_differences(family):
    rng = np.random.default_rng(7)
    stats = ClassStats((300, 40, 9, 77))
    cfg = LossConfig(family, alpha=1.1, class_coeff=(1.0, 2.0, 0.5, 1.0))
    for _ in range(50):
        z = rng.normal(0, 2.5, 4)
        y = int(rng.integers(4))
        if np.any(np.abs(loss.transformed_probs(z, y) - 0.1) < 1e-3):
            continue
        beta = float(rng.uniform(0, 1.1))
        out = loss.loss_for_family(z, y, stats, cfg, beta)
        fd = _fd_grad(lambda v: loss.loss_for_family(v, y, stats, cfg, beta).value, z)
        scale = max(np.linalg.norm(fd), 1e-4)
        assert np.linalg.norm(out.grad - fd) / scale < 1e-5


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 2.0))
def test_value_decreases_with_target_confidence(z_other, step):
    stats = ClassStats((5, 5, 5))
    cfg = LossConfig("mwnl", clamp_t=0.1)
    z0 = -1.5  # p_t of the target already above 0.1
    a = loss.mwnl_loss([z0, z_other, -1.0], 0, stats, cfg).value
    b = loss.mwnl_loss([z0 + step, z_other, -1.0], 0, stats, cfg).value
    assert b < a


@given(st.permutations([1, 2, 3]))
def test_value_invariant_to_non_target_permutation(perm):
    stats = ClassStats((10, 20, 20, 20))
    cfg = LossConfig("mwnl")
    z = np.array([0.5, -0.4, 1.3, -2.2])
    base = loss.mwnl_loss(z, 0, stats, cfg).value
    zp = z[[0] + list(perm)]
    assert loss.mwnl_loss(zp, 0, stats, cfg).value == pytest.approx(base, rel=1e-14)


def test_logits_file_round_trip(tmp_path):
    import io
    text = "sample_id,y,z0,z1\na,0,0,0\nb,1,2.5,-1\n"
    ids, y, z = loss.read_logits(io.StringIO(text))
    assert ids == ["a", "b"] and y.tolist() == [0, 1]
    vals, grads = loss.loss_batch(z, y, ClassStats((1, 1)), LossConfig("ce"))
    out = io.StringIO()
    loss.write_loss_rows(out, ids, vals, grads)
    lines = out.getvalue().splitlines()
    assert lines[0] == "sample_id,value,grad_0,grad_1"
    assert lines[1].split(",")[1] == "0.693147181"
    for line, v in zip(lines[1:], vals):
        assert float(line.split(",")[1]) == pytest.approx(v, rel=5e-9)


def test_logits_file_malformed_row_reports_line():
    import io
    from mwnl.errors import DataError
    with pytest.raises(DataError, match="line 3"):
        loss.read_logits(io.StringIO("a,0,1,2\nb,1,3,4\nc,x,1,2\n"))


def test_nan_logits_are_not_clamped():
    out = loss.mwnl_loss([np.nan, 1.0], 0, ClassStats((3, 4)), LossConfig("mwnl"))
    assert np.isnan(out.value)
