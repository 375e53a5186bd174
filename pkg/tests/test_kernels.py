import json

import numpy as np
import pytest

from nlthin.kernels import (
    DivergenceError,
    audit_hypotheses,
    cylinder_indicator,
    gaussian_separable,
    moment_p,
    mollifier_over_norm_p,
    tail_moment,
    vertical_singular,
    vertical_slice_sup,
)


def test_cylinder_indicator_eval():
    k = cylinder_indicator(1.0)
    pts = np.array([[0.2, 0.3], [0.999, 0.0], [1.0, 0.0], [0.0, 1.2]])
    np.testing.assert_allclose(k.eval(pts), [1.0, 1.0, 0.0, 0.0])


def test_cylinder_moment_closed_form():
    # int_{-1}^{1} int_{-1}^{1} (s^2 + t^2) ds dt = 8/3 for d = 2
    assert moment_p(cylinder_indicator(1.0), 2.0) == pytest.approx(8.0 / 3.0, rel=1e-3)
    # scaling: the cylinder C_r has p-moment r^{d+p} times the unit one
    assert moment_p(cylinder_indicator(2.0), 2.0) == pytest.approx(
        2.0**4 * 8.0 / 3.0, rel=1e-3
    )


def test_cylinder_moment_d3():
    # d = 3: int_{B_1} int_{-1}^{1} (|s|^2 + t^2) = 2 (pi/2) + (2/3) pi
    exact = np.pi + 2.0 * np.pi / 3.0
    assert moment_p(cylinder_indicator(1.0, dim=3), 2.0) == pytest.approx(exact, rel=1e-3)


def test_gaussian_moment_closed_form():
    # int exp(-s^2) exp(-t^2) (s^2 + t^2) ds dt over R^2 equals pi
    assert moment_p(gaussian_separable(), 2.0) == pytest.approx(np.pi, rel=1e-3)


def test_mollifier_moment_is_finite_and_positive():
    # the |xi|^{-p} singularity cancels against the |xi|^p moment factor
    val = moment_p(mollifier_over_norm_p(2.0), 2.0)
    assert 0.0 < val < np.inf


def test_tail_moment_monotone():
    k = gaussian_separable()
    vals = [tail_moment(k, 2.0, r) for r in (0.0, 0.5, 1.0, 2.0)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 0.0


def test_tail_moment_vanishes_outside_support():
    assert tail_moment(cylinder_indicator(1.0), 2.0, 1.0) == pytest.approx(0.0, abs=1e-12)


def test_vertical_slice_sup_cylinder():
    # slice integral at height t is 2/3 + 2 t^2 for |t| < 1, so the sup
    # over the sampled heights approaches 8/3 from below
    val = vertical_slice_sup(cylinder_indicator(1.0), 2.0)
    assert 8.0 / 3.0 * 0.9 < val <= 8.0 / 3.0 + 1e-6


def test_vertical_slice_sup_diverges_for_singular_kernel():
    with pytest.raises(DivergenceError):
        vertical_slice_sup(vertical_singular(0.5), 2.0)


@pytest.mark.parametrize(
    "kernel",
    [cylinder_indicator(1.0), mollifier_over_norm_p(2.0), gaussian_separable()],
    ids=["cylinder", "mollifier", "gaussian"],
)
def test_audit_passes_regular_kernels(kernel):
    report = audit_hypotheses(kernel, 2.0)
    assert report.passed_all, {k: e.detail for k, e in report.entries.items()}


def test_audit_fails_singular_kernel_on_h3_only():
    report = audit_hypotheses(vertical_singular(0.5), 2.0)
    assert not report.passed_all
    flags = {name: entry.passed for name, entry in report.entries.items()}
    assert flags == {"H0": True, "H1": True, "H2": True, "H3": False, "H4": True}


def test_audit_report_serializes():
    report = audit_hypotheses(cylinder_indicator(1.0), 2.0)
    payload = json.loads(report.to_json())
    assert payload["passed_all"] is True
    assert set(payload["entries"]) == {"H0", "H1", "H2", "H3", "H4"}


def test_kernel_validation():
    with pytest.raises(ValueError):
        cylinder_indicator(0.0)
    with pytest.raises(ValueError):
        vertical_singular(1.0)
    with pytest.raises(ValueError):
        vertical_singular(0.0)


def test_separable_profile_factorizes():
    k = gaussian_separable()
    pts = np.array([[0.3, 0.7], [1.1, -0.2]])
    expected = np.exp(-pts[:, 0] ** 2) * np.exp(-pts[:, 1] ** 2)
    np.testing.assert_allclose(k.eval(pts), expected, rtol=1e-12)
