"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line (visible even without -s) with
the measured quantities and the pinned tolerance, then asserts.  The
tolerances are fixed here and nowhere else.
"""

import time

import numpy as np
import pytest

from nlthin.densities import pure_convolution
from nlthin.energy import (
    ScaleParams,
    conv_energy_forms_check,
    energy_physical,
    energy_rescaled,
    energy_truncated,
    energy_and_gradient_rescaled,
)
from nlthin.homogenization import (
    cell_formula_delta,
    cell_formula_infinity,
    cell_formula_zero,
    rotation_invariance_experiment,
    scaling_probe,
)
from nlthin.kernels import (
    audit_hypotheses,
    cylinder_indicator,
    mollifier_over_norm_p,
    vertical_singular,
)
from nlthin.lattice import CylinderSpec, Field, build_lattice, build_stencil
from nlthin.runner import gamma_min_sweep
from nlthin.solvers import DirichletClassSpec, SolverOptions, minimize_dirichlet


def report(capsys, name, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


def test_criterion_1_theta_limit(capsys):
    # pure convolution r = 1, p = 2, delta = 1: limit theta(1,1)*2/3 = 2
    tol = 0.03
    t0 = time.perf_counter()
    est = cell_formula_delta(pure_convolution(1.0, 2.0), 1.0, np.eye(1),
                             resolutions=(32, 64))
    elapsed = time.perf_counter() - t0
    err = abs(est.value - 2.0) / 2.0
    ok = err <= tol and elapsed <= 60.0
    report(capsys, "criterion 1 (theta limit)", ok,
           f"value {est.value:.6f} vs 2.0, rel err {err:.2%} (tol 3%), "
           f"runtime {elapsed:.1f}s (limit 60s)")
    assert err <= tol
    assert elapsed <= 60.0


def test_criterion_2_regime_formulas(capsys):
    tol = 0.05
    den = pure_convolution(2.0, 2.0)
    t0 = time.perf_counter()
    zero = cell_formula_zero(den, np.eye(1), resolutions=(8, 16))
    t_zero = time.perf_counter() - t0
    t0 = time.perf_counter()
    inf_ = cell_formula_infinity(den, np.eye(1), resolutions=(8, 16))
    t_inf = time.perf_counter() - t0
    err0 = abs(zero.value - 128.0 / 3.0) / (128.0 / 3.0)
    err1 = abs(inf_.value - 64.0 / 3.0) / (64.0 / 3.0)
    ok = err0 <= tol and err1 <= tol and t_zero <= 300 and t_inf <= 300
    report(capsys, "criterion 2 (regime formulas)", ok,
           f"zero {zero.value:.4f} vs 42.6667 ({err0:.2%}), "
           f"infinity {inf_.value:.4f} vs 21.3333 ({err1:.2%}), tol 5%, "
           f"runtimes {t_zero:.1f}s/{t_inf:.1f}s (limit 300s each)")
    assert err0 <= tol
    assert err1 <= tol
    assert t_zero <= 300 and t_inf <= 300


def test_criterion_3_scaling_laws(capsys):
    pairs = [(1 / 8, 1 / 8), (1 / 16, 1 / 16), (1 / 8, 1 / 32),
             (1 / 16, 1 / 64), (1 / 32, 1 / 8), (1 / 64, 1 / 16)]
    table = scaling_probe(cylinder_indicator(1.0), 2.0, pairs, spacing=1 / 64)
    worst = max(abs(row["ratio"] - 1.0) for row in table.rows)
    grid = [(lam / 64, 1 / 64) for lam in (2, 4, 8, 16, 32)]
    singular = scaling_probe(vertical_singular(0.5), 2.0, grid)
    slope_err = abs(singular.fitted_exponent - (-0.5))
    ok = worst <= 0.01 and slope_err <= 0.05
    report(capsys, "criterion 3 (scaling laws)", ok,
           f"indicator worst |ratio-1| {worst:.4%} over {len(pairs)} pairs "
           f"(tol 1%), beta=0.5 exponent {singular.fitted_exponent:.4f} "
           f"(tol -0.5 +/- 0.05)")
    assert worst <= 0.01
    assert slope_err <= 0.05


def test_criterion_4_separation_of_scales(capsys):
    # The continuum values are exact here: f^delta = 128/3 - (64/3) delta
    # for delta <= 1, so the delta = 1/8 endpoint sits 6.25 percent away
    # from f^0 in exact arithmetic and the 5 percent bar is unreachable.
    # The sweep is still run faithfully; see the extrapolated limit in
    # the printed line for the convergence content of the criterion.
    tol = 0.05
    den = pure_convolution(2.0, 2.0)
    t0 = time.perf_counter()
    zero = cell_formula_zero(den, np.eye(1), resolutions=(8, 16))
    gaps = []
    vals = {}
    for delta in (1.0, 0.5, 0.25, 0.125):
        est = cell_formula_delta(den, delta, np.eye(1), resolutions=(16, 32))
        vals[delta] = est.value
        gaps.append(abs(est.value - zero.value) / zero.value)
    elapsed = time.perf_counter() - t0
    extrapolated = 2.0 * vals[0.125] - vals[0.25]
    gap_limit = abs(extrapolated - zero.value) / zero.value
    decreasing = all(a > b for a, b in zip(gaps, gaps[1:]))
    ok = decreasing and gaps[-1] <= tol and elapsed <= 600
    report(capsys, "criterion 4 (separation of scales)", ok,
           f"gaps {[f'{g:.2%}' for g in gaps]} vs zero {zero.value:.4f}, "
           f"final {gaps[-1]:.2%} (tol 5%; exact continuum gap at "
           f"delta=1/8 is 6.25%), delta->0 extrapolated gap "
           f"{gap_limit:.2%}, runtime {elapsed:.0f}s (limit 600s)")
    assert decreasing
    assert elapsed <= 600
    assert gaps[-1] <= tol


def test_criterion_5_rotation_example(capsys):
    t0 = time.perf_counter()
    rep = rotation_invariance_experiment(0.05, 2.0, 0.5, resolution=16)
    elapsed = time.perf_counter() - t0
    up_ok = rep.value_plus <= rep.upper_bound_closed_form * 1.05
    low_ok = rep.value_minus_lower_bound >= rep.lower_bound_closed_form * 0.95
    ok = (up_ok and low_ok and rep.asymmetric and rep.invariant
          and elapsed <= 1200)
    report(capsys, "criterion 5 (rotation example)", ok,
           f"value_plus {rep.value_plus:.4f} <= {rep.upper_bound_closed_form * 1.05:.4f}, "
           f"lower bound {rep.value_minus_lower_bound:.4f} >= "
           f"{rep.lower_bound_closed_form * 0.95:.4f}, asymmetric "
           f"{rep.asymmetric}, invariance spread {rep.invariance_spread:.2e} "
           f"(tol 5%), runtime {elapsed:.0f}s (limit 1200s)")
    assert up_ok
    assert low_ok
    assert rep.asymmetric
    assert rep.invariant
    assert elapsed <= 1200


def test_criterion_6_gamma_min_convergence(capsys):
    tol = 0.05
    rows = gamma_min_sweep({
        "density": {"family": "pure_convolution", "r": 1.0, "p": 2.0},
        "M": [[1.0]], "trajectory": "constant", "delta": 1.0,
        "eps_list": [1 / 8, 1 / 16, 1 / 32],
    })
    gaps = [abs(row["gap"]) for row in rows]
    decreasing = all(a > b for a, b in zip(gaps, gaps[1:]))
    ok = decreasing and gaps[-1] <= tol
    report(capsys, "criterion 6 (gamma-min convergence)", ok,
           f"gaps {[f'{g:.2%}' for g in gaps]} vs oracle 2.0, "
           f"final {gaps[-1]:.2%} (tol 5%)")
    assert decreasing
    assert gaps[-1] <= tol


def test_criterion_7_property_suites(capsys):
    failures = []

    spec = CylinderSpec(planar_box=((0.0, 1.0),), half_thickness=1.0)
    lat = build_lattice(spec, [13, 7], [False, False])
    den = pure_convolution(1.0, 2.0)
    sc = ScaleParams(eps=0.25, gamma=0.125)
    st = build_stencil(den.growth.kernel, sc.eps, sc.gamma, lat)
    rng = np.random.default_rng(0)
    u = Field(values=rng.normal(size=(*lat.shape, 1)), lattice=lat)

    # rescaling identity, exact
    spec_p = CylinderSpec(planar_box=((0.0, 1.0),), half_thickness=sc.gamma)
    lat_p = build_lattice(spec_p, list(lat.shape), [False, False])
    v = Field(values=u.values.copy(), lattice=lat_p)
    if energy_physical(v, den, sc, st).total != energy_rescaled(u, den, sc, st).total:
        failures.append("rescaling identity not exact")

    # three convolution forms, 1e-12 relative
    v_xi, v_xy, v_z = conv_energy_forms_check(u, 1.0, 2.0, sc)
    if abs(v_xy - v_xi) > 1e-12 * abs(v_xi) or abs(v_z - v_xi) > 1e-12 * abs(v_xi):
        failures.append("convolution forms disagree")

    # truncation monotone
    t_vals = [energy_truncated(u, den, sc, st, T).total
              for T in np.linspace(0.1, 1.0, 10)]
    if not all(a <= b + 1e-12 for a, b in zip(t_vals, t_vals[1:])):
        failures.append("truncation not monotone")

    # gradient vs central differences, 1000 samples at 1e-5 relative
    _, grad = energy_and_gradient_rescaled(u, den, sc, st)
    h = 1e-6
    worst_fd = 0.0
    idx = list(np.ndindex(*lat.shape))
    for t in range(1000):
        i, j = idx[rng.integers(len(idx))]
        up = u.values.copy()
        um = u.values.copy()
        up[i, j, 0] += h
        um[i, j, 0] -= h
        fd = (energy_rescaled(Field(values=up, lattice=lat), den, sc, st).total
              - energy_rescaled(Field(values=um, lattice=lat), den, sc, st).total
              ) / (2 * h)
        denom = max(abs(fd), abs(grad[i, j, 0]), 1.0)
        worst_fd = max(worst_fd, abs(fd - grad[i, j, 0]) / denom)
    if worst_fd > 1e-5:
        failures.append(f"gradient fd mismatch {worst_fd:.2e}")

    # convexity midpoint inequality, 100 pairs
    for _ in range(100):
        xi = rng.uniform(-1.2, 1.2, size=2)
        z1 = rng.normal(size=(1, 1))
        z2 = rng.normal(size=(1, 1))
        mid = den.eval(None, xi, (z1 + z2) / 2.0)[0]
        avg = (den.eval(None, xi, z1)[0] + den.eval(None, xi, z2)[0]) / 2.0
        if mid > avg + 1e-10 * (1.0 + abs(avg)):
            failures.append("convexity midpoint inequality violated")
            break

    # Dirichlet feasibility: the collar holds the datum exactly
    d_spec = DirichletClassSpec(datum_matrix=np.array([[1.5]]), collar_width=sc.eps)
    rep = minimize_dirichlet(den, sc, lat, d_spec, st,
                             SolverOptions(tol_g=1e-9, max_iters=200))
    x = lat.axis_coords(0)
    collar = np.minimum(x, 1.0 - x) < sc.eps - 1e-12
    datum = np.broadcast_to((1.5 * x)[:, None, None], (*lat.shape, 1))
    if not np.array_equal(rep.field.values[collar], datum[collar]):
        failures.append("Dirichlet collar not exact")

    # convex 5-restart agreement to 1e-6
    multi = minimize_dirichlet(den, sc, lat, d_spec, st,
                               SolverOptions(tol_g=1e-8, max_iters=3000,
                                             multistart=5, seed=3))
    if abs(multi.value - rep.value) > 1e-6:
        failures.append(f"restart disagreement {abs(multi.value - rep.value):.2e}")

    # kernel audits: both regular examples pass, the singular one fails H3
    for kern in (cylinder_indicator(1.0), mollifier_over_norm_p(2.0)):
        if not audit_hypotheses(kern, 2.0).passed_all:
            failures.append(f"audit failed for {kern.family}")
    bad = audit_hypotheses(vertical_singular(0.5), 2.0)
    flags = {name: e.passed for name, e in bad.entries.items()}
    if flags != {"H0": True, "H1": True, "H2": True, "H3": False, "H4": True}:
        failures.append(f"singular kernel audit pattern {flags}")

    ok = not failures
    report(capsys, "criterion 7 (property suites)", ok,
           "all 8 properties hold" if ok else "; ".join(failures))
    assert not failures
