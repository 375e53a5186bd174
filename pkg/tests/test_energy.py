import numpy as np
import pytest

from nlthin.densities import pure_convolution, rotation_example
from nlthin.energy import (
    ScaleParams,
    conv_energy_forms_check,
    energy_and_gradient_rescaled,
    energy_physical,
    energy_rescaled,
    energy_truncated,
    gradient_rescaled,
)
from nlthin.lattice import CylinderSpec, Field, build_lattice, build_stencil


@pytest.fixture
def setup():
    spec = CylinderSpec(planar_box=((0.0, 1.0),), half_thickness=1.0)
    lat = build_lattice(spec, [13, 7], [False, False])
    den = pure_convolution(1.0, 2.0)
    sc = ScaleParams(eps=0.25, gamma=0.125)
    st = build_stencil(den.growth.kernel, sc.eps, sc.gamma, lat)
    rng = np.random.default_rng(7)
    u = Field(values=rng.normal(size=(*lat.shape, 1)), lattice=lat)
    return lat, den, sc, st, u


def test_scale_params_derived_quantities():
    sc = ScaleParams(eps=0.1, gamma=0.02)
    assert sc.delta == pytest.approx(5.0)
    assert sc.prefactor_physical == pytest.approx(max(0.1 / 0.02**2, 1 / 0.02))
    assert sc.prefactor_rescaled == pytest.approx(max(5.0, 1.0))
    with pytest.raises(ValueError):
        ScaleParams(eps=0.0, gamma=0.1)


def brute_force_energy(u, den, sc, st, lat):
    """Independent O(K N) reference: explicit python loops, no rolls."""
    nm = lat.node_measure()
    total = 0.0
    n0, n1 = lat.shape
    for k, xi, w in zip(st.offsets, st.xi_points, st.weights):
        for i in range(n0):
            for j in range(n1):
                ii, jj = i + k[0], j + k[1]
                if 0 <= ii < n0 and 0 <= jj < n1:
                    z = (u.values[ii, jj] - u.values[i, j]) / sc.eps
                    fv = den.eval(None, xi, z[None, :])[0]
                    total += w * fv * nm[i, j] / (lat.spacing[0] * lat.spacing[1])
    return sc.prefactor_rescaled * lat.spacing[0] * lat.spacing[1] * total


def test_energy_against_brute_force(setup):
    lat, den, sc, st, u = setup
    bd = energy_rescaled(u, den, sc, st)
    ref = brute_force_energy(u, den, sc, st, lat)
    assert bd.total == pytest.approx(ref, rel=1e-12)
    assert bd.rederive_total() == pytest.approx(bd.total, rel=1e-12)


def test_energy_nonnegative_and_zero_on_constants(setup):
    lat, den, sc, st, u = setup
    assert energy_rescaled(u, den, sc, st).total >= 0.0
    const = Field(values=np.full((*lat.shape, 1), 3.7), lattice=lat)
    assert energy_rescaled(const, den, sc, st).total == 0.0


def test_rescaling_identity_exact(setup):
    lat, den, sc, st, u = setup
    spec_p = CylinderSpec(planar_box=((0.0, 1.0),), half_thickness=sc.gamma)
    lat_p = build_lattice(spec_p, list(lat.shape), [False, False])
    v = Field(values=u.values.copy(), lattice=lat_p)
    assert energy_physical(v, den, sc, st).total == energy_rescaled(u, den, sc, st).total


def test_truncation_monotone(setup):
    lat, den, sc, st, u = setup
    vals = [energy_truncated(u, den, sc, st, T).total for T in (0.2, 0.4, 0.7, 1.0)]
    assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(energy_rescaled(u, den, sc, st).total, rel=1e-12)


def test_forms_check_agree_to_rounding(setup):
    lat, den, sc, st, u = setup
    v_xi, v_xy, v_z = conv_energy_forms_check(u, 1.0, 2.0, sc)
    assert v_xy == pytest.approx(v_xi, rel=1e-12)
    assert v_z == pytest.approx(v_xi, rel=1e-12)


def test_gradient_matches_finite_differences(setup):
    lat, den, sc, st, u = setup
    bd, grad = energy_and_gradient_rescaled(u, den, sc, st)
    rng = np.random.default_rng(11)
    h = 1e-6
    for _ in range(25):
        direction = rng.normal(size=u.values.shape)
        direction /= np.linalg.norm(direction)
        up = Field(values=u.values + h * direction, lattice=lat)
        um = Field(values=u.values - h * direction, lattice=lat)
        fd = (energy_rescaled(up, den, sc, st).total
              - energy_rescaled(um, den, sc, st).total) / (2 * h)
        analytic = float(np.sum(grad * direction))
        assert analytic == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_gradient_respects_fixed_mask(setup):
    lat, den, sc, st, u = setup
    fixed = np.zeros(lat.shape, dtype=bool)
    fixed[0, :] = True
    g = gradient_rescaled(u, den, sc, st, fixed_mask=fixed)
    assert np.all(g.values[0, :, :] == 0.0)
    assert np.any(g.values[1:, :, :] != 0.0)


def test_gradient_vector_codomain():
    spec = CylinderSpec(planar_box=((0.0, 1.0),), half_thickness=1.0)
    lat = build_lattice(spec, [9, 5], [False, False])
    den = rotation_example(0.1, 2.0)
    # d = 3 density on a d = 2 lattice is a contract mismatch; build a
    # 3-d lattice instead
    spec3 = CylinderSpec(planar_box=((0.0, 1.0), (0.0, 1.0)), half_thickness=1.0)
    lat3 = build_lattice(spec3, [7, 7, 5], [False, False, False])
    sc = ScaleParams(eps=0.5, gamma=0.25)
    st = build_stencil(den.growth.kernel, sc.eps, sc.gamma, lat3)
    rng = np.random.default_rng(3)
    u = Field(values=rng.normal(size=(*lat3.shape, 3)), lattice=lat3)
    bd, grad = energy_and_gradient_rescaled(u, den, sc, st)
    h = 1e-6
    direction = rng.normal(size=u.values.shape)
    direction /= np.linalg.norm(direction)
    up = Field(values=u.values + h * direction, lattice=lat3)
    um = Field(values=u.values - h * direction, lattice=lat3)
    fd = (energy_rescaled(up, den, sc, st).total
          - energy_rescaled(um, den, sc, st).total) / (2 * h)
    assert float(np.sum(grad * direction)) == pytest.approx(fd, rel=1e-4, abs=1e-7)


def test_scale_stencil_mismatch_raises(setup):
    lat, den, sc, st, u = setup
    with pytest.raises(ValueError):
        energy_rescaled(u, den, ScaleParams(eps=0.5, gamma=0.125), st)


def test_region_localization(setup):
    lat, den, sc, st, u = setup
    full = energy_rescaled(u, den, sc, st).total
    sub = energy_rescaled(u, den, sc, st, region=[(0.25, 0.75)]).total
    assert 0.0 < sub < full


def test_breakdown_json_roundtrip(setup):
    lat, den, sc, st, u = setup
    bd = energy_rescaled(u, den, sc, st)
    d = bd.to_json_dict()
    assert d["total"] == bd.total
    assert len(d["per_offset"]) == len(st)
