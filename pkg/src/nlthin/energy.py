"""
Discrete nonlocal energies and their analytic gradients.

The rescaled energy on a cylinder lattice is

    (eps/gamma v 1) * sum_k w_k * sum_x f(x, xi_k, D_k u(x)) * meas(x)

with D_k u(x) = (u(x + offset_k) - u(x)) / eps, the sum over x running
over the admissible nodes of offset k.  The x-quadrature uses per-node
cell volumes (half cells at non-periodic boundaries); the xi-quadrature
weight w_k lives in the stencil.  Summation is deterministic: nodes in
row-major order inside each offset, offsets in lexicographic order.

The physical energy is the same sum over the physical lattice with the
prefactor max(eps/gamma^2, 1/gamma); by lattice matching, a field and
its vertical rescaling share stencil data, difference quotients, and
hence energies exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .densities import Density, pure_convolution
from .kernels import cylinder_indicator
from .lattice import (
    Field,
    InteractionStencil,
    Lattice,
    admissible_nodes,
    build_stencil,
    shifted_values,
)

__all__ = [
    "ScaleParams",
    "EnergyBreakdown",
    "energy_rescaled",
    "energy_physical",
    "energy_truncated",
    "gradient_rescaled",
    "energy_and_gradient_rescaled",
    "conv_energy_forms_check",
    "periodic_cell_energy_gradient",
]


@dataclass(frozen=True)
class ScaleParams:
    """The (eps, gamma) pair with its derived ratio and prefactors.

    Physical thin-film runs have eps, gamma in (0, 1].  The periodic
    cell problems are normalized to unit interactions (eps = 1,
    gamma = 1/delta), which puts gamma above 1 when delta < 1; the
    constructor therefore only requires positivity.
    """

    eps: float
    gamma: float

    def __post_init__(self):
        if self.eps <= 0 or self.gamma <= 0:
            raise ValueError("eps and gamma must be positive")

    @property
    def delta(self) -> float:
        return self.eps / self.gamma

    @property
    def prefactor_physical(self) -> float:
        return max(self.eps / self.gamma**2, 1.0 / self.gamma)

    @property
    def prefactor_rescaled(self) -> float:
        return max(self.delta, 1.0)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Total energy plus the per-offset partial sums it came from.

    total = prefactor * node_measure * sum(per_offset values); the
    partial sums carry the stencil weight and the relative boundary
    measures but not the common cell volume.
    """

    total: float
    per_offset: dict[tuple[int, ...], float]
    node_measure: float
    prefactor: float

    def rederive_total(self) -> float:
        acc = 0.0
        for key in sorted(self.per_offset):
            acc += self.per_offset[key]
        return self.prefactor * self.node_measure * acc

    def to_json_dict(self) -> dict:
        return {
            "total": self.total,
            "node_measure": self.node_measure,
            "prefactor": self.prefactor,
            "per_offset": {",".join(map(str, k)): v for k, v in sorted(self.per_offset.items())},
        }


def _relative_measure(lattice: Lattice) -> NDArray[np.float64]:
    """Per-node measure divided by the interior cell volume."""
    return lattice.node_measure() / float(np.prod(lattice.spacing))


def _breakdown(
    values: NDArray,
    lattice: Lattice,
    density: Density,
    stencil: InteractionStencil,
    eps: float,
    prefactor: float,
    region: Optional[Sequence[tuple[float, float]]] = None,
) -> EnergyBreakdown:
    relmeas = _relative_measure(lattice)
    m = values.shape[-1]
    per_offset: dict[tuple[int, ...], float] = {}
    acc = 0.0
    for k, xi, w in zip(stencil.offsets, stencil.xi_points, stencil.weights):
        adm = admissible_nodes(lattice, k, region)
        if not adm.any():
            per_offset[tuple(int(c) for c in k)] = 0.0
            continue
        z = (shifted_values(values, k) - values) / eps
        fvals = density.eval(None, xi, z.reshape(-1, m)).reshape(lattice.shape)
        contrib = float(w) * float(np.sum(fvals * relmeas * adm))
        per_offset[tuple(int(c) for c in k)] = contrib
        acc += contrib
    node_measure = float(np.prod(lattice.spacing))
    return EnergyBreakdown(
        total=prefactor * node_measure * acc,
        per_offset=per_offset,
        node_measure=node_measure,
        prefactor=prefactor,
    )


def energy_rescaled(
    u: Field,
    density: Density,
    scale: ScaleParams,
    stencil: InteractionStencil,
    region: Optional[Sequence[tuple[float, float]]] = None,
) -> EnergyBreakdown:
    """Rescaled functional on omega x (-1, 1), localized to ``region``
    (a planar sub-box) when given."""
    _check_scale(stencil, scale)
    return _breakdown(
        u.values, u.lattice, density, stencil, scale.eps, scale.prefactor_rescaled, region
    )


def energy_physical(
    v: Field,
    density: Density,
    scale: ScaleParams,
    stencil: InteractionStencil,
) -> EnergyBreakdown:
    """Physical functional on omega x (-gamma, gamma).

    The stencil is the shared lattice-matched one: integer offsets and
    xi points are identical to the rescaled picture, only the vertical
    node spacing (and hence node_measure) and the prefactor differ.
    """
    _check_scale(stencil, scale)
    return _breakdown(
        v.values, v.lattice, density, stencil, scale.eps, scale.prefactor_physical
    )


def energy_truncated(
    u: Field,
    density: Density,
    scale: ScaleParams,
    stencil: InteractionStencil,
    T: float,
    region: Optional[Sequence[tuple[float, float]]] = None,
) -> EnergyBreakdown:
    """Rescaled energy with interactions restricted to |xi_alpha| < T."""
    return energy_rescaled(u, density, scale, stencil.restrict_planar(T), region)


def _check_scale(stencil: InteractionStencil, scale: ScaleParams):
    se, sg = stencil.scale
    if abs(se - scale.eps) > 1e-12 * scale.eps or abs(sg - scale.gamma) > 1e-12 * scale.gamma:
        raise ValueError(
            f"stencil built for (eps, gamma) = ({se}, {sg}), "
            f"got scale ({scale.eps}, {scale.gamma})"
        )


def gradient_rescaled(
    u: Field,
    density: Density,
    scale: ScaleParams,
    stencil: InteractionStencil,
    region: Optional[Sequence[tuple[float, float]]] = None,
    fixed_mask: Optional[NDArray[np.bool_]] = None,
) -> Field:
    """Analytic gradient of energy_rescaled with respect to the nodal
    values, zeroed on ``fixed_mask`` nodes."""
    _, grad = energy_and_gradient_rescaled(u, density, scale, stencil, region, fixed_mask)
    return Field(values=grad, lattice=u.lattice)


def energy_and_gradient_rescaled(
    u: Field,
    density: Density,
    scale: ScaleParams,
    stencil: InteractionStencil,
    region: Optional[Sequence[tuple[float, float]]] = None,
    fixed_mask: Optional[NDArray[np.bool_]] = None,
) -> tuple[EnergyBreakdown, NDArray[np.float64]]:
    """Fused evaluation sharing the difference quotients per offset.

    For each node y the chain rule through D_k u gives
        g(y) = pref * nm * sum_k (w_k / eps) [P_k(y - k) - P_k(y)]
    with P_k = relmeas * admissible * grad_z f(., xi_k, D_k u).  The
    shifted term is a wrapped roll; it is safe on non-periodic axes
    because P_k vanishes off the admissible set.
    """
    _check_scale(stencil, scale)
    lattice = u.lattice
    values = u.values
    eps = scale.eps
    prefactor = scale.prefactor_rescaled
    relmeas = _relative_measure(lattice)
    m = values.shape[-1]
    axes = tuple(range(lattice.ndim))

    per_offset: dict[tuple[int, ...], float] = {}
    acc = 0.0
    grad = np.zeros_like(values)
    for k, xi, w in zip(stencil.offsets, stencil.xi_points, stencil.weights):
        adm = admissible_nodes(lattice, k, region)
        key = tuple(int(c) for c in k)
        if not adm.any():
            per_offset[key] = 0.0
            continue
        z = (shifted_values(values, k) - values) / eps
        z_flat = z.reshape(-1, m)
        fvals = density.eval(None, xi, z_flat).reshape(lattice.shape)
        mask = relmeas * adm
        contrib = float(w) * float(np.sum(fvals * mask))
        per_offset[key] = contrib
        acc += contrib

        dz = density.grad_z(None, xi, z_flat).reshape(*lattice.shape, m)
        P = dz * mask[..., None]
        grad += (float(w) / eps) * (
            np.roll(P, shift=tuple(int(c) for c in k), axis=axes) - P
        )

    node_measure = float(np.prod(lattice.spacing))
    grad *= prefactor * node_measure
    if fixed_mask is not None:
        grad[fixed_mask] = 0.0
    breakdown = EnergyBreakdown(
        total=prefactor * node_measure * acc,
        per_offset=per_offset,
        node_measure=node_measure,
        prefactor=prefactor,
    )
    return breakdown, grad


# ---------------------------------------------------------------------------
# periodic cell energies (corrector representation)
# ---------------------------------------------------------------------------


def periodic_cell_energy_gradient(
    corrector: NDArray,
    lattice: Lattice,
    density: Density,
    stencil: InteractionStencil,
    M: NDArray,
    b: Optional[NDArray],
    prefactor: float,
    with_b_grad: bool = False,
):
    """Energy and gradient of u = affine(M, b) + corrector on a cell.

    The affine part is handled analytically per offset: its increment
    over offset k is M xi_alpha + b * (vertical shift), exact across
    periodic wraps, while the corrector difference wraps with np.roll.
    Planar axes must be periodic; a non-periodic vertical axis (the
    Q_1 x I cell) contributes admissibility masks instead of wrapping.
    The returned energy is prefactor * sum (no outer regime factor).
    With ``with_b_grad`` the partial derivative in the vertical slope b
    (corrector held fixed) is returned as a third element.
    """
    eps = stencil.scale[0]
    relmeas = _relative_measure(lattice)
    m = corrector.shape[-1]
    axes = tuple(range(lattice.ndim))
    va = lattice.vertical_axis

    acc = 0.0
    grad = np.zeros_like(corrector)
    b_grad = np.zeros(m)
    # the mask depends only on the offsets along non-periodic axes, so
    # cache it across the (many) purely planar offset variations
    nonper_axes = [ax for ax in range(lattice.ndim) if not lattice.periodic[ax]]
    mask_cache: dict = {}
    for k, xi, w in zip(stencil.offsets, stencil.xi_points, stencil.weights):
        cache_key = tuple(int(k[ax]) for ax in nonper_axes)
        if cache_key in mask_cache:
            mask = mask_cache[cache_key]
        else:
            adm = admissible_nodes(lattice, k)
            mask = relmeas * adm if adm.any() else None
            mask_cache[cache_key] = mask
        if mask is None:
            continue
        if va is not None:
            xi_alpha = np.delete(xi, va)
            vshift = k[va] * lattice.spacing[va]
        else:
            xi_alpha = xi
            vshift = 0.0
        zaff = M @ xi_alpha
        if b is not None:
            zaff = zaff + b * vshift
        z = zaff + (shifted_values(corrector, k) - corrector) / eps
        z_flat = z.reshape(-1, m)
        fvals = density.eval(None, xi, z_flat).reshape(lattice.shape)
        acc += float(w) * float(np.sum(fvals * mask))

        dz = density.grad_z(None, xi, z_flat).reshape(*lattice.shape, m)
        P = dz * mask[..., None]
        grad += (float(w) / eps) * (
            np.roll(P, shift=tuple(int(c) for c in k), axis=axes) - P
        )
        if with_b_grad and vshift != 0.0:
            b_grad += float(w) * vshift * np.sum(P.reshape(-1, m), axis=0)

    node_measure = float(np.prod(lattice.spacing))
    if with_b_grad:
        return (
            prefactor * node_measure * acc,
            prefactor * node_measure * grad,
            prefactor * node_measure * b_grad,
        )
    return prefactor * node_measure * acc, prefactor * node_measure * grad


# ---------------------------------------------------------------------------
# the three equivalent convolution forms
# ---------------------------------------------------------------------------


def conv_energy_forms_check(
    u: Field, r: float, p: float, scale: ScaleParams
) -> tuple[float, float, float]:
    """Evaluate the pure-convolution energy three independent ways.

    xi-form: stencil parameterization by the interaction variable.
    xy-form: double sum over node pairs (x, y) with y - x in the
        rescaled interaction cylinder, prefactor (eps v gamma)/eps^d.
    z-form:  sum over realized offsets z in the physical cylinder with
        the vertical range capped at |z_d| < 2 (taller offsets have
        empty admissible sets on a height-2 domain).

    All three share the midpoint offset-cell quadrature (one full cell
    volume per realized offset), so on a lattice-matched grid they are
    the same finite sum in three different enumeration orders.
    """
    lattice = u.lattice
    d = lattice.ndim
    eps, gamma = scale.eps, scale.gamma
    values = u.values
    m = values.shape[-1]

    density = pure_convolution(r, p)
    stencil = build_stencil(cylinder_indicator(r, dim=d), eps, gamma, lattice)
    v_xi = energy_rescaled(u, density, scale, stencil).total

    # geometric shift realized by one index step on each axis (rescaled coords)
    h = np.array(lattice.spacing)
    va = lattice.vertical_axis
    planar_axes = [ax for ax in range(d) if ax != va]
    cell_vol = float(np.prod(h))
    pref = (max(eps, gamma) / eps**d)
    relmeas = _relative_measure(lattice)

    # xy-form: pair sum with the geometry test on y - x
    v_xy_acc = 0.0
    idx_ranges = [np.arange(n) for n in lattice.shape]
    coords = np.meshgrid(*idx_ranges, indexing="ij")
    flat_idx = np.stack([c.ravel() for c in coords], axis=1)
    vals_flat = values.reshape(-1, m)
    relmeas_flat = relmeas.ravel()
    planar_cap = eps * r
    vert_cap = eps * r / gamma
    for i, ix in enumerate(flat_idx):
        for j, iy in enumerate(flat_idx):
            if i == j:
                continue
            dxy = (iy - ix) * h
            dplan = np.linalg.norm(dxy[planar_axes])
            if dplan >= planar_cap:
                continue
            if va is not None and abs(dxy[va]) >= vert_cap:
                continue
            diff = vals_flat[j] - vals_flat[i]
            v_xy_acc += (
                float(np.sum(diff * diff) ** (p / 2.0))
                / eps**p
                * relmeas_flat[i]
                * cell_vol
            )
    v_xy = pref * cell_vol * v_xy_acc

    # z-form: offsets enumerated in physical coordinates with the
    # |z_d| < 2 cap, inner sum over admissible nodes
    v_z_acc = 0.0
    k_caps = []
    for ax in range(d):
        if ax == va:
            cap_len = min(eps * r / gamma, 2.0)
        else:
            cap_len = eps * r
        k_max = int(np.floor(cap_len / h[ax] + 1e-12))
        if abs(k_max * h[ax] - cap_len) < 1e-12:
            k_max -= 1
        k_caps.append(k_max)
    from itertools import product as _product

    for k in sorted(_product(*(range(-c, c + 1) for c in k_caps))):
        if all(c == 0 for c in k):
            continue
        dxy = np.array(k) * h
        if np.linalg.norm(dxy[planar_axes]) >= planar_cap:
            continue
        adm = admissible_nodes(lattice, k)
        if not adm.any():
            continue
        diff = (shifted_values(values, k) - values) / eps
        integrand = np.sum(diff * diff, axis=-1) ** (p / 2.0)
        v_z_acc += cell_vol * float(np.sum(integrand * relmeas * adm))
    v_z = pref * cell_vol * v_z_acc

    return v_xi, v_xy, v_z
