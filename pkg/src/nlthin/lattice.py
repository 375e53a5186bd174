"""
Tensor grids on thin cylinders and lattice-matched interaction stencils.

The domains of interest are cylinders ``omega x (-t, t)`` with a box
cross-section ``omega`` in R^(d-1).  A Lattice is a plain tensor grid on
such a cylinder (or on a periodic cell, or on a purely planar cell).
The key construction is the InteractionStencil: the nonlocal interaction
integral over the offset variable ``xi`` is discretized so that every
quadrature point corresponds exactly to an integer shift of grid nodes.
With this "lattice matching" the shifted field values need no
interpolation, discrete energies are exact finite sums, and
change-of-variable identities between the different ways of writing a
convolution energy hold to rounding error.

Conventions:
    - node indexing is row-major (C order) over the axes in the order
      (planar axes..., vertical axis);
    - on a non-periodic axis with n nodes the spacing h satisfies
      h*(n-1) = extent and nodes sit on both endpoints;
    - on a periodic axis h*n = extent and the right endpoint is the wrap
      image of the left one;
    - stencil entries are ordered lexicographically by offset vector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True)
class CylinderSpec:
    """Geometric description of a thin cylinder omega x (-t, t).

    ``planar_box`` lists the (d-1) closed intervals making up the box
    cross-section; ``half_thickness`` is the half-height of the vertical
    interval; ``codomain_dim`` is the dimension m of the field values.
    """

    planar_box: tuple[tuple[float, float], ...]
    half_thickness: float
    codomain_dim: int = 1

    def __post_init__(self):
        if len(self.planar_box) < 1:
            raise ValueError("planar_box needs at least one interval (d >= 2)")
        for lo, hi in self.planar_box:
            if not hi > lo:
                raise ValueError(f"empty planar interval ({lo}, {hi})")
        if not self.half_thickness > 0:
            raise ValueError("half_thickness must be positive")
        if self.codomain_dim < 1:
            raise ValueError("codomain_dim must be >= 1")

    @property
    def ambient_dim(self) -> int:
        return len(self.planar_box) + 1

    @property
    def intervals(self) -> tuple[tuple[float, float], ...]:
        t = self.half_thickness
        return self.planar_box + ((-t, t),)


@dataclass(frozen=True)
class Lattice:
    """Tensor grid with per-axis spacing, counts, periodicity and origin.

    The last axis is the vertical one for cylinder lattices; purely
    planar lattices (used by the cross-sectional cell problems) simply
    have no vertical axis and ``vertical_axis`` set to None.
    """

    spacing: tuple[float, ...]
    node_counts: tuple[int, ...]
    periodic: tuple[bool, ...]
    origin: tuple[float, ...]
    vertical_axis: Optional[int] = None

    def __post_init__(self):
        n_ax = len(self.spacing)
        if not (len(self.node_counts) == len(self.periodic) == len(self.origin) == n_ax):
            raise ValueError("per-axis fields must have equal length")
        if any(n < 2 for n in self.node_counts):
            raise ValueError("resolution below 2")
        if any(h <= 0 for h in self.spacing):
            raise ValueError("spacing must be positive")

    @property
    def ndim(self) -> int:
        return len(self.spacing)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.node_counts

    @property
    def total_nodes(self) -> int:
        return int(np.prod(self.node_counts))

    def axis_extent(self, axis: int) -> float:
        n = self.node_counts[axis]
        h = self.spacing[axis]
        return h * n if self.periodic[axis] else h * (n - 1)

    def axis_coords(self, axis: int) -> NDArray[np.float64]:
        n = self.node_counts[axis]
        return self.origin[axis] + self.spacing[axis] * np.arange(n)

    def node_measure(self) -> NDArray[np.float64]:
        """Per-node quadrature volume for the x-sum.

        Product of spacings, with half cells assigned to the two
        boundary nodes of every non-periodic axis so that the measures
        sum exactly to the domain volume.
        """
        out = np.ones(self.shape)
        for ax in range(self.ndim):
            w = np.full(self.node_counts[ax], self.spacing[ax])
            if not self.periodic[ax]:
                w[0] *= 0.5
                w[-1] *= 0.5
            shape = [1] * self.ndim
            shape[ax] = -1
            out = out * w.reshape(shape)
        return out

    def coordinates(self) -> NDArray[np.float64]:
        """Node coordinates, shape (*node_counts, ndim)."""
        grids = np.meshgrid(*(self.axis_coords(ax) for ax in range(self.ndim)), indexing="ij")
        return np.stack(grids, axis=-1)

    def to_json(self) -> str:
        return json.dumps(
            {
                "spacing": list(self.spacing),
                "node_counts": list(self.node_counts),
                "periodic": list(self.periodic),
                "origin": list(self.origin),
                "vertical_axis": self.vertical_axis,
            }
        )


@dataclass(frozen=True)
class Field:
    """Nodal values of a vector field on a lattice.

    ``values`` has shape (*lattice.node_counts, m).
    """

    values: NDArray[np.float64]
    lattice: Lattice

    def __post_init__(self):
        expected = self.lattice.shape
        if self.values.shape[:-1] != expected:
            raise ValueError(
                f"field shape {self.values.shape[:-1]} does not match lattice {expected}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite entries")

    @property
    def codomain_dim(self) -> int:
        return self.values.shape[-1]


@dataclass(frozen=True)
class InteractionStencil:
    """Lattice-matched quadrature of the interaction integral.

    Each entry pairs an integer index-shift vector with the xi value it
    realizes and a midpoint-rule weight carrying the dxi volume.  The
    kernel value itself is *not* folded into the weight; densities keep
    their own xi-dependence.
    """

    offsets: NDArray[np.int64]          # (K, ndim)
    xi_points: NDArray[np.float64]      # (K, d) in interaction coordinates
    weights: NDArray[np.float64]        # (K,)
    scale: tuple[float, float]          # (eps, gamma) it was built for
    truncation: float
    warning: str = ""

    def __post_init__(self):
        if len(self.offsets) != len(self.xi_points) or len(self.offsets) != len(self.weights):
            raise ValueError("stencil arrays must have equal length")
        if len(self.weights) and not np.all(self.weights > 0):
            raise ValueError("stencil weights must be positive")

    def __len__(self) -> int:
        return len(self.offsets)

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def restrict_planar(self, T: float) -> "InteractionStencil":
        """Keep entries with planar offset norm |xi_alpha| < T."""
        d = self.xi_points.shape[1]
        planar = self.xi_points[:, : d - 1] if d > 1 else self.xi_points
        keep = np.linalg.norm(planar, axis=1) < T
        return InteractionStencil(
            offsets=self.offsets[keep],
            xi_points=self.xi_points[keep],
            weights=self.weights[keep],
            scale=self.scale,
            truncation=min(self.truncation, T),
            warning=self.warning,
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "offsets": self.offsets.tolist(),
                "xi_points": self.xi_points.tolist(),
                "weights": self.weights.tolist(),
                "scale": list(self.scale),
                "truncation": self.truncation,
                "warning": self.warning,
            }
        )


def build_lattice(
    spec: CylinderSpec,
    resolution: Sequence[int],
    periodic: Sequence[bool],
) -> Lattice:
    """Grid a cylinder spec with the given per-axis node counts."""
    intervals = spec.intervals
    if len(resolution) != len(intervals) or len(periodic) != len(intervals):
        raise ValueError("resolution/periodic must give one entry per axis")
    spacing, origin = [], []
    for (lo, hi), n, per in zip(intervals, resolution, periodic):
        if n < 2:
            raise ValueError("resolution below 2")
        extent = hi - lo
        spacing.append(extent / n if per else extent / (n - 1))
        origin.append(lo)
    return Lattice(
        spacing=tuple(spacing),
        node_counts=tuple(int(n) for n in resolution),
        periodic=tuple(bool(p) for p in periodic),
        origin=tuple(origin),
        vertical_axis=len(intervals) - 1,
    )


def planar_lattice(n: int, dim: int) -> Lattice:
    """Fully periodic unit-cell lattice in R^dim (no vertical axis)."""
    return Lattice(
        spacing=(1.0 / n,) * dim,
        node_counts=(n,) * dim,
        periodic=(True,) * dim,
        origin=(0.0,) * dim,
        vertical_axis=None,
    )


def _axis_shift_bound(lattice: Lattice, axis: int, xi_bound: float, xi_per_shift: float) -> int:
    """Largest |k| worth enumerating on one axis.

    ``xi_per_shift`` is the xi increment realized by a unit index shift.
    Shifts beyond the lattice span on non-periodic axes have empty
    admissible sets and are dropped here already.
    """
    k = int(np.floor(xi_bound / xi_per_shift + 1e-12))
    if abs(k * xi_per_shift - xi_bound) < 1e-12 * max(1.0, xi_bound):
        k -= 1  # open support: a point exactly on the boundary is outside
    if not lattice.periodic[axis]:
        k = min(k, lattice.node_counts[axis] - 1)
    return max(k, -1)


def build_stencil(
    kernel,
    eps: float,
    gamma: float,
    lattice: Lattice,
    truncation_T: float = np.inf,
) -> InteractionStencil:
    """Enumerate the lattice shifts covering a kernel's support.

    A planar index shift k_a realizes xi_a = k_a*h_a/eps with weight
    factor h_a/eps; a vertical shift k_d realizes xi_d = k_d*h_d*gamma/eps
    with weight factor h_d*gamma/eps (midpoint rule in xi).  The zero
    offset is excluded.  Entries are kept when the kernel is positive at
    the xi point and |xi_alpha| < truncation_T.

    ``gamma`` may exceed 1: the periodic cell problems are normalized to
    unit interactions (eps = 1, gamma = 1/delta) and reuse this routine.
    """
    if eps <= 0 or gamma <= 0:
        raise ValueError("eps and gamma must be positive")
    d = lattice.ndim
    has_vertical = lattice.vertical_axis is not None
    planar_axes = [ax for ax in range(d) if ax != lattice.vertical_axis]

    xi_per_shift = np.empty(d)
    for ax in planar_axes:
        xi_per_shift[ax] = lattice.spacing[ax] / eps
    if has_vertical:
        va = lattice.vertical_axis
        xi_per_shift[va] = lattice.spacing[va] * gamma / eps

    planar_bound = min(kernel.planar_support_radius, truncation_T)
    if not np.isfinite(planar_bound):
        raise ValueError("unbounded planar support requires a finite truncation_T")
    ranges = []
    for ax in range(d):
        if ax == lattice.vertical_axis:
            bound = kernel.vertical_support_halfheight
            if not np.isfinite(bound):
                # the admissible band caps useful vertical shifts anyway
                bound = (lattice.node_counts[ax] - 1) * xi_per_shift[ax] * (1 + 1e-12)
            k_max = _axis_shift_bound(lattice, ax, bound, xi_per_shift[ax])
        else:
            k_max = _axis_shift_bound(lattice, ax, planar_bound, xi_per_shift[ax])
        ranges.append(range(-k_max, k_max + 1) if k_max >= 0 else range(0, 1))

    cell_weight = float(np.prod(xi_per_shift))
    offsets, xi_points = [], []
    for k in product(*ranges):
        if all(ki == 0 for ki in k):
            continue
        xi = np.array(k, dtype=float) * xi_per_shift
        xi_planar = xi[planar_axes]
        if np.linalg.norm(xi_planar) >= truncation_T:
            continue
        if kernel.eval(xi[np.newaxis, :])[0] <= 0:
            continue
        offsets.append(k)
        xi_points.append(xi)

    warning = ""
    if not offsets:
        warning = "empty stencil: kernel support is smaller than one lattice cell"
        return InteractionStencil(
            offsets=np.zeros((0, d), dtype=np.int64),
            xi_points=np.zeros((0, d)),
            weights=np.zeros((0,)),
            scale=(eps, gamma),
            truncation=float(truncation_T),
            warning=warning,
        )

    order = np.lexsort(np.array(offsets, dtype=np.int64).T[::-1])
    offsets_arr = np.array(offsets, dtype=np.int64)[order]
    xi_arr = np.array(xi_points)[order]
    weights = np.full(len(offsets_arr), cell_weight)
    return InteractionStencil(
        offsets=offsets_arr,
        xi_points=xi_arr,
        weights=weights,
        scale=(eps, gamma),
        truncation=float(truncation_T),
        warning=warning,
    )


def admissible_nodes(
    lattice: Lattice,
    offset: Sequence[int],
    region: Optional[Sequence[tuple[float, float]]] = None,
) -> NDArray[np.bool_]:
    """Boolean mask of nodes x with x + offset still inside the lattice.

    Periodic axes wrap, so every node is admissible there.  When a
    planar sub-box ``region`` is given, both x and x + offset must have
    their planar coordinates in the region (the discrete localized
    admissible set).
    """
    mask = np.ones(lattice.shape, dtype=bool)
    for ax in range(lattice.ndim):
        k = int(offset[ax])
        n = lattice.node_counts[ax]
        if lattice.periodic[ax]:
            continue
        idx = np.arange(n)
        ok = (idx + k >= 0) & (idx + k <= n - 1)
        shape = [1] * lattice.ndim
        shape[ax] = -1
        mask &= ok.reshape(shape)
    if region is not None:
        planar_axes = [ax for ax in range(lattice.ndim) if ax != lattice.vertical_axis]
        if len(region) != len(planar_axes):
            raise ValueError("region must give one interval per planar axis")
        tol = 1e-12
        for (lo, hi), ax in zip(region, planar_axes):
            x = lattice.axis_coords(ax)
            shift = offset[ax] * lattice.spacing[ax]
            ok = (x >= lo - tol) & (x <= hi + tol)
            ok &= (x + shift >= lo - tol) & (x + shift <= hi + tol)
            shape = [1] * lattice.ndim
            shape[ax] = -1
            mask &= ok.reshape(shape)
    return mask


def shifted_values(values: NDArray, offset: Sequence[int]) -> NDArray:
    """Values at x + offset, wrapping on every axis.

    Non-periodic axes produce wrapped garbage outside the admissible
    set; callers must mask with admissible_nodes.
    """
    shift = tuple(-int(k) for k in offset)
    axes = tuple(range(len(shift)))
    return np.roll(values, shift=shift, axis=axes)
