"""
Integrand families f(x, xi, z) with convexity/symmetry metadata.

Every built-in density is x-independent; the x argument is kept in the
evaluation signature so that x-periodic extensions slot in without
changing the energy code.  Evaluation is vectorized over nodes: for a
fixed offset xi, ``eval(x, xi, z)`` takes z of shape (N, m) and returns
(N,) values, and ``grad_z`` returns (N, m).

The growth metadata ties each density to a kernel pair (psi, rho) and
constants (c1, c2) with
    c1 (psi |z|^p - rho)  <=  f(x, xi, z)  <=  c2 (psi |z|^p + rho),
which growth_check samples and certifies with witnesses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

from .kernels import Kernel, cylinder_indicator

__all__ = [
    "Density",
    "GrowthReport",
    "pure_convolution",
    "homogeneous_convex",
    "rotation_example",
    "growth_check",
]


@dataclass(frozen=True)
class GrowthConstants:
    c1: float
    c2: float
    kernel: Kernel
    p: float


@dataclass(frozen=True)
class Density:
    """Pointwise integrand with metadata used by solvers and formulas."""

    family: str
    codomain_dim_hint: Optional[int]
    eval_fn: Callable[[Optional[NDArray], NDArray, NDArray], NDArray]
    grad_z_fn: Callable[[Optional[NDArray], NDArray, NDArray], NDArray]
    is_convex_in_z: bool
    growth: Optional[GrowthConstants] = None
    x_periodic_cell: Optional[str] = None
    depends_on_vertical_x: bool = False
    depends_on_vertical_xi: bool = True
    vertical_xi_even: bool = True
    params: dict = field(default_factory=dict)

    def eval(self, x: Optional[NDArray], xi: NDArray, z: NDArray) -> NDArray:
        return self.eval_fn(x, np.asarray(xi, float), np.atleast_2d(z))

    def grad_z(self, x: Optional[NDArray], xi: NDArray, z: NDArray) -> NDArray:
        return self.grad_z_fn(x, np.asarray(xi, float), np.atleast_2d(z))


def _pnorm_pow(z: NDArray, p: float) -> NDArray:
    nsq = np.sum(np.square(z), axis=-1)
    if p == 2.0:
        return nsq
    return nsq ** (p / 2.0)


def _pnorm_grad(z: NDArray, p: float) -> NDArray:
    """Gradient of |z|^p, subgradient 0 at the origin for p < 2."""
    nsq = np.sum(np.square(z), axis=-1)
    if p == 2.0:
        return 2.0 * z
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(nsq > 0, p * nsq ** (p / 2.0 - 1.0), 0.0)
    return factor[..., None] * z


def pure_convolution(r: float, p: float) -> Density:
    """f(x, xi, z) = chi_{C_r}(xi) |z|^p on the cylinder B_r x (-r, r)."""
    if r <= 0 or p <= 1:
        raise ValueError("need r > 0 and p > 1")

    def indicator(xi):
        s = np.linalg.norm(xi[:-1]) if xi.ndim == 1 else None
        return 1.0 if (s < r and abs(xi[-1]) < r) else 0.0

    def eval_fn(x, xi, z):
        return indicator(xi) * _pnorm_pow(z, p)

    def grad_fn(x, xi, z):
        return indicator(xi) * _pnorm_grad(z, p)

    return Density(
        family=f"pure_convolution(r={r}, p={p})",
        codomain_dim_hint=None,
        eval_fn=eval_fn,
        grad_z_fn=grad_fn,
        is_convex_in_z=True,
        growth=GrowthConstants(1.0, 1.0, cylinder_indicator(r), p),
        params={"r": r, "p": p},
    )


def homogeneous_convex(kernel_a: Kernel, p: float) -> Density:
    """f(x, xi, z) = a(xi) |z|^p for a nonnegative weight a."""
    if p <= 1:
        raise ValueError("p must exceed 1")

    def eval_fn(x, xi, z):
        a = float(kernel_a.eval(xi[None, :])[0])
        return a * _pnorm_pow(z, p)

    def grad_fn(x, xi, z):
        a = float(kernel_a.eval(xi[None, :])[0])
        return a * _pnorm_grad(z, p)

    return Density(
        family=f"homogeneous_convex[{kernel_a.family}](p={p})",
        codomain_dim_hint=None,
        eval_fn=eval_fn,
        grad_z_fn=grad_fn,
        is_convex_in_z=True,
        growth=GrowthConstants(1.0, 1.0, kernel_a, p),
        params={"kernel": kernel_a, "p": p},
    )


def _cyl_measure(eta: float, d: int) -> float:
    """Volume of one cylinder B_eta x (-eta, eta) in R^d."""
    ball = math.pi ** ((d - 1) / 2.0) / math.gamma((d - 1) / 2.0 + 1.0)
    return ball * eta ** (d - 1) * 2.0 * eta


def rotation_example(eta: float, p: float, d: int = 3) -> Density:
    """The orientation-sensitive example with two off-axis bump terms.

    f(xi, z) = chi_{C_1}(xi) * (|z|/|xi| - 1)^p
             + |C_eta|^{-1} [ chi_{C_eta(e1 +- ed)}(xi) |z - e1|^p
                            + chi_{C_eta(e2 +- ed)}(xi) |z - e2|^p ]

    Each bump region is the union of the two small cylinders centered at
    e_i + e_d and e_i - e_d; |C_eta| is the measure of ONE cylinder, so
    the induced xi-averages carry the factor 2 used in the closed-form
    bounds.  The first term makes f non-convex in z.  The convex bump
    part alone is exposed via ``params["bump_part"]`` for the
    lower-bound experiment.
    """
    if d < 3:
        raise ValueError("the rotation example needs d = m >= 3")
    if not 0 < eta < 0.5:
        raise ValueError("eta must lie in (0, 1/2)")
    if p <= 1:
        raise ValueError("p must exceed 1")

    inv_meas = 1.0 / _cyl_measure(eta, d)
    e1 = np.zeros(d)
    e1[0] = 1.0
    e2 = np.zeros(d)
    e2[1] = 1.0

    def region_flags(xi):
        s = np.linalg.norm(xi[:-1])
        t = xi[-1]
        in_c1 = (s < 1.0) and (abs(t) < 1.0)
        in_b1 = (np.linalg.norm(xi[:-1] - e1[:-1]) < eta) and (abs(abs(t) - 1.0) < eta)
        in_b2 = (np.linalg.norm(xi[:-1] - e2[:-1]) < eta) and (abs(abs(t) - 1.0) < eta)
        return in_c1, in_b1, in_b2

    def eval_fn(x, xi, z):
        in_c1, in_b1, in_b2 = region_flags(xi)
        out = np.zeros(z.shape[0])
        if in_c1:
            nrm = float(np.linalg.norm(xi))
            if nrm == 0.0:
                raise ValueError("rotation example integrand undefined at xi = 0")
            t = np.sqrt(np.sum(np.square(z), axis=-1)) / nrm
            if p == 2.0:
                out += np.square(t - 1.0)
            else:
                out += np.abs(t - 1.0) ** p
        if in_b1:
            out += inv_meas * _pnorm_pow(z - e1, p)
        if in_b2:
            out += inv_meas * _pnorm_pow(z - e2, p)
        return out

    def grad_fn(x, xi, z):
        in_c1, in_b1, in_b2 = region_flags(xi)
        out = np.zeros_like(z)
        if in_c1:
            nrm = float(np.linalg.norm(xi))
            if nrm == 0.0:
                raise ValueError("rotation example integrand undefined at xi = 0")
            zn = np.sqrt(np.sum(np.square(z), axis=-1))
            t = zn / nrm
            with np.errstate(divide="ignore", invalid="ignore"):
                # d/dz |t-1|^p with subgradient 0 at z = 0 and at the kink
                if p == 2.0:
                    slope = 2.0 * (t - 1.0)
                else:
                    slope = p * np.abs(t - 1.0) ** (p - 1.0) * np.sign(t - 1.0)
                coef = np.where(
                    zn > 0,
                    slope / (nrm * np.where(zn > 0, zn, 1.0)),
                    0.0,
                )
            out += coef[..., None] * z
        if in_b1:
            out += inv_meas * _pnorm_grad(z - e1, p)
        if in_b2:
            out += inv_meas * _pnorm_grad(z - e2, p)
        return out

    def bump_eval(x, xi, z):
        _, in_b1, in_b2 = region_flags(xi)
        out = np.zeros(z.shape[0])
        if in_b1:
            out += inv_meas * _pnorm_pow(z - e1, p)
        if in_b2:
            out += inv_meas * _pnorm_pow(z - e2, p)
        return out

    def bump_grad(x, xi, z):
        _, in_b1, in_b2 = region_flags(xi)
        out = np.zeros_like(z)
        if in_b1:
            out += inv_meas * _pnorm_grad(z - e1, p)
        if in_b2:
            out += inv_meas * _pnorm_grad(z - e2, p)
        return out

    bump_part = Density(
        family=f"rotation_example_bumps(eta={eta}, p={p}, d={d})",
        codomain_dim_hint=d,
        eval_fn=bump_eval,
        grad_z_fn=bump_grad,
        is_convex_in_z=True,
        params={"eta": eta, "p": p, "d": d},
    )

    # growth envelope with exact (non-radial) supports:
    #   psi = chi_{C_1} |xi|^{-p} + |C_eta|^{-1} chi_bumps,
    #   rho = 2^p (chi_{C_1} + |C_eta|^{-1} chi_bumps),
    # giving c1 = 2^{-p}, c2 = 2^{p-1} for both terms
    growth_kernel = _rotation_envelope_kernel(eta, d, inv_meas, p, region_flags)

    return Density(
        family=f"rotation_example(eta={eta}, p={p}, d={d})",
        codomain_dim_hint=d,
        eval_fn=eval_fn,
        grad_z_fn=grad_fn,
        is_convex_in_z=False,
        growth=GrowthConstants(
            c1=2.0 ** (-p),
            c2=2.0 ** (p - 1.0),
            kernel=growth_kernel,
            p=p,
        ),
        params={"eta": eta, "p": p, "d": d, "bump_part": bump_part},
    )


def _rotation_envelope_kernel(eta, d, inv_meas, p, region_flags) -> Kernel:
    """Exact-support envelope for the rotation example (cartesian eval
    only; its off-axis bumps are not planar-radial, so the moment
    machinery refuses it by design)."""

    def cart_psi(pts):
        out = np.zeros(len(pts))
        for i, xi in enumerate(pts):
            in_c1, in_b1, in_b2 = region_flags(xi)
            v = 0.0
            if in_c1:
                v += float(np.linalg.norm(xi)) ** (-p)
            if in_b1:
                v += inv_meas
            if in_b2:
                v += inv_meas
            out[i] = v
        return out

    def cart_rho(pts):
        out = np.zeros(len(pts))
        base = 2.0 ** p
        for i, xi in enumerate(pts):
            in_c1, in_b1, in_b2 = region_flags(xi)
            v = 0.0
            if in_c1:
                v += base
            if in_b1:
                v += base * inv_meas
            if in_b2:
                v += base * inv_meas
            out[i] = v
        return out

    def profile(s, t):  # radial over-estimate, unused by growth_check
        s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
        return ((s < 1.0 + eta) & (np.abs(t) < 1.0 + eta)).astype(float)

    return Kernel(
        family=f"rotation_envelope(eta={eta})",
        dim=d,
        profile=profile,
        planar_support_radius=1.0 + eta,
        vertical_support_halfheight=1.0 + eta,
        coercivity=(0.5, 1.0),
        params={"eta": eta},
        cartesian_profile=cart_psi,
        cartesian_rho=cart_rho,
    )


@dataclass(frozen=True)
class GrowthViolation:
    x: Optional[tuple]
    xi: tuple
    z: tuple
    f_value: float
    lower: float
    upper: float


@dataclass(frozen=True)
class GrowthReport:
    n_samples: int
    violations: list[GrowthViolation]

    @property
    def passed(self) -> bool:
        return not self.violations


def growth_check(density: Density, n_samples: int = 1000, seed: int = 0) -> GrowthReport:
    """Sample (xi, z) and check the two-sided growth inequality."""
    if density.growth is None:
        raise ValueError("density carries no growth metadata")
    g = density.growth
    rng = np.random.default_rng(seed)
    d = g.kernel.dim
    m = density.codomain_dim_hint or 1
    span = min(g.kernel.planar_support_radius, 5.0) + 1.0
    vspan = min(g.kernel.vertical_support_halfheight, 5.0) + 1.0

    violations = []
    for _ in range(n_samples):
        xi = np.concatenate(
            [rng.uniform(-span, span, size=d - 1), rng.uniform(-vspan, vspan, size=1)]
        )
        if np.linalg.norm(xi) < 1e-6:
            continue
        z = rng.normal(scale=2.0, size=(1, m))
        f_val = float(density.eval(None, xi, z)[0])
        psi = float(g.kernel.eval(xi[None, :])[0])
        rho = float(g.kernel.envelope_rho(xi[None, :])[0])
        znorm_p = float(np.sum(z * z) ** (g.p / 2.0))
        lower = g.c1 * (psi * znorm_p - rho)
        upper = g.c2 * (psi * znorm_p + rho)
        tol = 1e-9 * (1.0 + abs(f_val) + abs(upper))
        if f_val < lower - tol or f_val > upper + tol:
            violations.append(
                GrowthViolation(
                    x=None,
                    xi=tuple(xi),
                    z=tuple(z.ravel()),
                    f_value=f_val,
                    lower=lower,
                    upper=upper,
                )
            )
    return GrowthReport(n_samples=n_samples, violations=violations)
