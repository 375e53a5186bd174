"""
Interaction kernels, their moment statistics, and the admissibility audit.

A kernel is a nonnegative weight psi(xi) on R^d controlling how strongly
a pair of points at offset xi interacts, together with an additive
envelope rho(xi) used by the growth conditions.  All built-in families
are planar-radial: psi depends on xi only through the planar radius
s = |xi_alpha| and the vertical coordinate t = xi_d, which reduces every
moment integral to a nested 1-D quadrature with the surface factor of
the (d-1)-dimensional sphere.

The audit checks five admissibility conditions:
    H0  coercivity: psi >= c0 on the cylinder B_{r0} x (-r0, r0);
    H1  finite p-moment of psi;
    H2  the planar tail of the p-moment (plus envelope) decays to 0;
    H3  the vertical slice integrals int (psi |xi|^p + rho) dxi_alpha
        are bounded uniformly over |xi_d| < 2;
    H4  the tail version of H3 decays with the planar tail radius.
H3/H4 are the thin-domain-specific conditions: a kernel can have finite
moments yet concentrate too much mass on thin horizontal slabs, and the
slice statistic is what detects it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import quad

__all__ = [
    "Kernel",
    "HypothesisReport",
    "DivergenceError",
    "cylinder_indicator",
    "mollifier_over_norm_p",
    "separable",
    "vertical_singular",
    "moment_p",
    "tail_moment",
    "vertical_slice_sup",
    "audit_hypotheses",
]

#: relative tolerance declared for moment quadratures
MOMENT_RTOL = 1e-4

#: eta ladder used by the H2/H4 decay checks
ETA_LADDER = (1e-1, 1e-2, 1e-3, 1e-4)


class DivergenceError(ValueError):
    """A moment or slice statistic failed its convergence test."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


def _zero_profile(s, t):
    return np.zeros(np.broadcast(s, t).shape)


@dataclass(frozen=True)
class Kernel:
    """Planar-radial interaction weight psi with envelope rho.

    ``profile(s, t)`` evaluates psi at planar radius s >= 0 and vertical
    coordinate t; ``rho_profile`` likewise for the envelope.  Support
    descriptors may be inf (then stencil construction requires an
    explicit truncation radius).
    """

    family: str
    dim: int
    profile: Callable[[NDArray, NDArray], NDArray]
    planar_support_radius: float
    vertical_support_halfheight: float
    coercivity: tuple[float, float]
    rho_profile: Callable[[NDArray, NDArray], NDArray] = _zero_profile
    params: dict = field(default_factory=dict)
    singular_at_zero_height: bool = False
    # non-radial kernels (growth envelopes with off-axis supports) carry
    # exact cartesian evaluators; moment statistics refuse them
    cartesian_profile: Optional[Callable[[NDArray], NDArray]] = None
    cartesian_rho: Optional[Callable[[NDArray], NDArray]] = None

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("kernels live on R^d with d >= 2")
        r0, c0 = self.coercivity
        if r0 <= 0 or c0 <= 0:
            raise ValueError("coercivity pair must be positive")

    @property
    def planar_dim(self) -> int:
        return self.dim - 1

    def eval(self, points: NDArray) -> NDArray:
        """psi at an (N, d) array of xi points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.cartesian_profile is not None:
            return np.asarray(self.cartesian_profile(pts), dtype=float)
        s = np.linalg.norm(pts[:, :-1], axis=1)
        return np.asarray(self.profile(s, pts[:, -1]), dtype=float)

    def envelope_rho(self, points: NDArray) -> NDArray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.cartesian_rho is not None:
            return np.asarray(self.cartesian_rho(pts), dtype=float)
        s = np.linalg.norm(pts[:, :-1], axis=1)
        return np.asarray(self.rho_profile(s, pts[:, -1]), dtype=float)


@dataclass(frozen=True)
class HypothesisEntry:
    passed: bool
    statistic: float
    tolerance: float
    detail: str = ""


@dataclass(frozen=True)
class HypothesisReport:
    """Outcome of the five-condition kernel audit."""

    kernel_family: str
    p: float
    entries: dict[str, HypothesisEntry]

    @property
    def passed_all(self) -> bool:
        return all(e.passed for e in self.entries.values())

    def to_json(self) -> str:
        return json.dumps(
            {
                "kernel_family": self.kernel_family,
                "p": self.p,
                "passed_all": self.passed_all,
                "entries": {
                    name: {
                        "passed": e.passed,
                        "statistic": e.statistic,
                        "tolerance": e.tolerance,
                        "detail": e.detail,
                    }
                    for name, e in self.entries.items()
                },
            }
        )


# ---------------------------------------------------------------------------
# built-in families
# ---------------------------------------------------------------------------


def cylinder_indicator(r: float, dim: int = 2) -> Kernel:
    """Indicator of the cylinder B_r x (-r, r)."""
    if r <= 0:
        raise ValueError("r must be positive")

    def profile(s, t):
        s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
        return ((s < r) & (np.abs(t) < r)).astype(float)

    return Kernel(
        family=f"cylinder_indicator({r})",
        dim=dim,
        profile=profile,
        planar_support_radius=r,
        vertical_support_halfheight=r,
        coercivity=(r, 1.0),
        params={"r": r},
    )


def _bump(rsq):
    """C^infty bump exp(1 - 1/(1-|xi|^2)) on the unit ball, 1 at 0."""
    out = np.zeros_like(rsq)
    inside = rsq < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - rsq[inside]))
    return out


def mollifier_over_norm_p(p: float, dim: int = 2) -> Kernel:
    """psi(xi) = phi(xi) |xi|^{-p} with a smooth bump phi supported in B_1.

    The |xi|^{-p} singularity is exactly cancelled by the |xi|^p factor
    in every moment statistic, so the audit passes all five conditions.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")

    def profile(s, t):
        s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
        rsq = s * s + t * t
        with np.errstate(divide="ignore"):
            norm_term = np.where(rsq > 0, rsq ** (-p / 2.0), np.inf)
        return _bump(rsq) * norm_term

    return Kernel(
        family=f"mollifier_over_norm_p(p={p})",
        dim=dim,
        profile=profile,
        planar_support_radius=1.0,
        vertical_support_halfheight=1.0,
        # on C_0.3 the bump stays above 0.5 and |xi|^{-p} >= 1
        coercivity=(0.3, 0.5),
        params={"p": p},
    )


def separable(
    psi_alpha: Callable[[NDArray], NDArray],
    psi_d: Callable[[NDArray], NDArray],
    dim: int = 2,
    planar_support_radius: float = np.inf,
    vertical_support_halfheight: float = np.inf,
    coercivity: tuple[float, float] = (1.0, 0.1),
    tag: str = "separable",
) -> Kernel:
    """Product kernel psi_alpha(|xi_alpha|) * psi_d(xi_d)."""

    def profile(s, t):
        s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
        return np.asarray(psi_alpha(s), float) * np.asarray(psi_d(t), float)

    return Kernel(
        family=tag,
        dim=dim,
        profile=profile,
        planar_support_radius=planar_support_radius,
        vertical_support_halfheight=vertical_support_halfheight,
        coercivity=coercivity,
        params={"psi_alpha": psi_alpha, "psi_d": psi_d},
    )


def gaussian_separable(dim: int = 2) -> Kernel:
    """The stock separable example: Gaussian profiles in both factors."""
    return separable(
        psi_alpha=lambda s: np.exp(-np.square(s)),
        psi_d=lambda t: np.exp(-np.square(t)),
        dim=dim,
        coercivity=(1.0, 0.1),
        tag="gaussian_separable",
    )


def vertical_singular(beta: float, dim: int = 2) -> Kernel:
    """chi_{C_1}(xi) |xi_d|^{-beta}: integrable for beta < 1 but piles
    mass on horizontal slabs, the stock H3 counterexample."""
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")

    def profile(s, t):
        s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
        inside = (s < 1.0) & (np.abs(t) < 1.0)
        with np.errstate(divide="ignore"):
            sing = np.where(np.abs(t) > 0, np.abs(t) ** (-beta), np.inf)
        return np.where(inside, sing, 0.0)

    return Kernel(
        family=f"vertical_singular(beta={beta})",
        dim=dim,
        profile=profile,
        planar_support_radius=1.0,
        vertical_support_halfheight=1.0,
        coercivity=(1.0, 1.0),
        params={"beta": beta},
        singular_at_zero_height=True,
    )


# ---------------------------------------------------------------------------
# moment statistics
# ---------------------------------------------------------------------------


def _sphere_surface_factor(n: int) -> Callable[[NDArray], NDArray]:
    """Surface measure of the radius-s sphere in R^n (n = planar dim)."""
    if n == 1:
        return lambda s: 2.0 * np.ones_like(np.asarray(s, float))
    coeff = n * math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)
    return lambda s: coeff * np.asarray(s, float) ** (n - 1)


def _planar_cutoff(kernel: Kernel) -> float:
    if np.isfinite(kernel.planar_support_radius):
        return kernel.planar_support_radius
    return 40.0  # Gaussian-class tails are below 1e-300 here


def _vertical_cutoff(kernel: Kernel) -> float:
    if np.isfinite(kernel.vertical_support_halfheight):
        return kernel.vertical_support_halfheight
    return 40.0


def _slice_integral(
    kernel: Kernel, p: float, t: float, s_lo: float = 0.0, include_rho: bool = True
) -> float:
    """int_{|xi_alpha| > s_lo} (psi |xi|^p + rho) dxi_alpha at height t."""
    if kernel.cartesian_profile is not None:
        raise ValueError("non-radial kernel: moment statistics unavailable")
    surf = _sphere_surface_factor(kernel.planar_dim)
    s_hi = _planar_cutoff(kernel)
    if s_lo >= s_hi:
        return 0.0

    def integrand(s):
        val = kernel.profile(np.array([s]), np.array([t]))[0]
        out = val * (s * s + t * t) ** (p / 2.0)
        if include_rho:
            out += kernel.rho_profile(np.array([s]), np.array([t]))[0]
        return float(surf(np.array([s]))[0]) * out

    val, _ = quad(integrand, s_lo, s_hi, epsrel=MOMENT_RTOL, epsabs=1e-12, limit=200)
    return val


def _vertical_panels(kernel: Kernel, p: float, s_lo: float = 0.0, include_rho: bool = True):
    """Integrate the slice function over |t| with geometric panels near 0.

    Returns (total, panel_increments).  The panels shrink toward the
    potential singularity at t = 0; a Cauchy test on their increments
    detects divergence (factor-2 refinement, growth threshold per the
    module contract).
    """
    t_hi = _vertical_cutoff(kernel)
    g = lambda t: _slice_integral(kernel, p, t, s_lo=s_lo, include_rho=include_rho)
    n_panels = 26
    edges = [t_hi * 2.0 ** (-j) for j in range(n_panels + 1)]
    increments = []
    total = 0.0
    for a, b in zip(edges[1:], edges[:-1]):
        val, _ = quad(g, a, b, epsrel=MOMENT_RTOL, epsabs=1e-13, limit=100)
        increments.append(val)
        total += val
    # innermost sliver (0, edges[-1]): extrapolate from the panel trend
    tail = increments[-1]
    if increments[-2] > 0 and increments[-1] > 0:
        ratio = increments[-1] / increments[-2]
        if ratio < 0.95:
            tail = increments[-1] * ratio / (1.0 - ratio)
    total += tail
    return 2.0 * total, increments


def _check_cauchy(increments, context: str):
    tail = [v for v in increments[-6:] if v > 1e-300]
    if len(tail) >= 3:
        ratios = [b / a for a, b in zip(tail, tail[1:])]
        if all(r >= 1.0 - 1e-9 for r in ratios) and tail[-1] > 1e-12:
            raise DivergenceError(
                f"{context}: panel increments fail the Cauchy test near xi_d = 0",
                witness=tail,
            )


def moment_p(kernel: Kernel, p: float) -> float:
    """int psi(xi) |xi|^p dxi, within the declared relative tolerance.

    The envelope rho does not enter the bare p-moment; it belongs to the
    tail and slice statistics only.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    total, increments = _vertical_panels(kernel, p, s_lo=0.0, include_rho=False)
    _check_cauchy(increments, "moment_p")
    return total


def tail_moment(kernel: Kernel, p: float, r: float) -> float:
    """Planar-tail statistic int_{|xi_alpha| > r} (psi |xi|^p + rho) dxi."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    total, increments = _vertical_panels(kernel, p, s_lo=r)
    _check_cauchy(increments, "tail_moment")
    return total


def vertical_slice_sup(
    kernel: Kernel, p: float, tail_radius: Optional[float] = None
) -> float:
    """sup over sampled |xi_d| < 2 of the slice integral.

    Divergence near xi_d = 0 is detected by the growth of the statistic
    along a geometric sample sequence t_j = 2^{-j}; a persistent
    log-log growth slope flags the kernel and reports the witnessing
    heights.
    """
    s_lo = 0.0 if tail_radius is None else tail_radius
    uniform = np.linspace(0.0, 2.0, 41)[:-1]  # sup over |xi_d| < 2, open
    geometric = [2.0 ** (-j) for j in range(31)]
    g_geo = np.array([_slice_integral(kernel, p, t, s_lo=s_lo) for t in geometric])

    finite = np.isfinite(g_geo)
    if not finite.all() and g_geo[finite].size and g_geo[finite].max() > 0:
        raise DivergenceError(
            "divergent slice sup: non-finite slice integral near xi_d = 0",
            witness=[t for t, ok in zip(geometric, finite) if not ok],
        )
    # fitted growth exponent of g(t) ~ t^slope over the small-t samples
    lo, hi = 10, 31
    mask = g_geo[lo:hi] > 1e-300
    if mask.sum() >= 5:
        ts = np.log([geometric[lo + i] for i in range(hi - lo) if mask[i]])
        gs = np.log(g_geo[lo:hi][mask])
        slope = np.polyfit(ts, gs, 1)[0]
        if slope < -0.05 and g_geo[hi - 1] > 2.0 * max(g_geo[0], 1e-300):
            raise DivergenceError(
                f"divergent slice sup: statistic grows like t^{slope:.3f} as xi_d -> 0",
                witness=geometric[lo:hi],
            )
    g_uni = np.array([_slice_integral(kernel, p, t, s_lo=s_lo) for t in uniform[1:]])
    g0 = _slice_integral(kernel, p, 0.0, s_lo=s_lo)
    candidates = [g0] if np.isfinite(g0) else []
    return float(max([*candidates, g_geo.max(initial=0.0), g_uni.max(initial=0.0)]))


def _coercivity_ok(kernel: Kernel) -> tuple[bool, float]:
    r0, c0 = kernel.coercivity
    # cell-center samples over the coercivity cylinder
    s = np.linspace(0.0, r0, 24, endpoint=False) + r0 / 48.0
    t = np.linspace(-r0, r0, 25, endpoint=False) + r0 / 25.0
    ss, tt = np.meshgrid(s, t, indexing="ij")
    vals = kernel.profile(ss.ravel(), tt.ravel())
    min_val = float(np.min(vals))
    return min_val >= c0 - 1e-12, min_val


def _decay_radius(stat: Callable[[float], float], eta: float, r_start: float) -> Optional[float]:
    r = r_start
    for _ in range(40):
        if stat(r) < eta:
            return r
        r *= 2.0
    return None


def audit_hypotheses(kernel: Kernel, p: float) -> HypothesisReport:
    """Run the H0-H4 audit; failures are report entries, never raises."""
    entries: dict[str, HypothesisEntry] = {}

    ok, min_val = _coercivity_ok(kernel)
    entries["H0"] = HypothesisEntry(
        passed=ok,
        statistic=min_val,
        tolerance=kernel.coercivity[1],
        detail="sampled min over the coercivity cylinder (grid certificate only)",
    )

    try:
        m = moment_p(kernel, p)
        entries["H1"] = HypothesisEntry(True, m, MOMENT_RTOL, "p-moment finite")
    except DivergenceError as exc:
        entries["H1"] = HypothesisEntry(False, math.inf, MOMENT_RTOL, str(exc))

    worst_r = 0.0
    h2_ok = True
    for eta in ETA_LADDER:
        r_eta = _decay_radius(lambda r: tail_moment(kernel, p, r), eta, 1.0)
        if r_eta is None:
            h2_ok = False
            break
        worst_r = max(worst_r, r_eta)
    entries["H2"] = HypothesisEntry(
        passed=h2_ok,
        statistic=worst_r,
        tolerance=ETA_LADDER[-1],
        detail="largest witnessing tail radius over the eta ladder",
    )

    try:
        sup3 = vertical_slice_sup(kernel, p)
        entries["H3"] = HypothesisEntry(True, sup3, 0.0, "slice sup finite")
    except DivergenceError as exc:
        entries["H3"] = HypothesisEntry(
            False, math.inf, 0.0, f"{exc} (witness heights {exc.witness[:3]}...)"
        )

    worst_r4 = 0.0
    h4_ok = True
    for eta in ETA_LADDER:
        def stat(r):
            try:
                return vertical_slice_sup(kernel, p, tail_radius=r)
            except DivergenceError:
                return math.inf

        r_eta = _decay_radius(stat, eta, 1.0)
        if r_eta is None:
            h4_ok = False
            break
        worst_r4 = max(worst_r4, r_eta)
    entries["H4"] = HypothesisEntry(
        passed=h4_ok,
        statistic=worst_r4,
        tolerance=ETA_LADDER[-1],
        detail="largest witnessing tail radius over the eta ladder",
    )

    return HypothesisReport(kernel_family=kernel.family, p=p, entries=entries)
