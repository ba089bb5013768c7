"""Popov absolute-stability analysis of the wire-driven joint.

Treating the damping ``K_d`` as a constant and the virtual stiffness as a
memoryless gain in ``[0, K]``, the loop plant is::

    P(s) = K_w / (a s^4 + b s^3 + c s^2 + d s)

The Popov plot is ``(Re P(jw), w Im P(jw))``.  The closed-form bound takes
the single real-axis crossing at ``w0 = sqrt(d / b)``; that value is the
largest constant gain the loop tolerates, and it equals the Popov sector
bound only when some admissible Popov line touches the locus at the crossing.
:func:`kvs_max_numeric` searches the Popov line slope directly and is the
rigorous sufficient-condition bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .control import GainSchedule, compensate_wire, reflected_wire_stiffness
from .kinematics import LegGeometry
from .plant import PlantParams


class SingularFrequencyError(ZeroDivisionError):
    pass


class NoCertifiedRangeError(ValueError):
    pass


class GridResolutionError(ValueError):
    pass


class CertificationError(ValueError):
    def __init__(self, K_d: float, ratio: float):
        super().__init__(f"schedule not certified: stiffness uses {ratio:.3g} of the allowed "
                         f"margin at K_d = {K_d:.6g} N*m*s/rad")
        self.K_d = K_d
        self.ratio = ratio


@dataclass(frozen=True)
class PopovCoeffs:
    a: float
    b: float
    c: float
    d: float

    @property
    def omega_0(self) -> float:
        return math.sqrt(self.d / self.b)


@dataclass
class StabilityReport:
    omega_0: float
    re_at_omega0: float
    kvs_max_closed: float
    kvs_max_numeric: float
    margin_used: float
    certified: bool
    worst_K_d: float
    K_vs_peak: float
    margin: float
    bound: str = "popov"

    @property
    def relative_gap(self) -> float:
        """Relative amount by which the closed form exceeds the Popov bound."""
        return (self.kvs_max_closed - self.kvs_max_numeric) / self.kvs_max_closed


def popov_coeffs(params: PlantParams, K_d: float) -> PopovCoeffs:
    if K_d < 0:
        raise ValueError(f"K_d must be non-negative, got {K_d}")
    J_m, B_m, J_l, B_l, K_w = params.J_m, params.B_m, params.J_l, params.B_l, params.K_w
    return PopovCoeffs(
        a=J_l * J_m,
        b=J_m * B_l + J_l * B_m,
        c=J_m * K_w + J_l * K_w + B_l * B_m,
        d=K_w * B_m + K_w * B_l + K_d * K_w,
    )


def popov_point(coeffs: PopovCoeffs, K_w: float, omega):
    """``(Re P(jw), w * Im P(jw))``; accepts scalars or arrays."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("omega must be positive")
    a, b, c, d = coeffs.a, coeffs.b, coeffs.c, coeffs.d
    real = a * w**4 - c * w**2
    imag_w = w**2 * (d - b * w**2)
    D = real**2 + w**2 * (d - b * w**2) ** 2
    if np.any(D == 0):
        raise SingularFrequencyError("P(jw) has a pole on the imaginary axis at this frequency")
    re = K_w * real / D
    wim = -K_w * imag_w / D
    if np.ndim(omega) == 0:
        return float(re), float(wim)
    return re, wim


def kvs_max_closed_form(params: PlantParams, K_d: float) -> float:
    """Stiffness bound from the real-axis crossing of the Popov plot (N*m/rad)."""
    if not K_d > 0:
        raise ValueError(f"K_d must be > 0, got {K_d}")
    J_m, B_m, J_l, B_l, K_w = params.J_m, params.B_m, params.J_l, params.B_l, params.K_w
    B = B_m + B_l + K_d
    b = J_m * B_l + J_l * B_m
    value = (J_m * K_w + J_l * K_w + B_l * B_m) * B / b - J_m * J_l * K_w * B**2 / b**2
    if not value > 0:
        raise NoCertifiedRangeError(f"no certified stiffness range at K_d = {K_d:g}")
    return value


def transfer_locus(num, den):
    """Popov-plot function of a rational transfer function given by coefficients."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)

    def locus(w):
        s = 1j * np.asarray(w, dtype=float)
        P = np.polyval(num, s) / np.polyval(den, s)
        return P.real, np.asarray(w) * P.imag

    return locus


def default_grid(omega_0: float, decades: float = 4.0, points: int = 4001) -> np.ndarray:
    return np.logspace(math.log10(omega_0) - decades, math.log10(omega_0) + decades, points)


def _min_along(locus, w, q, refine, extra=()):
    X, Y = locus(w)
    f = X - q * Y
    i = int(np.argmin(f))
    best = float(f[i])
    for x0, y0 in extra:
        best = min(best, x0 - q * y0)
    if not refine:
        return best, i
    # every interior local minimum of the sampled curve may hide a deeper dip
    inner = np.flatnonzero((f[1:-1] <= f[:-2]) & (f[1:-1] <= f[2:])) + 1

    def h(u):
        x, y = locus(np.array([math.exp(u)]))
        return float(x[0] - q * y[0])

    for j in inner:
        lo, hi = math.log(w[j - 1]), math.log(w[j + 1])
        res = minimize_scalar(h, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, abs(lo))})
        best = min(best, float(res.fun))
    return best, i


def popov_bound(locus, omega_grid, refine: bool = True, limits=()) -> float:
    """Largest ``K`` with the locus right of a Popov line through ``(-1/K, 0)``.

    For each slope parameter ``q >= 0`` the supporting abscissa is
    ``min_w (Re P - q w Im P)``; the bound is ``-1 / max_q`` of it, or
    ``inf`` when the locus can be kept in the right half-plane.  ``limits``
    lists locus points outside the grid (for instance the ``w -> 0`` limit)
    that take part in the minimum.
    """
    return popov_line(locus, omega_grid, refine, limits)[0]


def popov_line(locus, omega_grid, refine: bool = True, limits=()):
    """``(K, q)``: the bound of :func:`popov_bound` and the slope parameter
    of the line achieving it (the line is ``x - q y = -1/K``)."""
    w = np.sort(np.asarray(omega_grid, dtype=float))
    if w[0] <= 0:
        raise ValueError("omega grid must be positive")

    def g(q):
        return _min_along(locus, w, q, refine, limits)[0]

    g0 = g(0.0)
    qs = np.concatenate([[0.0], np.logspace(math.log10(1e-3 / w[-1]),
                                            math.log10(1e3 / w[0]), 241)])
    X, Y = locus(w)
    coarse = np.array([min([np.min(X - q * Y)] + [x0 - q * y0 for x0, y0 in limits])
                       for q in qs])
    k = int(np.argmax(coarse))
    best_q, best_val = 0.0, g0
    if k > 0:
        lo = qs[k - 1]
        hi = qs[min(k + 1, len(qs) - 1)]
        res = minimize_scalar(lambda q: -g(q), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14 + 1e-10 * hi})
        for cand in (lo, hi, float(res.x), float(qs[k])):
            val = g(cand)
            if val > best_val:
                best_q, best_val = cand, val
    if best_val >= 0.0:
        return math.inf, best_q
    f = X - best_q * Y
    i = int(np.argmin(f))
    if (i == 0 or i == len(w) - 1) and f[i] <= best_val:
        edge = f[:3] if i == 0 else f[::-1][:3]
        best_val = min(best_val, edge[0] - _edge_tail(edge, best_val))
    return -1.0 / best_val, best_q


def _edge_tail(edge, scale, rtol=1e-4):
    """Remaining decrease beyond the grid edge, extrapolated geometrically.

    ``edge`` holds the three values nearest the boundary, outermost first.
    Raises :class:`GridResolutionError` unless the sequence is visibly
    converging and the tail is below ``rtol`` of ``scale``.
    """
    d1 = edge[1] - edge[0]
    d2 = edge[2] - edge[1]
    if abs(d1) + abs(d2) <= 1e-12 * abs(scale):
        return 0.0
    rho = d1 / d2 if d2 != 0.0 else math.inf
    tail = d1 * rho / (1.0 - rho) if 0.0 <= rho < 1.0 else math.inf
    if not tail <= rtol * abs(scale):
        raise GridResolutionError("Popov minimiser at the grid boundary; widen the grid")
    return tail


def kvs_max_numeric(params: PlantParams, K_d: float, omega_grid=None,
                    refine: bool = True) -> float:
    """Popov sector bound for the wire joint found by searching the line slope."""
    return joint_popov_line(params, K_d, omega_grid, refine)[0]


def joint_popov_line(params: PlantParams, K_d: float, omega_grid=None, refine: bool = True):
    """``(K, q)`` of the best Popov line for the wire joint."""
    coeffs = popov_coeffs(params, K_d)
    if omega_grid is None:
        omega_grid = default_grid(coeffs.omega_0)

    def locus(w):
        return popov_point(coeffs, params.K_w, w)

    # the locus tends to a finite point as w -> 0 (integrator in P)
    low = (-params.K_w * coeffs.c / coeffs.d**2, -params.K_w / coeffs.d)
    return popov_line(locus, omega_grid, refine=refine, limits=[low])


def joint_space_gain(cartesian_gain: float, geom: LegGeometry) -> float:
    """Cartesian stiffness or damping as seen by the knee joint alone.

    The knee column of the foot Jacobian always has length ``l2``, so the
    knee diagonal entry of ``J^T K J`` is ``K * l2**2`` in every pose.
    """
    return cartesian_gain * geom.l2**2


def _peak_commanded_stiffness(peak: float, geom: LegGeometry, K_w: float) -> float:
    knee = np.linspace(1e-3, math.pi - 1e-3, 721)
    k_wire = min(reflected_wire_stiffness(q, geom, K_w) for q in knee)
    return compensate_wire(peak, k_wire)


def certify_schedule(sched: GainSchedule, params: PlantParams,
                     geom: LegGeometry = LegGeometry(), margin: float = 0.5,
                     bound: str = "popov", n_kd: int = 9, strict: bool = False
                     ) -> StabilityReport:
    """Check the schedule's peak stiffness against the stiffness bound.

    The bound is evaluated over the damping range ``[K_d1, K_d1 + K_d2]``
    (reflected to the knee) and its minimum is used.  ``bound`` selects the
    Popov line search (``"popov"``) or the crossing formula (``"closed"``).
    """
    if not 0 < margin <= 1:
        raise ValueError(f"margin must be in (0, 1], got {margin}")
    if bound not in ("popov", "closed"):
        raise ValueError(f"unknown bound {bound!r}")
    lo, hi = sched.damping_range
    kd_values = np.unique(np.linspace(joint_space_gain(lo, geom), joint_space_gain(hi, geom),
                                      n_kd if hi > lo else 1))
    rows = []
    for kd in kd_values:
        closed = kvs_max_closed_form(params, float(kd))
        numeric = kvs_max_numeric(params, float(kd))
        rows.append((numeric if bound == "popov" else closed, closed, numeric, float(kd)))
    used, closed, numeric, kd_worst = min(rows)
    peak = joint_space_gain(_peak_commanded_stiffness(sched.stiffness_peak, geom, params.K_w),
                            geom)
    ratio = peak / used
    certified = peak <= margin * used
    coeffs = popov_coeffs(params, kd_worst)
    report = StabilityReport(
        omega_0=coeffs.omega_0,
        re_at_omega0=popov_point(coeffs, params.K_w, coeffs.omega_0)[0],
        kvs_max_closed=closed,
        kvs_max_numeric=numeric,
        margin_used=ratio,
        certified=bool(certified),
        worst_K_d=kd_worst,
        K_vs_peak=peak,
        margin=margin,
        bound=bound,
    )
    if strict and not certified:
        raise CertificationError(kd_worst, ratio / margin)
    return report
