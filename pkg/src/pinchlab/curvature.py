"""Gauss curvature of the conformal metrics and Gauss-Bonnet checks.

Curvature is computed from the analytic conformal factor by fourth-order
central finite differences of u = (1/2) log(factor), K = -e^{-2u} Lap u
(mesh-based discrete curvature converges too slowly in the blow-up
regime).  The module provides the curvature blow-up sweep on the neck,
per-triangle Gauss-Bonnet totals, the chart-quadrature Gauss-Bonnet
total for Fermat fibers, and the nodal-fiber curvature defect.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotConverged, StencilOutOfChart
from .family import (
    ChartPoint,
    DegenerationFamily,
    FermatAtlas,
    MetricKind,
    conformal_factor,
)
from .mesh import TriangleMesh
from .periods import _gl_panels, _polar_quad, _smooth_bump


# ---------------------------------------------------------------------------
# pointwise curvature
# ---------------------------------------------------------------------------

def factor_curvature(factor_fn, z: complex, h: float) -> float:
    """K = -e^{-2u} Lap u for the factor e^{2u} = factor_fn(z).

    Fourth-order central differences with step h in both coordinate
    directions.
    """
    def u(dz: complex) -> float:
        return 0.5 * math.log(factor_fn(z + dz))

    lap = 0.0
    for step in (h, 1j * h):
        lap += (
            -u(2 * step) + 16.0 * u(step) - 30.0 * u(0)
            + 16.0 * u(-step) - u(-2 * step)
        ) / (12.0 * h * h)
    return -lap / factor_fn(z)


def _chart_step(family: DegenerationFamily, point: ChartPoint,
                s: complex, step_scale: float) -> float:
    """Largest admissible FD step at the point, scaled to |x|."""
    r = abs(point.coord)
    if point.chart[0] == "cap":
        h = min(step_scale * max(r, 0.1), (1.0 - r) / 2.5)
    else:
        abs_s = abs(s)
        h = min(step_scale * r, (1.0 - r) / 2.5, 0.4 * r)
        if abs_s > 0.0:
            h = min(h, (r - abs_s) / 2.5)
    if h <= 0.0 or not math.isfinite(h):
        raise StencilOutOfChart(
            f"no room for a central stencil at |x| = {r} in chart {point.chart}"
        )
    return h


def gauss_curvature(
    family: DegenerationFamily,
    kind: MetricKind,
    point: ChartPoint,
    s: complex,
    step_scale: float = 2e-3,
) -> float:
    """Gauss curvature of the metric at a chart point of the fiber X_s."""
    h = _chart_step(family, point, s, step_scale)

    def factor(z: complex) -> float:
        return conformal_factor(family, kind, ChartPoint(point.chart, z), s)

    return factor_curvature(factor, point.coord, h)


@dataclass
class CurvatureField:
    """Curvature samples of one fiber metric (one value per sample point)."""

    kind: MetricKind
    s: complex
    points: list[ChartPoint]
    values: np.ndarray


def curvature_samples(
    family: DegenerationFamily,
    kind: MetricKind,
    s: complex,
    mesh: TriangleMesh,
) -> CurvatureField:
    """Curvature at the chart centroid of every mesh triangle.

    Every plumbing factor depends on the chart radius only, so values
    are cached per (chart, radius).
    """
    points = [
        ChartPoint(mesh.tri_chart[f], complex(mesh.tri_coords[f].mean()))
        for f in range(mesh.F)
    ]
    cache: dict[tuple, float] = {}
    values = np.empty(mesh.F)
    for f, p in enumerate(points):
        key = (p.chart, round(abs(p.coord), 14))
        if key not in cache:
            cache[key] = gauss_curvature(
                family, kind, ChartPoint(p.chart, complex(abs(p.coord))), s
            )
        values[f] = cache[key]
    return CurvatureField(kind=kind, s=s, points=points, values=values)


# ---------------------------------------------------------------------------
# curvature blow-up sweep
# ---------------------------------------------------------------------------

@dataclass
class MinCurvatureReport:
    """Minimum-curvature series over a geometric s-grid."""

    kind: MetricKind
    s_grid: np.ndarray
    min_values: np.ndarray
    min_points: list[ChartPoint]
    component_max: np.ndarray  # max K over component samples, per s
    fitted_exponent: float  # slope of log(-min K) vs log(1/s); reported only


def min_curvature_sweep(
    family: DegenerationFamily,
    kind: MetricKind,
    s_grid,
    neck_samples_per_decade: int = 16,
    component_samples: int = 40,
) -> MinCurvatureReport:
    """Minimum of K over neck sample grids plus component samples, per s.

    The divergence exponent is fitted (least squares on log(-min K)
    against log(1/s)) and reported without being asserted.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    mins, argmins, comp_max = [], [], []
    for s in s_grid:
        best, best_pt = math.inf, None
        top = -math.inf
        decades = math.log10(1.0 / s)
        n = max(8, int(neck_samples_per_decade * decades))
        radii = np.exp(np.linspace(
            math.log(s) + 1e-3, -1e-3, n
        ))
        for node in family.nodes:
            for branch in (0, 1):
                chart = ("neck", node.node_id, branch)
                for r in radii:
                    k = gauss_curvature(
                        family, kind, ChartPoint(chart, complex(r)), s
                    )
                    if k < best:
                        best, best_pt = k, ChartPoint(chart, complex(r))
        for comp in family.components:
            if len(comp.marked_points) > 1:
                continue  # no cap chart on two-node components
            chart = ("cap", comp.id)
            for r in np.linspace(0.0, 0.95, component_samples):
                k = gauss_curvature(
                    family, kind, ChartPoint(chart, complex(r)), s
                )
                top = max(top, k)
                if k < best:
                    best, best_pt = k, ChartPoint(chart, complex(r))
        mins.append(best)
        argmins.append(best_pt)
        comp_max.append(top)
    mins = np.array(mins)
    mags = -mins
    if (mags > 0).all() and len(s_grid) >= 2:
        x = np.log(1.0 / s_grid)
        exponent = float(np.polyfit(x, np.log(mags), 1)[0])
    else:
        exponent = math.nan
    return MinCurvatureReport(
        kind=kind, s_grid=s_grid, min_values=mins, min_points=argmins,
        component_max=np.array(comp_max), fitted_exponent=exponent,
    )


# ---------------------------------------------------------------------------
# Gauss-Bonnet
# ---------------------------------------------------------------------------

@dataclass
class GaussBonnetReport:
    """Total curvature against the topological value 2 pi chi."""

    total: float
    expected: float
    deviation: float

    @classmethod
    def against_genus(cls, total: float, genus: int) -> "GaussBonnetReport":
        expected = 2.0 * math.pi * (2 - 2 * genus)
        return cls(total=total, expected=expected,
                   deviation=total - expected)


def gauss_bonnet(mesh: TriangleMesh, field: CurvatureField) -> GaussBonnetReport:
    """Midpoint quadrature of K over the mesh: sum of K(centroid) * area."""
    if len(field.values) != mesh.F:
        raise ValueError("curvature field does not match the mesh triangles")
    total = float(field.values @ mesh.triangle_areas)
    return GaussBonnetReport.against_genus(total, mesh.genus or 0)


# ---------------------------------------------------------------------------
# Gauss-Bonnet for Fermat fibers (chart quadrature)
# ---------------------------------------------------------------------------

def _nth_roots(w: np.ndarray, d: int) -> np.ndarray:
    """All d-th roots; shape (d,) + w.shape."""
    w = np.asarray(w, dtype=complex)
    rad = np.abs(w) ** (1.0 / d)
    base = np.angle(w) / d
    ks = np.arange(d).reshape((d,) + (1,) * w.ndim)
    return rad * np.exp(1j * (base + 2.0 * math.pi * ks / d))


def _fs_factor_vec(a, b, da, db):
    q = 1.0 + np.abs(a) ** 2 + np.abs(b) ** 2
    num = q * (np.abs(da) ** 2 + np.abs(db) ** 2) \
        - np.abs(np.conj(a) * da + np.conj(b) * db) ** 2
    return num / (q * q)


def _lap_fd(fn, z: np.ndarray, h) -> np.ndarray:
    """Fourth-order FD Laplacian of the scalar field fn at the points z."""
    out = np.zeros(z.shape)
    for step in (h, 1j * h):
        out += (
            -fn(z + 2 * step) + 16.0 * fn(z + step) - 30.0 * fn(z)
            + 16.0 * fn(z - step) - fn(z - 2 * step)
        ) / (12.0 * h * h)
    return out


def fermat_gauss_bonnet(d: int, s: complex, rel_tol: float = 1e-4) -> GaussBonnetReport:
    """Total curvature of the Fubini-Study metric on the Fermat fiber.

    Integrates K dv = -(1/2) Lap(log factor) dA, summed over sheets,
    through a smooth partition of unity: the base chart a = x/z away
    from the branch points, the chart at infinity a2 = z/x past |a| =
    0.85, and one sheet-coordinate patch around each ramification point
    (where the sheet sum has a conical kink in a).
    """
    if d < 2:
        raise ValueError("chart quadrature needs degree >= 2")
    atlas = FermatAtlas(d=d, s=s)
    branch_pts = atlas.branch_points
    if branch_pts.size and np.abs(branch_pts).max() > 0.75:
        raise ValueError("branch points too close to the chart seam; use smaller |s|")
    R0, R1 = 0.025, 0.05  # branch-patch bump radii in the a-plane
    SPLIT0, SPLIT1 = 0.85, 0.95  # chart-1 / chart-2 transition in |a|

    def u1(a):
        b = _nth_roots(-(a ** d) - s, d)
        db = -((a[None, ...] / b) ** (d - 1))
        return np.log(_fs_factor_vec(a[None, ...], b, 1.0, db)).sum(axis=0)

    def u2(a2):
        b2 = _nth_roots(-1.0 - s * a2 ** d, d)
        db2 = -s * ((a2[None, ...] / b2) ** (d - 1))
        return np.log(_fs_factor_vec(a2[None, ...], b2, 1.0, db2)).sum(axis=0)

    def bump_sum(a):
        out = np.zeros(a.shape)
        for xb in branch_pts:
            out += _smooth_bump(np.abs(a - xb), R0, R1)
        return out

    # chart 1: mask away the branch patches and the chart seam
    def f1(a):
        dist = np.min(np.abs(a[None, ...] - branch_pts[:, None, None]), axis=0)
        m1 = (1.0 - bump_sum(a)) * _smooth_bump(np.abs(a), SPLIT0, SPLIT1)
        h = np.minimum(5e-3, 0.2 * np.maximum(dist, 1e-12))
        vals = np.where(m1 > 1e-13, -0.5 * _lap_fd(u1, a, h), 0.0)
        return m1 * vals

    rb = abs(s) ** (1.0 / d)  # radius of the branch-point circle
    if rb - R1 <= 0.0:
        raise ValueError("branch points too close to a = 0 for the patch radii")
    total = _polar_quad(
        f1, 0.0 + 0.0j,
        [0.0, 0.5 * (rb - R1), rb - R1, rb + R1, SPLIT0, SPLIT1],
        rel_tol, n_theta0=64,
    ).real

    # chart 2: the transition weight in the coordinate at infinity
    def f2(a2):
        r = np.abs(a2)
        m2 = 1.0 - _smooth_bump(np.where(r > 1e-12, 1.0 / np.maximum(r, 1e-12),
                                         math.inf), SPLIT0, SPLIT1)
        vals = np.where(m2 > 1e-13, -0.5 * _lap_fd(u2, a2, 5e-3), 0.0)
        return m2 * vals

    total += _polar_quad(
        f2, 0.0 + 0.0j, [0.0, 0.6, 1.0 / SPLIT1, 1.0 / SPLIT0],
        rel_tol, n_theta0=64,
    ).real

    # branch patches in the sheet coordinate y (single-valued there)
    for xb in branch_pts:
        def x_vec(y):
            roots = _nth_roots(-s - y ** d, d)
            return np.take_along_axis(
                roots, np.argmin(np.abs(roots - xb), axis=0)[None, ...], axis=0
            )[0]

        def uy(y):
            x = x_vec(y)
            dx = -((y / x) ** (d - 1))
            return np.log(_fs_factor_vec(x, y, dx, 1.0))

        def fb(y):
            mb = _smooth_bump(np.abs(x_vec(y) - xb), R0, R1)
            vals = np.where(mb > 1e-13, -0.5 * _lap_fd(uy, y, 4e-3), 0.0)
            return mb * vals

        rho = (1.25 * R1 * d * abs(xb) ** (d - 1)) ** (1.0 / d)
        rho0 = (0.5 * R0 * d * abs(xb) ** (d - 1)) ** (1.0 / d)
        total += _polar_quad(
            fb, 0.0 + 0.0j, [0.0, rho0, rho], rel_tol, n_theta0=64
        ).real

    return GaussBonnetReport.against_genus(total, atlas.genus())


# ---------------------------------------------------------------------------
# nodal curvature defect
# ---------------------------------------------------------------------------

@dataclass
class DefectReport:
    """Curvature integral of the nodal fiber outside shrinking node balls."""

    eps_grid: np.ndarray
    values: np.ndarray
    limit: float
    target_smooth: float  # 2 pi chi(X_s)
    target_nodal: float  # 2 pi (chi of the normalization + sum (N_q - 1))
    defect: float  # limit - target_smooth = 2 pi * 2 * sum delta_p


def _radial_total(family: DegenerationFamily, kind: MetricKind,
                  chart: tuple, r_lo: float, r_hi: float) -> float:
    """Integral of K dv over the radial band [r_lo, r_hi] of one chart
    of the nodal fiber (the factor there depends on |x| only)."""
    total = 0.0
    breaks = [r_lo, 0.5, r_hi] if r_lo < 0.5 < r_hi else [r_lo, r_hi]
    for a, b in zip(breaks, breaks[1:]):
        r, w = _gl_panels(a, b, 4)
        for ri, wi in zip(r, w):
            pt = ChartPoint(chart, complex(ri))
            k = gauss_curvature(family, kind, pt, 0.0)
            f = conformal_factor(family, kind, pt, 0.0)
            total += wi * k * f * 2.0 * math.pi * ri
    return total


def nodal_defect(
    family: DegenerationFamily,
    eps_grid,
    kind: MetricKind = MetricKind.INDUCED,
) -> DefectReport:
    """Limit of the curvature integral of X_0 minus eps-balls at the nodes.

    Compared against 2 pi chi(X_s) and against the normalization value
    2 pi (chi(X_0~) + sum_q (N_q - 1)) with N_q = 1 at nodal branches;
    the difference is the node defect 2 pi * 2 * sum delta_p.
    """
    eps_grid = np.asarray(sorted(eps_grid, reverse=True), dtype=float)
    if eps_grid.size < 2 or eps_grid.min() <= 0 or eps_grid.max() >= 0.5:
        raise ValueError("need at least two ball radii in (0, 1/2)")
    values = []
    for eps in eps_grid:
        total = 0.0
        for comp in family.components:
            degree = family.node_degree(comp.id)
            if degree == 0:
                # smooth sphere: two stereographic hemispheres
                total += 2.0 * _radial_total(
                    family, kind, ("cap", comp.id), 0.0, 1.0
                )
                continue
            if degree == 1:
                total += _radial_total(family, kind, ("cap", comp.id), 0.0, 1.0)
            for node in family.nodes:
                for branch, (cid, _) in enumerate((node.left, node.right)):
                    if cid == comp.id:
                        total += _radial_total(
                            family, kind, ("neck", node.node_id, branch),
                            eps, 1.0,
                        )
        values.append(total)
    values = np.array(values)
    if abs(values[-1] - values[-2]) > 5e-3 * max(abs(values[-1]), 1e-12):
        raise NotConverged(
            "curvature integral still moving on the last two ball radii"
        )
    limit = float(values[-1])
    chi_smooth = 2 - 2 * family.g
    chi_normalization = 2 * family.N  # disjoint spheres
    target_nodal = 2.0 * math.pi * chi_normalization  # all N_q = 1
    target_smooth = 2.0 * math.pi * chi_smooth
    return DefectReport(
        eps_grid=eps_grid, values=values, limit=limit,
        target_smooth=target_smooth, target_nodal=target_nodal,
        defect=limit - target_smooth,
    )
