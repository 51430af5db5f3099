"""Degenerating families of Riemann surfaces and their fiber metrics.

Two constructions are supported:

* plumbing families: round-sphere components joined at nodes through the
  local model ``x*y = s``, with the gluing annulus normalized to
  ``{|s| <= |x| <= 1}`` on each branch;
* Fermat plane curves ``x^d + y^d + s*z^d = 0`` with the induced
  Fubini-Study metric, exposed as a chart atlas.

The module evaluates the conformal factor (the coefficient of ``|dx|^2``)
of every supported metric kind on every fiber chart, and serializes family
descriptions to a plain-text config file.
"""
from __future__ import annotations

import cmath
import configparser
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DisconnectedGraph,
    OverlappingMarkedPoints,
    PointOffFiber,
    UnresolvedChartOverlap,
    ZeroRadiusAtNode,
)

#: Marked point "at infinity" in a component's coordinate.
INF_POINT = complex(math.inf, 0.0)


def is_inf_point(p: complex) -> bool:
    return math.isinf(p.real) or math.isinf(p.imag)


class MetricKind(str, Enum):
    """Supported fiber metrics (as conformal factors on charts)."""

    INDUCED = "induced"
    HYPERBOLIC_MODEL = "hyperbolic"
    CYLINDER = "cylinder"
    FUBINI_STUDY_INDUCED = "fubini-study"


@dataclass(frozen=True)
class ComponentSurface:
    """One irreducible component: a round sphere with marked points.

    ``marked_points`` are given in the component's own coordinate; the
    conventional placements used by the structured mesher are 0 and
    ``INF_POINT``.  Node attachment points and puncture points both live
    here.
    """

    id: int
    marked_points: tuple[complex, ...]
    radius: float = 0.5
    chart_radius: float = 1.0

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("component radius must be positive")
        if not 0 < self.chart_radius <= 1:
            raise ValueError("chart_radius must lie in (0, 1]")
        self._check_separation()

    def _check_separation(self) -> None:
        pts = self.marked_points
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                p, q = pts[i], pts[j]
                if is_inf_point(p) and is_inf_point(q):
                    raise OverlappingMarkedPoints(
                        f"component {self.id}: two marked points at infinity"
                    )
                if is_inf_point(p) or is_inf_point(q):
                    continue  # separated from any finite point
                if abs(p - q) < 3.0 * self.chart_radius:
                    raise OverlappingMarkedPoints(
                        f"component {self.id}: marked points {p} and {q} "
                        f"closer than 3 x chart radius"
                    )


@dataclass(frozen=True)
class NodeSpec:
    """A node joining two components at marked points.

    ``left``/``right`` are ``(component id, marked point index)`` pairs.
    Branch coordinates are normalized so the gluing annulus is exactly
    ``{|s| <= |x| <= 1}`` on each branch.
    """

    node_id: int
    left: tuple[int, int]
    right: tuple[int, int]
    chart_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.chart_scale <= 0:
            raise ValueError("chart_scale must be positive")
        if self.left == self.right:
            raise ValueError("node cannot attach a marked point to itself")


@dataclass(frozen=True)
class DegenerationFamily:
    """A degenerating family over the parameter disk.

    ``kind`` is ``"plumbing"`` or ``"fermat"``; Fermat families carry the
    degree ``d``.  ``scale`` multiplies the conformal factor of every
    metric kind (global metric scale, default 1).
    """

    components: tuple[ComponentSurface, ...]
    nodes: tuple[NodeSpec, ...]
    N: int
    g: int
    nu: int = 1
    kind: str = "plumbing"
    d: int = 0
    scale: float = 1.0

    def component(self, cid: int) -> ComponentSurface:
        for c in self.components:
            if c.id == cid:
                return c
        raise KeyError(f"no component with id {cid}")

    def node(self, nid: int) -> NodeSpec:
        for n in self.nodes:
            if n.node_id == nid:
                return n
        raise KeyError(f"no node with id {nid}")

    def node_degree(self, cid: int) -> int:
        return sum(
            (n.left[0] == cid) + (n.right[0] == cid) for n in self.nodes
        )

    def with_scale(self, scale: float) -> "DegenerationFamily":
        return DegenerationFamily(
            components=self.components,
            nodes=self.nodes,
            N=self.N,
            g=self.g,
            nu=self.nu,
            kind=self.kind,
            d=self.d,
            scale=scale,
        )


def build_plumbing(
    components: Sequence[ComponentSurface],
    nodes: Sequence[NodeSpec],
    scale: float = 1.0,
) -> DegenerationFamily:
    """Validate the dual graph and compute N and the arithmetic genus.

    Sphere components contribute genus 0, so g equals the first Betti
    number of the dual graph (edges - vertices + 1 for a connected graph).
    """
    comps = tuple(components)
    nds = tuple(nodes)
    ids = [c.id for c in comps]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate component ids")
    if len(comps) < 2:
        raise ValueError("plumbing families need at least two components")

    used: set[tuple[int, int]] = set()
    for n in nds:
        for cid, mp in (n.left, n.right):
            comp = next((c for c in comps if c.id == cid), None)
            if comp is None:
                raise ValueError(f"node {n.node_id} references unknown component {cid}")
            if not 0 <= mp < len(comp.marked_points):
                raise ValueError(f"node {n.node_id} references missing marked point")
            if (cid, mp) in used:
                raise OverlappingMarkedPoints(
                    f"marked point {mp} of component {cid} used by two nodes"
                )
            used.add((cid, mp))

    # connectivity of the dual graph
    adj: dict[int, set[int]] = {c.id: set() for c in comps}
    for n in nds:
        adj[n.left[0]].add(n.right[0])
        adj[n.right[0]].add(n.left[0])
    seen = {comps[0].id}
    stack = [comps[0].id]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    if len(seen) != len(comps):
        raise DisconnectedGraph(
            f"dual graph not connected: reached {len(seen)} of {len(comps)} components"
        )

    b1 = len(nds) - len(comps) + 1
    return DegenerationFamily(
        components=comps, nodes=nds, N=len(comps), g=b1, nu=1,
        kind="plumbing", scale=scale,
    )


# ---------------------------------------------------------------------------
# chart points and conformal factors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChartPoint:
    """A point in one fiber chart.

    ``chart`` is ``("neck", node_id, branch)`` with branch 0 = left,
    1 = right (coordinate on that branch, admissible ``|s| <= |x| <= 1``),
    or ``("cap", component_id)`` (coordinate centered at the point
    antipodal to the component's single node chart, ``|x| <= 1``).
    """

    chart: tuple
    coord: complex


def _smoothstep(t: float) -> float:
    """Quintic smoothstep on [0, 1].

    The third-order zero at t = 0 dominates the second-order divergence
    of the hyperbolic neck factor at |x| = 1, keeping the blended factor
    continuous across the cap seam.
    """
    t = min(1.0, max(0.0, t))
    return t ** 3 * (10.0 - t * (15.0 - 6.0 * t))


_LN2 = math.log(2.0)


def _sphere_factor(r: float, radius: float) -> float:
    """Round sphere of the given radius in a stereographic chart."""
    return 4.0 * radius * radius / (1.0 + r * r) ** 2


def _neck_factor(kind: MetricKind, r: float, abs_s: float) -> float:
    """Pure neck conformal factor at branch radius r."""
    if kind is MetricKind.INDUCED:
        return 1.0 + (abs_s * abs_s) / r ** 4
    if kind is MetricKind.CYLINDER:
        return 1.0 / (r * r)
    if kind is MetricKind.HYPERBOLIC_MODEL:
        # comparison model written in whichever branch coordinate is local;
        # the two expressions agree on the core circle |x| = sqrt|s|
        m = math.log(1.0 / r)
        if abs_s > 0.0:
            m = min(m, math.log(r / abs_s))
        if m <= 0.0:
            raise PointOffFiber("hyperbolic neck factor undefined at |x| = 1")
        return 1.0 / (r * m) ** 2
    raise ValueError(f"metric kind {kind} has no neck factor")


def conformal_factor(
    family: DegenerationFamily,
    kind: MetricKind,
    point: ChartPoint,
    s: complex,
) -> float:
    """Coefficient of |dx|^2 at the chart point on the fiber X_s."""
    if family.kind == "fermat":
        raise ValueError("use FermatAtlas for Fermat families")
    if kind is MetricKind.FUBINI_STUDY_INDUCED:
        raise ValueError("Fubini-Study factor applies to Fermat families only")
    abs_s = abs(s)
    tag = point.chart[0]
    if tag == "cap":
        _, cid = point.chart
        r = abs(point.coord)
        if r > 1.0 + 1e-12:
            raise PointOffFiber(f"cap coordinate |x| = {r} > 1")
        comp = family.component(cid)
        return family.scale * _sphere_factor(r, comp.radius)
    if tag != "neck":
        raise PointOffFiber(f"unknown chart {point.chart}")

    _, nid, branch = point.chart
    node = family.node(nid)
    r = abs(point.coord)
    if r == 0.0:
        raise ZeroRadiusAtNode(f"node {nid}: factor requested at |x| = 0")
    if r > 1.0 + 1e-12:
        raise PointOffFiber(f"neck coordinate |x| = {r} > 1")
    if abs_s > 0.0 and r < abs_s * (1.0 - 1e-12):
        raise PointOffFiber(f"neck coordinate |x| = {r} < |s| = {abs_s}")

    near_cid = (node.left if branch == 0 else node.right)[0]
    far_cid = (node.right if branch == 0 else node.left)[0]
    near_comp = family.component(near_cid)

    if r >= 0.5:
        value = _blend(kind, r, abs_s, near_comp.radius)
    else:
        ry = abs_s / r if abs_s > 0.0 else 0.0
        if ry >= 0.5:
            far_comp = family.component(far_cid)
            # factor in the other branch coordinate, pulled back by
            # y = s/x:  |dy/dx|^2 = |s|^2/|x|^4
            value = _blend(kind, ry, abs_s, far_comp.radius) * (abs_s / r ** 2) ** 2
        else:
            value = _neck_factor(kind, r, abs_s)
    return family.scale * value


def _blend(kind: MetricKind, r: float, abs_s: float, comp_radius: float) -> float:
    """Geometric blend of neck and sphere factors for 1/2 <= r <= 1.

    Interpolates log-factors, not factors: this keeps d(log factor) /
    d(log r) uniformly bounded on the blend zone even for the hyperbolic
    model (whose factor diverges at r = 1), which is what lets meshes of
    moderate angular resolution satisfy the triangle inequality.
    """
    if r >= 1.0:
        return _sphere_factor(r, comp_radius)
    t = math.log(1.0 / r) / _LN2
    t = min(1.0, max(0.0, t))
    w = _smoothstep(t)
    sph = _sphere_factor(r, comp_radius)
    if w <= 0.0:
        return sph
    neck = _neck_factor(kind, r, abs_s)
    return math.exp(w * math.log(neck) + (1.0 - w) * math.log(sph))


def neck_core_length(
    family: DegenerationFamily, kind: MetricKind, s: complex
) -> float:
    """Length of the core circle |x| = sqrt|s| of a neck, in closed form.

    Induced: factor is 2 at the core, circumference 2*pi*sqrt|s|.
    Hyperbolic model: 2*pi*r/(r*log(1/r)) at r = sqrt|s|.
    Cylinder: girth independent of s.
    """
    abs_s = abs(s)
    if abs_s == 0.0:
        raise ValueError("neck core undefined at s = 0")
    root = math.sqrt(family.scale)
    if kind is MetricKind.INDUCED:
        return root * 2.0 * math.pi * math.sqrt(2.0 * abs_s)
    if kind is MetricKind.HYPERBOLIC_MODEL:
        return root * 4.0 * math.pi / math.log(1.0 / abs_s)
    if kind is MetricKind.CYLINDER:
        return root * 2.0 * math.pi
    raise ValueError(f"no neck core length for metric kind {kind}")


# ---------------------------------------------------------------------------
# Fermat plane curves x^d + y^d + s z^d = 0
# ---------------------------------------------------------------------------

def _fs_factor(a: complex, b: complex, da: complex, db: complex) -> float:
    """Fubini-Study factor induced on a curve in P^2.

    The curve is parametrized in an affine chart as zeta -> (a, b) with
    derivatives (da, db); returns the coefficient of |d zeta|^2.
    """
    q = 1.0 + abs(a) ** 2 + abs(b) ** 2
    num = q * (abs(da) ** 2 + abs(db) ** 2) - abs(a.conjugate() * da + b.conjugate() * db) ** 2
    return num / (q * q)


@dataclass
class FermatAtlas:
    """Chart atlas of one Fermat fiber with FS conformal factors.

    Charts (for s != 0, smooth fiber):

    * chart 1: base coordinate ``a = x/z`` on ``|a| <= 1``, d sheets
      ``b = (-a^d - s)^{1/d}`` (projection from (0:1:0));
    * chart 2: base coordinate ``a2 = z/x`` on ``|a2| <= 1``, d sheets
      ``b2 = (-1 - s a2^d)^{1/d}`` (unramified for |s| < 1);
    * one branch chart per ramification point ``x_b`` (``x_b^d = -s``),
      parametrized by the sheet coordinate ``y`` itself.

    At s = 0 the atlas degenerates into d projective lines.
    """

    d: int
    s: complex

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("degree must be >= 1")
        if abs(self.s) >= 1.0:
            raise UnresolvedChartOverlap(
                "branch points leave the primary chart for |s| >= 1"
            )

    # --- discrete invariants -------------------------------------------

    @property
    def branch_points(self) -> np.ndarray:
        """Ramification points of the x-projection (solutions of x^d = -s)."""
        if self.d < 2 or self.s == 0:
            return np.zeros(0, dtype=complex)
        rad = abs(self.s) ** (1.0 / self.d)
        base = cmath.phase(-self.s) / self.d
        ks = np.arange(self.d)
        return rad * np.exp(1j * (base + 2.0 * math.pi * ks / self.d))

    def genus(self) -> int:
        """Genus from the Euler characteristic of a lifted triangulation.

        A small base triangulation of the sphere (branch values plus the
        two projection poles, fanned) is lifted through the d-sheeted
        cover; branch vertices have a single preimage, everything else
        lifts d times.
        """
        if self.s == 0 or self.d < 2:
            return 0
        B = self.d  # branch points, each with full ramification
        V_base, E_base, F_base = B + 2, 3 * B, 2 * B
        assert V_base - E_base + F_base == 2
        V = self.d * (V_base - B) + B
        E = self.d * E_base
        F = self.d * F_base
        chi = V - E + F
        if (2 - chi) % 2:
            raise UnresolvedChartOverlap("lifted complex has odd Euler defect")
        return (2 - chi) // 2

    @property
    def component_count(self) -> int:
        """Number of irreducible components (d lines at s = 0, else 1)."""
        return self.d if self.s == 0 else 1

    # --- chart evaluations ---------------------------------------------

    def _roots(self, w: complex) -> np.ndarray:
        """All d-th roots of w."""
        if w == 0:
            return np.zeros(self.d, dtype=complex)
        rad = abs(w) ** (1.0 / self.d)
        base = cmath.phase(w) / self.d
        ks = np.arange(self.d)
        return rad * np.exp(1j * (base + 2.0 * math.pi * ks / self.d))

    def log_factor_sum_chart1(self, a: complex) -> float:
        """Sum over sheets of log(FS factor) in the chart a = x/z."""
        d = self.d
        total = 0.0
        for b in self._roots(-(a ** d) - self.s):
            db = -((a / b) ** (d - 1)) if d > 1 else -1.0 + 0j
            if d == 1:
                b = -a - self.s
            total += math.log(_fs_factor(a, b, 1.0 + 0j, db))
        return total

    def factor_sum_chart1(self, a: complex) -> float:
        """Sum over sheets of the FS factor in the chart a = x/z."""
        d = self.d
        total = 0.0
        for b in self._roots(-(a ** d) - self.s):
            if d == 1:
                b = -a - self.s
            db = -((a / b) ** (d - 1)) if d > 1 else -1.0 + 0j
            total += _fs_factor(a, b, 1.0 + 0j, db)
        return total

    def log_factor_sum_chart2(self, a2: complex) -> float:
        """Sum over sheets of log(FS factor) in the chart a2 = z/x."""
        d = self.d
        total = 0.0
        for b2 in self._roots(-1.0 - self.s * a2 ** d):
            if d == 1:
                b2 = -1.0 - self.s * a2
            db2 = -self.s * ((a2 / b2) ** (d - 1)) if d > 1 else -self.s + 0j
            total += math.log(_fs_factor(a2, b2, 1.0 + 0j, db2))
        return total

    def factor_sum_chart2(self, a2: complex) -> float:
        d = self.d
        total = 0.0
        for b2 in self._roots(-1.0 - self.s * a2 ** d):
            if d == 1:
                b2 = -1.0 - self.s * a2
            db2 = -self.s * ((a2 / b2) ** (d - 1)) if d > 1 else -self.s + 0j
            total += _fs_factor(a2, b2, 1.0 + 0j, db2)
        return total

    def branch_chart(self, x_b: complex):
        """Local parametrization by the sheet coordinate y near x_b.

        Returns ``(x_of_y, log_factor, factor)`` where each accepts the
        local coordinate y; x(y) is the root of x^d = -s - y^d nearest
        to x_b (exact for |y| well inside the separation radius).
        """
        d = self.d

        def x_of_y(y: complex) -> complex:
            roots = self._roots(-self.s - y ** d)
            return roots[np.argmin(np.abs(roots - x_b))]

        def factor(y: complex) -> float:
            x = x_of_y(y)
            dx = -((y / x) ** (d - 1))
            return _fs_factor(x, y, dx, 1.0 + 0j)

        def log_factor(y: complex) -> float:
            return math.log(factor(y))

        return x_of_y, log_factor, factor


def fermat_fiber_charts(d: int, s: complex) -> FermatAtlas:
    """Chart atlas of the Fermat fiber x^d + y^d + s z^d = 0."""
    return FermatAtlas(d=d, s=s)


def fermat_family(d: int, s_dummy: float = 0.0) -> DegenerationFamily:
    """Family wrapper for the Fermat curve (N and g of the fibers).

    The s = 0 fiber is a union of d lines meeting pairwise, so its dual
    graph is the complete graph K_d; the smooth-fiber genus is
    (d-1)(d-2)/2 which equals the first Betti number of K_d.
    """
    comps = tuple(
        ComponentSurface(id=i, marked_points=(0.0 + 0j, INF_POINT))
        for i in range(d)
    )
    g = (d - 1) * (d - 2) // 2
    return DegenerationFamily(
        components=comps, nodes=(), N=d, g=g, nu=1, kind="fermat", d=d,
    )


# ---------------------------------------------------------------------------
# presets and plain-text config
# ---------------------------------------------------------------------------

def two_sphere_family(scale: float = 1.0) -> DegenerationFamily:
    """Two spheres joined at one node (N = 2, g = 0)."""
    c0 = ComponentSurface(id=0, marked_points=(0.0 + 0j,))
    c1 = ComponentSurface(id=1, marked_points=(0.0 + 0j,))
    node = NodeSpec(node_id=0, left=(0, 0), right=(1, 0))
    return build_plumbing([c0, c1], [node], scale=scale)


def three_cycle_family(scale: float = 1.0) -> DegenerationFamily:
    """Three spheres in a cycle of three nodes (N = 3, g = 1)."""
    comps = [
        ComponentSurface(id=i, marked_points=(0.0 + 0j, INF_POINT))
        for i in range(3)
    ]
    nodes = [
        NodeSpec(node_id=i, left=(i, 1), right=((i + 1) % 3, 0))
        for i in range(3)
    ]
    return build_plumbing(comps, nodes, scale=scale)


FAMILY_PRESETS = {
    "two-sphere": two_sphere_family,
    "three-cycle": three_cycle_family,
}

CONFIG_SCHEMA = "pinchlab-family-v1"


def _format_point(p: complex) -> str:
    if is_inf_point(p):
        return "inf"
    if p.imag == 0:
        return repr(p.real)
    return f"{p.real!r}{p.imag:+}j"


def _parse_point(text: str) -> complex:
    text = text.strip()
    if text == "inf":
        return INF_POINT
    return complex(text)


def write_family_config(family: DegenerationFamily, path: str,
                        metric: MetricKind | None = None) -> None:
    """Serialize a family to a plain-text config file."""
    cp = configparser.ConfigParser()
    comp_lines = []
    for c in family.components:
        pts = "|".join(_format_point(p) for p in c.marked_points)
        comp_lines.append(f"{c.id}:{pts}")
    node_lines = [
        f"{n.node_id}:{n.left[0]}.{n.left[1]}-{n.right[0]}.{n.right[1]}"
        for n in family.nodes
    ]
    cp["family"] = {
        "schema": CONFIG_SCHEMA,
        "kind": family.kind,
        "components": " ; ".join(comp_lines),
        "nodes": " ; ".join(node_lines),
        "metric": (metric or MetricKind.INDUCED).value,
        "scale": repr(family.scale),
        "d": str(family.d),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        cp.write(fh)


def read_family_config(path: str) -> tuple[DegenerationFamily, MetricKind]:
    """Read a family (and its default metric) from a config file."""
    cp = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    sec = cp["family"]
    kind = sec.get("kind", "plumbing")
    scale = float(sec.get("scale", "1.0"))
    metric = MetricKind(sec.get("metric", "induced"))
    if kind == "fermat":
        fam = fermat_family(int(sec["d"]))
        if scale != 1.0:
            fam = fam.with_scale(scale)
        return fam, metric
    comps = []
    for chunk in sec["components"].split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        cid, pts = chunk.split(":")
        points = tuple(_parse_point(p) for p in pts.split("|"))
        comps.append(ComponentSurface(id=int(cid), marked_points=points))
    nodes = []
    for chunk in sec.get("nodes", "").split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        nid, rest = chunk.split(":")
        left, right = rest.split("-")
        lc, lm = left.split(".")
        rc, rm = right.split(".")
        nodes.append(NodeSpec(node_id=int(nid),
                              left=(int(lc), int(lm)),
                              right=(int(rc), int(rm))))
    return build_plumbing(comps, nodes, scale=scale), metric


def resolve_family(name_or_path: str, scale: float = 1.0
                   ) -> tuple[DegenerationFamily, MetricKind | None]:
    """Resolve a preset name or config file path to a family."""
    if name_or_path in FAMILY_PRESETS:
        return FAMILY_PRESETS[name_or_path](scale=scale), None
    fam, metric = read_family_config(name_or_path)
    if scale != 1.0:
        fam = fam.with_scale(scale)
    return fam, metric
