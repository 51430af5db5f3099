"""Cotangent FEM for the fiber Laplacian and its weighted variant.

Assembles the intrinsic Dirichlet form from per-triangle edge lengths
(law of cosines, no embedding needed), a lumped mass matrix, and solves
the generalized pencil for the smallest eigenvalues by shift-invert with
a deterministic start vector.

Reported eigenvalues follow the Hodge-Kodaira convention: half the
Hodge-de Rham (geometer's) Laplacian on functions.  The flat-torus and
round-sphere meshes pin the convention down in the tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NoConvergence, NonFiniteEntry
from .family import DegenerationFamily, MetricKind
from .mesh import TriangleMesh

HODGE_KODAIRA = "HodgeKodaira"
HODGE_DE_RHAM = "HodgeDeRham"


@dataclass
class SpectralProblem:
    """Generalized symmetric pencil K u = lambda M u with diagonal M."""

    stiffness: sp.csr_matrix
    mass: np.ndarray  # diagonal entries
    dimension: int
    convention_tag: str = HODGE_KODAIRA

    def __post_init__(self) -> None:
        if not np.isfinite(self.stiffness.data).all():
            raise NonFiniteEntry("stiffness contains non-finite entries")
        if not np.isfinite(self.mass).all():
            raise NonFiniteEntry("mass contains non-finite entries")
        if not (self.mass > 0).all():
            raise NonFiniteEntry("mass must be strictly positive")

    def reference_scale(self) -> float:
        """Crude magnitude of the upper spectrum (for shifts/thresholds)."""
        diag = self.stiffness.diagonal()
        return float(np.median(diag / self.mass))


@dataclass
class Spectrum:
    """Smallest eigenvalues of one fiber, ascending, Hodge-Kodaira units."""

    eigenvalues: np.ndarray
    residual_norms: np.ndarray
    k: int
    s: complex
    zero_threshold: float = 0.0

    def __post_init__(self) -> None:
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        if not (np.diff(self.eigenvalues) >= -1e-12).all():
            raise ValueError("eigenvalues must be ascending")

    def numerically_zero(self) -> np.ndarray:
        return self.eigenvalues < self.zero_threshold

    def first_nonzero(self) -> float:
        above = self.eigenvalues[~self.numerically_zero()]
        if above.size == 0:
            raise ValueError("no nonzero eigenvalue in the computed window")
        return float(above[0])


def _cotan_halves(lengths: np.ndarray, areas: np.ndarray) -> np.ndarray:
    """Half-cotangent weight per triangle corner (corner j faces edge j)."""
    a2 = lengths ** 2
    cot = np.empty_like(lengths)
    for j in range(3):
        opp = a2[:, j]
        adj = a2[:, (j + 1) % 3] + a2[:, (j + 2) % 3]
        cot[:, j] = (adj - opp) / (8.0 * areas)
    return cot  # already includes the factor 1/2


def assemble(mesh: TriangleMesh) -> SpectralProblem:
    """Cotangent stiffness and lumped mass from intrinsic lengths.

    The edge between vertices (j+1, j+2) of a triangle receives half the
    cotangent of the angle at vertex j; the Hodge-Kodaira convention then
    halves the whole form.  Mass lumps one third of each incident area.
    """
    tl = mesh.triangle_lengths()
    cot = _cotan_halves(tl, mesh.triangle_areas)
    tri = mesh.triangles
    F = mesh.F
    rows = np.empty(12 * F, dtype=np.int64)
    cols = np.empty(12 * F, dtype=np.int64)
    vals = np.empty(12 * F)
    idx = 0
    for j in range(3):
        u = tri[:, (j + 1) % 3]
        v = tri[:, (j + 2) % 3]
        w = cot[:, j]
        n = F
        rows[idx:idx + n], cols[idx:idx + n], vals[idx:idx + n] = u, u, w
        idx += n
        rows[idx:idx + n], cols[idx:idx + n], vals[idx:idx + n] = v, v, w
        idx += n
        rows[idx:idx + n], cols[idx:idx + n], vals[idx:idx + n] = u, v, -w
        idx += n
        rows[idx:idx + n], cols[idx:idx + n], vals[idx:idx + n] = v, u, -w
        idx += n
    K = sp.coo_matrix((vals, (rows, cols)), shape=(mesh.V, mesh.V)).tocsr()
    K *= 0.5  # Hodge-Kodaira = half Hodge-de Rham
    return SpectralProblem(
        stiffness=K,
        mass=mesh.lumped_vertex_mass(),
        dimension=mesh.V,
        convention_tag=HODGE_KODAIRA,
    )


# ---------------------------------------------------------------------------
# weighted problem (line-bundle scalar model)
# ---------------------------------------------------------------------------

@dataclass
class WeightField:
    """Per-triangle weight w = exp(-phi) plus its curvature density.

    ``curvature_density`` is (1/4) * (chart Laplacian of phi) per
    triangle; ``chart_areas`` are Euclidean triangle areas in the chart,
    so density * chart area is a chart-independent curvature mass.  The
    potential vanishes on pure neck triangles (flat there) and is
    strictly subharmonic on component interiors.
    """

    weights: np.ndarray
    curvature_density: np.ndarray
    chart_areas: np.ndarray

    def __post_init__(self) -> None:
        if not (self.weights > 0).all():
            raise NonFiniteEntry("weights must be positive")
        if (self.curvature_density < 0).any():
            raise NonFiniteEntry("curvature density must be >= 0")


def neutral_weight(mesh: TriangleMesh) -> WeightField:
    return WeightField(
        weights=np.ones(mesh.F),
        curvature_density=np.zeros(mesh.F),
        chart_areas=_chart_areas(mesh),
    )


def _chart_areas(mesh: TriangleMesh) -> np.ndarray:
    p = mesh.tri_coords
    u = p[:, 1] - p[:, 0]
    v = p[:, 2] - p[:, 0]
    return 0.5 * np.abs(u.real * v.imag - u.imag * v.real)


def component_bundle_weight(mesh: TriangleMesh, beta: float = 1.0) -> WeightField:
    """Weight modeling a metric that is flat near nodes and strictly
    subharmonic on component interiors.

    Per local chart the potential is ``beta * log((1+rho^2)/(5/4))`` on
    the component side (cap charts, and neck charts at branch radius
    rho >= 1/2), continuous across seams, and identically zero on the
    pure neck; its quarter-Laplacian ``beta/(1+rho^2)^2`` is the
    curvature density.
    """
    cent = mesh.tri_coords.mean(axis=1)
    rho = np.abs(cent)
    is_cap = np.fromiter(
        (ch[0] == "cap" for ch in mesh.tri_chart), dtype=bool, count=mesh.F
    )
    interior = is_cap | (rho >= 0.5)
    phi = np.where(
        interior, beta * np.log((1.0 + rho ** 2) / 1.25), 0.0
    )
    density = np.where(interior, beta / (1.0 + rho ** 2) ** 2, 0.0)
    return WeightField(
        weights=np.exp(-phi),
        curvature_density=density,
        chart_areas=_chart_areas(mesh),
    )


def assemble_weighted(mesh: TriangleMesh, weight: WeightField) -> SpectralProblem:
    """Weighted Dirichlet form plus the curvature zeroth-order term.

    stiffness = (1/2) * sum_T w_T * (cotan form of T)
              + diag of the lumped curvature masses w_T * c_T * A_T^chart;
    mass = w-weighted lumped intrinsic areas.  With the neutral weight
    this reproduces ``assemble`` exactly; with a strictly subharmonic
    potential the zero mode is lifted uniformly.
    """
    tl = mesh.triangle_lengths()
    cot = _cotan_halves(tl, mesh.triangle_areas) * weight.weights[:, None]
    tri = mesh.triangles
    rows, cols, vals = [], [], []
    for j in range(3):
        u = tri[:, (j + 1) % 3]
        v = tri[:, (j + 2) % 3]
        w = cot[:, j]
        rows += [u, v, u, v]
        cols += [u, v, v, u]
        vals += [w, w, -w, -w]
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.V, mesh.V),
    ).tocsr()
    K *= 0.5

    curv_mass = weight.weights * weight.curvature_density * weight.chart_areas
    diag = np.zeros(mesh.V)
    np.add.at(diag, tri.ravel(), np.repeat(curv_mass / 3.0, 3))
    K = (K + sp.diags(diag)).tocsr()

    mass = np.zeros(mesh.V)
    share = np.repeat(weight.weights * mesh.triangle_areas / 3.0, 3)
    np.add.at(mass, tri.ravel(), share)
    return SpectralProblem(
        stiffness=K, mass=mass, dimension=mesh.V, convention_tag=HODGE_KODAIRA
    )


# ---------------------------------------------------------------------------
# eigensolver
# ---------------------------------------------------------------------------

def solve_smallest(
    problem: SpectralProblem,
    k: int,
    tol: float = 1e-9,
    s: complex = 0.0,
    seed: int = 0,
) -> Spectrum:
    """k smallest eigenpairs of K u = lambda M u.

    Shift-invert Lanczos around a slightly negative shift with a seeded
    start vector; falls back to a blocked preconditioned iteration with
    the constant vector deflated if the factorization fails.  Residuals
    ||K u - lambda M u|| / ||u||_M are recorded per pair.
    """
    if not 0 < k < problem.dimension:
        raise ValueError("need 0 < k < dimension")
    K = problem.stiffness
    M = sp.diags(problem.mass).tocsr()
    ref = problem.reference_scale()
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(problem.dimension)
    try:
        vals, vecs = spla.eigsh(
            K, k=k, M=M, sigma=-1e-6 * ref, which="LM", v0=v0,
            tol=0.0, maxiter=5000,
        )
    except (spla.ArpackNoConvergence, RuntimeError):
        try:
            # a slightly larger block often unsticks ARPACK's restarts
            k_try = min(k + 2, problem.dimension - 1)
            vals, vecs = spla.eigsh(
                K, k=k_try, M=M, sigma=-1e-6 * ref, which="LM",
                v0=rng.standard_normal(problem.dimension),
                tol=0.0, maxiter=20000,
            )
        except (spla.ArpackNoConvergence, RuntimeError):
            vals, vecs = _lobpcg_fallback(K, problem.mass, k, rng)
    order = np.argsort(vals)[:k]
    vals, vecs = vals[order], vecs[:, order]
    residuals = _residuals(K, problem.mass, vals, vecs)
    bad = residuals > tol
    if bad.any():
        raise NoConvergence(
            f"{int(bad.sum())} of {k} pairs exceed residual tol {tol}: "
            f"max {residuals.max():.3e}"
        )
    return Spectrum(
        eigenvalues=np.maximum(vals, 0.0),  # clamp -0.0-size zero modes
        residual_norms=residuals,
        k=k,
        s=s,
        zero_threshold=1e-10 * ref,
    )


def _residuals(K, mass, vals, vecs) -> np.ndarray:
    out = np.empty(vals.shape[0])
    for i in range(vals.shape[0]):
        u = vecs[:, i]
        r = K @ u - vals[i] * (mass * u)
        out[i] = np.linalg.norm(r) / math.sqrt(float(u @ (mass * u)))
    return out


def _lobpcg_fallback(K, mass, k, rng):
    n = K.shape[0]
    M = sp.diags(mass).tocsr()
    X = rng.standard_normal((n, k + 2))
    # deflate the constant vector explicitly, then add it back as the
    # known zero mode if the problem is unweighted
    diag = K.diagonal() + 1e-12 * float(np.median(mass))
    prec = spla.LinearOperator(
        (n, n),
        matvec=lambda x: x.reshape(-1) / diag,
        matmat=lambda X: X / diag[:, None],
    )
    vals, vecs = spla.lobpcg(
        K, X, B=M, M=prec, tol=1e-10, maxiter=2000, largest=False,
    )
    order = np.argsort(vals)[:k]
    return vals[order], vecs[:, order]


def metric_comparison_bound(spectrum: Spectrum, pointwise_min_ratio: float) -> float:
    """Certified lower bound for the comparison metric's first nonzero
    eigenvalue: monotonicity of the Rayleigh quotient under pointwise
    conformal-factor domination gives lambda'_1 >= min(g/g') * lambda_1.
    """
    if pointwise_min_ratio <= 0:
        raise ValueError("pointwise ratio must be positive")
    return pointwise_min_ratio * spectrum.first_nonzero()


def pointwise_factor_ratio(
    mesh: TriangleMesh,
    family: DegenerationFamily,
    kind_num: MetricKind,
    kind_den: MetricKind,
    s: complex,
) -> float:
    """min over mesh vertices of factor(kind_num) / factor(kind_den)."""
    from .family import ChartPoint, conformal_factor

    best = math.inf
    for chart, coord in mesh.vertex_charts():
        num = conformal_factor(family, kind_num, ChartPoint(chart, coord), s)
        den = conformal_factor(family, kind_den, ChartPoint(chart, coord), s)
        best = min(best, num / den)
    return best


def dump_matrix(problem: SpectralProblem, path: str) -> None:
    """Coordinate-format text dump: '# rows cols nnz' then 'i j value'."""
    coo = problem.stiffness.tocoo()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz} stiffness\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")
        fh.write(f"# {problem.dimension} mass diagonal\n")
        for i, v in enumerate(problem.mass):
            fh.write(f"{i} {i} {v:.17g}\n")
