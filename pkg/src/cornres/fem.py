"""P1 finite elements for the sign-changing transmission problem.

Discretizes: find u in H^1_0(Omega) with

    (sigma grad u, grad v) = (f, v)   for all v in H^1_0(Omega),

where sigma equals sigma_plus > 0 on the sector pi/4 < th < pi and
sigma_minus < 0 on 0 < th < pi/4.  The bilinear form is symmetric but
indefinite, so the solver is a sparse LU with partial pivoting plus one
step of iterative refinement; near-singular systems (the resonance
phenomenon under study) are reported, never regularized.

The module also provides the diagnostic instruments used by the
parameter sweeps: the smallest singular value of the reduced matrix via
inverse iteration on the factorization, discrete H^1-seminorm / L^2
norms, and extraction of the complex coefficients of the oscillating
radial modes r^(+-i*mu) from a solved field by angular projection onto
the interface eigenprofile followed by a small least-squares fit in
ln r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from matplotlib.tri import LinearTriInterpolator, Triangulation
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import (
    ConvergenceError,
    DegenerateError,
    FitError,
    ParamError,
    SingularSystemError,
)
from .mesh import REGION_MINUS, AnnulusMesh, triangle_areas
from .spectral import Contrast, SpectralData, phi_eval

#: pivots below PIVOT_RTOL * max|K_ij| make solve_direct refuse the system
PIVOT_RTOL = 1e-14
#: relative residual solve_direct guarantees after iterative refinement
RESIDUAL_RTOL = 1e-8
#: triangle areas below AREA_RTOL * max(area) abort assembly
AREA_RTOL = 1e-14
#: inverse iteration: relative eigenvalue-change stop and iteration cap
INVITER_TOL = 1e-8
INVITER_MAXIT = 500
INVITER_BURST = 80  # plain iterations before the Lanczos fallback
#: number of quadrature radii used by the ring extraction
RING_RADII = 16


# ----------------------------------------------------------------------
# sources

@dataclass(frozen=True)
class HalfPlaneX:
    """Piecewise-constant source: ``amplitude`` where x < threshold, else 0."""

    threshold: float
    amplitude: float

    def __post_init__(self):
        if not math.isfinite(self.amplitude) or not math.isfinite(self.threshold):
            raise ParamError("HalfPlaneX parameters must be finite")

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.where(x < self.threshold, self.amplitude, 0.0)


@dataclass(frozen=True)
class Annular:
    """Source supported on the outer annulus r >= r_inner.

    Leaves the zone delta < r < r_inner source free, which is where the
    coefficient-extraction rings must live.
    """

    r_inner: float
    amplitude: float

    def __post_init__(self):
        if not 0.0 < self.r_inner < 1.0:
            raise ParamError(f"r_inner must lie in (0, 1), got {self.r_inner!r}")
        if not math.isfinite(self.amplitude):
            raise ParamError("amplitude must be finite")

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.where(np.hypot(x, y) >= self.r_inner, self.amplitude, 0.0)


@dataclass(frozen=True)
class NodalValues:
    """Source given by nodal values of its P1 interpolant."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ParamError("nodal source values must be finite")
        object.__setattr__(self, "values", values)


SourceSpec = Union[HalfPlaneX, Annular, NodalValues]


# ----------------------------------------------------------------------
# matrices

@dataclass(frozen=True)
class SparseSymMatrix:
    """Symmetric sparse matrix in CSR form (both triangles stored)."""

    matrix: sparse.csr_matrix

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def max_norm(self) -> float:
        """Largest entry magnitude (0 for an empty matrix)."""
        if self.matrix.nnz == 0:
            return 0.0
        return float(np.abs(self.matrix.data).max())

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ vec


def _triangle_geometry(mesh: AnnulusMesh):
    pts = mesh.vertices[mesh.triangles]
    x, y = pts[:, :, 0], pts[:, :, 1]
    # gradient coefficients of the barycentric basis: grad(lambda_k) =
    # (b_k, c_k) / (2 A) with the cyclic edge differences below
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    areas = triangle_areas(mesh)
    if areas.size and np.abs(areas).min() <= AREA_RTOL * np.abs(areas).max():
        raise DegenerateError("triangle area below 1e-14 of mesh scale")
    return b, c, areas


def _scatter(mesh: AnnulusMesh, local: np.ndarray) -> SparseSymMatrix:
    """Sum (T, 3, 3) local matrices into a global sparse matrix."""
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_vertices
    mat = sparse.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(n, n)
    ).tocsr()
    return SparseSymMatrix(mat)


def assemble_stiffness(
    mesh: AnnulusMesh, contrast: Union[Contrast, tuple, np.ndarray]
) -> SparseSymMatrix:
    """Stiffness matrix of (sigma grad u, grad v) with P1 elements.

    ``contrast`` is a :class:`Contrast` (sign-changing problem), a
    plain ``(sigma_plus, sigma_minus)`` pair — which also admits
    single-sign coefficients such as sigma = 1 for norm matrices — or
    an array of one coefficient per triangle for masked energies.
    """
    b, c, areas = _triangle_geometry(mesh)
    if isinstance(contrast, Contrast):
        sigma_plus, sigma_minus = contrast.sigma_plus, contrast.sigma_minus
    elif isinstance(contrast, np.ndarray):
        if contrast.shape != (mesh.n_triangles,):
            raise ParamError(
                f"per-triangle coefficients have shape {contrast.shape}, "
                f"expected ({mesh.n_triangles},)"
            )
        sigma_plus = sigma_minus = None
    else:
        sigma_plus, sigma_minus = map(float, contrast)
    if sigma_plus is None:
        sigma = contrast.astype(float)
    else:
        sigma = np.where(mesh.region == REGION_MINUS, sigma_minus, sigma_plus)
    coef = sigma / (4.0 * areas)
    local = coef[:, None, None] * (
        b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]
    )
    return _scatter(mesh, local)


def mass_matrix(mesh: AnnulusMesh) -> SparseSymMatrix:
    """Consistent P1 mass matrix (local block A/12 * (ones + eye))."""
    _, _, areas = _triangle_geometry(mesh)
    block = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = areas[:, None, None] * block
    return _scatter(mesh, local)


def assemble_load(mesh: AnnulusMesh, source: SourceSpec) -> np.ndarray:
    """Load vector via the 3-point edge-midpoint rule.

    The rule is exact for quadratics, hence exact for P1 sources; the
    discontinuous indicators are simply evaluated at the midpoints,
    which costs O(h) consistency on the cut triangles only.
    """
    pts = mesh.vertices[mesh.triangles]
    _, _, areas = _triangle_geometry(mesh)
    # q_k = midpoint of the edge opposite vertex k; lambda_i(q_k) = 1/2 - delta_ik/2
    q = 0.5 * (pts[:, [1, 2, 0], :] + pts[:, [2, 0, 1], :])
    if isinstance(source, NodalValues):
        if source.values.shape != (mesh.n_vertices,):
            raise ParamError(
                f"nodal source has length {source.values.shape}, "
                f"expected ({mesh.n_vertices},)"
            )
        u = source.values[mesh.triangles]
        fq = 0.5 * (u[:, [1, 2, 0]] + u[:, [2, 0, 1]])
    else:
        fq = source.evaluate(q[:, :, 0], q[:, :, 1])
    contrib = (areas / 6.0)[:, None] * (fq.sum(axis=1, keepdims=True) - fq)
    load = np.zeros(mesh.n_vertices)
    np.add.at(load, mesh.triangles.ravel(), contrib.ravel())
    return load


# ----------------------------------------------------------------------
# Dirichlet reduction and direct solve

@dataclass(frozen=True)
class ReducedSystem:
    """Stiffness system after eliminating Dirichlet (boundary) rows."""

    matrix: SparseSymMatrix
    load: np.ndarray
    interior: np.ndarray
    n_full: int
    mesh: Optional[AnnulusMesh] = None

    @property
    def dimension(self) -> int:
        return self.matrix.dimension

    def expand(self, reduced: np.ndarray) -> np.ndarray:
        """Re-insert eliminated vertices with value zero."""
        full = np.zeros(self.n_full)
        full[self.interior] = reduced
        return full


def apply_dirichlet(
    matrix: SparseSymMatrix, load: np.ndarray, mesh: AnnulusMesh
) -> ReducedSystem:
    """Restrict to the non-boundary vertices (homogeneous Dirichlet)."""
    if matrix.dimension != mesh.n_vertices or load.shape != (mesh.n_vertices,):
        raise ParamError("matrix/load dimensions do not match the mesh")
    interior = np.nonzero(~mesh.boundary_flags)[0]
    sub = matrix.matrix[interior][:, interior].tocsr()
    return ReducedSystem(
        matrix=SparseSymMatrix(sub),
        load=load[interior],
        interior=interior,
        n_full=mesh.n_vertices,
        mesh=mesh,
    )


@dataclass(frozen=True)
class Factorization:
    """Sparse LU of a reduced matrix, reusable across solves."""

    matrix: SparseSymMatrix
    lu: object
    pivot_floor: float
    max_norm: float

    @property
    def dimension(self) -> int:
        return self.matrix.dimension

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.dimension == 0:
            return np.zeros(0)
        return self.lu.solve(rhs)


def factorize(matrix: SparseSymMatrix) -> Factorization:
    """LU-factorize with partial pivoting.

    Raises :class:`SingularSystemError` only for an exactly singular
    matrix; small-pivot policy is left to the caller (solve_direct
    enforces it, smallest_singular deliberately does not).
    """
    n = matrix.dimension
    if n == 0:
        return Factorization(matrix, None, math.inf, 0.0)
    try:
        lu = splu(matrix.matrix.tocsc())
    except RuntimeError as exc:
        raise SingularSystemError(
            f"factorization failed: {exc}", pivot_floor=0.0
        ) from exc
    pivot_floor = float(np.abs(lu.U.diagonal()).min())
    return Factorization(matrix, lu, pivot_floor, matrix.max_norm())


def solve_direct(
    system: ReducedSystem, factorization: Optional[Factorization] = None
) -> "FemSolution":
    """Direct solve with one step of iterative refinement.

    Raises :class:`SingularSystemError` when the smallest pivot falls
    below ``1e-14`` of the matrix max-norm (the expected event at the
    resonance radii) or when the refined residual exceeds ``1e-8``.
    """
    fact = factorization if factorization is not None else factorize(system.matrix)
    if fact.dimension != system.dimension:
        raise ParamError("factorization does not match the system")
    if fact.dimension > 0 and fact.pivot_floor <= PIVOT_RTOL * fact.max_norm:
        raise SingularSystemError(
            f"pivot floor {fact.pivot_floor:.3e} below "
            f"{PIVOT_RTOL:g} * max-norm {fact.max_norm:.3e}",
            pivot_floor=fact.pivot_floor,
        )
    b = system.load
    x = fact.solve(b)
    bnorm = float(np.linalg.norm(b))
    if bnorm > 0.0:
        residual = b - system.matrix @ x
        x = x + fact.solve(residual)
        residual = b - system.matrix @ x
        rel = float(np.linalg.norm(residual)) / bnorm
    else:
        x = np.zeros_like(b)
        rel = 0.0
    if not rel <= RESIDUAL_RTOL:
        raise SingularSystemError(
            f"relative residual {rel:.3e} exceeds {RESIDUAL_RTOL:g} "
            "after iterative refinement",
            pivot_floor=fact.pivot_floor,
        )
    return FemSolution(
        mesh=system.mesh,
        values=system.expand(x),
        pivot_floor=fact.pivot_floor,
        residual=rel,
    )


@dataclass(frozen=True)
class FemSolution:
    """Solved nodal field; boundary vertices carry exact zeros."""

    mesh: Optional[AnnulusMesh]
    values: np.ndarray
    pivot_floor: float
    residual: float


def solve_problem(
    mesh: AnnulusMesh, contrast: Union[Contrast, tuple], source: SourceSpec
) -> FemSolution:
    """Assemble, reduce and solve in one call."""
    matrix = assemble_stiffness(mesh, contrast)
    load = assemble_load(mesh, source)
    return solve_direct(apply_dirichlet(matrix, load, mesh))


def smallest_singular(
    matrix: Union[SparseSymMatrix, Factorization],
    tol: float = INVITER_TOL,
    max_iterations: int = INVITER_MAXIT,
    seed: int = 0,
) -> float:
    """Smallest singular value of a symmetric matrix by inverse iteration.

    The estimate 1 / ||K^-1 v|| is robust for indefinite matrices with
    paired +-lambda extremes (the iterate may alternate but the estimate
    converges).  When several near-zero eigenvalues have close
    magnitudes the iteration converges too slowly, so after a short
    burst it falls back to a shift-invert Lanczos solve, which
    separates clustered magnitudes.  Returns 0.0 for an exactly
    singular matrix and ``inf`` for an empty one.
    """
    if isinstance(matrix, Factorization):
        fact = matrix
    else:
        if matrix.dimension == 0:
            return math.inf
        try:
            fact = factorize(matrix)
        except SingularSystemError:
            return 0.0
    n = fact.dimension
    if n == 0:
        return math.inf
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    previous = None
    for _ in range(min(max_iterations, INVITER_BURST)):
        w = fact.solve(v)
        norm_w = float(np.linalg.norm(w))
        if not math.isfinite(norm_w) or norm_w == 0.0:
            return 0.0  # inverse blows up: numerically singular
        current = 1.0 / norm_w
        if previous is not None and abs(current - previous) <= tol * current:
            return current
        previous = current
        v = w / norm_w
    if n == 1:
        # A 1x1 system converges on the second pass above.
        raise ConvergenceError("inverse iteration did not settle")
    op_inv = sparse.linalg.LinearOperator(
        (n, n), matvec=fact.solve, dtype=float
    )
    try:
        values = sparse.linalg.eigsh(
            fact.matrix.matrix,
            k=1,
            sigma=0.0,
            which="LM",
            OPinv=op_inv,
            v0=v,
            tol=tol,
            maxiter=max_iterations,
            return_eigenvectors=False,
        )
    except sparse.linalg.ArpackError as exc:
        raise ConvergenceError(
            f"shift-invert eigensolve did not settle: {exc}"
        ) from exc
    smallest = float(abs(values[0]))
    if not math.isfinite(smallest):
        return 0.0
    return smallest


# ----------------------------------------------------------------------
# norms

def h1_seminorm(solution: FemSolution) -> float:
    """Discrete ||grad u||: sqrt(u' K1 u) with unit-coefficient stiffness."""
    if solution.mesh is None:
        raise ParamError("solution carries no mesh")
    k1 = assemble_stiffness(solution.mesh, (1.0, 1.0))
    u = solution.values
    return math.sqrt(max(float(u @ (k1 @ u)), 0.0))


def l2_norm(solution: FemSolution) -> float:
    """Discrete L^2 norm: sqrt(u' M u) with the consistent mass matrix."""
    if solution.mesh is None:
        raise ParamError("solution carries no mesh")
    m = mass_matrix(solution.mesh)
    u = solution.values
    return math.sqrt(max(float(u @ (m @ u)), 0.0))


# ----------------------------------------------------------------------
# coefficient extraction

def _require_ring(ring, delta: float, mu: float):
    r_lo, r_hi = map(float, ring)
    if not delta < r_lo < r_hi < 1.0:
        raise ParamError(
            f"ring ({r_lo!r}, {r_hi!r}) must satisfy delta < r_lo < r_hi < 1"
        )
    min_ratio = math.exp(math.pi / (4.0 * mu))
    if r_hi / r_lo < min_ratio * (1.0 - 1e-12):
        raise FitError(
            f"ring ratio {r_hi / r_lo:.6g} below e^(pi/(4 mu)) = {min_ratio:.6g}; "
            "the oscillating pair is not resolvable"
        )
    return r_lo, r_hi


def _theta_samples(mesh: AnnulusMesh):
    """Composite-trapezoid angular nodes split at the interface."""
    if mesh.theta_grid is not None:
        j_if = int(np.argmin(np.abs(mesh.theta_grid - math.pi / 4)))
        n_minus = max(2 * j_if, 8)
        n_plus = max(2 * (mesh.theta_grid.size - 1 - j_if), 24)
    else:
        n_minus, n_plus = 64, 192
    minus = np.linspace(0.0, math.pi / 4, n_minus + 1)
    plus = np.linspace(math.pi / 4, math.pi, n_plus + 1)
    w_minus = np.full(n_minus + 1, (math.pi / 4) / n_minus)
    w_minus[[0, -1]] *= 0.5
    w_plus = np.full(n_plus + 1, (3 * math.pi / 4) / n_plus)
    w_plus[[0, -1]] *= 0.5
    return minus, w_minus, plus, w_plus


def ring_profile(
    solution: FemSolution,
    ring,
    spectral: SpectralData,
    n_radii: int = RING_RADII,
):
    """Angular projection of the field onto the interface eigenprofile.

    Returns ``(radii, m)`` where ``m[q]`` approximates the coefficient
    of phi(theta) in the field at radius ``radii[q]``:

        m(r) = sum_s w_s sigma(th_s) u(r, th_s) phi(th_s)
             / sum_s w_s sigma(th_s) phi(th_s)^2.

    The discrete normalization in the denominator makes the projection
    reproduce g(r) exactly (to rounding) for nodal fields of the exact
    product form g(r) phi(theta), independent of quadrature error.
    """
    mesh = solution.mesh
    if mesh is None:
        raise ParamError("solution carries no mesh")
    r_lo, r_hi = _require_ring(ring, mesh.delta, spectral.mu)
    radii = np.geomspace(r_lo, r_hi, n_radii)

    th_minus, w_minus, th_plus, w_plus = _theta_samples(mesh)
    thetas = np.concatenate([th_minus, th_plus])
    weights = np.concatenate([w_minus, w_plus])
    sigma = np.concatenate(
        [
            np.full(th_minus.size, spectral.contrast.sigma_minus),
            np.full(th_plus.size, spectral.contrast.sigma_plus),
        ]
    )
    phi = phi_eval(thetas, spectral)
    denom = float(np.sum(weights * sigma * phi * phi))
    if denom <= 0.0:
        raise FitError("degenerate weighted profile normalization")

    triang = Triangulation(
        mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles
    )
    interp = LinearTriInterpolator(triang, solution.values)
    xs = radii[:, None] * np.cos(thetas)[None, :]
    ys = radii[:, None] * np.sin(thetas)[None, :]
    u = interp(xs, ys)
    if np.ma.is_masked(u):
        # th = 0 and th = pi touch the straight boundary edges; those
        # samples multiply phi = 0 anyway, so only interior gaps matter
        bad = np.array(u.mask, copy=True)
        bad[:, [0, -1]] = False
        if bad.any():
            raise FitError("ring samples fell outside the mesh")
        u = u.filled(0.0)
    else:
        u = np.asarray(u)
    m = (u * (weights * sigma * phi)[None, :]).sum(axis=1) / denom
    return radii, m


def fit_ring_profile(radii: np.ndarray, m: np.ndarray, mu: float):
    """Least-squares split of a radial profile into the mode family.

    Fits m(r) over the real span of {r^(i mu), r^(-i mu), r^2, r^-2, 1}
    and returns ``(c_plus, c_minus)``, the complex amplitudes of the
    oscillating pair under the convention m = Re(c_plus r^(i mu)) +
    Re(c_minus r^(-i mu)) with c_minus = conj(c_plus) for real fields.
    """
    radii = np.asarray(radii, dtype=float)
    m = np.asarray(m, dtype=float)
    if radii.ndim != 1 or radii.shape != m.shape or radii.size < 5:
        raise FitError("need at least 5 aligned (radius, value) samples")
    t = np.log(radii)
    columns = np.stack(
        [np.cos(mu * t), np.sin(mu * t), np.exp(2 * t), np.exp(-2 * t), np.ones_like(t)],
        axis=1,
    )
    scale = np.linalg.norm(columns, axis=0)
    if np.any(scale == 0.0):
        raise FitError("degenerate fit basis on this ring")
    coef, _, rank, _ = np.linalg.lstsq(columns / scale, m, rcond=None)
    if rank < 5:
        raise FitError("rank-deficient ring fit; widen the ring")
    coef = coef / scale
    p, q = coef[0], coef[1]
    # Re{(p - i q) e^(i mu t)} = p cos(mu t) + q sin(mu t)
    c_plus = complex(p, -q)
    return c_plus, c_plus.conjugate()


def extract_singular_coefficients(
    solution: FemSolution, ring, spectral: SpectralData
):
    """Complex amplitudes of the r^(+-i mu) modes in a solved field.

    Composition of :func:`ring_profile` and :func:`fit_ring_profile`;
    the ring must avoid the source support for the split to make sense.
    """
    radii, m = ring_profile(solution, ring, spectral)
    return fit_ring_profile(radii, m, spectral.mu)


def solution_csv(solution: FemSolution) -> bytes:
    """Nodal dump ``x,y,u`` (one header line, LF endings)."""
    if solution.mesh is None:
        raise ParamError("solution carries no mesh")
    lines = ["x,y,u"]
    for (x, y), u in zip(solution.mesh.vertices, solution.values):
        lines.append(f"{x:.17g},{y:.17g},{u:.17g}")
    return ("\n".join(lines) + "\n").encode("ascii")
