"""Closed-form structure of the separable annulus-sector problem.

In log-polar coordinates the homogeneous transmission problem separates
into angular modes indexed by n >= 1.  For each mode the matching
conditions at the interface th = pi/4 reduce to a 2x2 linear system
whose determinant (up to a positive factor) is

    D_n(delta) = sigma_minus sinh(3 nu) cosh(nu)
               + sigma_plus  sinh(nu)  cosh(3 nu),
    nu = n pi^2 / (4 ln delta) < 0.

Zeros of D_n in delta are exactly the resonance radii where the
discrete operator loses injectivity; the corresponding kernel fields
are products of sinh profiles in the angle and sin profiles in ln r and
are available here in closed form for residual checks against the
assembled stiffness.

The second half of the module provides the sign-flipping coercivity
operators: with R_plus u (r, th) = u(r, pi - 3 th) and
R_minus u (r, th) = u(r, pi/2 - th) (zero past th = pi/2),

    T_plus u  = u on the plus sector,  -u + 2 R_plus u  on the minus,
    T_minus u = -u on the minus,       u - 2 R_minus u  on the plus,

realized as exact index permutations on the meshes built by
:func:`cornres.mesh.build_tcoercivity_mesh`.  A randomized probe
measures the coercivity ratio |<K u, T u>| / |u|_H1^2, which stays
bounded below for contrasts in the certified regimes and collapses at
resonance radii for contrasts inside the critical interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.optimize import brentq
from scipy.sparse.linalg import eigsh

from .errors import (
    DomainError,
    MeshKindError,
    NotResonantError,
    ParamError,
    RegimeError,
)
from .fem import apply_dirichlet, assemble_stiffness, factorize
from .mesh import (
    KIND_TCOERCIVITY,
    VARIANT_PLUS31,
    VARIANT_UNIFORM_PLUS,
    AnnulusMesh,
)
from .spectral import Contrast, Regime, classify_contrast

T_PLUS = "t-plus"
T_MINUS = "t-minus"

#: |det| <= DET_TOL * max(1, term scale) admits delta as a resonance
DET_TOL = 1e-8


def _sigma_pair(contrast: Union[Contrast, tuple]):
    if isinstance(contrast, Contrast):
        return contrast.sigma_plus, contrast.sigma_minus
    sigma_plus, sigma_minus = map(float, contrast)
    return sigma_plus, sigma_minus


def mode_exponent(delta: float, n: int) -> float:
    """nu = n pi^2 / (4 ln delta), negative throughout delta in (0, 1)."""
    if not 0.0 < delta < 1.0:
        raise ParamError(f"delta must lie in (0, 1), got {delta!r}")
    if int(n) != n or n < 1:
        raise ParamError(f"mode index must be a positive integer, got {n!r}")
    return n * math.pi**2 / (4.0 * math.log(delta))


def _det_terms(contrast, delta: float, n: int):
    sigma_plus, sigma_minus = _sigma_pair(contrast)
    nu = mode_exponent(delta, n)
    t1 = sigma_minus * math.sinh(3 * nu) * math.cosh(nu)
    t2 = sigma_plus * math.sinh(nu) * math.cosh(3 * nu)
    return t1, t2, nu


def mode_determinant(contrast: Union[Contrast, tuple], delta: float, n: int) -> float:
    """Mode-n matching determinant; its zeros in delta are the resonances.

    Overflows to +-inf for |nu| beyond ~250 (delta extremely close to
    1); use :func:`mode_determinant_root` for root finding, which works on a
    bounded rescaling.
    """
    t1, t2, _ = _det_terms(contrast, delta, n)
    return t1 + t2


def mode_determinant_root(contrast: Contrast, n: int) -> float:
    """The unique delta where the mode-n determinant vanishes.

    Solves the bounded equivalent sigma_minus tanh(3 nu) + sigma_plus
    tanh(nu) = 0 for nu < 0 and maps back through delta =
    exp(n pi^2 / (4 nu)).  Requires a contrast inside the critical
    interval (no sign change otherwise).
    """
    if classify_contrast(contrast) is not Regime.CRITICAL_INTERVAL:
        raise RegimeError(
            "resonance roots exist only for contrasts inside the "
            "critical interval (-1, -1/3)"
        )
    if int(n) != n or n < 1:
        raise ParamError(f"mode index must be a positive integer, got {n!r}")

    def scaled(nu):
        return contrast.sigma_minus * math.tanh(3 * nu) + (
            contrast.sigma_plus * math.tanh(nu)
        )

    nu_star = brentq(scaled, -30.0, -1e-12, xtol=1e-15, rtol=8.9e-16)
    return math.exp(n * math.pi**2 / (4.0 * nu_star))


@dataclass(frozen=True)
class ModeData:
    """One angular kernel mode: exponent nu and sector amplitudes."""

    n: int
    nu: float
    u_plus_n: float
    u_minus_n: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParamError(f"mode index must be a positive integer, got {self.n!r}")
        if not (math.isfinite(self.nu) and self.nu < 0.0):
            raise ParamError(f"mode exponent must be finite and negative, got {self.nu!r}")


def kernel_coefficients(
    contrast: Contrast, delta: float, n: int
) -> ModeData:
    """Amplitudes of the one-dimensional kernel at a resonance radius.

    Normalization: u_plus_n = 1.  The value-continuity relation then
    forces u_minus_n = -sinh(3 nu)/sinh(nu); the flux relation holds
    because the determinant vanishes (its residual is det/sinh(nu)).

    Raises :class:`NotResonantError` unless |det| <= 1e-8 relative to
    the magnitude of its two terms.
    """
    t1, t2, nu = _det_terms(contrast, delta, n)
    det = t1 + t2
    scale = max(1.0, abs(t1) + abs(t2))
    if not abs(det) <= DET_TOL * scale:
        raise NotResonantError(
            f"determinant {det:.3e} is not zero (scale {scale:.3e}); "
            f"delta={delta!r} is not the mode-{n} resonance"
        )
    return ModeData(
        n=n, nu=nu, u_plus_n=1.0, u_minus_n=-math.sinh(3 * nu) / math.sinh(nu)
    )


def kernel_field_eval(r, theta, mode: ModeData, delta: float):
    """Evaluate the single-mode kernel field on the annulus sector.

    Plus branch (th >= pi/4):  u_plus_n  sinh(n pi (th - pi)/ln delta) S(r)
    Minus branch (th < pi/4):  u_minus_n sinh(n pi th/ln delta) S(r)
    with S(r) = sin(n pi (ln r - ln delta)/ln delta).  Vanishes exactly
    on all four boundary pieces.  Accepts scalars or arrays.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(r < delta * (1 - 1e-12)) or np.any(r > 1 + 1e-12):
        raise DomainError(f"radius outside [{delta}, 1]")
    if np.any(theta < -1e-12) or np.any(theta > math.pi + 1e-12):
        raise DomainError("angle outside [0, pi]")
    log_delta = math.log(delta)
    k = mode.n * math.pi
    x = (np.log(np.minimum(r, 1.0)) - log_delta) / log_delta
    radial = np.where(x == np.round(x), 0.0, np.sin(k * x))
    theta_c = np.clip(theta, 0.0, math.pi)
    plus = mode.u_plus_n * np.sinh(k * (theta_c - math.pi) / log_delta)
    minus = mode.u_minus_n * np.sinh(k * theta_c / log_delta)
    value = np.where(theta_c >= math.pi / 4, plus, minus) * radial
    return value if value.ndim else float(value)


def kernel_residual_check(
    contrast: Contrast,
    delta: float,
    n: int,
    mesh: AnnulusMesh,
    check_resonant: bool = True,
) -> float:
    """Relative stiffness residual of the interpolated kernel field.

    Interpolates the closed-form mode at the mesh vertices, applies the
    Dirichlet-reduced stiffness K and returns ||K u|| / (max|K| ||u||).
    Small at true resonance radii (O(h^2) consistency), order-of-
    magnitude larger when ``delta`` is off resonance — pass
    ``check_resonant=False`` to run that contrast experiment with the
    same amplitude construction.
    """
    if not math.isclose(mesh.delta, delta, rel_tol=1e-12):
        raise ParamError(
            f"mesh was built at delta={mesh.delta!r}, not {delta!r}"
        )
    if check_resonant:
        mode = kernel_coefficients(contrast, delta, n)
    else:
        nu = mode_exponent(delta, n)
        mode = ModeData(
            n=n, nu=nu, u_plus_n=1.0, u_minus_n=-math.sinh(3 * nu) / math.sinh(nu)
        )
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    r = np.clip(np.hypot(x, y), delta, 1.0)
    theta = np.clip(np.arctan2(y, x), 0.0, math.pi)
    u = kernel_field_eval(r, theta, mode, delta)
    matrix = assemble_stiffness(mesh, contrast)
    reduced = apply_dirichlet(matrix, np.zeros(mesh.n_vertices), mesh)
    u_int = u[reduced.interior]
    norm_u = float(np.linalg.norm(u_int))
    if norm_u == 0.0:
        raise ParamError("kernel field vanished at every interior vertex")
    return float(
        np.linalg.norm(reduced.matrix @ u_int) / (reduced.matrix.max_norm() * norm_u)
    )


# ----------------------------------------------------------------------
# discrete coercivity operators

def _require_variant(mesh: AnnulusMesh, variant: str, opname: str):
    if mesh.kind != KIND_TCOERCIVITY or mesh.reflection is None:
        raise MeshKindError(
            f"{opname} needs a mesh from build_tcoercivity_mesh, "
            f"got kind={mesh.kind!r}"
        )
    if mesh.variant != variant:
        raise MeshKindError(
            f"{opname} needs the {variant!r} mesh variant, got {mesh.variant!r}"
        )


def t_plus_apply(field: np.ndarray, mesh: AnnulusMesh) -> np.ndarray:
    """T_plus: identity on the plus sector, -u + 2 R_plus u on the minus."""
    _require_variant(mesh, VARIANT_PLUS31, "t_plus_apply")
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_vertices,):
        raise ParamError(
            f"field has shape {field.shape}, expected ({mesh.n_vertices},)"
        )
    out = field.copy()
    minus = mesh.side < 0
    out[minus] = 2.0 * field[mesh.reflection[minus]] - field[minus]
    return out


def t_minus_apply(field: np.ndarray, mesh: AnnulusMesh) -> np.ndarray:
    """T_minus: -u on the minus sector, u - 2 R_minus u on the plus.

    R_minus reflects th -> pi/2 - th, so it only feeds the band
    pi/4 <= th <= pi/2 (closed-set convention at th = pi/2); the rest
    of the plus sector is untouched.
    """
    _require_variant(mesh, VARIANT_UNIFORM_PLUS, "t_minus_apply")
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_vertices,):
        raise ParamError(
            f"field has shape {field.shape}, expected ({mesh.n_vertices},)"
        )
    out = field.copy()
    band = (mesh.side >= 0) & (mesh.reflection >= 0)
    out[band] = field[band] - 2.0 * field[mesh.reflection[band]]
    minus = mesh.side < 0
    out[minus] = -field[minus]
    return out


def measure_reflection_norm(mesh: AnnulusMesh) -> float:
    """Operator norm of the discrete angular reflection in H^1 seminorm.

    Solves the generalized eigenproblem max <grad(R u), grad(R u)>_minus
    / <grad u, grad u>_plus over plus-sector fields vanishing on the
    outer boundary.  Approaches sqrt(3) for the 3:1 variant (R_plus
    compresses the angle by 3) and equals 1 to rounding for the uniform
    variant (R_minus is a Euclidean reflection there).
    """
    if mesh.kind != KIND_TCOERCIVITY or mesh.reflection is None:
        raise MeshKindError("reflection norm needs a coercivity mesh")
    if mesh.variant == VARIANT_PLUS31:
        # R_plus maps the plus sector onto the minus sector
        target = mesh.side <= 0
        image_energy = assemble_stiffness(mesh, (0.0, 1.0)).matrix
        source_energy = assemble_stiffness(mesh, (1.0, 0.0)).matrix
        free = np.nonzero((mesh.side >= 0) & ~mesh.boundary_flags)[0]
    else:
        # R_minus maps the minus sector onto the band pi/4 <= th <= pi/2
        target = (mesh.side >= 0) & (mesh.reflection >= 0)
        centroid = mesh.vertices[mesh.triangles].mean(axis=1)
        angle = np.arctan2(centroid[:, 1], centroid[:, 0])
        in_band = (angle > math.pi / 4) & (angle < math.pi / 2)
        image_energy = assemble_stiffness(mesh, in_band.astype(float)).matrix
        source_energy = assemble_stiffness(mesh, (0.0, 1.0)).matrix
        free = np.nonzero((mesh.side <= 0) & ~mesh.boundary_flags)[0]

    # quadratic form of u -> R u, transplanted by the index pairing
    rows = np.nonzero(target)[0]
    cols = mesh.reflection[rows]
    n = mesh.n_vertices
    r_op = sparse.coo_matrix(
        (np.ones(rows.size), (rows, cols)), shape=(n, n)
    ).tocsr()
    b_form = (r_op.T @ image_energy @ r_op).tocsc()

    a_ff = source_energy[free][:, free].tocsc()
    b_ff = b_form[free][:, free].tocsc()
    if free.size <= 2 or b_ff.nnz == 0:
        raise ParamError("mesh too small to measure the reflection norm")
    if free.size < 60:
        lam = float(eigh(b_ff.toarray(), a_ff.toarray(), eigvals_only=True)[-1])
    else:
        lam = float(eigsh(b_ff, k=1, M=a_ff, which="LA", return_eigenvectors=False)[0])
    return math.sqrt(max(lam, 0.0))


def coercivity_probe(
    contrast: Contrast,
    mesh: AnnulusMesh,
    trials: int,
    which: str,
    seed: int = 0,
) -> float:
    """Minimum observed coercivity ratio |<K u, T u>| / |u|_H1^2.

    Trial fields are solves u = K^-1 f for seeded random loads f: the
    inverse filters the noise toward the physically reachable fields,
    so a near-kernel direction (resonance) actually shows up as a
    collapsing ratio, which plain white noise would average away.

    ``which`` selects the operator ("t-plus" or "t-minus"); the regime
    guard rejects only the certified zone of the *opposite* operator,
    so contrasts inside the critical interval are allowed — probing the
    degradation there is the point of the experiment.
    """
    if which == T_PLUS:
        if contrast.kappa <= -1.0:
            raise RegimeError(
                "t-plus probes contrasts with kappa > -1 (certified for "
                "kappa > -1/3); use t-minus below -1"
            )
        apply_t = t_plus_apply
    elif which == T_MINUS:
        if contrast.kappa >= -1.0 / 3.0:
            raise RegimeError(
                "t-minus probes contrasts with kappa < -1/3 (certified "
                "for kappa < -1); use t-plus above -1/3"
            )
        apply_t = t_minus_apply
    else:
        raise ParamError(f"unknown operator selector {which!r}")
    if int(trials) != trials or trials < 1:
        raise ParamError(f"trials must be a positive integer, got {trials!r}")

    stiffness = assemble_stiffness(mesh, contrast)
    unit = assemble_stiffness(mesh, (1.0, 1.0))
    reduced = apply_dirichlet(stiffness, np.zeros(mesh.n_vertices), mesh)
    fact = factorize(reduced.matrix)
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(int(trials)):
        f = rng.standard_normal(reduced.dimension)
        u = reduced.expand(fact.solve(f))
        if not np.all(np.isfinite(u)):
            return 0.0  # factorization blew up: effectively singular
        energy = float(u @ (unit @ u))
        if energy <= 0.0:
            continue
        t_u = apply_t(u, mesh)
        ratio = abs(float(u @ (stiffness @ t_u))) / energy
        worst = min(worst, ratio)
    if worst is math.inf:
        raise ParamError("all trial fields degenerate; check the system")
    return worst
