"""Structured triangulations of the annulus sector with a conforming interface.

The computational domain is the half-annulus sector

    Omega = {(r cos th, r sin th) : delta < r < 1, 0 < th < pi},

split by the ray th = pi/4 into a "plus" part (pi/4 < th < pi) and a
"minus" part (0 < th < pi/4).  Meshes are generated on a tensor grid in
the log-polar coordinates (t, th) = (ln r, th): the grid is uniform in t,
so concentric layers accumulate geometrically toward the inner circle,
matching the separated-variable structure exp(i*mu*t) of the near-corner
fields.  Every grid quad is split into four triangles through its center
(criss-cross), which keeps the triangle pattern mirror symmetric about
any grid line; the interface th = pi/4 is always a grid line, so no
triangle straddles it.

Two builders are provided:

* :func:`build_annulus_mesh` - uniform angular spacing ``pi / n_theta``
  with ``n_theta`` divisible by 4.
* :func:`build_tcoercivity_mesh` - angular grids aligned with the sign
  -flipping reflections used by the coercivity operators.  The default
  variant gives the plus sector the same cell count as the minus sector
  (spacing ratio 3:1), so the reflection th -> pi - 3*th is an exact
  permutation of vertex indices.  With ``uniform_plus=True`` the plus
  sector keeps the minus spacing throughout, which makes th -> pi/2 - th
  an exact index map from the minus sector into the band
  pi/4 <= th <= pi/2.

Quad centers are placed at the Euclidean average of the four mapped
corners.  This keeps every center strictly inside its (convex) quad for
any admissible parameter combination, so all triangles are positively
oriented even on extreme-aspect grids.  The price is that reflected
center vertices match their partner in angle exactly but in radius only
to O(dth^2); the reflection is nevertheless exact as an index
permutation, which is what the discrete operators consume.

Meshes can be serialized to a small native text format (lossless; used
for regression fixtures) or to legacy ASCII VTK for visualization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DegenerateError, IoError, ParamError

REGION_PLUS = 1
REGION_MINUS = -1

SIDE_MINUS = -1
SIDE_INTERFACE = 0
SIDE_PLUS = 1

KIND_UNIFORM = "uniform"
KIND_TCOERCIVITY = "tcoercivity"
KIND_IMPORTED = "imported"

VARIANT_PLUS31 = "plus-3to1"
VARIANT_UNIFORM_PLUS = "uniform-plus"

NATIVE_TEXT = "native-text"
VTK_LEGACY = "vtk-legacy"

NATIVE_HEADER = "annulus-mesh v1"

#: ln(delta) magnitudes beyond this make exp(t) underflow to an exactly
#: degenerate inner circle.
LOG_RADIUS_LIMIT = 700.0

_INTERFACE_ANGLE = 0.25 * math.pi
_COORD_TOL = 1e-12


@dataclass(frozen=True)
class AnnulusMesh:
    """Immutable triangulation of the annulus sector.

    Attributes
    ----------
    vertices : (V, 2) float array
        Cartesian coordinates.  Grid vertices come first in row-major
        (t, th) order, then one center vertex per grid quad.
    triangles : (T, 3) int array
        Vertex index triples, all counterclockwise.
    region : (T,) int8 array
        ``REGION_PLUS`` or ``REGION_MINUS`` per triangle.
    boundary_flags : (V,) bool array
        True for vertices on the outer circle r = 1, the inner circle
        r = delta, or the straight edges th = 0 and th = pi.
    interface_edges : (K, 2) int array
        Vertex pairs of the radial edges lying on th = pi/4.
    side : (V,) int8 array
        ``SIDE_MINUS``, ``SIDE_INTERFACE`` or ``SIDE_PLUS`` per vertex.
    reflection : (V,) int array or None
        For coercivity meshes: the paired vertex under the variant's
        angular reflection, or -1 where the reflection leaves the grid.
    t_grid, theta_grid : arrays or None
        The generating log-polar grid lines (None for imported meshes).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    region: np.ndarray
    boundary_flags: np.ndarray
    interface_edges: np.ndarray
    side: np.ndarray
    delta: float
    n_t: Optional[int]
    n_theta: Optional[int]
    kind: str
    variant: str = ""
    n_minus: Optional[int] = None
    reflection: Optional[np.ndarray] = None
    t_grid: Optional[np.ndarray] = None
    theta_grid: Optional[np.ndarray] = None

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_grid_vertices(self) -> int:
        """Number of tensor-grid vertices (the rest are quad centers)."""
        if self.t_grid is None or self.theta_grid is None:
            return self.n_vertices
        return self.t_grid.size * self.theta_grid.size


def _validate_delta(delta: float) -> float:
    delta = float(delta)
    if not (0.0 < delta < 1.0) or not math.isfinite(delta):
        raise ParamError(f"delta must lie in (0, 1), got {delta!r}")
    if abs(math.log(delta)) > LOG_RADIUS_LIMIT:
        raise DegenerateError(
            f"|ln delta| = {abs(math.log(delta)):.3g} exceeds "
            f"{LOG_RADIUS_LIMIT:g}; the inner circle degenerates"
        )
    return delta


def _t_grid(delta: float, n_t: int) -> np.ndarray:
    # t_i = ln(delta) * (n_t - i) / n_t, increasing from ln(delta) to 0.
    # The (n_t - i)/n_t form makes refined grids nest bitwise.
    i = np.arange(n_t + 1)
    return math.log(delta) * ((n_t - i) / n_t)


def _assemble(
    delta: float,
    t_grid: np.ndarray,
    theta_grid: np.ndarray,
    j_interface: int,
    **extra,
) -> AnnulusMesh:
    """Criss-cross triangulation of the tensor grid ``t_grid x theta_grid``."""
    n_t = t_grid.size - 1
    n_th = theta_grid.size - 1
    n_grid = (n_t + 1) * (n_th + 1)

    tt, hh = np.meshgrid(t_grid, theta_grid, indexing="ij")
    r = np.exp(tt)
    grid_xy = np.stack([(r * np.cos(hh)).ravel(), (r * np.sin(hh)).ravel()], axis=1)

    def gid(i, j):
        return i * (n_th + 1) + j

    ii, jj = np.meshgrid(np.arange(n_t), np.arange(n_th), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    v00 = gid(ii, jj)
    v10 = gid(ii + 1, jj)
    v11 = gid(ii + 1, jj + 1)
    v01 = gid(ii, jj + 1)
    centers = 0.25 * (grid_xy[v00] + grid_xy[v10] + grid_xy[v11] + grid_xy[v01])
    vertices = np.concatenate([grid_xy, centers], axis=0)

    cc = n_grid + np.arange(ii.size)
    quads = np.stack([v00, v10, v11, v01], axis=1)
    rolled = np.stack([v10, v11, v01, v00], axis=1)
    triangles = np.stack(
        [quads.ravel(), rolled.ravel(), np.repeat(cc, 4)], axis=1
    ).astype(np.int64)

    cell_minus = jj < j_interface
    region = np.where(np.repeat(cell_minus, 4), REGION_MINUS, REGION_PLUS).astype(np.int8)

    boundary = np.zeros(vertices.shape[0], dtype=bool)
    gi, gj = np.divmod(np.arange(n_grid), n_th + 1)
    boundary[:n_grid] = (gi == 0) | (gi == n_t) | (gj == 0) | (gj == n_th)

    side = np.empty(vertices.shape[0], dtype=np.int8)
    side[:n_grid] = np.sign(gj - j_interface)
    side[n_grid:] = np.where(cell_minus, SIDE_MINUS, SIDE_PLUS)

    rows = np.arange(n_t)
    interface_edges = np.stack(
        [gid(rows, j_interface), gid(rows + 1, j_interface)], axis=1
    ).astype(np.int64)

    return AnnulusMesh(
        vertices=vertices,
        triangles=triangles,
        region=region,
        boundary_flags=boundary,
        interface_edges=interface_edges,
        side=side,
        delta=delta,
        n_t=n_t,
        n_theta=n_th,
        t_grid=t_grid,
        theta_grid=theta_grid,
        **extra,
    )


def build_annulus_mesh(delta: float, n_t: int, n_theta: int) -> AnnulusMesh:
    """Uniform log-polar criss-cross mesh of the annulus sector.

    Parameters
    ----------
    delta : float
        Inner radius, in (0, 1).
    n_t : int
        Number of radial cell layers (uniform in t = ln r), at least 1.
    n_theta : int
        Number of angular cells, a positive multiple of 4 so that
        th = pi/4 is a grid line.

    Returns
    -------
    AnnulusMesh
        ``4 * n_t * n_theta`` triangles on
        ``(n_t + 1) * (n_theta + 1) + n_t * n_theta`` vertices.
    """
    delta = _validate_delta(delta)
    if int(n_t) != n_t or n_t < 1:
        raise ParamError(f"n_t must be an integer >= 1, got {n_t!r}")
    if int(n_theta) != n_theta or n_theta < 4 or n_theta % 4 != 0:
        raise ParamError(
            f"n_theta must be a positive multiple of 4, got {n_theta!r}"
        )
    n_t, n_theta = int(n_t), int(n_theta)
    theta_grid = math.pi * (np.arange(n_theta + 1) / n_theta)
    return _assemble(
        delta, _t_grid(delta, n_t), theta_grid, n_theta // 4, kind=KIND_UNIFORM
    )


def build_tcoercivity_mesh(
    delta: float, n_t: int, n_minus: int, uniform_plus: bool = False
) -> AnnulusMesh:
    """Mesh whose angular grid is invariant under a coercivity reflection.

    The minus sector (0, pi/4) always carries ``n_minus`` uniform cells.
    By default the plus sector carries ``n_minus`` cells of triple
    spacing, so the reflection th -> pi - 3*th maps grid columns onto
    grid columns (column j pairs with column ``2*n_minus - j``).  With
    ``uniform_plus=True`` the plus sector instead keeps the minus
    spacing (``3*n_minus`` cells) and the stored pairing realizes
    th -> pi/2 - th, defined for columns with th <= pi/2 and -1 beyond.

    The pairing covers quad-center vertices as well (cell c pairs with
    cell ``2*n_minus - 1 - c``); see the module notes on center
    placement for the geometric fine print.

    Parameters
    ----------
    delta : float
        Inner radius, in (0, 1).
    n_t : int
        Number of radial cell layers, at least 1.
    n_minus : int
        Number of angular cells in the minus sector, at least 1.
    uniform_plus : bool
        Select the uniformly spaced plus sector carrying the
        th -> pi/2 - th pairing instead of th -> pi - 3*th.
    """
    delta = _validate_delta(delta)
    if int(n_t) != n_t or n_t < 1:
        raise ParamError(f"n_t must be an integer >= 1, got {n_t!r}")
    if int(n_minus) != n_minus or n_minus < 1:
        raise ParamError(f"n_minus must be an integer >= 1, got {n_minus!r}")
    n_t, n_minus = int(n_t), int(n_minus)

    quarter = 0.25 * math.pi
    minus_part = quarter * (np.arange(n_minus + 1) / n_minus)
    if uniform_plus:
        n_plus = 3 * n_minus
        variant = VARIANT_UNIFORM_PLUS
    else:
        n_plus = n_minus
        variant = VARIANT_PLUS31
    plus_part = quarter + (3.0 * quarter) * (np.arange(1, n_plus + 1) / n_plus)
    theta_grid = np.concatenate([minus_part, plus_part])

    mesh = _assemble(
        delta,
        _t_grid(delta, n_t),
        theta_grid,
        n_minus,
        kind=KIND_TCOERCIVITY,
        variant=variant,
        n_minus=n_minus,
    )

    n_th = mesh.n_theta
    n_grid = (n_t + 1) * (n_th + 1)
    reflection = np.full(mesh.n_vertices, -1, dtype=np.int64)

    j = np.arange(n_th + 1)
    j_ref = 2 * n_minus - j
    valid = (j_ref >= 0) & (j_ref <= n_th)
    for i in range(n_t + 1):
        base = i * (n_th + 1)
        reflection[base + j[valid]] = base + j_ref[valid]

    c = np.arange(n_th)
    c_ref = 2 * n_minus - 1 - c
    cvalid = (c_ref >= 0) & (c_ref < n_th)
    for i in range(n_t):
        base = n_grid + i * n_th
        reflection[base + c[cvalid]] = base + c_ref[cvalid]

    return replace(mesh, reflection=reflection)


def suggested_n_t(delta: float, n_theta: int) -> int:
    """Radial layer count balancing cell aspect in (t, th) coordinates.

    Picks n_t so the radial step |ln delta| / n_t is as close as
    possible to the angular step pi / n_theta, which keeps the
    criss-cross triangles shape regular uniformly in delta.
    """
    delta = _validate_delta(delta)
    return max(1, round(abs(math.log(delta)) * n_theta / math.pi))


def triangle_areas(mesh: AnnulusMesh) -> np.ndarray:
    """Signed triangle areas (positive for counterclockwise orientation)."""
    p = mesh.vertices[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def min_angle_degrees(mesh: AnnulusMesh) -> float:
    """Smallest interior angle over all triangles, in degrees."""
    p = mesh.vertices[mesh.triangles]
    worst = math.inf
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        cosang = np.sum(a * b, axis=1) / (
            np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
        )
        ang = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
        worst = min(worst, float(ang.min()))
    return worst


def unique_edges(mesh: AnnulusMesh) -> np.ndarray:
    """Distinct undirected edges as an (E, 2) array of sorted index pairs."""
    t = mesh.triangles
    pairs = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=0)
    pairs = np.sort(pairs, axis=1)
    return np.unique(pairs, axis=0)


def _format_float(x: float) -> str:
    return format(float(x), ".17g")


def export_mesh(mesh: AnnulusMesh, fmt: str = NATIVE_TEXT) -> bytes:
    """Serialize a mesh to ``native-text`` or ``vtk-legacy`` ASCII bytes."""
    if fmt == NATIVE_TEXT:
        lines = [NATIVE_HEADER, str(mesh.n_vertices)]
        for (x, y), flag in zip(mesh.vertices, mesh.boundary_flags):
            lines.append(f"{_format_float(x)} {_format_float(y)} {int(flag)}")
        lines.append(str(mesh.n_triangles))
        for (i, j, k), reg in zip(mesh.triangles, mesh.region):
            lines.append(f"{i} {j} {k} {int(reg)}")
        return ("\n".join(lines) + "\n").encode("ascii")
    if fmt == VTK_LEGACY:
        return vtk_unstructured(mesh)
    raise ValueError(f"unknown mesh format {fmt!r}")


def vtk_unstructured(
    mesh: AnnulusMesh,
    point_scalars: Optional[tuple[str, np.ndarray]] = None,
    title: str = "annulus sector mesh",
) -> bytes:
    """Legacy ASCII VTK unstructured grid with the region as cell data.

    ``point_scalars`` optionally attaches a named nodal field, e.g. a
    solved potential, as POINT_DATA.
    """
    lines = [
        "# vtk DataFile Version 2.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_vertices} double",
    ]
    for x, y in mesh.vertices:
        lines.append(f"{_format_float(x)} {_format_float(y)} 0")
    n_tri = mesh.n_triangles
    lines.append(f"CELLS {n_tri} {4 * n_tri}")
    for i, j, k in mesh.triangles:
        lines.append(f"3 {i} {j} {k}")
    lines.append(f"CELL_TYPES {n_tri}")
    lines.extend(["5"] * n_tri)
    if point_scalars is not None:
        name, values = point_scalars
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.n_vertices,):
            raise ValueError(
                f"point data {name!r} has shape {values.shape}, "
                f"expected ({mesh.n_vertices},)"
            )
        lines.append(f"POINT_DATA {mesh.n_vertices}")
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_format_float(v) for v in values)
    lines.append(f"CELL_DATA {n_tri}")
    lines.append("SCALARS region int 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(str(int(r)) for r in mesh.region)
    return ("\n".join(lines) + "\n").encode("ascii")


def import_mesh_native(data: bytes) -> AnnulusMesh:
    """Parse the native text format produced by :func:`export_mesh`.

    The round trip preserves vertex coordinates bit for bit.  Grid
    metadata is not stored in the format, so the result carries
    ``kind="imported"`` with geometric (not index-based) side and
    interface classification.
    """
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise IoError(f"native mesh data is not ASCII: {exc}") from exc
    lines = text.splitlines()
    pos = 0

    def take() -> str:
        nonlocal pos
        if pos >= len(lines):
            raise IoError("native mesh data truncated")
        line = lines[pos]
        pos += 1
        return line

    if take().strip() != NATIVE_HEADER:
        raise IoError(f"expected header {NATIVE_HEADER!r}")
    try:
        n_v = int(take())
        vertices = np.empty((n_v, 2))
        flags = np.empty(n_v, dtype=bool)
        for a in range(n_v):
            x, y, f = take().split()
            vertices[a] = (float(x), float(y))
            flags[a] = bool(int(f))
        n_tri = int(take())
        triangles = np.empty((n_tri, 3), dtype=np.int64)
        region = np.empty(n_tri, dtype=np.int8)
        for a in range(n_tri):
            i, j, k, reg = take().split()
            triangles[a] = (int(i), int(j), int(k))
            region[a] = int(reg)
    except (ValueError, IndexError) as exc:
        raise IoError(f"malformed native mesh data: {exc}") from exc

    theta = np.arctan2(vertices[:, 1], vertices[:, 0])
    side = np.sign(theta - _INTERFACE_ANGLE)
    side[np.abs(theta - _INTERFACE_ANGLE) <= _COORD_TOL] = 0
    on_iface = side == 0
    edges = unique_edges(
        AnnulusMesh(  # minimal shell solely for the edge scan
            vertices=vertices,
            triangles=triangles,
            region=region,
            boundary_flags=flags,
            interface_edges=np.empty((0, 2), dtype=np.int64),
            side=side.astype(np.int8),
            delta=0.5,
            n_t=None,
            n_theta=None,
            kind=KIND_IMPORTED,
        )
    )
    iface = edges[on_iface[edges[:, 0]] & on_iface[edges[:, 1]]]
    radii = np.hypot(vertices[:, 0], vertices[:, 1])
    return AnnulusMesh(
        vertices=vertices,
        triangles=triangles,
        region=region,
        boundary_flags=flags,
        interface_edges=iface,
        side=side.astype(np.int8),
        delta=float(radii.min()) if n_v else 0.5,
        n_t=None,
        n_theta=None,
        kind=KIND_IMPORTED,
    )
