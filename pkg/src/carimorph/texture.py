"""Texture mapping and full-head vertex-color completion.

Option 1 projects the source photo onto the head: an affine camera is fitted
to 3D/2D landmark correspondences and every vertex gets the photo pixel it
projects to as its uv coordinate.  Because all heads in a pipeline share one
connectivity, the uv computed on the reconstructed head transfers to any
caricature of it index-for-index.

Option 2 colors the whole head: colors known on the front of the face are
extended over the remaining vertices by solving the uniform graph-Laplacian
Dirichlet problem per channel, then noise matched to the known region's
per-channel variance is added to the filled region so it does not look
unnaturally smooth.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .errors import (
    BoundaryError,
    DegenerateGeometryError,
    DisconnectedBoundaryError,
    MeshFormatError,
    ShapeMismatchError,
)
from .mesh import HeadMesh, vertex_adjacency, vertex_normals


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """Affine camera: 3x4 matrix with last row (0, 0, 0, 1) mapping
    homogeneous 3D points to pixel coordinates."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 4):
            raise DegenerateGeometryError(f"projection matrix must be 3x4, got {m.shape}")
        if not np.isfinite(m).all():
            raise DegenerateGeometryError("projection matrix must be finite")
        sv = np.linalg.svd(m[:, :3], compute_uv=False)
        if sv[1] <= 1e-12 * max(sv[0], 1e-300):
            raise DegenerateGeometryError("projection matrix linear part has rank < 2")
        object.__setattr__(self, "matrix", m)

    def project(self, points3d: np.ndarray) -> np.ndarray:
        """Pixel coordinates (k, 2) of the given (k, 3) points."""
        p = np.asarray(points3d, dtype=np.float64)
        homog = np.hstack([p, np.ones((len(p), 1))])
        out = homog @ self.matrix.T
        return out[:, :2] / out[:, 2:3]

    def view_direction(self) -> np.ndarray:
        """Unit direction from the scene toward the camera (the projection
        rays run along its negation)."""
        d = np.cross(self.matrix[0, :3], self.matrix[1, :3])
        return d / np.linalg.norm(d)


@dataclass(frozen=True, eq=False)
class VertexColorMap:
    """Per-vertex RGB in [0, 1] plus a mask of which vertices carry real
    (known) color."""

    colors: np.ndarray      # (n_v, 3)
    known_mask: np.ndarray  # (n_v,) bool

    def __post_init__(self):
        c = np.asarray(self.colors, dtype=np.float64)
        m = np.asarray(self.known_mask, dtype=bool).reshape(-1)
        if c.ndim != 2 or c.shape[1] != 3:
            raise ShapeMismatchError(f"colors must be (n_v, 3), got {c.shape}")
        if m.shape != (len(c),):
            raise ShapeMismatchError("known_mask must have one entry per vertex")
        if not np.isfinite(c).all():
            raise ShapeMismatchError("colors must be finite")
        if c.min() < 0.0 or c.max() > 1.0:
            raise ShapeMismatchError("colors must lie in [0, 1]")
        object.__setattr__(self, "colors", c)
        object.__setattr__(self, "known_mask", m)

    @property
    def n_v(self) -> int:
        return len(self.colors)


@dataclass(frozen=True, eq=False)
class UvCoords:
    """Per-vertex texture coordinates in [0, 1]^2 referencing the photo, with
    an invalid flag for vertices projecting off-image or facing away."""

    uv: np.ndarray      # (n_v, 2)
    valid: np.ndarray   # (n_v,) bool

    def __post_init__(self):
        uv = np.asarray(self.uv, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool).reshape(-1)
        if uv.ndim != 2 or uv.shape[1] != 2 or valid.shape != (len(uv),):
            raise ShapeMismatchError("uv must be (n_v, 2) with a matching valid mask")
        object.__setattr__(self, "uv", uv)
        object.__setattr__(self, "valid", valid)


def estimate_projection(
    points3d: np.ndarray, points2d: np.ndarray
) -> tuple[ProjectionMatrix, float]:
    """Least-squares affine camera from >= 6 landmark correspondences.

    Solves the direct linear system row-by-row for the two pixel equations;
    the homogeneous row is fixed at (0, 0, 0, 1).  Returns the camera and the
    mean reprojection error in pixels.  Coplanar 3D landmarks leave the fit
    underdetermined and are rejected.
    """
    p3 = np.asarray(points3d, dtype=np.float64)
    p2 = np.asarray(points2d, dtype=np.float64)
    if p3.ndim != 2 or p3.shape[1] != 3 or p2.shape != (len(p3), 2):
        raise ShapeMismatchError(
            f"need matching (k, 3) and (k, 2) arrays, got {p3.shape} and {p2.shape}"
        )
    if len(p3) < 6:
        raise DegenerateGeometryError("need at least 6 correspondences")
    design = np.hstack([p3, np.ones((len(p3), 1))])
    sv = np.linalg.svd(design, compute_uv=False)
    if sv[3] <= 1e-10 * sv[0]:
        raise DegenerateGeometryError("3D landmarks are coplanar; camera is underdetermined")
    rows, *_ = np.linalg.lstsq(design, p2, rcond=None)
    matrix = np.vstack([rows.T, [0.0, 0.0, 0.0, 1.0]])
    camera = ProjectionMatrix(matrix)
    err = float(np.mean(np.linalg.norm(camera.project(p3) - p2, axis=1)))
    return camera, err


def compute_uv(mesh: HeadMesh, camera: ProjectionMatrix, image_size: tuple[int, int]) -> UvCoords:
    """Texture coordinates from projecting every vertex through the camera.

    uv = pixel / image size.  A vertex is flagged invalid when it projects
    outside the image or its normal faces away from the camera.
    """
    w, h = image_size
    if w <= 0 or h <= 0:
        raise ShapeMismatchError("image size must be positive")
    pixels = camera.project(mesh.vertices)
    uv = pixels / np.array([float(w), float(h)])
    inside = (
        (pixels[:, 0] >= 0.0)
        & (pixels[:, 0] <= w)
        & (pixels[:, 1] >= 0.0)
        & (pixels[:, 1] <= h)
    )
    normals = vertex_normals(mesh)
    facing = normals @ camera.view_direction() >= 0.0
    return UvCoords(uv, inside & facing)


def complete_vertex_colors(mesh: HeadMesh, partial: VertexColorMap) -> VertexColorMap:
    """Fill unknown vertex colors harmonically.

    Unknown colors solve the uniform graph-Laplacian Dirichlet problem per
    channel with the known colors as boundary values; known colors pass
    through bit-identically.  Every unknown vertex must be connected to some
    known vertex through mesh edges.
    """
    if partial.n_v != mesh.n_v:
        raise ShapeMismatchError(
            f"color map covers {partial.n_v} vertices, mesh has {mesh.n_v}"
        )
    known = partial.known_mask
    if not known.any():
        raise BoundaryError("no known vertices to interpolate from")
    if known.all():
        return partial
    adj = vertex_adjacency(mesh)
    _check_reachable(adj, known)
    unknown = ~known
    a_uu = adj[unknown][:, unknown]
    a_uk = adj[unknown][:, known]
    deg_u = np.asarray(adj[unknown].sum(axis=1)).reshape(-1)
    laplacian_uu = sparse.diags(deg_u) - a_uu
    rhs = a_uk @ partial.colors[known]
    filled = spsolve(laplacian_uu.tocsc(), rhs)
    if filled.ndim == 1:
        filled = filled.reshape(-1, 3)
    colors = partial.colors.copy()
    colors[unknown] = np.clip(filled, 0.0, 1.0)
    return VertexColorMap(colors, known)


def _check_reachable(adj: sparse.csr_matrix, known: np.ndarray) -> None:
    # BFS from the known set; isolated or unreached unknown vertices have no
    # boundary data to interpolate from.
    n = adj.shape[0]
    visited = known.copy()
    frontier = np.where(known)[0]
    while len(frontier):
        neighbors = np.unique(adj[frontier].indices)
        new = neighbors[~visited[neighbors]]
        visited[new] = True
        frontier = new
    if not visited.all():
        missing = int(np.where(~visited)[0][0])
        raise DisconnectedBoundaryError(
            f"vertex {missing} has no path to any known vertex"
        )


def add_matched_noise(
    filled: VertexColorMap, known_mask: np.ndarray, seed: int
) -> VertexColorMap:
    """Add zero-mean Gaussian noise to the filled region, matching the known
    region's per-channel variance; results are clamped to [0, 1] and
    deterministic per seed."""
    known = np.asarray(known_mask, dtype=bool).reshape(-1)
    if known.shape != (filled.n_v,):
        raise ShapeMismatchError("known_mask must have one entry per vertex")
    if not known.any():
        raise BoundaryError("known region is empty; no variance to match")
    variance = filled.colors[known].var(axis=0)
    rng = np.random.default_rng(seed)
    colors = filled.colors.copy()
    unknown = ~known
    noise = rng.standard_normal((int(unknown.sum()), 3)) * np.sqrt(variance)
    colors[unknown] = np.clip(colors[unknown] + noise, 0.0, 1.0)
    return VertexColorMap(colors, filled.known_mask)


# ---------------------------------------------------------------------------
# PLY I/O for vertex colors
#
# ASCII PLY with uchar red/green/blue plus a uchar "known" flag per vertex;
# faces are optional.  Readers accept files without the known flag (all
# vertices then count as known).


def save_colored_ply(mesh: HeadMesh, colors: VertexColorMap, path: str | Path) -> None:
    if colors.n_v != mesh.n_v:
        raise ShapeMismatchError("color map does not cover the mesh")
    rgb = np.rint(np.clip(colors.colors, 0.0, 1.0) * 255.0).astype(np.int64)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {mesh.n_v}",
        "property double x",
        "property double y",
        "property double z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "property uchar known",
        f"element face {mesh.n_f}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for (x, y, z), (r, g, b), k in zip(mesh.vertices, rgb, colors.known_mask):
        lines.append(f"{x:.17g} {y:.17g} {z:.17g} {r} {g} {b} {1 if k else 0}")
    for a, b, c in mesh.faces:
        lines.append(f"3 {a} {b} {c}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_colored_ply(path: str | Path) -> tuple[HeadMesh, VertexColorMap]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0].strip() != "ply":
        raise MeshFormatError(f"{path}: not a PLY file", 1)
    n_vertex = n_face = 0
    properties: list[str] = []
    header_end = None
    element = None
    for k, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if not parts:
            continue
        if parts[0] == "format":
            if parts[1] != "ascii":
                raise MeshFormatError("only ascii PLY is supported", k)
        elif parts[0] == "element":
            element = parts[1]
            if element == "vertex":
                n_vertex = int(parts[2])
            elif element == "face":
                n_face = int(parts[2])
        elif parts[0] == "property" and element == "vertex":
            properties.append(parts[-1])
        elif parts[0] == "end_header":
            header_end = k
            break
    if header_end is None:
        raise MeshFormatError(f"{path}: missing end_header")
    want = ["x", "y", "z", "red", "green", "blue"]
    if any(p not in properties for p in want):
        raise MeshFormatError(f"{path}: vertex element must carry x y z red green blue")
    col = {p: properties.index(p) for p in properties}
    has_known = "known" in col
    verts = np.zeros((n_vertex, 3))
    rgb = np.zeros((n_vertex, 3))
    known = np.ones(n_vertex, dtype=bool)
    body = lines[header_end:]
    if len(body) < n_vertex + n_face:
        raise MeshFormatError(f"{path}: truncated body")
    for i in range(n_vertex):
        parts = body[i].split()
        if len(parts) != len(properties):
            raise MeshFormatError(f"bad vertex row: {body[i]!r}", header_end + i + 1)
        verts[i] = [float(parts[col[p]]) for p in ("x", "y", "z")]
        rgb[i] = [float(parts[col[p]]) for p in ("red", "green", "blue")]
        if has_known:
            known[i] = parts[col["known"]] != "0"
    faces = np.zeros((n_face, 3), dtype=np.int64)
    for i in range(n_face):
        parts = body[n_vertex + i].split()
        if len(parts) != 4 or parts[0] != "3":
            raise MeshFormatError(
                f"only triangle faces are supported: {body[n_vertex + i]!r}",
                header_end + n_vertex + i + 1,
            )
        faces[i] = [int(x) for x in parts[1:]]
    if rgb.max() > 1.0:
        rgb = rgb / 255.0
    mesh = HeadMesh(verts, faces)
    return mesh, VertexColorMap(np.clip(rgb, 0.0, 1.0), known)
