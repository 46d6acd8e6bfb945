"""Triangle-mesh data model, Wavefront OBJ I/O, landmarks, and rigid alignment.

All head meshes in a pipeline share one connectivity; shapes are compared and
combined as flat coordinate vectors of length 3*n_v.  Vertex order is
significant and preserved exactly through file round trips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import DegenerateGeometryError, MeshFormatError, ShapeMismatchError

# Conventional labels for the five landmarks used by rigid alignment.
KEY_LANDMARK_LABELS = ("eye-left", "eye-right", "nose", "mouth-left", "mouth-right")

# Full float64 round trip; well above the 9-significant-digit floor.
_COORD_FMT = "%.17g"


@dataclass(frozen=True, eq=False)
class HeadMesh:
    """Fixed-connectivity triangle mesh.

    vertices: (n_v, 3) float64; faces: (n_f, 3) int indices into vertices.
    Optional per-vertex channels: uv (n_v, 2) and colors (n_v, 3) in [0, 1].
    Instances are treated as immutable; derive new meshes with
    :meth:`with_vertices`.
    """

    vertices: np.ndarray
    faces: np.ndarray
    uv: np.ndarray | None = None
    colors: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        f = np.asarray(self.faces, dtype=np.int64)
        if f.size == 0:
            f = f.reshape(0, 3)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshFormatError(f"vertices must be (n_v, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshFormatError(f"faces must be (n_f, 3), got {f.shape}")
        if not np.isfinite(v).all():
            raise MeshFormatError("non-finite vertex coordinate")
        if f.size:
            if f.min() < 0 or f.max() >= len(v):
                raise MeshFormatError(
                    f"face index out of range [0, {len(v)})"
                )
            degen = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
            if degen.any():
                raise MeshFormatError(
                    f"degenerate face with repeated vertex at index {int(np.where(degen)[0][0])}"
                )
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if self.uv is not None:
            uv = np.asarray(self.uv, dtype=np.float64)
            if uv.shape != (len(v), 2):
                raise MeshFormatError(f"uv must be ({len(v)}, 2), got {uv.shape}")
            object.__setattr__(self, "uv", uv)
        if self.colors is not None:
            c = np.asarray(self.colors, dtype=np.float64)
            if c.shape != (len(v), 3):
                raise MeshFormatError(f"colors must be ({len(v)}, 3), got {c.shape}")
            object.__setattr__(self, "colors", c)

    @property
    def n_v(self) -> int:
        return len(self.vertices)

    @property
    def n_f(self) -> int:
        return len(self.faces)

    @property
    def vector(self) -> np.ndarray:
        """Coordinates flattened to a (3*n_v,) vector (x0, y0, z0, x1, ...)."""
        return self.vertices.reshape(-1)

    def with_vertices(self, vertices: np.ndarray) -> "HeadMesh":
        """New mesh with the same connectivity and replaced coordinates.

        Accepts (n_v, 3) points or a flat (3*n_v,) vector.
        """
        v = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        if len(v) != self.n_v:
            raise ShapeMismatchError(f"expected {self.n_v} vertices, got {len(v)}")
        return HeadMesh(v, self.faces, uv=self.uv, colors=self.colors)

    def same_connectivity(self, other: "HeadMesh") -> bool:
        return self.faces.shape == other.faces.shape and bool(
            np.array_equal(self.faces, other.faces)
        )

    def bbox_diagonal(self) -> float:
        extent = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.linalg.norm(extent))


@dataclass(frozen=True)
class LandmarkIndexSet:
    """Ordered vertex indices marking semantic points on the reference head.

    The first five (or the five carrying the conventional eyes/nose/mouth
    labels) form the key subset used for rigid alignment.
    """

    indices: tuple[int, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValueError("landmark indices must be distinct")
        if any(i < 0 for i in idx):
            raise ValueError("landmark indices must be non-negative")
        if self.labels is not None and len(self.labels) != len(idx):
            raise ValueError("labels must match indices in length")
        object.__setattr__(self, "indices", idx)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    def validate_for(self, mesh: HeadMesh) -> None:
        if any(i >= mesh.n_v for i in self.indices):
            raise ValueError(f"landmark index out of range for mesh with {mesh.n_v} vertices")

    def key_subset(self) -> tuple[int, ...]:
        """The five indices used for rigid alignment.

        Prefers the conventionally-labeled five; falls back to the first five,
        or to all indices when fewer are available.
        """
        if self.labels is not None and all(l in self.labels for l in KEY_LANDMARK_LABELS):
            return tuple(self.indices[self.labels.index(l)] for l in KEY_LANDMARK_LABELS)
        return self.indices[:5]


@dataclass(frozen=True)
class RigidTransform:
    """Similarity transform p -> scale * R @ p + translation."""

    rotation: np.ndarray
    translation: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-10:
            raise ValueError("rotation is not orthogonal within 1e-10")
        if abs(np.linalg.det(r) - 1.0) > 1e-10:
            raise ValueError("rotation determinant must be +1")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3), 1.0)

    def apply(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return self.scale * (p @ self.rotation.T) + self.translation

    def apply_to_mesh(self, mesh: HeadMesh) -> HeadMesh:
        return mesh.with_vertices(self.apply(mesh.vertices))


# ---------------------------------------------------------------------------
# OBJ I/O


def load_mesh(path: str | Path) -> HeadMesh:
    """Read a triangle mesh from a Wavefront OBJ file.

    Supports "v x y z" (optionally with an r g b color extension), "vt u v",
    and triangle "f" lines with any of the a, a/b, a//c index forms.  Vertex
    order is preserved exactly.  Non-triangle faces are rejected.
    """
    path = Path(path)
    vertices: list[list[float]] = []
    colors: list[list[float]] = []
    uv: list[list[float]] = []
    faces: list[list[int]] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            try:
                if tag == "v":
                    vals = [float(x) for x in parts[1:]]
                    if len(vals) == 3:
                        vertices.append(vals)
                    elif len(vals) == 6:
                        vertices.append(vals[:3])
                        colors.append(vals[3:])
                    else:
                        raise MeshFormatError(
                            f"vertex line needs 3 or 6 values, got {len(vals)}", lineno
                        )
                elif tag == "vt":
                    vals = [float(x) for x in parts[1:3]]
                    if len(vals) != 2:
                        raise MeshFormatError("texture coordinate needs 2 values", lineno)
                    uv.append(vals)
                elif tag == "f":
                    idx = [int(tok.split("/")[0]) for tok in parts[1:]]
                    if len(idx) != 3:
                        raise MeshFormatError(
                            f"only triangle faces are supported, got {len(idx)} corners", lineno
                        )
                    if any(i <= 0 for i in idx):
                        raise MeshFormatError("face indices must be positive (1-based)", lineno)
                    faces.append([i - 1 for i in idx])
            except ValueError as exc:
                raise MeshFormatError(str(exc), lineno) from exc
    if not vertices:
        raise MeshFormatError(f"no vertices found in {path}")
    color_arr = None
    if colors:
        if len(colors) != len(vertices):
            raise MeshFormatError("color extension must cover every vertex or none")
        color_arr = np.asarray(colors, dtype=np.float64)
    uv_arr = np.asarray(uv, dtype=np.float64) if len(uv) == len(vertices) else None
    return HeadMesh(
        np.asarray(vertices, dtype=np.float64),
        np.asarray(faces, dtype=np.int64) if faces else np.zeros((0, 3), dtype=np.int64),
        uv=uv_arr,
        colors=color_arr,
    )


def save_mesh(mesh: HeadMesh, path: str | Path) -> None:
    """Write a mesh as ASCII OBJ.

    Coordinates are printed with 17 significant digits so float64 values
    survive a round trip bit-for-bit.  Faces are written 1-indexed; when uv
    coordinates are present they are emitted as "vt" lines with per-vertex
    "f a/a b/b c/c" references.
    """
    path = Path(path)
    lines: list[str] = []
    if mesh.colors is not None:
        for (x, y, z), (r, g, b) in zip(mesh.vertices, mesh.colors):
            lines.append(
                "v " + " ".join(_COORD_FMT % c for c in (x, y, z, r, g, b))
            )
    else:
        for x, y, z in mesh.vertices:
            lines.append("v " + " ".join(_COORD_FMT % c for c in (x, y, z)))
    if mesh.uv is not None:
        for u, v in mesh.uv:
            lines.append("vt " + " ".join(_COORD_FMT % c for c in (u, v)))
        for a, b, c in mesh.faces + 1:
            lines.append(f"f {a}/{a} {b}/{b} {c}/{c}")
    else:
        for a, b, c in mesh.faces + 1:
            lines.append(f"f {a} {b} {c}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_landmarks(path: str | Path) -> LandmarkIndexSet:
    """Read a landmark file: one 0-based vertex index per line.

    "#" starts a comment; a trailing comment on an index line is kept as the
    landmark's label.
    """
    indices: list[int] = []
    labels: list[str] = []
    any_label = False
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text, _, comment = raw.partition("#")
            text = text.strip()
            if not text:
                continue
            try:
                indices.append(int(text))
            except ValueError as exc:
                raise MeshFormatError(f"bad landmark index {text!r}", lineno) from exc
            label = comment.strip()
            labels.append(label)
            any_label = any_label or bool(label)
    return LandmarkIndexSet(tuple(indices), tuple(labels) if any_label else None)


def save_landmarks(landmarks: LandmarkIndexSet, path: str | Path) -> None:
    lines = []
    for k, idx in enumerate(landmarks.indices):
        label = landmarks.labels[k] if landmarks.labels else ""
        lines.append(f"{idx}  # {label}" if label else str(idx))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Alignment and normalization


def center_and_scale(mesh: HeadMesh) -> tuple[HeadMesh, RigidTransform]:
    """Translate the centroid to the origin and scale the bounding-box
    diagonal to 1.

    Returns the normalized mesh and the similarity transform that maps the
    input onto it.  Idempotent up to floating-point roundoff.
    """
    if mesh.n_v < 2:
        raise DegenerateGeometryError("need at least 2 vertices to normalize")
    centroid = mesh.vertices.mean(axis=0)
    diag = mesh.bbox_diagonal()
    if diag <= 0.0:
        raise DegenerateGeometryError("all vertices coincide; cannot normalize scale")
    scale = 1.0 / diag
    transform = RigidTransform(np.eye(3), -scale * centroid, scale)
    return mesh.with_vertices(transform.apply(mesh.vertices)), transform


def similarity_from_points(source: np.ndarray, target: np.ndarray) -> RigidTransform:
    """Closed-form least-squares similarity (Kabsch/Umeyama) mapping source
    points onto target points."""
    p = np.asarray(source, dtype=np.float64)
    q = np.asarray(target, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 2 or p.shape[1] != 3:
        raise ShapeMismatchError(f"point sets must both be (k, 3), got {p.shape} vs {q.shape}")
    if len(p) < 3:
        raise DegenerateGeometryError("need at least 3 correspondences")
    mu_p = p.mean(axis=0)
    mu_q = q.mean(axis=0)
    pc = p - mu_p
    qc = q - mu_q
    # Collinear sources leave the rotation about their axis unconstrained.
    sv = np.linalg.svd(pc, compute_uv=False)
    if sv[1] <= 1e-12 * max(sv[0], 1e-300):
        raise DegenerateGeometryError("landmarks are collinear; rotation is ambiguous")
    h = pc.T @ qc
    u, s, vt = np.linalg.svd(h)
    d = math.copysign(1.0, np.linalg.det(vt.T @ u.T))
    rotation = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    scale = float((s * np.array([1.0, 1.0, d])).sum() / (pc**2).sum())
    translation = mu_q - scale * rotation @ mu_p
    return RigidTransform(rotation, translation, scale)


def landmark_rmse(
    transform: RigidTransform, source_pts: np.ndarray, target_pts: np.ndarray
) -> float:
    moved = transform.apply(source_pts)
    return float(np.sqrt(np.mean(np.sum((moved - target_pts) ** 2, axis=1))))


def rigid_align(
    source: HeadMesh,
    target: HeadMesh,
    landmarks: LandmarkIndexSet,
    icp_iterations: int = 0,
    icp_tol: float = 1e-9,
) -> tuple[HeadMesh, RigidTransform]:
    """Similarity-align source onto target via their shared key landmarks.

    The closed-form Procrustes fit on the key landmark subset is optionally
    refined by nearest-vertex ICP over all vertices (capped iterations,
    converged when the all-vertex RMSE change drops below icp_tol).  An ICP
    update is only accepted while it does not worsen the landmark residual,
    so the landmark RMSE is non-increasing across refinement.
    """
    landmarks.validate_for(source)
    landmarks.validate_for(target)
    key = list(landmarks.key_subset())
    src_pts = source.vertices[key]
    tgt_pts = target.vertices[key]
    transform = similarity_from_points(src_pts, tgt_pts)
    if icp_iterations > 0:
        from scipy.spatial import cKDTree

        tree = cKDTree(target.vertices)
        lm_rmse = landmark_rmse(transform, src_pts, tgt_pts)
        prev_rmse = None
        for _ in range(icp_iterations):
            moved = transform.apply(source.vertices)
            dist, nn = tree.query(moved)
            rmse = float(np.sqrt(np.mean(dist**2)))
            candidate = similarity_from_points(source.vertices, target.vertices[nn])
            cand_lm = landmark_rmse(candidate, src_pts, tgt_pts)
            if cand_lm > lm_rmse + 1e-12:
                break
            transform, lm_rmse = candidate, cand_lm
            if prev_rmse is not None and abs(prev_rmse - rmse) < icp_tol:
                break
            prev_rmse = rmse
    return transform.apply_to_mesh(source), transform


# ---------------------------------------------------------------------------
# Connectivity helpers shared by the color-completion and PCA modules


def mesh_edges(faces: np.ndarray) -> np.ndarray:
    """Unique undirected edges (k, 2) with first index < second."""
    f = np.asarray(faces, dtype=np.int64)
    if f.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    e = np.vstack([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0)


def vertex_adjacency(mesh: HeadMesh) -> sparse.csr_matrix:
    """Symmetric 0/1 vertex adjacency from the triangle edges."""
    e = mesh_edges(mesh.faces)
    i = np.concatenate([e[:, 0], e[:, 1]])
    j = np.concatenate([e[:, 1], e[:, 0]])
    data = np.ones(len(i))
    return sparse.csr_matrix((data, (i, j)), shape=(mesh.n_v, mesh.n_v))


def vertex_laplacian_magnitudes(mesh: HeadMesh) -> np.ndarray:
    """Per-vertex magnitude of the uniform graph Laplacian, |v_i - mean of
    neighbors|.  Isolated vertices get 0."""
    adj = vertex_adjacency(mesh)
    deg = np.asarray(adj.sum(axis=1)).reshape(-1)
    nb_mean = adj @ mesh.vertices
    out = np.zeros(mesh.n_v)
    nz = deg > 0
    diff = mesh.vertices[nz] - nb_mean[nz] / deg[nz, None]
    out[nz] = np.linalg.norm(diff, axis=1)
    return out


def vertex_normals(mesh: HeadMesh) -> np.ndarray:
    """Area-weighted per-vertex normals (unit length; zero for isolated
    vertices)."""
    v, f = mesh.vertices, mesh.faces
    normals = np.zeros_like(v)
    if len(f):
        fn = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        for k in range(3):
            np.add.at(normals, f[:, k], fn)
    norms = np.linalg.norm(normals, axis=1)
    nz = norms > 0
    normals[nz] /= norms[nz, None]
    return normals
