"""Synthetic geometry and shape families for demos, fixtures, and the toy
trainer.

Deterministic given the seed: corpora are generated from a shared base mesh
plus random smooth displacement fields drawn in a low-dimensional identity
subspace, which makes ground truth (the generating basis) available to
verification code.
"""

from __future__ import annotations

import numpy as np

from .mesh import HeadMesh


def grid_mesh(nx: int, ny: int, extent: tuple[float, float] = (1.0, 0.8)) -> HeadMesh:
    """Planar rectangular grid triangulated into 2*(nx-1)*(ny-1) faces."""
    xs, ys = np.meshgrid(
        np.linspace(0.0, extent[0], nx), np.linspace(0.0, extent[1], ny), indexing="ij"
    )
    vertices = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(nx * ny)])
    faces = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a = i * ny + j
            b = (i + 1) * ny + j
            c = (i + 1) * ny + j + 1
            d = i * ny + j + 1
            faces.append((a, b, c))
            faces.append((a, c, d))
    return HeadMesh(vertices, np.asarray(faces, dtype=np.int64))


def dome_mesh(nx: int, ny: int, height: float = 0.3) -> HeadMesh:
    """Grid lifted onto a smooth dome.

    Non-planar by construction, which keeps per-vertex affine fits fully
    determined (a flat sheet leaves the out-of-plane column of an affine
    transform unconstrained).
    """
    flat = grid_mesh(nx, ny)
    v = flat.vertices.copy()
    span = v.max(axis=0) - v.min(axis=0)
    u = v[:, 0] / span[0]
    w = v[:, 1] / span[1]
    v[:, 2] = height * np.sin(np.pi * u) * np.sin(np.pi * w)
    return flat.with_vertices(v)


def sphere_mesh(n_theta: int = 12, n_phi: int = 24, radius: float = 1.0) -> HeadMesh:
    """UV sphere; useful where front/back-facing vertices must both exist."""
    vertices = [(0.0, 0.0, radius)]
    for i in range(1, n_theta):
        theta = np.pi * i / n_theta
        for j in range(n_phi):
            phi = 2 * np.pi * j / n_phi
            vertices.append(
                (
                    radius * np.sin(theta) * np.cos(phi),
                    radius * np.sin(theta) * np.sin(phi),
                    radius * np.cos(theta),
                )
            )
    vertices.append((0.0, 0.0, -radius))
    south = len(vertices) - 1
    faces = []
    for j in range(n_phi):
        faces.append((0, 1 + j, 1 + (j + 1) % n_phi))
    for i in range(n_theta - 2):
        row = 1 + i * n_phi
        nxt = row + n_phi
        for j in range(n_phi):
            a, b = row + j, row + (j + 1) % n_phi
            c, d = nxt + j, nxt + (j + 1) % n_phi
            faces.append((a, c, d))
            faces.append((a, d, b))
    last_row = 1 + (n_theta - 2) * n_phi
    for j in range(n_phi):
        faces.append((south, last_row + (j + 1) % n_phi, last_row + j))
    return HeadMesh(np.asarray(vertices), np.asarray(faces, dtype=np.int64))


def random_orthonormal_basis(dim: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """(dim, k) matrix with orthonormal columns."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, k)))
    return q[:, :k]


def smooth_displacement_basis(base: HeadMesh, k: int, rng: np.random.Generator) -> np.ndarray:
    """(3*n_v, k) orthonormal basis of spatially smooth displacement fields.

    Columns are orthonormalized low-frequency sinusoids of the base
    coordinates, so shapes generated from them deform smoothly instead of
    looking like per-vertex noise.
    """
    v = base.vertices
    span = v.max(axis=0) - v.min(axis=0)
    span[span == 0] = 1.0
    normalized = (v - v.min(axis=0)) / span
    fields = []
    while len(fields) < k:
        freq = rng.uniform(0.5, 2.0, size=3)
        phase = rng.uniform(0, 2 * np.pi, size=3)
        axis = rng.integers(0, 3)
        scalar = np.sin(2 * np.pi * (normalized @ freq) + phase[0])
        disp = np.zeros_like(v)
        disp[:, axis] = scalar
        fields.append(disp.reshape(-1))
    mat = np.column_stack(fields)
    q, r = np.linalg.qr(mat)
    if np.linalg.matrix_rank(r) < k:  # rare duplicate field; retry deterministic
        return smooth_displacement_basis(base, k, rng)
    return q[:, :k]


def linear_shape_family(
    base: HeadMesh,
    basis: np.ndarray,
    n: int,
    scale: float,
    rng: np.random.Generator,
) -> list[HeadMesh]:
    """n meshes sampled as base + basis @ z with z ~ N(0, scale^2 I)."""
    out = []
    for _ in range(n):
        z = rng.standard_normal(basis.shape[1]) * scale
        out.append(base.with_vertices(base.vector + basis @ z))
    return out
