"""Non-rigid ICP registration of a template head onto a target surface.

Each template vertex carries its own 3x4 affine transform.  One sparse linear
least-squares solve combines three terms: nearest-point correspondences to
the target (data), differences of adjacent vertices' transforms over template
edges (stiffness), and pinned landmark correspondences.  The outer loop
relaxes the stiffness and landmark weights over a fixed schedule, so the
registration moves from near-rigid to locally deformable; the inner loop
alternates correspondence search and solving until the deformation settles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import lsqr, splu
from scipy.spatial import cKDTree

from .errors import RegistrationError, SolverError
from .mesh import HeadMesh, mesh_edges

_DEFAULT_OUTER_STEPS = 8

# Above this stiffness the normal equations absorb the data term below the
# float64 roundoff floor (alpha^2 > ~1e12 vs data entries ~1), so the solve
# switches to LSQR on the stacked system, which does not square the weights.
_DIRECT_SOLVE_STIFFNESS_LIMIT = 1e6


def _geometric_schedule(start: float, stop: float, steps: int) -> tuple[float, ...]:
    return tuple(float(x) for x in np.geomspace(start, stop, steps))


def _linear_schedule(start: float, stop: float, steps: int) -> tuple[float, ...]:
    return tuple(float(x) for x in np.linspace(start, stop, steps))


@dataclass(frozen=True)
class NicpConfig:
    """Schedules and stopping rules for the registration.

    stiffness decays geometrically from 50 to 0.2 and the landmark weight
    linearly from 5 to 0 by default.  homogeneous_weight scales the
    translation column in the transform-difference penalty.  Correspondences
    farther than prune_factor times the median distance are dropped (None
    disables pruning).
    """

    stiffness_schedule: tuple[float, ...] = field(
        default_factory=lambda: _geometric_schedule(50.0, 0.2, _DEFAULT_OUTER_STEPS)
    )
    landmark_weight_schedule: tuple[float, ...] = field(
        default_factory=lambda: _linear_schedule(5.0, 0.0, _DEFAULT_OUTER_STEPS)
    )
    inner_iteration_cap: int = 10
    convergence_tol: float = 1e-6
    homogeneous_weight: float = 1.0
    prune_factor: float | None = 4.0

    def __post_init__(self):
        stiff = tuple(float(x) for x in self.stiffness_schedule)
        lm = tuple(float(x) for x in self.landmark_weight_schedule)
        if len(stiff) != len(lm):
            raise ValueError("schedules must have equal length")
        if not stiff or min(stiff) <= 0:
            raise ValueError("stiffness values must be positive")
        if any(b > a + 1e-12 for a, b in zip(stiff, stiff[1:])):
            raise ValueError("stiffness schedule must be non-increasing")
        if min(lm) < 0 or any(b > a + 1e-12 for a, b in zip(lm, lm[1:])):
            raise ValueError("landmark weights must be non-negative and non-increasing")
        if lm[-1] != 0.0:
            raise ValueError("final landmark weight must be 0")
        if self.inner_iteration_cap < 1:
            raise ValueError("inner_iteration_cap must be >= 1")
        object.__setattr__(self, "stiffness_schedule", stiff)
        object.__setattr__(self, "landmark_weight_schedule", lm)


@dataclass(frozen=True, eq=False)
class NicpResult:
    deformed_template: HeadMesh
    per_vertex_affine: np.ndarray     # (n_v, 3, 4)
    residual_trace: tuple[float, ...]  # RMSE to target after each outer step
    objective_trace: tuple[tuple[float, ...], ...]  # per outer step, per inner iteration


def load_landmark_pairs(path: str | Path) -> list[tuple[int, np.ndarray]]:
    """Landmark pair file: one "template_index tx ty tz" per line, "#"
    comments allowed."""
    pairs: list[tuple[int, np.ndarray]] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for raw in fh:
            text = raw.partition("#")[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 4:
                raise RegistrationError(f"bad landmark pair line: {raw.strip()!r}")
            pairs.append((int(parts[0]), np.array([float(x) for x in parts[1:]])))
    return pairs


def _data_matrix(vertices: np.ndarray) -> sparse.csr_matrix:
    # Row i holds [x_i, y_i, z_i, 1] in the i-th 4-column block, so
    # D @ X gives the deformed vertex positions for stacked (4 n_v, 3) X.
    n = len(vertices)
    cols = (4 * np.arange(n)[:, None] + np.arange(4)[None, :]).reshape(-1)
    rows = np.repeat(np.arange(n), 4)
    vals = np.hstack([vertices, np.ones((n, 1))]).reshape(-1)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, 4 * n))


def _stiffness_matrix(n_v: int, edges: np.ndarray, gamma: float) -> sparse.csr_matrix:
    ne = len(edges)
    rows = np.arange(ne)
    incidence = sparse.coo_matrix(
        (
            np.concatenate([np.ones(ne), -np.ones(ne)]),
            (np.concatenate([rows, rows]), np.concatenate([edges[:, 0], edges[:, 1]])),
        ),
        shape=(ne, n_v),
    )
    weights = sparse.diags([1.0, 1.0, 1.0, gamma])
    return sparse.kron(incidence, weights).tocsr()


def _solve_stacked_lsqr(
    stiff_term: sparse.csr_matrix,
    data_m: sparse.csr_matrix,
    weights: np.ndarray,
    corr: np.ndarray,
    lm_m: sparse.csr_matrix | None,
    lm_targets: np.ndarray | None,
    beta: float,
    x0: np.ndarray,
) -> np.ndarray:
    blocks = [stiff_term, sparse.diags(np.sqrt(weights)) @ data_m]
    if lm_m is not None and beta > 0:
        blocks.append(beta * lm_m)
    a = sparse.vstack(blocks).tocsr()
    x = np.empty_like(x0)
    zeros = np.zeros(stiff_term.shape[0])
    for c in range(3):
        parts = [zeros, np.sqrt(weights) * corr[:, c]]
        if lm_m is not None and beta > 0:
            parts.append(beta * lm_targets[:, c])
        b = np.concatenate(parts)
        x[:, c] = lsqr(a, b, atol=0.0, btol=0.0, conlim=0.0, iter_lim=20 * a.shape[1])[0]
    return x


def nicp_register(
    template: HeadMesh,
    target: HeadMesh | np.ndarray,
    landmark_pairs: list[tuple[int, np.ndarray]] | None = None,
    config: NicpConfig | None = None,
) -> NicpResult:
    """Register the template onto the target mesh or point set.

    Returns the deformed template (connectivity unchanged), the per-vertex
    3x4 affine transforms, the per-outer-step correspondence RMSE, and the
    per-inner-iteration objective values.
    """
    config = config or NicpConfig()
    target_pts = target.vertices if isinstance(target, HeadMesh) else np.asarray(
        target, dtype=np.float64
    )
    if target_pts.ndim != 2 or target_pts.shape[1] != 3 or len(target_pts) == 0:
        raise RegistrationError("target must be a non-empty (m, 3) point set or mesh")
    landmark_pairs = landmark_pairs or []
    for idx, _ in landmark_pairs:
        if not 0 <= idx < template.n_v:
            raise RegistrationError(f"landmark template index {idx} out of range")

    n = template.n_v
    edges = mesh_edges(template.faces)
    if len(edges) == 0 and n > 1:
        raise SolverError("template has no edges; the stiffness term cannot couple vertices")
    data_m = _data_matrix(template.vertices)
    stiff_m = _stiffness_matrix(n, edges, config.homogeneous_weight)
    tree = cKDTree(target_pts)

    if landmark_pairs:
        lm_idx = np.array([i for i, _ in landmark_pairs], dtype=np.int64)
        lm_targets = np.vstack([p for _, p in landmark_pairs]).astype(np.float64)
        lm_m = data_m[lm_idx]
    else:
        lm_m = None
        lm_targets = None

    # Unknowns: per-vertex transforms stacked as (4 n_v, 3); start from identity.
    x = np.zeros((4 * n, 3))
    x[0::4, 0] = 1.0
    x[1::4, 1] = 1.0
    x[2::4, 2] = 1.0

    residual_trace: list[float] = []
    objective_trace: list[tuple[float, ...]] = []

    for alpha, beta in zip(config.stiffness_schedule, config.landmark_weight_schedule):
        stiff_term = alpha * stiff_m
        inner_objectives: list[float] = []
        prev_deformed = data_m @ x
        lu = None
        last_weights: np.ndarray | None = None
        rmse = float("nan")
        for _ in range(config.inner_iteration_cap):
            deformed = data_m @ x
            dist, nn = tree.query(deformed)
            weights = np.ones(n)
            if config.prune_factor is not None and n > 1:
                med = float(np.median(dist))
                if med > 0:
                    weights[dist > config.prune_factor * med] = 0.0
            if weights.sum() == 0:
                raise RegistrationError("all correspondences pruned; registration lost the target")
            corr = target_pts[nn]

            if alpha <= _DIRECT_SOLVE_STIFFNESS_LIMIT:
                if lu is None or last_weights is None or not np.array_equal(weights, last_weights):
                    w_diag = sparse.diags(weights)
                    ata = (
                        stiff_term.T @ stiff_term
                        + data_m.T @ w_diag @ data_m
                    ).tocsc()
                    if lm_m is not None and beta > 0:
                        ata = (ata + (beta**2) * (lm_m.T @ lm_m)).tocsc()
                    try:
                        lu = splu(ata)
                    except RuntimeError as exc:
                        raise SolverError(f"registration system is singular: {exc}") from exc
                    last_weights = weights
                rhs = data_m.T @ (weights[:, None] * corr)
                if lm_m is not None and beta > 0:
                    rhs = rhs + (beta**2) * (lm_m.T @ lm_targets)
                x = lu.solve(rhs)
            else:
                x = _solve_stacked_lsqr(
                    stiff_term, data_m, weights, corr, lm_m, lm_targets, beta, x
                )
            if not np.isfinite(x).all():
                raise SolverError(
                    "registration system is singular (flat template or disconnected patch?)"
                )

            deformed = data_m @ x
            dist, nn = tree.query(deformed)
            rmse = float(np.sqrt(np.mean(dist**2)))
            objective = float(np.sum((stiff_term @ x) ** 2)) + float(
                np.sum(weights[:, None] * (deformed - target_pts[nn]) ** 2)
            )
            if lm_m is not None and beta > 0:
                objective += float((beta**2) * np.sum((deformed[lm_idx] - lm_targets) ** 2))
            inner_objectives.append(objective)
            change = float(np.sqrt(np.mean(np.sum((deformed - prev_deformed) ** 2, axis=1))))
            prev_deformed = deformed
            if change < config.convergence_tol:
                break
        residual_trace.append(rmse)
        objective_trace.append(tuple(inner_objectives))

    deformed = data_m @ x
    return NicpResult(
        deformed_template=template.with_vertices(deformed),
        per_vertex_affine=x.reshape(n, 4, 3).transpose(0, 2, 1),
        residual_trace=tuple(residual_trace),
        objective_trace=tuple(objective_trace),
    )
