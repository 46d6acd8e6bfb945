"""Feature vectors, the cosine identity measure, and exaggeration control.

A head's feature vector is its displacement from the mean head of the normal
shape space; its direction carries identity, its magnitude carries the degree
of exaggeration.  Exaggeration scales the feature vector; the two-parameter
control mixes a generated caricature's feature with the reconstructed head's.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError, UndefinedIdentityError
from .mesh import HeadMesh

# Slider range exposed by UIs; the library itself accepts any finite value
# (negative u yields an anti-caricature).
UI_CONTROL_RANGE = (0.0, 2.0)


@dataclass(frozen=True, eq=False)
class MeanHead:
    """Mean head of the normal shape space, with reference connectivity."""

    mesh: HeadMesh

    @classmethod
    def from_mesh(cls, mesh: HeadMesh) -> "MeanHead":
        return cls(mesh)

    @property
    def vector(self) -> np.ndarray:
        return self.mesh.vector

    @property
    def n_v(self) -> int:
        return self.mesh.n_v


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Displacement of a head from the mean head, flattened to (3*n_v,).

    source tags where the head came from: "dP" for a reconstructed normal
    head, "dG" for a generated caricature.
    """

    values: np.ndarray
    source: str = "dP"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not np.isfinite(v).all():
            raise ShapeMismatchError("feature vector must be finite")
        object.__setattr__(self, "values", v)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


@dataclass(frozen=True)
class ControlParams:
    """The two user-facing exaggeration weights."""

    u1: float
    u2: float

    def __post_init__(self):
        if not (np.isfinite(self.u1) and np.isfinite(self.u2)):
            raise ValueError("control parameters must be finite")


def _check_match(a_len: int, b_len: int, what: str) -> None:
    if a_len != b_len:
        raise ShapeMismatchError(f"{what}: length {a_len} vs {b_len}")


def feature_vector(head: HeadMesh, mean: MeanHead, source: str = "dP") -> FeatureVector:
    """head - mean as a flat displacement vector."""
    if head.n_v != mean.n_v:
        raise ShapeMismatchError(
            f"head has {head.n_v} vertices, mean head has {mean.n_v}"
        )
    return FeatureVector(head.vector - mean.vector, source=source)


def cosine_identity(a: FeatureVector | np.ndarray, b: FeatureVector | np.ndarray) -> float:
    """Cosine of the angle between two feature vectors.

    1 means identical identity direction, 0 unrelated, -1 opposite.  The
    zero vector (the mean head itself) has no identity direction and is
    rejected.
    """
    av = a.values if isinstance(a, FeatureVector) else np.asarray(a, dtype=np.float64)
    bv = b.values if isinstance(b, FeatureVector) else np.asarray(b, dtype=np.float64)
    _check_match(av.size, bv.size, "feature vectors")
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na == 0.0 or nb == 0.0:
        raise UndefinedIdentityError("zero-norm feature vector has no identity direction")
    return float(np.dot(av, bv) / (na * nb))


def exaggerate(mean: MeanHead, head: HeadMesh, u: float) -> HeadMesh:
    """Scale the head's feature vector by u: mean + u * (head - mean).

    u = 0 gives the mean head, u = 1 reproduces the input, u > 1 exaggerates
    while preserving the identity direction.
    """
    if not np.isfinite(u):
        raise ValueError("exaggeration coefficient must be finite")
    if head.n_v != mean.n_v:
        raise ShapeMismatchError(
            f"head has {head.n_v} vertices, mean head has {mean.n_v}"
        )
    vec = mean.vector + u * (head.vector - mean.vector)
    return head.with_vertices(vec)


def user_control(
    mean: MeanHead,
    d_g: FeatureVector,
    d_p: FeatureVector,
    u1: float,
    u2: float,
    faces: np.ndarray | None = None,
) -> HeadMesh:
    """Two-parameter control: mean + u1 * d_g + u2 * d_p.

    u1 weighs the generated caricature's style, u2 the reconstructed head's
    strict identity; u1 + u2 = 1 interpolates between the two heads.  faces
    defaults to the mean head's connectivity.
    """
    if not (np.isfinite(u1) and np.isfinite(u2)):
        raise ValueError("control parameters must be finite")
    dim = mean.vector.size
    _check_match(d_g.values.size, dim, "caricature feature vs mean head")
    _check_match(d_p.values.size, dim, "head feature vs mean head")
    vec = mean.vector + u1 * d_g.values + u2 * d_p.values
    if faces is None:
        faces = mean.mesh.faces
    return HeadMesh(vec.reshape(-1, 3), faces)
