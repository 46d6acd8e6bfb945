"""carimorph: a 3D caricature morphable-model engine.

Builds a PCA shape space over fixed-connectivity head meshes, exaggerates
heads through feature-vector scaling with two-parameter user control, scores
identity/exaggeration with perceptual GAN losses, registers a template head
onto face meshes non-rigidly, completes vertex-color textures harmonically,
and aggregates pairwise user votes into quality scores.
"""

from .errors import CarimorphError
from .exaggerate import (
    ControlParams,
    FeatureVector,
    MeanHead,
    cosine_identity,
    exaggerate,
    feature_vector,
    user_control,
)
from .mesh import (
    HeadMesh,
    LandmarkIndexSet,
    RigidTransform,
    center_and_scale,
    load_landmarks,
    load_mesh,
    rigid_align,
    save_mesh,
)
from .pca import (
    CariPcaModel,
    PcaCoeffs,
    decode,
    encode,
    fit_pca,
    load_model,
    reconstruction_error,
    save_model,
)

__version__ = "0.1.0"

__all__ = [
    "CarimorphError",
    "CariPcaModel",
    "ControlParams",
    "FeatureVector",
    "HeadMesh",
    "LandmarkIndexSet",
    "MeanHead",
    "PcaCoeffs",
    "RigidTransform",
    "center_and_scale",
    "cosine_identity",
    "decode",
    "encode",
    "exaggerate",
    "feature_vector",
    "fit_pca",
    "load_landmarks",
    "load_mesh",
    "load_model",
    "reconstruction_error",
    "rigid_align",
    "save_mesh",
    "save_model",
    "user_control",
]
