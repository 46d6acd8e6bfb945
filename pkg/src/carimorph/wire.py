"""Compact binary mesh payload for the HTTP service.

Little-endian layout: u32 vertex count, u32 face count, f32 vertices
(x0 y0 z0 x1 ...), u32 face indices.  Deterministic: the same mesh always
serializes to the same bytes.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import MeshFormatError
from .mesh import HeadMesh

_HEADER = struct.Struct("<II")


def encode_mesh(mesh: HeadMesh) -> bytes:
    verts = mesh.vertices.astype("<f4").tobytes()
    faces = mesh.faces.astype("<u4").tobytes()
    return _HEADER.pack(mesh.n_v, mesh.n_f) + verts + faces


def decode_mesh(payload: bytes) -> HeadMesh:
    if len(payload) < _HEADER.size:
        raise MeshFormatError("payload too short for header")
    n_v, n_f = _HEADER.unpack_from(payload)
    expected = _HEADER.size + 12 * n_v + 12 * n_f
    if len(payload) != expected:
        raise MeshFormatError(
            f"payload size {len(payload)} does not match header ({expected} expected)"
        )
    off = _HEADER.size
    verts = np.frombuffer(payload, dtype="<f4", count=3 * n_v, offset=off).astype(np.float64)
    off += 12 * n_v
    faces = np.frombuffer(payload, dtype="<u4", count=3 * n_f, offset=off).astype(np.int64)
    return HeadMesh(verts.reshape(-1, 3), faces.reshape(-1, 3))
