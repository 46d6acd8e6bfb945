"""PCA shape space over head-mesh coordinate vectors.

A model holds the mean shape, an orthonormal basis of principal directions
(columns), and the explained-variance ratios.  Any same-connectivity mesh is
encoded as the d coefficients of its offset from the mean, and decoded back
as mean + basis @ coeffs.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionError,
    ModelCorruptionError,
    ModelFormatError,
    ShapeMismatchError,
)
from .mesh import HeadMesh

_MAGIC = b"CPCA"
_VERSION = 1

# Entries this small in a unit-norm column are treated as zero when fixing
# the (arbitrary) principal-component signs.
_SIGN_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class CariPcaModel:
    """Linear shape model: mean (3*n_v,), basis (3*n_v, d) with orthonormal
    columns, variance_ratios (d,) non-increasing in [0, 1].

    faces carries the reference connectivity when known (it travels in the
    JSON sidecar, not the binary payload).  degenerate marks a fit on data
    with zero total variance.
    """

    mean: np.ndarray
    basis: np.ndarray
    variance_ratios: np.ndarray
    faces: np.ndarray | None = None
    degenerate: bool = False

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        basis = np.asarray(self.basis, dtype=np.float64)
        ratios = np.asarray(self.variance_ratios, dtype=np.float64).reshape(-1)
        if mean.size % 3 != 0:
            raise DimensionError("mean length must be a multiple of 3")
        if basis.ndim != 2 or basis.shape[0] != mean.size:
            raise DimensionError(
                f"basis must be ({mean.size}, d), got {basis.shape}"
            )
        if ratios.shape != (basis.shape[1],):
            raise DimensionError("variance_ratios length must equal d")
        gram = basis.T @ basis
        if np.abs(gram - np.eye(basis.shape[1])).max() > 1e-10:
            raise DimensionError("basis columns are not orthonormal within 1e-10")
        if (np.diff(ratios) > 1e-12).any():
            raise DimensionError("variance_ratios must be non-increasing")
        if ratios.size and (ratios.min() < -1e-15 or ratios.sum() > 1.0 + 1e-12):
            raise DimensionError("variance_ratios must lie in [0, 1] and sum to at most 1")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "variance_ratios", ratios)
        if self.faces is not None:
            object.__setattr__(self, "faces", np.asarray(self.faces, dtype=np.int64))

    @property
    def n_v(self) -> int:
        return self.mean.size // 3

    @property
    def d(self) -> int:
        return self.basis.shape[1]

    def mean_mesh(self) -> HeadMesh:
        faces = self.faces if self.faces is not None else np.zeros((0, 3), dtype=np.int64)
        return HeadMesh(self.mean.reshape(-1, 3), faces)


@dataclass(frozen=True)
class PcaCoeffs:
    """Coefficient vector locating one shape in the model's basis."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not np.isfinite(v).all():
            raise DimensionError("coefficients must be finite")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size


def _check_connectivity(model: CariPcaModel, mesh: HeadMesh) -> None:
    if mesh.n_v != model.n_v:
        raise ShapeMismatchError(
            f"mesh has {mesh.n_v} vertices, model expects {model.n_v}"
        )


def fit_pca(meshes: list[HeadMesh], d: int = 200) -> CariPcaModel:
    """Fit the shape space to same-connectivity meshes.

    mean is the arithmetic mean of the coordinate vectors; the basis holds the
    top-d principal directions of the centered data (economy SVD), with each
    column's sign fixed so its first nonzero entry is positive;
    variance_ratios are each direction's share of the total variance.
    Deterministic given the input order.
    """
    if len(meshes) < 2:
        raise DimensionError("need at least 2 meshes to fit")
    ref = meshes[0]
    for m in meshes[1:]:
        if m.n_v != ref.n_v or not m.same_connectivity(ref):
            raise ShapeMismatchError("all meshes must share one connectivity")
    n = len(meshes)
    dim = 3 * ref.n_v
    d_max = min(dim, n - 1)
    if not 1 <= d <= d_max:
        raise DimensionError(f"d must be in [1, {d_max}] for {n} meshes of {ref.n_v} vertices")
    data = np.stack([m.vector for m in meshes])  # (n, 3*n_v)
    mean = data.mean(axis=0)
    centered = data - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    variances = s**2  # common 1/(n-1) factor cancels in the ratios
    total = variances.sum()
    scale = float(np.abs(centered).max()) if centered.size else 0.0
    degenerate = bool(total <= (scale * 1e-14) ** 2 * n or total == 0.0)
    if degenerate:
        # Zero-variance corpus: keep an orthonormal completion so downstream
        # encode/decode still work, and flag the fit.
        basis = np.eye(dim, d)
        ratios = np.zeros(d)
    else:
        basis = vt[:d].T.copy()
        ratios = variances[:d] / total
    for j in range(basis.shape[1]):
        col = basis[:, j]
        nz = np.nonzero(np.abs(col) > _SIGN_EPS)[0]
        if nz.size and col[nz[0]] < 0:
            basis[:, j] = -col
    return CariPcaModel(mean, basis, ratios, faces=ref.faces, degenerate=degenerate)


def decode(model: CariPcaModel, coeffs: PcaCoeffs) -> HeadMesh:
    """mean + basis @ coeffs, reshaped onto the reference connectivity."""
    if len(coeffs) != model.d:
        raise DimensionError(f"expected {model.d} coefficients, got {len(coeffs)}")
    vec = model.mean + model.basis @ coeffs.values
    faces = model.faces if model.faces is not None else np.zeros((0, 3), dtype=np.int64)
    return HeadMesh(vec.reshape(-1, 3), faces)


def encode(model: CariPcaModel, mesh: HeadMesh) -> PcaCoeffs:
    """Orthogonal projection of (mesh - mean) onto the basis; the
    least-squares optimal coefficients."""
    _check_connectivity(model, mesh)
    return PcaCoeffs(model.basis.T @ (mesh.vector - model.mean))


def reconstruction_error(model: CariPcaModel, mesh: HeadMesh) -> float:
    """Relative L2 error of the encode/decode round trip.

    ||mesh - decode(encode(mesh))|| / ||mesh - mean||; 0 when the mesh is the
    mean itself.  Values near 1 mean the shape is almost entirely outside the
    spanned space (the extrapolation failure mode of a mismatched basis).
    """
    _check_connectivity(model, mesh)
    offset = mesh.vector - model.mean
    denom = float(np.linalg.norm(offset))
    if denom == 0.0:
        return 0.0
    residual = offset - model.basis @ (model.basis.T @ offset)
    return float(np.linalg.norm(residual)) / denom


# ---------------------------------------------------------------------------
# Model file I/O
#
# Binary little-endian layout: magic "CPCA", u32 version, u32 n_v, u32 d,
# f64 mean[3*n_v], f64 basis[3*n_v * d] column-major, f64 ratios[d],
# u64 CRC-64 of everything before it.  A JSON sidecar (<path>.json) carries
# n_v, d, a provenance string, and the reference faces when known.

_CRC64_POLY = 0x42F0E1EBA9EA3693  # ECMA-182
_CRC64_POLY_REFLECTED = int("{:064b}".format(_CRC64_POLY)[::-1], 2)
_U64 = (1 << 64) - 1


def _crc64_tables() -> list[list[int]]:
    # Slice-by-8 tables; the plain byte-at-a-time loop is far too slow for
    # multi-megabyte basis matrices.
    tables = [[0] * 256 for _ in range(8)]
    for i in range(256):
        crc = i
        for _ in range(8):
            crc = (crc >> 1) ^ _CRC64_POLY_REFLECTED if crc & 1 else crc >> 1
        tables[0][i] = crc
    for i in range(256):
        crc = tables[0][i]
        for k in range(1, 8):
            crc = tables[0][crc & 0xFF] ^ (crc >> 8)
            tables[k][i] = crc
    return tables


_CRC64_TABLES = _crc64_tables()


def crc64(data: bytes) -> int:
    """CRC-64/XZ (reflected ECMA-182, init/xorout all-ones)."""
    t0, t1, t2, t3, t4, t5, t6, t7 = reversed(_CRC64_TABLES)
    crc = _U64
    n8 = len(data) - len(data) % 8
    if n8:
        for (w,) in struct.iter_unpack("<Q", data[:n8]):
            v = crc ^ w
            crc = (
                t0[v & 0xFF]
                ^ t1[(v >> 8) & 0xFF]
                ^ t2[(v >> 16) & 0xFF]
                ^ t3[(v >> 24) & 0xFF]
                ^ t4[(v >> 32) & 0xFF]
                ^ t5[(v >> 40) & 0xFF]
                ^ t6[(v >> 48) & 0xFF]
                ^ t7[v >> 56]
            )
    table = _CRC64_TABLES[0]
    for b in data[n8:]:
        crc = table[(crc ^ b) & 0xFF] ^ (crc >> 8)
    return crc ^ _U64


def save_model(model: CariPcaModel, path: str | Path, provenance: str = "") -> None:
    """Write the binary model file plus its JSON sidecar."""
    path = Path(path)
    payload = bytearray()
    payload += _MAGIC
    payload += struct.pack("<III", _VERSION, model.n_v, model.d)
    payload += model.mean.astype("<f8").tobytes()
    payload += np.asfortranarray(model.basis.astype("<f8")).tobytes(order="F")
    payload += model.variance_ratios.astype("<f8").tobytes()
    checksum = crc64(bytes(payload))
    payload += struct.pack("<Q", checksum)
    path.write_bytes(bytes(payload))
    sidecar = {
        "n_v": model.n_v,
        "d": model.d,
        "provenance": provenance,
        "degenerate": model.degenerate,
    }
    if model.faces is not None:
        sidecar["faces"] = model.faces.tolist()
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar), encoding="utf-8"
    )


def load_model(path: str | Path) -> CariPcaModel:
    """Read a model written by :func:`save_model`.

    The layout is fixed little-endian, so files are portable across hosts of
    either byte order.  Truncation or checksum mismatch raises before any
    partial model escapes.
    """
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 4 + 12 + 8:
        raise ModelCorruptionError(f"{path}: file too short")
    if blob[:4] != _MAGIC:
        raise ModelFormatError(f"{path}: bad magic {blob[:4]!r}")
    version, n_v, d = struct.unpack_from("<III", blob, 4)
    if version != _VERSION:
        raise ModelFormatError(f"{path}: unsupported version {version}")
    dim = 3 * n_v
    expected = 16 + 8 * (dim + dim * d + d) + 8
    if len(blob) != expected:
        raise ModelCorruptionError(
            f"{path}: expected {expected} bytes for n_v={n_v}, d={d}, got {len(blob)}"
        )
    (stored_crc,) = struct.unpack_from("<Q", blob, len(blob) - 8)
    if crc64(blob[:-8]) != stored_crc:
        raise ModelCorruptionError(f"{path}: checksum mismatch")
    off = 16
    mean = np.frombuffer(blob, dtype="<f8", count=dim, offset=off).astype(np.float64)
    off += 8 * dim
    basis = (
        np.frombuffer(blob, dtype="<f8", count=dim * d, offset=off)
        .reshape(dim, d, order="F")
        .astype(np.float64)
    )
    off += 8 * dim * d
    ratios = np.frombuffer(blob, dtype="<f8", count=d, offset=off).astype(np.float64)
    faces = None
    degenerate = False
    sidecar_path = path.with_suffix(path.suffix + ".json")
    if sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
        if sidecar.get("n_v") != n_v or sidecar.get("d") != d:
            raise ModelFormatError(f"{sidecar_path}: sidecar disagrees with binary header")
        if sidecar.get("faces") is not None:
            faces = np.asarray(sidecar["faces"], dtype=np.int64)
        degenerate = bool(sidecar.get("degenerate", False))
    return CariPcaModel(mean, basis, ratios, faces=faces, degenerate=degenerate)
