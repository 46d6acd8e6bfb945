import struct

import numpy as np
import pytest

from carimorph.errors import (
    DimensionError,
    ModelCorruptionError,
    ModelFormatError,
    ShapeMismatchError,
)
from carimorph.mesh import vertex_laplacian_magnitudes
from carimorph.pca import (
    CariPcaModel,
    PcaCoeffs,
    crc64,
    decode,
    encode,
    fit_pca,
    load_model,
    reconstruction_error,
    save_model,
)
from carimorph.synthetic import grid_mesh, linear_shape_family, smooth_displacement_basis


def make_family(rng, n=50, k=10, scale=0.1, grid=(5, 4)):
    base = grid_mesh(*grid)
    basis = smooth_displacement_basis(base, k, rng)
    meshes = linear_shape_family(base, basis, n, scale, rng)
    return base, basis, meshes


class TestFitPca:
    def test_known_linear_model_recovered(self, rng):
        # Oracle: data generated from a 10-dim linear model must be spanned
        # exactly by a d=10 fit.
        _, _, meshes = make_family(rng, n=50, k=10)
        model = fit_pca(meshes, d=10)
        assert float(model.variance_ratios.sum()) > 1.0 - 1e-10
        for mesh in meshes:
            assert reconstruction_error(model, mesh) < 1e-8

    def test_orthonormal_basis(self, rng):
        _, _, meshes = make_family(rng, n=20, k=6)
        model = fit_pca(meshes, d=6)
        gram = model.basis.T @ model.basis
        assert np.abs(gram - np.eye(6)).max() < 1e-10

    def test_mean_is_arithmetic_mean(self, rng):
        _, _, meshes = make_family(rng, n=12, k=4)
        stacked = np.stack([m.vector for m in meshes])
        for d in (1, 3):
            model = fit_pca(meshes, d=d)
            assert np.abs(model.mean - stacked.mean(axis=0)).max() < 1e-12

    def test_duplicated_meshes_degenerate(self, rng):
        base = grid_mesh(4, 3)
        model = fit_pca([base, base], d=1)
        assert model.degenerate
        assert np.array_equal(model.mean, base.vector)
        gram = model.basis.T @ model.basis
        assert np.abs(gram - np.eye(1)).max() < 1e-12

    def test_rank_one_data_ratios(self, rng):
        base = grid_mesh(4, 3)
        direction = rng.standard_normal(base.vector.size)
        meshes = [base.with_vertices(base.vector + t * direction) for t in (-1.0, 0.0, 1.0)]
        model = fit_pca(meshes, d=2)
        assert model.variance_ratios[0] == pytest.approx(1.0, abs=1e-12)
        assert model.variance_ratios[1] == pytest.approx(0.0, abs=1e-12)

    def test_sign_convention_deterministic(self, rng):
        _, _, meshes = make_family(rng, n=15, k=5)
        a = fit_pca(meshes, d=5)
        b = fit_pca(meshes, d=5)
        assert np.array_equal(a.basis, b.basis)
        for j in range(a.d):
            col = a.basis[:, j]
            first_nonzero = col[np.abs(col) > 1e-12][0]
            assert first_nonzero > 0

    def test_connectivity_mismatch(self, rng):
        a = grid_mesh(4, 3)
        b = grid_mesh(3, 4)
        with pytest.raises(ShapeMismatchError):
            fit_pca([a, b], d=1)

    def test_d_too_large(self, rng):
        _, _, meshes = make_family(rng, n=5, k=2)
        with pytest.raises(DimensionError):
            fit_pca(meshes, d=5)  # d must be <= n - 1 = 4


class TestEncodeDecode:
    def test_zero_coeffs_gives_mean(self, rng):
        _, _, meshes = make_family(rng, n=10, k=3)
        model = fit_pca(meshes, d=3)
        mesh = decode(model, PcaCoeffs(np.zeros(3)))
        assert np.array_equal(mesh.vector, model.mean)

    def test_single_mode(self, rng):
        _, _, meshes = make_family(rng, n=10, k=3)
        model = fit_pca(meshes, d=3)
        t = 0.37
        mesh = decode(model, PcaCoeffs(np.array([t, 0.0, 0.0])))
        assert np.allclose(mesh.vector, model.mean + t * model.basis[:, 0], atol=1e-15)

    def test_mean_encodes_to_zero(self, rng):
        _, _, meshes = make_family(rng, n=10, k=3)
        model = fit_pca(meshes, d=3)
        coeffs = encode(model, model.mean_mesh())
        assert np.allclose(coeffs.values, 0.0, atol=1e-12)

    def test_decode_encode_round_trip(self, rng):
        _, _, meshes = make_family(rng, n=10, k=4)
        model = fit_pca(meshes, d=4)
        alpha = rng.standard_normal(4)
        back = encode(model, decode(model, PcaCoeffs(alpha)))
        assert np.allclose(back.values, alpha, atol=1e-10)

    def test_training_meshes_round_trip(self, rng):
        _, _, meshes = make_family(rng, n=30, k=8)
        model = fit_pca(meshes, d=8)
        for mesh in meshes[:10]:
            rebuilt = decode(model, encode(model, mesh))
            rel = np.linalg.norm(rebuilt.vector - mesh.vector) / np.linalg.norm(mesh.vector)
            assert rel < 1e-8

    def test_encode_matches_dense_least_squares(self, rng):
        # Oracle: orthonormal projection equals the normal-equations solve.
        _, _, meshes = make_family(rng, n=12, k=5)
        model = fit_pca(meshes, d=5)
        mesh = meshes[0].with_vertices(
            meshes[0].vector + 0.05 * rng.standard_normal(meshes[0].vector.size)
        )
        coeffs = encode(model, mesh)
        oracle, *_ = np.linalg.lstsq(model.basis, mesh.vector - model.mean, rcond=None)
        assert np.allclose(coeffs.values, oracle, atol=1e-10)
        # Residual equals the orthogonal component.
        offset = mesh.vector - model.mean
        residual = offset - model.basis @ coeffs.values
        assert abs(residual @ model.basis[:, 0]) < 1e-10

    def test_projection_optimality(self, rng):
        _, _, meshes = make_family(rng, n=12, k=5)
        model = fit_pca(meshes, d=5)
        for _ in range(20):
            mesh = meshes[0].with_vertices(rng.standard_normal(meshes[0].vector.size))
            best = decode(model, encode(model, mesh))
            other = decode(model, PcaCoeffs(rng.standard_normal(5)))
            d_best = np.linalg.norm(mesh.vector - best.vector)
            d_other = np.linalg.norm(mesh.vector - other.vector)
            assert d_best <= d_other + 1e-9

    def test_coefficient_length_checked(self, rng):
        _, _, meshes = make_family(rng, n=8, k=3)
        model = fit_pca(meshes, d=3)
        with pytest.raises(DimensionError):
            decode(model, PcaCoeffs(np.zeros(5)))


class TestReconstructionError:
    def test_orthogonal_offset_scores_one(self, rng):
        _, basis, meshes = make_family(rng, n=20, k=4)
        model = fit_pca(meshes, d=4)
        # Build an offset orthogonal to the model basis.
        v = rng.standard_normal(model.mean.size)
        v -= model.basis @ (model.basis.T @ v)
        mesh = meshes[0].with_vertices(model.mean + v)
        assert reconstruction_error(model, mesh) == pytest.approx(1.0, abs=1e-10)

    def test_mean_scores_zero(self, rng):
        _, _, meshes = make_family(rng, n=8, k=3)
        model = fit_pca(meshes, d=3)
        assert reconstruction_error(model, model.mean_mesh()) == 0.0

    def test_out_of_family_shapes_score_worse(self, rng):
        # A model fit on mild shapes represents them well, exaggerated shapes
        # built on extra directions poorly.
        base = grid_mesh(5, 4)
        basis = smooth_displacement_basis(base, 8, rng)
        mild = linear_shape_family(base, basis[:, :4], 30, 0.05, rng)
        model = fit_pca(mild, d=4)
        in_dist = linear_shape_family(base, basis[:, :4], 5, 0.05, rng)
        out_dist = [
            base.with_vertices(base.vector + basis[:, 4:] @ (0.3 * rng.standard_normal(4)))
            for _ in range(5)
        ]
        err_in = max(reconstruction_error(model, m) for m in in_dist)
        err_out = min(reconstruction_error(model, m) for m in out_dist)
        assert err_out > err_in

    def test_bounded_coefficients_keep_meshes_smooth(self, rng):
        # Decoding coefficients bounded by 3 sigma must not produce meshes
        # rougher than the training family (no noisy-output failure mode).
        _, _, meshes = make_family(rng, n=40, k=6, grid=(6, 5))
        model = fit_pca(meshes, d=6)
        train_coeffs = np.stack([encode(model, m).values for m in meshes])
        sigma = train_coeffs.std(axis=0)
        max_train = max(vertex_laplacian_magnitudes(m).max() for m in meshes)
        for _ in range(25):
            alpha = rng.uniform(-3.0, 3.0, size=6) * sigma
            mesh = decode(model, PcaCoeffs(alpha))
            assert vertex_laplacian_magnitudes(mesh).max() <= 1.5 * max_train


class TestModelIO:
    def test_round_trip_bit_exact(self, rng, tmp_path):
        _, _, meshes = make_family(rng, n=10, k=4)
        model = fit_pca(meshes, d=4)
        path = tmp_path / "model.cpca"
        save_model(model, path, provenance="test fit")
        loaded = load_model(path)
        assert np.array_equal(loaded.mean, model.mean)
        assert np.array_equal(loaded.basis, model.basis)
        assert np.array_equal(loaded.variance_ratios, model.variance_ratios)
        assert np.array_equal(loaded.faces, model.faces)

    def test_truncated_file(self, rng, tmp_path):
        _, _, meshes = make_family(rng, n=8, k=3)
        model = fit_pca(meshes, d=3)
        path = tmp_path / "model.cpca"
        save_model(model, path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(ModelCorruptionError):
            load_model(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "model.cpca"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_corrupted_payload_fails_checksum(self, rng, tmp_path):
        _, _, meshes = make_family(rng, n=8, k=3)
        model = fit_pca(meshes, d=3)
        path = tmp_path / "model.cpca"
        save_model(model, path)
        blob = bytearray(path.read_bytes())
        blob[40] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(ModelCorruptionError):
            load_model(path)

    def test_independent_little_endian_writer(self, tmp_path):
        # Oracle: a file assembled by hand with explicit little-endian packing
        # (as any writer must produce, regardless of host byte order) loads
        # to the exact model.
        n_v, d = 2, 1
        mean = np.arange(6, dtype=np.float64) * 0.5
        basis = np.zeros((6, 1))
        basis[0, 0] = 1.0
        ratios = np.array([1.0])
        payload = b"CPCA" + struct.pack("<III", 1, n_v, d)
        for value in mean:
            payload += struct.pack("<d", value)
        for value in basis.reshape(-1, order="F"):
            payload += struct.pack("<d", value)
        payload += struct.pack("<d", ratios[0])
        payload += struct.pack("<Q", crc64(payload))
        path = tmp_path / "hand.cpca"
        path.write_bytes(payload)
        model = load_model(path)
        assert np.array_equal(model.mean, mean)
        assert np.array_equal(model.basis, basis)
        assert np.array_equal(model.variance_ratios, ratios)

    def test_byte_swapped_floats_rejected(self, rng, tmp_path):
        # A writer that dumped native big-endian floats would produce a file
        # whose checksum no longer matches its advertised little-endian
        # payload; the loader must refuse it rather than return garbage.
        _, _, meshes = make_family(rng, n=8, k=3)
        model = fit_pca(meshes, d=3)
        path = tmp_path / "model.cpca"
        save_model(model, path)
        blob = bytearray(path.read_bytes())
        dim = 3 * model.n_v
        floats = np.frombuffer(bytes(blob[16:16 + 8 * dim]), dtype="<f8")
        blob[16:16 + 8 * dim] = floats.astype(">f8").tobytes()
        path.write_bytes(bytes(blob))
        with pytest.raises(ModelCorruptionError):
            load_model(path)


def test_crc64_published_check_value():
    assert crc64(b"123456789") == 0x995DC9BBDF1939FA


def test_model_invariant_validation():
    with pytest.raises(DimensionError):
        CariPcaModel(np.zeros(6), np.ones((6, 2)), np.array([0.5, 0.5]))  # not orthonormal
    with pytest.raises(DimensionError):
        CariPcaModel(np.zeros(6), np.eye(6, 2), np.array([0.3, 0.7]))  # increasing ratios
