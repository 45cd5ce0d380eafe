import math
import warnings

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import ConvergenceWarning
from sklearn.pipeline import make_pipeline

from hsdr import hsio
from hsdr.classifier import SoftmaxMLP
from hsdr.errors import InsufficientClassSamples, InvalidK, InvalidM, SingularScatter
from hsdr.hsio import HyperCube, LabelRaster
from hsdr.linalg import covariance
from hsdr.synth import ClassSpec, SceneSpec, generate
from hsdr.transforms import (
    LDA,
    PCA,
    ClassWisePCA,
    FastICA,
    LinearTransform,
    apply,
    apply_samples,
    fit_cwpca,
    fit_cwpca_samples,
    fit_ica,
    fit_lda,
    fit_pca,
    load_transform,
    save_transform,
)

from oracles import amari_index, best_fisher_direction_2d, fisher_ratio


def _rng(seed=0):
    return np.random.default_rng(seed)


class TestPCA:
    def test_line_y_equals_x(self):
        t = np.linspace(-3, 3, 41)
        x = np.column_stack([t, t]) + 2.0
        tr = fit_pca(x, 1)
        np.testing.assert_allclose(tr.projection[0], [1 / math.sqrt(2)] * 2, atol=1e-12)
        assert tr.metadata["explained_variance_ratio"][0] == pytest.approx(1.0, abs=1e-12)
        y = apply_samples(tr, x)
        assert np.var(y) == pytest.approx(np.var(x[:, 0]) + np.var(x[:, 1]), rel=1e-12)

    def test_full_rank_reconstruction(self):
        x = _rng(1).normal(size=(200, 6)) @ _rng(2).normal(size=(6, 6))
        tr = fit_pca(x, 6)
        y = apply_samples(tr, x)
        back = tr.mean + y @ np.linalg.inv(tr.projection).T
        assert np.abs(back - x).max() <= 1e-6
        back_t = tr.mean + y @ tr.projection
        assert np.abs(back_t - x).max() <= 1e-5

    def test_rows_orthonormal(self):
        tr = fit_pca(_rng(3).normal(size=(100, 10)), 4)
        np.testing.assert_allclose(tr.projection @ tr.projection.T, np.eye(4), atol=1e-8)

    @pytest.mark.parametrize("k", [0, 7])
    def test_invalid_k(self, k):
        with pytest.raises(InvalidK):
            fit_pca(np.ones((5, 6)) + np.arange(6), k)

    def test_rank_deficient_ok(self):
        x = np.zeros((10, 3))
        x[:, 0] = np.arange(10)
        tr = fit_pca(x, 3)
        assert tr.metadata["explained_variance"][1:] == [0.0, 0.0]

    def test_decorrelation_and_ordering(self):
        rng = _rng(4)
        x = rng.normal(size=(500, 8)) @ rng.normal(size=(8, 8))
        tr = fit_pca(x, 5)
        c = covariance(apply_samples(tr, x)).covariance
        lam_max = tr.metadata["explained_variance"][0]
        off = c - np.diag(np.diag(c))
        assert np.abs(off).max() <= 1e-6 * lam_max
        assert np.all(np.diff(np.diag(c)) <= 1e-9 * lam_max)

    def test_optimal_first_direction(self):
        rng = _rng(5)
        x = rng.normal(size=(300, 4)) * [3, 1, 0.5, 2]
        x = x @ np.linalg.qr(rng.normal(size=(4, 4)))[0]
        captured = np.var(apply_samples(fit_pca(x, 1), x))
        dirs = rng.normal(size=(1000, 4))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        assert captured >= np.var(x @ dirs.T, axis=0).max()


def _two_axis_scene(seed=0, literal_bands=6):
    e = np.eye(literal_bands)
    base = np.full(literal_bands, 5.0)
    spec = SceneSpec(
        width=20, height=20, bands=literal_bands, noise_sigma=0.0, seed=seed,
        classes=[
            ClassSpec(base, 0.4, 1.0, axes=3.0 * e[[1]]),
            ClassSpec(base + 2.0, 0.4, 1.0, axes=3.0 * e[[4]]),
        ],
    )
    return generate(spec)


class TestClassWisePCA:
    def test_rank_one_classes(self):
        cube, raster = _two_axis_scene()
        split = hsio.stratified_split(raster, 0.7, seed=0)
        tr = fit_cwpca(cube, raster, split, m=1)
        assert tr.output_bands == 2
        np.testing.assert_allclose(np.abs(tr.projection[0]), np.eye(6)[1], atol=1e-9)
        np.testing.assert_allclose(np.abs(tr.projection[1]), np.eye(6)[4], atol=1e-9)

    def test_block_equals_per_class_pca(self, small_scene):
        cube, raster = small_scene
        split = hsio.stratified_split(raster, 0.7, seed=2)
        tr = fit_cwpca(cube, raster, split, m=2)
        x, y, _ = hsio.cube_to_samples(cube, raster, "train", split)
        for i, c in enumerate(range(1, raster.n_classes + 1)):
            ref = fit_pca(x[y == c], 2)
            assert np.array_equal(tr.projection[2 * i:2 * i + 2], ref.projection)
            np.testing.assert_array_equal(tr.offset[2 * i:2 * i + 2], -ref.projection @ ref.mean)

    def test_block_output_is_class_centred_pca(self, small_scene):
        cube, raster = small_scene
        split = hsio.stratified_split(raster, 0.7, seed=2)
        tr = fit_cwpca(cube, raster, split, m=1)
        x, y, _ = hsio.cube_to_samples(cube, raster, "train", split)
        out = apply_samples(tr, x)
        for i, c in enumerate(range(1, raster.n_classes + 1)):
            ref = fit_pca(x[y == c], 1)
            np.testing.assert_allclose(out[y == c, i], apply_samples(ref, x[y == c])[:, 0], atol=1e-9)

    def test_invalid_m(self, small_scene):
        cube, raster = small_scene
        split = hsio.stratified_split(raster, 0.7, seed=0)
        with pytest.raises(InvalidM):
            fit_cwpca(cube, raster, split, m=4)
        with pytest.raises(InvalidM):
            fit_cwpca(cube, raster, split, m=0)

    def test_insufficient_samples(self):
        x = _rng().normal(size=(5, 4))
        with pytest.raises(InsufficientClassSamples):
            fit_cwpca_samples(x, np.array([1, 1, 1, 1, 2]), m=1)

    def test_class_missing_from_training(self):
        cube = HyperCube(_rng().normal(size=(4, 2, 3)).astype(np.float32))
        raster = LabelRaster(np.array([[1, 1, 1], [1, 3, 3]]))
        split = hsio.stratified_split(LabelRaster(np.array([[1, 1, 1], [1, 2, 2]])), 0.5, seed=0)
        with pytest.raises(InsufficientClassSamples):
            fit_cwpca(cube, raster, split, m=1)

    def test_literal_mode_matches_zero_filled_scene(self, small_scene):
        cube, raster = small_scene
        split = hsio.stratified_split(raster, 0.7, seed=1)
        tr = fit_cwpca(cube, raster, split, m=1, mode="literal")
        pixels = cube.pixels().astype(np.float64)
        train_labels = np.where(split.train_mask, raster.labels, 0).ravel()
        for i, c in enumerate(range(1, raster.n_classes + 1)):
            subscene = np.where((train_labels == c)[:, None], pixels, 0.0)
            ref = fit_pca(subscene, 1)
            assert abs(float(tr.projection[i] @ ref.projection[0])) == pytest.approx(1.0, abs=1e-8)
        assert tr.metadata["mode"] == "literal"

    def test_scaling_leaves_directions(self, small_scene):
        cube, raster = small_scene
        split = hsio.stratified_split(raster, 0.7, seed=0)
        a = fit_cwpca(cube, raster, split, m=2)
        scaled = HyperCube(cube.data * np.float32(4.0))
        b = fit_cwpca(scaled, raster, split, m=2)
        cos = np.abs(np.sum(a.projection * b.projection, axis=1))
        np.testing.assert_allclose(cos, 1.0, atol=1e-8)

    def test_label_leakage_free(self, small_scene):
        cube, raster = small_scene
        split = hsio.stratified_split(raster, 0.7, seed=0)
        hidden = LabelRaster(np.where(split.test_mask, 0, raster.labels))
        assert fit_cwpca(cube, raster, split) == fit_cwpca(cube, hidden, split)


class TestLDA:
    def test_matches_brute_force_fisher(self):
        rng = _rng(6)
        a = rng.normal([0, 0], [2.0, 0.4], size=(300, 2))
        b = rng.normal([0.5, 2.0], [2.0, 0.4], size=(300, 2))
        x = np.vstack([a, b])
        y = np.repeat([1, 2], 300)
        tr = fit_lda(x, y, 1)
        best = best_fisher_direction_2d(x, y)
        assert abs(tr.projection[0] @ best) >= 0.99
        diff = b.mean(0) - a.mean(0)
        assert fisher_ratio(tr.projection[0], x, y) >= fisher_ratio(diff / np.linalg.norm(diff), x, y)

    def test_aligned_with_mean_difference_for_isotropic_blobs(self):
        rng = _rng(7)
        x = np.vstack([rng.normal([0, 0], 1.0, (400, 2)), rng.normal([3, 1], 1.0, (400, 2))])
        y = np.repeat([1, 2], 400)
        d = np.array([3.0, 1.0]) / math.sqrt(10)
        assert abs(fit_lda(x, y, 1).projection[0] @ d) >= 0.99

    def test_identical_means(self):
        rng = _rng(8)
        base = rng.normal(size=(100, 3))
        base -= base.mean(axis=0)
        x = np.vstack([base, -base])
        y = np.repeat([1, 2], 100)
        tr = fit_lda(x, y, 1)
        assert tr.metadata["fisher_ratios"][0] == pytest.approx(0.0, abs=1e-10)
        assert np.all(np.isfinite(tr.projection))

    def test_k_up_to_n_classes(self):
        rng = _rng(9)
        x = rng.normal(size=(90, 8)) + np.repeat(np.eye(8)[:3] * 4, 30, axis=0)
        y = np.repeat([1, 2, 3], 30)
        assert fit_lda(x, y, 3).output_bands == 3
        with pytest.raises(InvalidK):
            fit_lda(x, y, 4)

    def test_insufficient(self):
        with pytest.raises(InsufficientClassSamples):
            fit_lda(_rng().normal(size=(4, 2)), np.array([1, 1, 1, 2]), 1)

    def test_singular_scatter(self):
        x = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(SingularScatter):
            fit_lda(x, np.array([1, 1, 2, 2]), 1)

    def test_regularization_handles_small_classes(self):
        rng = _rng(10)
        x = rng.normal(size=(6, 20))
        tr = fit_lda(x, np.array([1, 1, 2, 2, 3, 3]), 2)
        assert np.all(np.isfinite(tr.projection))


class TestICA:
    def _mixture(self, seed=0, n=3000):
        rng = _rng(seed)
        s = rng.uniform(-1, 1, size=(n, 2))
        a = np.array([[1.0, 0.6], [0.4, 1.0]])
        return s @ a.T, a

    def test_recovers_sources(self):
        x, a = self._mixture()
        tr = fit_ica(x, 2, seed=1)
        assert amari_index(tr.projection @ a) < 0.1
        assert tr.metadata["converged"]

    def test_whitened_output(self):
        x, _ = self._mixture(1)
        tr = fit_ica(x, 2, seed=3)
        c = covariance(apply_samples(tr, x)).covariance
        assert np.abs(c - np.eye(2)).max() <= 1e-4

    def test_reduces_dimension_and_whitens(self):
        rng = _rng(2)
        x = rng.laplace(size=(1000, 3)) @ rng.normal(size=(3, 7)) + 0.01 * rng.normal(size=(1000, 7))
        tr = fit_ica(x, 3, seed=0)
        c = covariance(apply_samples(tr, x)).covariance
        assert tr.output_bands == 3
        assert np.abs(c - np.eye(3)).max() <= 1e-4

    def test_deterministic(self):
        x, _ = self._mixture(2)
        assert fit_ica(x, 2, seed=5) == fit_ica(x, 2, seed=5)

    def test_invalid_k(self):
        x, _ = self._mixture()
        with pytest.raises(InvalidK):
            fit_ica(x, 3)

    def test_non_convergence_warns(self):
        x, _ = self._mixture()
        with pytest.warns(ConvergenceWarning):
            tr = fit_ica(x, 2, seed=0, max_iter=1, tol=1e-15)
        assert tr.metadata["converged"] is False
        assert np.all(np.isfinite(tr.projection))


class TestApply:
    def test_identity(self):
        cube = HyperCube(_rng().normal(size=(3, 4, 5)).astype(np.float32))
        t = LinearTransform("pca", np.zeros(3), np.eye(3))
        assert apply(t, cube) == cube

    def test_pca_full_rank_roundtrip_on_cube(self):
        cube = HyperCube(_rng(1).normal(size=(5, 6, 7)).astype(np.float32))
        t = fit_pca(cube.pixels(), 5)
        out = apply(t, cube)
        back = out.pixels().astype(np.float64) @ t.projection + t.mean
        assert np.abs(back - cube.pixels()).max() <= 1e-5

    def test_spatial_shape_and_unlabeled_pixels(self, small_scene):
        cube, raster = small_scene
        split = hsio.stratified_split(raster, 0.7, seed=0)
        t = fit_cwpca(cube, raster, split, m=1)
        out = apply(t, cube)
        assert (out.bands, out.height, out.width) == (4, cube.height, cube.width)
        unlabeled = raster.labels.ravel() == 0
        expected = apply_samples(t, cube.pixels()[unlabeled])
        np.testing.assert_allclose(out.pixels()[unlabeled], expected, rtol=1e-6, atol=1e-4)

    def test_band_mismatch(self):
        t = LinearTransform("pca", np.zeros(3), np.eye(3))
        with pytest.raises(ValueError):
            apply(t, HyperCube(np.ones((4, 1, 1), dtype=np.float32)))

    @pytest.mark.parametrize("method", ["pca", "ica", "lda", "cwpca"])
    def test_linear_after_centering(self, method, small_scene):
        cube, raster = small_scene
        split = hsio.stratified_split(raster, 0.7, seed=0)
        x, y, _ = hsio.cube_to_samples(cube, raster, "train", split)
        t = {
            "pca": lambda: fit_pca(x, 3),
            "ica": lambda: fit_ica(x, 3, seed=0),
            "lda": lambda: fit_lda(x, y, 3),
            "cwpca": lambda: fit_cwpca(cube, raster, split, m=1),
        }[method]()
        base = apply_samples(t, np.zeros((1, x.shape[1])))

        def centred(v):
            return apply_samples(t, v) - base

        rng = _rng(11)
        u, v = rng.normal(size=(2, 1, x.shape[1]))
        alpha, beta = 1.7, -0.3
        np.testing.assert_allclose(centred(alpha * u + beta * v), alpha * centred(u) + beta * centred(v),
                                   atol=1e-9)


class TestPersistence:
    @pytest.mark.parametrize("method", ["pca", "cwpca", "ica"])
    def test_roundtrip(self, tmp_path, small_scene, method):
        cube, raster = small_scene
        split = hsio.stratified_split(raster, 0.7, seed=0)
        x, _, _ = hsio.cube_to_samples(cube, raster, "train", split)
        t = {"pca": lambda: fit_pca(x, 4), "cwpca": lambda: fit_cwpca(cube, raster, split, 2),
             "ica": lambda: fit_ica(x, 2)}[method]()
        save_transform(t, tmp_path / "t.hsdt")
        back = load_transform(tmp_path / "t.hsdt")
        assert back == t
        first = (tmp_path / "t.hsdt").read_bytes()
        save_transform(back, tmp_path / "t2.hsdt")
        assert (tmp_path / "t2.hsdt").read_bytes() == first

    def test_header_is_text(self, tmp_path):
        save_transform(fit_pca(_rng().normal(size=(20, 3)), 2), tmp_path / "t.hsdt")
        lines = (tmp_path / "t.hsdt").read_bytes().split(b"\n", 2)
        assert lines[0] == b"HSDT 1"
        assert b'"method":"pca"' in lines[1]


class TestEstimators:
    def test_get_params_and_clone(self):
        for est in (PCA(5), ClassWisePCA(2, mode="literal"), LDA(3), FastICA(4, random_state=7)):
            cloned = clone(est)
            assert cloned.get_params() == est.get_params()

    def test_pca_estimator_matches_function(self):
        x = _rng().normal(size=(50, 6))
        est = PCA(3).fit(x)
        np.testing.assert_array_equal(est.transform(x), apply_samples(fit_pca(x, 3), x))
        np.testing.assert_allclose(PCA(6).fit(x).inverse_transform(PCA(6).fit_transform(x)), x, atol=1e-10)

    def test_pipeline_composition(self, small_scene):
        cube, raster = small_scene
        x, y, _ = hsio.cube_to_samples(cube, raster)
        pipe = make_pipeline(ClassWisePCA(1), SoftmaxMLP(epochs=20, batch_size=16))
        pipe.fit(x, y)
        assert pipe.score(x, y) > 0.8
        assert set(pipe.predict(x)) <= set(np.unique(y))

    def test_unfitted(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            PCA().transform(np.ones((2, 2)))

    def test_lda_and_ica_estimators(self, small_scene):
        cube, raster = small_scene
        x, y, _ = hsio.cube_to_samples(cube, raster)
        assert LDA(2).fit_transform(x, y).shape == (x.shape[0], 2)
        with warnings.catch_warnings():
            warnings.simplefilter("error", ConvergenceWarning)
            assert FastICA(3).fit(x).transform(x).shape == (x.shape[0], 3)
