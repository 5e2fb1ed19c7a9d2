import numpy as np
import pytest

from thermoforge import geomgen, metrics
from thermoforge.errors import MissingCell, ZeroReference, ZeroVariance


def brute_force_components(binary):
    """Oracle: BFS flood fill over 0-pixels with 4-connectivity."""
    m, n = binary.shape
    seen = np.zeros((m, n), bool)
    count = 0
    touching = 0
    for si in range(m):
        for sj in range(n):
            if binary[si, sj] != 0 or seen[si, sj]:
                continue
            count += 1
            queue = [(si, sj)]
            seen[si, sj] = True
            touches = False
            while queue:
                i, j = queue.pop()
                if i in (0, m - 1) or j in (0, n - 1):
                    touches = True
                for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    ni, nj = i + di, j + dj
                    if 0 <= ni < m and 0 <= nj < n and binary[ni, nj] == 0 and not seen[ni, nj]:
                        seen[ni, nj] = True
                        queue.append((ni, nj))
            touching += int(touches)
    return count, touching


class TestPointwiseMetrics:
    def test_perfect_prediction(self):
        y = np.array([1.0, 2.0, 3.0])
        assert metrics.mse(y, y) == 0.0
        assert metrics.nmse(y, y) == 0.0
        assert metrics.inf_nrm(y, y) == 0.0

    def test_mean_predictor_nmse_is_one(self):
        rng = np.random.default_rng(0)
        y = rng.normal(size=50)
        y_hat = np.full(50, y.mean())
        assert np.isclose(metrics.nmse(y_hat, y), 1.0)

    def test_hand_computed_values(self):
        y = np.array([0.0, 2.0])
        y_hat = np.array([1.0, 1.0])
        assert metrics.mse(y_hat, y) == 1.0
        assert metrics.nmse(y_hat, y) == 1.0
        assert metrics.inf_nrm(y_hat, y) == 0.5

    def test_zero_variance(self):
        with pytest.raises(ZeroVariance):
            metrics.nmse(np.array([1.0, 2.0]), np.array([3.0, 3.0]))
        with pytest.raises(ZeroVariance):
            metrics.nmse(np.array([1.0]), np.array([2.0]))

    def test_zero_reference(self):
        with pytest.raises(ZeroReference):
            metrics.inf_nrm(np.array([1.0]), np.array([0.0]))

    def test_nmse_affine_invariance(self):
        rng = np.random.default_rng(1)
        y = rng.normal(size=200)
        y_hat = y + rng.normal(scale=0.3, size=200)
        base = metrics.nmse(y_hat, y)
        for _ in range(20):
            a = rng.uniform(0.1, 10.0) * rng.choice([-1.0, 1.0])
            b = rng.normal(scale=5.0)
            shifted = metrics.nmse(a * y_hat + b, a * y + b)
            assert abs(shifted - base) <= 1e-10 * abs(base)


class TestStructuralConsistency:
    def test_training_rasters_valid(self, tmp_path):
        manifest = geomgen.generate_dataset(
            geomgen.GeometrySpec(grid_m=64, grid_n=64, seed=17), 30, tmp_path)
        ref = metrics.reference_range_from_manifest(manifest)
        rasters = geomgen.load_rasters(manifest, tmp_path)
        assert all(metrics.structural_consistency(r, ref).valid for r in rasters)

    def test_five_shapes_invalid(self):
        raster = np.ones((32, 32), np.uint8)
        for k, (i, j) in enumerate([(5, 5), (5, 25), (25, 5), (25, 25), (15, 15)]):
            raster[i - 2 : i + 3, j - 2 : j + 3] = 0
        report = metrics.structural_consistency(raster, (0.0, 1.0))
        assert report.figure_count == 5
        assert not report.valid

    def test_area_band_enforced(self):
        raster = np.ones((32, 32), np.uint8)
        for i, j in [(6, 6), (6, 24), (24, 6), (24, 24)]:
            raster[i - 2 : i + 3, j - 2 : j + 3] = 0
        frac = float((raster == 0).mean())
        assert metrics.structural_consistency(raster, (frac, frac)).valid
        assert not metrics.structural_consistency(raster, (frac * 2, frac * 3)).valid
        # the 5% widening accepts values just outside the raw range
        assert metrics.structural_consistency(raster, (frac / 1.04, frac / 1.04)).valid

    def test_soft_and_binarized_agree(self):
        rng = np.random.default_rng(2)
        soft = rng.random((24, 24)).astype(np.float32)
        ref = (0.0, 1.0)
        a = metrics.structural_consistency(soft, ref)
        b = metrics.structural_consistency(metrics.binarize(soft), ref)
        assert a.to_dict() == b.to_dict()

    def test_boundary_touching_counted_and_flagged(self):
        raster = np.ones((16, 16), np.uint8)
        raster[0:3, 4:7] = 0  # blob on the ring
        for i, j in [(8, 4), (8, 11), (12, 6)]:
            raster[i, j] = 0
        report = metrics.structural_consistency(raster, (0.0, 1.0))
        assert report.figure_count == 4
        assert report.boundary_touching == 1
        assert report.valid  # count is 4 and area in range; flag is advisory

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            raster = (rng.random((20, 20)) > 0.25).astype(np.uint8)
            labels_count = metrics.hole_components(raster)[1]
            report = metrics.structural_consistency(raster, (0.0, 1.0))
            bf_count, bf_touch = brute_force_components(raster)
            assert labels_count == bf_count == report.figure_count
            assert report.boundary_touching == bf_touch


class TestStudy:
    def _toy_inputs(self):
        rng = np.random.default_rng(4)
        rasters = (rng.random((6, 16, 16)) > 0.1).astype(np.uint8)
        fields = [rng.normal(size=(16, 16)) for _ in range(6)]
        masks = [np.ones((16, 16), bool) for _ in range(6)]
        return rasters, fields, masks

    def test_identical_predictors_identical_rows(self):
        _, fields, masks = self._toy_inputs()
        study = {}
        for c in metrics.CELLS:
            per = metrics.per_sample_errors([f + 0.1 for f in fields], fields, masks)
            study[c] = {"stats": metrics.ErrorStats.from_samples(per), "per_sample": per}
        rows = {str(study[c]["stats"]) for c in metrics.CELLS}
        assert len(rows) == 1

    def test_missing_cell(self):
        rasters, fields, masks = self._toy_inputs()
        with pytest.raises(MissingCell):
            metrics.run_2x2_study({"AE+CNN": lambda r: r}, rasters, fields, masks)

    def test_run_study_end_to_end(self):
        rasters, fields, masks = self._toy_inputs()
        ref = {geomgen.content_hash(r): f for r, f in zip(rasters, fields)}
        cells = {c: (lambda r: ref[geomgen.content_hash(r)] * 1.01) for c in metrics.CELLS}
        study = metrics.run_2x2_study(cells, rasters, fields, masks)
        for c in metrics.CELLS:
            assert study[c]["stats"].nmse_mean < 1e-3
        table = metrics.study_table(study)
        assert all(c in table for c in metrics.CELLS)
        assert metrics.study_to_json(study)


def test_endpoint_interpolation_matches_reconstruction_rate(tiny_vrrae, tiny_data):
    """With t forced to 0, every 'interpolant' is a plain reconstruction, so
    the interpolation validity rate equals the reconstruction validity rate
    of the drawn endpoints exactly."""
    man = tiny_data["manifest"]
    test_rasters = tiny_data["rasters"][man.sample_indices("test")]
    ref = metrics.reference_range_from_manifest(man)
    n_pairs = 30

    rate, _ = metrics.validity_rates(tiny_vrrae, test_rasters, ref, n_pairs, 1,
                                     np.random.default_rng(123),
                                     t_sampler=lambda rng: 0.0)

    codes = tiny_vrrae.project_batch(test_rasters)
    recon_valid = [
        metrics.structural_consistency(tiny_vrrae.decode(c), ref).valid for c in codes
    ]
    replay = np.random.default_rng(123)
    expected = np.mean([recon_valid[replay.choice(len(codes), size=2, replace=False)[0]]
                        for _ in range(n_pairs)])
    assert rate == pytest.approx(float(expected))
