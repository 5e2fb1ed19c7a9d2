import numpy as np
import pytest

from thermoforge import geomgen, heatfd
from thermoforge.errors import SingularSystem
from thermoforge.heatfd import BOUNDARY, HOLE, INTERIOR, ThermalConfig


def solid_raster(m, n):
    return np.ones((m, n), dtype=np.uint8)


def square_hole_raster(m=16, n=16, r0=6, r1=10, c0=6, c1=10):
    raster = solid_raster(m, n)
    raster[r0:r1, c0:c1] = 0
    return raster


def dense_reference_solve(raster, T_outer, T_hole):
    """Independent dense assembly: loop every interior pixel, numpy solve."""
    m, n = raster.shape
    is_ring = np.zeros((m, n), bool)
    is_ring[0, :] = is_ring[-1, :] = is_ring[:, 0] = is_ring[:, -1] = True
    is_hole = (raster == 0) & ~is_ring
    is_int = (raster == 1) & ~is_ring
    ids = {}
    for i in range(m):
        for j in range(n):
            if is_int[i, j]:
                ids[(i, j)] = len(ids)
    N = len(ids)
    A = np.zeros((N, N))
    b = np.zeros(N)
    for (i, j), k in ids.items():
        A[k, k] = 4.0
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = i + di, j + dj
            if (ni, nj) in ids:
                A[k, ids[(ni, nj)]] = -1.0
            elif is_ring[ni, nj]:
                b[k] += T_outer
            else:
                b[k] += T_hole
    x = np.linalg.solve(A, b)
    T = np.zeros((m, n))
    T[is_ring] = T_outer
    T[is_hole] = T_hole
    for (i, j), k in ids.items():
        T[i, j] = x[k]
    return T


class TestSolveSteady:
    def test_hole_free_plate_is_uniform(self):
        cfg = ThermalConfig()
        grid, report = heatfd.solve_steady(solid_raster(20, 24), cfg)
        assert np.allclose(grid.values, 100.0, atol=1e-10)
        assert report.residual <= 1e-12
        grad = heatfd.gradient_field(grid, cfg)
        assert np.abs(grad.values).max() <= 1e-10

    def test_matches_dense_oracle(self):
        raster = square_hole_raster()
        cfg = ThermalConfig()
        grid, _ = heatfd.solve_steady(raster, cfg)
        ref = dense_reference_solve(raster, cfg.T_outer, cfg.T_hole)
        assert np.abs(grid.values - ref).max() <= 1e-8

    def test_maximum_principle_random_samples(self):
        spec = geomgen.GeometrySpec(grid_m=48, grid_n=48, seed=31)
        cfg = ThermalConfig()
        for i in range(25):
            raster = geomgen.rasterize(geomgen.place_shapes(spec, geomgen.sample_rng(31, i)), spec)
            grid, _ = heatfd.solve_steady(raster, cfg)
            interior = grid.mask == INTERIOR
            assert grid.values[interior].min() >= 0.0 - 1e-12
            assert grid.values[interior].max() <= 100.0 + 1e-12

    def test_density_and_capacity_never_enter(self):
        raster = square_hole_raster()
        g1, _ = heatfd.solve_steady(raster, ThermalConfig(density=2700, heat_capacity=900))
        g2, _ = heatfd.solve_steady(raster, ThermalConfig(density=1.0, heat_capacity=1.0))
        assert np.array_equal(g1.values, g2.values)

    def test_mirror_symmetry(self):
        raster = solid_raster(24, 24)
        raster[6:10, 4:8] = 0
        mirrored = raster[:, ::-1].copy()
        cfg = ThermalConfig()
        g1, _ = heatfd.solve_steady(raster, cfg)
        g2, _ = heatfd.solve_steady(mirrored, cfg)
        assert np.abs(g1.values[:, ::-1] - g2.values).max() <= 1e-8

    def test_affine_invariance_in_bc(self):
        raster = square_hole_raster()
        unit, _ = heatfd.solve_steady(raster, ThermalConfig(T_outer=1.0, T_hole=0.0))
        full, _ = heatfd.solve_steady(raster, ThermalConfig(T_outer=100.0, T_hole=0.0))
        assert np.abs(100.0 * unit.values - full.values).max() <= 1e-9

    def test_no_interior_raises(self):
        raster = np.zeros((8, 8), dtype=np.uint8)
        with pytest.raises(SingularSystem):
            heatfd.solve_steady(raster, ThermalConfig())

    def test_dirichlet_values_exact(self):
        raster = square_hole_raster()
        grid, _ = heatfd.solve_steady(raster, ThermalConfig())
        assert (grid.values[grid.mask == BOUNDARY] == 100.0).all()
        assert (grid.values[grid.mask == HOLE] == 0.0).all()

    def test_refinement_study_second_order(self):
        # harmonic quartic has non-vanishing fourth derivatives, so the
        # five-point scheme error scales as h^2
        def harmonic(x, y):
            return x**4 - 6 * x**2 * y**2 + y**4

        errors = []
        for n in (17, 33, 65):
            xs = np.linspace(0.0, 1.0, n)
            X, Y = np.meshgrid(xs, xs, indexing="xy")
            exact = harmonic(X, Y)
            mask = heatfd.classify_pixels(solid_raster(n, n))
            dirichlet = np.where(mask == BOUNDARY, exact, 0.0)
            grid, _ = heatfd.solve_dirichlet(mask, dirichlet)
            errors.append(np.abs(grid.values - exact).max())
        for coarse, fine in zip(errors, errors[1:]):
            assert 3.0 <= coarse / fine <= 5.0


class TestGradientField:
    def test_uniform_field_zero_gradient(self):
        grid, _ = heatfd.solve_steady(solid_raster(16, 16), ThermalConfig())
        grad = heatfd.gradient_field(grid, ThermalConfig())
        assert np.abs(grad.values).max() <= 1e-12

    def test_linear_ramp_exact(self):
        cfg = ThermalConfig(plate_extent=4.0)
        m = n = 20
        xs = np.linspace(0, cfg.plate_extent, n)
        values = np.tile(3.5 * xs, (m, 1))
        grid = heatfd.FieldGrid(values=values, mask=heatfd.classify_pixels(solid_raster(m, n)))
        grad = heatfd.gradient_field(grid, cfg)
        assert np.abs(grad.values - 3.5).max() <= 1e-12

    def test_hole_pixels_are_zero_and_one_sided_next_to_holes(self):
        raster = square_hole_raster()
        cfg = ThermalConfig()
        temp, _ = heatfd.solve_steady(raster, cfg)
        grad = heatfd.gradient_field(temp, cfg)
        assert (grad.values[grad.mask == HOLE] == 0.0).all()
        # pixel right of the hole: x-derivative must not read the hole value
        i, j = 8, 10  # first solid column east of the hole block
        h = cfg.plate_extent / (raster.shape[1] - 1)
        gx = (temp.values[i, j + 1] - temp.values[i, j]) / h
        gy = (temp.values[i + 1, j] - temp.values[i - 1, j]) / (2 * h)
        assert np.isclose(grad.values[i, j], np.hypot(gx, gy))

    def test_refinement_study_second_order(self):
        cfg = ThermalConfig(plate_extent=1.0)

        def f(x, y):
            return np.exp(x) * np.sin(2 * y) + x**3 * y

        def grad_mag(x, y):
            fx = np.exp(x) * np.sin(2 * y) + 3 * x**2 * y
            fy = 2 * np.exp(x) * np.cos(2 * y) + x**3
            return np.hypot(fx, fy)

        errors = []
        for n in (17, 33, 65):
            xs = np.linspace(0.0, 1.0, n)
            X, Y = np.meshgrid(xs, xs, indexing="xy")
            grid = heatfd.FieldGrid(values=f(X, Y), mask=heatfd.classify_pixels(solid_raster(n, n)))
            grad = heatfd.gradient_field(grid, cfg)
            # central-difference pixels only; edges are one-sided (O(h))
            err = np.abs(grad.values - grad_mag(X, Y))[1:-1, 1:-1].max()
            errors.append(err)
        for coarse, fine in zip(errors, errors[1:]):
            assert 3.0 <= coarse / fine <= 5.0


class TestConfig:
    def test_equal_temperatures_rejected(self):
        with pytest.raises(ValueError):
            ThermalConfig(T_outer=50.0, T_hole=50.0)

    def test_paper_alt_preset(self):
        cfg = ThermalConfig.paper_alt()
        assert cfg.T_outer == 20.0 and cfg.T_hole == 0.0

    def test_roundtrip(self):
        cfg = ThermalConfig(target_field=heatfd.TEMPERATURE)
        assert ThermalConfig.from_dict(cfg.to_dict()) == cfg


class TestFieldFile:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        fields = rng.random((5, 12, 14)).astype(np.float32)
        path = tmp_path / "f.tff"
        heatfd.write_field_file(path, fields, heatfd.GRADIENT_MAGNITUDE)
        loaded, kind = heatfd.read_field_file(path)
        assert kind == heatfd.GRADIENT_MAGNITUDE
        assert np.array_equal(loaded, fields)

    def test_header_layout(self, tmp_path):
        fields = np.zeros((2, 4, 4), dtype=np.float32)
        path = tmp_path / "f.tff"
        heatfd.write_field_file(path, fields, heatfd.TEMPERATURE)
        raw = path.read_bytes()
        assert raw[:4] == b"TFF1"
        assert len(raw) == 4 + 12 + 1 + 2 * 4 * 4 * 4


class TestSolveBatch:
    @pytest.fixture
    def dataset(self, tmp_path):
        spec = geomgen.GeometrySpec(grid_m=32, grid_n=32, seed=5)
        manifest = geomgen.generate_dataset(spec, 20, tmp_path)
        return manifest, tmp_path

    def test_full_and_subset(self, dataset):
        manifest, d = dataset
        manifest, fields = heatfd.solve_batch(manifest, d, ThermalConfig(), subset_count=10)
        assert fields.shape[0] == 10
        solved = [i for i, fi in enumerate(manifest.field_indices) if fi is not None]
        tags = [manifest.split[i] for i in solved]
        assert tags.count("train") == 8 and tags.count("val") == 1 and tags.count("test") == 1

    def test_rerun_byte_identical(self, dataset):
        manifest, d = dataset
        heatfd.solve_batch(manifest, d, ThermalConfig(), subset_count=10, field_name="f1.tff")
        heatfd.solve_batch(manifest, d, ThermalConfig(), subset_count=10, field_name="f2.tff")
        assert (d / "f1.tff").read_bytes() == (d / "f2.tff").read_bytes()

    def test_failures_flagged_not_dropped(self, dataset, tmp_path):
        manifest, d = dataset
        rasters = geomgen.load_rasters(manifest, d)
        rasters[0] = 0  # unsolvable: no interior pixels
        geomgen.write_geometry_file(d / manifest.geometry_file, rasters)
        manifest, fields = heatfd.solve_batch(manifest, d, ThermalConfig())
        assert manifest.solver_failures and manifest.solver_failures[0]["index"] == 0
        assert manifest.field_indices[0] is None
        assert fields.shape[0] == manifest.count - 1


class TestIterativeFallback:
    def test_large_grid_uses_cg_and_meets_residual(self):
        # 140x140 has 19,044 unknowns, past the direct-solve limit
        raster = np.ones((140, 140), dtype=np.uint8)
        raster[40:60, 40:60] = 0
        grid, report = heatfd.solve_steady(raster, ThermalConfig())
        assert report.method == "cg"
        assert report.iterations > 0
        assert report.residual <= 1e-7
        interior = grid.values[grid.mask == INTERIOR]
        assert interior.min() >= -1e-9 and interior.max() <= 100.0 + 1e-9
