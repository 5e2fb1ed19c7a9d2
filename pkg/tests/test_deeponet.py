import numpy as np
import pytest
import torch

from thermoforge import ckpt as ckpt_io
from thermoforge import heatfd, ndmath
from thermoforge.deeponet import (
    BranchConfig,
    CnnHeadModel,
    CnnHeadTrainConfig,
    DeepONetModel,
    DeepONetTrainConfig,
    TrunkConfig,
    field_predictor,
    pixel_coords,
    solid_mask,
    train_cnn_head,
    train_deeponet,
)
from thermoforge.errors import CacheGridMismatch, MissingFields, ShapeMismatch


@pytest.fixture
def random_model():
    return DeepONetModel((24, 24), init_seed=3)


def _force_unit_feature(seq, dim=0):
    """Pin an MLP's final layer so it always emits the unit vector e_dim."""
    last = [m for m in seq if isinstance(m, torch.nn.Linear)][-1]
    with torch.no_grad():
        last.weight.zero_()
        last.bias.zero_()
        last.bias[dim] = 1.0


class TestForward:
    def test_matched_unit_features_give_one(self, random_model):
        _force_unit_feature(random_model.branch)
        _force_unit_feature(random_model.trunk)
        random_model.invalidate()
        out = random_model.forward(np.zeros(8), np.random.default_rng(0).random((10, 2)))
        assert np.allclose(out, 1.0)

    def test_zero_branch_gives_bias(self, random_model):
        last = [m for m in random_model.branch if isinstance(m, torch.nn.Linear)][-1]
        with torch.no_grad():
            last.weight.zero_()
            last.bias.zero_()
            random_model.b0.fill_(0.75)
        random_model.invalidate()
        out = random_model.forward(np.ones(8), np.random.default_rng(1).random((7, 2)))
        assert np.allclose(out, 0.75)

    def test_loop_equals_batched(self, random_model):
        rng = np.random.default_rng(2)
        alpha = rng.normal(size=8)
        xs = rng.random((50, 2))
        batched = random_model.forward(alpha, xs)
        looped = np.array([float(random_model.forward(alpha, x[None])[0]) for x in xs])
        assert np.abs(batched - looped).max() <= 1e-12

    def test_alpha_dim_checked(self, random_model):
        with pytest.raises(ShapeMismatch):
            random_model.forward(np.zeros(5), np.zeros((1, 2)))

    def test_feature_widths_must_match(self):
        with pytest.raises(ValueError):
            DeepONetModel((16, 16), branch_cfg=BranchConfig(p=64), trunk_cfg=TrunkConfig(p=128))


class TestTrunkCache:
    def test_cache_equals_naive(self, random_model):
        rng = np.random.default_rng(3)
        cache = random_model.build_trunk_cache()
        for _ in range(3):
            alpha = rng.normal(size=8)
            cached = random_model.predict_field(alpha, cache)
            naive = random_model.predict_field_naive(alpha)
            assert np.abs(cached - naive).max() <= 1e-12

    def test_single_trunk_pass_across_geometries(self, random_model):
        rng = np.random.default_rng(4)
        random_model.trunk_passes = 0
        cache = random_model.build_trunk_cache()
        for _ in range(100):
            random_model.predict_field(rng.normal(size=8), cache)
        assert random_model.trunk_passes == 1

    def test_grid_mismatch(self, random_model):
        other = DeepONetModel((16, 16), init_seed=0)
        with pytest.raises(CacheGridMismatch):
            random_model.predict_field(np.zeros(8), other.build_trunk_cache())

    def test_bilinearity_in_branch_scale(self, random_model):
        # doubling is exact in floating point: only exponents change
        rng = np.random.default_rng(5)
        alpha = rng.normal(size=8)
        cache = random_model.build_trunk_cache()
        with torch.no_grad():
            random_model.b0.zero_()
        random_model.invalidate()
        base = random_model.predict_field(alpha, cache)
        last = [m for m in random_model.branch if isinstance(m, torch.nn.Linear)][-1]
        with torch.no_grad():
            last.weight.mul_(2.0)
            last.bias.mul_(2.0)
        random_model.invalidate()
        doubled = random_model.predict_field(alpha, cache)
        assert np.array_equal(doubled, 2.0 * base)

    def test_pixel_coords_normalized(self):
        coords = pixel_coords((5, 9))
        assert coords.shape == (45, 2)
        assert coords.min() == 0.0 and coords.max() == 1.0
        assert np.allclose(coords[1] - coords[0], [1 / 8, 0])


def _tiny_field_setup(tiny_data):
    man = tiny_data["manifest"]
    return (tiny_data["rasters"], tiny_data["fields"], man.field_indices, man.split)


class TestTraining:
    def test_smoke_loss_decreases(self, tiny_data, tiny_vrrae):
        rasters, fields, fi, split = _tiny_field_setup(tiny_data)
        model, hist = train_deeponet(rasters, fields, fi, split, tiny_vrrae,
                                     DeepONetTrainConfig(epochs=8, batch_size=2000, seed=1))
        assert hist["loss"][-1] < hist["loss"][0]
        assert model.target_field is None or isinstance(model.target_field, str)

    def test_near_constant_field_fits_fast(self, tiny_data, tiny_vrrae):
        rasters = tiny_data["rasters"]
        man = tiny_data["manifest"]
        # nearly flat target with a faint ramp so NMSE stays defined
        m, n = rasters.shape[1:]
        ramp = np.linspace(0, 1, n)[None, :] * np.ones((m, 1))
        fields = np.stack([5.0 + 0.01 * ramp for _ in range(len(tiny_data["fields"]))]).astype(np.float32)
        model, _ = train_deeponet(rasters, fields, man.field_indices, man.split, tiny_vrrae,
                                  DeepONetTrainConfig(epochs=20, batch_size=2000, seed=2))
        cache = model.build_trunk_cache()
        # degenerate-fit capability check: all targets identical, so any
        # branch dependence is spurious; evaluate where the fit is defined
        idx = next(i for i, f in enumerate(man.field_indices) if f is not None and man.split[i] == "train")
        pred = model.predict_field(tiny_vrrae.project_batch(rasters[idx][None])[0], cache)
        solid = solid_mask(rasters[idx])
        y = fields[man.field_indices[idx]][solid]
        err = float(np.sum((pred[solid] - y) ** 2) / np.sum((y - y.mean()) ** 2))
        assert err < 1e-3

    def test_rerun_is_bitwise_identical(self, tiny_data, tiny_vrrae):
        rasters, fields, fi, split = _tiny_field_setup(tiny_data)
        cfg = DeepONetTrainConfig(epochs=2, batch_size=3000, seed=7)
        m1, _ = train_deeponet(rasters, fields, fi, split, tiny_vrrae, cfg)
        m2, _ = train_deeponet(rasters, fields, fi, split, tiny_vrrae, cfg)
        for (n1, p1), (_, p2) in zip(m1.named_parameters(), m2.named_parameters()):
            assert torch.equal(p1, p2), n1

    def test_missing_fields(self, tiny_data, tiny_vrrae):
        rasters = tiny_data["rasters"]
        with pytest.raises(MissingFields):
            train_deeponet(rasters, tiny_data["fields"], [None] * len(rasters),
                           tiny_data["manifest"].split, tiny_vrrae, DeepONetTrainConfig(epochs=1))

    def test_cnn_masked_loss_equals_solid_only(self):
        rng = np.random.default_rng(6)
        pred = torch.tensor(rng.normal(size=(2, 8, 8)))
        target = torch.tensor(rng.normal(size=(2, 8, 8)))
        masks = torch.tensor(np.stack([
            solid_mask((rng.random((8, 8)) > 0.2).astype(np.uint8)) for _ in range(2)
        ]).astype(np.float64))
        masked = float(((pred - target) ** 2 * masks).sum() / masks.sum())
        flat = masks.bool()
        unmasked_on_solid = float(((pred[flat] - target[flat]) ** 2).mean())
        assert masked == pytest.approx(unmasked_on_solid, rel=1e-12)

    def test_cnn_head_smoke(self, tiny_data, tiny_vrrae):
        rasters, fields, fi, split = _tiny_field_setup(tiny_data)
        model, hist = train_cnn_head(rasters, fields, fi, split, tiny_vrrae,
                                     CnnHeadTrainConfig(epochs=10, batch_size=16, seed=3))
        assert hist["loss"][-1] < hist["loss"][0]
        pred = model.predict_field(tiny_vrrae.project_batch(rasters[0][None])[0])
        assert pred.shape == rasters.shape[1:]


class TestCheckpoints:
    def test_deeponet_roundtrip(self, random_model, tmp_path):
        random_model.target_mean, random_model.target_std = 3.5, 2.0
        random_model.target_field = heatfd.GRADIENT_MAGNITUDE
        path = tmp_path / "d.tck"
        random_model.save(path)
        loaded = DeepONetModel.from_checkpoint(ckpt_io.load_checkpoint(path))
        alpha = np.linspace(-1, 1, 8)
        cache = loaded.build_trunk_cache()
        a = random_model.predict_field(alpha, random_model.build_trunk_cache())
        b = loaded.predict_field(alpha, cache)
        assert np.array_equal(a, b)

    def test_cnn_roundtrip(self, tmp_path):
        model = CnnHeadModel((32, 32), k_star=8, init_seed=9)
        model.target_mean, model.target_std = -1.0, 4.0
        path = tmp_path / "c.tck"
        model.save(path)
        loaded = CnnHeadModel.from_checkpoint(ckpt_io.load_checkpoint(path))
        alpha = np.linspace(-1, 1, 8)
        assert np.array_equal(model.predict_field(alpha), loaded.predict_field(alpha))


def test_field_predictor_closures(tiny_data, tiny_vrrae):
    rasters, fields, fi, split = _tiny_field_setup(tiny_data)
    don, _ = train_deeponet(rasters, fields, fi, split, tiny_vrrae,
                            DeepONetTrainConfig(epochs=1, batch_size=5000, seed=0))
    cnn, _ = train_cnn_head(rasters, fields, fi, split, tiny_vrrae,
                            CnnHeadTrainConfig(epochs=1, batch_size=16, seed=0))
    for head in (don, cnn):
        predict = field_predictor(tiny_vrrae, head)
        out = predict(rasters[0])
        assert out.shape == rasters.shape[1:]


def test_gradcheck_deeponet_loss_toy():
    rng = np.random.default_rng(11)
    alpha = torch.tensor(rng.normal(size=(6, 3)))  # 6 points, 3-dim codes
    xs = torch.tensor(rng.random((6, 2)))
    y = torch.tensor(rng.normal(size=6))
    Wb = torch.tensor(rng.normal(scale=0.5, size=(4, 3)))
    Wt = torch.tensor(rng.normal(scale=0.5, size=(4, 2)))
    b0 = torch.tensor(0.1)

    def loss(params):
        wb, wt, bias = params
        b = torch.tanh(alpha @ wb.T)
        t = torch.tanh(xs @ wt.T)
        pred = (b * t).sum(dim=1) + bias
        return torch.mean((pred - y) ** 2)

    assert ndmath.grad_check(loss, [Wb, Wt, b0], probes=15) < 1e-4


def test_gradcheck_cnn_masked_loss_toy():
    import torch.nn.functional as F

    rng = np.random.default_rng(12)
    codes = torch.tensor(rng.normal(size=(3, 2)))
    target = torch.tensor(rng.normal(size=(3, 6, 6)))
    mask = torch.tensor((rng.random((3, 6, 6)) > 0.3).astype(np.float64))
    Wd = torch.tensor(rng.normal(scale=0.5, size=(4 * 3 * 3, 2)))
    Wc = torch.tensor(rng.normal(scale=0.5, size=(1, 4, 3, 3)))

    def loss(params):
        wd, wc = params
        seed = (codes @ wd.T).reshape(-1, 4, 3, 3)
        up = F.interpolate(torch.tanh(seed), scale_factor=2, mode="nearest")
        out = F.conv2d(up, wc, padding=1)[:, 0]
        return ((out - target) ** 2 * mask).sum() / mask.sum()

    assert ndmath.grad_check(loss, [Wd, Wc], probes=15) < 1e-4
