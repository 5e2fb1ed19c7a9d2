"""Operator surrogate: unstacked DeepONet plus the CNN-decoder baseline.

The branch net consumes a k*-dim geometry code, the trunk net a query
coordinate in the unit square, and the prediction is their feature inner
product plus a scalar bias. The trunk depends only on coordinates, so its
outputs over a fixed pixel grid are computed once and shared across every
geometry; inference runs in float64 so the cached and naive evaluation
paths agree to machine precision.
"""

from dataclasses import dataclass, asdict

import numpy as np
import torch
from torch import nn

from . import ndmath
from .ckpt import Checkpoint, save_checkpoint
from .errors import CacheGridMismatch, MissingFields, ShapeMismatch
from .heatfd import INTERIOR, classify_pixels
from .vrrae import DecoderConfig, GenerativeModel, _Decoder, _seeded_init, _apply_thread_env


@dataclass
class BranchConfig:
    input_dim: int = 8  # k*
    layers: int = 3
    width: int = 128
    p: int = 128


@dataclass
class TrunkConfig:
    input_dim: int = 2  # (x, y) in [0,1]^2
    layers: int = 4
    width: int = 128
    p: int = 128


@dataclass
class DeepONetTrainConfig:
    epochs: int = 200
    batch_size: int = 10_000
    lr: float = 1e-3
    seed: int = 0


@dataclass
class CnnHeadTrainConfig:
    epochs: int = 200
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0


def _mlp(in_dim, width, layers, out_dim):
    mods, d = [], in_dim
    for _ in range(layers - 1):
        mods += [nn.Linear(d, width), nn.ReLU()]
        d = width
    mods.append(nn.Linear(d, out_dim))
    return nn.Sequential(*mods)


def pixel_coords(grid: tuple[int, int]) -> np.ndarray:
    """Pixel-center coordinates of every grid cell, normalized to [0,1]^2."""
    m, n = grid
    ii, jj = np.mgrid[0:m, 0:n]
    return np.stack([jj.ravel() / (n - 1), ii.ravel() / (m - 1)], axis=1).astype(np.float64)


def solid_mask(raster: np.ndarray) -> np.ndarray:
    """Interior solid pixels: the only locations carrying learnable signal."""
    return classify_pixels(raster) == INTERIOR


@dataclass
class TrunkCache:
    grid: tuple[int, int]
    features: np.ndarray  # (m*n, p) float64


class DeepONetModel:
    """Branch/trunk pair with scalar output bias and target normalization."""

    def __init__(self, grid: tuple[int, int], branch_cfg: BranchConfig | None = None,
                 trunk_cfg: TrunkConfig | None = None, use_bias: bool = True,
                 init_seed: int = 0):
        self.grid = tuple(grid)
        self.branch_cfg = branch_cfg or BranchConfig()
        self.trunk_cfg = trunk_cfg or TrunkConfig()
        if self.branch_cfg.p != self.trunk_cfg.p:
            raise ValueError("branch and trunk must emit the same feature width p")
        rng = np.random.default_rng(np.random.SeedSequence(entropy=init_seed, spawn_key=(13,)))
        self.branch = _mlp(self.branch_cfg.input_dim, self.branch_cfg.width,
                           self.branch_cfg.layers, self.branch_cfg.p)
        self.trunk = _mlp(self.trunk_cfg.input_dim, self.trunk_cfg.width,
                          self.trunk_cfg.layers, self.trunk_cfg.p)
        _seeded_init(self.branch, rng)
        _seeded_init(self.trunk, rng)
        # damp the feature layers so the initial inner product sits near the
        # standardized-target mean instead of several sigma away
        with torch.no_grad():
            for seq in (self.branch, self.trunk):
                last = [m for m in seq if isinstance(m, nn.Linear)][-1]
                last.weight.mul_(0.3)
        self.use_bias = use_bias
        self.b0 = nn.Parameter(torch.zeros(()))
        self.target_mean = 0.0
        self.target_std = 1.0
        # per-dim z-score of branch inputs; raw latent code scales are
        # arbitrary (especially for the plain AE) and wreck conditioning
        self.code_mean = np.zeros(self.branch_cfg.input_dim)
        self.code_std = np.ones(self.branch_cfg.input_dim)
        self.target_field = None
        self.encoder_ckpt_hash = None
        self.trunk_passes = 0
        self._w64 = None

    def named_parameters(self):
        for name, p in self.branch.named_parameters():
            yield f"branch.{name}", p
        for name, p in self.trunk.named_parameters():
            yield f"trunk.{name}", p
        if self.use_bias:
            yield "b0", self.b0

    def invalidate(self):
        self._w64 = None

    def _weights64(self):
        if self._w64 is None:
            def pull(seq):
                return [(lin.weight.detach().numpy().astype(np.float64),
                         lin.bias.detach().numpy().astype(np.float64))
                        for lin in seq if isinstance(lin, nn.Linear)]
            self._w64 = {"branch": pull(self.branch), "trunk": pull(self.trunk),
                         "b0": float(self.b0.detach()) if self.use_bias else 0.0}
        return self._w64

    @staticmethod
    def _mlp64(layers, x: np.ndarray) -> np.ndarray:
        h = x
        for W, b in layers[:-1]:
            h = np.maximum(h @ W.T + b, 0.0)
        W, b = layers[-1]
        return h @ W.T + b

    def branch_features(self, alpha: np.ndarray) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=np.float64)
        if alpha.shape[-1] != self.branch_cfg.input_dim:
            raise ShapeMismatch(f"alpha dim {alpha.shape[-1]} != {self.branch_cfg.input_dim}")
        alpha = (alpha - self.code_mean) / self.code_std
        return self._mlp64(self._weights64()["branch"], alpha)

    def trunk_features(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        self.trunk_passes += 1
        return self._mlp64(self._weights64()["trunk"], xs)

    def forward(self, alpha: np.ndarray, xs: np.ndarray) -> np.ndarray:
        """G(alpha)(xs) on the standardized target scale; branch runs once."""
        b = self.branch_features(alpha)
        t = self.trunk_features(xs)
        return t @ b + self._weights64()["b0"]

    def build_trunk_cache(self) -> TrunkCache:
        """One trunk pass over every pixel center of the model grid."""
        return TrunkCache(grid=self.grid, features=self.trunk_features(pixel_coords(self.grid)))

    def predict_field(self, alpha: np.ndarray, cache: TrunkCache) -> np.ndarray:
        """Full-grid field in physical units via the shared trunk cache."""
        if tuple(cache.grid) != self.grid:
            raise CacheGridMismatch(f"cache grid {cache.grid} != model grid {self.grid}")
        b = self.branch_features(alpha)
        flat = cache.features @ b + self._weights64()["b0"]
        return (flat * self.target_std + self.target_mean).reshape(self.grid)

    def predict_field_naive(self, alpha: np.ndarray) -> np.ndarray:
        """Per-point evaluation (no cache); the slow reference path."""
        b = self.branch_features(alpha)
        w = self._weights64()
        coords = pixel_coords(self.grid)
        out = np.empty(coords.shape[0])
        for q in range(coords.shape[0]):
            t = self._mlp64(w["trunk"], coords[q])
            out[q] = float(t @ b) + w["b0"]
        return (out * self.target_std + self.target_mean).reshape(self.grid)

    def arch_config(self) -> dict:
        return {"grid": list(self.grid), "branch": asdict(self.branch_cfg),
                "trunk": asdict(self.trunk_cfg), "use_bias": self.use_bias}

    def save(self, path, extra_meta: dict | None = None) -> str:
        tensors = {name: p.detach().numpy().astype(np.float32)
                   for name, p in self.named_parameters()}
        meta = {"target_mean": float(self.target_mean), "target_std": float(self.target_std),
                "code_mean": [float(x) for x in self.code_mean],
                "code_std": [float(x) for x in self.code_std],
                "target_field": self.target_field, "encoder_ckpt_hash": self.encoder_ckpt_hash}
        meta.update(extra_meta or {})
        return save_checkpoint(path, "deeponet", self.arch_config(), tensors, meta)

    @classmethod
    def from_checkpoint(cls, ck: Checkpoint) -> "DeepONetModel":
        cfg = ck.config
        model = cls(grid=tuple(cfg["grid"]), branch_cfg=BranchConfig(**cfg["branch"]),
                    trunk_cfg=TrunkConfig(**cfg["trunk"]), use_bias=cfg["use_bias"])
        with torch.no_grad():
            for name, p in model.named_parameters():
                p.copy_(torch.from_numpy(ck.tensors[name].astype(np.float32)))
        model.target_mean = ck.meta["target_mean"]
        model.target_std = ck.meta["target_std"]
        model.code_mean = np.asarray(ck.meta.get("code_mean", np.zeros(model.branch_cfg.input_dim)))
        model.code_std = np.asarray(ck.meta.get("code_std", np.ones(model.branch_cfg.input_dim)))
        model.target_field = ck.meta.get("target_field")
        model.encoder_ckpt_hash = ck.meta.get("encoder_ckpt_hash")
        model.invalidate()
        return model


class CnnHeadModel:
    """Decoder-style baseline: k*-dim code -> full field, linear output."""

    def __init__(self, grid: tuple[int, int], k_star: int = 8,
                 dec_cfg: DecoderConfig | None = None, init_seed: int = 0):
        self.grid = tuple(grid)
        self.k_star = k_star
        self.dec_cfg = dec_cfg or DecoderConfig()
        rng = np.random.default_rng(np.random.SeedSequence(entropy=init_seed, spawn_key=(17,)))
        self.net = _Decoder(self.dec_cfg, k_star, *self.grid, final="linear")
        _seeded_init(self.net, rng)
        with torch.no_grad():
            self.net.tconvs[-1].weight.mul_(0.3)  # start near the target mean
        self.target_mean = 0.0
        self.target_std = 1.0
        self.code_mean = np.zeros(k_star)
        self.code_std = np.ones(k_star)
        self.target_field = None
        self.encoder_ckpt_hash = None

    def named_parameters(self):
        for name, p in self.net.named_parameters():
            yield f"net.{name}", p

    @torch.no_grad()
    def predict_field(self, alpha: np.ndarray) -> np.ndarray:
        alpha = (np.asarray(alpha, dtype=np.float64) - self.code_mean) / self.code_std
        at = torch.from_numpy(alpha.astype(np.float32)[None])
        out = self.net(at).numpy()[0].astype(np.float64)
        return out * self.target_std + self.target_mean

    def save(self, path, extra_meta: dict | None = None) -> str:
        tensors = {name: p.detach().numpy().astype(np.float32)
                   for name, p in self.named_parameters()}
        cfg = {"grid": list(self.grid), "k_star": self.k_star,
               "decoder": {**asdict(self.dec_cfg), "channels": list(self.dec_cfg.channels)}}
        meta = {"target_mean": float(self.target_mean), "target_std": float(self.target_std),
                "code_mean": [float(x) for x in self.code_mean],
                "code_std": [float(x) for x in self.code_std],
                "target_field": self.target_field, "encoder_ckpt_hash": self.encoder_ckpt_hash}
        meta.update(extra_meta or {})
        return save_checkpoint(path, "cnn_head", cfg, tensors, meta)

    @classmethod
    def from_checkpoint(cls, ck: Checkpoint) -> "CnnHeadModel":
        cfg = ck.config
        dec = DecoderConfig(**{**cfg["decoder"], "channels": tuple(cfg["decoder"]["channels"])})
        model = cls(grid=tuple(cfg["grid"]), k_star=cfg["k_star"], dec_cfg=dec)
        with torch.no_grad():
            for name, p in model.named_parameters():
                p.copy_(torch.from_numpy(ck.tensors[name].astype(np.float32)))
        model.target_mean = ck.meta["target_mean"]
        model.target_std = ck.meta["target_std"]
        model.code_mean = np.asarray(ck.meta.get("code_mean", np.zeros(model.k_star)))
        model.code_std = np.asarray(ck.meta.get("code_std", np.ones(model.k_star)))
        model.target_field = ck.meta.get("target_field")
        model.encoder_ckpt_hash = ck.meta.get("encoder_ckpt_hash")
        return model


def _field_dataset(rasters, fields, field_indices, split, wanted_split):
    """Geometry indices of a split that actually have solved fields."""
    out = [i for i, fi in enumerate(field_indices or [])
           if fi is not None and split[i] == wanted_split]
    if not out:
        raise MissingFields(f"no solved fields in split {wanted_split!r}")
    return np.asarray(out)


def _standardization(fields, field_indices, split, rasters):
    """Train-split z-score stats over solid pixels."""
    idx = _field_dataset(rasters, fields, field_indices, split, "train")
    vals = np.concatenate([fields[field_indices[i]][solid_mask(rasters[i])] for i in idx])
    return float(vals.mean()), float(vals.std()) or 1.0  # constant target -> identity scale


def _code_standardization(codes: np.ndarray):
    mean = codes.mean(axis=0)
    std = np.maximum(codes.std(axis=0), 1e-8)
    return mean, std


def train_deeponet(rasters: np.ndarray, fields: np.ndarray, field_indices,
                   split, encoder: GenerativeModel, cfg: DeepONetTrainConfig,
                   model: DeepONetModel | None = None) -> tuple[DeepONetModel, dict]:
    """Fit the surrogate on (code, coordinate, target) query points.

    Codes are deterministic eval-mode projections computed once per
    geometry; query points cover solid pixels only and batches are drawn
    uniformly over (geometry, pixel) pairs.
    """
    _apply_thread_env()
    grid = rasters.shape[1:]
    model = model or DeepONetModel(grid, init_seed=cfg.seed)
    mean, std = _standardization(fields, field_indices, split, rasters)
    model.target_mean, model.target_std = mean, std

    train_idx = _field_dataset(rasters, fields, field_indices, split, "train")
    raw_codes = encoder.project_batch(rasters[train_idx])  # (G, k*)
    model.code_mean, model.code_std = _code_standardization(raw_codes)
    codes = ((raw_codes - model.code_mean) / model.code_std).astype(np.float32)
    coords_all = pixel_coords(grid).astype(np.float32)

    rows, coord_chunks, target_chunks = [], [], []
    for g, i in enumerate(train_idx):
        solid = solid_mask(rasters[i]).ravel()
        rows.append(np.full(int(solid.sum()), g, dtype=np.int64))
        coord_chunks.append(coords_all[solid])
        target_chunks.append(((fields[field_indices[i]].ravel()[solid] - mean) / std).astype(np.float32))
    geom_row = np.concatenate(rows)
    coords = torch.from_numpy(np.concatenate(coord_chunks))
    targets = torch.from_numpy(np.concatenate(target_chunks))
    codes_t = torch.from_numpy(codes)
    n_pairs = geom_row.shape[0]

    params = [p for _, p in model.named_parameters()]
    names = [name for name, _ in model.named_parameters()]
    for p in params:
        p.requires_grad_(True)
    opt = ndmath.OptimizerState.for_params(params, lr=cfg.lr)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(19,)))

    history = {"epoch": [], "loss": []}
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n_pairs)
        losses = []
        for start in range(0, n_pairs, cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            bt = torch.from_numpy(batch)
            b = model.branch(codes_t[geom_row[batch]])
            t = model.trunk(coords[bt])
            pred = (b * t).sum(dim=1)
            if model.use_bias:
                pred = pred + model.b0
            loss = torch.mean((pred - targets[bt]) ** 2)
            grads = torch.autograd.grad(loss, params)
            ndmath.adam_step(params, grads, opt, names=names)
            losses.append(float(loss.detach()))
        history["epoch"].append(epoch)
        history["loss"].append(float(np.mean(losses)))

    for p in params:
        p.requires_grad_(False)
    model.invalidate()
    return model, history


def train_cnn_head(rasters: np.ndarray, fields: np.ndarray, field_indices,
                   split, encoder: GenerativeModel, cfg: CnnHeadTrainConfig,
                   model: CnnHeadModel | None = None) -> tuple[CnnHeadModel, dict]:
    """Fit the CNN baseline with per-pixel MSE masked to solid pixels."""
    _apply_thread_env()
    grid = rasters.shape[1:]
    model = model or CnnHeadModel(grid, k_star=encoder.k_star, init_seed=cfg.seed)
    mean, std = _standardization(fields, field_indices, split, rasters)
    model.target_mean, model.target_std = mean, std

    train_idx = _field_dataset(rasters, fields, field_indices, split, "train")
    raw_codes = encoder.project_batch(rasters[train_idx])
    model.code_mean, model.code_std = _code_standardization(raw_codes)
    codes = torch.from_numpy(((raw_codes - model.code_mean) / model.code_std).astype(np.float32))
    targets = torch.from_numpy(np.stack(
        [(fields[field_indices[i]] - mean) / std for i in train_idx]).astype(np.float32))
    masks = torch.from_numpy(np.stack(
        [solid_mask(rasters[i]) for i in train_idx]).astype(np.float32))

    params = [p for _, p in model.named_parameters()]
    names = [name for name, _ in model.named_parameters()]
    for p in params:
        p.requires_grad_(True)
    opt = ndmath.OptimizerState.for_params(params, lr=cfg.lr)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(23,)))

    n = codes.shape[0]
    history = {"epoch": [], "loss": []}
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            batch = torch.from_numpy(perm[start : start + cfg.batch_size])
            pred = model.net(codes[batch])
            w = masks[batch]
            loss = ((pred - targets[batch]) ** 2 * w).sum() / w.sum()
            grads = torch.autograd.grad(loss, params)
            ndmath.adam_step(params, grads, opt, names=names)
            losses.append(float(loss.detach()))
        history["epoch"].append(epoch)
        history["loss"].append(float(np.mean(losses)))

    for p in params:
        p.requires_grad_(False)
    return model, history


def field_predictor(encoder: GenerativeModel, head, cache: TrunkCache | None = None):
    """raster -> predicted field closure for the 2x2 study."""
    if isinstance(head, DeepONetModel):
        cache = cache or head.build_trunk_cache()
        return lambda raster: head.predict_field(encoder.project_batch(raster[None])[0], cache)
    return lambda raster: head.predict_field(encoder.project_batch(raster[None])[0])
