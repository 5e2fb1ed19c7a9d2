"""Variational rank-reduction autoencoder and its plain-AE ablation.

The encoder maps plates to an L-dimensional latent; for a batch the latent
matrix Y (L x N) is truncated by SVD to rank k*, the coefficient means are
pinned to the SVD coefficients, and a small head predicts per-coefficient
log standard deviations for reparameterized sampling. The basis is treated
as a stop-gradient quantity recomputed per batch during training and frozen
once over the full training set afterwards, which is what makes single-
sample projection and decoding well-defined at inference time.

The plain-AE ablation replaces the SVD bottleneck with a dense L -> k* -> L
pair and drops sampling; encoder and decoder are byte-identical in shape so
the two models differ only in how the k*-dim code is produced.
"""

import os
from dataclasses import dataclass, field, asdict

import numpy as np
import torch
from torch import nn

from . import ndmath
from .ckpt import Checkpoint, save_checkpoint
from .errors import (
    BasisMismatch,
    BatchTooSmall,
    MissingBasis,
    MissingStats,
    NonFinite,
    ShapeMismatch,
)

VRRAE = "vrrae"
PLAIN_AE = "plain_ae"

LOG_SIGMA_MIN = -6.0
LOG_SIGMA_MAX = 2.0


def _apply_thread_env():
    n = os.environ.get("THERMOFORGE_THREADS")
    if n:
        torch.set_num_threads(max(1, int(n)))


@dataclass
class EncoderConfig:
    channels: tuple = (32, 64, 128)
    kernel: int = 5
    stride: int = 2
    padding: int = 1
    latent_width: int = 64  # L

    def spatial_chain(self, m: int, n: int) -> list[tuple[int, int]]:
        """Spatial dims after each conv; every dim must stay >= 1."""
        dims = [(m, n)]
        for _ in self.channels:
            m = (m + 2 * self.padding - self.kernel) // self.stride + 1
            n = (n + 2 * self.padding - self.kernel) // self.stride + 1
            if m < 1 or n < 1:
                raise ValueError("grid too small for the encoder chain")
            dims.append((m, n))
        return dims


@dataclass
class DecoderConfig:
    # input channel sizes of the four stride-2 transposed convs; the last
    # one maps 8 -> 1 with a sigmoid
    channels: tuple = (256, 128, 32, 8)
    kernel: int = 3
    stride: int = 2
    padding: int = 1

    def seed_and_output_padding(self, m: int, n: int):
        """Walk the target shape backwards through the four transposed convs.

        Each layer computes out = 2*d - 1 + output_padding, so the seed
        spatial size and per-layer output_padding follow uniquely from the
        target raster shape.
        """
        def back(dim):
            chain = []
            for _ in self.channels:
                if dim % 2 == 0:
                    dim, op = dim // 2, 1
                else:
                    dim, op = (dim + 1) // 2, 0
                chain.append(op)
                if dim < 1:
                    raise ValueError("grid too small for the decoder chain")
            return dim, chain[::-1]  # ops in forward order

        sm, ops_m = back(m)
        sn, ops_n = back(n)
        return (sm, sn), list(zip(ops_m, ops_n))


@dataclass
class TrainConfig:
    steps: int = 20_000
    batch_size: int = 64
    lr: float = 1e-4
    beta_final: float = 0.2
    anneal_frac: float = 0.5  # linear ramp over the first half of training
    k_star: int = 8
    seed: int = 0
    log_every: int | None = None  # default: once per epoch
    lr_final: float | None = None  # cosine decay target; None keeps lr flat
    # start the sigmoid output at the data's solid fraction instead of 0.5;
    # saves the early steps that only learn global brightness
    init_output_bias: bool = True
    # weight the KL against the per-pixel-mean reconstruction as if the
    # reconstruction were summed per sample (the usual VAE composition);
    # without this, beta=0.2 against a mean-MSE collapses the coefficients
    # to the prior and the decoder to the mean image
    kl_pixel_normalized: bool = True

    def to_dict(self):
        return asdict(self)


@dataclass
class LatentCode:
    alpha: np.ndarray  # (k*,)
    basis_id: str

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        if not np.isfinite(self.alpha).all():
            raise NonFinite("latent code contains non-finite entries")


def interpolate(code_a: LatentCode, code_b: LatentCode, t: float) -> LatentCode:
    """Linear interpolation in coefficient space; endpoints are exact."""
    if code_a.basis_id != code_b.basis_id:
        raise BasisMismatch(f"{code_a.basis_id} vs {code_b.basis_id}")
    if not (0.0 <= t <= 1.0):
        raise ValueError("t must lie in [0, 1]")
    return LatentCode(alpha=(1.0 - t) * code_a.alpha + t * code_b.alpha,
                      basis_id=code_a.basis_id)


class _Encoder(nn.Module):
    def __init__(self, cfg: EncoderConfig, m: int, n: int):
        super().__init__()
        chain = cfg.spatial_chain(m, n)
        convs = []
        in_ch = 1
        for out_ch in cfg.channels:
            convs.append(nn.Conv2d(in_ch, out_ch, cfg.kernel, cfg.stride, cfg.padding))
            in_ch = out_ch
        self.convs = nn.ModuleList(convs)
        fm, fn = chain[-1]
        self.flat_dim = cfg.channels[-1] * fm * fn
        self.to_latent = nn.Linear(self.flat_dim, cfg.latent_width)

    def forward(self, x):
        for conv in self.convs:
            x = torch.relu(conv(x))
        return self.to_latent(x.flatten(1))


class _Decoder(nn.Module):
    def __init__(self, cfg: DecoderConfig, latent_dim: int, m: int, n: int,
                 final: str = "sigmoid"):
        super().__init__()
        (sm, sn), out_pads = cfg.seed_and_output_padding(m, n)
        self.seed_shape = (cfg.channels[0], sm, sn)
        self.from_latent = nn.Linear(latent_dim, cfg.channels[0] * sm * sn)
        tconvs = []
        chs = list(cfg.channels) + [1]
        for i in range(len(cfg.channels)):
            tconvs.append(
                nn.ConvTranspose2d(chs[i], chs[i + 1], cfg.kernel, cfg.stride,
                                   cfg.padding, output_padding=out_pads[i])
            )
        self.tconvs = nn.ModuleList(tconvs)
        self.final = final

    def forward(self, z):
        x = self.from_latent(z).view(-1, *self.seed_shape)
        for tconv in self.tconvs[:-1]:
            x = torch.relu(tconv(x))
        x = self.tconvs[-1](x)
        if self.final == "sigmoid":
            x = torch.sigmoid(x)
        return x[:, 0]


def _seeded_init(module: nn.Module, rng: np.random.Generator):
    """He-uniform weights / zero biases drawn from one numpy stream."""
    with torch.no_grad():
        for name, p in sorted(module.named_parameters()):
            if p.ndim == 1:
                p.zero_()
            elif p.ndim == 2:
                W, _ = ndmath.init_linear(p.shape[1], p.shape[0], rng)
                p.copy_(torch.from_numpy(W))
            elif isinstance(_owner_of(module, name), nn.ConvTranspose2d):
                W, _ = ndmath.init_conv_transpose(p.shape[0], p.shape[1], p.shape[2], rng)
                p.copy_(torch.from_numpy(W))
            else:
                W, _ = ndmath.init_conv(p.shape[1], p.shape[0], p.shape[2], rng)
                p.copy_(torch.from_numpy(W))


def _owner_of(root: nn.Module, param_name: str) -> nn.Module:
    mod = root
    for part in param_name.split(".")[:-1]:
        mod = getattr(mod, part) if not part.isdigit() else mod[int(part)]
    return mod


def loss_vrrae(X, X_tilde, alpha_mu, alpha_sigma, beta):
    """Composite objective: reconstruction MSE plus the coefficient KL.

    KL is the standard non-negative Gaussian divergence against N(0, I),
    summed over the k* x N coefficient block and averaged over N.
    """
    if not (torch.isfinite(X_tilde).all() and torch.isfinite(alpha_mu).all()
            and torch.isfinite(alpha_sigma).all()):
        raise NonFinite("loss inputs contain NaN/Inf")
    rec = torch.mean((X - X_tilde) ** 2)
    n = alpha_mu.shape[1]
    var = alpha_sigma**2
    kl = (0.5 / n) * torch.sum(var + alpha_mu**2 - 1.0 - torch.log(var))
    total = rec + beta * kl
    if not torch.isfinite(total):
        raise NonFinite("loss is NaN/Inf")
    return total, rec, kl


class GenerativeModel:
    """Trained encoder/decoder pair with a k*-dim latent API.

    Covers both modes: ``vrrae`` (SVD bottleneck, sigma head, frozen basis)
    and ``plain_ae`` (dense bottleneck pair, no sampling).
    """

    def __init__(self, grid: tuple[int, int], mode: str = VRRAE,
                 enc_cfg: EncoderConfig | None = None,
                 dec_cfg: DecoderConfig | None = None,
                 k_star: int = 8, init_seed: int = 0):
        if mode not in (VRRAE, PLAIN_AE):
            raise ValueError(f"unknown mode {mode!r}")
        self.grid = tuple(grid)
        self.mode = mode
        self.enc_cfg = enc_cfg or EncoderConfig()
        self.dec_cfg = dec_cfg or DecoderConfig()
        self.k_star = k_star
        self.L = self.enc_cfg.latent_width
        if self.L < k_star:
            raise ValueError("latent width L must be >= k*")

        m, n = self.grid
        rng = np.random.default_rng(np.random.SeedSequence(entropy=init_seed, spawn_key=(7,)))
        self.encoder = _Encoder(self.enc_cfg, m, n)
        self.decoder = _Decoder(self.dec_cfg, self.L, m, n, final="sigmoid")
        _seeded_init(self.encoder, rng)
        _seeded_init(self.decoder, rng)
        if mode == VRRAE:
            self.sigma_head = nn.Linear(self.L, k_star)
            _seeded_init(self.sigma_head, rng)
            # start with small, nearly input-independent noise (log-sigma
            # about -2); large random sigmas at init only blur early training
            with torch.no_grad():
                self.sigma_head.weight.mul_(0.1)
                self.sigma_head.bias.fill_(-2.0)
            self.down = self.up = None
        else:
            self.sigma_head = None
            self.down = nn.Linear(self.L, k_star)
            self.up = nn.Linear(k_star, self.L)
            _seeded_init(self.down, rng)
            _seeded_init(self.up, rng)

        self.U_bar: np.ndarray | None = None  # (L, k*), frozen after training
        self.stats: dict | None = None  # per-dim coefficient mean/std/min/max
        self.basis_id: str = "untrained"
        self.manifest_hash: str | None = None

    # -- bookkeeping ------------------------------------------------------

    def modules(self) -> dict:
        mods = {"encoder": self.encoder, "decoder": self.decoder}
        if self.mode == VRRAE:
            mods["sigma_head"] = self.sigma_head
        else:
            mods["down"] = self.down
            mods["up"] = self.up
        return mods

    def named_parameters(self):
        for prefix, mod in self.modules().items():
            for name, p in mod.named_parameters():
                yield f"{prefix}.{name}", p

    def parameter_census(self) -> dict:
        return {prefix: sum(p.numel() for p in mod.parameters())
                for prefix, mod in self.modules().items()}

    def _check_input(self, X: np.ndarray):
        if X.shape[-2:] != self.grid:
            raise ShapeMismatch(f"raster shape {X.shape[-2:]} != configured {self.grid}")

    # -- core ops ---------------------------------------------------------

    @torch.no_grad()
    def encode_batch(self, X: np.ndarray) -> np.ndarray:
        """Latent matrix Y (L x N); columns are per-sample latents."""
        X = np.asarray(X)
        squeeze = X.ndim == 2
        if squeeze:
            X = X[None]
        self._check_input(X)
        xt = torch.from_numpy(np.ascontiguousarray(X, dtype=np.float32)).unsqueeze(1)
        Y = self.encoder(xt).numpy().T  # (L, N)
        return Y[:, 0] if squeeze else Y

    def bottleneck(self, Y: np.ndarray, rng: np.random.Generator | None = None,
                   train_mode: bool = False):
        """SVD-truncate a latent batch into coefficient space.

        Returns (alpha_mu, alpha_sigma, alpha_tilde, svd), all k* x N. In
        train mode the coefficients are reparameterized samples around the
        SVD means; in eval mode alpha_tilde == alpha_mu.
        """
        if self.mode != VRRAE:
            raise ValueError("bottleneck is only defined in vrrae mode")
        Y = np.asarray(Y, dtype=np.float64)
        if train_mode and Y.shape[1] < self.k_star:
            raise BatchTooSmall(f"batch of {Y.shape[1]} columns < k*={self.k_star}")
        svd = ndmath.truncated_svd(Y, self.k_star)
        alpha_mu = svd.U.T @ Y  # == S V^T up to float error
        with torch.no_grad():
            log_sigma = self.sigma_head(torch.from_numpy(Y.T.astype(np.float32)))
            log_sigma = torch.clamp(log_sigma, LOG_SIGMA_MIN, LOG_SIGMA_MAX)
        alpha_sigma = np.exp(log_sigma.numpy().T.astype(np.float64))
        if train_mode:
            eps = rng.standard_normal(alpha_mu.shape)
            alpha_tilde = alpha_mu + alpha_sigma * eps
        else:
            alpha_tilde = alpha_mu.copy()
        return alpha_mu, alpha_sigma, alpha_tilde, svd

    @torch.no_grad()
    def decode(self, alpha) -> np.ndarray:
        """Decode coefficients to rasters in (0, 1); k* x N or a single code."""
        if isinstance(alpha, LatentCode):
            alpha = alpha.alpha
        alpha = np.asarray(alpha, dtype=np.float32)
        squeeze = alpha.ndim == 1
        A = alpha[:, None] if squeeze else alpha  # (k*, N)
        if A.shape[0] != self.k_star:
            raise ShapeMismatch(f"alpha has {A.shape[0]} rows, expected {self.k_star}")
        at = torch.from_numpy(np.ascontiguousarray(A.T))  # (N, k*)
        if self.mode == VRRAE:
            if self.U_bar is None:
                raise MissingBasis("vrrae decode needs the frozen basis; train first")
            z = at @ torch.from_numpy(self.U_bar.T)
        else:
            z = self.up(at)
        out = self.decoder(z).numpy()
        return out[0] if squeeze else out

    @torch.no_grad()
    def project_batch(self, X: np.ndarray) -> np.ndarray:
        """Deterministic float64 codes (N, k*) under the frozen basis."""
        X = np.asarray(X)
        if X.ndim == 2:
            X = X[None]
        Y = _encode_chunked(self, X).astype(np.float64)  # (L, N)
        if self.mode == VRRAE:
            if self.U_bar is None:
                raise MissingBasis("projection needs the frozen basis; train first")
            return (self.U_bar.astype(np.float64).T @ Y).T
        W = self.down.weight.detach().numpy().astype(np.float64)
        b = self.down.bias.detach().numpy().astype(np.float64)
        return Y.T @ W.T + b

    def project(self, X: np.ndarray) -> LatentCode:
        return LatentCode(alpha=self.project_batch(X)[0], basis_id=self.basis_id)

    def sample_prior(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Codes drawn dim-wise from N(mean, std) of the training coefficients."""
        if self.stats is None:
            raise MissingStats("model has no coefficient statistics; train first")
        mean = np.asarray(self.stats["mean"])
        std = np.asarray(self.stats["std"])
        return mean[None, :] + std[None, :] * rng.standard_normal((count, self.k_star))

    # -- persistence ------------------------------------------------------

    def arch_config(self) -> dict:
        return {
            "grid": list(self.grid),
            "mode": self.mode,
            "k_star": self.k_star,
            "encoder": asdict(self.enc_cfg),
            "decoder": asdict(self.dec_cfg),
        }

    def save(self, path, extra_meta: dict | None = None) -> str:
        tensors = {name: p.detach().numpy().astype(np.float32)
                   for name, p in self.named_parameters()}
        if self.U_bar is not None:
            tensors["U_bar"] = self.U_bar.astype(np.float32)
        meta = {
            "stats": {k: list(map(float, v)) for k, v in (self.stats or {}).items()},
            "basis_id": self.basis_id,
            "manifest_hash": self.manifest_hash,
        }
        meta.update(extra_meta or {})
        cfg = self.arch_config()
        # fix tuple/list drift for deterministic JSON
        cfg["encoder"]["channels"] = list(self.enc_cfg.channels)
        cfg["decoder"]["channels"] = list(self.dec_cfg.channels)
        return save_checkpoint(path, self.mode, cfg, tensors, meta)

    @classmethod
    def from_checkpoint(cls, ck: Checkpoint) -> "GenerativeModel":
        cfg = ck.config
        enc = EncoderConfig(**{**cfg["encoder"], "channels": tuple(cfg["encoder"]["channels"])})
        dec = DecoderConfig(**{**cfg["decoder"], "channels": tuple(cfg["decoder"]["channels"])})
        model = cls(grid=tuple(cfg["grid"]), mode=cfg["mode"], enc_cfg=enc,
                    dec_cfg=dec, k_star=cfg["k_star"])
        params = dict(model.named_parameters())
        with torch.no_grad():
            for name, p in params.items():
                p.copy_(torch.from_numpy(ck.tensors[name].astype(np.float32)))
        if "U_bar" in ck.tensors:
            model.U_bar = ck.tensors["U_bar"].astype(np.float32)
            _check_orthonormal(model.U_bar)
        stats = ck.meta.get("stats") or None
        if stats:
            model.stats = {k: np.asarray(v) for k, v in stats.items()}
        model.basis_id = ck.meta.get("basis_id", "untrained")
        model.manifest_hash = ck.meta.get("manifest_hash")
        return model


def _check_orthonormal(U: np.ndarray, tol: float = 1e-5):
    gram = U.astype(np.float64).T @ U.astype(np.float64)
    err = float(np.abs(gram - np.eye(U.shape[1])).max())
    if err > tol:
        raise MissingBasis(f"stored basis is not orthonormal (|U^T U - I| = {err:.2e})")


def beta_schedule(step: int, cfg: TrainConfig) -> float:
    """Linear ramp 0 -> beta_final over the first anneal_frac of training."""
    ramp = max(1, int(cfg.steps * cfg.anneal_frac))
    return cfg.beta_final * min(1.0, step / ramp)


def lr_schedule(step: int, cfg: TrainConfig) -> float:
    if cfg.lr_final is None:
        return cfg.lr
    frac = step / max(1, cfg.steps - 1)
    return cfg.lr_final + 0.5 * (cfg.lr - cfg.lr_final) * (1.0 + np.cos(np.pi * frac))


def train(model: GenerativeModel, rasters: np.ndarray, split: list[str],
          cfg: TrainConfig, manifest_hash: str | None = None) -> dict:
    """Optimize the model in place; freezes the basis and coefficient stats.

    Returns a history dict with per-step losses and per-epoch validation
    reconstruction MSE.
    """
    _apply_thread_env()
    m, n = model.grid
    model._check_input(rasters)
    tags = np.asarray(split)
    train_idx = np.nonzero(tags == "train")[0]
    val_idx = np.nonzero(tags == "val")[0]
    X = np.ascontiguousarray(rasters.astype(np.float32))
    Xt = torch.from_numpy(X[train_idx]).unsqueeze(1)
    n_train = len(train_idx)
    if n_train < cfg.batch_size:
        raise BatchTooSmall(f"{n_train} training samples < batch size {cfg.batch_size}")

    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(11,)))
    if cfg.init_output_bias:
        base = float(np.clip(X[train_idx].mean(), 1e-4, 1.0 - 1e-4))
        with torch.no_grad():
            model.decoder.tconvs[-1].bias.fill_(float(np.log(base / (1.0 - base))))
    params = [p for _, p in model.named_parameters()]
    names = [name for name, _ in model.named_parameters()]
    for p in params:
        p.requires_grad_(True)
    opt = ndmath.OptimizerState.for_params(params, lr=cfg.lr)

    epoch_len = max(1, n_train // cfg.batch_size)
    log_every = cfg.log_every or epoch_len
    history = {"step": [], "total": [], "rec": [], "kl": [], "beta": [], "val_mse": []}

    perm = rng.permutation(n_train)
    cursor = 0
    for step in range(cfg.steps):
        if cursor + cfg.batch_size > n_train:
            perm = rng.permutation(n_train)
            cursor = 0
        batch = perm[cursor : cursor + cfg.batch_size]
        cursor += cfg.batch_size
        xb = Xt[batch]

        Y = model.encoder(xb)  # (B, L)
        if model.mode == VRRAE:
            Ymat = Y.T  # (L, B)
            svd = ndmath.truncated_svd(Ymat.detach().numpy().astype(np.float64), model.k_star)
            U = torch.from_numpy(svd.U.astype(np.float32))  # stop-gradient basis
            alpha_mu = U.T @ Ymat
            log_sigma = torch.clamp(model.sigma_head(Y), LOG_SIGMA_MIN, LOG_SIGMA_MAX)
            sigma = torch.exp(log_sigma).T  # (k*, B)
            eps = torch.from_numpy(rng.standard_normal(alpha_mu.shape).astype(np.float32))
            alpha_tilde = alpha_mu + sigma * eps
            z = (U @ alpha_tilde).T
            out = model.decoder(z)
            beta = beta_schedule(step, cfg)
            kl_scale = 1.0 / (m * n) if cfg.kl_pixel_normalized else 1.0
            total, rec, kl = loss_vrrae(xb[:, 0], out, alpha_mu, sigma, beta * kl_scale)
        else:
            z = model.up(model.down(Y))
            out = model.decoder(z)
            beta = 0.0
            rec = torch.mean((xb[:, 0] - out) ** 2)
            kl = torch.zeros(())
            total = rec

        opt.lr = lr_schedule(step, cfg)
        grads = torch.autograd.grad(total, params, allow_unused=True)
        ndmath.adam_step(params, grads, opt, names=names)

        if step % log_every == 0 or step == cfg.steps - 1:
            history["step"].append(step)
            history["total"].append(float(total.detach()))
            history["rec"].append(float(rec.detach()))
            history["kl"].append(float(kl.detach()))
            history["beta"].append(beta)
            if len(val_idx) >= (model.k_star if model.mode == VRRAE else 1):
                history["val_mse"].append(_val_reconstruction(model, X, val_idx))

    for p in params:
        p.requires_grad_(False)

    _freeze(model, X, train_idx, manifest_hash)
    if len(val_idx):
        history["val_mse"].append(_reconstruction_mse(model, X[val_idx]))
    return history


@torch.no_grad()
def _val_reconstruction(model: GenerativeModel, X: np.ndarray, val_idx: np.ndarray,
                        cap: int = 128) -> float:
    """Per-epoch validation MSE of the raw encode->decode path.

    Runs before the basis freeze, so it reconstructs from the full latent
    (vrrae) or the dense bottleneck (plain_ae); capped to keep epoch logging
    affordable on long runs.
    """
    sel = val_idx[:cap]
    xb = torch.from_numpy(X[sel]).unsqueeze(1)
    Y = model.encoder(xb)
    if model.mode == VRRAE:
        svd = ndmath.truncated_svd(Y.T.numpy().astype(np.float64), model.k_star)
        U = torch.from_numpy(svd.U.astype(np.float32))
        z = (U @ (U.T @ Y.T)).T
    else:
        z = model.up(model.down(Y))
    out = model.decoder(z)
    return float(torch.mean((xb[:, 0] - out) ** 2))


def _freeze(model: GenerativeModel, X: np.ndarray, train_idx: np.ndarray,
            manifest_hash: str | None):
    """One full-train-set SVD fixes the basis; stats come from its codes."""
    if model.mode == VRRAE:
        Y = _encode_chunked(model, X[train_idx])  # (L, N)
        svd = ndmath.truncated_svd(Y.astype(np.float64), model.k_star)
        model.U_bar = svd.U.astype(np.float32)
    # stats via the exact inference path so projected training codes land
    # inside [min, max] by construction
    alpha = model.project_batch(X[train_idx]).T  # (k*, N)
    model.stats = {
        "mean": alpha.mean(axis=1),
        "std": alpha.std(axis=1),
        "min": alpha.min(axis=1),
        "max": alpha.max(axis=1),
        "second_moment": (alpha**2).mean(axis=1),
    }
    model.manifest_hash = manifest_hash
    model.basis_id = f"{model.mode}-{manifest_hash or 'local'}"


def _encode_chunked(model: GenerativeModel, X: np.ndarray, chunk: int = 256) -> np.ndarray:
    cols = [model.encode_batch(X[i : i + chunk]) for i in range(0, len(X), chunk)]
    return np.concatenate(cols, axis=1)


def _reconstruction_mse(model: GenerativeModel, X: np.ndarray, chunk: int = 256) -> float:
    errs = []
    for i in range(0, len(X), chunk):
        xb = X[i : i + chunk]
        codes = model.project_batch(xb)  # (N, k*)
        out = model.decode(codes.T)
        errs.append(np.mean((xb.astype(np.float64) - out.astype(np.float64)) ** 2, axis=(1, 2)))
    return float(np.concatenate(errs).mean())


def reconstruction_mse(model: GenerativeModel, rasters: np.ndarray) -> float:
    """Mean reconstruction MSE of eval-mode encode -> project -> decode."""
    return _reconstruction_mse(model, rasters.astype(np.float32))
