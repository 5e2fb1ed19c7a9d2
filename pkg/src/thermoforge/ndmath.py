"""Shared numerical substrate: truncated SVD, Adam, init, gradient checking.

Learned parameters live in float32; every verification path here runs in
float64. Differentiation itself is delegated to torch autograd — the
contract is that ``grad_check`` stays below 1e-4 for every loss the
learning modules optimize.
"""

from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import ConvergenceFailure, NonFiniteGradient


@dataclass
class TruncatedSVD:
    """Top-k* factors of Y = U S V^T with sign-fixed orthonormal columns."""

    U: np.ndarray  # L x k*
    S: np.ndarray  # k*
    V: np.ndarray  # N x k*

    @property
    def k_star(self) -> int:
        return self.S.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.U @ (self.S[:, None] * self.V.T)


def _fix_signs(U, V):
    # orient each column so its largest-|entry| is positive; keeps latent
    # codes reproducible across runs and serializable
    picks = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[picks, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, V * signs


def truncated_svd(Y: np.ndarray, k_star: int) -> TruncatedSVD:
    """Best rank-k* approximation of Y (L x N) in the Frobenius norm.

    Singular values come back non-increasing; ties keep the factorization
    order as returned (the decomposition is not unique within a tie).
    """
    Y = np.asarray(Y)
    L, N = Y.shape
    if k_star > min(L, N):
        raise ValueError(f"k_star={k_star} exceeds min(L, N)={min(L, N)}")
    try:
        U, S, Vt = np.linalg.svd(Y, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # surfaced, never masked
        raise ConvergenceFailure(str(exc)) from exc
    U, V = _fix_signs(U[:, :k_star], Vt[:k_star].T)
    return TruncatedSVD(U=U, S=S[:k_star].copy(), V=V)


@dataclass
class OptimizerState:
    """Adam moment accumulators for a named list of parameters."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, lr):
        st = cls(lr=lr)
        st.m = [torch.zeros_like(p, memory_format=torch.contiguous_format) for p in params]
        st.v = [torch.zeros_like(p, memory_format=torch.contiguous_format) for p in params]
        return st


@torch.no_grad()
def adam_step(params, grads, state: OptimizerState, names=None):
    """One bias-corrected Adam update, in place on ``params``.

    Any NaN/Inf gradient aborts the whole step (no partial updates) and
    reports the offending parameter's name.
    """
    for i, g in enumerate(grads):
        if g is None:
            continue
        if not torch.isfinite(g).all():
            name = names[i] if names is not None else f"param[{i}]"
            raise NonFiniteGradient(f"non-finite gradient in {name}")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    step_size = state.lr / bc1
    sqrt_bc2 = bc2**0.5
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            continue
        m.mul_(state.beta1).add_(g, alpha=1.0 - state.beta1)
        v.mul_(state.beta2).addcmul_(g, g, value=1.0 - state.beta2)
        denom = v.sqrt().div_(sqrt_bc2).add_(state.eps)
        p.addcdiv_(m, denom, value=-step_size)
    return params, state


def he_uniform(shape, fan_in, rng: np.random.Generator, dtype=np.float32):
    """He-style fan-in uniform init: U(-sqrt(6/fan_in), +sqrt(6/fan_in))."""
    bound = float(np.sqrt(6.0 / fan_in))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_linear(in_features, out_features, rng) -> tuple[np.ndarray, np.ndarray]:
    W = he_uniform((out_features, in_features), in_features, rng)
    b = np.zeros(out_features, dtype=np.float32)
    return W, b


def init_conv(in_ch, out_ch, kernel, rng) -> tuple[np.ndarray, np.ndarray]:
    fan_in = in_ch * kernel * kernel
    W = he_uniform((out_ch, in_ch, kernel, kernel), fan_in, rng)
    b = np.zeros(out_ch, dtype=np.float32)
    return W, b


def init_conv_transpose(in_ch, out_ch, kernel, rng) -> tuple[np.ndarray, np.ndarray]:
    # torch stores transposed-conv weight as (in, out, kh, kw); fan-in of the
    # equivalent forward op is in_ch * k * k
    fan_in = in_ch * kernel * kernel
    W = he_uniform((in_ch, out_ch, kernel, kernel), fan_in, rng)
    b = np.zeros(out_ch, dtype=np.float32)
    return W, b


def grad_check(loss_fn, params, probes: int = 20, step: float = 1e-4, seed: int = 0) -> float:
    """Max relative error between autograd and central finite differences.

    ``loss_fn`` must be deterministic given ``params`` (freeze any RNG
    inside the closure). Everything is promoted to float64 for the check;
    ``probes`` scalar entries are sampled across all parameter tensors.
    """
    rng = np.random.default_rng(seed)
    params64 = [torch.tensor(np.asarray(p.detach().cpu().numpy(), dtype=np.float64),
                             requires_grad=True) for p in params]
    loss = loss_fn(params64)
    loss.backward()
    analytic = [p.grad.detach().clone() for p in params64]

    sizes = np.array([p.numel() for p in params64])
    total = int(sizes.sum())
    picks = rng.choice(total, size=min(probes, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    max_rel = 0.0
    for flat_idx in picks:
        pi = int(np.searchsorted(offsets, flat_idx, side="right") - 1)
        local = int(flat_idx - offsets[pi])
        with torch.no_grad():
            flat = params64[pi].view(-1)
            orig = flat[local].item()
            flat[local] = orig + step
            lp = float(loss_fn(params64))
            flat[local] = orig - step
            lm = float(loss_fn(params64))
            flat[local] = orig
        fd = (lp - lm) / (2.0 * step)
        an = float(analytic[pi].view(-1)[local])
        denom = max(abs(fd), abs(an), 1e-12)
        max_rel = max(max_rel, abs(fd - an) / denom)
    return max_rel
