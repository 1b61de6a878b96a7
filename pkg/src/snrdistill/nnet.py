"""Conditional MLP denoiser, its gradients, and a functional Adam optimizer.

The network maps a noisy latent, a diffusion time in [0, 1], and a class id
to a prediction with the same shape as the latent. Conditioning is plain
concatenation at the input: [latent, sinusoidal time features, learned class
embedding]. The `parameterization` tag records whether the output is read as
predicted noise or as the predicted clean latent; the forward pass itself is
identical for both.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import autodiff as ad
from .errors import ShapeMismatchError

Array = np.ndarray


class Parameterization(enum.Enum):
    EPSILON = "epsilon"
    X = "x"


def time_features(t, num_frequencies: int) -> Array:
    """Sinusoidal features [sin(pi 2^k t), cos(pi 2^k t)] for k < num_frequencies."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    freqs = np.pi * (2.0 ** np.arange(num_frequencies))
    angles = t[:, None] * freqs[None, :]
    out = np.empty((t.shape[0], 2 * num_frequencies), dtype=np.float64)
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles)
    return out


class _NumpyOps:
    """Plain-array twin of the autodiff ops, for inference-only forwards."""

    @staticmethod
    def concat(parts, axis=1):
        return np.concatenate(parts, axis=axis)

    @staticmethod
    def take_rows(table, idx):
        return table[np.asarray(idx, dtype=np.int64)]

    @staticmethod
    def silu(x):
        return x * expit(x)


@dataclass
class DenoiserModel:
    """Conditional denoiser: 2-hidden-layer MLP by default, SiLU activations."""

    latent_dim: int
    num_classes: int
    hidden: tuple[int, ...]
    embed_dim: int
    num_frequencies: int
    parameterization: Parameterization
    params: dict[str, Array] = field(repr=False)

    @classmethod
    def init(
        cls,
        latent_dim: int = 2,
        num_classes: int = 8,
        hidden: tuple[int, ...] = (128, 128),
        embed_dim: int = 16,
        num_frequencies: int = 8,
        parameterization: Parameterization = Parameterization.EPSILON,
        seed: int = 0,
    ) -> "DenoiserModel":
        rng = np.random.default_rng(seed)
        in_dim = latent_dim + 2 * num_frequencies + embed_dim
        dims = [in_dim, *hidden, latent_dim]
        params: dict[str, Array] = {
            "embed": rng.normal(0.0, 1.0, size=(num_classes, embed_dim))
        }
        for k in range(len(dims) - 1):
            scale = 1.0 / np.sqrt(dims[k])
            params[f"w{k}"] = rng.normal(0.0, scale, size=(dims[k], dims[k + 1]))
            params[f"b{k}"] = np.zeros(dims[k + 1], dtype=np.float64)
        return cls(
            latent_dim=latent_dim,
            num_classes=num_classes,
            hidden=tuple(hidden),
            embed_dim=embed_dim,
            num_frequencies=num_frequencies,
            parameterization=parameterization,
            params=params,
        )

    @property
    def num_params(self) -> int:
        return sum(v.size for v in self.params.values())

    def copy_with(self, parameterization: Parameterization | None = None) -> "DenoiserModel":
        """Deep copy; optionally retag the output parameterization."""
        return DenoiserModel(
            latent_dim=self.latent_dim,
            num_classes=self.num_classes,
            hidden=self.hidden,
            embed_dim=self.embed_dim,
            num_frequencies=self.num_frequencies,
            parameterization=parameterization or self.parameterization,
            params={k: v.copy() for k, v in self.params.items()},
        )

    def _validate(self, z: Array, t, cond) -> tuple[Array, Array, Array]:
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 2:
            raise ShapeMismatchError("z_t", 0, "(batch, latent_dim)", f"{z.ndim}-d array")
        if z.shape[1] != self.latent_dim:
            raise ShapeMismatchError("z_t", 1, self.latent_dim, z.shape[1])
        batch = z.shape[0]
        t = np.asarray(t, dtype=np.float64)
        if t.ndim == 0:
            t = np.full(batch, float(t))
        elif t.shape != (batch,):
            raise ShapeMismatchError("t", 0, batch, t.shape[0])
        if np.any(t < -1e-12) or np.any(t > 1.0 + 1e-12):
            raise ValueError(f"t must lie in [0, 1], got range [{t.min()}, {t.max()}]")
        t = np.clip(t, 0.0, 1.0)
        cond = np.asarray(cond, dtype=np.int64)
        if cond.ndim == 0:
            cond = np.full(batch, int(cond), dtype=np.int64)
        elif cond.shape != (batch,):
            raise ShapeMismatchError("condition", 0, batch, cond.shape[0])
        if np.any(cond < 0) or np.any(cond >= self.num_classes):
            raise ValueError(
                f"condition ids must lie in [0, {self.num_classes}), "
                f"got range [{cond.min()}, {cond.max()}]"
            )
        return z, t, cond

    def _forward_impl(self, params, ops, z, t, cond):
        feats = time_features(t, self.num_frequencies)
        x = ops.concat([z, feats, ops.take_rows(params["embed"], cond)], axis=1)
        n_layers = len(self.hidden) + 1
        h = x
        for k in range(n_layers - 1):
            h = ops.silu(h @ params[f"w{k}"] + params[f"b{k}"])
        k = n_layers - 1
        return h @ params[f"w{k}"] + params[f"b{k}"]

    def forward(self, z, t, cond) -> Array:
        """Network prediction for a batch, shape (batch, latent_dim).

        `t` and `cond` may be scalars (broadcast over the batch) or arrays
        of length batch.
        """
        z, t, cond = self._validate(z, t, cond)
        return self._forward_impl(self.params, _NumpyOps, z, t, cond)

    def graph_forward(self, param_vars: dict[str, ad.Var], z, t, cond) -> ad.Var:
        """Same forward pass, recorded on the autodiff tape for `param_vars`."""
        z, t, cond = self._validate(z, t, cond)
        return self._forward_impl(param_vars, ad, ad.lift(z), t, cond)


def loss_and_gradients(model: DenoiserModel, loss_fn):
    """Evaluate a scalar loss and its gradients w.r.t. every model parameter.

    `loss_fn(forward)` must build the loss from tracked forward passes:
    `forward(z, t, cond)` returns a Var, and the result must be a scalar Var
    (or a plain constant, which yields all-zero gradients). Gradients come
    back as a dict mirroring `model.params`.
    """
    param_vars = {k: ad.Var(v) for k, v in model.params.items()}

    def forward(z, t, cond):
        return model.graph_forward(param_vars, z, t, cond)

    loss = ad.lift(loss_fn(forward))
    ad.backward(loss)
    grads = {
        k: (pv.grad if pv.grad is not None else np.zeros_like(pv.value))
        for k, pv in param_vars.items()
    }
    return float(loss.value), grads


@dataclass
class AdamState:
    """First/second moment accumulators plus hyperparameters."""

    m: dict[str, Array]
    v: dict[str, Array]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr: float = 1e-3

    @classmethod
    def fresh(cls, params: dict[str, Array], lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            step=0,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            lr=lr,
        )


def adam_step(
    params: dict[str, Array], grads: dict[str, Array], state: AdamState
) -> tuple[dict[str, Array], AdamState]:
    """One bias-corrected Adam update; returns fresh params and state."""
    for k, p in params.items():
        if state.m[k].shape != p.shape:
            raise ShapeMismatchError(f"adam m[{k}]", 0, p.shape, state.m[k].shape)
        if grads[k].shape != p.shape:
            raise ShapeMismatchError(f"grad[{k}]", 0, p.shape, grads[k].shape)
    t = state.step + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_params: dict[str, Array] = {}
    new_m: dict[str, Array] = {}
    new_v: dict[str, Array] = {}
    for k, p in params.items():
        g = grads[k]
        m = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        new_params[k] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[k] = m
        new_v[k] = v
    new_state = AdamState(
        m=new_m, v=new_v, step=t,
        beta1=state.beta1, beta2=state.beta2, eps=state.eps, lr=state.lr,
    )
    return new_params, new_state
