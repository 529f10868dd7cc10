"""Parameterised layers built on the primitives in :mod:`cebed.autodiff.ops`."""

from __future__ import annotations

import math

import numpy as np

from cebed.autodiff import ops
from cebed.autodiff.tensor import Tensor
from cebed.grid import derive_seed, rng_for


class Module:
    """Container of named parameters and child modules."""

    def __init__(self):
        self._params: dict[str, tuple] = {}
        self._children: dict[str, Module] = {}

    def __setattr__(self, name, value):
        if isinstance(value, Module) and name != "_children":
            self.__dict__.setdefault("_children", {})[name] = value
        object.__setattr__(self, name, value)

    def add_param(self, name: str, shape, init: str, fan_in: int = 1, fan_out: int = 1) -> Tensor:
        t = Tensor(np.zeros(shape, dtype=np.float32), requires_grad=True, name=name)
        self._params[name] = (t, init, fan_in, fan_out)
        object.__setattr__(self, name, t)
        return t

    def named_params(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out = [(prefix + name, spec[0]) for name, spec in self._params.items()]
        for cname, child in self._children.items():
            out.extend(child.named_params(f"{prefix}{cname}."))
        return out

    def parameters(self) -> dict[str, Tensor]:
        return dict(self.named_params())

    def _init_specs(self, prefix: str = ""):
        for name, spec in self._params.items():
            yield prefix + name, spec
        for cname, child in self._children.items():
            yield from child._init_specs(f"{prefix}{cname}.")

    def initialize(self, seed: int, dtype=np.float32) -> "Module":
        """Draw every parameter from a stream derived from ``(seed, name)``."""
        for name, (t, init, fan_in, fan_out) in self._init_specs():
            rng = rng_for(derive_seed(seed, name))
            if init == "zeros":
                value = np.zeros(t.shape)
            elif init == "ones":
                value = np.ones(t.shape)
            elif init == "he":
                bound = math.sqrt(6.0 / fan_in)
                value = rng.uniform(-bound, bound, size=t.shape)
            elif init == "lecun":
                bound = math.sqrt(3.0 / fan_in)
                value = rng.uniform(-bound, bound, size=t.shape)
            elif init == "xavier":
                bound = math.sqrt(6.0 / (fan_in + fan_out))
                value = rng.uniform(-bound, bound, size=t.shape)
            elif init == "normal":
                value = rng.normal(0.0, 0.02, size=t.shape)
            else:
                raise ValueError(f"unknown initialiser {init!r}")
            t.data = value.astype(dtype)
        return self

    def astype(self, dtype) -> "Module":
        for _, t in self.named_params():
            t.data = t.data.astype(dtype)
        return self

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_params()}

    def load_state_dict(self, state: dict) -> None:
        params = self.parameters()
        if set(state) != set(params):
            missing = set(params) - set(state)
            extra = set(state) - set(params)
            raise ValueError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, t in params.items():
            value = np.asarray(state[name])
            if value.shape != t.shape:
                raise ValueError(f"{name}: shape {value.shape} != {t.shape}")
            t.data = value.astype(t.dtype, copy=True)

    def num_params(self) -> int:
        return sum(t.size for _, t in self.named_params())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


class Dense(Module):
    def __init__(self, n_in: int, n_out: int, init: str = "he"):
        super().__init__()
        self.add_param("weight", (n_in, n_out), init, n_in, n_out)
        self.add_param("bias", (n_out,), "zeros")

    def forward(self, x):
        return ops.dense(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, kernel, init: str = "he"):
        super().__init__()
        kh, kw = (kernel, kernel) if np.isscalar(kernel) else tuple(kernel)
        self.add_param("kernel", (kh, kw, c_in, c_out), init, kh * kw * c_in, kh * kw * c_out)
        self.add_param("bias", (c_out,), "zeros")

    def forward(self, x):
        return ops.conv2d(x, self.kernel, self.bias)


class ConvTranspose2d(Module):
    def __init__(self, c_in: int, c_out: int, kernel, stride, init: str = "he"):
        super().__init__()
        kh, kw = kernel
        self.stride = tuple(stride)
        self.add_param("kernel", (kh, kw, c_in, c_out), init, kh * kw * c_in // (self.stride[0] * self.stride[1]) or 1)
        self.add_param("bias", (c_out,), "zeros")

    def forward(self, x):
        return ops.conv2d_transpose(x, self.kernel, self.bias, stride=self.stride)


class LayerNorm(Module):
    def __init__(self, n: int):
        super().__init__()
        self.add_param("gamma", (n,), "ones")
        self.add_param("beta", (n,), "zeros")

    def forward(self, x):
        return ops.layer_norm(x, self.gamma, self.beta)


class ResidualBlock(Module):
    """conv -> relu -> conv, scaled by ``res_scale``, plus identity skip."""

    def __init__(self, channels: int, kernel: int = 3, res_scale: float = 0.1):
        super().__init__()
        self.res_scale = res_scale
        self.conv1 = Conv2d(channels, channels, kernel)
        self.conv2 = Conv2d(channels, channels, kernel)

    def forward(self, x):
        branch = self.conv2(ops.relu(self.conv1(x)))
        if self.res_scale != 1.0:
            branch = ops.scale(branch, self.res_scale)
        return ops.residual_add(branch, x)


class MultiHeadAttention(Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        if d_model % n_heads:
            raise ValueError(f"d_model={d_model} not divisible by n_heads={n_heads}")
        self.n_heads = n_heads
        self.q = Dense(d_model, d_model, init="xavier")
        self.k = Dense(d_model, d_model, init="xavier")
        self.v = Dense(d_model, d_model, init="xavier")
        self.out = Dense(d_model, d_model, init="xavier")

    def _split(self, t, B, L):
        return ops.transpose(ops.reshape(t, (B, L, self.n_heads, -1)), (0, 2, 1, 3))

    def forward(self, x):
        B, L, D = x.shape
        q, k, v = (self._split(proj(x), B, L) for proj in (self.q, self.k, self.v))
        heads = ops.scaled_dot_attention(q, k, v)
        merged = ops.reshape(ops.transpose(heads, (0, 2, 1, 3)), (B, L, D))
        return self.out(merged)


class EncoderBlock(Module):
    """Post-norm transformer encoder block over ``(B, L, d_model)``."""

    def __init__(self, d_model: int, n_heads: int, d_ff: int):
        super().__init__()
        self.attn = MultiHeadAttention(d_model, n_heads)
        self.norm1 = LayerNorm(d_model)
        self.ff1 = Dense(d_model, d_ff)
        self.ff2 = Dense(d_ff, d_model, init="lecun")
        self.norm2 = LayerNorm(d_model)

    def forward(self, x):
        x = self.norm1(ops.residual_add(self.attn(x), x))
        return self.norm2(ops.residual_add(self.ff2(ops.relu(self.ff1(x))), x))
