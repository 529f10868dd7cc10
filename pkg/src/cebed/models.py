"""The seven deep baseline estimators and their input adapters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cebed.autodiff import ops
from cebed.autodiff.nn import Conv2d, ConvTranspose2d, Dense, EncoderBlock, Module, ResidualBlock
from cebed.autodiff.tensor import Tensor
from cebed.classical import PilotObservation, ls_pilot
from cebed.grid import GridDims
from cebed.pilots import embed_array

LOW_RES = "LowRes"
MASKED = "Masked"

INPUT_KIND = {
    "ChannelNet": LOW_RES,
    "ReEsNet": LOW_RES,
    "InReEsNet": LOW_RES,
    "MReEsNet": MASKED,
    "DDAE": MASKED,
    "MTRE": MASKED,
    "HA02": MASKED,
}
MODEL_NAMES = tuple(INPUT_KIND)

DEFAULT_HYPER = {
    "ChannelNet": {"sr_widths": (64, 32), "sr_kernels": (9, 5, 5), "dn_width": 64, "dn_depth": 5},
    "ReEsNet": {"width": 16, "blocks": 4, "res_scale": 0.1},
    "InReEsNet": {"width": 16, "blocks": 4, "res_scale": 0.1},
    "MReEsNet": {"width": 16, "blocks": 4, "res_scale": 0.1},
    "DDAE": {"hidden": (1024, 512, 1024)},
    "MTRE": {"d_model": 128, "heads": 4, "blocks": 2, "d_ff": 256, "embed_kernel": 3},
    "HA02": {"d_model": 64, "heads": 4, "blocks": 1, "d_ff": 128, "width": 16, "res_blocks": 2, "res_scale": 0.1},
}


def canonical_name(name: str) -> str:
    for known in MODEL_NAMES:
        if known.lower() == str(name).lower():
            return known
    raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    n_r: int = 1
    n_fp: int = 72
    n_sp: int = 2
    n_f: int = 72
    n_s: int = 14
    hyper: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "name", canonical_name(self.name))
        unknown = set(self.hyper) - set(DEFAULT_HYPER[self.name])
        if unknown:
            raise ValueError(f"unknown hyperparameters for {self.name}: {sorted(unknown)}")
        if self.n_f % self.n_fp or self.n_s % self.n_sp:
            raise ValueError("pilot counts must divide the grid dimensions")

    @classmethod
    def for_family(cls, name: str, family, **hyper) -> "ModelSpec":
        return cls(name, family.n_r, family.n_fp, family.n_sp, family.n_f, family.n_s, hyper)

    @property
    def input_kind(self) -> str:
        return INPUT_KIND[self.name]

    @property
    def channels(self) -> int:
        return 2 * self.n_r

    @property
    def params(self) -> dict:
        return {**DEFAULT_HYPER[self.name], **self.hyper}

    @property
    def input_shape(self) -> tuple:
        if self.input_kind == LOW_RES:
            return (self.n_fp, self.n_sp, self.channels)
        return (self.n_f, self.n_s, self.channels)

    @property
    def output_shape(self) -> tuple:
        return (self.n_f, self.n_s, self.channels)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_r": self.n_r,
            "n_fp": self.n_fp,
            "n_sp": self.n_sp,
            "n_f": self.n_f,
            "n_s": self.n_s,
            "hyper": {k: list(v) if isinstance(v, tuple) else v for k, v in self.hyper.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        hyper = {k: tuple(v) if isinstance(v, list) else v for k, v in d.get("hyper", {}).items()}
        return cls(d["name"], d["n_r"], d["n_fp"], d["n_sp"], d["n_f"], d["n_s"], hyper)


# complex <-> real planes ---------------------------------------------------


def to_planes(h: np.ndarray) -> np.ndarray:
    """``[..., n_r, A, B]`` complex -> ``[..., A, B, 2 n_r]`` real
    (real parts of all antennas, then imaginary parts)."""
    h = np.moveaxis(np.asarray(h), -3, -1)
    return np.concatenate([h.real, h.imag], axis=-1)


def from_planes(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    n_r = x.shape[-1] // 2
    h = x[..., :n_r] + 1j * x[..., n_r:]
    return np.moveaxis(h, -1, -3)


def input_adapter(obs: PilotObservation, kind: str, dtype=np.float32) -> np.ndarray:
    """LS pilot estimates as a low-resolution image or as a masked full grid."""
    h_ls = ls_pilot(obs)
    if kind == LOW_RES:
        return to_planes(h_ls).astype(dtype)
    if kind == MASKED:
        return to_planes(embed_array(h_ls, obs.pattern)).astype(dtype)
    raise ValueError(f"unknown input kind {kind!r}")


# architectures -------------------------------------------------------------


def _upsample_kernel(stride: int) -> int:
    return 3 if stride == 1 else 2 * stride


class ChannelNet(Module):
    """Bilinear upscaling, SRCNN refinement, then a residual denoising CNN."""

    def __init__(self, spec: ModelSpec):
        super().__init__()
        hp = spec.params
        c = spec.channels
        w1, w2 = hp["sr_widths"]
        k1, k2, k3 = hp["sr_kernels"]
        self.out_size = (spec.n_f, spec.n_s)
        self.sr1 = Conv2d(c, w1, k1)
        self.sr2 = Conv2d(w1, w2, k2)
        self.sr3 = Conv2d(w2, c, k3, init="lecun")
        depth, width = hp["dn_depth"], hp["dn_width"]
        self.dn = []
        for i in range(depth):
            c_in = c if i == 0 else width
            c_out = c if i == depth - 1 else width
            conv = Conv2d(c_in, c_out, 3, init="he" if i < depth - 1 else "lecun")
            setattr(self, f"dn{i}", conv)
            self.dn.append(conv)

    def forward(self, x):
        up = ops.bilinear_upsample(x, self.out_size)
        sr = self.sr3(ops.relu(self.sr2(ops.relu(self.sr1(up)))))
        z = sr
        for i, conv in enumerate(self.dn):
            z = conv(z)
            if i < len(self.dn) - 1:
                z = ops.relu(z)
        return ops.residual_add(z, sr)


class _ResTrunk(Module):
    def __init__(self, c_in: int, width: int, blocks: int, res_scale: float = 0.1):
        super().__init__()
        self.head = Conv2d(c_in, width, 3, init="lecun")
        self.blocks = []
        for i in range(blocks):
            block = ResidualBlock(width, res_scale=res_scale)
            setattr(self, f"block{i}", block)
            self.blocks.append(block)
        self.tail = Conv2d(width, width, 3, init="lecun")

    def forward(self, x):
        h = self.head(x)
        z = h
        for block in self.blocks:
            z = block(z)
        return ops.residual_add(self.tail(z), h)


class ReEsNet(Module):
    """Residual trunk on the low-resolution input and an upsampling stage
    (transposed convolution, or bilinear for the interpolating variant)."""

    def __init__(self, spec: ModelSpec, upsampling: str = "deconv"):
        super().__init__()
        hp = spec.params
        width = hp["width"]
        self.upsampling = upsampling
        self.out_size = (spec.n_f, spec.n_s)
        self.trunk = _ResTrunk(spec.channels, width, hp["blocks"], hp["res_scale"])
        if upsampling == "deconv":
            stride = (spec.n_f // spec.n_fp, spec.n_s // spec.n_sp)
            kernel = tuple(_upsample_kernel(s) for s in stride)
            self.up = ConvTranspose2d(width, width, kernel, stride, init="lecun")
        elif upsampling not in ("bilinear", "none"):
            raise ValueError(f"unknown upsampling {upsampling!r}")
        self.out = Conv2d(width, spec.channels, 3, init="lecun")

    def forward(self, x):
        z = self.trunk(x)
        if self.upsampling == "deconv":
            z = self.up(z)
        elif self.upsampling == "bilinear":
            z = ops.bilinear_upsample(z, self.out_size)
        return self.out(z)


class DDAE(Module):
    def __init__(self, spec: ModelSpec):
        super().__init__()
        size = spec.n_f * spec.n_s * spec.channels
        widths = (size,) + tuple(spec.params["hidden"]) + (size,)
        self.out_shape = spec.output_shape
        self.layers = []
        for i in range(len(widths) - 1):
            layer = Dense(widths[i], widths[i + 1], init="he" if i < len(widths) - 2 else "lecun")
            setattr(self, f"fc{i}", layer)
            self.layers.append(layer)

    def forward(self, x):
        B = x.shape[0]
        z = ops.reshape(x, (B, -1))
        for i, layer in enumerate(self.layers):
            z = layer(z)
            if i < len(self.layers) - 1:
                z = ops.relu(z)
        return ops.reshape(z, (B,) + self.out_shape)


class _TokenEncoder(Module):
    """Per-subcarrier tokens, learned positions, stacked encoder blocks."""

    def __init__(self, n_tokens, d_model, heads, blocks, d_ff):
        super().__init__()
        self.add_param("pos", (n_tokens, d_model), "normal")
        self.blocks = []
        for i in range(blocks):
            block = EncoderBlock(d_model, heads, d_ff)
            setattr(self, f"enc{i}", block)
            self.blocks.append(block)

    def forward(self, tokens, positional: bool = True):
        z = ops.add(tokens, self.pos) if positional else tokens
        for block in self.blocks:
            z = block(z)
        return z


class MTRE(Module):
    """Masked grid as a sequence over subcarriers: 1-D conv embedding,
    transformer encoder blocks, linear read-out per token."""

    def __init__(self, spec: ModelSpec):
        super().__init__()
        hp = spec.params
        d = hp["d_model"]
        feat = spec.n_s * spec.channels
        self.out_shape = spec.output_shape
        self.embed = Conv2d(feat, d, (hp["embed_kernel"], 1), init="lecun")
        self.encoder = _TokenEncoder(spec.n_f, d, hp["heads"], hp["blocks"], hp["d_ff"])
        self.readout = Dense(d, feat, init="lecun")

    def embed_tokens(self, x):
        B, n_f = x.shape[0], x.shape[1]
        seq = ops.reshape(x, (B, n_f, 1, -1))
        return ops.reshape(self.embed(seq), (B, n_f, -1))

    def forward(self, x, positional: bool = True):
        z = self.encoder(self.embed_tokens(x), positional)
        return ops.reshape(self.readout(z), (x.shape[0],) + self.out_shape)


class HA02(Module):
    """Transformer encoder compressing time to ``n_sp`` latent symbols,
    ReEsNet-style residual decoder and transposed-convolution upsampling."""

    def __init__(self, spec: ModelSpec):
        super().__init__()
        hp = spec.params
        d, width = hp["d_model"], hp["width"]
        self.latent = (spec.n_f, spec.n_sp, width)
        self.embed = Dense(spec.n_s * spec.channels, d, init="lecun")
        self.encoder = _TokenEncoder(spec.n_f, d, hp["heads"], hp["blocks"], hp["d_ff"])
        self.bottleneck = Dense(d, spec.n_sp * width, init="lecun")
        self.decoder = _ResTrunk(width, width, hp["res_blocks"], hp["res_scale"])
        stride = (1, spec.n_s // spec.n_sp)
        self.up = ConvTranspose2d(width, width, tuple(_upsample_kernel(s) for s in stride), stride, init="lecun")
        self.out = Conv2d(width, spec.channels, 3, init="lecun")

    def forward(self, x):
        B, n_f = x.shape[0], x.shape[1]
        tokens = self.embed(ops.reshape(x, (B, n_f, -1)))
        z = self.bottleneck(self.encoder(tokens))
        z = self.decoder(ops.reshape(z, (B,) + self.latent))
        return self.out(self.up(z))


def build(spec: ModelSpec, seed: int, dtype=np.float32) -> Module:
    """Construct and deterministically initialise the named baseline."""
    name = spec.name
    if name == "ChannelNet":
        model = ChannelNet(spec)
    elif name == "ReEsNet":
        model = ReEsNet(spec, "deconv")
    elif name == "InReEsNet":
        model = ReEsNet(spec, "bilinear")
    elif name == "MReEsNet":
        model = ReEsNet(spec, "none")
    elif name == "DDAE":
        model = DDAE(spec)
    elif name == "MTRE":
        model = MTRE(spec)
    elif name == "HA02":
        model = HA02(spec)
    else:  # pragma: no cover - ModelSpec already validated the name
        raise ValueError(f"unknown model {name!r}")
    model.spec = spec
    return model.initialize(seed, dtype)


def forward_batches(model: Module, x: np.ndarray, batch_size: int = 512) -> np.ndarray:
    """Inference without recording a tape."""
    outs = []
    dtype = next(iter(model.parameters().values())).dtype
    for start in range(0, len(x), batch_size):
        outs.append(model(Tensor(x[start : start + batch_size], dtype=dtype)).data)
    return np.concatenate(outs) if outs else np.zeros((0,) + model.spec.output_shape, dtype=dtype)


def estimate(model: Module, obs: PilotObservation, batch_size: int = 512) -> np.ndarray:
    """Complex channel estimate ``[..., n_r, n_f, n_s]`` from pilot observations."""
    spec: ModelSpec = model.spec
    if (obs.n_r, obs.pattern.n_fp, obs.pattern.n_sp, obs.dims) != (
        spec.n_r,
        spec.n_fp,
        spec.n_sp,
        GridDims(spec.n_f, spec.n_s),
    ):
        raise ValueError("observation dimensions do not match the model")
    x = input_adapter(obs, spec.input_kind)
    single = not obs.batch_shape
    if single:
        x = x[None]
    y = forward_batches(model, x, batch_size)
    h = from_planes(y.astype(np.float64))
    return h[0] if single else h
