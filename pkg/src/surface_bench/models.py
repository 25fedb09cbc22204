"""Model families: a residual-block network and a parallel-branch network.

Both are built from one ModelSpec at configurable depth/width.  The desk
scale defaults train on a CPU in minutes; deeper variants are expressible
through the same spec.  Parameter tensors carry deterministic dotted names
("stage1.block1.conv1.weight"), which the checkpoint format keys on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError, ShapeError
from .nn.checkpoint import read_checkpoint, write_checkpoint
from .nn.layers import (
    BatchNorm2d,
    Conv2d,
    Dense,
    GlobalAvgPool,
    Layer,
    MaxPool2d,
    ReLU,
    Sequential,
    add_backward,
    add_forward,
    concat_channels_backward,
    concat_channels_forward,
)

MINI_RESNET = "mini_resnet"
MINI_INCEPTION = "mini_inception"


@dataclass(frozen=True)
class ResidualBlockSpec:
    """One residual block; the skip path projects exactly when shapes change."""

    in_channels: int
    out_channels: int
    stride: int = 1

    @property
    def projection(self) -> bool:
        return self.in_channels != self.out_channels or self.stride != 1


@dataclass(frozen=True)
class InceptionBlockSpec:
    """Branch widths: 1x1, 3x3 (after reduce), double-3x3 (after reduce), pool-proj."""

    b1x1: int
    reduce3: int
    b3x3: int
    reduce_double: int
    b_double: int
    pool_proj: int

    def __post_init__(self) -> None:
        widths = (
            self.b1x1,
            self.reduce3,
            self.b3x3,
            self.reduce_double,
            self.b_double,
            self.pool_proj,
        )
        if min(widths) < 1:
            raise ValueError(f"all branch widths must be >= 1, got {widths}")

    @property
    def out_channels(self) -> int:
        return self.b1x1 + self.b3x3 + self.b_double + self.pool_proj


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description; blocks are family-specific tuples."""

    family: str
    stem_width: int = 16
    num_classes: int = 6
    init_seed: int = 0
    blocks: tuple = ()

    def __post_init__(self) -> None:
        if self.family not in (MINI_RESNET, MINI_INCEPTION):
            raise ValueError(f"unknown model family {self.family!r}")

    @classmethod
    def mini_resnet(
        cls,
        stem_width: int = 16,
        stages: tuple[tuple[int, int], ...] = ((16, 2), (32, 2), (64, 2)),
        num_classes: int = 6,
        init_seed: int = 0,
    ) -> "ModelSpec":
        """stages: (width, block count) per stage; stages after the first
        downsample by striding their first block."""
        return cls(MINI_RESNET, stem_width, num_classes, init_seed, tuple(stages))

    @classmethod
    def mini_inception(
        cls,
        stem_width: int = 16,
        blocks: tuple[InceptionBlockSpec, ...] = (
            InceptionBlockSpec(16, 8, 24, 8, 16, 8),
            InceptionBlockSpec(16, 16, 24, 8, 16, 8),
            InceptionBlockSpec(16, 16, 24, 8, 16, 8),
        ),
        num_classes: int = 6,
        init_seed: int = 0,
    ) -> "ModelSpec":
        """Three parallel-branch blocks (~64 output channels each) with 2x2
        max pooling between them."""
        return cls(MINI_INCEPTION, stem_width, num_classes, init_seed, tuple(blocks))

    def to_dict(self) -> dict:
        if self.family == MINI_RESNET:
            blocks = [list(stage) for stage in self.blocks]
        else:
            blocks = [
                [b.b1x1, b.reduce3, b.b3x3, b.reduce_double, b.b_double, b.pool_proj]
                for b in self.blocks
            ]
        return {
            "family": self.family,
            "stem_width": self.stem_width,
            "num_classes": self.num_classes,
            "init_seed": self.init_seed,
            "blocks": blocks,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelSpec":
        family = raw["family"]
        if family == MINI_RESNET:
            blocks = tuple((int(w), int(n)) for w, n in raw["blocks"])
        else:
            blocks = tuple(InceptionBlockSpec(*map(int, b)) for b in raw["blocks"])
        return cls(
            family=family,
            stem_width=int(raw["stem_width"]),
            num_classes=int(raw["num_classes"]),
            init_seed=int(raw["init_seed"]),
            blocks=blocks,
        )


def _conv_bn_relu(
    name: str,
    in_ch: int,
    out_ch: int,
    k: int,
    stride: int,
    rng: np.random.Generator,
    dtype,
) -> list[tuple[str, Layer]]:
    return [
        (f"{name}.conv", Conv2d(in_ch, out_ch, k, stride, k // 2, rng=rng, dtype=dtype)),
        (f"{name}.bn", BatchNorm2d(out_ch, dtype=dtype)),
        (f"{name}.relu", ReLU()),
    ]


class ResidualBlock(Layer):
    """conv-bn-relu-conv-bn plus a (possibly projected) skip, then relu."""

    def __init__(self, spec: ResidualBlockSpec, *, rng: np.random.Generator, dtype):
        c_in, c_out, s = spec.in_channels, spec.out_channels, spec.stride
        self.main = Sequential(
            [
                ("conv1", Conv2d(c_in, c_out, 3, s, 1, rng=rng, dtype=dtype)),
                ("bn1", BatchNorm2d(c_out, dtype=dtype)),
                ("relu1", ReLU()),
                ("conv2", Conv2d(c_out, c_out, 3, 1, 1, rng=rng, dtype=dtype)),
                ("bn2", BatchNorm2d(c_out, dtype=dtype)),
            ]
        )
        self.skip = (
            Sequential(
                [
                    ("conv", Conv2d(c_in, c_out, 1, s, 0, rng=rng, dtype=dtype)),
                    ("bn", BatchNorm2d(c_out, dtype=dtype)),
                ]
            )
            if spec.projection
            else None
        )
        self.relu_out = ReLU()

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        h = self.main.forward(x, train)
        s = self.skip.forward(x, train) if self.skip is not None else x
        return self.relu_out.forward(add_forward(h, s), train)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        dsum = self.relu_out.backward(dout)
        dh, ds = add_backward(dsum)
        dx = self.main.backward(dh)
        dx = dx + (self.skip.backward(ds) if self.skip is not None else ds)
        return dx

    def _collect(self, getter: str) -> dict[str, np.ndarray]:
        out = {f"main.{k}": v for k, v in getattr(self.main, getter)().items()}
        if self.skip is not None:
            out.update({f"skip.{k}": v for k, v in getattr(self.skip, getter)().items()})
        return out

    def parameters(self):
        return self._collect("parameters")

    def gradients(self):
        return self._collect("gradients")

    def buffers(self):
        return self._collect("buffers")


class InceptionBlock(Layer):
    """Four parallel branches concatenated along channels."""

    def __init__(self, in_ch: int, spec: InceptionBlockSpec, *, rng: np.random.Generator, dtype):
        self.spec = spec
        self.branches = [
            ("b1", Sequential(_conv_bn_relu("c", in_ch, spec.b1x1, 1, 1, rng, dtype))),
            (
                "b3",
                Sequential(
                    _conv_bn_relu("reduce", in_ch, spec.reduce3, 1, 1, rng, dtype)
                    + _conv_bn_relu("c", spec.reduce3, spec.b3x3, 3, 1, rng, dtype)
                ),
            ),
            (
                "b33",
                Sequential(
                    _conv_bn_relu("reduce", in_ch, spec.reduce_double, 1, 1, rng, dtype)
                    + _conv_bn_relu("c1", spec.reduce_double, spec.b_double, 3, 1, rng, dtype)
                    + _conv_bn_relu("c2", spec.b_double, spec.b_double, 3, 1, rng, dtype)
                ),
            ),
            (
                "bpool",
                Sequential(
                    [("pool", MaxPool2d(3, 1, 1))]
                    + _conv_bn_relu("proj", in_ch, spec.pool_proj, 1, 1, rng, dtype)
                ),
            ),
        ]
        self._widths: list[int] | None = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        parts = [branch.forward(x, train) for _, branch in self.branches]
        out, self._widths = concat_channels_forward(parts)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        parts = concat_channels_backward(dout, self._widths)
        dx = None
        for (_, branch), dpart in zip(self.branches, parts):
            db = branch.backward(dpart)
            dx = db if dx is None else dx + db
        return dx

    def _collect(self, getter: str) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name, branch in self.branches:
            for key, arr in getattr(branch, getter)().items():
                out[f"{name}.{key}"] = arr
        return out

    def parameters(self):
        return self._collect("parameters")

    def gradients(self):
        return self._collect("gradients")

    def buffers(self):
        return self._collect("buffers")


class Model:
    """A built network: spec plus named parameter/buffer tensors."""

    def __init__(self, spec: ModelSpec, net: Sequential, dtype):
        self.spec = spec
        self.net = net
        self.dtype = dtype

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"expected a (B, 3, H, W) batch, got {x.shape}")
        return self.net.forward(np.asarray(x, dtype=self.dtype), train)

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        return self.net.backward(dlogits)

    def parameters(self) -> dict[str, np.ndarray]:
        return self.net.parameters()

    def gradients(self) -> dict[str, np.ndarray]:
        return self.net.gradients()

    def buffers(self) -> dict[str, np.ndarray]:
        return self.net.buffers()

    def state_tensors(self) -> dict[str, np.ndarray]:
        return {**self.parameters(), **self.buffers()}

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.state_tensors().items()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        state = self.state_tensors()
        if set(state) != set(snapshot):
            raise CheckpointError("snapshot tensor names do not match the model")
        for name, arr in state.items():
            np.copyto(arr, snapshot[name])


def build_model(spec: ModelSpec, dtype=np.float32) -> Model:
    """Instantiate a spec with He-initialized weights from its init seed."""
    rng = np.random.default_rng(spec.init_seed)
    children: list[tuple[str, Layer]] = [
        (
            "stem.conv",
            Conv2d(3, spec.stem_width, 7, 2, 3, rng=rng, dtype=dtype, input_grad=False),
        ),
        ("stem.bn", BatchNorm2d(spec.stem_width, dtype=dtype)),
        ("stem.relu", ReLU()),
        ("stem.pool", MaxPool2d(3, 2, 1)),
    ]
    in_ch = spec.stem_width
    if spec.family == MINI_RESNET:
        for i, (width, count) in enumerate(spec.blocks, start=1):
            for j in range(1, count + 1):
                stride = 2 if (i > 1 and j == 1) else 1
                block_spec = ResidualBlockSpec(in_ch, width, stride)
                children.append(
                    (f"stage{i}.block{j}", ResidualBlock(block_spec, rng=rng, dtype=dtype))
                )
                in_ch = width
    else:
        for i, block in enumerate(spec.blocks, start=1):
            if i > 1:
                children.append((f"pool{i - 1}", MaxPool2d(2, 2)))
            children.append((f"incept{i}", InceptionBlock(in_ch, block, rng=rng, dtype=dtype)))
            in_ch = block.out_channels
    children.append(("gap", GlobalAvgPool()))
    children.append(("head", Dense(in_ch, spec.num_classes, rng=rng, dtype=dtype)))
    return Model(spec, Sequential(children), dtype)


def save_checkpoint(model: Model, path, extra_meta: dict | None = None) -> None:
    """Persist spec plus all parameter and running-statistic tensors.

    ``extra_meta`` rides along in the header (e.g. the normalization
    statistics the model was trained with).
    """
    meta = {"model_spec": model.spec.to_dict(), **(extra_meta or {})}
    write_checkpoint(path, meta, model.state_tensors())


def load_checkpoint(path) -> Model:
    """Rebuild the model from a checkpoint, bit-exact."""
    meta, tensors = read_checkpoint(path)
    spec = ModelSpec.from_dict(meta["model_spec"])
    dtypes = {arr.dtype for arr in tensors.values()}
    dtype = np.float64 if np.dtype(np.float64) in dtypes else np.float32
    model = build_model(spec, dtype=dtype)
    state = model.state_tensors()
    if set(state) != set(tensors):
        missing = sorted(set(state) - set(tensors))
        extra = sorted(set(tensors) - set(state))
        raise CheckpointError(
            f"{path}: tensor names do not match the model spec "
            f"(missing {missing[:3]}, unexpected {extra[:3]})"
        )
    for name, arr in state.items():
        saved = tensors[name]
        if saved.shape != arr.shape:
            raise CheckpointError(
                f"{path}: tensor {name!r} has shape {saved.shape}, "
                f"model expects {arr.shape}"
            )
        np.copyto(arr, saved)
    return model
