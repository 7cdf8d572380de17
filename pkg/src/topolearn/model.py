"""Parameter containers, initialization, and the binary checkpoint format."""

from __future__ import annotations

import dataclasses
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError

CHECKPOINT_MAGIC = b"TOPOTER1"


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class SgcParams:
    """Single propagation-then-linear layer with order k.

    ``activation_slope`` switches on a LeakyReLU after the linear map
    (None keeps the output linear).
    """

    w: np.ndarray  # (C, F)
    b: np.ndarray  # (F,)
    k: int
    activation_slope: float | None = None


@dataclass
class GcnLayer:
    w: np.ndarray  # (C_in, C_out)
    b: np.ndarray  # (C_out,)


@dataclass
class GcnStack:
    """Stacked propagation layers; the last layer is linear.

    negative_slope 0.0 means plain ReLU between layers.
    """

    layers: list[GcnLayer]
    negative_slope: float = 0.0


@dataclass
class GinLayer:
    """Sum aggregation followed by a two-layer MLP with an inner ReLU."""

    eps: float
    w1: np.ndarray  # (C_in, C_out)
    b1: np.ndarray  # (C_out,)
    w2: np.ndarray  # (C_out, C_out)
    b2: np.ndarray  # (C_out,)


@dataclass
class GinStack:
    layers: list[GinLayer]


@dataclass
class DecoderParams:
    """Linear map from edge representations to the four class logits."""

    w: np.ndarray  # (F, 4)
    b: np.ndarray  # (4,)


EncoderParams = SgcParams | GcnStack | GinStack


@dataclass
class Model:
    encoder: EncoderParams
    decoder: DecoderParams


def init_sgc(
    rng: np.random.Generator,
    c_in: int,
    c_out: int,
    k: int,
    activation_slope: float | None = None,
) -> SgcParams:
    return SgcParams(
        glorot_uniform(rng, c_in, c_out), np.zeros(c_out), k, activation_slope
    )


def init_gcn(
    rng: np.random.Generator, dims: list[int], negative_slope: float = 0.0
) -> GcnStack:
    if len(dims) < 2:
        raise DataError("a GCN stack needs at least one layer")
    layers = [
        GcnLayer(glorot_uniform(rng, dims[i], dims[i + 1]), np.zeros(dims[i + 1]))
        for i in range(len(dims) - 1)
    ]
    return GcnStack(layers, negative_slope)


def init_gin(rng: np.random.Generator, dims: list[int], eps: float = 0.0) -> GinStack:
    if len(dims) < 2:
        raise DataError("a GIN stack needs at least one layer")
    layers = [
        GinLayer(
            eps,
            glorot_uniform(rng, dims[i], dims[i + 1]),
            np.zeros(dims[i + 1]),
            glorot_uniform(rng, dims[i + 1], dims[i + 1]),
            np.zeros(dims[i + 1]),
        )
        for i in range(len(dims) - 1)
    ]
    return GinStack(layers)


def init_decoder(rng: np.random.Generator, channels: int, classes: int = 4) -> DecoderParams:
    return DecoderParams(glorot_uniform(rng, channels, classes), np.zeros(classes))


def param_arrays(obj, prefix: str = "") -> list[tuple[str, np.ndarray]]:
    """Flatten every learnable array in a parameter tree, in a fixed order.

    Scalars (k, eps, negative_slope) are hyperparameters, not learnable.
    """
    out: list[tuple[str, np.ndarray]] = []
    if isinstance(obj, np.ndarray):
        out.append((prefix.rstrip("."), obj))
        return out
    if isinstance(obj, list):
        for i, item in enumerate(obj):
            out.extend(param_arrays(item, f"{prefix}[{i}]."))
        return out
    if dataclasses.is_dataclass(obj):
        for fdef in dataclasses.fields(obj):
            val = getattr(obj, fdef.name)
            if isinstance(val, np.ndarray):
                out.append((f"{prefix}{fdef.name}", val))
            elif isinstance(val, list):
                for i, item in enumerate(val):
                    out.extend(param_arrays(item, f"{prefix}{fdef.name}[{i}]."))
            elif dataclasses.is_dataclass(val):
                out.extend(param_arrays(val, f"{prefix}{fdef.name}."))
        return out
    raise TypeError(f"not a parameter container: {type(obj)!r}")


def zero_grads(model: Model) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in param_arrays(model)}


def copy_model(model: Model) -> Model:
    """Deep copy with fresh arrays (used to snapshot an initialization)."""
    import copy

    return copy.deepcopy(model)


def save_checkpoint(path, model: Model) -> None:
    """Write all parameter arrays: magic, array count, then per array the
    row/col extents and little-endian float64 data in row-major order."""
    arrays = param_arrays(model)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(arrays)))
        for _, arr in arrays:
            mat = arr.reshape(1, -1) if arr.ndim == 1 else arr
            fh.write(struct.pack("<II", mat.shape[0], mat.shape[1]))
            fh.write(np.ascontiguousarray(mat, dtype="<f8").tobytes())


def load_checkpoint(path, template: Model) -> Model:
    """Load arrays saved by :func:`save_checkpoint` into a copy of ``template``.

    The template supplies the parameter structure; extents must match.
    """
    model = copy_model(template)
    arrays = param_arrays(model)
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: bad checkpoint magic {magic!r}")
        (count,) = struct.unpack("<I", fh.read(4))
        if count != len(arrays):
            raise DataError(
                f"{path}: checkpoint has {count} arrays, model needs {len(arrays)}"
            )
        for name, arr in arrays:
            rows, cols = struct.unpack("<II", fh.read(8))
            expected = arr.reshape(1, -1).shape if arr.ndim == 1 else arr.shape
            if (rows, cols) != expected:
                raise DataError(
                    f"{path}: array {name} has extents {(rows, cols)}, "
                    f"expected {expected}"
                )
            data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
            arr[...] = data.reshape(arr.shape)
    return model
