from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from epo.exceptions import ShapeError
from epo.models.models import Activation


@dataclass(frozen=True)
class MlpSpec:
    """Dense trunk: input -> hidden layers (activated) -> linear output"""
    input_dim: int
    hidden_dims: Tuple[int, ...]
    output_dim: int
    activation: Activation = Activation.ELU

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        object.__setattr__(self, "activation", Activation(self.activation))
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        if any(d <= 0 for d in dims):
            raise ValueError(f"all layer sizes must be positive, got {dims}")
        if not self.hidden_dims:
            raise ValueError("hidden_dims must not be empty")

    @property
    def layer_dims(self) -> List[Tuple[int, int]]:
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        return list(zip(dims[:-1], dims[1:]))

    @property
    def num_layers(self) -> int:
        return len(self.hidden_dims) + 1

    @property
    def param_count(self) -> int:
        return sum((fan_in + 1) * fan_out for fan_in, fan_out in self.layer_dims)

    def block_shapes(self) -> List[Tuple[str, Tuple[int, ...]]]:
        shapes = []
        for i, (fan_in, fan_out) in enumerate(self.layer_dims):
            shapes.append((f"W{i}", (fan_in, fan_out)))
            shapes.append((f"b{i}", (fan_out,)))
        return shapes


@dataclass(frozen=True)
class ParamBlock:
    name: str
    offset: int
    shape: Tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))


@dataclass(eq=False)
class ParamVector:
    """Flat float64 parameters with a named, contiguous block layout"""
    values: np.ndarray
    layout: List[ParamBlock]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ShapeError("ParamVector.values", (self.values.size,), self.values.shape)
        seen = set()
        offset = 0
        for block in self.layout:
            if block.name in seen:
                raise ValueError(f"parameter block {block.name!r} appears twice")
            if block.offset != offset:
                raise ValueError(f"block {block.name!r} starts at {block.offset}, expected {offset}")
            seen.add(block.name)
            offset += block.size
        if offset != self.values.size:
            raise ShapeError("ParamVector", (offset,), self.values.shape)

    @classmethod
    def from_shapes(cls, shapes: List[Tuple[str, Tuple[int, ...]]], values: np.ndarray = None) -> "ParamVector":
        layout = []
        offset = 0
        for name, shape in shapes:
            block = ParamBlock(name=name, offset=offset, shape=tuple(shape))
            layout.append(block)
            offset += block.size
        if values is None:
            values = np.zeros(offset, dtype=np.float64)
        return cls(values=values, layout=layout)

    def __len__(self) -> int:
        return self.values.size

    def block(self, name: str) -> ParamBlock:
        for block in self.layout:
            if block.name == name:
                return block
        raise KeyError(name)

    def view(self, name: str) -> np.ndarray:
        """Reshaped view into values; writes go through to the vector"""
        block = self.block(name)
        return self.values[block.offset:block.offset + block.size].reshape(block.shape)

    def views(self) -> Dict[str, np.ndarray]:
        return {block.name: self.view(block.name) for block in self.layout}

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(values=np.array(values, dtype=np.float64), layout=list(self.layout))

    def copy(self) -> "ParamVector":
        return self.with_values(self.values)

    def zeros_like(self) -> "ParamVector":
        return self.with_values(np.zeros_like(self.values))


@dataclass(eq=False)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    @classmethod
    def fresh(cls, size: int, beta1: float = 0.9, beta2: float = 0.999, eps_adam: float = 1e-8) -> "AdamState":
        return cls(m=np.zeros(size), v=np.zeros(size), step_count=0, beta1=beta1, beta2=beta2, eps_adam=eps_adam)

    def copy(self) -> "AdamState":
        return AdamState(m=self.m.copy(), v=self.v.copy(), step_count=self.step_count,
                         beta1=self.beta1, beta2=self.beta2, eps_adam=self.eps_adam)


@dataclass(eq=False)
class MlpCache:
    """Everything mlp_backward needs from the matching forward pass"""
    spec: MlpSpec
    params: ParamVector
    layer_inputs: List[np.ndarray] = field(default_factory=list)
    pre_activations: List[np.ndarray] = field(default_factory=list)
    output_shape: Tuple[int, int] = (0, 0)
