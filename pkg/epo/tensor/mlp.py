"""Dense multilayer perceptrons with hand-written forward and backward passes.

Weights are stored (fan_in, fan_out) so a layer is ``x @ W + b`` over row-major
batches. Every hidden layer is followed by the MlpSpec activation; the output
layer is linear.
"""
from typing import Tuple

import numpy as np

from epo.exceptions import NonFiniteError, ShapeError, StaleCacheError
from epo.models.models import Activation
from .classes import MlpCache, MlpSpec, ParamVector


def _activate(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind == Activation.TANH:
        return np.tanh(z)
    return np.where(z > 0.0, z, np.expm1(np.minimum(z, 0.0)))


def _activation_grad(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind == Activation.TANH:
        t = np.tanh(z)
        return 1.0 - t * t
    return np.where(z > 0.0, 1.0, np.exp(np.minimum(z, 0.0)))


def as_mat(x, name: str = "input") -> np.ndarray:
    """Coerce to a 2-D float64 array, promoting a single row"""
    mat = np.asarray(x, dtype=np.float64)
    if mat.ndim == 1:
        mat = mat[None, :]
    if mat.ndim != 2:
        raise ShapeError(name, ("rows", "cols"), mat.shape)
    return mat


def init_mlp_params(spec: MlpSpec, rng: np.random.Generator, final_scale: float = 1.0) -> ParamVector:
    """Scaled-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases"""
    params = ParamVector.from_shapes(spec.block_shapes())
    for i, (fan_in, fan_out) in enumerate(spec.layer_dims):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        if i == spec.num_layers - 1:
            weights *= final_scale
        params.view(f"W{i}")[...] = weights
    return params


def check_layout(spec: MlpSpec, params: ParamVector):
    expected = spec.block_shapes()
    if len(expected) != len(params.layout):
        raise ShapeError("params", (spec.param_count,), (len(params),))
    for (name, shape), block in zip(expected, params.layout):
        if block.name != name or block.shape != shape:
            raise ShapeError(f"layer {name}", shape, block.shape)


def mlp_forward(spec: MlpSpec, params: ParamVector, input) -> Tuple[np.ndarray, MlpCache]:
    x = as_mat(input)
    if x.shape[1] != spec.input_dim:
        raise ShapeError("layer 0 input", (x.shape[0], spec.input_dim), x.shape)
    check_layout(spec, params)

    cache = MlpCache(spec=spec, params=params)
    h = x
    last = spec.num_layers - 1
    for i in range(spec.num_layers):
        cache.layer_inputs.append(h)
        z = h @ params.view(f"W{i}") + params.view(f"b{i}")
        cache.pre_activations.append(z)
        h = z if i == last else _activate(spec.activation, z)

    if not np.all(np.isfinite(h)):
        raise NonFiniteError("mlp output", int(np.argmax(~np.isfinite(h).all(axis=1))))
    cache.output_shape = h.shape
    return h, cache


def mlp_backward(spec: MlpSpec, params: ParamVector, cache: MlpCache, output_grad) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (flat parameter gradient laid out like params, input gradient)"""
    if cache.params is not params or cache.spec != spec:
        raise StaleCacheError("cache was produced by a different forward pass")
    grad = as_mat(output_grad, "output_grad")
    if grad.shape != tuple(cache.output_shape):
        raise ShapeError("output_grad", cache.output_shape, grad.shape)

    param_grad = params.zeros_like()
    last = spec.num_layers - 1
    for i in range(last, -1, -1):
        if i != last:
            grad = grad * _activation_grad(spec.activation, cache.pre_activations[i])
        param_grad.view(f"W{i}")[...] = cache.layer_inputs[i].T @ grad
        param_grad.view(f"b{i}")[...] = grad.sum(axis=0)
        grad = grad @ params.view(f"W{i}").T
    return param_grad.values, grad
