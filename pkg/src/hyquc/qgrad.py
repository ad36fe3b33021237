"""Gradients of the quantum layer via the parameter-shift rule.

Every trainable angle feeds a rotation gate whose generator has eigenvalues
+-1/2, so the two-point rule with shifts of +-pi/2 is exact for this gate set.
A central finite-difference oracle is provided for cross-checking.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qsim
from .qsim import CircuitSpec

SHIFT = np.pi / 2.0


@dataclass(frozen=True)
class ParameterIndex:
    """Address of one scalar angle inside the weight tensor."""

    layer: int
    wire: int
    axis: int

    def check(self, spec: CircuitSpec) -> None:
        if not 0 <= self.layer < spec.n_layers:
            raise IndexError(f"layer {self.layer} out of range")
        if not 0 <= self.wire < spec.n_qubits:
            raise IndexError(f"wire {self.wire} out of range")
        if not 0 <= self.axis < 3:
            raise IndexError(f"axis {self.axis} out of range")


def _check_output_wire(wire: int, spec: CircuitSpec) -> None:
    if not 0 <= wire < spec.n_qubits:
        raise IndexError(f"output wire {wire} out of range")


def _shifted_pair(weights: np.ndarray, p: ParameterIndex, delta: float) -> np.ndarray:
    """Stack of the two weight tensors with the addressed angle shifted +-delta."""
    pair = np.stack([weights, weights])
    pair[0, p.layer, p.wire, p.axis] += delta
    pair[1, p.layer, p.wire, p.axis] -= delta
    return pair


def param_shift_grad(features, weights, spec: CircuitSpec, p: ParameterIndex,
                     output_wire: int) -> float:
    """d<Z_output_wire>/d(theta_p) = [f(theta+pi/2) - f(theta-pi/2)] / 2."""
    weights = np.asarray(weights, dtype=np.float64)
    p.check(spec)
    _check_output_wire(output_wire, spec)
    features = np.asarray(features, dtype=np.float64)
    pair = _shifted_pair(weights, p, SHIFT)
    f = qsim.forward_batch(np.broadcast_to(features, (2, spec.n_qubits)), pair, spec)
    return float((f[0, output_wire] - f[1, output_wire]) / 2.0)


def quantum_jacobian(features, weights, spec: CircuitSpec) -> np.ndarray:
    """All shift-rule derivatives, indexed [output_wire][layer][wire][axis].

    Uses 2 * n_layers * n_qubits * 3 circuit evaluations; every output wire is
    read from the same pair of evaluations.
    """
    features = np.asarray(features, dtype=np.float64)
    return jacobian_batch(features[None, :], weights, spec)[0]


def jacobian_batch(features: np.ndarray, weights, spec: CircuitSpec) -> np.ndarray:
    """Per-sample jacobians for a (B, n_qubits) feature batch.

    Returns (B, n_qubits, n_layers, n_qubits, 3).  All shifted circuits are
    evaluated as one batched forward pass.
    """
    features = np.asarray(features, dtype=np.float64)
    weights = qsim._check_weights(np.asarray(weights, dtype=np.float64), spec)
    m = features.shape[0]
    n, layers = spec.n_qubits, spec.n_layers
    n_params = layers * n * 3

    variants = np.broadcast_to(weights, (2 * n_params,) + spec.weight_shape).copy()
    flat = variants.reshape(2 * n_params, n_params)
    idx = np.arange(n_params)
    flat[2 * idx, idx] += SHIFT
    flat[2 * idx + 1, idx] -= SHIFT

    # each sample's embedding is shared by all of its shifted circuits
    embedded = qsim._embed_kernel(features, spec)
    states = np.repeat(embedded, 2 * n_params, axis=0)
    w_all = np.tile(variants, (m, 1, 1, 1))
    states = qsim._entangle_kernel(states, w_all, spec)
    probs = states.real * states.real + states.imag * states.imag
    f = np.empty((states.shape[0], n))
    for w in range(n):
        f[:, w] = probs @ qsim._z_signs(n, w)
    f = f.reshape(m, n_params, 2, n)
    grads = (f[:, :, 0, :] - f[:, :, 1, :]) / 2.0  # (m, n_params, n_out)
    return np.transpose(grads, (0, 2, 1)).reshape(m, n, layers, n, 3)


def finite_diff_oracle(features, weights, spec: CircuitSpec, p: ParameterIndex,
                       output_wire: int, h: float = 1e-5) -> float:
    """Central difference [f(theta+h) - f(theta-h)] / 2h, the test oracle."""
    if not 0.0 < h <= 1e-2:
        raise ValueError("h must be in (0, 1e-2]")
    weights = np.asarray(weights, dtype=np.float64)
    p.check(spec)
    _check_output_wire(output_wire, spec)
    features = np.asarray(features, dtype=np.float64)
    pair = _shifted_pair(weights, p, h)
    f = qsim.forward_batch(np.broadcast_to(features, (2, spec.n_qubits)), pair, spec)
    return float((f[0, output_wire] - f[1, output_wire]) / (2.0 * h))
