"""Exact statevector simulator for the angle-embedding + entangling-layer circuit.

Amplitude ordering is big-endian: wire 0 is the most significant bit of the
amplitude index.  All operations are pure; a returned :class:`StateVector` is
never mutated afterwards.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import cos, sin

import numpy as np

from .errors import QubitCapError, ShapeError

MAX_QUBITS = 16
AXES = ("X", "Y", "Z")

# norm drift allowed after an arbitrary gate sequence
NORM_TOL = 1e-12


@dataclass(frozen=True)
class CircuitSpec:
    """Static description of the circuit: register width, depth, embedding axis
    and the CNOT-ring offset."""

    n_qubits: int
    n_layers: int
    embedding_rotation_axis: str = "Y"
    entangler_range: int = 1

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        if self.n_qubits > MAX_QUBITS:
            raise QubitCapError(
                f"n_qubits={self.n_qubits} exceeds the simulator cap of {MAX_QUBITS}"
            )
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        if self.embedding_rotation_axis not in AXES:
            raise ValueError(f"embedding axis must be one of {AXES}")
        if not 1 <= self.entangler_range < max(self.n_qubits, 2):
            raise ValueError(
                f"entangler_range must satisfy 1 <= r < {max(self.n_qubits, 2)}"
            )

    @property
    def weight_shape(self) -> tuple[int, int, int]:
        return (self.n_layers, self.n_qubits, 3)


@dataclass(frozen=True)
class StateVector:
    """Immutable n-qubit state: 2**n complex amplitudes of unit norm."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        if amps.shape != (1 << self.n_qubits,):
            raise ShapeError(
                f"expected {1 << self.n_qubits} amplitudes, got {amps.shape}"
            )
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes, require_normalized: bool = True) -> "StateVector":
        """Build a state from raw amplitudes.

        ``require_normalized=False`` admits subnormalized vectors for desk
        calculations; gates still preserve whatever norm the state has.
        """
        amps = np.asarray(amplitudes, dtype=np.complex128)
        n = int(np.log2(amps.size))
        if 1 << n != amps.size:
            raise ShapeError(f"amplitude count {amps.size} is not a power of two")
        sv = cls(max(n, 1), amps if amps.size > 1 else amps)
        if require_normalized and abs(sv.norm_squared() - 1.0) > 1e-9:
            raise ValueError(f"state norm^2 = {sv.norm_squared()} is not 1")
        return sv

    def norm_squared(self) -> float:
        a = self.amplitudes
        return float(np.sum(a.real * a.real + a.imag * a.imag))

    def probabilities(self) -> np.ndarray:
        a = self.amplitudes
        return a.real * a.real + a.imag * a.imag


def normalize_amplitudes(values) -> np.ndarray:
    """L2-normalize a raw amplitude vector."""
    v = np.asarray(values, dtype=np.complex128)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def rotation_matrix(axis: str, theta: float) -> np.ndarray:
    """2x2 rotation about a Pauli axis, half-angle convention."""
    h = theta / 2.0
    c, s = cos(h), sin(h)
    if axis == "X":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if axis == "Y":
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if axis == "Z":
        return np.array(
            [[complex(c, -s), 0.0], [0.0, complex(c, s)]], dtype=np.complex128
        )
    raise ValueError(f"unknown rotation axis {axis!r}")


# ---------------------------------------------------------------------------
# batched kernels (shared by the single-state API and the gradient paths so
# both produce bit-identical arithmetic)

def _apply_1q_kernel(states: np.ndarray, n: int, wire: int, mats: np.ndarray) -> np.ndarray:
    """Apply 2x2 matrices to one wire of a (B, 2**n) batch.

    ``mats`` is (2, 2) for a shared gate or (B, 2, 2) for per-row gates.
    """
    b = states.shape[0]
    left = 1 << wire
    right = 1 << (n - wire - 1)
    st = states.reshape(b, left, 2, right)
    s0 = st[:, :, 0, :]
    s1 = st[:, :, 1, :]
    if mats.ndim == 2:
        m00, m01, m10, m11 = mats[0, 0], mats[0, 1], mats[1, 0], mats[1, 1]
    else:
        m00 = mats[:, 0, 0, None, None]
        m01 = mats[:, 0, 1, None, None]
        m10 = mats[:, 1, 0, None, None]
        m11 = mats[:, 1, 1, None, None]
    out = np.empty_like(st)
    o0 = np.multiply(m00, s0, out=out[:, :, 0, :])
    o0 += m01 * s1
    o1 = np.multiply(m10, s0, out=out[:, :, 1, :])
    o1 += m11 * s1
    return out.reshape(b, -1)


def _cnot_permutation(n: int, control: int, target: int) -> np.ndarray:
    k = np.arange(1 << n)
    cmask = 1 << (n - 1 - control)
    tmask = 1 << (n - 1 - target)
    return np.where(k & cmask, k ^ tmask, k)


def _apply_cnot_kernel(states: np.ndarray, n: int, control: int, target: int) -> np.ndarray:
    # CNOT is an involution, so gathering through the permutation is exact
    return states[:, _cnot_permutation(n, control, target)]


def _z_signs(n: int, wire: int) -> np.ndarray:
    k = np.arange(1 << n)
    return np.where(k & (1 << (n - 1 - wire)), -1.0, 1.0)


def _expval_kernel(states: np.ndarray, n: int, wire: int) -> np.ndarray:
    probs = states.real * states.real + states.imag * states.imag
    return probs @ _z_signs(n, wire)


def _rot_mats_batch(angles: np.ndarray) -> np.ndarray:
    """Per-row Rot(alpha, beta, gamma) = RZ(alpha) @ RY(beta) @ RZ(gamma).

    ``angles`` is (B, 3); returns (B, 2, 2) via the closed-form product
    [[e^{-i(a+g)/2} cos(b/2), -e^{-i(a-g)/2} sin(b/2)],
     [e^{ i(a-g)/2} sin(b/2),  e^{ i(a+g)/2} cos(b/2)]].
    """
    a, beta, g = angles[:, 0], angles[:, 1], angles[:, 2]
    c, s = np.cos(beta / 2.0), np.sin(beta / 2.0)
    plus = np.exp(-0.5j * (a + g))
    minus = np.exp(-0.5j * (a - g))
    mats = np.empty((angles.shape[0], 2, 2), dtype=np.complex128)
    mats[:, 0, 0] = plus * c
    mats[:, 0, 1] = -minus * s
    mats[:, 1, 0] = np.conj(minus) * s
    mats[:, 1, 1] = np.conj(plus) * c
    return mats


def _embed_kernel(features: np.ndarray, spec: CircuitSpec) -> np.ndarray:
    """Angle-embed a (B, n_qubits) feature batch from |0...0>."""
    b, n = features.shape
    states = np.zeros((b, 1 << n), dtype=np.complex128)
    states[:, 0] = 1.0
    for w in range(n):
        h = features[:, w] / 2.0
        c, s = np.cos(h), np.sin(h)
        mats = np.zeros((b, 2, 2), dtype=np.complex128)
        if spec.embedding_rotation_axis == "Y":
            mats[:, 0, 0] = c
            mats[:, 0, 1] = -s
            mats[:, 1, 0] = s
            mats[:, 1, 1] = c
        elif spec.embedding_rotation_axis == "X":
            mats[:, 0, 0] = c
            mats[:, 0, 1] = -1j * s
            mats[:, 1, 0] = -1j * s
            mats[:, 1, 1] = c
        else:
            mats[:, 0, 0] = c - 1j * s
            mats[:, 1, 1] = c + 1j * s
        states = _apply_1q_kernel(states, n, w, mats)
    return states


def _entangle_kernel(states: np.ndarray, weights: np.ndarray, spec: CircuitSpec) -> np.ndarray:
    """Apply the entangling layers to a (B, 2**n) batch.

    ``weights`` is (n_layers, n_qubits, 3) shared across the batch, or
    (B, n_layers, n_qubits, 3) with one weight set per row.
    """
    n = spec.n_qubits
    per_row = weights.ndim == 4
    for layer in range(spec.n_layers):
        for w in range(n):
            if per_row:
                mats = _rot_mats_batch(weights[:, layer, w, :])
            else:
                mats = _rot_mats_batch(weights[layer, w, :][None, :])[0]
            states = _apply_1q_kernel(states, n, w, mats)
        if n == 2:
            # a full ring on two wires would pair each CNOT with its reverse;
            # a single CNOT per layer is the conventional two-wire ring
            states = _apply_cnot_kernel(states, n, 0, 1)
        elif n > 2:
            for w in range(n):
                states = _apply_cnot_kernel(states, n, w, (w + spec.entangler_range) % n)
    return states


def forward_batch(features: np.ndarray, weights: np.ndarray, spec: CircuitSpec) -> np.ndarray:
    """Expectation values <Z_i> for a batch of circuits.

    ``features`` is (B, n_qubits); ``weights`` is shared (L, n, 3) or per-row
    (B, L, n, 3).  Returns (B, n_qubits).
    """
    features = np.asarray(features, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != spec.n_qubits:
        raise ShapeError(f"features must be (B, {spec.n_qubits}), got {features.shape}")
    _check_weights(weights[0] if weights.ndim == 4 else weights, spec)
    states = _embed_kernel(features, spec)
    states = _entangle_kernel(states, weights, spec)
    probs = states.real * states.real + states.imag * states.imag
    out = np.empty((features.shape[0], spec.n_qubits))
    for w in range(spec.n_qubits):
        out[:, w] = probs @ _z_signs(spec.n_qubits, w)
    return out


def _check_weights(weights: np.ndarray, spec: CircuitSpec) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != spec.weight_shape:
        raise ShapeError(
            f"weights must have shape {spec.weight_shape}, got {weights.shape}"
        )
    if not np.all(np.isfinite(weights)):
        raise ValueError("weights must be finite")
    return weights


def random_weights(spec: CircuitSpec, rng: np.random.Generator) -> np.ndarray:
    """Trainable rotation angles, uniform in [0, 2*pi)."""
    return rng.uniform(0.0, 2.0 * np.pi, size=spec.weight_shape)


# ---------------------------------------------------------------------------
# single-state API

def init_zero_state(n_qubits: int) -> StateVector:
    """The |0...0> register."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    if n_qubits > MAX_QUBITS:
        raise QubitCapError(
            f"n_qubits={n_qubits} exceeds the simulator cap of {MAX_QUBITS}"
        )
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def _check_wire(state: StateVector, wire: int) -> None:
    if not 0 <= wire < state.n_qubits:
        raise IndexError(f"wire {wire} out of range for {state.n_qubits} qubits")


def apply_single_qubit_rotation(
    state: StateVector, wire: int, axis: str, theta: float
) -> StateVector:
    """Rotate one wire about a Pauli axis."""
    _check_wire(state, wire)
    if not np.isfinite(theta):
        raise ValueError("theta must be finite")
    mat = rotation_matrix(axis, theta)
    out = _apply_1q_kernel(state.amplitudes[None, :], state.n_qubits, wire, mat)
    return StateVector(state.n_qubits, out[0])


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    """Controlled-NOT between two wires."""
    _check_wire(state, control)
    _check_wire(state, target)
    if control == target:
        raise ValueError("control and target wires must differ")
    out = _apply_cnot_kernel(state.amplitudes[None, :], state.n_qubits, control, target)
    return StateVector(state.n_qubits, out[0])


def angle_embed(features, spec: CircuitSpec) -> StateVector:
    """Encode one feature per wire as a rotation from |0...0>."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (spec.n_qubits,):
        raise ShapeError(
            f"expected {spec.n_qubits} features, got shape {features.shape}"
        )
    states = _embed_kernel(features[None, :], spec)
    return StateVector(spec.n_qubits, states[0])


def apply_entangling_layers(
    state: StateVector, weights, spec: CircuitSpec
) -> StateVector:
    """Per-wire Rot(alpha, beta, gamma) rotations followed by a CNOT ring,
    repeated for each layer."""
    weights = _check_weights(np.asarray(weights, dtype=np.float64), spec)
    if state.n_qubits != spec.n_qubits:
        raise ShapeError("state width does not match spec")
    out = _entangle_kernel(state.amplitudes[None, :], weights, spec)
    return StateVector(state.n_qubits, out[0])


def expval_z(state: StateVector, wire: int) -> float:
    """Pauli-Z expectation of one wire, in [-1, 1]."""
    _check_wire(state, wire)
    return float(_expval_kernel(state.amplitudes[None, :], state.n_qubits, wire)[0])


def quantum_layer_forward(features, weights, spec: CircuitSpec) -> np.ndarray:
    """The quantum layer: embed, entangle, read <Z_i> for every wire."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (spec.n_qubits,):
        raise ShapeError(
            f"expected {spec.n_qubits} features, got shape {features.shape}"
        )
    weights = _check_weights(np.asarray(weights, dtype=np.float64), spec)
    return forward_batch(features[None, :], weights, spec)[0]
