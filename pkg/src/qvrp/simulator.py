"""Dense statevector simulation of the layered RY/CNOT ansatz.

Bit order: qubit k is bit k of the basis index (qubit 0 least significant).
Gate kernels operate in place on a (batch, 2**n_q) amplitude array; the
batch axis lets one call evaluate many parameter vectors at once, which is
what makes parameter-shift gradients cheap.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

try:
    from numba import njit, prange

    _NUMBA = True
except ImportError:  # pragma: no cover
    _NUMBA = False

__all__ = [
    "StateVector",
    "AnsatzSpec",
    "ShotCounts",
    "PRNG_ALGORITHM",
    "make_rng",
    "prng_metadata",
    "build_ansatz",
    "run_statevector",
    "run_statevector_batch",
    "basis_probabilities",
    "sample",
    "apply_h",
    "apply_x",
    "apply_ry",
    "apply_cnot",
    "dump_statevector",
    "load_statevector",
]

PRNG_ALGORITHM = "PCG64"

_SQRT_HALF = 1.0 / np.sqrt(2.0)


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Deterministic generator for stream (seed, key...); streams with
    different keys are statistically independent."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def prng_metadata() -> dict:
    return {"algorithm": PRNG_ALGORITHM, "numpy": np.__version__}


@dataclass
class StateVector:
    """Amplitudes over the 2**n_q computational basis states."""

    n_q: int
    amplitudes: np.ndarray

    @classmethod
    def zero(cls, n_q: int) -> "StateVector":
        amps = np.zeros(1 << n_q, dtype=np.complex128)
        amps[0] = 1.0
        return cls(n_q, amps)

    def norm_error(self) -> float:
        return abs(float(np.sum(np.abs(self.amplitudes) ** 2)) - 1.0)

    def copy(self) -> "StateVector":
        return StateVector(self.n_q, self.amplitudes.copy())


@dataclass(frozen=True)
class AnsatzSpec:
    """Hadamard wall, then `layers` blocks of the entangler followed by one
    RY rotation per qubit. entangler holds one block's (control, target)
    pairs, applied identically in every block."""

    n_q: int
    layers: int
    entangler: tuple[tuple[int, int], ...]

    @property
    def parameter_count(self) -> int:
        return self.n_q * self.layers

    def __post_init__(self):
        for c, t in self.entangler:
            if c == t or not (0 <= c < self.n_q) or not (0 <= t < self.n_q):
                raise ValueError(f"bad entangler pair ({c}, {t})")


def build_ansatz(n_q: int, layers: int) -> AnsatzSpec:
    """Linear-chain entangler: CNOT(0,1), CNOT(1,2), ...; empty for one qubit."""
    if n_q < 1 or layers < 1:
        raise ValueError("n_q and layers must be >= 1")
    chain = tuple((q, q + 1) for q in range(n_q - 1))
    return AnsatzSpec(n_q=n_q, layers=layers, entangler=chain)


# -- in-place kernels over (batch, 2**n_q) ----------------------------------

def _single_views(states: np.ndarray, q: int):
    batch = states.shape[0]
    psi = states.reshape(batch, -1, 2, 1 << q)
    return psi[:, :, 0, :], psi[:, :, 1, :]


def _h_batch(states: np.ndarray, q: int):
    v0, v1 = _single_views(states, q)
    a = v0.copy()
    v0 += v1
    v0 *= _SQRT_HALF
    v1 *= -1.0
    v1 += a
    v1 *= _SQRT_HALF


def _x_batch(states: np.ndarray, q: int):
    v0, v1 = _single_views(states, q)
    a = v0.copy()
    v0[:] = v1
    v1[:] = a


def _ry_batch(states: np.ndarray, q: int, angles: np.ndarray):
    # angles has one entry per batch row
    half = np.asarray(angles, dtype=np.float64) / 2.0
    c = np.cos(half)[:, None, None]
    s = np.sin(half)[:, None, None]
    v0, v1 = _single_views(states, q)
    a = v0.copy()
    v0 *= c
    v0 -= s * v1
    v1 *= c
    v1 += s * a


def _cnot_batch(states: np.ndarray, control: int, target: int):
    hi, lo = max(control, target), min(control, target)
    batch = states.shape[0]
    psi = states.reshape(batch, -1, 2, 1 << (hi - lo - 1), 2, 1 << lo)
    if control == hi:
        a = psi[:, :, 1, :, 0, :].copy()
        psi[:, :, 1, :, 0, :] = psi[:, :, 1, :, 1, :]
        psi[:, :, 1, :, 1, :] = a
    else:
        a = psi[:, :, 0, :, 1, :].copy()
        psi[:, :, 0, :, 1, :] = psi[:, :, 1, :, 1, :]
        psi[:, :, 1, :, 1, :] = a


if _NUMBA:
    # Hot path for circuit execution: fused single-pass kernels on the real
    # (batch, 2**n_q) array, work split over flattened amplitude pairs.

    @njit(parallel=True, cache=True)
    def _nb_ry(states, q, cos_v, sin_v):  # pragma: no cover - numba
        batch, dim = states.shape
        tk = 1 << q
        half = dim >> 1
        for t in prange(batch * half):
            b = t // half
            g = t - b * half
            i0 = ((g >> q) << (q + 1)) + (g & (tk - 1))
            i1 = i0 + tk
            a0 = states[b, i0]
            a1 = states[b, i1]
            states[b, i0] = cos_v[b] * a0 - sin_v[b] * a1
            states[b, i1] = sin_v[b] * a0 + cos_v[b] * a1

    @njit(parallel=True, cache=True)
    def _nb_cnot(states, control, target):  # pragma: no cover - numba
        batch, dim = states.shape
        lo = min(control, target)
        hi = max(control, target)
        quarter = dim >> 2
        lo_mask = (1 << lo) - 1
        hi_mask = (1 << hi) - 1
        for t in prange(batch * quarter):
            b = t // quarter
            g = t - b * quarter
            x = ((g >> lo) << (lo + 1)) + (g & lo_mask)
            y = ((x >> hi) << (hi + 1)) + (x & hi_mask)
            i0 = y + (1 << control)
            i1 = i0 + (1 << target)
            a = states[b, i0]
            states[b, i0] = states[b, i1]
            states[b, i1] = a


# -- gate-level API on a single state ----------------------------------------

def apply_h(sv: StateVector, q: int):
    _h_batch(sv.amplitudes[None, :], q)


def apply_x(sv: StateVector, q: int):
    _x_batch(sv.amplitudes[None, :], q)


def apply_ry(sv: StateVector, q: int, angle: float):
    _ry_batch(sv.amplitudes[None, :], q, np.array([angle]))


def apply_cnot(sv: StateVector, control: int, target: int):
    _cnot_batch(sv.amplitudes[None, :], control, target)


# -- circuit execution --------------------------------------------------------

def run_statevector_batch(spec: AnsatzSpec, thetas) -> np.ndarray:
    """Amplitudes for each row of a (batch, parameter_count) angle matrix.

    Parameters are consumed layer-major: row element layer*n_q + q drives
    the RY on qubit q in that layer.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    batch, n_par = thetas.shape
    if n_par != spec.parameter_count:
        raise ValueError(f"expected {spec.parameter_count} parameters, got {n_par}")
    # H, RY and CNOT are real matrices, so the circuit stays in R^(2^n):
    # simulate in float64 (exact) and widen to complex at the end. The
    # Hadamard wall on |0..0> is simply the uniform vector.
    states = np.full((batch, 1 << spec.n_q), 2.0 ** (-spec.n_q / 2.0), dtype=np.float64)
    for layer in range(spec.layers):
        for control, target in spec.entangler:
            _cnot_batch(states, control, target)
        base = layer * spec.n_q
        for q in range(spec.n_q):
            _ry_batch(states, q, thetas[:, base + q])
    return states.astype(np.complex128)


def run_statevector(spec: AnsatzSpec, theta) -> StateVector:
    """Deterministic circuit execution from the all-zeros state."""
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    states = run_statevector_batch(spec, theta[None, :])
    return StateVector(spec.n_q, states[0])


def basis_probabilities(sv: StateVector) -> np.ndarray:
    return np.abs(sv.amplitudes) ** 2


@dataclass
class ShotCounts:
    """Computational-basis measurement tallies keyed by basis index."""

    n_q: int
    n_shots: int
    counts: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.counts and sum(self.counts.values()) != self.n_shots:
            raise ValueError("counts must sum to n_shots")

    def to_array(self) -> np.ndarray:
        arr = np.zeros(1 << self.n_q, dtype=np.int64)
        for index, count in self.counts.items():
            arr[index] = count
        return arr


def sample(sv: StateVector, n_shots: int, seed) -> ShotCounts:
    """n_shots independent basis-state draws; seed may be an int or a
    numpy Generator (ints select the package PRNG, see PRNG_ALGORITHM)."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    probs = basis_probabilities(sv)
    probs = probs / probs.sum()
    drawn = rng.multinomial(n_shots, probs)
    nonzero = np.flatnonzero(drawn)
    counts = {int(i): int(drawn[i]) for i in nonzero}
    return ShotCounts(n_q=sv.n_q, n_shots=n_shots, counts=counts)


# -- optional binary dump ------------------------------------------------------

def dump_statevector(sv: StateVector, path):
    """Little-endian binary dump: uint32 n_q, then f64 re/im pairs."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", sv.n_q))
        inter = np.empty(2 * sv.amplitudes.size, dtype="<f8")
        inter[0::2] = sv.amplitudes.real
        inter[1::2] = sv.amplitudes.imag
        fh.write(inter.tobytes())


def load_statevector(path) -> StateVector:
    with open(path, "rb") as fh:
        (n_q,) = struct.unpack("<I", fh.read(4))
        inter = np.frombuffer(fh.read(), dtype="<f8")
    if inter.size != 2 * (1 << n_q):
        raise ValueError("statevector dump has wrong length")
    amps = inter[0::2] + 1j * inter[1::2]
    return StateVector(n_q, amps.astype(np.complex128))
