"""Dense state vectors, influence-matrix containers and index conventions.

Index conventions (used by every module):

* A state on ``L`` chain sites is a complex vector of length ``2**L``; site 1
  is the slowest-varying bit, site ``L`` the fastest.  Local basis
  ``|up> = (1, 0)``, so bit value 0 means spin up.
* An influence matrix for ``N`` periods is a state on ``4*N`` temporal sites
  ordered ``(sbar_{2N}, ..., sbar_1, s_1, ..., s_{2N})`` slowest to fastest.
  Chain site ``j <= 2N`` carries ``sbar_{2N+1-j}``; chain site ``2N+m``
  carries ``s_m``.  Hence the chain-major array is the IM vector verbatim.
* The pair-major view groups ``p_n = 2*s_n + sbar_n`` into one base-4 digit
  per time step, ``p_1`` slowest.  Diagonal trajectories are ``p in {0, 3}``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, DimensionError

DEFAULT_QUBIT_CAP = 20

#: serialization tag for the temporal index ordering declared above
IM_ORDERING_TAG = "appendixC"


def qubit_cap() -> int:
    """Dense-vector cap in qubits; override with env var IM_CAP_QUBITS."""
    return int(os.environ.get("IM_CAP_QUBITS", DEFAULT_QUBIT_CAP))


def ensure_capacity(n_sites: int) -> None:
    cap = qubit_cap()
    if n_sites > cap:
        raise CapacityError(f"dense object on {n_sites} qubits exceeds cap {cap}")


def n_sites_of(amplitudes) -> int:
    """Number of sites of a dense vector; validates power-of-two length."""
    length = len(amplitudes)
    n = length.bit_length() - 1
    if length != (1 << n):
        raise DimensionError(f"state length {length} is not a power of two")
    return n


@dataclass
class StateVector:
    """Thin wrapper: dense complex amplitudes over ``2**n_sites`` bitstrings."""

    amplitudes: np.ndarray
    n_sites: int

    @classmethod
    def from_array(cls, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        n = n_sites_of(amps)
        ensure_capacity(n)
        return cls(amps, n)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n_sites)


def all_up(n_sites: int) -> np.ndarray:
    ensure_capacity(n_sites)
    vec = np.zeros(1 << n_sites, dtype=complex)
    vec[0] = 1.0
    return vec


def basis_state(n_sites: int, bits) -> np.ndarray:
    ensure_capacity(n_sites)
    if len(bits) != n_sites:
        raise DimensionError("bit pattern length mismatch")
    idx = 0
    for b in bits:
        idx = (idx << 1) | (int(b) & 1)
    vec = np.zeros(1 << n_sites, dtype=complex)
    vec[idx] = 1.0
    return vec


def random_state(n_sites: int, rng: np.random.Generator) -> np.ndarray:
    ensure_capacity(n_sites)
    vec = rng.standard_normal(1 << n_sites) + 1j * rng.standard_normal(1 << n_sites)
    return vec / np.linalg.norm(vec)


def apply_two_site(vec: np.ndarray, gate: np.ndarray, i: int, j: int) -> np.ndarray:
    """Apply a 4x4 gate to sites ``i`` and ``j`` (0-based) of a dense vector.

    The gate's first tensor factor acts on site ``i``, the second on ``j``.
    """
    n = n_sites_of(vec)
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise DimensionError(f"bad site pair ({i}, {j}) for {n} sites")
    t = np.tensordot(gate.reshape(2, 2, 2, 2), vec.reshape((2,) * n), axes=[[2, 3], [i, j]])
    rest = [k for k in range(n) if k != i and k != j]
    order = [0] * n
    order[i] = 0
    order[j] = 1
    for pos, ax in enumerate(rest):
        order[ax] = 2 + pos
    return np.ascontiguousarray(t.transpose(order)).reshape(-1)


def embed_two_site(gate: np.ndarray, i: int, j: int, n_sites: int) -> np.ndarray:
    """Dense ``2**n x 2**n`` embedding of a 4x4 gate acting on sites i, j."""
    ensure_capacity(2 * n_sites)  # the matrix has 2*n qubits' worth of entries
    eye = np.eye(1 << n_sites, dtype=complex).reshape((2,) * (2 * n_sites))
    t = np.tensordot(gate.reshape(2, 2, 2, 2), eye, axes=[[2, 3], [i, j]])
    rest = [k for k in range(2 * n_sites) if k != i and k != j]
    order = [0] * (2 * n_sites)
    order[i] = 0
    order[j] = 1
    for pos, ax in enumerate(rest):
        order[ax] = 2 + pos
    return t.transpose(order).reshape(1 << n_sites, 1 << n_sites)


# ---------------------------------------------------------------------------
# influence-matrix container and pair-major reshuffling

def forward_axis(n_half: int, m: int) -> int:
    """Chain-tensor axis carrying the forward spin s_m (1-based m)."""
    return 2 * n_half + m - 1


def backward_axis(n_half: int, m: int) -> int:
    """Chain-tensor axis carrying the backward spin sbar_m (1-based m)."""
    return 2 * n_half - m


def to_pair_tensor(amplitudes: np.ndarray, n_half: int) -> np.ndarray:
    """Chain-major IM vector -> tensor of shape (4,)*2N, axis n is p_{n+1}."""
    n4 = 4 * n_half
    t = np.asarray(amplitudes).reshape((2,) * n4)
    perm = []
    for m in range(1, 2 * n_half + 1):
        perm.extend([forward_axis(n_half, m), backward_axis(n_half, m)])
    return np.ascontiguousarray(t.transpose(perm)).reshape((4,) * (2 * n_half))


def from_pair_tensor(pair_tensor: np.ndarray, n_half: int) -> np.ndarray:
    """Inverse of :func:`to_pair_tensor`; returns the flat chain-major vector."""
    n4 = 4 * n_half
    t = pair_tensor.reshape((2,) * n4)
    perm = []
    for m in range(1, 2 * n_half + 1):
        perm.extend([forward_axis(n_half, m), backward_axis(n_half, m)])
    inv = [0] * n4
    for pos, ax in enumerate(perm):
        inv[ax] = pos
    return np.ascontiguousarray(t.transpose(inv)).reshape(-1)


@dataclass
class InfluenceMatrix:
    """Vectorized influence functional over 4N temporal spins.

    ``amplitudes`` follow the chain-major ordering documented at module top;
    ``method`` records the construction route ('circuit', 'bethe', 'fermion',
    or 'file').
    """

    amplitudes: np.ndarray
    n_half: int
    method: str = "circuit"
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).ravel()
        if len(self.amplitudes) != 1 << (4 * self.n_half):
            raise DimensionError(
                f"IM for N={self.n_half} needs length {1 << (4 * self.n_half)}, "
                f"got {len(self.amplitudes)}"
            )

    @property
    def n_sites(self) -> int:
        return 4 * self.n_half

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n_sites)

    def pair_tensor(self) -> np.ndarray:
        return to_pair_tensor(self.amplitudes, self.n_half)


def save_im_json(im: InfluenceMatrix, path: str) -> None:
    payload = {
        "n_half": im.n_half,
        "ordering": IM_ORDERING_TAG,
        "re": ["%.17g" % x for x in im.amplitudes.real],
        "im": ["%.17g" % x for x in im.amplitudes.imag],
        "method": im.method,
    }
    for key in ("digits", "epsilon_ladder", "extrapolation_error"):
        if key in im.meta:
            payload[key] = im.meta[key]
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_im_json(path: str) -> InfluenceMatrix:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("ordering") != IM_ORDERING_TAG:
        raise DimensionError(f"unknown IM ordering tag {payload.get('ordering')!r}")
    amps = np.array([float(x) for x in payload["re"]], dtype=float) + 1j * np.array(
        [float(x) for x in payload["im"]], dtype=float
    )
    meta = {k: payload[k] for k in ("digits", "epsilon_ladder", "extrapolation_error") if k in payload}
    return InfluenceMatrix(amps, int(payload["n_half"]), payload.get("method", "file"), meta)


def max_abs_diff(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(np.asarray(a) - np.asarray(b)).max())


def scalar_aligned_diff(a: np.ndarray, b: np.ndarray) -> tuple[float, complex]:
    """Residual ``min_c |a - c*b|_inf`` (least-squares c) and the scalar used."""
    b = np.asarray(b).ravel()
    a = np.asarray(a).ravel()
    denom = np.vdot(b, b)
    if denom == 0:
        raise DimensionError("cannot align against the zero vector")
    c = np.vdot(b, a) / denom
    return float(np.abs(a - c * b).max()), c
