"""XXZ R-matrix family, the brick-wall gate, and structural identity checks.

The two-site basis order is ``|uu>, |ud>, |du>, |dd>``.  Every R-matrix here
has corner entries 1 and middle block ``[[b, c], [c, b]]`` with
``b(w) = sinh(w)/sinh(w+eta)`` and ``c(w) = sinh(eta)/sinh(w+eta)``, so it is
complex symmetric, commutes with SWAP, and preserves total magnetization.
The physical brick-wall gate is ``SWAP @ R(u)``; at ``eta = i*pi/2`` it equals
``exp(i*J_u*(s+ s- + s- s+))`` with ``J_u = arcsin(-tanh u)``.
"""

from __future__ import annotations

import cmath

import numpy as np

from .errors import PoleError
from .params import POLE_TOL, ModelParams
from .states import embed_two_site

ID2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)

SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)

# projectors onto the symmetric / antisymmetric two-site subspaces
P_SYM = (np.eye(4, dtype=complex) + SWAP) / 2.0
P_SINGLET = (np.eye(4, dtype=complex) - SWAP) / 2.0


def r_matrix(p: ModelParams, w: complex) -> np.ndarray:
    """4x4 R-matrix at spectral argument ``w`` (anisotropy taken from ``p``)."""
    den = cmath.sinh(w + p.eta)
    if abs(den) < POLE_TOL:
        raise PoleError(f"sinh(w+eta) vanishes at w={w}")
    b = cmath.sinh(w) / den
    c = cmath.sinh(p.eta) / den
    out = np.zeros((4, 4), dtype=complex)
    out[0, 0] = out[3, 3] = 1.0
    out[1, 1] = out[2, 2] = b
    out[1, 2] = out[2, 1] = c
    return out


def rcheck(p: ModelParams, w: complex) -> np.ndarray:
    """Braid-form gate SWAP @ R(w); rows/cols in the same two-site basis."""
    return SWAP @ r_matrix(p, w)


def brick_gate(p: ModelParams) -> np.ndarray:
    """The two-site Floquet gate U = SWAP @ R(u)."""
    return rcheck(p, p.u)


def partial_transpose(r: np.ndarray, factor: int) -> np.ndarray:
    """Transpose a 4x4 two-site operator on one tensor factor (0 or 1)."""
    t = r.reshape(2, 2, 2, 2)
    if factor == 0:
        t = t.transpose(2, 1, 0, 3)
    elif factor == 1:
        t = t.transpose(0, 3, 2, 1)
    else:
        raise ValueError("factor must be 0 or 1")
    return t.reshape(4, 4)


def unitarity_residual(p: ModelParams, w: complex) -> float:
    """max |R(w) R(-w) - 1|; zero identically for admissible w."""
    return float(np.abs(r_matrix(p, w) @ r_matrix(p, -w) - np.eye(4)).max())


def yang_baxter_residual(p: ModelParams, v1: complex, v2: complex, v3: complex) -> float:
    """Residual of the braid relation and of its variant transposed on site 3.

    Both are evaluated as 8x8 identities on three sites; returns the larger
    max-norm deviation.
    """
    r12 = embed_two_site(r_matrix(p, v1 - v2), 0, 1, 3)
    r13 = embed_two_site(r_matrix(p, v1 - v3), 0, 2, 3)
    r23 = embed_two_site(r_matrix(p, v2 - v3), 1, 2, 3)
    res_plain = np.abs(r12 @ r13 @ r23 - r23 @ r13 @ r12).max()

    r13t = embed_two_site(partial_transpose(r_matrix(p, v1 - v3), 1), 0, 2, 3)
    r23t = embed_two_site(partial_transpose(r_matrix(p, v2 - v3), 1), 1, 2, 3)
    res_t = np.abs(r12 @ r23t @ r13t - r13t @ r23t @ r12).max()
    return float(max(res_plain, res_t))


def crossing_residual(p: ModelParams, v: complex) -> float:
    """Residual of the crossing relation tying R^t(-v) to sigma^y R(v-eta) sigma^y."""
    den = cmath.sinh(v - p.eta)
    if abs(den) < POLE_TOL:
        raise PoleError(f"sinh(v-eta) vanishes at v={v}")
    lhs = partial_transpose(r_matrix(p, -v), 0)
    pref = cmath.sinh(v) / den
    sy = np.kron(SY, ID2)
    rhs = pref * (sy @ r_matrix(p, v - p.eta) @ sy)
    return float(np.abs(lhs - rhs).max())


def symmetric_degeneracy_operator(p: ModelParams) -> np.ndarray:
    """cosh(eta) * R(eta): entire in eta, proportional to R(eta) away from
    the free-fermion point, and still finite (rank-1 on the middle block) at
    eta = i*pi/2 where R(eta) itself has a pole."""
    out = np.zeros((4, 4), dtype=complex)
    ch = cmath.cosh(p.eta)
    out[0, 0] = out[3, 3] = ch
    out[1, 1] = out[2, 2] = 0.5
    out[1, 2] = out[2, 1] = 0.5
    return out


def degeneracy_projector_check(p: ModelParams, v: complex) -> float:
    """Invariant-subspace residuals behind the transfer-matrix degeneracy.

    Checks, on three sites (0 = auxiliary, 1, 2), that

    * the product R_{01}(v) R_{02}(v-eta) commutes past the symmetric
      projector-like operator on (1,2) exactly as dictated by the braid
      relation at argument difference eta,
    * R_{02}(v-eta) R_{01}(v) maps the symmetric (1,2)-subspace into itself,
    * R_{01}(v) R_{02}(v-eta) maps the singlet into the singlet (no leakage
      into the symmetric subspace).

    Returns the largest of the three max-norm residuals.
    """
    r01 = embed_two_site(r_matrix(p, v), 0, 1, 3)
    r02 = embed_two_site(r_matrix(p, v - p.eta), 0, 2, 3)
    s12 = embed_two_site(symmetric_degeneracy_operator(p), 1, 2, 3)
    psym = embed_two_site(P_SYM, 1, 2, 3)
    psing = embed_two_site(P_SINGLET, 1, 2, 3)

    m_sym_first = r02 @ r01
    m_sing_first = r01 @ r02
    res_comm = np.abs(s12 @ m_sing_first - m_sym_first @ s12).max()
    res_sym = np.abs(psing @ m_sym_first @ psym).max()
    res_sing = np.abs(psym @ m_sing_first @ psing).max()
    return float(max(res_comm, res_sym, res_sing))


def magnetization_leak(r: np.ndarray) -> float:
    """max |entry| connecting different total-S^z two-site sectors."""
    bad = [(0, 1), (0, 2), (0, 3), (3, 1), (3, 2), (1, 0), (2, 0), (3, 0), (1, 3), (2, 3)]
    return float(max(abs(r[i, j]) for i, j in bad))


def free_fermion_angle(w: complex) -> complex:
    """Hopping angle J_w of the gate at eta = i*pi/2: arcsin(-tanh(w))."""
    return cmath.asin(-cmath.tanh(w))
