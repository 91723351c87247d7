"""Fermionic route to the influence matrix at the XX anisotropy point.

At eta = i*pi/2 the dual transfer operator conserves fermion number after a
Jordan-Wigner transform of the 4N-site temporal chain, and it acts on single
fermions through matrices we know in closed form.  This module provides

* the single-particle transfer blocks in the Keldysh-rotated (classical /
  quantum) basis, with their lower / upper triangular structure,
* the left and right hopping generators that commute with those blocks,
* Jordan chains of defective matrices via the adjugate-expansion recurrence,
* number-conserving Gaussian operators assembled from determinant minors,
* the influence matrix itself as a Slater state over 2N causal mode vectors.

Fermion convention: site j (1-based) of the temporal chain maps to qubit j
(site 1 is the slowest index).  Creation operators carry an alternating sign,

    c_j^+  =  (-1)^(j+1) (prod_{k<j} sigma^z_k) sigma^-_j,

i.e. the plain Jordan-Wigner string times (-1)^(j+1).  In this gauge, and
only in this gauge, the closed-form transfer blocks below are exactly the
single-particle conjugation matrices of the dual ("tilde") transfer operator,
and the alternating-sign hopping generators take their stated form.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CapacityError,
    DegenerateError,
    DimensionError,
    LogBranchError,
    NotEigenvalueError,
    PoleError,
    RangeError,
)
from .params import ModelParams
from .states import InfluenceMatrix, ensure_capacity
from . import jordan_basis

SECTORS = ("cl", "q")
SIDES = ("left", "right")
PARITIES = ("even", "odd")

#: dense many-body operators are capped at this many chain sites
DENSE_FERMION_MAX_SITES = 12

#: jordan_chain refuses larger matrices; the adjugate recurrence loses
#: accuracy well before float64 overflows, so fail loudly instead
JORDAN_CHAIN_MAX_DIM = 64

_POLE_EPS = 1e-12


def _require_xx(p: ModelParams) -> None:
    if not p.is_free_fermion:
        raise PoleError(
            "fermionic route needs the XX point eta = i*pi/2 (mod 2*pi*i), "
            f"got eta={p.eta}"
        )


def _guard_poles(p: ModelParams, v: complex) -> None:
    u = p.u
    for label, val in (
        ("cosh(v)", np.cosh(v)),
        ("sinh(v)", np.sinh(v)),
        ("cosh(u-v)", np.cosh(u - v)),
        ("sinh(u-v)", np.sinh(u - v)),
    ):
        if abs(val) < _POLE_EPS:
            raise PoleError(f"spectral point v={v} sits on a pole: {label} ~ 0")


# ---------------------------------------------------------------------------
# closed-form single-particle data


def single_particle_transfer(p: ModelParams, v: complex, sector: str) -> np.ndarray:
    """Single-particle block of the dual transfer operator, shape (2N, 2N).

    The classical block is lower triangular, the quantum block upper
    triangular.  Rows/columns follow the Keldysh-rotated chain modes 1..2N.
    All entries are purely imaginary for real u, v.
    """
    _require_xx(p)
    _guard_poles(p, v)
    if sector not in SECTORS:
        raise ValueError(f"sector must be one of {SECTORS}, got {sector!r}")
    u = p.u
    d = 2 * p.n_half
    m = np.zeros((d, d), dtype=complex)
    if sector == "cl":
        lam = np.tanh(v) / np.tanh(u - v)
        for c in range(1, d + 1):
            m[c - 1, c - 1] = -1j / np.tanh(u - v) if c % 2 else 1j * np.tanh(v)
            for r in range(c + 1, d + 1):
                off = r - c
                if off % 2 == 0:
                    k = off // 2
                    if c % 2:
                        m[r - 1, c - 1] = -1j * lam ** (k - 1) * np.tanh(v) / np.sinh(u - v) ** 2
                    else:
                        m[r - 1, c - 1] = -1j * lam ** (k - 1) / (np.tanh(u - v) * np.cosh(v) ** 2)
                else:
                    k = (off + 1) // 2
                    m[r - 1, c - 1] = -1j * lam ** (k - 1) / (np.cosh(v) * np.sinh(u - v))
    else:
        lam = np.tanh(u - v) / np.tanh(v)
        for r in range(1, d + 1):
            m[r - 1, r - 1] = -1j * np.tanh(u - v) if r % 2 else 1j / np.tanh(v)
            for c in range(r + 1, d + 1):
                off = c - r
                if off % 2 == 0:
                    k = off // 2
                    if r % 2:
                        m[r - 1, c - 1] = 1j * lam ** (k - 1) / (np.tanh(v) * np.cosh(u - v) ** 2)
                    else:
                        m[r - 1, c - 1] = 1j * lam ** (k - 1) * np.tanh(u - v) / np.sinh(v) ** 2
                else:
                    k = (off + 1) // 2
                    m[r - 1, c - 1] = 1j * lam ** (k - 1) / (np.sinh(v) * np.cosh(u - v))
    return m


def hopping_generator(p: ModelParams, side: str, sector: str) -> np.ndarray:
    """Spectral-parameter-independent generator commuting with the transfer block.

    Each generator has eigenvalues 0 and 1, algebraic multiplicity N each,
    and a single length-N Jordan chain per eigenvalue.  'left' and 'right'
    refer to the two boundaries of the Keldysh-rotated mode chain.
    """
    _require_xx(p)
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}, got {side!r}")
    if sector not in SECTORS:
        raise ValueError(f"sector must be one of {SECTORS}, got {sector!r}")
    s = 1.0 / math.cosh(p.u)
    d = 2 * p.n_half
    h = np.zeros((d, d))
    # cl is lower triangular, q upper; left/right swap the unit diagonal parity
    for i in range(1, d + 1):
        if sector == "cl":
            if side == "left":
                if i % 2 == 0:
                    h[i - 1, i - 1] = 1.0
                if i < d:
                    h[i, i - 1] = -s
                if i % 2 and i + 2 <= d:
                    h[i + 1, i - 1] = 1.0
            else:
                if i % 2:
                    h[i - 1, i - 1] = 1.0
                if i < d:
                    h[i, i - 1] = s
                if i % 2 == 0 and i + 2 <= d:
                    h[i + 1, i - 1] = 1.0
        else:
            if side == "left":
                if i % 2 == 0:
                    h[i - 1, i - 1] = 1.0
                if i < d:
                    h[i - 1, i] = s
                if i % 2 and i + 2 <= d:
                    h[i - 1, i + 1] = 1.0
            else:
                if i % 2:
                    h[i - 1, i - 1] = 1.0
                if i < d:
                    h[i - 1, i] = -s
                if i % 2 == 0 and i + 2 <= d:
                    h[i - 1, i + 1] = 1.0
    return h


_EIGEN_TABLE = {
    ("cl", "left", 0): lambda u, v: -1j / np.tanh(u - v),
    ("cl", "left", 1): lambda u, v: 1j * np.tanh(v),
    ("cl", "right", 0): lambda u, v: 1j * np.tanh(v),
    ("cl", "right", 1): lambda u, v: -1j / np.tanh(u - v),
    ("q", "left", 1): lambda u, v: 1j / np.tanh(v),
    ("q", "left", 0): lambda u, v: -1j * np.tanh(u - v),
    ("q", "right", 1): lambda u, v: -1j * np.tanh(u - v),
    ("q", "right", 0): lambda u, v: 1j / np.tanh(v),
}


def block_transfer_eigenvalue(
    p: ModelParams, v: complex, sector: str, side: str, hop_eigenvalue: int
) -> complex:
    """Transfer-block eigenvalue paired with a hopping-generator root space.

    The generator's eigenvalue-0 and eigenvalue-1 root spaces are invariant
    under the transfer block; this returns the transfer eigenvalue carried by
    the requested root space.  Note the left and right generators pair the
    two transfer eigenvalues oppositely.
    """
    _require_xx(p)
    _guard_poles(p, v)
    key = (sector, side, hop_eigenvalue)
    if key not in _EIGEN_TABLE:
        raise ValueError(f"no root space for {key}")
    return complex(_EIGEN_TABLE[key](p.u, v))


def vacuum_eigenvalue(p: ModelParams, v: complex) -> complex:
    """Eigenvalue of the dual transfer operator on the all-up product state."""
    _require_xx(p)
    _guard_poles(p, v)
    return complex((np.tanh(v) * np.tanh(p.u - v)) ** p.n_half)


def sector_prefactor(p: ModelParams, v: complex, parity: str) -> complex:
    """Scalar multiplying the Gaussian on the given fermion-parity sector."""
    if parity not in PARITIES:
        raise ValueError(f"parity must be one of {PARITIES}, got {parity!r}")
    a = vacuum_eigenvalue(p, v)
    if parity == "even":
        return a
    q2 = p.q_weight**2
    return a * (q2 - 1.0) / (q2 + 1.0)


# ---------------------------------------------------------------------------
# Keldysh rotation


def keldysh_mixing(p: ModelParams, parity: str) -> tuple[complex, complex]:
    """Mirror-mode mixing ratios (classical, quantum) for a parity sector.

    Chain site i pairs with its mirror 4N+1-i; the rotated creation modes are
    c_i^+ + x c_{4N+1-i}^+ with x the returned ratio.  The classical ratio is
    -1/q^2 in both sectors; the quantum ratio is +1 (even) or -1 (odd).  At
    q = 1 the odd-parity rotation degenerates.
    """
    _require_xx(p)
    if parity not in PARITIES:
        raise ValueError(f"parity must be one of {PARITIES}, got {parity!r}")
    q2 = p.q_weight**2
    x_cl = -1.0 / q2
    y_q = 1.0 if parity == "even" else -1.0
    if abs(x_cl - y_q) < 1e-12:
        raise DegenerateError(f"Keldysh rotation degenerates at q={p.q_weight} ({parity})")
    return complex(x_cl), complex(y_q)


def keldysh_rotation(p: ModelParams, parity: str) -> tuple[np.ndarray, np.ndarray]:
    """Rotation matrices (V, W) with creation rows V and annihilation rows W.

    V has 4N rows: rows 0..2N-1 are the classical modes, rows 2N..4N-1 the
    quantum modes, each a unit vector supported on a chain site i and its
    mirror (at q = 1 the even-parity classical mode is (c_i^+ - c_ibar^+) /
    sqrt(2)).  W is the inverse transpose, so V W^T = 1 and rotated modes
    obey canonical anticommutation.
    """
    x_cl, y_q = keldysh_mixing(p, parity)
    sites = p.n_legs
    half = sites // 2
    norm_cl = math.sqrt(1.0 + abs(x_cl) ** 2)
    norm_q = math.sqrt(1.0 + abs(y_q) ** 2)
    v = np.zeros((sites, sites), dtype=complex)
    for i in range(half):
        mirror = sites - 1 - i
        v[i, i] = 1.0 / norm_cl
        v[i, mirror] = x_cl / norm_cl
        v[half + i, i] = 1.0 / norm_q
        v[half + i, mirror] = y_q / norm_q
    det2 = y_q - x_cl  # per-pair 2x2 determinant before normalization
    w = np.zeros_like(v)
    for i in range(half):
        mirror = sites - 1 - i
        w[i, i] = norm_cl * y_q / det2
        w[i, mirror] = -norm_cl / det2
        w[half + i, i] = -norm_q * x_cl / det2
        w[half + i, mirror] = norm_q / det2
    return v, w


def chain_transfer_matrix(p: ModelParams, v: complex, parity: str) -> np.ndarray:
    """Single-particle transfer matrix in the chain-site frame, shape (4N, 4N).

    Conjugating one creation operator through the dual transfer operator on
    the given parity sector sends c_i^+ to sum_j M[j, i] c_j^+ with M the
    returned matrix (site ordering 1..4N, alternating-sign gauge).
    """
    vv, ww = keldysh_rotation(p, parity)
    m_cl = single_particle_transfer(p, v, "cl")
    m_q = single_particle_transfer(p, v, "q")
    half = p.n_legs // 2
    blocks = np.zeros((p.n_legs, p.n_legs), dtype=complex)
    blocks[:half, :half] = m_cl
    blocks[half:, half:] = m_q
    return vv.T @ blocks @ ww


# ---------------------------------------------------------------------------
# Jordan chains via the adjugate expansion


def _faddeev_leverrier(a: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Characteristic polynomial and adjugate coefficients, eigenvalue-free.

    Returns (coeffs, adj) with coeffs[k] multiplying x^k (ascending) and
    adj(x*1 - a) = sum_k adj[k] x^k.  Purely polynomial in the entries, so it
    stays meaningful next to defective eigenvalues where root-finding smears.
    """
    n = a.shape[0]
    coeffs = np.zeros(n + 1, dtype=complex)
    coeffs[n] = 1.0
    adj: list[np.ndarray] = [None] * n
    b = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        adj[n - k] = b
        ab = a @ b
        coeffs[n - k] = -np.trace(ab) / k
        b = ab + coeffs[n - k] * np.eye(n)
    return coeffs, adj


def _poly_derivative_at(coeffs: np.ndarray, lam: complex, m: int) -> tuple[complex, float]:
    """p^(m)(lam)/m! together with the absolute-term sum for a zero test."""
    n = len(coeffs) - 1
    val = 0.0 + 0.0j
    mag = 0.0
    for k in range(m, n + 1):
        term = math.comb(k, m) * coeffs[k] * lam ** (k - m)
        val += term
        mag += abs(term)
    return val, mag


def jordan_chain(a: np.ndarray, lam: complex, seed: np.ndarray | None = None) -> np.ndarray:
    """Jordan chain of ``a`` at eigenvalue ``lam`` from the adjugate expansion.

    Writes adj(x*1 - a) = sum_m B_m (x - lam)^m.  For an eigenvalue of
    geometric multiplicity one and algebraic multiplicity mu, the rows
    returned are [B_0 w, ..., B_{mu-1} w] for a seed w: row 1 is the
    eigenvector and (a - lam) maps every later row to the one before it, so
    each leading slice spans an invariant subspace.  The default seed is the
    first or last coordinate vector, chosen by triangularity.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if a.shape != (n, n):
        raise DimensionError(f"need a square matrix, got {a.shape}")
    if n > JORDAN_CHAIN_MAX_DIM:
        raise RangeError(f"adjugate recurrence capped at dim {JORDAN_CHAIN_MAX_DIM}, got {n}")
    coeffs, adj = _faddeev_leverrier(a)
    mult = 0
    while mult < n:
        val, mag = _poly_derivative_at(coeffs, lam, mult)
        if abs(val) > 1e-8 * max(mag, 1e-300):
            break
        mult += 1
    if mult == 0:
        raise NotEigenvalueError(f"{lam} is not an eigenvalue (char poly nonzero)")
    if seed is None:
        lower = np.abs(np.triu(a, 1)).max() < 1e-12 * max(np.abs(a).max(), 1.0)
        seed = np.zeros(n)
        seed[0 if lower else n - 1] = 1.0
    seed = np.asarray(seed, dtype=complex)

    b_seed = np.zeros((mult, n), dtype=complex)
    for k in range(n):
        vec = adj[k] @ seed
        for m in range(min(mult, k + 1)):
            b_seed[m] += math.comb(k, m) * lam ** (k - m) * vec
    top = np.abs(b_seed[0]).max()  # eigenvector row
    if top < 1e-9 * max(np.abs(b_seed).max(), 1.0):
        raise DegenerateError("seed vector is deficient for this eigenvalue")
    return b_seed / top


# ---------------------------------------------------------------------------
# dense many-body operators (occupation = qubit basis, gauge included)


def _check_dense_cap(sites: int) -> None:
    if sites > DENSE_FERMION_MAX_SITES:
        raise CapacityError(
            f"dense fermion operators capped at {DENSE_FERMION_MAX_SITES} sites, got {sites}"
        )


def _gauge_signs(sites: int) -> np.ndarray:
    """Alternating creation-operator gauge, +1 on odd chain sites (1-based)."""
    return np.array([1.0 if j % 2 == 0 else -1.0 for j in range(sites)])


def _string_masks(sites: int) -> np.ndarray:
    """mask[a] selects the bits of chain sites strictly before site a."""
    dim = 1 << sites
    return np.array([(dim - 1) ^ ((1 << (sites - a)) - 1) for a in range(sites)], dtype=np.uint64)


def quadratic_operator(coeff: np.ndarray, sites: int) -> np.ndarray:
    """Dense matrix of sum_ij coeff[i, j] c_i^+ c_j in the qubit basis."""
    _check_dense_cap(sites)
    coeff = np.asarray(coeff, dtype=complex)
    if coeff.shape != (sites, sites):
        raise DimensionError(f"coefficient matrix must be {(sites, sites)}, got {coeff.shape}")
    dim = 1 << sites
    idx = np.arange(dim, dtype=np.uint64)
    masks = _string_masks(sites)
    gauge = _gauge_signs(sites)
    out = np.zeros((dim, dim), dtype=complex)
    for i in range(sites):
        bi = np.uint64(1 << (sites - 1 - i))
        for j in range(sites):
            w = coeff[i, j]
            if w == 0:
                continue
            bj = np.uint64(1 << (sites - 1 - j))
            if i == j:
                occ = idx[(idx & bj) != 0]
                out[occ, occ] += w
                continue
            src = idx[((idx & bj) != 0) & ((idx & bi) == 0)]
            mid = src ^ bj
            dst = mid ^ bi
            sign = np.bitwise_count(src & masks[j]) + np.bitwise_count(mid & masks[i])
            phase = np.where(sign % 2 == 0, 1.0, -1.0) * (gauge[i] * gauge[j])
            out[dst, src] += w * phase
    return out


def parity_mask(sites: int, parity: str) -> np.ndarray:
    """Boolean mask over the qubit basis selecting a fermion-parity sector."""
    if parity not in PARITIES:
        raise ValueError(f"parity must be one of {PARITIES}, got {parity!r}")
    counts = np.bitwise_count(np.arange(1 << sites, dtype=np.uint64))
    return (counts % 2 == 0) if parity == "even" else (counts % 2 == 1)


def _batched_minor_dets(m: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """det(m[rows[a]][:, cols[b]]) for all (a, b), via one batched solve."""
    k = rows.shape[1]
    if k == 0:
        return np.ones((rows.shape[0], cols.shape[0]), dtype=complex)
    sub = m[rows[:, None, :, None], cols[None, :, None, :]]
    return np.linalg.det(sub.reshape(-1, k, k)).reshape(rows.shape[0], cols.shape[0])


def gaussian_operator(m_single: np.ndarray, sites: int) -> np.ndarray:
    """Number-conserving Gaussian with single-particle matrix ``m_single``.

    Matrix elements between occupation configurations S (rows) and S'
    (columns) are det(m_single[S, S']); empty-to-empty is 1.  Returned in the
    qubit basis, i.e. with the alternating gauge signs applied on both sides.
    """
    _check_dense_cap(sites)
    m_single = np.asarray(m_single, dtype=complex)
    if m_single.shape != (sites, sites):
        raise DimensionError(f"single-particle matrix must be {(sites, sites)}")
    dim = 1 << sites
    gauge = _gauge_signs(sites)
    g_vec = np.ones(dim)
    for a in range(sites):
        if gauge[a] < 0:
            bit = 1 << (sites - 1 - a)
            g_vec[(np.arange(dim) & bit) != 0] *= -1.0
    out = np.zeros((dim, dim), dtype=complex)
    for k in range(sites + 1):
        combos = np.array(list(itertools.combinations(range(sites), k)), dtype=int)
        if combos.size == 0:
            combos = combos.reshape(1, 0)
        pos = (1 << (sites - 1 - combos)).sum(axis=1) if k else np.zeros(1, dtype=int)
        dets = _batched_minor_dets(m_single, combos, combos)
        out[np.ix_(pos, pos)] += dets
    return out * g_vec[:, None] * g_vec[None, :]


def one_particle_block(op: np.ndarray, sites: int) -> np.ndarray:
    """Extract <c_i^+ vac| op |c_j^+ vac> from a dense qubit-basis operator."""
    gauge = _gauge_signs(sites)
    pos = np.array([1 << (sites - 1 - a) for a in range(sites)])
    return op[np.ix_(pos, pos)] * gauge[:, None] * gauge[None, :]


def gaussian_form_residuals(p: ModelParams, v: complex) -> dict[str, float]:
    """Residuals of the parity-resolved Gaussian form of the dual transfer op.

    Compares the dense dual transfer operator against the number-conserving
    Gaussian built from the chain-frame single-particle matrix, one parity
    sector at a time, each weighted by its scalar prefactor.  Requires the
    dense probe regime (4N <= 12).
    """
    from .aux_transfer import TransferSpec, assemble_dense

    _require_xx(p)
    _guard_poles(p, v)
    sites = p.n_legs
    _check_dense_cap(sites)
    dense = assemble_dense(TransferSpec(p, v, "tilde"))
    out: dict[str, float] = {}
    for parity in PARITIES:
        mask = parity_mask(sites, parity)
        gauss = gaussian_operator(chain_transfer_matrix(p, v, parity), sites)
        pref = sector_prefactor(p, v, parity)
        lhs = dense[np.ix_(mask, mask)]
        rhs = pref * gauss[np.ix_(mask, mask)]
        denom = max(np.abs(lhs).max(), 1e-300)
        out[parity] = float(np.abs(lhs - rhs).max() / denom)
    return out


def gaussian_log_generator(
    p: ModelParams, v: complex, parity: str, margin: float = 1e-8
) -> np.ndarray:
    """Principal-branch log of the chain-frame single-particle transfer.

    The parity sector of the dual transfer operator is the prefactor times
    exp of the quadratic form with this matrix as coefficients.  The
    principal matrix log is discontinuous across the negative real axis, so
    a spectrum point within ``margin`` (in angle or in modulus) of the cut
    raises LogBranchError; shifting v slightly moves the spectrum off it.
    """
    from scipy.linalg import logm

    m = chain_transfer_matrix(p, v, parity)
    eigs = np.linalg.eigvals(m)
    if np.any(np.abs(eigs) < margin):
        raise LogBranchError(f"transfer spectrum touches zero at v={v}")
    if np.any(np.pi - np.abs(np.angle(eigs)) < margin):
        raise LogBranchError(
            f"transfer eigenvalue on the negative real axis at v={v}; shift v off the cut"
        )
    return np.asarray(logm(m), dtype=complex)


# ---------------------------------------------------------------------------
# mode families and Slater states


@dataclass(frozen=True)
class OccupationSpec:
    """How many modes to occupy from each causal family.

    Families are labelled by (sector, hopping eigenvalue) of the left
    generator; the influence matrix fills all N classical eigenvalue-0 and
    all N quantum eigenvalue-1 modes.
    """

    n_cl0: int
    n_cl1: int
    n_q0: int
    n_q1: int

    def total(self) -> int:
        return self.n_cl0 + self.n_cl1 + self.n_q0 + self.n_q1


def influence_occupation(n_half: int) -> OccupationSpec:
    return OccupationSpec(n_cl0=n_half, n_cl1=0, n_q0=0, n_q1=n_half)


def _family_rows(p: ModelParams, sector: str, hop_eigenvalue: int, count: int) -> np.ndarray:
    """Mode rows (count x 2N) spanning an invariant slice of a root space.

    Closed forms cover the two families occupied by the influence matrix;
    the other two come from the numeric Jordan chain of the left generator.
    Rows are returned deepest-first, so any leading slice of the full chain
    is invariant under the generator.
    """
    n = p.n_half
    if count < 0 or count > n:
        raise ValueError(f"family holds 0..{n} modes, asked for {count}")
    s = 1.0 / math.cosh(p.u)
    if (sector, hop_eigenvalue) == ("cl", 0):
        block = jordan_basis.jacobi_block(n, s, "cl")[::-1]
    elif (sector, hop_eigenvalue) == ("q", 1):
        block = jordan_basis.jacobi_block(n, s, "q")
    else:
        block = jordan_chain(hopping_generator(p, "left", sector), float(hop_eigenvalue))
    return np.asarray(block[:count], dtype=complex)


def mode_matrix(p: ModelParams, occ: OccupationSpec) -> np.ndarray:
    """Chain-frame creation coefficients of the occupied modes.

    Returns a (occ.total() x 4N) matrix; row r gives the coefficients of one
    mode over the 4N chain sites in the alternating gauge.  The Keldysh
    mixing ratio used per row follows the total filling parity.
    """
    _require_xx(p)
    sites = p.n_legs
    half = sites // 2
    parity = "even" if occ.total() % 2 == 0 else "odd"
    x_cl, y_q = keldysh_mixing(p, parity)
    fams = (
        ("cl", 0, occ.n_cl0, x_cl),
        ("cl", 1, occ.n_cl1, x_cl),
        ("q", 0, occ.n_q0, y_q),
        ("q", 1, occ.n_q1, y_q),
    )
    rows = []
    for sector, eig, count, ratio in fams:
        if count == 0:
            continue
        block = _family_rows(p, sector, eig, count)
        for mode in block:
            row = np.zeros(sites, dtype=complex)
            row[:half] += mode
            row[half:] += ratio * mode[::-1]
            rows.append(row)
    if not rows:
        return np.zeros((0, sites), dtype=complex)
    return np.array(rows)


_SLATER_CHUNK = 4096


def slater_state(phi: np.ndarray, sites: int) -> np.ndarray:
    """Qubit amplitudes of the product of fermion modes with coefficients phi.

    phi has one row per mode over ``sites`` chain sites (gauge included);
    amplitudes on each filling-k configuration are the k x k minors.
    """
    ensure_capacity(sites)
    phi = np.asarray(phi, dtype=complex)
    k = phi.shape[0]
    if phi.shape != (k, sites):
        raise DimensionError(f"mode matrix must be (k, {sites}), got {phi.shape}")
    gauge = _gauge_signs(sites)
    phi = phi * gauge[None, :]
    amps = np.zeros(1 << sites, dtype=complex)
    if k == 0:
        amps[0] = 1.0
        return amps
    combos = itertools.combinations(range(sites), k)
    while True:
        batch = np.array(list(itertools.islice(combos, _SLATER_CHUNK)), dtype=int)
        if batch.size == 0:
            break
        pos = (1 << (sites - 1 - batch)).sum(axis=1)
        sub = phi[:, batch].transpose(1, 0, 2)  # (batch, k, k)
        amps[pos] = np.linalg.det(sub)
    return amps


def build_state_from_occupation(p: ModelParams, occ: OccupationSpec) -> np.ndarray:
    """Slater state over the requested causal modes, in the physical frame.

    The mode product lives in the dual-transfer frame; conjugating every odd
    chain site by sigma^y maps it to the frame of the circuit construction.
    """
    from .aux_transfer import odd_sy_conjugation

    phi = mode_matrix(p, occ)
    return odd_sy_conjugation(slater_state(phi, p.n_legs))


def build_im_fermionic(p: ModelParams, basis: str = "jacobi") -> InfluenceMatrix:
    """Influence matrix as a Slater determinant over 2N causal mode vectors.

    Occupies the N classical eigenvalue-0 and N quantum eigenvalue-1 modes of
    the left hopping generator, mixed across the chain midpoint with the
    even-parity Keldysh ratios.  With the translation-covariant jacobi mode
    basis the result matches the circuit construction exactly after dividing
    by (1 + q^-2)^N; any other basis of the same root spaces changes the
    state by an overall scalar only.
    """
    from .aux_transfer import odd_sy_conjugation

    _require_xx(p)
    n = p.n_half
    sites = p.n_legs
    ensure_capacity(sites)
    s = 1.0 / math.cosh(p.u)
    if basis == "jacobi":
        j_cl = jordan_basis.jacobi_block(n, s, "cl")
        j_q = jordan_basis.jacobi_block(n, s, "q")
    elif basis == "adjugate":
        j_cl = jordan_basis.adjugate_block(n, s, "cl")
        j_q = jordan_basis.adjugate_block(n, s, "q")
    elif basis == "orthogonal":
        j_cl = jordan_basis.orthogonal_block(n, s, "cl")
        j_q = jordan_basis.orthogonal_block(n, s, "q")
    else:
        raise ValueError(f"unknown basis {basis!r}")
    x_cl, y_q = keldysh_mixing(p, "even")
    half = sites // 2
    rows = []
    for i in range(n):
        q_row = np.zeros(sites, dtype=complex)
        cl_row = np.zeros(sites, dtype=complex)
        q_row[:half] = j_q[i]
        q_row[half:] = y_q * j_q[i, ::-1]
        cl_row[:half] = j_cl[i]
        cl_row[half:] = x_cl * j_cl[i, ::-1]
        rows.extend([q_row, cl_row])
    amps = slater_state(np.array(rows), sites)
    amps = odd_sy_conjugation(amps)
    amps /= (1.0 + p.q_weight**-2) ** n
    return InfluenceMatrix(amps, n, method="fermion", meta={"basis": basis})


def many_body_hopping(p: ModelParams, side: str, sector: str, parity: str) -> np.ndarray:
    """Dense qubit-basis quadratic form of a hopping generator.

    Pulls the (2N x 2N) generator back through the Keldysh rotation of the
    given parity and second-quantizes it.  The influence matrix is a root
    vector: the left classical generator annihilates it and the left quantum
    generator gives it eigenvalue N.
    """
    _require_xx(p)
    h = hopping_generator(p, side, sector)
    vv, ww = keldysh_rotation(p, parity)
    half = p.n_legs // 2
    sel = slice(0, half) if sector == "cl" else slice(half, 2 * half)
    coeff = vv[sel].T @ h @ ww[sel]
    return quadratic_operator(coeff, p.n_legs)


def export_single_particle_csv(p: ModelParams, v: complex, path: str) -> None:
    """Write all single-particle blocks and generators to a tidy CSV."""
    import pandas as pd

    records = []
    for sector in SECTORS:
        m = single_particle_transfer(p, v, sector)
        for (i, j), val in np.ndenumerate(m):
            if val != 0:
                records.append(
                    {"kind": "transfer", "sector": sector, "side": "", "row": i + 1,
                     "col": j + 1, "re": val.real, "im": val.imag}
                )
        for side in SIDES:
            h = hopping_generator(p, side, sector)
            for (i, j), val in np.ndenumerate(h):
                if val != 0:
                    records.append(
                        {"kind": "hopping", "sector": sector, "side": side, "row": i + 1,
                         "col": j + 1, "re": float(val), "im": 0.0}
                    )
    pd.DataFrame.from_records(records).to_csv(path, index=False)
