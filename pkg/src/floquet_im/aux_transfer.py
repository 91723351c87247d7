"""Auxiliary transfer matrices acting on the 4N temporal sites.

Three variants are implemented, all as products of 4N two-site R-factors
sharing one two-dimensional auxiliary space that is traced at the end:

* ``original``: alternating transposed/untransposed factors with a diagonal
  auxiliary weight inserted between sites 2N and 2N+1; the influence matrix
  is its eigenvector with eigenvalue exactly 1.
* ``tilde``: the transposition-free similar form.  Conjugating by sigma^y on
  every odd chain site maps one to the other exactly (including the scalar
  prefactor), which is also verified numerically in the tests.
* ``tilde_epsilon``: the tilde form with the even-site spectral arguments
  shifted by a regulator epsilon, which splits the degenerate spectrum and
  makes the matrix diagonalizable.

The auxiliary space is threaded through the chain (never materialized as a
2^{4N} x 2^{4N} matrix); applying one transfer matrix costs O(4N * 2^{4N+1}).
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DimensionError, PoleError
from .linalg import jordan_report, power_trace_signature
from .params import POLE_TOL, ModelParams
from .states import n_sites_of
from .xxz_core import SY, partial_transpose, r_matrix

#: dense assembly limit for spectral probes (matrix is 4^{this} entries)
DENSE_PROBE_MAX_SITES = 12


@dataclass(frozen=True)
class TransferSpec:
    """One transfer matrix: variant, spectral argument, model parameters."""

    params: ModelParams
    v: complex
    variant: str = "original"  # original | tilde | tilde_epsilon
    epsilon: complex = 0.0

    def __post_init__(self) -> None:
        if self.variant not in ("original", "tilde", "tilde_epsilon"):
            raise ValueError(f"unknown variant {self.variant!r}")


def _rho_weights(q: float, inverse: bool) -> tuple[complex, complex]:
    z = q + 1.0 / q
    if inverse:
        return (1.0 / (q * z), q / z)
    return (q / z, 1.0 / (q * z))


def _program(spec: TransferSpec):
    """(program, prefactor): ordered ops threading the auxiliary space.

    Program items are ("gate", site_j, 4x4) with the auxiliary space as the
    first tensor factor, applied left-to-right, or ("rho", (w_up, w_dn)).
    """
    p = spec.params
    n2 = 2 * p.n_half
    v, u, eta = spec.v, p.u, p.eta
    eps = spec.epsilon if spec.variant == "tilde_epsilon" else 0.0
    prog: list = []
    if spec.variant == "original":
        # ascending sites; odd factors are transposed on the chain site
        for j in range(1, n2 + 1):
            if j % 2:
                prog.append(("gate", j, partial_transpose(r_matrix(p, v - u), 1)))
            else:
                prog.append(("gate", j, r_matrix(p, -v)))
        prog.append(("rho", _rho_weights(p.q_weight, inverse=False)))
        for j in range(n2 + 1, 2 * n2 + 1):
            if j % 2:
                prog.append(("gate", j, partial_transpose(r_matrix(p, v), 1)))
            else:
                prog.append(("gate", j, r_matrix(p, u - v)))
        return prog, 1.0
    # tilde family: descending sites, no transpositions, inverted bath weight
    for j in range(2 * n2, n2, -1):
        if j % 2:
            prog.append(("gate", j, r_matrix(p, v)))
        else:
            prog.append(("gate", j, r_matrix(p, v - u - eta - eps)))
    prog.append(("rho", _rho_weights(p.q_weight, inverse=True)))
    for j in range(n2, 0, -1):
        if j % 2:
            prog.append(("gate", j, r_matrix(p, v - u)))
        else:
            prog.append(("gate", j, r_matrix(p, v - eta - eps)))
    den1 = cmath.sinh(v - eta)
    den2 = cmath.sinh(v - u - eta)
    if abs(den1) < POLE_TOL or abs(den2) < POLE_TOL:
        raise PoleError(f"tilde prefactor pole at v={v}")
    pref = (cmath.sinh(v) / den1) ** p.n_half * (cmath.sinh(v - u) / den2) ** p.n_half
    return prog, pref


def _thread(program, vec: np.ndarray, n: int, a_in: int) -> np.ndarray:
    """Run the program on ``vec`` starting from auxiliary basis state a_in.

    ``vec``: (2^n, B).  Returns w of shape (2, 2^n, B), indexed by the
    outgoing auxiliary state.
    """
    dim, batch = vec.shape
    w = np.zeros((2, dim, batch), dtype=complex)
    w[a_in] = vec
    for item in program:
        if item[0] == "rho":
            w[0] *= item[1][0]
            w[1] *= item[1][1]
            continue
        _, j, g = item
        left = 1 << (j - 1)
        right = 1 << (n - j)
        w = w.reshape(2, left, 2, right, batch)
        w = np.einsum("ASas,aLsRB->ALSRB", g.reshape(2, 2, 2, 2), w, optimize=True)
        w = w.reshape(2, dim, batch)
    return w


def apply_transfer(spec: TransferSpec, x: np.ndarray) -> np.ndarray:
    """Transfer matrix applied to a dense vector (or batch of columns)."""
    arr = np.asarray(x, dtype=complex)
    single = arr.ndim == 1
    if single:
        arr = arr[:, None]
    n = n_sites_of(arr[:, 0])
    if n != 4 * spec.params.n_half:
        raise DimensionError(f"state has {n} sites, expected {4 * spec.params.n_half}")
    prog, pref = _program(spec)
    out = np.zeros_like(arr)
    for a in (0, 1):
        out += _thread(prog, arr, n, a)[a]
    out *= pref
    return out[:, 0] if single else out


def apply_monodromy_element(
    p: ModelParams,
    x_arg: complex,
    element: tuple[int, int],
    vec: np.ndarray,
    epsilon: complex,
) -> np.ndarray:
    """One matrix element (a_out, a_in) of the epsilon-deformed monodromy.

    The monodromy is the tilde-variant factor product (bath weight included,
    scalar prefactor excluded) evaluated at spectral argument
    ``x_arg - eta/2``; element (0, 1) is the magnon creation operator used by
    the Bethe route.
    """
    spec = TransferSpec(p, x_arg - p.eta / 2.0, "tilde_epsilon", epsilon)
    prog, _ = _program(spec)
    arr = np.asarray(vec, dtype=complex)
    single = arr.ndim == 1
    if single:
        arr = arr[:, None]
    n = n_sites_of(arr[:, 0])
    a_out, a_in = element
    w = _thread(prog, arr, n, a_in)[a_out]
    return w[:, 0] if single else w


def assemble_dense(spec: TransferSpec, chunk: int = 512) -> np.ndarray:
    """Dense matrix of the transfer operator; capped at DENSE_PROBE_MAX_SITES."""
    n = 4 * spec.params.n_half
    if n > DENSE_PROBE_MAX_SITES:
        raise CapacityError(f"dense assembly requested for {n} sites (max {DENSE_PROBE_MAX_SITES})")
    dim = 1 << n
    out = np.empty((dim, dim), dtype=complex)
    eye = np.eye(dim, dtype=complex)
    for start in range(0, dim, chunk):
        stop = min(start + chunk, dim)
        out[:, start:stop] = apply_transfer(spec, eye[:, start:stop])
    return out


def odd_sy_conjugation(vec: np.ndarray) -> np.ndarray:
    """Apply sigma^y on chain sites 1, 3, 5, ... (1-based); an involution.

    This is the exact similarity between the original and tilde variants and
    the conversion between tilde-eigenvector conventions and the physical IM.
    """
    arr = np.asarray(vec, dtype=complex)
    n = n_sites_of(arr)
    t = arr.reshape((2,) * n)
    for ax in range(0, n, 2):
        t = np.moveaxis(np.tensordot(SY, t, axes=[[1], [ax]]), 0, ax)
    return t.reshape(-1)


def commutator_residual(
    p: ModelParams,
    v1: complex,
    v2: complex,
    trials: int = 5,
    variant: str = "original",
    epsilon: complex = 0.0,
    rng: np.random.Generator | None = None,
) -> float:
    """max over random vectors of |T(v1)T(v2)x - T(v2)T(v1)x| / |x|."""
    rng = rng or np.random.default_rng(0)
    s1 = TransferSpec(p, v1, variant, epsilon)
    s2 = TransferSpec(p, v2, variant, epsilon)
    dim = 1 << (4 * p.n_half)
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        scale = np.abs(x).max()
        a = apply_transfer(s1, apply_transfer(s2, x))
        b = apply_transfer(s2, apply_transfer(s1, x))
        worst = max(worst, float(np.abs(a - b).max() / scale))
    return worst


def fixed_point_residual(spec: TransferSpec, im_vec: np.ndarray) -> float:
    """|T(v) x - x|_inf for a claimed eigenvalue-1 eigenvector."""
    return float(np.abs(apply_transfer(spec, im_vec) - np.asarray(im_vec)).max())


def pseudovacuum_eigenvalue(spec: TransferSpec) -> complex:
    """Eigenvalue of the all-up state under the tilde variants.

    Only the two diagonal auxiliary paths survive on the all-up state: the
    up path contributes 1 per factor, the down path one middle-block diagonal
    entry b(w_j) per factor, weighted by the bath diagonal.
    """
    if spec.variant == "original":
        raise ValueError("closed form implemented for the tilde family only")
    p = spec.params
    prog, pref = _program(spec)
    prod_b = 1.0 + 0.0j
    weights = None
    for item in prog:
        if item[0] == "rho":
            weights = item[1]
            continue
        g = item[2]
        prod_b *= g[2, 2]  # <a=1,s=0| R |a=1,s=0> = b(w_j)
    return pref * (weights[0] + weights[1] * prod_b)


def spectra_signature_residual(p: ModelParams, v: complex, k_max: int = 16) -> float:
    """Normalized power-trace mismatch between original and tilde variants."""
    t_orig = assemble_dense(TransferSpec(p, v, "original"))
    t_tilde = assemble_dense(TransferSpec(p, v, "tilde"))
    sig_a = power_trace_signature(t_orig, k_max)
    sig_b = power_trace_signature(t_tilde, k_max)
    return float(np.abs(sig_a - sig_b).max())


def similarity_residual(p: ModelParams, v: complex) -> float:
    """|T_original - C T_tilde C|_max with C the odd-site sigma^y product."""
    t_orig = assemble_dense(TransferSpec(p, v, "original"))
    t_tilde = assemble_dense(TransferSpec(p, v, "tilde"))
    dim = t_orig.shape[0]
    conj = np.empty_like(t_tilde)
    for col in range(dim):
        conj[:, col] = odd_sy_conjugation(t_tilde[:, col])
    for row in range(dim):
        conj[row, :] = odd_sy_conjugation(conj[row, :])
    return float(np.abs(t_orig - conj).max())


def jordan_probe(
    p: ModelParams,
    v: complex,
    variant: str = "tilde",
    epsilon: complex = 0.0,
    cluster_rtol: float = 1e-7,
    rank_rtol: float = 1e-8,
) -> dict:
    """Dense spectral probe: eigenvalue clusters, multiplicities, block sizes.

    Defective clusters (geometric < algebraic) certify nontrivial Jordan
    structure.  Thresholds are explicit because the detection problem is
    ill-conditioned; eigenvalues of a size-d block fuzz like eps^(1/d).
    """
    dense = assemble_dense(TransferSpec(p, v, variant, epsilon))
    clusters = jordan_report(dense, cluster_rtol=cluster_rtol, rank_rtol=rank_rtol)
    defective = any(c["geometric"] < c["algebraic"] for c in clusters)
    unit = [c for c in clusters if abs(c["eigenvalue"] - 1.0) < 1e-6]
    return {
        "dim": dense.shape[0],
        "clusters": clusters,
        "defective": defective,
        "unit_eigenvalue_geometric": unit[0]["geometric"] if unit else 0,
        "unit_eigenvalue_algebraic": unit[0]["algebraic"] if unit else 0,
    }
