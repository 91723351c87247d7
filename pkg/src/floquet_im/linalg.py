"""Linear-algebra utilities: rank sequences, Jordan structure, extrapolation.

Jordan data is always reported through rank sequences: with
``r_k = rank((A - lambda)^k)`` and ``r_0 = dim``, the number of blocks of size
at least ``k`` is ``r_{k-1} - r_k`` and the number of blocks of size exactly
``d`` is ``r_{d-1} - 2 r_d + r_{d+1}``.  This avoids any attempt to compute a
numerical Jordan normal form, which is ill-posed.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import ConvergenceError, NotEigenvalueError, PrecisionError


def numeric_rank(a: np.ndarray, rtol: float = 1e-8) -> int:
    """Rank by SVD with a relative threshold on the largest singular value."""
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def rank_sequence(a: np.ndarray, lam: complex, k_max: int, rtol: float = 1e-8) -> list[int]:
    """[rank((A-lam)^k) for k = 1..k_max], stopping early once stationary."""
    n = a.shape[0]
    shifted = a - lam * np.eye(n, dtype=complex)
    # normalize to tame overflow of powers; rank is scale-invariant
    scale = np.abs(shifted).max()
    if scale > 0:
        shifted = shifted / scale
    ranks = []
    power = np.eye(n, dtype=complex)
    for _ in range(k_max):
        power = power @ shifted
        m = np.abs(power).max()
        if m > 0:
            power = power / m
        ranks.append(numeric_rank(power, rtol))
        if len(ranks) >= 2 and ranks[-1] == ranks[-2]:
            break
    return ranks


def block_sizes_from_ranks(dim: int, ranks: list[int]) -> dict[int, int]:
    """Jordan block-size histogram for one eigenvalue from its rank sequence."""
    r = [dim] + list(ranks)
    while len(r) < 3 or r[-1] != r[-2]:
        r.append(r[-1])
    out = {}
    for d in range(1, len(r) - 1):
        cnt = r[d - 1] - 2 * r[d] + r[d + 1]
        if cnt < 0:
            raise PrecisionError(f"inconsistent rank sequence {ranks}")
        if cnt > 0:
            out[d] = cnt
    return out


def cluster_eigenvalues(eigvals: np.ndarray, rtol: float = 1e-7) -> list[tuple[complex, int]]:
    """Greedy clustering of eigenvalues; returns (cluster mean, multiplicity)."""
    vals = sorted(eigvals, key=lambda z: (z.real, z.imag))
    scale = max(max(abs(z) for z in vals), 1.0)
    clusters: list[list[complex]] = []
    for z in vals:
        for c in clusters:
            if abs(z - c[0]) <= rtol * scale:
                c.append(z)
                break
        else:
            clusters.append([z])
    return [(complex(np.mean(c)), len(c)) for c in clusters]


def jordan_report(
    a: np.ndarray, cluster_rtol: float = 1e-7, rank_rtol: float = 1e-8
) -> list[dict]:
    """Eigenvalue clusters with algebraic/geometric multiplicities and sizes.

    Each entry: {eigenvalue, algebraic, geometric, blocks: {size: count}}.
    """
    n = a.shape[0]
    eigvals = np.linalg.eigvals(a)
    report = []
    for lam, alg in cluster_eigenvalues(eigvals, cluster_rtol):
        ranks = rank_sequence(a, lam, k_max=alg + 1, rtol=rank_rtol)
        geo = n - ranks[0]
        # restrict the histogram to this cluster: the tail rank counts the
        # other eigenvalues' dimensions
        tail = n - alg
        r = [n] + [max(rk, tail) for rk in ranks]
        while r[-1] != tail:
            r.append(tail)
        r.append(tail)
        blocks = {}
        for d in range(1, len(r) - 1):
            cnt = r[d - 1] - 2 * r[d] + r[d + 1]
            if cnt > 0:
                blocks[d] = cnt
        report.append(
            {"eigenvalue": lam, "algebraic": alg, "geometric": geo, "blocks": blocks}
        )
    return report


def expect_eigenvalue(a: np.ndarray, lam: complex, rtol: float = 1e-7) -> None:
    eigvals = np.linalg.eigvals(a)
    scale = max(np.abs(eigvals).max(), 1.0)
    if np.abs(eigvals - lam).min() > rtol * scale:
        raise NotEigenvalueError(f"{lam} is not in the spectrum (tol {rtol})")


# ---------------------------------------------------------------------------
# exact ranks over F_p for rational matrices

def rank_mod_p(mat_int: np.ndarray, p: int) -> int:
    """Rank of an integer matrix over F_p by Gaussian elimination (int64)."""
    a = np.array(mat_int % p, dtype=np.int64)
    rows, cols = a.shape
    rank = 0
    for col in range(cols):
        piv = None
        for r in range(rank, rows):
            if a[r, col] % p:
                piv = r
                break
        if piv is None:
            continue
        a[[rank, piv]] = a[[piv, rank]]
        inv = pow(int(a[rank, col]), p - 2, p)
        a[rank] = (a[rank] * inv) % p
        mask = np.arange(rows) != rank
        factors = a[mask, col].copy()
        a[mask] = (a[mask] - np.outer(factors, a[rank])) % p
        rank += 1
        if rank == rows:
            break
    return rank


def fraction_matrix_mod_p(mat, p: int) -> np.ndarray:
    """Map a matrix of Fractions (or ints) into F_p entries as int64."""
    rows = len(mat)
    cols = len(mat[0])
    out = np.zeros((rows, cols), dtype=np.int64)
    for i in range(rows):
        for j in range(cols):
            x = Fraction(mat[i][j])
            num = x.numerator % p
            den = x.denominator % p
            if den == 0:
                raise ZeroDivisionError(f"denominator divisible by p={p} at ({i},{j})")
            out[i, j] = (num * pow(den, p - 2, p)) % p
    return out


def rank_sequence_mod_p(mat_frac, p: int, k_max: int) -> list[int]:
    """Exact ranks of A^k over F_p for a rational matrix A, k = 1..k_max."""
    a = fraction_matrix_mod_p(mat_frac, p)
    power = a.copy()
    ranks = [rank_mod_p(power, p)]
    for _ in range(1, k_max):
        # float64 matmul stays exact while entries*p < 2^53; p ~ 46k keeps
        # n*p^2 < 9e15 for n <= 4000
        power = np.int64(np.round((power.astype(float) @ a.astype(float)))) % p
        ranks.append(rank_mod_p(power, p))
        if len(ranks) >= 2 and ranks[-1] == ranks[-2]:
            break
    return ranks


# ---------------------------------------------------------------------------
# spectra comparison and extrapolation

def power_trace_signature(a: np.ndarray, k_max: int = 16) -> np.ndarray:
    """Normalized traces of A^k, a similarity invariant robust for defective
    matrices (eigenvalue-based comparisons fuzz like eps^(1/k) there)."""
    n = a.shape[0]
    traces = np.empty(k_max, dtype=complex)
    power = np.eye(n, dtype=complex)
    for k in range(k_max):
        power = power @ a
        traces[k] = np.trace(power)
    scale = np.abs(traces).max()
    return traces / scale if scale > 0 else traces


def richardson_extrapolate(values: list[np.ndarray], ratio: float = 2.0):
    """Richardson extrapolation to step 0 for samples f(h), f(h/r), f(h/r^2)...

    Assumes an integer-power error expansion (meromorphic dependence on the
    step).  Returns (extrapolant, error_estimate) where the estimate is the
    max-norm difference of the last two diagonal entries.
    """
    if len(values) < 2:
        raise ConvergenceError("need at least two ladder points to extrapolate")
    prev = [np.asarray(values[0], dtype=complex)]
    for k in range(1, len(values)):
        cur = [np.asarray(values[k], dtype=complex)]
        for j in range(1, k + 1):
            fac = ratio**j
            cur.append((fac * cur[j - 1] - prev[j - 1]) / (fac - 1.0))
        prev = cur
    best = prev[-1]
    err = float(np.abs(best - prev[-2]).max())
    return best, err
