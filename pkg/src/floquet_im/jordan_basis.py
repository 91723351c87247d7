"""Polynomial bases for the invariant subspaces of the hopping generators.

The banded 2N x 2N generators built in :mod:`.free_fermion` have two
invariant subspaces of dimension N each (one per eigenvalue), and on each
subspace the generator acts as a single shift chain.  Three concrete bases
for the two subspaces that carry the influence matrix are provided:

* ``adjugate_block``: the canonical chain obtained from derivatives of the
  adjugate matrix.  Exact, but entries grow exponentially with N, so it is
  only useful for small sizes and cross-checks.
* ``jacobi_block``: a translation-covariant basis whose rows are Jacobi
  polynomials evaluated at ``1 - 2*s**2`` with ``s = sech(u)``.  Entries stay
  O(1) and decay like ``k**-1/2`` along a row.
* ``orthogonal_block``: the causal Gram-Schmidt orthogonalization of the
  jacobi basis, whose rows decay like ``k**-3/2``; the decay constants are
  extracted with :func:`tail_fit`.

Row m of a "cl" block is supported on columns ``2m-1 .. 2N`` (1-based) and
row m of a "q" block on columns ``1 .. 2m``; corner entries are 1 in the
jacobi and orthogonal bases, and the rows repeat under the two-site shift
(row m+1 is row m moved one period to the right).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConvergenceError, DegenerateError, DimensionError, RangeError

SECTORS = ("cl", "q")
FAMILY_NAMES = ("adjugate_tilde", "jacobi", "orthogonal")
TAIL_MODELS = ("half_power", "threehalf_power_with_edge")

#: row-support growth per row: each basis vector gains one period = 2 sites
SITES_PER_PERIOD = 2


def _check_sector(sector: str) -> None:
    if sector not in SECTORS:
        raise ValueError(f"sector must be one of {SECTORS}, got {sector!r}")


def gbinom(a: complex, k: int) -> complex:
    """Generalized binomial coefficient C(a, k) for integer k and any a."""
    if k < 0:
        return 0.0
    out = 1.0 + 0.0j if isinstance(a, complex) else 1.0
    for i in range(k):
        out = out * (a - i) / (i + 1)
    return out


def _jacobi_leibniz(n: int, alpha: int, beta: int, z: complex) -> complex:
    # finite sum from the Leibniz expansion of the Rodrigues derivative;
    # exact for any parameters but cancellation-prone at large degree
    lo = (z - 1.0) / 2.0
    hi = (z + 1.0) / 2.0
    total = 0.0
    for j in range(n + 1):
        total += gbinom(alpha + n, n - j) * gbinom(beta + n, j) * lo**j * hi ** (n - j)
    return total


def jacobi_poly(n: int, alpha: int, beta: int, z: complex) -> complex:
    """Jacobi polynomial P^(alpha,beta)_n(z), zero for n < 0.

    Negative integer parameters are meant: the polynomial is defined by the
    Rodrigues derivative (equivalently its Leibniz finite sum), which stays
    valid there.  The degree recurrence degenerates at small n for these
    parameters, so low degrees come from the finite sum and the standard
    three-term recurrence only takes over beyond every degenerate
    coefficient; the sum alone would lose all precision near degree 50.
    """
    if n < 0:
        return 0.0
    # smallest degree from which 2m(m+a+b)(2m+a+b-2) stays nonzero
    ab = alpha + beta
    seed_top = 4
    if float(ab).is_integer():
        seed_top = max(4, int(-ab) + 1, (2 - int(ab)) // 2 + 1)
    if n <= seed_top:
        return _jacobi_leibniz(n, alpha, beta, z)
    pm2 = _jacobi_leibniz(seed_top - 1, alpha, beta, z)
    pm1 = _jacobi_leibniz(seed_top, alpha, beta, z)
    for m in range(seed_top + 1, n + 1):
        c0 = 2.0 * m * (m + ab) * (2 * m + ab - 2)
        c1 = (2 * m + ab - 1) * ((2 * m + ab) * (2 * m + ab - 2) * z + alpha**2 - beta**2)
        c2 = -2.0 * (m + alpha - 1) * (m + beta - 1) * (2 * m + ab)
        pm2, pm1 = pm1, (c1 * pm1 + c2 * pm2) / c0
    return pm1


def jacobi_block(n_half: int, s: complex, sector: str) -> np.ndarray:
    """(N, 2N) translation-covariant basis of one invariant subspace.

    Shifting a row down by one and right by one period reproduces the next
    row, so the whole block is determined by two length-N profiles; the
    profiles are Jacobi polynomials in ``1 - 2*s**2``.
    """
    _check_sector(sector)
    if n_half < 1:
        raise DimensionError(f"n_half must be >= 1, got {n_half}")
    z = 1.0 - 2.0 * s * s
    n = n_half
    out = np.zeros((n, 2 * n), dtype=complex)
    if sector == "cl":
        odd = [jacobi_poly(d, -2, 0, z) for d in range(n)]
        even = [s * jacobi_poly(d, -1, 0, z) for d in range(n)]
        for m in range(1, n + 1):
            for k in range(m, n + 1):
                out[m - 1, 2 * k - 2] = odd[k - m]
                out[m - 1, 2 * k - 1] = even[k - m]
    else:
        odd = [s * jacobi_poly(d, 0, -1, z) for d in range(n)]
        even = [jacobi_poly(d, -1, -1, z) for d in range(n)]
        for m in range(1, n + 1):
            for k in range(1, m + 1):
                out[m - 1, 2 * k - 2] = odd[m - k]
                out[m - 1, 2 * k - 1] = even[m - k]
    if np.isrealobj(np.asarray(s)) or abs(np.imag(s)) == 0.0:
        return out.real.copy()
    return out


def _binomial_product_coeff(j: int, a1: complex, e1: int, a2: complex, e2: int) -> complex:
    """[y^j] (a1 + y)^e1 (a2 + y)^e2 with integer (possibly negative) e1, e2."""
    total = 0.0
    for t in range(j + 1):
        c1 = gbinom(e1, t)
        c2 = gbinom(e2, j - t)
        if c1 == 0.0 or c2 == 0.0:
            continue
        total += c1 * a1 ** (e1 - t) * c2 * a2 ** (e2 - (j - t))
    return total


def adjugate_block(n_half: int, s: complex, sector: str) -> np.ndarray:
    """(N, 2N) canonical chain basis from adjugate-matrix derivatives.

    Row 1 is the top of the chain and row N the eigenvector for "cl"; the
    chain runs the other way for "q" (row 1 is the eigenvector).  Entries
    grow exponentially with N, hence the size guard.
    """
    _check_sector(sector)
    if n_half < 1:
        raise DimensionError(f"n_half must be >= 1, got {n_half}")
    if n_half > 64:
        raise RangeError("adjugate basis entries overflow well before n_half = 64")
    n = n_half
    s2 = s * s
    out = np.zeros((n, 2 * n), dtype=complex)
    for m in range(1, n + 1):
        for k in range(1, n + 1):
            if sector == "cl":
                j = k - m
                if j < 0:
                    continue
                # expansions around x = 0: (x-1)^p -> (-1+y)^p, (s^2-1+x)^p
                out[m - 1, 2 * k - 2] = _binomial_product_coeff(j, -1.0, n + 1 - k, s2 - 1.0, k - 1)
                out[m - 1, 2 * k - 1] = -s * _binomial_product_coeff(j, -1.0, n - k, s2 - 1.0, k - 1)
            else:
                j = m - k
                if j < 0:
                    continue
                # expansions around x = 1: x^p -> (1+y)^p, (s^2-1+x)^p -> (s^2+y)^p
                out[m - 1, 2 * k - 2] = s * _binomial_product_coeff(j, 1.0, k - 1, s2, n - k)
                out[m - 1, 2 * k - 1] = s2 * _binomial_product_coeff(j, 1.0, k, s2, n - k - 1)
    if np.isrealobj(np.asarray(s)) or abs(np.imag(s)) == 0.0:
        return out.real.copy()
    return out


def jacobi_combination_coeffs(n_half: int, s: complex, sector: str, m: int) -> np.ndarray:
    """Coefficients writing jacobi row m as a combination of adjugate rows.

    For "cl", jacobi row m equals sum_j coeffs[j] * adjugate row m+j; for
    "q" it is sum_j coeffs[j] * adjugate row m-j.  The coefficients are the
    power-series expansion of the connecting rational function.
    """
    _check_sector(sector)
    if not 1 <= m <= n_half:
        raise DimensionError(f"row index m must be in 1..{n_half}, got {m}")
    s2 = s * s
    if sector == "cl":
        return np.array(
            [-_binomial_product_coeff(j, -1.0, m - n_half, s2 - 1.0, 1 - m)
             for j in range(n_half - m + 1)]
        )
    return np.array(
        [_binomial_product_coeff(j, 1.0, 1 - m, s2, m - n_half) for j in range(m)]
    )


def _corner_col(sector: str, m: int) -> int:
    # 0-based column of the first supported site of row m (1-based)
    return 2 * m - 2 if sector == "cl" else 2 * m - 1


def causal_orthogonalize(block: np.ndarray, sector: str) -> np.ndarray:
    """Orthogonalize rows starting from the most localized one.

    Processing runs from the shortest row outward (row N first for "cl",
    row 1 first for "q"), so each row only receives corrections supported
    strictly inside its own support and its corner entry is preserved; the
    result is rescaled so every corner entry equals one exactly.  Rows come
    back in the original order.
    """
    _check_sector(sector)
    b = np.array(block, dtype=complex)
    n, cols = b.shape
    if cols != 2 * n:
        raise DimensionError(f"expected (N, 2N) block, got {b.shape}")
    order = range(n - 1, -1, -1) if sector == "cl" else range(n)
    done: list[np.ndarray] = []
    for idx in order:
        row = b[idx]
        for _ in range(2):  # second pass scrubs the O(eps) projection residue
            for prev in done:
                row = row - (np.vdot(prev, row) / np.vdot(prev, prev)) * prev
        corner = row[_corner_col(sector, idx + 1)]
        if abs(corner) < 1e-13 * max(np.abs(row).max(), 1.0):
            raise DegenerateError(f"corner entry of row {idx + 1} vanished during orthogonalization")
        row = row / corner
        b[idx] = row
        done.append(row)
    if abs(b.imag).max() == 0.0:
        return b.real.copy()
    return b


def orthogonal_block(n_half: int, s: complex, sector: str) -> np.ndarray:
    """Causally orthogonalized jacobi basis with unit corner entries."""
    return causal_orthogonalize(jacobi_block(n_half, s, sector), sector)


# ---------------------------------------------------------------------------
# packaged families


@dataclass(frozen=True)
class BasisFamily:
    """One basis of one invariant subspace, with its construction metadata."""

    vectors: np.ndarray  # (N, 2N), row m-1 = vector m
    family: str
    sector: str
    s_param: float

    @property
    def n_half(self) -> int:
        return self.vectors.shape[0]


def _s_of(p) -> float:
    return 1.0 / math.cosh(p.u)


def adjugate_vectors(p, sector: str) -> BasisFamily:
    s = _s_of(p)
    return BasisFamily(adjugate_block(p.n_half, s, sector), "adjugate_tilde", sector, s)


def jacobi_vectors(p, sector: str) -> BasisFamily:
    s = _s_of(p)
    return BasisFamily(jacobi_block(p.n_half, s, sector), "jacobi", sector, s)


def gram_schmidt_causal(b: BasisFamily) -> BasisFamily:
    """Causal orthogonalization of a jacobi family (see causal_orthogonalize)."""
    if b.family != "jacobi":
        raise ValueError(f"orthogonalization starts from the jacobi family, got {b.family!r}")
    return BasisFamily(causal_orthogonalize(b.vectors, b.sector), "orthogonal", b.sector, b.s_param)


# ---------------------------------------------------------------------------
# tail asymptotics


def outer_subsequences(block: np.ndarray, sector: str) -> tuple[np.ndarray, np.ndarray]:
    """The two sublattice subsequences of the fully spread row.

    For "cl" the spread row is row 1; sample k of subsequence 1 (resp. 2) is
    column 2k-1 (resp. 2k).  For "q" the spread row is row N read from the
    far end: subsequence 1 is column 2N-2k+2 and subsequence 2 is column
    2N-2k+1, which mirrors the "cl" pair exactly.
    """
    _check_sector(sector)
    b = np.asarray(block)
    if sector == "cl":
        row = b[0]
        return row[0::2].copy(), row[1::2].copy()
    row = b[-1]
    return row[1::2][::-1].copy(), row[0::2][::-1].copy()


def jacobi_tail_reference(sector: str, s: float, which: int) -> tuple[float, float]:
    """(amplitude, phase) of the k**-1/2 asymptote of a jacobi outer row.

    The pair refers to the model ``amp * k**-0.5 * sin(omega*k + phase)``
    with ``omega = 2*arcsin(s)`` for subsequence ``which`` (1 or 2) of
    :func:`outer_subsequences`.
    """
    _check_sector(sector)
    if which not in (1, 2):
        raise ValueError(f"subsequence index must be 1 or 2, got {which}")
    if not 0.0 < s < 1.0:
        raise RangeError(f"asymptote defined for 0 < s < 1, got {s}")
    theta = math.asin(s)
    root = math.sqrt(1.0 - s * s)
    if sector == "cl":
        amp = math.sqrt(s**3 / (math.pi * root))
        phase = -3.0 * theta - 0.75 * math.pi if which == 1 else 0.75 * math.pi - 2.0 * theta
    else:
        amp = math.sqrt(s * root / math.pi)
        phase = 0.75 * math.pi - 3.0 * theta if which == 1 else 0.25 * math.pi - 2.0 * theta
    return amp, _wrap_angle(phase)


def _wrap_angle(phase: float) -> float:
    return (phase + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class TailFitReport:
    """Joint decay fit of the two sublattice subsequences of an outer row.

    Each subsequence is fitted against
    ``amp/k**e * sin(omega*k + phase) + amp_edge/(k**e (N-k+1)) * sin(omega*k
    + phase_edge)`` with e = 1/2 (no edge term) or 3/2 depending on the
    model.  Amplitudes are reported nonnegative, phases in (-pi, pi].
    """

    model: str
    omega: float
    amps: tuple[float, float]
    phases: tuple[float, float]
    edge_amps: tuple[float, float]
    edge_phases: tuple[float, float]
    residuals: tuple[float, float]
    window: tuple[int, int]

    def constants(self) -> tuple[float, ...]:
        """(A1, A2, B1, B2, phi1, phi2, Phi1, Phi2)."""
        return (*self.amps, *self.edge_amps, *self.phases, *self.edge_phases)


def _phase_pack(a: float, b: float) -> tuple[float, float]:
    # a*sin(w k) + b*cos(w k) = A*sin(w k + phi)
    amp, phase = math.hypot(a, b), math.atan2(b, a)
    if amp == 0.0:
        return 0.0, 0.0
    return amp, phase


#: per model: envelope exponent, edge term present, row-weight power.  The
#: weight multiplies each sample by k**power so that the fast-decaying tail
#: does not drown in the first few samples.
_MODEL_SETTINGS = {
    "half_power": (0.5, False, 0.5),
    "threehalf_power_with_edge": (1.5, True, 1.5),
}


def _fit_one(
    values: np.ndarray, n_half: int, omega: float, exponent: float, with_edge: bool,
    window: tuple[int, int], weight_power: float, subleading: bool = False,
) -> tuple[tuple[float, float], tuple[float, float], float]:
    k_all = np.arange(1, len(values) + 1, dtype=float)
    lo, hi = window
    sel = (k_all >= lo) & (k_all <= hi)
    n_cols = 2 + 2 * int(with_edge) + 2 * int(subleading)
    if sel.sum() < n_cols + 1:
        raise RangeError(f"fit window {window} leaves too few samples")
    k = k_all[sel]
    y = np.asarray(values, dtype=complex)[sel]
    if np.abs(y.imag).max() > 1e-9 * max(np.abs(y).max(), 1e-300):
        raise DimensionError("tail fit expects essentially real components")
    y = y.real
    base = k ** (-exponent)
    osc_s, osc_c = np.sin(omega * k), np.cos(omega * k)
    cols = [base * osc_s, base * osc_c]
    if subleading:
        nxt = k ** (-exponent - 1.0)
        cols += [nxt * osc_s, nxt * osc_c]
    if with_edge:
        edge = base / (n_half - k + 1.0)
        cols += [edge * osc_s, edge * osc_c]
    design = np.stack(cols, axis=1)
    wt = k**weight_power
    coef, *_ = np.linalg.lstsq(design * wt[:, None], y * wt, rcond=None)
    num = np.linalg.norm((design @ coef - y) * wt)
    res = float(num / max(np.linalg.norm(y * wt), 1e-300))
    main = _phase_pack(coef[0], coef[1])
    sub = _phase_pack(coef[-2], coef[-1]) if with_edge else (0.0, 0.0)
    return main, sub, res


def tail_fit(
    b: BasisFamily,
    model: str,
    window: tuple[int, int] | None = None,
    free_omega: bool = False,
) -> TailFitReport:
    """Fit the oscillatory power-law tails of a family's outer row.

    ``half_power`` fits ``A/k**0.5 * sin(omega k + phi)`` per subsequence
    (meant for the jacobi family); ``threehalf_power_with_edge`` adds the
    ``B/(k**1.5 (N-k+1))`` boundary term (meant for the orthogonal family)
    and therefore extends its default window to three samples short of the
    boundary, where that term is actually resolvable.  The frequency is
    fixed at 2*arcsin(s) unless ``free_omega`` is set, in which case it is
    profiled out with an auxiliary next-order column (which sharpens the
    frequency estimate by an order of magnitude) and reported.
    """
    if model not in TAIL_MODELS:
        raise ValueError(f"model must be one of {TAIL_MODELS}, got {model!r}")
    n = b.n_half
    if n < 30:
        raise RangeError(f"tail fits need at least 30 rows, got {n}")
    exponent, with_edge, weight_power = _MODEL_SETTINGS[model]
    if window is None:
        window = (8, n - 8) if not with_edge else (9, n - 3)
    seq1, seq2 = outer_subsequences(b.vectors, b.sector)
    if not 0.0 < b.s_param < 1.0:
        raise RangeError(f"tail frequency defined for 0 < s < 1, got {b.s_param}")
    omega0 = 2.0 * math.asin(b.s_param)

    def run(omega: float, subleading: bool = False):
        m1, e1, r1 = _fit_one(seq1, n, omega, exponent, with_edge, window, weight_power, subleading)
        m2, e2, r2 = _fit_one(seq2, n, omega, exponent, with_edge, window, weight_power, subleading)
        return (m1, m2, e1, e2, r1, r2)

    omega = omega0
    if free_omega:
        from scipy.optimize import minimize_scalar

        opt = minimize_scalar(
            lambda w: math.hypot(run(w, subleading=True)[4], run(w, subleading=True)[5]),
            bounds=(max(omega0 - 0.4, 1e-3), min(omega0 + 0.4, math.pi - 1e-3)),
            method="bounded",
            options={"xatol": 1e-10},
        )
        if not opt.success:
            raise ConvergenceError("frequency search did not converge")
        omega = float(opt.x)
    m1, m2, e1, e2, r1, r2 = run(omega)
    report = TailFitReport(
        model, omega, (m1[0], m2[0]), (m1[1], m2[1]), (e1[0], e2[0]),
        (e1[1], e2[1]), (r1, r2), window,
    )
    if max(report.residuals) > 0.5:
        raise ConvergenceError(f"tail model explains the data poorly: residuals {report.residuals}")
    return report


def fit_decay_exponent(b: BasisFamily, window: tuple[int, int] | None = None) -> float:
    """Decay exponent of a family's outer row, scanned on a fine grid.

    Both sublattice subsequences are fitted jointly with a shared exponent;
    each fit carries an auxiliary next-order column (one power of k faster)
    so that a strong subleading correction cannot bias the leading exponent,
    plus the boundary column for the orthogonal family.
    """
    n = b.n_half
    if n < 30:
        raise RangeError(f"exponent fits need at least 30 rows, got {n}")
    if window is None:
        window = (8, n - 3)
    if not 0.0 < b.s_param < 1.0:
        raise RangeError(f"tail frequency defined for 0 < s < 1, got {b.s_param}")
    omega = 2.0 * math.asin(b.s_param)
    with_edge = b.family == "orthogonal"
    seq1, seq2 = outer_subsequences(b.vectors, b.sector)
    grid = np.linspace(0.25, 2.5, 451)
    best_p, best_res = None, np.inf
    for p in grid:
        res = math.hypot(
            _fit_one(seq1, n, omega, float(p), with_edge, window, 2.0, subleading=True)[2],
            _fit_one(seq2, n, omega, float(p), with_edge, window, 2.0, subleading=True)[2],
        )
        if res < best_res:
            best_p, best_res = float(p), res
    if best_p is None or best_res > 0.5:
        raise ConvergenceError("no power law explains the data on the requested window")
    return best_p


# ---------------------------------------------------------------------------
# exports


def export_basis_csv(b: BasisFamily, path) -> None:
    """Write the family's rows as CSV with columns sector,m,site,re,im."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sector", "m", "site", "re", "im"])
        for m0, row in enumerate(b.vectors, start=1):
            for site0, val in enumerate(row, start=1):
                z = complex(val)
                writer.writerow([b.sector, m0, site0, "%.17g" % z.real, "%.17g" % z.imag])


def export_fit_report_json(report: TailFitReport, path) -> None:
    """Serialize a tail-fit report to a JSON file."""
    with open(path, "w") as fh:
        json.dump(asdict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
