"""Influence matrix by direct contraction of the folded brick-wall circuit.

Geometry (canonical construction, bath sites 1..B, boundary leg 0):

* layer A (first half of each period): gates on bonds (0,1), (2,3), (4,5), ...
* layer B (second half): gates on bonds (1,2), (3,4), ...

Every bath site starts in the diagonal density matrix diag(q, 1/q)/(q+1/q)
and is traced at the final time.  The boundary leg is left open; its N gate
insertions emit the 2N forward/backward index pairs of the influence matrix.
The backward branch carries conj(G); since the gate is complex symmetric this
equals its inverse's matrix elements taken in the time-reversed direction.

Contraction runs column-by-column from the far end of the bath toward the
boundary.  The working object is the "environment": for each period one
incoming and one outgoing pair-leg of the bond gates on the current cut,
i.e. a tensor with 4^{2N} entries; absorbing one site threads a save
worldline (dimension 4) through it, so peak memory stays at a few copies of
the final influence matrix itself.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .params import ModelParams
from .states import (
    InfluenceMatrix,
    ensure_capacity,
    from_pair_tensor,
    n_sites_of,
    to_pair_tensor,
)
from .xxz_core import brick_gate

#: pair-leg cap implementing the final-time trace, components (s, sbar)
TRACE_CAP = np.array([1.0, 0.0, 0.0, 1.0])


def bath_pair_weights(q: float) -> np.ndarray:
    """vec(diag(q, 1/q)/(q+1/q)) on a folded pair leg."""
    z = q + 1.0 / q
    return np.array([q / z, 0.0, 0.0, 1.0 / (q * z)], dtype=complex)


def folded_gate(g: np.ndarray) -> np.ndarray:
    """Forward gate tensored with the conjugate backward branch.

    Returns F[p1_out, p2_out, p1_in, p2_in] with pair index p = 2*s + sbar.
    """
    g4 = g.reshape(2, 2, 2, 2)
    f = np.einsum("ABab,XYxy->AXBYaxby", g4, np.conj(g4))
    return f.reshape(4, 4, 4, 4)


def _emit_kernel(folded: np.ndarray) -> np.ndarray:
    """Reindex a folded bond gate for worldline threading.

    Output L[I, O, w_in, w_out]: (I, O) are the emitted pair legs on the far
    side of the bond, (w_in, w_out) the worldline legs of the site being
    absorbed.
    """
    return np.ascontiguousarray(folded.transpose(2, 0, 3, 1))


def _seed_env(kernel: np.ndarray, n_periods: int, rho_vec: np.ndarray) -> np.ndarray:
    """Environment of the outermost bath site (one bond gate per period)."""
    arr = rho_vec.copy()  # axis: worldline
    for _ in range(n_periods):
        # arr[..., w] x L[I,O,w,W] -> arr[..., I, O, W]
        arr = np.tensordot(arr, kernel, axes=[[arr.ndim - 1], [2]])
    arr = arr[..., 0] + arr[..., 3]  # trace cap
    return arr


def _absorb(
    env: np.ndarray,
    kernel: np.ndarray,
    n_periods: int,
    rho_vec: np.ndarray,
    emit_first: bool,
) -> np.ndarray:
    """Thread one site's worldline through ``env``, emitting fresh legs.

    ``env`` axes: (in_1, out_1, ..., in_N, out_N).  Consuming period k means
    contracting the worldline into in_k and continuing from out_k; emitting
    applies the bond gate on the next cut, appending its far-side legs.
    ``emit_first`` selects the order of the two operations inside a period
    (the bond to the emitted side belongs to layer A when the absorbed site
    index is odd in the canonical geometry).
    """
    arr = np.multiply.outer(rho_vec, env.ravel()).reshape((4, -1))
    emitted_size = 1
    for _ in range(n_periods):
        remaining = arr.shape[1] // (16 * emitted_size)

        def do_emit(a):
            # a: (w, rest) -> (W, rest, I*O): kernel axes L[I,O,w,W]
            t = np.tensordot(kernel, a, axes=[[2], [0]])  # (I, O, W, rest)
            t = t.transpose(2, 3, 0, 1)
            return np.ascontiguousarray(t).reshape(4, -1)

        def do_consume(a, rest, esize):
            # a viewed as (w, in_k, out_k, rest', e); contract w with in_k
            t = a.reshape(4, 4, 4, rest, esize)
            return np.einsum("wwor...->or...", t).reshape(4, -1)

        if emit_first:
            arr = do_emit(arr)
            emitted_size *= 16
            arr = do_consume(arr, remaining, emitted_size)
        else:
            arr = do_consume(arr, remaining, emitted_size)
            arr = do_emit(arr)
            emitted_size *= 16
    out = arr[0] + arr[3]
    return out.reshape((4,) * (2 * n_periods))


def _contract_network(p: ModelParams, n_bath: int, gate: np.ndarray) -> np.ndarray:
    """Pair tensor (axes p_1 ... p_{2N}) of the canonical influence matrix."""
    n = p.n_half
    if n_bath < 2 * n:
        raise DimensionError(f"bath of {n_bath} sites cannot cover {2 * n} time steps")
    kernel = _emit_kernel(folded_gate(gate))
    rho_vec = bath_pair_weights(p.q_weight)
    env = _seed_env(kernel, n, rho_vec)
    for m in range(n_bath - 1, 0, -1):
        env = _absorb(env, kernel, n, rho_vec, emit_first=(m % 2 == 1))
    return env


def build_im_circuit(p: ModelParams, n_bath: int | None = None) -> InfluenceMatrix:
    """Influence matrix of the brick-wall bath by folded contraction.

    ``n_bath`` defaults to the light-cone width 2N; larger baths must give
    the same result (tested invariant).
    """
    ensure_capacity(4 * p.n_half)
    n_bath = 2 * p.n_half if n_bath is None else n_bath
    pair = _contract_network(p, n_bath, brick_gate(p))
    amps = from_pair_tensor(pair, p.n_half)
    return InfluenceMatrix(amps, p.n_half, method="circuit")


def build_im_mirror(p: ModelParams, n_bath: int | None = None) -> InfluenceMatrix:
    """Influence matrix of the bath coupled in the second half of each period.

    Same brick wall reflected through the boundary: bond (j, j+1) sits in
    layer A when j is odd, so the boundary gate acts after the bath's
    internal layer-A gates.  Its temporal pair n corresponds to the global
    time indices (2n, 2n+1) when sandwiched against the canonical matrix.
    """
    ensure_capacity(4 * p.n_half)
    n = p.n_half
    n_bath = 2 * n if n_bath is None else n_bath
    if n_bath < 2 * n:
        raise DimensionError(f"bath of {n_bath} sites cannot cover {2 * n} time steps")
    kernel = _emit_kernel(folded_gate(brick_gate(p)))
    rho_vec = bath_pair_weights(p.q_weight)
    env = _seed_env(kernel, n, rho_vec)
    for m in range(n_bath - 1, 0, -1):
        env = _absorb(env, kernel, n, rho_vec, emit_first=(m % 2 == 0))
    return InfluenceMatrix(from_pair_tensor(env, n), n, method="circuit")


def apply_temporal_tm(p: ModelParams, x: np.ndarray) -> np.ndarray:
    """One spatial column of the folded circuit applied to a temporal vector.

    Appends one bath site: its worldline consumes the incoming functional at
    the layer-B slots and emits fresh boundary pairs at the layer-A slots.
    The influence matrix is the fixed point.
    """
    arr = np.asarray(x, dtype=complex).ravel()
    n = n_sites_of(arr)
    if n != 4 * p.n_half:
        raise DimensionError(f"temporal vector has {n} sites, expected {4 * p.n_half}")
    env = to_pair_tensor(arr, p.n_half)
    kernel = _emit_kernel(folded_gate(brick_gate(p)))
    pair = _absorb(env, kernel, p.n_half, bath_pair_weights(p.q_weight), emit_first=True)
    return from_pair_tensor(pair, p.n_half)


# ---------------------------------------------------------------------------
# physicality checks

def reduction_cascade(im: InfluenceMatrix) -> tuple[list[float], complex]:
    """Trace pairs from the top; each step must produce a delta on the pair
    below.  Returns per-step residuals and the final scalar (ideally 1)."""
    x = im.pair_tensor()
    residuals = []
    for _ in range(im.n_half):
        y = x[..., 0] + x[..., 3]
        res = max(
            float(np.abs(y[..., 1]).max()),
            float(np.abs(y[..., 2]).max()),
            float(np.abs(y[..., 0] - y[..., 3]).max()),
        )
        residuals.append(res)
        x = y[..., 0]
    return residuals, complex(x)


def check_reduction(im: InfluenceMatrix, n: int) -> float:
    """Residual of the trace-reduction identity at temporal pair ``n``.

    Pairs are consumed from the top in steps of two (one traced pair and one
    delta pair); the residual reported is that of the step consuming ``n``.
    """
    if not 1 <= n <= 2 * im.n_half:
        raise DimensionError(f"pair index {n} outside 1..{2 * im.n_half}")
    residuals, _ = reduction_cascade(im)
    step = (2 * im.n_half - n) // 2
    return residuals[step]


def reduced_im(im: InfluenceMatrix) -> InfluenceMatrix:
    """The (N-1)-period influence matrix left after one reduction step."""
    if im.n_half < 2:
        raise DimensionError("nothing left to reduce below one period")
    x = im.pair_tensor()
    y = x[..., 0] + x[..., 3]
    return InfluenceMatrix(
        from_pair_tensor(y[..., 0], im.n_half - 1), im.n_half - 1, method=im.method
    )


def choi_matrix(im: InfluenceMatrix) -> np.ndarray:
    """Density matrix obtained from the influence functional by the
    operator-state duality; Hermitian, PSD, unit trace for a physical IM.

    The full diagonal sum of the functional is 2^N (each reduction step
    contributes one traced pair and one factor-2 delta pair), so that is the
    normalization used here.
    """
    n = im.n_half
    t = im.tensor()
    fwd = [2 * n + m - 1 for m in range(1, 2 * n + 1)]  # s_1 .. s_2N
    bwd = [2 * n - m for m in range(1, 2 * n + 1)]  # sbar_1 .. sbar_2N
    mat = t.transpose(fwd + bwd).reshape(1 << (2 * n), 1 << (2 * n))
    return mat / (1 << n)


# ---------------------------------------------------------------------------
# correlator sandwich

def correlator_one_point(
    im_l: InfluenceMatrix,
    im_r: InfluenceMatrix,
    rho1: np.ndarray,
    obs: np.ndarray,
) -> complex:
    """One-point function of a boundary observable after 2N time steps.

    ``im_r`` carries temporal indices 1..2N (its bath interacts in the first
    half of each period), ``im_l`` indices 2..2N+1; the initial boundary
    density matrix attaches at index 1 and the observable at index 2N+1.
    """
    if im_l.n_half != im_r.n_half:
        raise DimensionError("left/right influence matrices disagree on N")
    n2 = 2 * im_r.n_half
    rho1 = np.asarray(rho1, dtype=complex)
    obs = np.asarray(obs, dtype=complex)
    if rho1.shape != (2, 2) or obs.shape != (2, 2):
        raise DimensionError("rho1 and obs must be 2x2")
    if abs(np.trace(rho1) - 1.0) > 1e-12:
        raise DimensionError("rho1 must have unit trace")
    # pair vectors: index p = 2s + sbar; rho enters as rho[s, sbar], the
    # observable as obs[sbar, s] (orientations fixed against the dense
    # brute-force circuit oracle)
    rho_vec = rho1.reshape(-1)
    obs_vec = obs.T.reshape(-1)
    letters = [chr(ord("a") + k) for k in range(n2 + 1)]
    spec = "{},{},{},{}->".format(
        "".join(letters[:n2]), "".join(letters[1:]), letters[0], letters[n2]
    )
    val = np.einsum(
        spec, im_r.pair_tensor(), im_l.pair_tensor(), rho_vec, obs_vec, optimize=True
    )
    return complex(val)
