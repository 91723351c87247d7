"""Folded-circuit influence matrix: fixed point, reduction, positivity,
light cone, and the correlator sandwich against a dense brute-force oracle."""

import numpy as np
import pytest

from floquet_im.circuit_im import (
    apply_temporal_tm,
    build_im_circuit,
    build_im_mirror,
    check_reduction,
    choi_matrix,
    correlator_one_point,
    reduced_im,
    reduction_cascade,
)
from floquet_im.errors import CapacityError, DimensionError
from floquet_im.params import ModelParams
from floquet_im.xxz_core import ID2, SY, SZ

from conftest import FF_ETA
from oracles import dense_correlator

UP = np.array([[1.0, 0.0], [0.0, 0.0]])
MIXED = np.eye(2) / 2.0


def make(eta=0.9j, u=0.47, q=1.3, n=1):
    return ModelParams(eta=eta, u=u, q_weight=q, n_half=n)


class TestTemporalFixedPoint:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_im_is_fixed(self, n):
        p = make(n=n)
        im = build_im_circuit(p)
        y = apply_temporal_tm(p, im.amplitudes)
        assert np.abs(y - im.amplitudes).max() <= 1e-10

    def test_random_draws(self, rng):
        for _ in range(5):
            p = make(
                eta=1j * rng.uniform(0.3, 1.3),
                u=rng.uniform(0.1, 1.2),
                q=rng.uniform(0.5, 2.0),
                n=2,
            )
            im = build_im_circuit(p)
            assert np.abs(apply_temporal_tm(p, im.amplitudes) - im.amplitudes).max() <= 1e-10

    def test_power_iteration_converges(self, rng):
        p = make(n=2)
        im = build_im_circuit(p)
        x = rng.standard_normal(256) + 1j * rng.standard_normal(256)
        for _ in range(50):
            x = apply_temporal_tm(p, x)
            x = x / np.linalg.norm(x)
        overlap = abs(np.vdot(im.amplitudes, x)) / (
            np.linalg.norm(im.amplitudes) * np.linalg.norm(x)
        )
        assert overlap == pytest.approx(1.0, abs=1e-8)

    def test_identity_gate_limit(self, rng):
        # u=0 makes the brick gate the identity: the boundary decouples and
        # the IM ties each period's in-leg to its out-leg
        p = make(u=0.0, n=1)
        im = build_im_circuit(p)
        assert np.abs(im.pair_tensor() - np.eye(4)).max() <= 1e-14
        y = apply_temporal_tm(p, im.amplitudes)
        assert np.abs(y - im.amplitudes).max() <= 1e-14
        # one column acts as the trace-pairing projector on any input
        from floquet_im.circuit_im import bath_pair_weights

        x = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        from floquet_im.states import from_pair_tensor, to_pair_tensor

        t = to_pair_tensor(x, 1)
        closure = bath_pair_weights(p.q_weight) @ t @ np.array([1.0, 0, 0, 1.0])
        want = closure * from_pair_tensor(np.eye(4, dtype=complex), 1)
        assert np.abs(apply_temporal_tm(p, x) - want).max() <= 1e-13

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            apply_temporal_tm(make(n=2), np.ones(16))


class TestReduction:
    @pytest.mark.parametrize("n_half", [1, 2, 3])
    def test_all_sites(self, n_half):
        im = build_im_circuit(make(n=n_half))
        for n in range(1, 2 * n_half + 1):
            assert check_reduction(im, n) <= 1e-10

    def test_scalar_one(self):
        for q in (1.0, 2.0):
            im = build_im_circuit(make(q=q, n=2))
            _, scal = reduction_cascade(im)
            assert scal == pytest.approx(1.0, abs=1e-12)

    def test_n1_q1_collapses_to_scalar(self):
        im = build_im_circuit(make(eta=FF_ETA, u=0.8, q=1.0, n=1))
        _, scal = reduction_cascade(im)
        assert scal == pytest.approx(1.0, abs=1e-14)

    def test_reduced_im_matches_smaller_build(self):
        p2 = make(n=2)
        p1 = make(n=1)
        small = reduced_im(build_im_circuit(p2))
        direct = build_im_circuit(p1)
        assert np.abs(small.amplitudes - direct.amplitudes).max() <= 1e-12

    def test_random_vector_fails(self, rng):
        from floquet_im.states import InfluenceMatrix

        x = rng.standard_normal(256) + 1j * rng.standard_normal(256)
        fake = InfluenceMatrix(x, 2, method="circuit")
        assert check_reduction(fake, 4) > 1e-2

    def test_site_range(self):
        im = build_im_circuit(make(n=1))
        with pytest.raises(DimensionError):
            check_reduction(im, 3)


class TestChoi:
    @pytest.mark.parametrize("n", [1, 2, 3])
    @pytest.mark.parametrize("q", [1.0, 2.0])
    def test_physical_density_matrix(self, n, q):
        im = build_im_circuit(make(eta=FF_ETA, u=0.5, q=q, n=n))
        rho = choi_matrix(im)
        assert np.abs(rho - rho.conj().T).max() <= 1e-12
        assert np.linalg.eigvalsh(rho).min() >= -1e-10
        assert np.trace(rho) == pytest.approx(1.0, abs=1e-10)

    def test_generic_eta(self):
        rho = choi_matrix(build_im_circuit(make(n=2)))
        assert np.abs(rho - rho.conj().T).max() <= 1e-12
        assert np.linalg.eigvalsh(rho).min() >= -1e-10


class TestLightCone:
    def test_two_extra_sites(self):
        p = make(n=2)
        a = build_im_circuit(p)
        b = build_im_circuit(p, n_bath=6)
        assert np.abs(a.amplitudes - b.amplitudes).max() <= 1e-12

    def test_undersized_bath_rejected(self):
        with pytest.raises(DimensionError):
            build_im_circuit(make(n=2), n_bath=3)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            build_im_circuit(make(n=6))


class TestCorrelator:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_identity_observable(self, n):
        p = make(eta=FF_ETA, u=0.5, q=2.0, n=n)
        val = correlator_one_point(build_im_mirror(p), build_im_circuit(p), UP, ID2)
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_infinite_temperature_sz(self):
        p = make(eta=FF_ETA, u=0.5, q=1.0, n=2)
        val = correlator_one_point(build_im_mirror(p), build_im_circuit(p), MIXED, SZ)
        assert abs(val) <= 1e-12

    @pytest.mark.parametrize("n,q", [(2, 1.0), (2, 2.0), (3, 2.0)])
    def test_against_dense_circuit(self, n, q):
        p = make(eta=FF_ETA, u=0.5, q=q, n=n)
        got = correlator_one_point(build_im_mirror(p), build_im_circuit(p), UP, SZ)
        want = dense_correlator(p, UP, SZ)
        assert abs(got - want) <= 1e-9

    def test_generic_state_and_observable(self, rng):
        p = make(n=2, q=1.7)
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        rho = a @ a.conj().T
        rho /= np.trace(rho)
        got = correlator_one_point(build_im_mirror(p), build_im_circuit(p), rho, SY)
        want = dense_correlator(p, rho, SY)
        assert abs(got - want) <= 1e-11

    def test_trace_validation(self):
        p = make(n=1)
        with pytest.raises(DimensionError):
            correlator_one_point(
                build_im_mirror(p), build_im_circuit(p), np.eye(2), ID2
            )


def test_json_roundtrip(tmp_path):
    from floquet_im.states import load_im_json, save_im_json

    im = build_im_circuit(make(n=2))
    path = tmp_path / "im.json"
    save_im_json(im, str(path))
    back = load_im_json(str(path))
    assert back.n_half == 2
    assert np.abs(back.amplitudes - im.amplitudes).max() <= 1e-15
