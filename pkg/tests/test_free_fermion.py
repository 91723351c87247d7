"""Fermionic route at the XX anisotropy point: closed-form single-particle
transfer blocks, local hopping generators and their Jordan chains, the
parity-resolved Gaussian form of the dual transfer operator, and the
occupation-built influence matrix against the circuit contraction."""

import cmath

import numpy as np
import pytest

from floquet_im import free_fermion as ff
from floquet_im.aux_transfer import TransferSpec, assemble_dense
from floquet_im.circuit_im import build_im_circuit, check_reduction
from floquet_im.errors import (
    CapacityError,
    DegenerateError,
    LogBranchError,
    NotEigenvalueError,
    PoleError,
)
from floquet_im.linalg import rank_sequence
from floquet_im.params import ModelParams
from floquet_im.states import all_up, scalar_aligned_diff

from conftest import FF_ETA
from oracles import dense_creation


def make(u=0.5, q=2.0, n=2):
    return ModelParams(eta=FF_ETA, u=u, q_weight=q, n_half=n)


PAIRINGS = [(side, sector) for side in ff.SIDES for sector in ff.SECTORS]


class TestSingleParticleTransfer:
    def test_printed_diagonal_entry(self):
        m = ff.single_particle_transfer(make(u=1.0), 0.3, "cl")
        assert m[1, 1] == pytest.approx(1j * np.tanh(0.3), abs=1e-14)

    def test_diagonals_alternate(self):
        u, v = 0.7, 0.23
        mcl = ff.single_particle_transfer(make(u=u), v, "cl")
        mq = ff.single_particle_transfer(make(u=u), v, "q")
        assert np.allclose(np.diag(mcl)[0::2], -1j / np.tanh(u - v), atol=1e-14)
        assert np.allclose(np.diag(mcl)[1::2], 1j * np.tanh(v), atol=1e-14)
        assert np.allclose(np.diag(mq)[0::2], -1j * np.tanh(u - v), atol=1e-14)
        assert np.allclose(np.diag(mq)[1::2], 1j / np.tanh(v), atol=1e-14)

    def test_triangular_support_exact(self):
        mcl = ff.single_particle_transfer(make(n=3), 0.31, "cl")
        mq = ff.single_particle_transfer(make(n=3), 0.31, "q")
        assert not np.triu(mcl, 1).any()
        assert not np.tril(mq, -1).any()

    def test_occupied_eigenvalue_product_is_one(self):
        # the two occupied root spaces carry eigenvalues whose product with
        # the per-site vacuum factor is exactly 1: the influence matrix is a
        # fixed point
        p, v = make(), 0.31
        lam_cl = ff.block_transfer_eigenvalue(p, v, "cl", "left", 0)
        lam_q = ff.block_transfer_eigenvalue(p, v, "q", "left", 1)
        site_factor = np.tanh(v) * np.tanh(p.u - v)
        assert lam_cl * lam_q * site_factor == pytest.approx(1.0, abs=1e-14)

    def test_two_argument_commutativity(self):
        p = make()
        for sector in ff.SECTORS:
            a = ff.single_particle_transfer(p, 0.31, sector)
            b = ff.single_particle_transfer(p, -0.12 + 0.4j, sector)
            assert np.abs(a @ b - b @ a).max() <= 1e-12

    def test_pole_rejected(self):
        with pytest.raises(PoleError):
            ff.single_particle_transfer(make(u=0.5), 0.5, "cl")

    def test_xx_point_required(self):
        p = ModelParams(eta=0.9j, u=0.5, q_weight=2.0, n_half=1)
        with pytest.raises(PoleError):
            ff.single_particle_transfer(p, 0.31, "cl")


@pytest.fixture(scope="module")
def conjugation_data():
    p, v = make(), 0.31
    sites = p.n_legs
    cdag = [dense_creation(j, sites) for j in range(1, sites + 1)]
    gauss = ff.gaussian_operator(ff.chain_transfer_matrix(p, v, "even"), sites)
    vv, _ = ff.keldysh_rotation(p, "even")
    rotated = [sum(vv[a, j] * cdag[j] for j in range(sites)) for a in range(sites)]
    basis = np.stack([m.ravel() for m in rotated], axis=1)
    ginv = np.linalg.inv(gauss)
    coef = np.zeros((sites, sites), complex)
    closure = 0.0
    for a in range(sites):
        target = (gauss @ rotated[a] @ ginv).ravel()
        sol, *_ = np.linalg.lstsq(basis, target, rcond=None)
        coef[:, a] = sol
        closure = max(closure, np.linalg.norm(basis @ sol - target))
    return p, v, coef, closure


class TestDenseConjugation:
    """The even-sector Gaussian conjugates rotated creation operators by the
    block-diagonal closed forms; together with the dense Gaussian match this
    certifies the printed entries column by column."""

    def test_conjugation_stays_in_mode_span(self, conjugation_data):
        _, _, _, closure = conjugation_data
        assert closure <= 1e-8

    def test_columns_match_closed_forms(self, conjugation_data):
        p, v, coef, _ = conjugation_data
        half = p.n_legs // 2
        mcl = ff.single_particle_transfer(p, v, "cl")
        mq = ff.single_particle_transfer(p, v, "q")
        assert np.abs(coef[:half, :half] - mcl).max() <= 1e-10
        assert np.abs(coef[half:, half:] - mq).max() <= 1e-10

    def test_cross_sector_blocks_vanish(self, conjugation_data):
        p, _, coef, _ = conjugation_data
        half = p.n_legs // 2
        assert np.abs(coef[:half, half:]).max() <= 1e-12
        assert np.abs(coef[half:, :half]).max() <= 1e-12


class TestKeldyshRotation:
    @pytest.mark.parametrize("parity", ["even", "odd"])
    def test_inverse_transpose_pair(self, parity):
        vv, ww = ff.keldysh_rotation(make(q=1.7), parity)
        assert np.abs(vv @ ww.T - np.eye(len(vv))).max() <= 1e-13

    def test_rows_unit_normalized(self):
        vv, _ = ff.keldysh_rotation(make(q=1.7), "even")
        assert np.allclose(np.linalg.norm(vv, axis=1), 1.0, atol=1e-13)

    def test_equal_weights_even_sector(self):
        # q = 1: classical rows become (e_i - e_mirror)/sqrt(2)
        p = make(q=1.0)
        sites = p.n_legs
        vv, _ = ff.keldysh_rotation(p, "even")
        expect = np.zeros(sites)
        expect[0], expect[-1] = 1.0, -1.0
        assert np.abs(vv[0] - expect / np.sqrt(2.0)).max() <= 1e-14

    def test_equal_weights_odd_sector_degenerate(self):
        with pytest.raises(DegenerateError):
            ff.keldysh_rotation(make(q=1.0), "odd")


class TestHoppingGenerators:
    @pytest.mark.parametrize("side,sector", PAIRINGS)
    def test_commutes_with_transfer(self, side, sector, rng):
        p = make()
        h = ff.hopping_generator(p, side, sector)
        for _ in range(20):
            v = rng.uniform(-0.9, 0.9) + 1j * rng.uniform(-0.8, 0.8)
            if min(abs(v), abs(v - p.u)) < 0.05:
                continue
            m = ff.single_particle_transfer(p, v, sector)
            assert np.abs(m @ h - h @ m).max() <= 1e-12

    @pytest.mark.parametrize("side,sector", PAIRINGS)
    def test_spectrum_zero_one_balanced(self, side, sector):
        p = make(n=3)
        h = ff.hopping_generator(p, side, sector)
        eigs = np.sort(np.linalg.eigvals(h).real)
        assert np.allclose(eigs[: p.n_half], 0.0, atol=1e-8)
        assert np.allclose(eigs[p.n_half :], 1.0, atol=1e-8)

    def test_bandwidth_at_most_two(self):
        h = ff.hopping_generator(make(n=3), "left", "cl")
        idx = np.nonzero(h)
        assert max(abs(i - j) for i, j in zip(*idx)) <= 2

    @pytest.mark.parametrize("lam", [0.0, 1.0])
    def test_rank_sequence_descends_by_one(self, lam):
        # geometric multiplicity one per eigenvalue: a single chain of length N
        p = make(n=3)
        h = ff.hopping_generator(p, "left", "cl")
        ranks = rank_sequence(h, lam, p.n_half + 1)
        expect = [2 * p.n_half - k for k in range(1, p.n_half + 1)]
        assert ranks[: p.n_half] == expect
        assert ranks[p.n_half] == p.n_half


class TestJordanChain:
    def test_chain_length_equals_n(self):
        p = make(n=3)
        chain = ff.jordan_chain(ff.hopping_generator(p, "left", "cl"), 0.0)
        assert chain.shape == (3, 6)

    @pytest.mark.parametrize("sector,lam", [("cl", 0.0), ("cl", 1.0), ("q", 0.0), ("q", 1.0)])
    def test_chain_relations(self, sector, lam):
        p = make(n=3)
        h = ff.hopping_generator(p, "left", sector)
        chain = ff.jordan_chain(h, lam)
        shifted = h - lam * np.eye(h.shape[0])
        assert np.abs(shifted @ chain[0]).max() <= 1e-10
        for m in range(1, len(chain)):
            assert np.abs(shifted @ chain[m] - chain[m - 1]).max() <= 1e-10

    def test_span_invariant_under_transfer(self):
        p = make(n=3)
        h = ff.hopping_generator(p, "left", "cl")
        chain = ff.jordan_chain(h, 0.0)
        m = ff.single_particle_transfer(p, 0.31, "cl")
        image = chain @ m.T
        proj = np.linalg.lstsq(chain.T, image.T, rcond=None)[0]
        assert np.abs(chain.T @ proj - image.T).max() <= 1e-10

    def test_not_an_eigenvalue(self):
        h = ff.hopping_generator(make(), "left", "cl")
        with pytest.raises(NotEigenvalueError):
            ff.jordan_chain(h, 0.37)


class TestGaussianForm:
    def test_dense_match_both_parities(self):
        res = ff.gaussian_form_residuals(make(), 0.31)
        assert res["even"] <= 1e-8
        assert res["odd"] <= 1e-8

    def test_pseudovacuum_eigenvalue(self):
        p, v = make(), 0.31
        dense = assemble_dense(TransferSpec(p, v, "tilde"))
        vac = all_up(p.n_legs)
        lam = ff.vacuum_eigenvalue(p, v)
        assert lam == pytest.approx((np.tanh(v) * np.tanh(p.u - v)) ** p.n_half, abs=1e-14)
        assert np.abs(dense @ vac - lam * vac).max() <= 1e-12

    def test_parity_prefactor_ratio(self):
        p, v = make(q=1.8), 0.31
        ratio = ff.sector_prefactor(p, v, "odd") / ff.sector_prefactor(p, v, "even")
        q2 = p.q_weight**2
        assert ratio == pytest.approx((q2 - 1.0) / (q2 + 1.0), abs=1e-14)

    def test_dense_capacity(self):
        with pytest.raises(CapacityError):
            ff.gaussian_form_residuals(make(n=4), 0.31)

    def test_log_generator_exponentiates_back(self):
        from scipy.linalg import expm

        p, v = make(), 0.31
        gen = ff.gaussian_log_generator(p, v, "even")
        target = ff.chain_transfer_matrix(p, v, "even")
        assert np.abs(expm(gen) - target).max() <= 1e-9

    def test_log_branch_guard(self):
        with pytest.raises(LogBranchError):
            ff.gaussian_log_generator(make(), 0.31, "even", margin=10.0)


class TestInfluenceMatrixRoute:
    @pytest.mark.parametrize("n,q", [(1, 2.0), (2, 2.0), (2, 1.0), (3, 1.5)])
    def test_matches_circuit_contraction(self, n, q):
        p = make(q=q, n=n)
        im_f = ff.build_im_fermionic(p)
        im_c = build_im_circuit(p)
        assert np.abs(im_f.amplitudes - im_c.amplitudes).max() <= 1e-10

    def test_reduction_cascade(self):
        p = make(n=3)
        im = ff.build_im_fermionic(p)
        for pair in range(1, 2 * p.n_half + 1):
            assert check_reduction(im, pair) <= 1e-10

    @pytest.mark.parametrize("basis", ["adjugate", "orthogonal"])
    def test_basis_choice_changes_scalar_only(self, basis):
        p = make()
        ref = ff.build_im_fermionic(p)
        other = ff.build_im_fermionic(p, basis=basis)
        resid, scale = scalar_aligned_diff(other.amplitudes, ref.amplitudes)
        assert resid <= 1e-9
        if basis == "orthogonal":
            # unit-triangular basis change: no scalar at all
            assert scale == pytest.approx(1.0, abs=1e-9)

    def test_random_block_mixing_changes_scalar_only(self, rng):
        # replacing occupied modes by any invertible combination multiplies
        # the Slater state by the determinant of the mixing
        p = make()
        occ = ff.influence_occupation(p.n_half)
        phi = ff.mode_matrix(p, occ)
        psi = ff.slater_state(phi, p.n_legs)
        mix = rng.standard_normal((len(phi),) * 2) + 1j * rng.standard_normal((len(phi),) * 2)
        psi_mixed = ff.slater_state(mix @ phi, p.n_legs)
        resid, scale = scalar_aligned_diff(psi_mixed, psi)
        assert resid <= 1e-9
        assert scale == pytest.approx(np.linalg.det(mix), rel=1e-8)

    def test_unknown_basis_rejected(self):
        with pytest.raises(ValueError):
            ff.build_im_fermionic(make(), basis="fourier")


class TestManyBodyHopping:
    @pytest.mark.parametrize("parity", ["even", "odd"])
    def test_commutes_with_dense_transfer(self, parity):
        # the quadratic form mixes the two halves with a parity-dependent
        # ratio, so the commutator vanishes on the matching parity sector
        p = make()
        dense = assemble_dense(TransferSpec(p, 0.31, "tilde"))
        mask = ff.parity_mask(p.n_legs, parity)
        sub = np.ix_(mask, mask)
        for sector in ff.SECTORS:
            big = ff.many_body_hopping(p, "left", sector, parity)
            comm = (big @ dense - dense @ big)[sub]
            assert np.abs(comm).max() <= 1e-9

    def test_influence_matrix_is_root_vector(self):
        from floquet_im.aux_transfer import odd_sy_conjugation

        p = make()
        vec = odd_sy_conjugation(ff.build_im_fermionic(p).amplitudes)
        h_cl = ff.many_body_hopping(p, "left", "cl", "even")
        h_q = ff.many_body_hopping(p, "left", "q", "even")
        scale = np.abs(vec).max()
        assert np.abs(h_cl @ vec).max() / scale <= 1e-9
        assert np.abs(h_q @ vec - p.n_half * vec).max() / scale <= 1e-9

    def test_vacuum_annihilated(self):
        p = make()
        vac = all_up(p.n_legs)
        big = ff.many_body_hopping(p, "left", "cl", "even")
        assert np.abs(big @ vac).max() <= 1e-9


def test_occupation_spec_totals():
    occ = ff.influence_occupation(3)
    assert (occ.n_cl0, occ.n_cl1, occ.n_q0, occ.n_q1) == (3, 0, 0, 3)
    assert occ.total() == 6


def test_csv_export(tmp_path):
    import pandas as pd

    path = tmp_path / "blocks.csv"
    ff.export_single_particle_csv(make(), 0.31, str(path))
    frame = pd.read_csv(path)
    assert set(frame["kind"]) == {"transfer", "hopping"}
    assert {"row", "col", "re", "im"} <= set(frame.columns)
