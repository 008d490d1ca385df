import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from atommol import fock as F
from atommol import perturbative as P
from atommol.model import SystemParams, ValidationError, WitnessKind, parse_kinds

PARAMS = SystemParams(100.0, 1e4, 2, 1)


@pytest.fixture(scope="module")
def space():
    return F.build_space(PARAMS)


@pytest.fixture(scope="module")
def ham(space):
    return F.Hamiltonian.from_params(space, PARAMS)


@pytest.fixture(scope="module")
def psi0(space):
    return F.coherent_state(space, PARAMS.alpha, PARAMS.beta)


def test_auto_cutoffs_for_reference_amplitudes(space):
    assert space.cutoff_a >= 21 and space.cutoff_b >= 17
    assert space.dimension == (space.cutoff_a + 1) * (space.cutoff_b + 1)
    assert space.index(3, 2) == 3 * (space.cutoff_b + 1) + 2


def test_vacuum_space_is_minimal():
    s = F.build_space(SystemParams(1, 1, 0, 0))
    psi = F.coherent_state(s, 0, 0)
    assert psi.amplitudes[0] == 1 and psi.norm == 1


def test_cutoffs_below_mean_rejected():
    with pytest.raises(F.CutoffError):
        F.build_space(PARAMS, cutoff_a=3)
    with pytest.raises(ValidationError):
        F.FockSpace(0, 4)


def test_truncated_operator_relations():
    s = F.FockSpace(6, 5)
    a = s.a.toarray()
    comm = a @ a.T - a.T @ a
    na, _ = s.occupations
    inside = na < s.cutoff_a
    assert np.allclose(comm[np.ix_(inside, inside)], np.eye(inside.sum()))
    # the top row is where truncation shows
    assert not np.allclose(np.diag(comm)[~inside], 1)


def test_hamiltonian_hermitian_and_charge_conserving():
    s = F.FockSpace(9, 6)
    H = F.Hamiltonian(s, 3.0, 7.0).matrix
    assert abs(H - H.T.conj()).max() == 0
    na, nb = s.occupations
    K = sp.diags((na + 2 * nb).astype(float))
    assert abs(H @ K - K @ H).max() < 1e-12


def test_blocks_reassemble_full_matrix():
    s = F.FockSpace(8, 5)
    H = F.Hamiltonian(s, 2.0, -3.0)
    full = np.zeros((s.dimension, s.dimension))
    for idx, diag, off in H.blocks:
        full[idx, idx] = diag
        full[idx[:-1], idx[1:]] = off
        full[idx[1:], idx[:-1]] = off
    # sparse products round the off-diagonal square roots differently
    assert np.allclose(full, H.matrix.toarray(), rtol=1e-15, atol=1e-14)


def test_coherent_state_moments(psi0):
    assert F.moment(psi0, 1, 1, 0, 0) == pytest.approx(4.0, abs=1e-9)
    assert F.moment(psi0, 0, 1, 0, 0) == pytest.approx(2.0, abs=1e-9)
    assert F.moment(psi0, 0, 0, 0, 1) == pytest.approx(1.0, abs=1e-9)
    assert F.moment(psi0, 0, 0, 0, 0) == pytest.approx(1.0, abs=1e-12)


def test_coherent_state_cutoff_too_small():
    with pytest.raises(F.CutoffError, match="cutoff too small"):
        F.coherent_state(F.FockSpace(6, 6), 2, 1)


def test_propagate_identity_and_backwards(psi0, ham):
    assert F.propagate(psi0, ham, 0.0) is psi0
    later = F.propagate(psi0, ham, 1e-3)
    with pytest.raises(ValueError):
        F.propagate(later, ham, 5e-4)


@pytest.mark.parametrize("method,tol", [("spectral", 1e-10), ("dop853", 1e-13)])
def test_conservation_laws(psi0, ham, method, tol):
    # <H> is ~2e4 here, so the absolute 1e-8 bound needs a tight relative tolerance
    psi = F.propagate(psi0, ham, 0.5 / PARAMS.omega, method=method, tolerance=tol)
    assert abs(psi.norm - 1) < 1e-9
    assert abs(ham.charge(psi) - ham.charge(psi0)) < 1e-8
    assert abs(ham.expectation(psi) - ham.expectation(psi0)) < 1e-8


def test_block_propagation_matches_dense_expm():
    params = SystemParams(3.0, 5.0, 0.6 + 0.2j, 0.4j)
    s = F.FockSpace(10, 7)
    H = F.Hamiltonian.from_params(s, params)
    psi0 = F.coherent_state(s, params.alpha, params.beta, tail_bound=1e-6)
    t = 0.37
    ref = expm(-1j * t * H.matrix.toarray()) @ psi0.amplitudes
    for method in ("spectral", "expm"):
        got = F.propagate(psi0, H, t, method=method, tail_bound=1.0).amplitudes
        assert np.max(np.abs(got - ref)) < 1e-10
    got = F.propagate(psi0, H, t, method="dop853", tolerance=1e-12, tail_bound=1.0).amplitudes
    assert np.max(np.abs(got - ref)) < 1e-10


def test_dop853_halved_step_self_convergence(psi0, ham):
    t = 0.1 / PARAMS.omega
    tol = 1e-10
    coarse = F.propagate(psi0, ham, t, tolerance=tol, method="dop853")
    # cap the step at half of what the coarse run needed on average
    fine = F.propagate(psi0, ham, t, tolerance=tol, method="dop853", max_step=t / 400)
    n_coarse = F.moment(coarse, 1, 1, 0, 0).real
    n_fine = F.moment(fine, 1, 1, 0, 0).real
    assert abs(n_coarse - n_fine) < 10 * tol * max(1.0, n_fine)
    spectral = F.moment(F.propagate(psi0, ham, t), 1, 1, 0, 0).real
    assert abs(n_fine - spectral) < 10 * tol * n_fine


def test_cutoff_exhaustion_is_reported():
    params = SystemParams(100.0, 1e4, 2, 1)
    s = F.FockSpace(14, 9)
    H = F.Hamiltonian.from_params(s, params)
    psi0 = F.coherent_state(s, 2, 1, tail_bound=1e-4)
    with pytest.raises(F.CutoffError, match="cutoff exhausted at t="):
        F.propagate(psi0, H, 0.5 / params.omega)


def test_norm_drift_is_an_error_not_renormalized(psi0, ham):
    with pytest.raises(F.NumericalError, match="norm drift"):
        F.propagate(psi0, ham, 0.3 / PARAMS.omega, method="dop853", tolerance=1e-2, norm_tolerance=1e-12)


def test_moment_headroom(psi0):
    ha, hb = F.moment_headroom(psi0.space)
    F.moment(psi0, ha, ha, 0, 0)
    with pytest.raises(F.CutoffError):
        F.moment(psi0, ha + 1, ha + 1, 0, 0)


EXACT_KINDS = parse_kinds(
    "VarXa, VarYa, VarXb, VarYb, VarXab, VarYab, AmpSq1a, AmpSq2a, AmpSq1b, AmpSq2b, Da, Db, Dab, "
    "HZ1, HZ2, Duan, HOAa(3), HOAb(4), HZ1Higher(1,2), HZ1Higher(2,1), HZ2Higher(1,3), "
    "LeeR(2,1,a), LeeR(3,2,b)")


def test_exact_baselines(psi0):
    for k, v in zip(EXACT_KINDS, F.witnesses_exact(psi0, EXACT_KINDS)):
        assert v == pytest.approx(k.baseline, abs=1e-9), k


def test_exact_variance_matches_operator_definition(psi0, ham):
    psi = F.propagate(psi0, ham, 0.2 / PARAMS.omega)
    a = psi.space.a
    X = 0.5 * (a + a.T)
    v = psi.amplitudes
    ex = np.vdot(v, X @ v).real
    ex2 = np.vdot(v, X @ (X @ v)).real
    assert F.witness_exact(psi, WitnessKind("VarXa")) == pytest.approx(ex2 - ex**2, abs=1e-10)


def test_exact_agrees_with_closed_form_at_small_time(psi0, ham):
    t = 0.01 / PARAMS.omega
    psi = F.propagate(psi0, ham, t)
    for k in parse_kinds("VarXa, Db, HZ2, HZ2Higher(1,2)"):
        assert F.witness_exact(psi, k) == pytest.approx(P.evaluate(k, PARAMS, t), abs=1e-6)


def test_hz1_higher_reduced_amplitude_cross_check():
    # higher-order HZ-1 at alpha = 3 against the corrected closed form
    params = SystemParams(100.0, 1e4, 3, 1)
    t = 0.004 / params.omega
    psi = F.evolve(params, [0.004])[0]
    k = WitnessKind("HZ1Higher", 1, 2)
    assert F.witness_exact(psi, k) == pytest.approx(P.evaluate(k, params, t, corrected=True), abs=1e-6)


def test_cutoff_bump_insensitivity():
    wt = 0.5
    base = F.evolve(PARAMS, [wt])[0]
    ca, cb = base.space.cutoff_a, base.space.cutoff_b
    bumped = F.evolve(PARAMS, [wt], F.build_space(PARAMS, int(ca * 1.25), int(cb * 1.25)))[0]
    kinds = [k for k in EXACT_KINDS if k.tag not in ("LeeRa", "LeeRb")]
    for k, u, v in zip(kinds, F.witnesses_exact(base, kinds), F.witnesses_exact(bumped, kinds)):
        assert abs(u - v) < 1e-6, k


def test_snapshot_round_trip(tmp_path, psi0, ham):
    psi = F.propagate(psi0, ham, 1.7e-3)
    path = tmp_path / "state.txt"
    F.dump_state(psi, path, PARAMS)
    loaded, params = F.load_state(path)
    assert params == PARAMS and loaded.space == psi.space and loaded.time == psi.time
    assert np.array_equal(loaded.amplitudes, psi.amplitudes)
    # resuming from the snapshot equals propagating straight through
    resumed = F.propagate(loaded, ham, 3e-3)
    direct = F.propagate(psi0, ham, 3e-3)
    assert np.max(np.abs(resumed.amplitudes - direct.amplitudes)) < 1e-12


def test_snapshot_rejects_foreign_file(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("hello\n")
    with pytest.raises(ValueError):
        F.load_state(p)


@settings(max_examples=15, deadline=None)
@given(st.complex_numbers(max_magnitude=1.5), st.complex_numbers(max_magnitude=1.2),
       st.floats(0.0, 0.5))
def test_unitarity_and_charge_for_random_inputs(alpha, beta, wt):
    params = SystemParams(100.0, 1e4, alpha, beta)
    psi = F.evolve(params, [wt])[0]
    s = psi.space
    H = F.Hamiltonian.from_params(s, params)
    psi0 = F.coherent_state(s, alpha, beta)
    assert abs(psi.norm - psi0.norm) < 1e-9
    assert abs(H.charge(psi) - H.charge(psi0)) < 1e-8
    for k in parse_kinds("VarXa, Dab, HZ1"):
        assert np.isfinite(F.witness_exact(psi, k))
