import numpy as np
import pytest

from hybrid_observer import numerics
from hybrid_observer.exceptions import AssumptionViolation, DesignError
from hybrid_observer.system_design import (
    SystemModel,
    build_L,
    check_joint_observability,
    design_agent,
    design_agents,
    place_observer_gain,
    reduce_pair,
    unobservable_subspace,
    validate_gain_matrix,
)

from _systems import A_EX, C_EX, K_EX, L_EX, random_system


def projector(basis):
    return basis @ basis.T


def test_unobservable_subspaces_example():
    E = np.eye(4)
    np.testing.assert_allclose(projector(unobservable_subspace(C_EX[0], A_EX)),
                               np.diag([0, 0, 1.0, 1.0]), atol=1e-12)
    np.testing.assert_allclose(projector(unobservable_subspace(C_EX[1], A_EX)),
                               np.diag([1.0, 0, 1.0, 1.0]), atol=1e-12)
    assert unobservable_subspace(E, A_EX).shape == (4, 0)


def test_build_L_agent2_and_agent3():
    L2 = build_L(C_EX[1], A_EX)
    assert L2.shape == (1, 4)
    np.testing.assert_allclose(np.abs(L2), [[0, 1, 0, 0]], atol=1e-12)
    L3 = build_L(C_EX[2], A_EX)
    assert L3.shape == (2, 4)
    # same row space as the published L3 (both orthonormal-row)
    np.testing.assert_allclose(L3.T @ L3, L_EX[2].T @ L_EX[2], atol=1e-12)


def test_build_L_observable_pair_is_orthogonal():
    L = build_L(np.array([[1.0, 0, 0, 0], [0, 0, 1, 0]]), np.diag([1.0, 2, 3, 4]) + np.eye(4, k=1))
    assert L.shape == (4, 4)
    np.testing.assert_allclose(L @ L.T, np.eye(4), atol=1e-12)


def test_build_L_rejects_zero_channel():
    with pytest.raises(AssumptionViolation):
        build_L(np.zeros((1, 4)), A_EX)


def test_reduce_pair_published_matrices():
    Cbar, Abar = reduce_pair(C_EX[0], A_EX, L_EX[0])
    np.testing.assert_allclose(Abar, [[0, 0], [0.4, 0]], atol=1e-14)
    np.testing.assert_allclose(Cbar, [[0, 1]], atol=1e-14)
    Cbar, Abar = reduce_pair(C_EX[1], A_EX, L_EX[1])
    np.testing.assert_allclose(Abar, [[0]], atol=1e-14)
    np.testing.assert_allclose(Cbar, [[1]], atol=1e-14)
    Cbar, Abar = reduce_pair(C_EX[2], A_EX, L_EX[2])
    np.testing.assert_allclose(Abar, [[0.1, -1.9], [2.1, 0.1]], atol=1e-13)
    np.testing.assert_allclose(Cbar, [[0, np.sqrt(2)]], atol=1e-13)


def test_reduce_pair_identity_L():
    A = np.array([[0.0, 1.0], [-2.0, -3.0]])
    C = np.array([[1.0, 0.0]])
    Cbar, Abar = reduce_pair(C, A, np.eye(2))
    np.testing.assert_allclose(Abar, A)
    np.testing.assert_allclose(Cbar, C)


def test_reduce_pair_detects_wrong_kernel():
    with pytest.raises(DesignError):
        reduce_pair(C_EX[0], A_EX, np.array([[1.0, 0, 0, 0], [0, 0, 1, 0]]))


def test_published_gains():
    d2 = design_agent(C_EX[1], A_EX, L=L_EX[1], K=K_EX[1])
    assert d2.observer_spectrum().max_real_part == pytest.approx(-2.0)
    d1 = design_agent(C_EX[0], A_EX, L=L_EX[0], K=K_EX[0])
    np.testing.assert_allclose(sorted(d1.observer_spectrum().eigenvalues.real), [-4, -2],
                               atol=1e-10)
    d3 = design_agent(C_EX[2], A_EX, L=L_EX[2], K=K_EX[2])
    # trace -5.004..., det 6.004...: two decimals of rounding leave the slow pole near -2
    ev = sorted(d3.observer_spectrum().eigenvalues.real)
    assert ev[0] == pytest.approx(-3.0, abs=0.01)
    assert ev[1] == pytest.approx(-2.0, abs=0.01)


@pytest.mark.parametrize("omega", [0.1, 0.5, 2.0, 7.0])
def test_place_gain_meets_rate(rng, omega):
    for _ in range(10):
        model = random_system(rng)
        for C in model.C:
            L = build_L(C, model.A)
            Cbar, Abar = reduce_pair(C, model.A, L)
            K = place_observer_gain(Cbar, Abar, omega)
            assert numerics.eigenvalues(Abar + K @ Cbar).max_real_part <= -omega + 1e-6 * omega
            np.testing.assert_array_equal(K, place_observer_gain(Cbar, Abar, omega))


def test_place_gain_scalar_case():
    K = place_observer_gain(np.array([[1.0]]), np.array([[0.0]]), 2.0)
    assert K[0, 0] == pytest.approx(-2.0)


def test_joint_observability_example(example_model):
    rep = check_joint_observability(example_model)
    assert rep.passed and rep.rank == 4
    assert all(r < 4 for r in rep.channel_ranks)
    # by hand: without channel 1 nothing sees x1; without channel 3 nothing sees x3, x4
    for drop, expected in ((1, 3), (2, 4), (3, 2)):
        keep = [C for i, C in enumerate(C_EX, 1) if i != drop]
        assert check_joint_observability(A_EX, keep).rank == expected


def test_joint_observability_identity_output():
    assert check_joint_observability(np.ones((3, 3)), [np.eye(3)]).passed


def test_model_rejects_zero_channel_and_rank_deficiency():
    with pytest.raises(AssumptionViolation) as exc:
        SystemModel(A_EX, (C_EX[0], np.zeros((1, 4)), C_EX[2]))
    assert exc.value.assumption == "nonzero_channel"
    assert "channel 2 zero" in str(exc.value)
    with pytest.raises(AssumptionViolation) as exc:
        SystemModel(A_EX, (C_EX[0], C_EX[1]))
    assert exc.value.assumption == "joint_observability"


def test_validate_gain_matrix():
    L = L_EX[2]
    assert validate_gain_matrix(L, np.linalg.inv(L @ L.T))
    assert not validate_gain_matrix(L, 2 * np.eye(2))
    assert validate_gain_matrix(L, 0.5 * np.eye(2))
    with pytest.raises(ValueError):
        validate_gain_matrix(L, np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        validate_gain_matrix(L, -np.eye(2))


def _check_design(d, C, A):
    scale = max(1.0, numerics.spectral_norm(A), numerics.spectral_norm(C))
    for key, value in d.residuals(C, A).items():
        assert value <= 1e-9 * scale, key


def test_design_invariants_example(example_designs):
    for d, C in zip(example_designs, C_EX):
        _check_design(d, C, A_EX)
        np.testing.assert_allclose(d.P @ d.L.T, 0, atol=1e-12)
        np.testing.assert_allclose(d.Q, d.L.T, atol=1e-12)
    assert numerics.rank(np.vstack([d.L for d in example_designs])) == 4


def test_design_invariants_random(rng):
    for _ in range(30):
        model = random_system(rng)
        designs = design_agents(model, omega=1.0)
        for d, C in zip(designs, model.C):
            _check_design(d, C, model.A)
            np.testing.assert_allclose(d.L @ d.L.T, np.eye(d.n_i), atol=1e-10)
        assert numerics.rank(np.vstack([d.L for d in designs])) == model.n


def test_design_is_basis_independent(rng):
    model = random_system(rng)
    for C in model.C:
        d1 = design_agent(C, model.A, omega=1.0)
        R, _ = np.linalg.qr(rng.standard_normal((d1.n_i, d1.n_i)))
        T = R @ np.diag(rng.uniform(0.5, 2.0, d1.n_i))
        d2 = design_agent(C, model.A, omega=1.0, L=T @ d1.L)
        np.testing.assert_allclose(d1.P, d2.P, atol=1e-10)
        np.testing.assert_allclose(d1.Q @ d1.L, d2.Q @ d2.L, atol=1e-10)


def test_gain_matrix_variant():
    d = design_agent(C_EX[2], A_EX, L=L_EX[2], K=K_EX[2], G=0.5 * np.eye(2))
    np.testing.assert_allclose(d.Q, 0.5 * L_EX[2].T)
    np.testing.assert_allclose(d.P, np.eye(4) - 0.5 * L_EX[2].T @ L_EX[2])
    with pytest.raises(DesignError):
        design_agent(C_EX[2], A_EX, L=L_EX[2], K=K_EX[2], G=3 * np.eye(2))
