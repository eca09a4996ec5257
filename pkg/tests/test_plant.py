import numpy as np
import pytest
from scipy.signal import dlsim

from smmpc import (ConfigError, DataRecord, DimensionError, ExcitationError, NoiseModel,
                   StateSpace, check_persistency, collect_record, generate_pe_input,
                   random_stable_plant, simulate)


def test_statespace_defaults_and_dims(desk_plant):
    ss = StateSpace([[0.5]], [[1.0]], [[2.0]])
    assert ss.D.shape == (1, 1) and ss.D[0, 0] == 0.0
    assert (desk_plant.n_x, desk_plant.n_u, desk_plant.n_y) == (4, 1, 1)
    with pytest.raises(DimensionError):
        StateSpace(np.eye(2), np.ones((3, 1)), np.ones((1, 2)))
    with pytest.raises(DimensionError):
        StateSpace(np.eye(2), np.ones((2, 1)), np.ones((1, 2)), np.ones((2, 2)))


def test_statespace_is_immutable(desk_plant):
    with pytest.raises(ValueError):
        desk_plant.A[0, 0] = 1.0


def test_minimal_flag_rejects_uncontrollable():
    A = np.diag([0.5, 0.3])
    with pytest.raises(ConfigError):
        StateSpace(A, [[1.0], [0.0]], [[1.0, 1.0]], minimal=True)
    assert not StateSpace(A, [[1.0], [0.0]], [[1.0, 1.0]]).is_minimal()


def test_from_dict_roundtrip_and_unknown_keys(desk_plant):
    again = StateSpace.from_dict(desk_plant.to_dict())
    assert np.array_equal(again.A, desk_plant.A) and np.array_equal(again.C, desk_plant.C)
    with pytest.raises(ConfigError):
        StateSpace.from_dict({**desk_plant.to_dict(), "E": [[1.0]]})
    with pytest.raises(ConfigError):
        StateSpace.from_dict({"A": [[1.0]]})


def test_simulate_matches_scipy_dlsim(mimo_plant):
    rng = np.random.default_rng(0)
    u = rng.standard_normal((50, 2))
    x0 = rng.standard_normal(mimo_plant.n_x)
    y, y_true, _ = simulate(mimo_plant, u, x0)
    ss = mimo_plant
    _, y_ref, _ = dlsim((ss.A, ss.B, ss.C, ss.D, 1.0), u, x0=x0)
    assert np.allclose(y_true, y_ref, atol=1e-12)
    assert np.array_equal(y, y_true)


def test_simulate_noise_is_seeded(desk_plant):
    u = np.ones((30, 1))
    n = NoiseModel.isotropic(0.25, 1, seed=3)
    a, t1, _ = simulate(desk_plant, u, noise=n)
    b, t2, _ = simulate(desk_plant, u, noise=n)
    assert np.array_equal(a, b) and np.array_equal(t1, t2)
    assert not np.array_equal(a, t1)


def test_noise_model_validation():
    with pytest.raises(ConfigError):
        NoiseModel([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ConfigError):
        NoiseModel([[1.0, 0.0], [0.0, -1.0]])
    s = NoiseModel([[2.0, 0.3], [0.3, 1.0]], seed=1).sample(40000)
    assert np.allclose(np.cov(s.T), [[2.0, 0.3], [0.3, 1.0]], atol=0.05)


def test_data_record_checks_lengths():
    with pytest.raises(DimensionError):
        DataRecord(np.zeros((5, 1)), np.zeros((4, 1)))
    r = DataRecord(np.zeros(5), np.zeros(5))
    assert (r.K, r.n_u, r.n_y) == (5, 1, 1)


def test_persistency_of_excitation():
    u = generate_pe_input(1, 200, 30, seed=2)
    assert check_persistency(u, 30) == (True, 30)
    # a constant signal is exciting of order 1 only
    ok, rank = check_persistency(np.ones(50), 2)
    assert not ok and rank == 1
    # a single sinusoid has rank 2
    t = np.arange(100)
    assert check_persistency(np.sin(0.3 * t), 5)[1] == 2


def test_pe_input_too_short():
    with pytest.raises(ExcitationError):
        generate_pe_input(2, 20, 10, seed=0)


def test_collect_record(desk_plant):
    r = collect_record(desk_plant, 100, 10, None, seed=1)
    assert r.noise_free and r.K == 100
    n = collect_record(desk_plant, 100, 10, NoiseModel.isotropic(0.1, 1, 4), seed=1)
    assert not n.noise_free
    assert np.array_equal(r.u_d, n.u_d)
    assert 0.02 < np.std(n.y_d - r.y_d) < 0.2


@pytest.mark.parametrize("seed", range(5))
def test_random_stable_plant(seed):
    ss = random_stable_plant(5, 2, 1, seed=seed, rho_max=0.9)
    assert ss.is_minimal()
    assert ss.spectral_radius() <= 0.9 + 1e-12
