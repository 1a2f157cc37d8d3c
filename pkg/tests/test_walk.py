import numpy as np
import pytest

from dynrcm import walk
from dynrcm import env as E


def test_paths_are_nearest_neighbour_and_reproducible():
    env = E.make_dynamical_percolation(0.7, seed=1)
    p = walk.simulate(env, (0, 0), 0.0, 30.0, seed=4)
    steps = np.abs(np.diff(np.vstack([p.start, p.sites]), axis=0)).sum(axis=1)
    assert np.all(steps == 1) and np.all(np.diff(p.jump_times) > 0)
    q = walk.simulate(env, (0, 0), 0.0, 30.0, seed=4)
    assert np.array_equal(p.sites, q.sites) and np.array_equal(p.jump_times, q.jump_times)


def test_thread_count_does_not_change_results(monkeypatch):
    monkeypatch.setattr(walk, "CHUNK_PATHS", 64)
    env = E.make_dynamical_percolation(0.7, seed=2)
    a = walk.simulate_paths(env, 300, 10.0, 9, [5.0, 10.0], threads=1)[0]
    b = walk.simulate_paths(env, 300, 10.0, 9, [5.0, 10.0], threads=4)[0]
    assert np.array_equal(a, b)


def test_path_ids_are_independent_of_batch_split():
    env = E.make_constant(1.0)
    full = walk.simulate_paths(env, 100, 5.0, 3, [5.0])[0]
    tail = walk.simulate_paths(env, 50, 5.0, 3, [5.0], path_offset=50)[0]
    assert np.array_equal(full[50:], tail)


def test_constant_environment_jump_rate():
    # total jump rate 2d = 4, so E[#jumps in t] = 4t
    env = E.make_constant(1.0)
    n = [len(walk.simulate(env, (0, 0), 0.0, 10.0, seed=1, path_id=i).jump_times) for i in range(400)]
    assert abs(np.mean(n) - 40) < 4 * np.sqrt(40 / 400)


def test_first_jump_against_exact_oracle():
    env = E.make_dynamical_percolation(0.7, seed=2)
    assert walk.compare_first_jump(env, (0, 0), 0.3, 4000, 5)["holds"]
    sched = E.ScheduledEnvironment([0.0, 0.4, 1.0], [0.1, 0.9, 0.3])
    assert walk.compare_first_jump(sched, (2, 1), 0.0, 4000, 6)["holds"]


def test_position_lookup():
    env = E.make_constant(1.0)
    p = walk.simulate(env, (3, -1), 1.0, 5.0, seed=2)
    assert np.array_equal(p.position(np.array([1.0]))[0], [3, -1])
    if len(p.jump_times):
        t = p.jump_times[0]
        assert np.array_equal(p.position(np.array([t]))[0], p.sites[0])


def test_martingale_check_on_static_corrector():
    from dynrcm import heat
    env = E.make_static_layered((0.5, 1.0), domain=8)
    cf = heat.solve_regularized_corrector(env, 0.0, 8)
    psi = walk.HarmonicCoordinate.from_corrector(cf, [5.0, 10.0])
    res = walk.martingale_check(psi, env, 2000, 4, [1, 2], cf.sigma)
    assert res["holds"]
