from __future__ import annotations

import warnings
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_system
from lsgames.errors import PreconditionError, ResourceLimit
from lsgames.games import build_game, classical_value, evaluate_strategy, magic_square_strategy
from lsgames.io import write_sdp_dump
from lsgames.sdp import WordReducer, build_moment_program, npa_upper_bound, solve_sdp
from lsgames.wagonwheel import LinearSystemZ2, magic_square_system

MS = magic_square_system()
INCONSISTENT = LinearSystemZ2(1, ((0,), (0,)), (0, 1))


def game(sys):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_game(sys)


def cvxpy_value(mp):
    """Same program handed to an off-the-shelf conic solver."""
    cp = pytest.importorskip("cvxpy")
    import scipy.sparse as sparse

    n = mp.size
    f0 = np.where(mp.entry_var < 0, mp.entry_sign, 0.0)
    flat = mp.entry_var.ravel()
    rows = np.nonzero(flat >= 0)[0]
    lift = sparse.csr_matrix((mp.entry_sign.ravel()[rows], (rows, flat[rows])), shape=(n * n, mp.num_vars))
    y = cp.Variable(mp.num_vars)
    m = f0 + cp.reshape(lift @ y, (n, n), order="C")
    prob = cp.Problem(cp.Maximize(mp.offset + mp.objective @ y), [(m + m.T) / 2 >> 0])
    prob.solve(solver="CLARABEL")
    assert prob.status == "optimal"
    return prob.value


def test_level_validation():
    with pytest.raises(PreconditionError):
        build_moment_program(game(MS), 3)


def test_basis_sizes():
    mp = build_moment_program(game(MS), 1)
    assert mp.raw_basis_size == 28 and mp.size == 28
    tiny = build_moment_program(game(LinearSystemZ2(1, ((0,),), (0,))), 1)
    assert tiny.size == 2


def test_within_row_identification():
    row = LinearSystemZ2(3, ((0, 1, 2),), (1,))
    red = WordReducer(row)
    # A_0 A_1 = -A_2 when the row multiplies to -1
    assert red.reduce([(0, 0), (0, 1)], []) == (-1, (((0, (2,)),), ()))
    assert red.reduce([(0, 1), (0, 0)], []) == red.reduce([(0, 0), (0, 1)], [])
    mp = build_moment_program(game(row), 2)
    pos = {key: k for k, key in enumerate(mp.basis)}
    a0 = pos[(((0, (0,)),), ())]
    a1 = pos[(((0, (1,)),), ())]
    assert mp.entry_var[a0, a1] == mp.entry_var[a1, a0]
    assert mp.entry_sign[a0, a1] == mp.entry_sign[a1, a0]


@pytest.mark.parametrize("sys,expected", [
    (MS, 1.0),
    (INCONSISTENT, 0.5),
    (LinearSystemZ2(3, ((0, 1, 2),), (1,)), 1.0),
    (LinearSystemZ2(4, ((0, 1, 2), (1, 2, 3)), (1, 0)), 1.0),
])
def test_level_one_values(sys, expected):
    res = npa_upper_bound(game(sys), 1)
    assert res.status == "converged"
    assert abs(res.value - expected) < 1e-5
    assert res.gap <= 1e-7


def test_solution_is_psd_with_unit_corner():
    mp = build_moment_program(game(MS), 1)
    res = solve_sdp(mp)
    m = mp.moment_matrix(res.y)
    assert m[0, 0] == 1
    assert np.linalg.eigvalsh(m).min() > -1e-7
    assert res.value <= 1 + 1e-7


def test_cross_check_level_one_with_cvxpy():
    for sys in (MS, INCONSISTENT):
        mp = build_moment_program(game(sys), 1)
        assert abs(solve_sdp(mp).value - cvxpy_value(mp)) < 1e-5


def test_cross_check_level_two_with_cvxpy(rng):
    sys = random_system(rng, 2, 4)
    mp = build_moment_program(game(sys), 2)
    assert abs(solve_sdp(mp).value - cvxpy_value(mp)) < 1e-5


def test_monotone_on_random_systems(rng):
    # three-row systems at level 2 take tens of seconds each; two rows keep this quick
    for _ in range(20):
        m = int(rng.integers(1, 3))
        n = int(rng.integers(3, 6))
        sys = random_system(rng, m, n)
        g = game(sys)
        one = npa_upper_bound(g, 1)
        two = npa_upper_bound(g, 2)
        assert two.value <= one.value + 1e-6
        assert two.value >= float(classical_value(g)) - 1e-6


def test_magic_square_level_two_lifted():
    g = game(MS)
    with pytest.raises(ResourceLimit):
        build_moment_program(g, 2)
    res = npa_upper_bound(g, 2)
    assert res.status == "lifted"
    assert res.value <= npa_upper_bound(g, 1).value + 1e-6
    assert res.value >= evaluate_strategy(g, magic_square_strategy()) - 1e-6
    assert res.value >= float(Fraction(17, 18))


def test_solver_is_deterministic():
    mp = build_moment_program(game(MS), 1)
    a, b = solve_sdp(mp), solve_sdp(mp)
    assert a.as_dict() == b.as_dict()


def test_dump_format(tmp_path):
    mp = build_moment_program(game(INCONSISTENT), 1)
    paths = write_sdp_dump(mp, tmp_path)
    lines = paths[0].read_text().splitlines()
    assert lines[0] == f"{mp.size} {mp.num_vars}"
    assert len(lines) - 1 == mp.size * (mp.size + 1) // 2
    obj = paths[1].read_text().split()
    assert float(obj[0]) == mp.offset and len(obj) == 1 + mp.num_vars
