from __future__ import annotations

import itertools

import numpy as np
import pytest

from conftest import random_presentation, random_system
from lsgames.errors import PreconditionError
from lsgames.games import build_game, evaluate_strategy, strategy_delta, check_observables, observables_from_measurements
from lsgames.reductions import double_generators, hnn_extend, normalize_involution
from lsgames.repsearch import (
    SignedRep,
    candidate_matrices,
    check_solution,
    check_witness,
    cycle_separation,
    find_signed_rep,
    rep_from_solution,
    solve_z2,
    strategy_from_rep,
    verify_rep,
)
from lsgames.wagonwheel import LinearSystemZ2, assemble_system, magic_square_system, solution_group
from lsgames.words import Presentation, parse_word

MS = magic_square_system()
INCONSISTENT = LinearSystemZ2(1, ((0,), (0,)), (0, 1))


def satisfies(sys, x, homogeneous=False):
    for row, c in zip(sys.rows, sys.c):
        if sum(x[j] for j in row) % 2 != (0 if homogeneous else c):
            return False
    return True


def test_magic_square_witness_is_all_rows():
    res = solve_z2(MS)
    assert not res.consistent
    assert res.witness == (0, 1, 2, 3, 4, 5)
    assert check_witness(MS, res.witness)


def test_single_equation_affine_dimension():
    s = LinearSystemZ2(3, ((0, 1, 2),), (1,))
    res = solve_z2(s)
    assert res.consistent and res.rank == 1 and len(res.nullspace) == 2
    assert satisfies(s, res.solution)


def test_solver_against_brute_force(rng):
    for _ in range(60):
        n = int(rng.integers(2, 9))
        s = random_system(rng, int(rng.integers(1, 7)), n, weight=int(rng.integers(1, min(n, 3) + 1)))
        sols = [x for x in itertools.product((0, 1), repeat=n) if satisfies(s, x)]
        res = solve_z2(s)
        assert res.consistent == bool(sols)
        if res.consistent:
            assert satisfies(s, res.solution)
            assert 2 ** (n - res.rank) == len(sols)
            for v in res.nullspace:
                assert satisfies(s, v, homogeneous=True)
            # basis vectors are independent: span has the full size
            span = {tuple(np.bitwise_xor.reduce([v for v, k in zip(res.nullspace, pick) if k] or [np.zeros(n, int)]))
                    for pick in itertools.product((0, 1), repeat=len(res.nullspace))}
            assert len(span) == len(sols)
        else:
            assert check_witness(s, res.witness)


def _compiled(p, w=None):
    if w is not None:
        p = hnn_extend(p, parse_word(w, p.generators)).presentation
    return assemble_system(double_generators(normalize_involution(p)))


def _check_separation(compiled):
    rep = cycle_separation(compiled)
    sys = compiled.system
    vectors = []
    for cyc in rep.cycles:
        y = [0] * sys.n
        for j in cyc.columns:
            y[j] = 1
        vectors.append(y)
    vectors.extend(list(e) for e in rep.extra)
    for y in vectors:
        assert satisfies(sys, y, homogeneous=True)
    # every column is sent to -1 by some vector, every pair split by some vector
    sig = [tuple(y[j] for y in vectors) for j in range(sys.n)]
    assert all(any(s) for s in sig)
    assert len(set(sig)) == sys.n
    return rep


def test_cycle_separation_order_two():
    rep = _check_separation(_compiled(Presentation(("a",), (parse_word("a a"),)), "a"))
    assert rep.ok and rep.replayed
    assert any(c.label.startswith("inner") for c in rep.cycles)


def test_cycle_separation_random(rng):
    for _ in range(6):
        p = random_presentation(rng, 2, 2, 3)
        assert _check_separation(_compiled(p, "g0 g1")).ok


def test_inner_cycle_avoids_shared_edges():
    compiled = _compiled(Presentation(("a", "J"), (parse_word("a a"),), "J"))
    rep = cycle_separation(compiled)
    shared = set(compiled.column_of.values())
    inner = [c for c in rep.cycles if c.label.startswith("inner")]
    assert inner and all(not shared & set(c.columns) for c in inner)


def test_candidates_are_involutions_or_orthogonal():
    for d in (1, 2, 4):
        for m in candidate_matrices(d):
            assert np.allclose(m @ m.T, np.eye(d))


def test_rep_search_hnn_order_two():
    h = hnn_extend(Presentation(("a",), (parse_word("a a"),)), parse_word("a"))
    res = find_signed_rep(h.presentation, dim_cap=2)
    assert res.status == "found" and res.rep.dim == 2
    assert verify_rep(h.presentation, res.rep) < 1e-12
    assert np.allclose(res.rep.images["J"], -np.eye(2))


def test_rep_search_magic_square():
    gamma = solution_group(MS)
    res = find_signed_rep(gamma.presentation, dim_cap=4)
    assert res.status == "found" and res.rep.dim == 4
    assert verify_rep(gamma.presentation, res.rep) < 1e-10
    s = strategy_from_rep(res.rep, MS)
    assert s.dim == 16
    assert abs(evaluate_strategy(build_game(MS), s) - 1) < 1e-10
    assert strategy_delta(s, MS).delta <= 1e-12
    assert check_observables(observables_from_measurements(s, MS), MS) < 1e-10


def test_rep_search_inconsistent_unknown():
    res = find_signed_rep(solution_group(INCONSISTENT).presentation, dim_cap=8)
    assert res.status == "unknown" and res.rep is None


def test_rep_from_classical_solution():
    s = LinearSystemZ2(4, ((0, 1, 2), (1, 2, 3)), (1, 0))
    sol = solve_z2(s)
    rep = rep_from_solution(sol.solution)
    assert verify_rep(solution_group(s).presentation, rep) == 0
    strat = strategy_from_rep(rep, s)
    assert abs(evaluate_strategy(build_game(s), strat) - 1) < 1e-12


def test_strategy_from_rep_preconditions():
    s = LinearSystemZ2(1, ((0,),), (0,))
    with pytest.raises(PreconditionError):
        strategy_from_rep(SignedRep(1, {"x1": np.eye(1), "J": np.eye(1)}, "J", 1), s)
    with pytest.raises(PreconditionError):
        strategy_from_rep(SignedRep(1, {"J": -np.eye(1)}, "J", -1), s)


def test_check_solution_helper():
    assert check_solution(MS, (0,) * 9, homogeneous=True)
    assert not check_solution(MS, (0,) * 9)
