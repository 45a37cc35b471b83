from __future__ import annotations

import numpy as np

from lsgames.analysis import (
    approx_strategy_report,
    area_bound,
    bipartite_rep,
    area_bound_check,
    perturb_bob,
    pooled_frequencies,
    random_certificate,
)
from lsgames.games import (
    build_game,
    magic_square_strategy,
    measurements_from_observables,
    pzk_correlation,
    random_observable_strategy,
    sample_transcripts,
    strategy_delta,
)
from lsgames.wagonwheel import magic_square_system, solution_group
from lsgames.words import verify_area_certificate

MS = magic_square_system()
GAMMA = solution_group(MS)


def test_area_bound_formula():
    assert area_bound(4, 1, 0) == 80
    assert area_bound(4, 2, 3) == 5 * 16 * 4 + 2 * 4 * 3 * 2


def test_perfect_strategy_is_exact():
    s = magic_square_strategy()
    rep = approx_strategy_report(MS, s)
    assert rep.eps < 1e-12 and rep.delta < 1e-12
    assert all(c.worst_lhs < 1e-10 for c in rep.checks)
    b = bipartite_rep(GAMMA, s)
    assert b.eps < 1e-10 and b.delta < 1e-10


def test_perturbed_strategies_obey_bounds(rng):
    for k in range(8):
        base = magic_square_strategy() if k % 2 else measurements_from_observables(
            random_observable_strategy(MS, 2, 2, rng), MS)
        s = perturb_bob(base, float(rng.uniform(0, 0.02)), rng)
        rep = approx_strategy_report(MS, s)
        assert rep.violations == 0, [c.as_dict() for c in rep.checks]
        b = bipartite_rep(GAMMA, s)
        assert b.eps <= b.tau + 1e-10
        assert b.delta <= b.kappa + 1e-10
        for _ in range(4):
            cert = random_certificate(GAMMA, int(rng.integers(1, 4)), 2, rng)
            assert verify_area_certificate(GAMMA.presentation, cert).valid
            assert area_bound_check(GAMMA, b, cert).holds


def test_perturbation_moves_delta(rng):
    s = perturb_bob(magic_square_strategy(), 0.05, rng)
    d = strategy_delta(s, MS).delta
    assert 0 < d <= 0.1
    assert np.allclose(perturb_bob(magic_square_strategy(), 0.0, rng).bob[0][0], magic_square_strategy().bob[0][0])


def test_pooled_frequencies_expectations():
    g = build_game(MS)
    corr = pzk_correlation(MS)
    ts = sample_transcripts(g, corr, 5000, seed=2, questions="all")
    cells = pooled_frequencies(g, corr, ts)
    for cell in cells:
        c, pos, a, b = cell.key
        if pos < 0:
            assert abs(cell.expected - 1 / 8) < 1e-12
        else:
            assert abs(cell.expected - (1 + (-1) ** (a[pos] + b)) / 8) < 1e-12
    assert sum(cell.draws for cell in cells) == 8 * len(ts)
