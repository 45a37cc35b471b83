"""Quantitative checks linking near-perfect strategies to approximate representations.

For a strategy with value ``1 - eps`` and commutator bound ``delta`` on a system
with ``tM`` non-zeros and maximum row weight ``tR``, put
``root = sqrt(tM (eps + 2^{tR-1} delta))``.  Then

(a) ``||A_ij psi - B_j psi|| <= 2 root``
(b) ``||B_{j1} ... B_{jk} psi - (-1)^{c_i} psi|| <= 2 tR root + C(tR, 2) 2^{tR+1} delta``
(c) ``||[B_j, B_k] psi - psi|| <= 8 root + 6 * 2^{tR+1} delta`` for ``j, k`` in a common row.

Sending ``x_j`` to ``B_j`` (and to ``A_ij`` on the other side) gives an
approximate bipartite representation of the solution group, and a word
``w = 1`` of area ``t`` then moves ``psi`` by at most
``(5 l^2 t^2 + 2 l |w| t)(eps' + delta')``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .games import (
    LinearSystemGame,
    ObservableStrategy,
    OperatorStrategy,
    evaluate_strategy,
    observables_from_measurements,
    strategy_delta,
)
from .wagonwheel import LinearSystemZ2, SolutionGroup
from .words import AreaCertificate, Step, Word, conjugate, multiply, reduce_word


@dataclass
class InequalityCheck:
    name: str
    worst_lhs: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.worst_lhs <= self.bound + 1e-10

    def as_dict(self) -> dict:
        return {"name": self.name, "lhs": self.worst_lhs, "bound": self.bound, "holds": self.holds}


@dataclass
class ApproxStrategyReport:
    eps: float
    delta: float
    checks: list[InequalityCheck] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return sum(not c.holds for c in self.checks)


def _norm(v) -> float:
    return float(np.linalg.norm(v))


def approx_strategy_report(sys: LinearSystemZ2, s: OperatorStrategy) -> ApproxStrategyReport:
    g = LinearSystemGame(sys)
    eps = max(0.0, 1.0 - evaluate_strategy(g, s, validate=False))
    delta = strategy_delta(s, sys).delta
    o = observables_from_measurements(s, sys)
    tM, tR = sys.nonzeros, sys.max_row_weight
    root = math.sqrt(tM * (eps + 2 ** (tR - 1) * delta))
    psi = o.psi
    bpsi = [b @ psi for b in o.B]

    lhs_a = 0.0
    for i, row in enumerate(sys.rows):
        for k, j in enumerate(row):
            lhs_a = max(lhs_a, _norm(o.A[i][k] @ psi - bpsi[j]))
    lhs_b = 0.0
    lhs_c = 0.0
    for i, row in enumerate(sys.rows):
        v = psi
        for j in reversed(row):
            v = o.B[j] @ v
        lhs_b = max(lhs_b, _norm(v - (-1) ** sys.c[i] * psi))
        for a, j in enumerate(row):
            for k in row[a + 1:]:
                bj, bk = o.B[j], o.B[k]
                comm = bj @ bk @ np.linalg.inv(bj) @ np.linalg.inv(bk)
                lhs_c = max(lhs_c, _norm(comm @ psi - psi))
    kappa = 2 ** (tR + 1) * delta
    checks = [
        InequalityCheck("a", lhs_a, 2 * root),
        InequalityCheck("b", lhs_b, 2 * tR * root + math.comb(tR, 2) * kappa),
        InequalityCheck("c", lhs_c, 8 * root + 6 * kappa),
    ]
    return ApproxStrategyReport(eps, delta, checks)


@dataclass
class BipartiteRep:
    """``phi`` and ``phi2`` map solution-group generators to unitaries."""

    phi: dict
    phi2: dict
    psi: np.ndarray
    eps: float
    delta: float
    tau: float
    kappa: float

    def image(self, w: Sequence, which: int = 0) -> np.ndarray:
        ops = self.phi if which == 0 else self.phi2
        d = len(self.psi)
        out = np.eye(d, dtype=complex)
        for gname, e in w:
            m = ops[gname]
            out = out @ (m if e == 1 else _herm(m))
        return out


def _herm(m):
    return m.conj().T


def bipartite_rep(gamma: SolutionGroup, s: OperatorStrategy) -> BipartiteRep:
    """``x_j -> B_j``, ``J -> -I`` on one side and ``x_j -> A_ij`` (first row containing ``j``) on the other.

    ``eps`` and ``delta`` are measured: the worst relation and agreement defect,
    and the worst ``||[phi(s), phi2(t)] - I||``.  ``tau`` and ``kappa`` are the
    predicted values from the strategy's value and commutator bound.
    """
    sys = gamma.system
    g = LinearSystemGame(sys)
    o: ObservableStrategy = observables_from_measurements(s, sys)
    d = o.dim
    eye = np.eye(d, dtype=complex)
    phi = {f"x{j + 1}": o.B[j] for j in range(sys.n)}
    phi["J"] = -eye
    phi2 = {"J": -eye}
    for j in range(sys.n):
        phi2[f"x{j + 1}"] = eye
    for i in reversed(range(sys.m)):
        for k, j in enumerate(sys.rows[i]):
            phi2[f"x{j + 1}"] = o.A[i][k]
    rep = BipartiteRep(phi, phi2, o.psi, 0.0, 0.0, 0.0, 0.0)
    psi = o.psi
    eps = 0.0
    for r in gamma.presentation.relations:
        eps = max(eps, _norm(rep.image(r) @ psi - psi))
    for gname in gamma.presentation.generators:
        eps = max(eps, _norm(_herm(phi[gname]) @ psi - phi2[gname] @ psi))
    delta = 0.0
    gens = gamma.presentation.generators
    for a in gens:
        for b in gens:
            x, y = phi[a], phi2[b]
            delta = max(delta, float(np.linalg.norm(x @ y @ _herm(x) @ _herm(y) - eye, 2)))
    value = evaluate_strategy(g, s, validate=False)
    sd = strategy_delta(s, sys).delta
    tM, tR = sys.nonzeros, sys.max_row_weight
    r4 = max(tR, 4)
    root = math.sqrt(tM * (max(0.0, 1 - value) + 2 ** (tR - 1) * sd))
    tau = 2 * r4 * root + math.comb(r4, 2) * 2 ** (tR + 1) * sd
    kappa = 2 ** (tR + 1) * sd
    rep.eps, rep.delta, rep.tau, rep.kappa = eps, delta, tau, kappa
    return rep


def area_bound(ell: int, area: int, length: int) -> int:
    """``5 l^2 t^2 + 2 l |w| t``."""
    return 5 * ell * ell * area * area + 2 * ell * length * area


@dataclass
class AreaBoundCheck:
    word: Word
    area: int
    lhs: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.bound + 1e-10


def area_bound_check(gamma: SolutionGroup, rep: BipartiteRep, cert: AreaCertificate) -> AreaBoundCheck:
    """Compare ``||phi(w) psi - psi||`` with the area bound for ``w = cert.target``."""
    w = reduce_word(cert.target)
    ell = gamma.presentation.max_relation_length
    lhs = _norm(rep.image(w) @ rep.psi - rep.psi)
    bound = area_bound(ell, cert.area, len(w)) * (rep.eps + rep.delta)
    return AreaBoundCheck(w, cert.area, lhs, bound)


def random_certificate(gamma: SolutionGroup, steps: int, zlen: int, rng: np.random.Generator) -> AreaCertificate:
    """A random product of conjugated relators and its certificate."""
    gens = gamma.presentation.generators
    rels = gamma.presentation.relations
    out = []
    parts = []
    for _ in range(steps):
        z = reduce_word((gens[rng.integers(len(gens))], int(rng.choice([1, -1])))
                        for _ in range(rng.integers(zlen + 1)))
        idx = int(rng.integers(len(rels)))
        sign = int(rng.choice([1, -1]))
        out.append((z, idx, sign))
        parts.append(conjugate(z, rels[idx], sign))
    return AreaCertificate(multiply(*parts), tuple(Step(*t) for t in out))


def perturb_bob(s: OperatorStrategy, theta: float, rng: np.random.Generator) -> OperatorStrategy:
    """Conjugate every Bob projection by ``exp(i theta H)`` for a random unit-norm Hermitian ``H``."""
    d = s.dim
    h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (h + _herm(h)) / 2
    h /= np.linalg.norm(h, 2)
    w = expm(1j * theta * h)
    bob = tuple((w @ q0 @ _herm(w), w @ q1 @ _herm(w)) for q0, q1 in s.bob)
    return OperatorStrategy(s.alice, bob, s.psi)


@dataclass
class FrequencyCell:
    key: tuple
    draws: int
    observed: float
    expected: float
    sigma: float

    @property
    def z(self) -> float:
        if self.sigma == 0:
            return 0.0 if abs(self.observed - self.expected) < 1e-12 else math.inf
        return abs(self.observed - self.expected) / self.sigma


def pooled_frequencies(g: LinearSystemGame, corr, transcripts) -> list[FrequencyCell]:
    """Answer frequencies pooled by ``(c_i, position of j in row i or -1, a, b)``.

    Each pool's expected frequency and standard deviation come from the exact
    correlation of the draws that fall into it.
    """
    pools: dict = {}
    per_q: dict = {}
    for t in transcripts:
        per_q.setdefault((t.x, t.y), []).append(t)
    for (i, j), ts in per_q.items():
        probs = corr.probabilities(i, j)
        outs = g.outputs_A(i)
        pos = g.position(i, j)
        seen: dict = {}
        for t in ts:
            seen[(t.a, t.b)] = seen.get((t.a, t.b), 0) + 1
        for k, a in enumerate(outs):
            for b in (0, 1):
                key = (g.system.c[i], -1 if pos is None else pos, a, b)
                p = float(probs[2 * k + b])
                acc = pools.setdefault(key, [0, 0, 0.0, 0.0])
                acc[0] += len(ts)
                acc[1] += seen.get((a, b), 0)
                acc[2] += p * len(ts)
                acc[3] += p * (1 - p) * len(ts)
    cells = []
    for key in sorted(pools):
        n, hits, mean, var = pools[key]
        cells.append(FrequencyCell(key, n, hits / n, mean / n, math.sqrt(max(var, 0.0)) / n))
    return cells
