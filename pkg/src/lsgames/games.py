"""Linear-system games and their strategies.

Alice receives an equation index ``i`` and answers an assignment to the
variables of ``V_i`` satisfying the equation; Bob receives a variable ``j`` and
answers a bit.  They win when ``j`` is not in ``V_i`` or their values for ``j``
agree.  Questions are drawn uniformly from the pairs ``(i, j)`` with ``j in V_i``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import MalformedInput, PreconditionError, ResourceLimit
from .wagonwheel import LinearSystemZ2

Bits = tuple[int, ...]

TOL = 1e-9


def parity_outputs(k: int, parity: int) -> list[Bits]:
    """Bit tuples of length ``k`` with the given parity, in lexicographic order."""
    return [a for a in itertools.product((0, 1), repeat=k) if sum(a) % 2 == parity]


@dataclass(frozen=True)
class LinearSystemGame:
    system: LinearSystemZ2

    @property
    def m(self) -> int:
        return self.system.m

    @property
    def n(self) -> int:
        return self.system.n

    @cached_property
    def _outputs(self) -> tuple[tuple[Bits, ...], ...]:
        return tuple(
            tuple(parity_outputs(len(row), c)) for row, c in zip(self.system.rows, self.system.c)
        )

    def outputs_A(self, i: int) -> tuple[Bits, ...]:
        return self._outputs[i]

    @cached_property
    def question_pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple((i, j) for i, row in enumerate(self.system.rows) for j in row)

    @cached_property
    def pi(self) -> dict:
        total = len(self.question_pairs)
        if total == 0:
            return {}
        w = Fraction(1, total)
        return {q: w for q in self.question_pairs}

    @cached_property
    def orphans(self) -> tuple[int, ...]:
        return tuple(self.system.orphan_columns())

    def position(self, i: int, j: int) -> Optional[int]:
        row = self.system.rows[i]
        return row.index(j) if j in row else None

    def predicate(self, a: Sequence[int], b: int, i: int, j: int) -> int:
        k = self.position(i, j)
        return 1 if k is None or a[k] == b else 0


def build_game(sys: LinearSystemZ2) -> LinearSystemGame:
    g = LinearSystemGame(sys)
    if g.orphans:
        warnings.warn(
            f"columns {[j + 1 for j in g.orphans]} appear in no equation; "
            "Bob's questions for them have no probability mass",
            stacklevel=2,
        )
    return g


CLASSICAL_CAP = 24


def _row_score_tables(g: LinearSystemGame) -> list[np.ndarray]:
    """For each row, best agreement count indexed by Bob's bit pattern on ``V_i``."""
    tables = []
    for i, row in enumerate(g.system.rows):
        k = len(row)
        outs = np.array(g.outputs_A(i), dtype=np.int64).reshape(-1, k)
        pats = np.array(list(itertools.product((0, 1), repeat=k)), dtype=np.int64).reshape(-1, k)
        agree = (pats[:, None, :] == outs[None, :, :]).sum(axis=2)
        tables.append(agree.max(axis=1) if len(outs) else np.zeros(len(pats), dtype=np.int64))
    return tables


def best_classical_assignment(g: LinearSystemGame, cap: int = CLASSICAL_CAP) -> tuple[Fraction, Bits]:
    """Exact classical value with an optimal assignment for Bob (the first one in binary order)."""
    n = g.n
    if n > cap:
        raise ResourceLimit(f"classical value needs 2^{n} assignments; cap is 2^{cap}")
    total = len(g.question_pairs)
    if total == 0:
        return Fraction(1), (0,) * n
    tables = _row_score_tables(g)
    best, best_b = -1, 0
    chunk = 1 << min(n, 20)
    for start in range(0, 1 << n, chunk):
        b = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        score = np.zeros(len(b), dtype=np.int64)
        for row, table in zip(g.system.rows, tables):
            idx = np.zeros(len(b), dtype=np.int64)
            for j in row:
                # bit j of the assignment is column j
                idx = (idx << 1) | ((b >> j) & 1)
            score += table[idx]
        k = int(np.argmax(score))
        if score[k] > best:
            best, best_b = int(score[k]), int(b[k])
    bits = tuple((best_b >> j) & 1 for j in range(n))
    return Fraction(best, total), bits


def classical_value(g: LinearSystemGame, cap: int = CLASSICAL_CAP) -> Fraction:
    return best_classical_assignment(g, cap)[0]


def best_response(g: LinearSystemGame, i: int, bits: Sequence[int]) -> Bits:
    row = g.system.rows[i]
    target = [bits[j] for j in row]
    return max(g.outputs_A(i), key=lambda a: (sum(x == y for x, y in zip(a, target)), [-x for x in a]))


# Strategies ---------------------------------------------------------------


def _herm(m: np.ndarray) -> np.ndarray:
    return m.conj().T


@dataclass(frozen=True)
class OperatorStrategy:
    """Projective strategy on one Hilbert space.

    ``alice[i][k]`` is the projection for output ``outputs_A(i)[k]`` and
    ``bob[j][b]`` the projection for bit ``b``.
    """

    alice: tuple[tuple[np.ndarray, ...], ...]
    bob: tuple[tuple[np.ndarray, np.ndarray], ...]
    psi: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.psi)

    def validate(self, g: LinearSystemGame, tol: float = TOL) -> "OperatorStrategy":
        d = self.dim
        if abs(np.linalg.norm(self.psi) - 1) > tol:
            raise PreconditionError("state is not a unit vector")
        if len(self.alice) != g.m or len(self.bob) != g.n:
            raise PreconditionError("strategy does not match the game's inputs")
        eye = np.eye(d)
        for i, projs in enumerate(self.alice):
            if len(projs) != len(g.outputs_A(i)):
                raise PreconditionError(f"input {i + 1}: wrong number of outcomes")
            _check_measurement(projs, eye, tol, f"Alice input {i + 1}")
        for j, projs in enumerate(self.bob):
            _check_measurement(projs, eye, tol, f"Bob input {j + 1}")
        return self


def _check_measurement(projs, eye, tol, label):
    total = np.zeros_like(eye, dtype=complex)
    for p in projs:
        if p.shape != eye.shape:
            raise PreconditionError(f"{label}: operator has the wrong shape")
        if np.linalg.norm(p - _herm(p), 2) > tol or np.linalg.norm(p @ p - p, 2) > tol:
            raise PreconditionError(f"{label}: operator is not an orthogonal projection")
        total = total + p
    if np.linalg.norm(total - eye, 2) > tol:
        raise PreconditionError(f"{label}: projections do not sum to the identity")
    for p, q in itertools.combinations(projs, 2):
        if np.linalg.norm(p @ q, 2) > tol:
            raise PreconditionError(f"{label}: projections are not orthogonal")


@dataclass(frozen=True)
class ObservableStrategy:
    """``A[i][k]`` is the observable for variable ``V_i[k]`` in row ``i``; ``B[j]`` Bob's."""

    A: tuple[tuple[np.ndarray, ...], ...]
    B: tuple[np.ndarray, ...]
    psi: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.psi)


def evaluate_strategy_complex(g: LinearSystemGame, s: OperatorStrategy) -> complex:
    """``sum pi(x,y) sum V(a,b|x,y) <psi|P^x_a Q^y_b|psi>`` before the absolute value."""
    psi = s.psi
    qpsi = [(q0 @ psi, q1 @ psi) for q0, q1 in s.bob]
    total = 0j
    for (i, j), w in g.pi.items():
        k = g.position(i, j)
        acc = 0j
        for a, p in zip(g.outputs_A(i), s.alice[i]):
            acc += np.vdot(p @ psi, qpsi[j][a[k]])
        total += float(w) * acc
    return complex(total)


def evaluate_strategy(g: LinearSystemGame, s: OperatorStrategy, validate: bool = True) -> float:
    if validate:
        s.validate(g)
    return abs(evaluate_strategy_complex(g, s))


def observables_from_measurements(s: OperatorStrategy, sys: LinearSystemZ2) -> ObservableStrategy:
    g = LinearSystemGame(sys)
    A = []
    for i, row in enumerate(sys.rows):
        outs = g.outputs_A(i)
        ops = []
        for k in range(len(row)):
            ops.append(sum((-1) ** a[k] * p for a, p in zip(outs, s.alice[i])))
        A.append(tuple(ops))
    B = tuple(q0 - q1 for q0, q1 in s.bob)
    return ObservableStrategy(tuple(A), B, s.psi)


def measurements_from_observables(
    o: ObservableStrategy, sys: LinearSystemZ2, tol: float = TOL
) -> OperatorStrategy:
    g = LinearSystemGame(sys)
    eye = np.eye(o.dim)
    alice = []
    for i, ops in enumerate(o.A):
        for x, y in itertools.combinations(ops, 2):
            if np.linalg.norm(x @ y - y @ x, 2) > tol:
                raise PreconditionError(f"row {i + 1}: observables do not commute")
        projs = []
        for a in g.outputs_A(i):
            p = eye.astype(complex)
            for bit, op in zip(a, ops):
                p = p @ ((eye + (-1) ** bit * op) / 2)
            projs.append(p)
        alice.append(tuple(projs))
    bob = tuple(((eye + b) / 2, (eye - b) / 2) for b in o.B)
    return OperatorStrategy(tuple(alice), bob, o.psi)


def check_observables(o: ObservableStrategy, sys: LinearSystemZ2, tol: float = TOL) -> float:
    """Largest violation of self-adjointness, unitarity, row products and row commutation."""
    eye = np.eye(o.dim)
    worst = 0.0
    for i, ops in enumerate(o.A):
        prod = eye.astype(complex)
        for op in ops:
            worst = max(worst, np.linalg.norm(op - _herm(op), 2), np.linalg.norm(op @ op - eye, 2))
            prod = prod @ op
        worst = max(worst, np.linalg.norm(prod - (-1) ** sys.c[i] * eye, 2))
        for x, y in itertools.combinations(ops, 2):
            worst = max(worst, np.linalg.norm(x @ y - y @ x, 2))
    for b in o.B:
        worst = max(worst, np.linalg.norm(b - _herm(b), 2), np.linalg.norm(b @ b - eye, 2))
    return float(worst)


@dataclass(frozen=True)
class DeltaReport:
    delta: float
    observable_commutator: float
    slack: float

    @property
    def bound_holds(self) -> bool:
        return self.slack >= -1e-12


def strategy_delta(s: OperatorStrategy, sys: LinearSystemZ2) -> DeltaReport:
    """Largest spectral norm of ``[P^x_a, Q^y_b]`` plus the observable-level check.

    ``slack`` is the smallest ``2^{|V_i|+1} delta - ||[A_ij, B_k]||`` over all rows,
    so a negative value would mean the observable bound failed.
    """
    delta = 0.0
    for projs in s.alice:
        for p in projs:
            for q0, q1 in s.bob:
                for q in (q0, q1):
                    delta = max(delta, np.linalg.norm(p @ q - q @ p, 2))
    o = observables_from_measurements(s, sys)
    comm, slack = 0.0, math.inf
    for i, ops in enumerate(o.A):
        bound = 2 ** (len(sys.rows[i]) + 1) * delta
        for a in ops:
            for b in o.B:
                c = np.linalg.norm(a @ b - b @ a, 2)
                comm = max(comm, c)
                slack = min(slack, bound - c)
    return DeltaReport(float(delta), float(comm), float(slack if slack != math.inf else 0.0))


def bias(g: LinearSystemGame, o: ObservableStrategy) -> complex:
    """``beta = sum pi(i,j) <psi|A_ij B_j|psi>``; the winning probability is ``|beta + 1| / 2``."""
    psi = o.psi
    bpsi = [b @ psi for b in o.B]
    total = 0j
    for (i, j), w in g.pi.items():
        k = g.position(i, j)
        total += float(w) * np.vdot(_herm(o.A[i][k]) @ psi, bpsi[j])
    return complex(total)


# Standard strategies ------------------------------------------------------

PAULI = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# Mermin-Peres square, rows then read off by column; row products are +I and
# column products -I.
MAGIC_SQUARE_OBSERVABLES = [
    [(1, "XI"), (1, "IX"), (1, "XX")],
    [(1, "IZ"), (1, "ZI"), (1, "ZZ")],
    [(-1, "XZ"), (-1, "ZX"), (1, "YY")],
]


def pauli(label: str) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for ch in label:
        out = np.kron(out, PAULI[ch])
    return out


def magic_square_operators() -> list[np.ndarray]:
    """The nine 4x4 observables, indexed by column ``3 * r + c``."""
    return [s * pauli(lbl) for row in MAGIC_SQUARE_OBSERVABLES for s, lbl in row]


def maximally_entangled(d: int) -> np.ndarray:
    psi = np.zeros(d * d, dtype=complex)
    for k in range(d):
        psi[k * d + k] = 1
    return psi / math.sqrt(d)


def tensor_observable_strategy(
    sys: LinearSystemZ2, ops: Sequence[np.ndarray], psi: Optional[np.ndarray] = None
) -> ObservableStrategy:
    """Alice plays ``rho(x_j) (x) I`` and Bob ``I (x) conj(rho(x_j))`` on a maximally entangled state."""
    d = ops[0].shape[0]
    eye = np.eye(d)
    A = tuple(tuple(np.kron(ops[j], eye) for j in row) for row in sys.rows)
    B = tuple(np.kron(eye, op.conj()) for op in ops)
    return ObservableStrategy(A, B, maximally_entangled(d) if psi is None else psi)


def magic_square_strategy() -> OperatorStrategy:
    from .wagonwheel import magic_square_system

    sys = magic_square_system()
    return measurements_from_observables(
        tensor_observable_strategy(sys, magic_square_operators()), sys
    )


def deterministic_strategy(g: LinearSystemGame, bits: Sequence[int]) -> OperatorStrategy:
    """One-dimensional strategy: Bob answers ``bits``, Alice best-responds."""
    one, zero = np.ones((1, 1), dtype=complex), np.zeros((1, 1), dtype=complex)
    alice = []
    for i in range(g.m):
        a = best_response(g, i, bits)
        alice.append(tuple(one if out == a else zero for out in g.outputs_A(i)))
    bob = tuple((one, zero) if b == 0 else (zero, one) for b in bits)
    return OperatorStrategy(tuple(alice), bob, np.ones(1, dtype=complex))


def _random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _random_sign_diag(d: int, rng: np.random.Generator) -> np.ndarray:
    return rng.choice([-1.0, 1.0], size=d)


def random_unit_vector(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_observable_strategy(
    sys: LinearSystemZ2, dim_a: int, dim_b: int, rng: np.random.Generator
) -> ObservableStrategy:
    """Random commuting strategy: Alice acts on the first tensor factor, Bob on the second.

    Each row uses jointly diagonalisable observables whose product is ``(-1)^{c_i}``.
    """
    ea, eb = np.eye(dim_a), np.eye(dim_b)
    A = []
    for row, c in zip(sys.rows, sys.c):
        u = _random_unitary(dim_a, rng)
        diags = [_random_sign_diag(dim_a, rng) for _ in row[:-1]]
        last = (-1.0) ** c * np.prod(diags, axis=0) if diags else (-1.0) ** c * np.ones(dim_a)
        diags.append(last)
        A.append(tuple(np.kron(u @ np.diag(dg) @ _herm(u), eb) for dg in diags))
    B = []
    for _ in range(sys.n):
        u = _random_unitary(dim_b, rng)
        B.append(np.kron(ea, u @ np.diag(_random_sign_diag(dim_b, rng)) @ _herm(u)))
    return ObservableStrategy(tuple(A), tuple(B), random_unit_vector(dim_a * dim_b, rng))


# Correlations -------------------------------------------------------------

Number = Union[Fraction, complex, float]


@dataclass
class CorrelationMatrix:
    """Table ``p(a, b | i, j)``; ``block(i, j)[k][b]`` is the entry for ``outputs_A(i)[k]``.

    Blocks are produced on demand by ``source`` and cached.
    """

    game: LinearSystemGame
    source: Callable[[int, int], tuple]
    exact: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    def block(self, i: int, j: int) -> tuple:
        key = (i, j)
        if key not in self._cache:
            self._cache[key] = self.source(i, j)
        return self._cache[key]

    def value(self) -> Number:
        """``sum pi(i,j) sum_{a,b} V(a,b|i,j) p(a,b|i,j)``."""
        total: Number = Fraction(0) if self.exact else 0j
        for (i, j), w in self.game.pi.items():
            k = self.game.position(i, j)
            blk = self.block(i, j)
            for a, entry in zip(self.game.outputs_A(i), blk):
                total += w * entry[a[k]] if self.exact else float(w) * entry[a[k]]
        return total

    def block_sum(self, i: int, j: int) -> Number:
        return sum((e for row in self.block(i, j) for e in row), Fraction(0) if self.exact else 0j)

    def probabilities(self, i: int, j: int, tol: float = 1e-9) -> np.ndarray:
        """Block as a flat real probability vector, checking it is a distribution."""
        flat = np.array([complex(e) for row in self.block(i, j) for e in row])
        if np.abs(flat.imag).max(initial=0) > tol or flat.real.min(initial=0) < -tol:
            raise PreconditionError(f"block ({i + 1},{j + 1}) is not a probability distribution")
        p = np.clip(flat.real, 0, None)
        if abs(p.sum() - 1) > tol:
            raise PreconditionError(f"block ({i + 1},{j + 1}) does not sum to 1")
        return p / p.sum()


def pzk_correlation(sys: LinearSystemZ2) -> CorrelationMatrix:
    """``p(a,b|i,j) = (1 + (-1)^{a_j + b}) / 8`` when ``j in V_i``, otherwise ``1/8``."""
    bad = [i + 1 for i, r in enumerate(sys.rows) if len(r) != 3]
    if bad:
        raise PreconditionError(f"rows {bad[:5]} do not have weight 3")
    g = LinearSystemGame(sys)

    def source(i, j):
        k = g.position(i, j)
        if k is None:
            e = Fraction(1, 8)
            return tuple((e, e) for _ in g.outputs_A(i))
        return tuple(
            tuple(Fraction(1 + (-1) ** (a[k] + b), 8) for b in (0, 1)) for a in g.outputs_A(i)
        )

    return CorrelationMatrix(g, source, exact=True)


def strategy_correlation(g: LinearSystemGame, s: OperatorStrategy) -> CorrelationMatrix:
    """``p(a,b|i,j) = <psi|P^i_a Q^j_b|psi>`` (complex when the strategy does not commute)."""
    psi = s.psi

    def source(i, j):
        q = [s.bob[j][b] @ psi for b in (0, 1)]
        return tuple(tuple(complex(np.vdot(p @ psi, q[b])) for b in (0, 1)) for p in s.alice[i])

    return CorrelationMatrix(g, source, exact=False)


def deterministic_correlation(g: LinearSystemGame, bits: Sequence[int]) -> CorrelationMatrix:
    answers = [best_response(g, i, bits) for i in range(g.m)]

    def source(i, j):
        return tuple(
            tuple(Fraction(int(a == answers[i] and b == bits[j])) for b in (0, 1))
            for a in g.outputs_A(i)
        )

    return CorrelationMatrix(g, source, exact=True)


# Sampling and the referee -------------------------------------------------

CHUNK = 8192


@dataclass(frozen=True)
class Transcript:
    x: int
    y: int
    a: Bits
    b: int


def _questions(g: LinearSystemGame, mode: str) -> list[tuple[int, int]]:
    if mode == "game":
        qs = list(g.question_pairs)
    elif mode == "all":
        qs = [(i, j) for i in range(g.m) for j in range(g.n)]
    else:
        raise MalformedInput(f"unknown question distribution {mode!r}")
    if not qs:
        raise PreconditionError("game has no questions")
    return qs


def sample_transcripts(
    g: LinearSystemGame,
    corr: CorrelationMatrix,
    count: int,
    seed: int = 0,
    questions: str = "game",
    workers: int = 1,
) -> list[Transcript]:
    """Draw ``count`` rounds ``(x, y, a, b)``.

    ``questions="game"`` draws ``(x, y)`` from the game distribution; ``"all"``
    draws uniformly over every pair, including ``j`` outside ``V_i``.  Draws are
    split into fixed chunks, each with its own child seed, so the output does not
    depend on ``workers``.
    """
    if count < 0:
        raise PreconditionError("count must be non-negative")
    qs = _questions(g, questions)
    root = np.random.SeedSequence(seed)
    nchunks = (count + CHUNK - 1) // CHUNK
    seeds = root.spawn(nchunks)

    def run(k):
        rng = np.random.default_rng(seeds[k])
        size = min(CHUNK, count - k * CHUNK)
        qidx = rng.integers(len(qs), size=size)
        u = rng.random(size)
        out = []
        for q, r in zip(qidx.tolist(), u.tolist()):
            i, j = qs[q]
            cdf = _cdf(corr, i, j)
            idx = min(int(np.searchsorted(cdf, r, side="right")), len(cdf) - 1)
            out.append(Transcript(i, j, g.outputs_A(i)[idx // 2], idx % 2))
        return out

    if workers > 1 and nchunks > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, range(nchunks)))
    else:
        parts = [run(k) for k in range(nchunks)]
    return [t for part in parts for t in part]


def _cdf(corr: CorrelationMatrix, i: int, j: int) -> np.ndarray:
    key = ("cdf", i, j)
    if key not in corr._cache:
        corr._cache[key] = np.cumsum(corr.probabilities(i, j))
    return corr._cache[key]


def sample_transcript(g, corr, seed: int = 0, questions: str = "game") -> Transcript:
    return sample_transcripts(g, corr, 1, seed, questions)[0]


@dataclass(frozen=True)
class ProtocolResult:
    rounds: int
    accepted: int
    expected: Number

    @property
    def rate(self) -> float:
        return self.accepted / self.rounds


def run_protocol(
    g: LinearSystemGame,
    prover: Union[CorrelationMatrix, OperatorStrategy],
    rounds: int,
    seed: int = 0,
    workers: int = 1,
) -> ProtocolResult:
    """Monte-Carlo referee.  ``expected`` is the exact game value of the prover's correlation."""
    if rounds < 1:
        raise PreconditionError("rounds must be at least 1")
    corr = prover if isinstance(prover, CorrelationMatrix) else strategy_correlation(g, prover)
    ts = sample_transcripts(g, corr, rounds, seed, "game", workers)
    accepted = sum(g.predicate(t.a, t.b, t.x, t.y) for t in ts)
    expected = corr.value()
    if not corr.exact:
        expected = abs(expected)
    return ProtocolResult(rounds, accepted, expected)
