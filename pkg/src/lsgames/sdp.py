"""Moment-matrix upper bounds for linear-system games and a small dense SDP solver.

Variables are moments ``<psi| W |psi>`` of words in the +-1 observables
``A_ij`` (Alice, row ``i``, variable ``j``) and ``B_j`` (Bob).  Words are
reduced with ``A^2 = B^2 = 1``, Alice/Bob commutation, commutation within a
row, and the row product ``prod_j A_ij = (-1)^{c_i}``.  Only real parts are
kept, which loses nothing since the objective is real.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve

from .errors import PreconditionError, ResourceLimit
from .games import LinearSystemGame
from .wagonwheel import LinearSystemZ2

# A canonical word is (alice_blocks, bob_letters): alice_blocks is a tuple of
# (row, sorted variable tuple) with no two neighbours in the same row.
Key = tuple


class WordReducer:
    def __init__(self, sys: LinearSystemZ2):
        self.rows = [frozenset(r) for r in sys.rows]
        self.c = sys.c

    def _canon_block(self, i: int, s: frozenset) -> tuple[int, frozenset]:
        comp = self.rows[i] - s
        if (len(comp), tuple(sorted(comp))) < (len(s), tuple(sorted(s))):
            return (-1) ** self.c[i], comp
        return 1, s

    def reduce(self, alice, bob) -> tuple[int, Key]:
        """``alice`` is a sequence of ``(row, var)`` letters, ``bob`` of variables."""
        sign = 1
        stack: list[list] = []
        for i, j in alice:
            if stack and stack[-1][0] == i:
                sg, s = self._canon_block(i, stack[-1][1] ^ {j})
                sign *= sg
                if s:
                    stack[-1][1] = s
                else:
                    stack.pop()
            else:
                sg, s = self._canon_block(i, frozenset({j}))
                sign *= sg
                if s:
                    stack.append([i, s])
        b: list[int] = []
        for j in bob:
            if b and b[-1] == j:
                b.pop()
            else:
                b.append(j)
        return sign, (tuple((i, tuple(sorted(s))) for i, s in stack), tuple(b))

    @staticmethod
    def letters(key: Key):
        blocks, bob = key
        return [(i, j) for i, s in blocks for j in s], list(bob)

    @staticmethod
    def adjoint(key: Key) -> Key:
        blocks, bob = key
        return tuple(reversed(blocks)), tuple(reversed(bob))


@dataclass
class MomentProgram:
    """Maximise ``offset + c . y`` subject to ``F0 + sum_k y_k F_k >= 0``.

    ``entries`` lists, for every upper-triangular position ``(p, q)``, the
    variable index (or ``-1`` for the constant identity word) and a sign.
    """

    level: int
    basis: list
    variables: list
    entry_var: np.ndarray
    entry_sign: np.ndarray
    objective: np.ndarray
    offset: float
    raw_basis_size: int = 0

    @property
    def size(self) -> int:
        return len(self.basis)

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    def moment_matrix(self, y: np.ndarray) -> np.ndarray:
        vals = np.where(self.entry_var >= 0, y[np.maximum(self.entry_var, 0)], 1.0)
        return vals * self.entry_sign

    def triplets(self):
        """``(k, p, q, value)`` with ``k = 0`` for ``F0``, 1-based, upper triangle."""
        n = self.size
        out = []
        for p in range(n):
            for q in range(p, n):
                k = int(self.entry_var[p, q])
                out.append((k + 1 if k >= 0 else 0, p + 1, q + 1, float(self.entry_sign[p, q])))
        return sorted(out)


MAX_BASIS = 400
MAX_VARS = 6000


def build_moment_program(g: LinearSystemGame, level: int, max_basis: int = MAX_BASIS,
                         max_vars: int = MAX_VARS) -> MomentProgram:
    if level not in (1, 2):
        raise PreconditionError(f"level {level} is not supported (use 1 or 2)")
    sys = g.system
    red = WordReducer(sys)
    letters = [("A", i, j) for i, row in enumerate(sys.rows) for j in row]
    letters += [("B", j) for j in range(sys.n)]
    words = [()]
    for length in range(1, level + 1):
        words.extend(itertools.product(letters, repeat=length))
    raw = 1 + len(letters)
    basis: list[Key] = []
    seen: set = set()
    for w in words:
        a = [(x[1], x[2]) for x in w if x[0] == "A"]
        b = [x[1] for x in w if x[0] == "B"]
        _, key = red.reduce(a, b)
        if key not in seen:
            seen.add(key)
            basis.append(key)
    n = len(basis)
    if n > max_basis:
        raise ResourceLimit(f"moment matrix of size {n} exceeds the cap {max_basis}")
    expanded = [red.letters(k) for k in basis]
    var_of: dict = {}
    variables: list[Key] = []
    ev = np.full((n, n), -1, dtype=np.int64)
    es = np.ones((n, n))
    identity: Key = ((), ())
    for p in range(n):
        ap, bp = expanded[p]
        ra, rb = ap[::-1], bp[::-1]
        for q in range(p, n):
            aq, bq = expanded[q]
            sign, key = red.reduce(ra + aq, rb + bq)
            adj = red.adjoint(key)
            key = min(key, adj)
            if key == identity:
                k = -1
            else:
                k = var_of.get(key)
                if k is None:
                    k = var_of[key] = len(variables)
                    variables.append(key)
                    if len(variables) > max_vars:
                        raise ResourceLimit(f"more than {max_vars} moment variables")
            ev[p, q] = ev[q, p] = k
            es[p, q] = es[q, p] = sign
    obj = np.zeros(len(variables))
    offset = 0.5
    for (i, j), w in g.pi.items():
        sign, key = red.reduce([(i, j)], [j])
        key = min(key, red.adjoint(key))
        if key == identity:
            offset += 0.5 * float(w) * sign
        else:
            obj[var_of[key]] += 0.5 * float(w) * sign
    return MomentProgram(level, basis, variables, ev, es, obj, offset, raw)


# Solver ------------------------------------------------------------------


@dataclass
class SdpResult:
    value: float
    primal_value: float
    gap: float
    iterations: int
    status: str
    y: Optional[np.ndarray] = field(default=None, repr=False)
    X: Optional[np.ndarray] = field(default=None, repr=False)
    level: int = 0
    size: int = 0
    num_vars: int = 0

    def as_dict(self) -> dict:
        return {
            "value": round(self.value, 9),
            "primal_value": round(self.primal_value, 9),
            "gap": float(f"{self.gap:.3e}"),
            "iterations": self.iterations,
            "status": self.status,
            "level": self.level,
            "basis_size": self.size,
            "variables": self.num_vars,
        }


def _max_step(m: np.ndarray, dm: np.ndarray) -> float:
    """Largest ``a`` with ``m + a dm`` positive semidefinite."""
    low = np.linalg.cholesky(m)
    li = np.linalg.inv(low)
    lam = np.linalg.eigvalsh(li @ dm @ li.T).min()
    return math.inf if lam >= 0 else -1.0 / lam


class _Lmi:
    """Sparse bookkeeping for ``C = F0`` and ``A_k = -F_k`` over full (ordered) entries."""

    def __init__(self, mp: MomentProgram):
        n = mp.size
        ev, es = mp.entry_var, mp.entry_sign
        self.n = n
        self.m = mp.num_vars
        self.C = np.where(ev < 0, es, 0.0)
        P, Q = np.nonzero(ev >= 0)
        self.P, self.Q = P, Q
        vals = -es[P, Q]
        self.S = sp.csc_matrix((vals, (np.arange(len(P)), ev[P, Q])), shape=(len(P), self.m))
        self.ST = self.S.T.tocsr()
        cols = self.S.tocsc()
        self.groups = [
            (P[cols.indices[cols.indptr[k]:cols.indptr[k + 1]]],
             Q[cols.indices[cols.indptr[k]:cols.indptr[k + 1]]],
             cols.data[cols.indptr[k]:cols.indptr[k + 1]])
            for k in range(self.m)
        ]

    def apply(self, M: np.ndarray) -> np.ndarray:
        """``A(M)_k = tr(A_k M) = sum_{(p,q) in k} a_pq M[q, p]``."""
        return self.ST @ M[self.Q, self.P]

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[self.P, self.Q] = self.S @ y
        return out

    def schur(self, X: np.ndarray, Zi: np.ndarray, block: int = 128) -> np.ndarray:
        """``H_kl = tr(A_k X A_l Z^-1)``."""
        H = np.empty((self.m, self.m))
        flat = self.Q * self.n + self.P
        W = np.empty((len(flat), block))
        for lo in range(0, self.m, block):
            hi = min(self.m, lo + block)
            for l in range(lo, hi):
                p, q, a = self.groups[l]
                W[:, l - lo] = ((X[:, p] * a) @ Zi[q, :]).ravel()[flat]
            H[:, lo:hi] = self.ST @ W[:, :hi - lo]
        return (H + H.T) / 2


def solve_sdp(mp: MomentProgram, max_iter: int = 200, tol: float = 1e-9,
              gap_tol: float = 1e-7) -> SdpResult:
    """Infeasible primal-dual interior point (HKM direction, Mehrotra predictor-corrector).

    Primal: ``min <C, X>`` s.t. ``<A_k, X> = b_k``, ``X >= 0``.  Dual:
    ``max b . y`` s.t. ``Z = C - sum y_k A_k >= 0``, where ``Z`` is the moment
    matrix.  The reported value is the dual objective plus the constant term.
    """
    lmi = _Lmi(mp)
    n, m = lmi.n, lmi.m
    b = mp.objective
    C = lmi.C
    scale = max(1.0, np.abs(b).max(initial=0) * n, np.abs(C).max())
    X = np.eye(n) * scale
    Z = np.eye(n) * scale
    y = np.zeros(m)
    status = "maxiter"
    it = 0
    normb, normC = 1 + np.linalg.norm(b), 1 + np.linalg.norm(C)
    for it in range(1, max_iter + 1):
        Rp = b - lmi.apply(X)
        Rd = C - Z - lmi.adjoint(y)
        mu = np.sum(X * Z) / n
        pobj, dobj = np.sum(C * X), b @ y
        pinf, dinf = np.linalg.norm(Rp) / normb, np.linalg.norm(Rd) / normC
        gap = abs(pobj - dobj)
        if pinf <= tol and dinf <= tol and gap <= gap_tol:
            status = "converged"
            break
        try:
            Zi = np.linalg.inv(Z)
            H = lmi.schur(X, Zi)
            H[np.diag_indices(m)] += 1e-14 * max(1.0, np.trace(H) / max(m, 1))
            cho = cho_factor(H, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            status = "numerical"
            break

        def direction(sigma_mu, corr):
            R = sigma_mu * Zi - X - X @ Rd @ Zi
            if corr is not None:
                R = R - corr @ Zi
            rhs = Rp - lmi.apply(R)
            dy = cho_solve(cho, rhs, check_finite=False)
            dZ = Rd - lmi.adjoint(dy)
            dX = R + X @ lmi.adjoint(dy) @ Zi
            dX = (dX + dX.T) / 2
            return dX, dy, dZ

        dXa, dya, dZa = direction(0.0, None)
        ap = min(1.0, _max_step(X, dXa))
        ad = min(1.0, _max_step(Z, dZa))
        mu_aff = np.sum((X + ap * dXa) * (Z + ad * dZa)) / n
        sigma = min(1.0, (mu_aff / mu) ** 3) if mu > 0 else 0.0
        dX, dy, dZ = direction(sigma * mu, dXa @ dZa)
        ap = min(1.0, 0.95 * _max_step(X, dX))
        ad = min(1.0, 0.95 * _max_step(Z, dZ))
        X = X + ap * dX
        X = (X + X.T) / 2
        y = y + ad * dy
        Z = Z + ad * dZ
        Z = (Z + Z.T) / 2
    pobj, dobj = float(np.sum(C * X)), float(b @ y)
    return SdpResult(dobj + mp.offset, pobj + mp.offset, abs(pobj - dobj), it, status, y, X,
                     mp.level, mp.size, mp.num_vars)


def lift_primal(low: MomentProgram, X: np.ndarray, high: MomentProgram) -> tuple[np.ndarray, float]:
    """Pad a primal matrix of a lower level with zeros; return it and its equality residual.

    The lower basis is a subset of the higher one and both use the same word
    reduction, so a primal-feasible ``X`` stays feasible and ``<F0, X>`` bounds
    the higher level too.
    """
    where = {k: i for i, k in enumerate(high.basis)}
    idx = np.array([where[k] for k in low.basis])
    X2 = np.zeros((high.size, high.size))
    X2[np.ix_(idx, idx)] = X
    mask = high.entry_var >= 0
    lhs = np.bincount(high.entry_var[mask], weights=-(high.entry_sign * X2)[mask],
                      minlength=high.num_vars)
    return X2, float(np.abs(lhs - high.objective).max(initial=0.0))


def npa_upper_bound(g: LinearSystemGame, level: int, max_basis: int = MAX_BASIS,
                    max_vars: int = MAX_VARS) -> SdpResult:
    """Level-``level`` bound.

    Level 2 also solves level 1 and checks monotonicity.  When level 2 is over
    the size caps the level-1 primal certificate is lifted instead: the result
    is a valid upper bound for level 2 with status ``"lifted"``, not its optimum.
    """
    if level == 1:
        return solve_sdp(build_moment_program(g, 1, max_basis, max_vars))
    low_mp = build_moment_program(g, 1, max_basis, max_vars)
    low = solve_sdp(low_mp)
    try:
        res = solve_sdp(build_moment_program(g, level, max_basis, max_vars))
    except ResourceLimit:
        high = build_moment_program(g, level, max_basis=10**5, max_vars=10**8)
        X2, resid = lift_primal(low_mp, low.X, high)
        if low.status != "converged" or resid > 1e-7:
            raise
        return SdpResult(low.primal_value, low.primal_value, low.gap, low.iterations, "lifted",
                         None, None, level, high.size, high.num_vars)
    if res.status == "converged" and low.status == "converged" and res.value > low.value + 1e-6:
        raise AssertionError("moment bound increased with the level")
    return res
