"""Representations of solution groups: GF(2) solutions, cycle separation and small matrix reps."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import PreconditionError
from .games import OperatorStrategy, measurements_from_observables, tensor_observable_strategy
from .wagonwheel import CompiledSystem, LinearSystemZ2, WagonWheelLayout
from .words import Presentation


# GF(2) elimination --------------------------------------------------------


@dataclass(frozen=True)
class Z2Solution:
    """Either a solution with a nullspace basis, or a witness set of rows.

    The witness rows XOR to the zero row with right-hand side 1.
    """

    n: int
    solution: Optional[tuple[int, ...]]
    nullspace: tuple[tuple[int, ...], ...] = ()
    witness: Optional[tuple[int, ...]] = None
    rank: int = 0

    @property
    def consistent(self) -> bool:
        return self.solution is not None


def _bits(mask: int, n: int) -> tuple[int, ...]:
    return tuple((mask >> j) & 1 for j in range(n))


def _mask(bits: Sequence[int]) -> int:
    return sum(1 << j for j, b in enumerate(bits) if b)


def _parity(x: int) -> int:
    return bin(x).count("1") & 1


def solve_z2(sys: LinearSystemZ2) -> Z2Solution:
    """Gaussian elimination on bit-packed rows, tracking which input rows were combined."""
    n = sys.n
    colmask = (1 << n) - 1
    pivots: dict[int, tuple[int, int]] = {}
    for i, (row, c) in enumerate(zip(sys.row_masks(), sys.c)):
        v, combo = row | (c << n), 1 << i
        while v & colmask:
            p = (v & -v).bit_length() - 1
            if p not in pivots:
                pivots[p] = (v, combo)
                break
            pv, pc = pivots[p]
            v ^= pv
            combo ^= pc
        else:
            if v:
                return Z2Solution(n, None, witness=_rows_of(combo), rank=len(pivots))
    order = sorted(pivots, reverse=True)

    def back(fixed: int, rhs: bool) -> int:
        x = fixed
        for p in order:
            v, _ = pivots[p]
            val = _parity(v & colmask & x & ~(1 << p))
            if rhs:
                val ^= (v >> n) & 1
            if val:
                x |= 1 << p
            else:
                x &= ~(1 << p)
        return x

    free = [j for j in range(n) if j not in pivots]
    sol = back(0, True)
    basis = tuple(_bits(back(1 << f, False), n) for f in free)
    return Z2Solution(n, _bits(sol, n), basis, None, len(pivots))


def _rows_of(combo: int) -> tuple[int, ...]:
    out, i = [], 0
    while combo:
        if combo & 1:
            out.append(i)
        combo >>= 1
        i += 1
    return tuple(out)


def check_solution(sys: LinearSystemZ2, x: Sequence[int], homogeneous: bool = False) -> bool:
    xm = _mask(x)
    return all(
        _parity(r & xm) == (0 if homogeneous else c) for r, c in zip(sys.row_masks(), sys.c)
    )


def check_witness(sys: LinearSystemZ2, rows: Sequence[int]) -> bool:
    masks = sys.row_masks()
    acc, rhs = 0, 0
    for i in rows:
        acc ^= masks[i]
        rhs ^= sys.c[i]
    return acc == 0 and rhs == 1


# Cycle separation ---------------------------------------------------------


@dataclass(frozen=True)
class Cycle:
    label: str
    columns: tuple[int, ...]


@dataclass(frozen=True)
class SeparationReport:
    """Cycles (nullspace vectors of ``Mx = 0``) separating the generators.

    ``witness_single[j]`` names a cycle containing column ``j``; ``unresolved``
    lists columns or pairs no certificate was found for.
    """

    cycles: tuple[Cycle, ...]
    witness_single: tuple[int, ...]
    pair_groups_resolved: bool
    extra: tuple[tuple[int, ...], ...] = ()
    unresolved: tuple = ()
    replayed: bool = False

    @property
    def ok(self) -> bool:
        return not self.unresolved and self.replayed

    def separating_cycle(self, i: int, j: int) -> Optional[int]:
        for k, cyc in enumerate(self.cycles):
            if (i in cyc.columns) != (j in cyc.columns):
                return k
        return None


def _outer_paths(lay: WagonWheelLayout, col: int) -> list[int]:
    """Union of the outer-rim paths joining consecutive occurrences of ``col``."""
    occ = [i for i, s in enumerate(lay.shared) if s == col]
    if len(occ) % 2:
        raise PreconditionError("generator occurs an odd number of times in a relation")
    edges: list[int] = []
    for i1, i2 in zip(occ[0::2], occ[1::2]):
        for k in range(i1, i2):
            edges.append(lay.b[k])
            edges.append(lay.a[k + 1])
    return edges


def wheel_cycles(compiled: CompiledSystem) -> list[Cycle]:
    """Inner rims, spokes and the per-generator rim-path unions."""
    out: list[Cycle] = []
    for r, lay in enumerate(compiled.layouts):
        n = lay.length
        out.append(Cycle(f"inner[{r}]", tuple(sorted(lay.d))))
        for i in range(n):
            cols = (lay.a[i], lay.b[i], lay.c[i], lay.d[i], lay.c[i - 1])
            out.append(Cycle(f"spoke[{r},{i + 1}]", tuple(sorted(cols))))
    names = compiled.system.names or ()
    for g, col in sorted(compiled.column_of.items(), key=lambda kv: kv[1]):
        edges = {col}
        for lay in compiled.layouts:
            for e in _outer_paths(lay, col):
                edges ^= {e}
        label = names[col] if names else f"x{col + 1}"
        out.append(Cycle(f"paths[{label}]", tuple(sorted(edges))))
    return out


def cycle_separation(compiled: CompiledSystem) -> SeparationReport:
    """Certify ``x_i`` is not ``1`` or ``J`` and ``x_i != x_j`` for all columns.

    Each certificate is a vector ``y`` with ``My = 0``; the one-dimensional
    representation ``x_k -> (-1)^{y_k}``, ``J -> 1`` then distinguishes the
    generators.  Columns the standard cycles fail to tell apart fall back to a
    direct GF(2) solve.
    """
    sys = compiled.system
    n = sys.n
    cycles = wheel_cycles(compiled)
    masks = [_mask_cols(c.columns) for c in cycles]
    replay = all(check_solution(sys, _bits(m, n), homogeneous=True) for m in masks)
    sig = [0] * n
    for k, m in enumerate(masks):
        x = m
        while x:
            j = (x & -x).bit_length() - 1
            sig[j] |= 1 << k
            x &= x - 1
    single = []
    extra: list[tuple[int, ...]] = []
    unresolved: list = []
    for j in range(n):
        if sig[j]:
            single.append((sig[j] & -sig[j]).bit_length() - 1)
            continue
        y = _separating_solution(sys, [j])
        if y is None:
            unresolved.append((j,))
            single.append(-1)
        else:
            extra.append(y)
            single.append(len(cycles) + len(extra) - 1)
    groups: dict[int, list[int]] = {}
    for j in range(n):
        groups.setdefault(sig[j], []).append(j)
    for cols in groups.values():
        for i, j in itertools.combinations(cols, 2):
            y = _separating_solution(sys, [i, j])
            if y is None:
                unresolved.append((i, j))
            else:
                extra.append(y)
    replay = replay and all(check_solution(sys, y, homogeneous=True) for y in extra)
    return SeparationReport(
        tuple(cycles), tuple(single), not unresolved, tuple(extra), tuple(unresolved), replay
    )


def _mask_cols(cols: Sequence[int]) -> int:
    m = 0
    for j in cols:
        m |= 1 << j
    return m


def _separating_solution(sys: LinearSystemZ2, odd: list[int]) -> Optional[tuple[int, ...]]:
    """A solution of ``My = 0`` with ``sum_{j in odd} y_j = 1``, if one exists."""
    aug = LinearSystemZ2(sys.n, sys.rows + (tuple(odd),), (0,) * sys.m + (1,))
    res = solve_z2(aug)
    return res.solution if res.consistent else None


# Matrix representations ---------------------------------------------------


@dataclass(frozen=True)
class SignedRep:
    dim: int
    images: dict
    involution: Optional[str] = None
    j_sign: int = 0

    def image(self, word) -> np.ndarray:
        out = np.eye(self.dim, dtype=complex)
        for g, e in word:
            m = self.images[g]
            out = out @ (m if e == 1 else np.linalg.inv(m))
        return out


@dataclass(frozen=True)
class RepSearchResult:
    rep: Optional[SignedRep]
    nodes: int
    dims_tried: tuple[int, ...]
    exhausted: bool

    @property
    def status(self) -> str:
        return "found" if self.rep else "unknown"


DIMS = (1, 2, 4, 8)
_BASE = {
    "I": np.eye(2),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]]),
    "XZ": np.array([[0.0, -1.0], [1.0, 0.0]]),
    "H": np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2),
}


def candidate_matrices(d: int) -> list[np.ndarray]:
    """Signed permutations (``d <= 4``) in lexicographic order, then signed tensor products."""
    out: list[np.ndarray] = []
    seen: set = set()

    def add(m):
        key = tuple(np.round(m, 12).ravel().tolist())
        if key not in seen:
            seen.add(key)
            out.append(m)

    if d <= 4:
        for perm in itertools.permutations(range(d)):
            for signs in itertools.product((1.0, -1.0), repeat=d):
                m = np.zeros((d, d))
                for r, (c, s) in enumerate(zip(perm, signs)):
                    m[r, c] = s
                add(m)
    k = int(round(math.log2(d))) if d > 1 else 0
    if k:
        for labels in itertools.product(_BASE, repeat=k):
            m = np.eye(1)
            for lbl in labels:
                m = np.kron(m, _BASE[lbl])
            add(m)
            add(-m)
    else:
        add(np.eye(1))
        add(-np.eye(1))
    return out


class _Interned:
    """Matrices interned by rounded entries so products become table lookups."""

    def __init__(self, d: int):
        self.d = d
        self.mats: list[np.ndarray] = []
        self.ids: dict = {}
        self.prod: dict = {}
        self.inv: dict = {}
        self.one = self.add(np.eye(d))

    def add(self, m: np.ndarray) -> int:
        key = tuple(np.round(m, 9).ravel().tolist())
        k = self.ids.get(key)
        if k is None:
            k = self.ids[key] = len(self.mats)
            self.mats.append(m)
        return k

    def mul(self, a: int, b: int) -> int:
        k = self.prod.get((a, b))
        if k is None:
            k = self.prod[(a, b)] = self.add(self.mats[a] @ self.mats[b])
        return k

    def inverse(self, a: int) -> int:
        k = self.inv.get(a)
        if k is None:
            k = self.inv[a] = self.add(np.linalg.inv(self.mats[a]))
        return k

    def word(self, letters, assign: dict) -> int:
        acc = self.one
        for g, e in letters:
            x = assign[g]
            acc = self.mul(acc, x if e == 1 else self.inverse(x))
        return acc


def _orbit_representatives(cands: list[int], group: list[tuple[int, int]], ring: _Interned) -> list[int]:
    """First candidate of each orbit under conjugation by ``group`` (pairs ``(P, P^-1)``)."""
    if len(group) <= 1:
        return cands
    seen: set = set()
    out = []
    for c in cands:
        if c in seen:
            continue
        out.append(c)
        for q, qi in group:
            seen.add(ring.mul(ring.mul(q, c), qi))
    return out


def _is_signed_perm(m: np.ndarray) -> bool:
    return bool(np.all(np.isin(m, (-1.0, 0.0, 1.0))) and np.all(np.abs(m).sum(axis=0) == 1))


def find_signed_rep(
    p: Presentation,
    dim_cap: int = 8,
    require_j_negative: bool = True,
    max_nodes: int = 2_000_000,
    tol: float = 1e-10,
) -> RepSearchResult:
    """Backtracking search for a representation in dimension ``1, 2, 4, 8`` up to ``dim_cap``.

    The involution is assigned first (``-I`` when required), then the other
    generators in presentation order.  A relation is checked as soon as all its
    generators have images; when the newest generator occurs once in it, its
    image is forced.  Otherwise a generator only ranges over one candidate per
    orbit under conjugation by the signed permutations fixing the images chosen
    so far.  The search is sound but not complete.  Returns ``rep=None`` when
    nothing is found.
    """
    if dim_cap not in DIMS:
        raise PreconditionError(f"dim_cap must be one of {DIMS}")
    j = p.involution
    if require_j_negative and j is None:
        raise PreconditionError("presentation has no designated involution")
    order = ([j] if j is not None else []) + [g for g in p.generators if g != j]
    pos = {g: k for k, g in enumerate(order)}
    due: list[list] = [[] for _ in order]
    for r in p.relations:
        if r:
            due[max(pos[g] for g, _ in r)].append(r)
    nodes = 0
    tried = []
    for d in DIMS:
        if d > dim_cap:
            break
        tried.append(d)
        ring = _Interned(d)
        cands = [ring.add(m) for m in candidate_matrices(d)]
        cand_set = set(cands)
        minus = ring.add(-np.eye(d))
        fixed_j = j is not None and require_j_negative
        group = []
        if d <= 4:
            for m in candidate_matrices(d):
                if _is_signed_perm(m):
                    q = ring.add(m)
                    group.append((q, ring.inverse(q)))
        stabs = [group]
        orbit_cache: dict = {}
        # candidates passing every relation that only involves g (and a fixed J)
        unary: dict = {}
        for g in order:
            own = [r for r in p.relations if r and all(h == g or (fixed_j and h == j) for h, _ in r)]
            ok = []
            for c in cands:
                env = {g: c, j: minus} if fixed_j else {g: c}
                if all(ring.word(r, env) == ring.one for r in own):
                    ok.append(c)
            unary[g] = ok
        assign: dict = {}

        def options(level: int) -> list[int]:
            g = order[level]
            if level == 0 and fixed_j:
                return [minus]
            key = (g, tuple(q for q, _ in stabs[level]))
            base = orbit_cache.get(key)
            if base is None:
                base = orbit_cache[key] = _orbit_representatives(unary[g], stabs[level], ring)
            forced = None
            for r in due[level]:
                hits = [k for k, (h, _) in enumerate(r) if h == g]
                if len(hits) != 1:
                    continue
                k = hits[0]
                assign[g] = ring.one
                pre = ring.word(r[:k], assign)
                post = ring.word(r[k + 1:], assign)
                del assign[g]
                x = ring.inverse(ring.mul(post, pre))
                if r[k][1] == -1:
                    x = ring.inverse(x)
                if forced is None:
                    forced = x
                elif forced != x:
                    return []
            if forced is not None:
                return [forced] if forced in cand_set else []
            return base

        def holds(level: int) -> bool:
            return all(ring.word(r, assign) == ring.one for r in due[level])

        stack = [iter(options(0))]
        found = False
        while stack:
            level = len(stack) - 1
            try:
                k = next(stack[-1])
            except StopIteration:
                stack.pop()
                stabs.pop()
                assign.pop(order[len(stack)], None)
                continue
            nodes += 1
            if nodes > max_nodes:
                return RepSearchResult(None, nodes, tuple(tried), False)
            assign[order[level]] = k
            if not holds(level):
                del assign[order[level]]
                continue
            if level + 1 == len(order):
                found = True
                break
            stabs.append([(q, qi) for q, qi in stabs[level] if ring.mul(ring.mul(q, k), qi) == k])
            stack.append(iter(options(level + 1)))
        if found:
            images = {g: ring.mats[assign[g]] for g in order}
            sign = 0
            if j is not None:
                sign = -1 if assign[j] == minus else (1 if assign[j] == ring.one else 0)
            rep = SignedRep(d, images, j, sign)
            if verify_rep(p, rep, tol) <= tol:
                return RepSearchResult(rep, nodes, tuple(tried), True)
    return RepSearchResult(None, nodes, tuple(tried), True)


def verify_rep(p: Presentation, rep: SignedRep, tol: float = 1e-10) -> float:
    """Largest entrywise deviation from the identity over all relations."""
    eye = np.eye(rep.dim)
    worst = 0.0
    for r in p.relations:
        worst = max(worst, float(np.abs(rep.image(r) - eye).max()))
    return worst


def rep_from_solution(bits: Sequence[int]) -> SignedRep:
    """One-dimensional representation ``x_j -> (-1)^{bits_j}``, ``J -> -1``."""
    images = {f"x{j + 1}": np.array([[(-1.0) ** b]]) for j, b in enumerate(bits)}
    images["J"] = -np.eye(1)
    return SignedRep(1, images, "J", -1)


def strategy_from_rep(rep: SignedRep, sys: LinearSystemZ2) -> OperatorStrategy:
    """Perfect commuting strategy on ``C^d (x) C^d`` from a rep with ``J -> -I``."""
    if rep.j_sign != -1:
        raise PreconditionError("representation must send J to -I")
    missing = [j + 1 for j in range(sys.n) if f"x{j + 1}" not in rep.images]
    if missing:
        raise PreconditionError(f"representation has no image for x{missing[0]}")
    ops = [np.asarray(rep.images[f"x{j + 1}"], dtype=complex) for j in range(sys.n)]
    return measurements_from_observables(tensor_observable_strategy(sys, ops), sys)
