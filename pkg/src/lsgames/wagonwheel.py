"""Wagon-wheel compilation of a doubled presentation into a weight-3 GF(2) system.

Each relation ``J^p s_1 ... s_n`` becomes ``3n`` equations over the shared
variables ``s_i`` and ``4n`` fresh ancillas ``a_i, b_i, c_i, d_i``::

    f_i:  s_i + a_i + b_i      = p if i == 1 else 0
    g_i:  b_i + a_{i+1} + c_i  = 0
    h_i:  c_i + d_i + d_{i+1}  = 0

with cyclic indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

from .errors import MalformedInput, PreconditionError
from .reductions import DoubledPresentation, normalized_relation
from .words import (
    AreaCertificate,
    Letter,
    Presentation,
    Step,
    Word,
    commutator,
    gen,
    inverse,
    join_reduced,
    multiply,
    reduce_word,
    verify_area_certificate,
)


@dataclass(frozen=True)
class LinearSystemZ2:
    """Sparse ``m x n`` system over GF(2); ``rows[i]`` lists the 0-based columns of ``V_i``."""

    n: int
    rows: tuple[tuple[int, ...], ...]
    c: tuple[int, ...]
    names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        rows = tuple(tuple(sorted(set(r))) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "c", tuple(int(x) & 1 for x in self.c))
        if len(rows) != len(self.c):
            raise MalformedInput("row count and right-hand side length differ")
        for r in rows:
            for j in r:
                if not 0 <= j < self.n:
                    raise MalformedInput(f"column index {j} out of range")
        if self.names is not None and len(self.names) != self.n:
            raise MalformedInput("column name list has the wrong length")

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def max_row_weight(self) -> int:
        return max((len(r) for r in self.rows), default=0)

    @property
    def nonzeros(self) -> int:
        return sum(len(r) for r in self.rows)

    def column_name(self, j: int) -> str:
        return self.names[j] if self.names else f"x{j + 1}"

    def orphan_columns(self) -> list[int]:
        used = {j for r in self.rows for j in r}
        return [j for j in range(self.n) if j not in used]

    def row_masks(self) -> list[int]:
        return [sum(1 << j for j in r) for r in self.rows]


def magic_square_system() -> LinearSystemZ2:
    """The Mermin-Peres magic square: 3 row and 3 column parity checks on a 3x3 grid."""
    rows = [(0, 1, 2), (3, 4, 5), (6, 7, 8), (0, 3, 6), (1, 4, 7), (2, 5, 8)]
    return LinearSystemZ2(9, tuple(rows), (0, 0, 0, 1, 1, 1))


@dataclass(frozen=True)
class WagonWheelLayout:
    parity: int
    shared: tuple[int, ...]
    a: tuple[int, ...]
    b: tuple[int, ...]
    c: tuple[int, ...]
    d: tuple[int, ...]
    first_row: int = 0

    @property
    def length(self) -> int:
        return len(self.shared)

    @property
    def ancillas(self) -> tuple[int, ...]:
        return self.a + self.b + self.c + self.d

    def equations(self) -> list[tuple[tuple[int, ...], int]]:
        n = self.length
        eqs = []
        for i in range(n):
            eqs.append(((self.shared[i], self.a[i], self.b[i]), self.parity if i == 0 else 0))
        for i in range(n):
            eqs.append(((self.b[i], self.a[(i + 1) % n], self.c[i]), 0))
        for i in range(n):
            eqs.append(((self.c[i], self.d[i], self.d[(i + 1) % n]), 0))
        return eqs

    def f_row(self, i: int) -> int:
        return self.first_row + i

    def g_row(self, i: int) -> int:
        return self.first_row + self.length + i

    def h_row(self, i: int) -> int:
        return self.first_row + 2 * self.length + i


def compile_relation(
    parity: int,
    shared: Sequence[int],
    first_ancilla: int,
    first_row: int = 0,
) -> WagonWheelLayout:
    """Lay out the wheel for one relation whose occurrences map to columns ``shared``."""
    n = len(shared)
    if n < 3:
        raise PreconditionError(f"wagon wheel needs a relation of length >= 3, got {n}")
    base = first_ancilla
    cols = [tuple(range(base + k * n, base + (k + 1) * n)) for k in range(4)]
    return WagonWheelLayout(parity & 1, tuple(shared), *cols, first_row=first_row)


@dataclass(frozen=True)
class CompiledSystem:
    system: LinearSystemZ2
    layouts: tuple[WagonWheelLayout, ...]
    column_of: dict
    doubled: DoubledPresentation

    def phi(self, w: Sequence[Letter]) -> Word:
        """Image of a word over the pre-doubling generators in the solution group."""
        j = self.doubled.presentation.involution
        out = []
        for g, e in self.doubled.image(w):
            out.append((g, e) if g == j else (f"x{self.column_of[g] + 1}", e))
        return tuple(out)


def assemble_system(dp: DoubledPresentation) -> CompiledSystem:
    """Compile every plus-form relation of ``dp`` and merge in relation order."""
    j = dp.presentation.involution
    shared_names = [g for g in dp.presentation.generators if g != j]
    column_of = {g: k for k, g in enumerate(shared_names)}
    names = list(shared_names)
    rows: list[tuple[int, ...]] = []
    rhs: list[int] = []
    layouts = []
    next_col = len(shared_names)
    for ridx, r in enumerate(dp.core_relations):
        parity = 1 if r and r[0][0] == j else 0
        body = r[parity:]
        if any(e != 1 or g == j for g, e in body):
            raise PreconditionError(f"relation {ridx} is not in plus-form")
        lay = compile_relation(parity, [column_of[g] for g, _ in body], next_col, len(rows))
        n = lay.length
        for kind, cols in zip("abcd", (lay.a, lay.b, lay.c, lay.d)):
            names.extend(f"w{ridx}{kind}{i + 1}" for i in range(n))
        next_col += 4 * n
        for cols, val in lay.equations():
            rows.append(cols)
            rhs.append(val)
        layouts.append(lay)
    system = LinearSystemZ2(next_col, tuple(rows), tuple(rhs), tuple(names))
    return CompiledSystem(system, tuple(layouts), column_of, dp)


def _x(j: int) -> str:
    return f"x{j + 1}"


@dataclass(frozen=True)
class SolutionGroup:
    system: LinearSystemZ2
    presentation: Presentation
    index: dict = field(repr=False)

    @property
    def involution(self) -> str:
        return "J"

    def x(self, j: int) -> str:
        return _x(j)

    @cached_property
    def rotation_lookup(self) -> dict:
        """Map each cyclic rotation of a relator or its inverse to ``(index, sign, y)``."""
        table: dict = {}
        for idx, r in enumerate(self.presentation.relations):
            r_inv = inverse(r)
            n = len(r)
            for sign, body, back in ((1, r, r_inv), (-1, r_inv, r)):
                for k in range(n):
                    # inverse(body[:k]) is the tail of the inverted body
                    table.setdefault(body[k:] + body[:k], (idx, sign, back[n - k:]))
        return table


def solution_group(sys: LinearSystemZ2) -> SolutionGroup:
    """Presentation with generators ``x_1..x_n, J``.

    Relations, in order: ``x_i^2``, ``J^2``, ``[x_i, J]``, one row product
    ``x_{j1} x_{j2} ... J^{c_i}`` per equation, and ``[x_j, x_k]`` for every pair
    sharing a row (``j < k``).
    """
    J = gen("J")
    rels: list[Word] = []
    index: dict = {}
    for j in range(sys.n):
        index[("sq", j)] = len(rels)
        rels.append(gen(_x(j)) * 2)
    index[("J2",)] = len(rels)
    rels.append(J + J)
    for j in range(sys.n):
        index[("central", j)] = len(rels)
        rels.append(commutator(gen(_x(j)), J))
    for i, row in enumerate(sys.rows):
        index[("row", i)] = len(rels)
        rels.append(tuple((_x(j), 1) for j in row) + J * sys.c[i])
    pairs = sorted({(j, k) for row in sys.rows for a, j in enumerate(row) for k in row[a + 1:]})
    for j, k in pairs:
        index[("comm", j, k)] = len(rels)
        rels.append(commutator(gen(_x(j)), gen(_x(k))))
    gens = tuple(_x(j) for j in range(sys.n)) + ("J",)
    return SolutionGroup(sys, Presentation(gens, tuple(rels), "J"), index)


class _Rewriter:
    """Rewrite a word to the empty word while recording certificate steps.

    The invariant is ``start = P_1 ... P_k (c v c^-1)`` as free-group elements, where
    ``v`` is the working word and ``c`` an outer conjugator accumulated by cyclic
    rotations.
    """

    def __init__(self, word: Sequence[Letter], lookup: dict):
        self.v: list[Letter] = list(word)
        self.c: Word = ()
        self.lookup = lookup
        self.steps: list[Step] = []

    def rewrite(self, pos: int, length: int, new: Sequence[Letter]) -> None:
        old = tuple(self.v[pos:pos + length])
        key = old + inverse(new)
        try:
            idx, sign, y = self.lookup[key]
        except KeyError:
            raise PreconditionError(f"no relator matches rewrite {old} -> {tuple(new)}") from None
        z = multiply(self.c, self.v[:pos], y)
        self.steps.append(Step(z, idx, sign))
        self.v[pos:pos + length] = list(new)

    def rotate(self, k: int) -> None:
        q = tuple(self.v[:k])
        self.v = self.v[k:] + list(q)
        self.c = multiply(self.c, q)

    def reduce(self) -> None:
        self.v = list(reduce_word(self.v))

    def find(self, letter: Letter) -> int:
        return self.v.index(letter)


def _collect_involution(rw: _Rewriter, j: str) -> int:
    """Bring every ``J^{+-1}`` to the front and reduce to ``J^p``; return ``p``."""
    v = rw.v
    jpos = [k for k, (g, _) in enumerate(v) if g == j]
    if not jpos:
        return 0

    def cost(k):
        rot = v[k:] + v[:k]
        seen, total = 0, 0
        for g, _ in rot:
            if g == j:
                total += seen
            else:
                seen += 1
        return total

    best = min(jpos, key=lambda k: (cost(k), k))
    rw.rotate(best)
    front = 0
    for k in range(len(rw.v)):
        if rw.v[k][0] != j:
            continue
        for pos in range(k, front, -1):
            rw.rewrite(pos - 1, 2, (rw.v[pos], rw.v[pos - 1]))
        front += 1
    rw.reduce()
    while rw.v and rw.v[0] == (j, -1):
        k = 0
        while k < len(rw.v) and rw.v[k] == (j, -1):
            k += 1
        rw.rewrite(k - 1, 1, ((j, 1),))
    while len(rw.v) >= 2 and rw.v[0] == (j, 1) and rw.v[1] == (j, 1):
        rw.rewrite(0, 2, ())
    return 1 if rw.v and rw.v[0] == (j, 1) else 0


def _wheel(rw: _Rewriter, lay: WagonWheelLayout) -> None:
    """Reduce ``J^p s_1 ... s_n`` to the empty word using the wheel's equations."""
    n = lay.length
    a = [(_x(q), 1) for q in lay.a]
    b = [(_x(q), 1) for q in lay.b]
    c = [(_x(q), 1) for q in lay.c]
    d = [(_x(q), 1) for q in lay.d]
    inv = lambda x: (x[0], -x[1])  # noqa: E731
    J = ("J", 1)
    for i in range(n):
        pos = rw.find((_x(lay.shared[i]), 1))
        new = [inv(b[i]), inv(a[i])]
        if i == 0 and lay.parity:
            new.insert(0, inv(J))
        rw.rewrite(pos, 1, new)
    rw.reduce()
    for i in range(n):
        pos = rw.find(inv(b[i]))
        rw.rewrite(pos, 2, (inv(a[i]), inv(b[i])))
    for i in range(n - 1):
        pos = rw.find(inv(b[i]))
        rw.rewrite(pos, 2, (c[i],))
    rw.rotate(len(rw.v) - 1)
    rw.rewrite(0, 2, (c[n - 1],))
    rw.rewrite(0, 1, (inv(d[n - 1]), inv(d[0])))
    for i in range(n - 1):
        pos = rw.find(c[i])
        rw.rewrite(pos, 1, (inv(d[i + 1]), inv(d[i])))
        rw.rewrite(pos, 2, (inv(d[i]), inv(d[i + 1])))
    for i in range(n - 1):
        pos = rw.find(inv(d[i]))
        rw.rewrite(pos, 2, ())
    rw.rewrite(0, 2, ())
    if rw.v:
        raise AssertionError(f"wheel derivation left {rw.v}")


def relator_certificate(
    r: Sequence[Letter],
    compiled: CompiledSystem,
    gamma: SolutionGroup,
    source_involution: str,
    core_index: Optional[int],
) -> AreaCertificate:
    """Certificate in the solution group for the image of a source relator."""
    img = compiled.phi(r)
    rw = _Rewriter(img, gamma.rotation_lookup)
    p = _collect_involution(rw, "J")
    rw.reduce()
    if core_index is None:
        if rw.v:
            raise AssertionError("dropped relator did not reduce to the identity")
        return AreaCertificate(img, tuple(rw.steps))
    target = compiled.phi(()) + tuple(
        (g, e) if g == "J" else (_x(compiled.column_of[g]), e)
        for g, e in compiled.doubled.core_relations[core_index]
    )
    if p and len(rw.v) == 1:
        # bare J: pad with u u v v
        u, v = target[1], target[3]
        rw.rewrite(1, 0, (u, u))
        rw.rewrite(3, 0, (v, v))
    for k, (g, e) in enumerate(rw.v):
        if e == -1:
            rw.rewrite(k, 1, ((g, 1),))
    if tuple(rw.v) != target:
        raise AssertionError(f"plus-form mismatch for core relation {core_index}")
    _wheel(rw, compiled.layouts[core_index])
    return AreaCertificate(img, tuple(rw.steps))


@dataclass(frozen=True)
class TransportReport:
    certificate: AreaCertificate
    source_area: int
    area: int
    bound: int

    @property
    def blowup(self) -> float:
        return self.area / self.source_area if self.source_area else 0.0


def transport_certificate_wagonwheel(
    cert: AreaCertificate,
    source: Presentation,
    compiled: CompiledSystem,
    gamma: Optional[SolutionGroup] = None,
) -> TransportReport:
    """Map a certificate in ``source`` (before normalisation and doubling) into the solution group.

    The per-step budget is ``7 * max(|phi(r)|, |r'|)`` where ``r'`` is the doubled
    relation the step's relator normalises to.
    """
    check = verify_area_certificate(source, cert)
    if not check.valid:
        raise PreconditionError("input certificate is not valid")
    if gamma is None:
        gamma = solution_group(compiled.system)
    j = source.involution
    core_of = []
    k = 0
    for r in source.relations:
        if normalized_relation(r, j) is None:
            core_of.append(None)
        else:
            core_of.append(k)
            k += 1
    if k != compiled.doubled.core_count:
        raise PreconditionError("compiled system does not come from this presentation")
    cache: dict = {}
    steps: list[Step] = []
    bound = 0
    for z, idx, sign in cert.steps:
        if idx not in cache:
            cache[idx] = relator_certificate(source.relations[idx], compiled, gamma, j, core_of[idx])
        sub = cache[idx]
        if sign == -1:
            sub = sub.inverted()
        # sub's conjugators come out of the rewriter reduced, so joining is enough
        y = reduce_word(compiled.phi(z))
        steps.extend(Step(join_reduced(y, w), i, sg) for w, i, sg in sub.steps)
        core = core_of[idx]
        core_len = len(compiled.doubled.core_relations[core]) if core is not None else 0
        bound += 7 * max(len(compiled.phi(source.relations[idx])), core_len)
    out = AreaCertificate(compiled.phi(cert.target), tuple(steps))
    return TransportReport(out, cert.area, out.area, bound)
