"""Free-group words, finite presentations and area certificates.

A word is a tuple of ``(generator, exponent)`` letters with exponent ``+1`` or
``-1``.  Words are written as whitespace-separated tokens where a trailing
apostrophe marks an inverse, so ``"a b' a"`` is ``a b^-1 a``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence

from .errors import MalformedInput, PreconditionError

Letter = tuple[str, int]
Word = tuple[Letter, ...]

_TOKEN = re.compile(r"^[A-Za-z0-9_]+$")


def check_name(name: str) -> str:
    if not name or not _TOKEN.match(name):
        raise MalformedInput(f"invalid generator name {name!r}")
    return name


def parse_word(text: str, generators: Optional[Iterable[str]] = None) -> Word:
    """Parse ``"a b' c"`` into a word.  ``1`` or an empty string is the identity."""
    allowed = None if generators is None else set(generators)
    letters = []
    for tok in text.split():
        if tok == "1":
            continue
        exp = 1
        while tok.endswith("'"):
            tok = tok[:-1]
            exp = -exp
        check_name(tok)
        if allowed is not None and tok not in allowed:
            raise MalformedInput(f"undeclared generator {tok!r}")
        letters.append((tok, exp))
    return tuple(letters)


def format_word(w: Sequence[Letter]) -> str:
    return " ".join(g if e == 1 else g + "'" for g, e in w)


def inverse(w: Sequence[Letter]) -> Word:
    return tuple((g, -e) for g, e in reversed(w))


def reduce_word(w: Iterable[Letter]) -> Word:
    out: list[Letter] = []
    push, pop = out.append, out.pop
    top = None
    for x in w:
        if top is not None and top[0] == x[0] and top[1] == -x[1]:
            pop()
            top = out[-1] if out else None
        else:
            push(x)
            top = x
    return tuple(out)


def multiply(*words: Sequence[Letter]) -> Word:
    return reduce_word(itertools.chain.from_iterable(words))


def join_reduced(a: Sequence[Letter], b: Sequence[Letter]) -> Word:
    """``a b`` for already reduced ``a`` and ``b``: only the junction can cancel."""
    a, b = tuple(a), tuple(b)
    k, n = 0, min(len(a), len(b))
    while k < n and a[-1 - k][0] == b[k][0] and a[-1 - k][1] == -b[k][1]:
        k += 1
    return a[:len(a) - k] + b[k:]


def conjugate(z: Sequence[Letter], r: Sequence[Letter], sign: int = 1) -> Word:
    """Literal (unreduced) word ``z r^sign z^-1``."""
    body = tuple(r) if sign == 1 else inverse(r)
    return tuple(z) + body + inverse(z)


def power(w: Sequence[Letter], k: int) -> Word:
    base = tuple(w) if k >= 0 else inverse(w)
    return base * abs(k)


def commutator(a: Sequence[Letter], b: Sequence[Letter]) -> Word:
    """``[a, b] = a b a^-1 b^-1`` as a literal word."""
    return tuple(a) + tuple(b) + inverse(a) + inverse(b)


def gen(name: str, exp: int = 1) -> Word:
    return ((name, exp),)


@dataclass(frozen=True)
class Presentation:
    generators: tuple[str, ...]
    relations: tuple[Word, ...]
    involution: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "relations", tuple(tuple(r) for r in self.relations))
        seen = set()
        for g in self.generators:
            check_name(g)
            if g in seen:
                raise MalformedInput(f"duplicate generator {g!r}")
            seen.add(g)
        if self.involution is not None and self.involution not in seen:
            raise MalformedInput(f"involution {self.involution!r} is not a generator")
        for r in self.relations:
            for g, e in r:
                if g not in seen:
                    raise MalformedInput(f"relation uses undeclared generator {g!r}")
                if e not in (1, -1):
                    raise MalformedInput(f"bad exponent {e} in relation")

    @property
    def size(self) -> int:
        """``|S| + sum |r|`` over the relations as stored."""
        return len(self.generators) + sum(len(r) for r in self.relations)

    @property
    def max_relation_length(self) -> int:
        return max((len(r) for r in self.relations), default=0)

    def check_word(self, w: Iterable[Letter]) -> Word:
        w = tuple(w)
        names = set(self.generators)
        for g, _ in w:
            if g not in names:
                raise MalformedInput(f"undeclared generator {g!r}")
        return w


class Step(NamedTuple):
    conjugator: Word
    relator: int
    sign: int


@dataclass(frozen=True)
class AreaCertificate:
    target: Word
    steps: tuple[Step, ...] = field(default_factory=tuple)

    @property
    def area(self) -> int:
        return len(self.steps)

    def product(self, p: Presentation) -> Word:
        out: list[Word] = []
        for z, idx, sign in self.steps:
            out.append(conjugate(z, p.relations[idx], sign))
        return multiply(*out)

    def inverted(self) -> "AreaCertificate":
        """Certificate for ``target^-1``."""
        steps = tuple(Step(z, i, -s) for z, i, s in reversed(self.steps))
        return AreaCertificate(inverse(self.target), steps)

    def conjugated(self, y: Sequence[Letter]) -> "AreaCertificate":
        """Certificate for ``y target y^-1``."""
        y = tuple(y)
        steps = tuple(Step(multiply(y, z), i, s) for z, i, s in self.steps)
        return AreaCertificate(multiply(y, self.target, inverse(y)), steps)


def concat_certificates(target: Sequence[Letter], *certs: AreaCertificate) -> AreaCertificate:
    steps = tuple(itertools.chain.from_iterable(c.steps for c in certs))
    return AreaCertificate(tuple(target), steps)


class CertificateCheck(NamedTuple):
    valid: bool
    area: int
    max_conjugator_length: int


def verify_area_certificate(p: Presentation, cert: AreaCertificate) -> CertificateCheck:
    for z, idx, sign in cert.steps:
        if not 0 <= idx < len(p.relations):
            raise MalformedInput(f"relator index {idx} out of range")
        if sign not in (1, -1):
            raise MalformedInput(f"bad sign {sign}")
        p.check_word(z)
    p.check_word(cert.target)
    # letters as signed integers make the long free reductions cheap
    code = {g: k + 1 for k, g in enumerate(p.generators)}
    rels = [[code[g] * e for g, e in r] for r in p.relations]
    stack: list[int] = []
    longest = 0
    prev: list[int] = []
    for z, idx, sign in cert.steps:
        zi = [code[g] * e for g, e in z]
        if any(x == -y for x, y in zip(zi, zi[1:])):
            zi = _int_reduce(zi)
        longest = max(longest, len(zi))
        # prev^-1 z cancels down to the parts after the common prefix
        k = _common_prefix(prev, zi)
        _push(stack, [-x for x in reversed(prev[k:])])
        _push(stack, zi[k:])
        _push(stack, rels[idx] if sign == 1 else [-x for x in reversed(rels[idx])])
        prev = zi
    _push(stack, [-x for x in reversed(prev)])
    valid = stack == _int_reduce([code[g] * e for g, e in cert.target])
    return CertificateCheck(valid, cert.area, longest)


def _common_prefix(a: list[int], b: list[int]) -> int:
    lo, hi = 0, min(len(a), len(b))
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if a[:mid] == b[:mid]:
            lo = mid
        else:
            hi = mid - 1
    return lo


def _push(stack: list[int], letters: Sequence[int]) -> None:
    for x in letters:
        if stack and stack[-1] == -x:
            stack.pop()
        else:
            stack.append(x)


def _int_reduce(letters: Sequence[int]) -> list[int]:
    out: list[int] = []
    _push(out, letters)
    return out


def conjugator_cap(p: Presentation, w: Sequence[Letter], max_area: int) -> int:
    ell = p.max_relation_length
    return max_area * ell + ell + len(reduce_word(w))


def _relator_moves(p: Presentation) -> list[tuple[Word, Word, int, int]]:
    """All cyclic rotations of each relator and its inverse.

    Each entry is ``(rotation, y, index, sign)`` with ``rotation = y r^sign y^-1``
    freely.
    """
    moves = []
    seen = set()
    for idx, r in enumerate(p.relations):
        for sign in (1, -1):
            body = r if sign == 1 else inverse(r)
            for k in range(max(len(body), 1)):
                rot = body[k:] + body[:k]
                y = inverse(body[:k])
                key = (reduce_word(rot), idx, sign)
                if key in seen:
                    continue
                seen.add(key)
                moves.append((rot, y, idx, sign))
    return moves


def search_area_certificate(
    p: Presentation,
    w: Sequence[Letter],
    max_area: int,
    max_states: int = 200_000,
) -> Optional[AreaCertificate]:
    """Breadth-first search for a certificate of ``w = 1`` with area ``<= max_area``.

    States are freely reduced remainders ``u`` with ``w = P_1 ... P_k u``.  A move
    peels a conjugated relator ``P = p rho p^-1`` where ``p`` is a prefix of ``u``
    and ``rho`` a cyclic rotation of a relator or its inverse.  Conjugators longer
    than ``max_area * l + l + |w|`` are never used.
    """
    if max_area < 1:
        raise PreconditionError("max_area must be at least 1")
    w = reduce_word(p.check_word(w))
    if not w:
        return AreaCertificate(w, ())
    ell = p.max_relation_length
    if ell == 0:
        return None
    cap = conjugator_cap(p, w, max_area)
    moves = _relator_moves(p)
    parent: dict[Word, tuple[Optional[Word], Optional[Step]]] = {w: (None, None)}
    frontier = [w]
    for depth in range(max_area):
        remaining = max_area - depth - 1
        nxt: list[Word] = []
        for u in frontier:
            for k in range(len(u) + 1):
                prefix = u[:k]
                for rot, y, idx, sign in moves:
                    z = multiply(prefix, y)
                    if len(z) > cap:
                        continue
                    # u = P u'  with  P = prefix rot prefix^-1
                    u2 = multiply(prefix, inverse(rot), u[k:])
                    if len(u2) > remaining * ell or u2 in parent:
                        continue
                    parent[u2] = (u, Step(z, idx, sign))
                    if not u2:
                        return _rebuild(w, parent)
                    nxt.append(u2)
                    if len(parent) > max_states:
                        return None
        frontier = nxt
        if not frontier:
            break
    return None


def _rebuild(w: Word, parent) -> AreaCertificate:
    steps = []
    u: Word = ()
    while True:
        prev, step = parent[u]
        if prev is None:
            break
        steps.append(step)
        u = prev
    return AreaCertificate(w, tuple(reversed(steps)))


def reduced_words(generators: Sequence[str], n: int) -> Iterator[Word]:
    """All freely reduced words of length ``<= n`` in shortlex order."""
    letters = []
    for g in generators:
        letters.append((g, 1))
        letters.append((g, -1))
    layer: list[Word] = [()]
    yield ()
    for _ in range(n):
        nxt = []
        for w in layer:
            for a in letters:
                if w and w[-1][0] == a[0] and w[-1][1] == -a[1]:
                    continue
                nxt.append(w + (a,))
        for w in nxt:
            yield w
        layer = nxt


@dataclass
class DehnTable:
    rows: list[tuple[Word, Optional[int]]]

    @property
    def trivial(self) -> list[tuple[Word, int]]:
        return [(w, a) for w, a in self.rows if a is not None]

    def dehn(self) -> int:
        """Largest area found, a lower bound on the Dehn function at this length."""
        return max((a for _, a in self.trivial), default=0)


def dehn_bounded(p: Presentation, n: int, max_area: int) -> DehnTable:
    """Minimal certificate areas for every reduced word of length ``<= n``.

    Words with no certificate within the search cap report ``None`` (unknown).
    """
    rows = []
    for w in reduced_words(p.generators, n):
        cert = search_area_certificate(p, w, max_area) if w else AreaCertificate((), ())
        rows.append((w, None if cert is None else cert.area))
    return DehnTable(rows)
