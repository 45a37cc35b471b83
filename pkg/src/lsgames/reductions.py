"""Group-level reductions: J-normalisation, the HNN trick and generator doubling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import PreconditionError
from .words import (
    AreaCertificate,
    Letter,
    Presentation,
    Step,
    Word,
    commutator,
    gen,
    inverse,
    multiply,
    reduce_word,
    verify_area_certificate,
)


def fresh_name(base: str, taken) -> str:
    name = base
    while name in taken:
        name += "_1"
    return name


def split_involution(r: Sequence[Letter], j: str) -> tuple[int, Word]:
    """Treat ``j`` as central of order two: return ``(p, residue)`` with ``r = j^p residue``."""
    p = sum(1 for g, _ in r if g == j) % 2
    residue = reduce_word(x for x in r if x[0] != j)
    return p, residue


def normalized_relation(r: Sequence[Letter], j: str) -> Optional[Word]:
    """The relation ``j^p residue``, or ``None`` when it is implied by centrality and ``j^2``."""
    p, residue = split_involution(r, j)
    if not residue and p == 0:
        return None
    return gen(j) * p + residue


def normalize_involution(p: Presentation) -> Presentation:
    """Move every occurrence of the involution to the front of each relation.

    Relations that become trivial (``J^2`` and ``[g, J]`` among them) are dropped.
    A relation reducing to the bare letter ``J`` is kept as is.
    """
    if p.involution is None:
        raise PreconditionError("presentation has no designated involution")
    rels = []
    for r in p.relations:
        nr = normalized_relation(r, p.involution)
        if nr is not None:
            rels.append(nr)
    return Presentation(p.generators, tuple(rels), p.involution)


def is_normalized(p: Presentation) -> bool:
    j = p.involution
    if j is None:
        return False
    for r in p.relations:
        body = r[1:] if r and r[0] == (j, 1) else r
        if any(g == j for g, _ in body) or (not body and not r):
            return False
        if reduce_word(body) != body:
            return False
    return True


@dataclass(frozen=True)
class HnnOutput:
    presentation: Presentation
    embedded_word: Word
    involution: str
    x: str
    t: str
    source: Presentation

    @property
    def main_relator(self) -> int:
        """Index of the relator ``[t,[x,w]] J^-1``."""
        return len(self.presentation.relations) - 1


def hnn_extend(p: Presentation, w: Sequence[Letter]) -> HnnOutput:
    """Adjoin ``x, J, t`` with ``J`` central of order two and ``[t,[x,w]] = J``."""
    w = p.check_word(w)
    taken = set(p.generators)
    x = fresh_name("x", taken)
    taken.add(x)
    j = fresh_name("J", taken)
    taken.add(j)
    t = fresh_name("t", taken)
    J = gen(j)
    rels = list(p.relations)
    rels.append(J + J)
    rels.extend(commutator(gen(g), J) for g in p.generators)
    rels.append(commutator(gen(x), J))
    rels.append(commutator(gen(t), J))
    y = commutator(gen(x), w)
    rels.append(reduce_word(commutator(gen(t), y) + inverse(J)))
    gens = p.generators + (x, j, t)
    return HnnOutput(Presentation(gens, tuple(rels), j), tuple(w), j, x, t, p)


def transport_certificate_hnn(cert: AreaCertificate, hnn: HnnOutput) -> AreaCertificate:
    """Turn a certificate for ``w = 1`` in ``G`` into one for ``J = 1`` in the extension.

    With ``t`` steps the output has ``4t + 1`` steps: one use of the main relator
    and the certificate of ``[t,[x,w]]`` assembled from two copies of the
    certificate of ``[x,w]``, each assembled from two copies of the input.
    """
    src = hnn.source
    check = verify_area_certificate(src, cert)
    if not check.valid or reduce_word(cert.target) != reduce_word(hnn.embedded_word):
        raise PreconditionError("input certificate does not certify the embedded word")
    x, t = gen(hnn.x), gen(hnn.t)

    def bracket(c: AreaCertificate, a: Word) -> AreaCertificate:
        # [a, target] = (a target a^-1) target^-1
        left = c.conjugated(a)
        right = c.inverted()
        return AreaCertificate(
            multiply(commutator(a, c.target)),
            left.steps + right.steps,
        )

    inner = bracket(cert, x)
    outer = bracket(inner, t)
    head = Step((), hnn.main_relator, -1)
    return AreaCertificate(gen(hnn.involution), (head,) + outer.steps)


@dataclass(frozen=True)
class DoubledPresentation:
    presentation: Presentation
    image_map: dict
    core_count: int
    source: Presentation

    @property
    def core_relations(self) -> tuple[Word, ...]:
        """The plus-form images of the source relations (the wagon-wheel input)."""
        return self.presentation.relations[: self.core_count]

    def image(self, w: Sequence[Letter]) -> Word:
        out: list[Letter] = []
        for g, e in w:
            img = self.image_map[g]
            out.extend(img if e == 1 else inverse(img))
        return tuple(out)


def plus_form(w: Sequence[Letter]) -> Word:
    return tuple((g, 1) for g, _ in w)


def double_generators(p: Presentation) -> DoubledPresentation:
    """Replace each generator ``s != J`` by ``u_s v_s u_s v_s`` over involutions.

    A relation that is the bare letter ``J`` is padded to ``J u u v v`` using the
    first doubled generator, which leaves its value unchanged once ``u`` and ``v``
    are involutions.
    """
    if not is_normalized(p):
        raise PreconditionError("presentation must be J-normalised first")
    j = p.involution
    base = [g for g in p.generators if g != j]
    needs_pad = any(r == gen(j) for r in p.relations)
    if needs_pad and not base:
        base.append(fresh_name("e", set(p.generators)))
    taken = {j}
    image_map: dict = {j: gen(j)}
    doubled: list[str] = []
    for s in base:
        u = fresh_name("u_" + s, taken)
        taken.add(u)
        v = fresh_name("v_" + s, taken)
        taken.add(v)
        doubled += [u, v]
        image_map[s] = ((u, 1), (v, 1), (u, 1), (v, 1))
    core = []
    for r in p.relations:
        if r == gen(j):
            u, v = doubled[0], doubled[1]
            core.append(gen(j) + ((u, 1), (u, 1), (v, 1), (v, 1)))
            continue
        lead = r[:1] if r[0][0] == j else ()
        body = r[len(lead):]
        img = []
        for g, e in body:
            img.extend(image_map[g] if e == 1 else inverse(image_map[g]))
        core.append(tuple(lead) + plus_form(img))
    squares = [gen(s) + gen(s) for s in doubled] + [gen(j) + gen(j)]
    pres = Presentation(tuple(doubled) + (j,), tuple(core) + tuple(squares), j)
    return DoubledPresentation(pres, image_map, len(core), p)
