from __future__ import annotations

import itertools

import numpy as np
import pytest

from lsgames.wagonwheel import LinearSystemZ2
from lsgames.words import Presentation


def random_system(rng: np.random.Generator, m: int, n: int, weight: int = 3) -> LinearSystemZ2:
    rows = []
    for _ in range(m):
        rows.append(tuple(sorted(rng.choice(n, size=weight, replace=False).tolist())))
    c = tuple(int(x) for x in rng.integers(2, size=m))
    return LinearSystemZ2(n, tuple(rows), c)


def random_presentation(rng: np.random.Generator, ngens: int, nrels: int, maxlen: int,
                        involution: bool = False) -> Presentation:
    gens = [f"g{k}" for k in range(ngens)]
    if involution:
        gens.append("J")
    rels = []
    for _ in range(nrels):
        length = int(rng.integers(1, maxlen + 1))
        w = []
        while len(w) < length:
            letter = (gens[int(rng.integers(len(gens)))], int(rng.choice([1, -1])))
            if w and w[-1] == (letter[0], -letter[1]):
                continue
            w.append(letter)
        rels.append(tuple(w))
    return Presentation(tuple(gens), tuple(rels), "J" if involution else None)


def brute_classical(sys: LinearSystemZ2):
    """Independent oracle: enumerate Bob's bits, let each row pick its best parity assignment."""
    from fractions import Fraction

    best = Fraction(0)
    pairs = sum(len(r) for r in sys.rows)
    for bits in itertools.product((0, 1), repeat=sys.n):
        total = Fraction(0)
        for row, c in zip(sys.rows, sys.c):
            k = len(row)
            top = 0
            for a in itertools.product((0, 1), repeat=k):
                if sum(a) % 2 != c:
                    continue
                top = max(top, sum(a[t] == bits[row[t]] for t in range(k)))
            total += Fraction(top, pairs)
        best = max(best, total)
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_certificate(p: Presentation, steps: int, zlen: int, rng: np.random.Generator):
    """A random product of conjugated relators; its target is that product, unreduced."""
    from lsgames.words import AreaCertificate, Step, conjugate, reduce_word

    gens = p.generators
    out, target = [], []
    for _ in range(steps):
        z = reduce_word((gens[int(rng.integers(len(gens)))], int(rng.choice([1, -1])))
                        for _ in range(int(rng.integers(zlen + 1))))
        idx = int(rng.integers(len(p.relations)))
        sign = int(rng.choice([1, -1]))
        out.append(Step(z, idx, sign))
        target.extend(conjugate(z, p.relations[idx], sign))
    return AreaCertificate(reduce_word(target), tuple(out))
