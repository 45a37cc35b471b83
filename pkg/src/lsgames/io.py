"""Text and JSON file formats.

Presentations::

    # comment
    gens a b J
    inv J
    rel a a
    rel a b a' b'

Certificates (``r_index`` is 0-based into the relation list)::

    target J
    step a b|3|-1

Linear systems: a header ``m n`` then one row per line ``j1 j2 j3 | c``
(1-based columns).  Column names live in a sidecar with lines ``index name``.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import MalformedInput
from .games import LinearSystemGame, ObservableStrategy, OperatorStrategy, CorrelationMatrix
from .repsearch import SignedRep
from .sdp import MomentProgram
from .wagonwheel import LinearSystemZ2
from .words import AreaCertificate, Presentation, Step, format_word, parse_word

SCHEMA = 1


def _lines(text: str) -> Iterable[tuple[int, str]]:
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield num, line


# Presentations ------------------------------------------------------------


def parse_presentation(text: str) -> Presentation:
    gens: Optional[list[str]] = None
    inv = None
    rels = []
    for num, line in _lines(text):
        head, _, rest = line.partition(" ")
        if head == "gens":
            if gens is not None:
                raise MalformedInput(f"line {num}: second 'gens' line")
            gens = rest.split()
        elif head == "inv":
            inv = rest.strip() or None
        elif head == "rel":
            if gens is None:
                raise MalformedInput(f"line {num}: 'rel' before 'gens'")
            rels.append(parse_word(rest, gens))
        else:
            raise MalformedInput(f"line {num}: unknown directive {head!r}")
    if gens is None:
        raise MalformedInput("missing 'gens' line")
    return Presentation(tuple(gens), tuple(rels), inv)


def format_presentation(p: Presentation) -> str:
    out = ["gens " + " ".join(p.generators)]
    if p.involution:
        out.append("inv " + p.involution)
    out.extend(("rel " + format_word(r)).rstrip() if r else "rel 1" for r in p.relations)
    return "\n".join(out) + "\n"


# Certificates -------------------------------------------------------------


def parse_certificate(text: str, generators: Optional[Sequence[str]] = None) -> AreaCertificate:
    target = None
    steps = []
    for num, line in _lines(text):
        head, _, rest = line.partition(" ")
        if head == "target":
            target = parse_word(rest, generators)
        elif head == "step":
            parts = rest.split("|")
            if len(parts) != 3:
                raise MalformedInput(f"line {num}: expected 'step z|r_index|sign'")
            try:
                idx, sign = int(parts[1]), int(parts[2])
            except ValueError:
                raise MalformedInput(f"line {num}: bad relator index or sign") from None
            if sign not in (1, -1):
                raise MalformedInput(f"line {num}: sign must be 1 or -1")
            steps.append(Step(parse_word(parts[0], generators), idx, sign))
        else:
            raise MalformedInput(f"line {num}: unknown directive {head!r}")
    if target is None:
        raise MalformedInput("missing 'target' line")
    return AreaCertificate(target, tuple(steps))


def format_certificate(cert: AreaCertificate) -> str:
    out = ["target " + (format_word(cert.target) or "1")]
    for z, idx, sign in cert.steps:
        out.append(f"step {format_word(z)}|{idx}|{sign}")
    return "\n".join(out) + "\n"


# Linear systems -----------------------------------------------------------


def parse_system(text: str, names_text: Optional[str] = None) -> LinearSystemZ2:
    lines = list(_lines(text))
    if not lines:
        raise MalformedInput("empty system file")
    try:
        m, n = (int(x) for x in lines[0][1].split())
    except ValueError:
        raise MalformedInput("header must be 'm n'") from None
    if len(lines) - 1 != m:
        raise MalformedInput(f"header says {m} rows, found {len(lines) - 1}")
    rows, rhs = [], []
    for num, line in lines[1:]:
        left, sep, right = line.partition("|")
        if not sep:
            raise MalformedInput(f"line {num}: missing '|'")
        try:
            cols = [int(x) - 1 for x in left.split()]
            c = int(right)
        except ValueError:
            raise MalformedInput(f"line {num}: non-integer entry") from None
        if c not in (0, 1):
            raise MalformedInput(f"line {num}: right-hand side must be 0 or 1")
        if any(not 0 <= j < n for j in cols):
            raise MalformedInput(f"line {num}: column out of range")
        rows.append(tuple(cols))
        rhs.append(c)
    names = parse_names(names_text, n) if names_text else None
    return LinearSystemZ2(n, tuple(rows), tuple(rhs), names)


def parse_names(text: str, n: int) -> tuple[str, ...]:
    names = [None] * n
    for num, line in _lines(text):
        idx, _, name = line.partition(" ")
        try:
            k = int(idx) - 1
        except ValueError:
            raise MalformedInput(f"names line {num}: bad index") from None
        if not 0 <= k < n or not name.strip():
            raise MalformedInput(f"names line {num}: bad entry")
        names[k] = name.strip()
    return tuple(x if x is not None else f"x{j + 1}" for j, x in enumerate(names))


def format_system(sys: LinearSystemZ2) -> str:
    out = [f"{sys.m} {sys.n}"]
    for row, c in zip(sys.rows, sys.c):
        out.append(" ".join(str(j + 1) for j in row) + f" | {c}")
    return "\n".join(out) + "\n"


def format_names(sys: LinearSystemZ2) -> str:
    return "".join(f"{j + 1} {sys.column_name(j)}\n" for j in range(sys.n))


def read_system(path: Path) -> LinearSystemZ2:
    path = Path(path)
    sidecar = path.with_suffix(".names")
    names = sidecar.read_text(encoding="utf-8") if sidecar.exists() else None
    return parse_system(path.read_text(encoding="utf-8"), names)


def write_system(sys: LinearSystemZ2, path: Path) -> list[Path]:
    path = Path(path)
    path.write_text(format_system(sys), encoding="utf-8")
    sidecar = path.with_suffix(".names")
    sidecar.write_text(format_names(sys), encoding="utf-8")
    return [path, sidecar]


# JSON ---------------------------------------------------------------------


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _frac(x) -> str:
    return str(Fraction(x))


def bits(a: Sequence[int]) -> str:
    return "".join(str(b) for b in a)


def game_json(g: LinearSystemGame) -> dict:
    sys = g.system
    return {
        "schema": SCHEMA,
        "kind": "linear-system-game",
        "m": sys.m,
        "n": sys.n,
        "rows": [[j + 1 for j in r] for r in sys.rows],
        "c": list(sys.c),
        "inputs_A": sys.m,
        "inputs_B": sys.n,
        "outputs_A": [[bits(a) for a in g.outputs_A(i)] for i in range(sys.m)],
        "outputs_B": ["0", "1"],
        "pi": [[i + 1, j + 1, _frac(w)] for (i, j), w in g.pi.items()],
        "orphans": [j + 1 for j in g.orphans],
    }


def game_from_json(data: dict) -> LinearSystemGame:
    try:
        rows = tuple(tuple(j - 1 for j in r) for r in data["rows"])
        return LinearSystemGame(LinearSystemZ2(int(data["n"]), rows, tuple(data["c"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"bad game JSON: {exc}") from None


def correlation_json(corr: CorrelationMatrix, pairs: Iterable[tuple[int, int]]) -> dict:
    g = corr.game
    blocks = []
    for i, j in pairs:
        blk = corr.block(i, j)
        entries = [[_num(e) for e in row] for row in blk]
        blocks.append({"x": i + 1, "y": j + 1, "p": entries})
    return {
        "schema": SCHEMA,
        "kind": "correlation",
        "exact": corr.exact,
        "outputs_A": [[bits(a) for a in g.outputs_A(i)] for i in range(g.m)],
        "blocks": blocks,
    }


def _num(e):
    if isinstance(e, Fraction):
        return str(e)
    e = complex(e)
    return [repr(e.real), repr(e.imag)]


def matrix_json(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[repr(float(z.real)), repr(float(z.imag))] for z in row] for row in m]


def matrix_from_json(data) -> np.ndarray:
    try:
        return np.array([[complex(float(re), float(im)) for re, im in row] for row in data])
    except (TypeError, ValueError) as exc:
        raise MalformedInput(f"bad matrix: {exc}") from None


def vector_json(v: np.ndarray) -> list:
    return [[repr(float(z.real)), repr(float(z.imag))] for z in np.asarray(v, dtype=complex)]


def vector_from_json(data) -> np.ndarray:
    try:
        return np.array([complex(float(re), float(im)) for re, im in data])
    except (TypeError, ValueError) as exc:
        raise MalformedInput(f"bad vector: {exc}") from None


def strategy_json(s: OperatorStrategy) -> dict:
    return {
        "schema": SCHEMA,
        "kind": "strategy",
        "form": "projective",
        "dim": s.dim,
        "psi": vector_json(s.psi),
        "alice": [[matrix_json(p) for p in projs] for projs in s.alice],
        "bob": [[matrix_json(q) for q in projs] for projs in s.bob],
    }


def observable_strategy_json(o: ObservableStrategy) -> dict:
    return {
        "schema": SCHEMA,
        "kind": "strategy",
        "form": "observable",
        "dim": o.dim,
        "psi": vector_json(o.psi),
        "A": [[matrix_json(a) for a in ops] for ops in o.A],
        "B": [matrix_json(b) for b in o.B],
    }


def strategy_from_json(data: dict, sys: LinearSystemZ2) -> OperatorStrategy:
    from .games import measurements_from_observables

    if data.get("kind") != "strategy":
        raise MalformedInput("not a strategy file")
    psi = vector_from_json(data["psi"])
    if data.get("form", "projective") == "observable":
        o = ObservableStrategy(
            tuple(tuple(matrix_from_json(a) for a in ops) for ops in data["A"]),
            tuple(matrix_from_json(b) for b in data["B"]),
            psi,
        )
        return measurements_from_observables(o, sys)
    alice = tuple(tuple(matrix_from_json(p) for p in projs) for projs in data["alice"])
    bob = []
    for projs in data["bob"]:
        if len(projs) != 2:
            raise MalformedInput("Bob measurements need exactly two outcomes")
        bob.append((matrix_from_json(projs[0]), matrix_from_json(projs[1])))
    return OperatorStrategy(alice, tuple(bob), psi)


def rep_json(rep: SignedRep) -> dict:
    return {
        "schema": SCHEMA,
        "kind": "representation",
        "dim": rep.dim,
        "involution": rep.involution,
        "j_sign": rep.j_sign,
        "images": {g: matrix_json(m) for g, m in rep.images.items()},
    }


def rep_from_json(data: dict) -> SignedRep:
    if data.get("kind") != "representation":
        raise MalformedInput("not a representation file")
    images = {g: matrix_from_json(m).real for g, m in data["images"].items()}
    return SignedRep(int(data["dim"]), images, data.get("involution"), int(data.get("j_sign", 0)))


def write_sdp_dump(mp: MomentProgram, directory: Path) -> list[Path]:
    """``program.triplets`` holds ``k p q value`` lines (``k = 0`` is the constant
    matrix); ``objective.txt`` the constant term followed by one coefficient per variable."""
    directory = Path(directory)
    trip = directory / "program.triplets"
    with trip.open("w", encoding="utf-8") as fh:
        fh.write(f"{mp.size} {mp.num_vars}\n")
        for k, p, q, v in mp.triplets():
            fh.write(f"{k} {p} {q} {v:+.1f}\n")
    obj = directory / "objective.txt"
    obj.write_text(
        repr(float(mp.offset)) + "\n" + "".join(repr(float(c)) + "\n" for c in mp.objective),
        encoding="utf-8",
    )
    return [trip, obj]
