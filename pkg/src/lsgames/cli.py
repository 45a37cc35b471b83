"""Command-line driver.  Every subcommand prints one JSON report on stdout.

With ``--out DIR`` the report is also written to ``DIR/report.json`` together
with any produced files and figures.  Exit codes: 0 success, 2 malformed
input, 3 precondition violation, 4 resource cap, 5 analysis failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys as _sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional


from . import io, plotting
from .analysis import approx_strategy_report, pooled_frequencies
from .errors import AnalysisFailure, LsgError, MalformedInput, PreconditionError
from .games import (
    bias,
    build_game,
    classical_value,
    best_classical_assignment,
    evaluate_strategy,
    magic_square_strategy,
    observables_from_measurements,
    pzk_correlation,
    run_protocol,
    sample_transcripts,
    strategy_delta,
)
from .reductions import double_generators, hnn_extend, normalize_involution, transport_certificate_hnn
from .repsearch import cycle_separation, find_signed_rep, solve_z2, verify_rep
from .sdp import build_moment_program, npa_upper_bound
from .wagonwheel import (
    assemble_system,
    magic_square_system,
    solution_group,
    transport_certificate_wagonwheel,
)
from .words import Presentation, format_word, parse_word, search_area_certificate, verify_area_certificate

SCHEMA = io.SCHEMA


class Context:
    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out: Optional[Path] = Path(args.out) if getattr(args, "out", None) else None
        self.files: list[str] = []
        self.timing: dict = {}
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Optional[Path]:
        if self.out is None:
            return None
        self.files.append(name)
        return self.out / name

    def write_text(self, name: str, text: str) -> None:
        p = self.path(name)
        if p is not None:
            p.write_text(text, encoding="utf-8")

    def timed(self, label: str, fn: Callable, *a, **kw):
        t0 = time.perf_counter()
        try:
            return fn(*a, **kw)
        finally:
            self.timing[label] = round(time.perf_counter() - t0, 4)


# Input helpers -------------------------------------------------------------


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedInput(f"cannot read {path}: {exc.strerror}") from None


def load_presentation(path: str) -> Presentation:
    return io.parse_presentation(_read(path))


def load_system(spec: str):
    if spec == "magic-square":
        return magic_square_system()
    p = Path(spec)
    if p.suffix == ".json":
        try:
            return io.game_from_json(json.loads(_read(spec))).system
        except json.JSONDecodeError as exc:
            raise MalformedInput(f"{spec}: {exc}") from None
    sidecar = p.with_suffix(".names")
    names = _read(str(sidecar)) if sidecar.exists() else None
    return io.parse_system(_read(spec), names)


def load_strategy(spec: str, sys):
    if spec == "pauli":
        if sys.rows != magic_square_system().rows or sys.c != magic_square_system().c:
            raise PreconditionError("the built-in Pauli strategy is for the magic square")
        return magic_square_strategy()
    try:
        data = json.loads(_read(spec))
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{spec}: {exc}") from None
    return io.strategy_from_json(data, sys)


def _word(text: Optional[str], p: Presentation):
    return parse_word(text or "", p.generators)


def _fr(x) -> str:
    return str(Fraction(x))


def _f(x: float, places: int = 12) -> float:
    return round(float(x), places)


# Subcommands ---------------------------------------------------------------


def cmd_hnn(ctx: Context) -> dict:
    p = load_presentation(ctx.args.presentation)
    h = hnn_extend(p, _word(ctx.args.word, p))
    ctx.write_text("hnn.pres", io.format_presentation(h.presentation))
    return {
        "word": format_word(h.embedded_word),
        "generators": list(h.presentation.generators),
        "relations": len(h.presentation.relations),
        "involution": h.involution,
        "main_relator": h.main_relator,
        "presentation": io.format_presentation(h.presentation),
    }


def _doubled(p: Presentation):
    return double_generators(normalize_involution(p))


def cmd_double(ctx: Context) -> dict:
    p = load_presentation(ctx.args.presentation)
    dp = _doubled(p)
    ctx.write_text("doubled.pres", io.format_presentation(dp.presentation))
    return {
        "source_size": p.size,
        "size": dp.presentation.size,
        "size_bound_6N": dp.presentation.size <= 6 * p.size,
        "core_count": dp.core_count,
        "presentation": io.format_presentation(dp.presentation),
    }


def _system_summary(s) -> dict:
    return {
        "m": s.m,
        "n": s.n,
        "max_row_weight": s.max_row_weight,
        "nonzeros": s.nonzeros,
        "rhs_ones": sum(s.c),
    }


def _write_system(ctx: Context, s, name: str = "system.txt") -> None:
    if ctx.out is not None:
        io.write_system(s, ctx.out / name)
        ctx.files.extend([name, str(Path(name).with_suffix(".names"))])


def cmd_compile(ctx: Context) -> dict:
    p = load_presentation(ctx.args.presentation)
    compiled = assemble_system(_doubled(p))
    _write_system(ctx, compiled.system)
    return {"system": _system_summary(compiled.system), "relations_compiled": len(compiled.layouts)}


def cmd_solution_group(ctx: Context) -> dict:
    s = load_system(ctx.args.system)
    gamma = solution_group(s)
    ctx.write_text("gamma.pres", io.format_presentation(gamma.presentation))
    return {
        "generators": len(gamma.presentation.generators),
        "relations": len(gamma.presentation.relations),
        "longest_relation": gamma.presentation.max_relation_length,
        "presentation": io.format_presentation(gamma.presentation),
    }


def cmd_game(ctx: Context) -> dict:
    s = load_system(ctx.args.system)
    g = build_game(s)
    data = io.game_json(g)
    ctx.write_text("game.json", io.dumps(data))
    return {"game": data}


def cmd_classical(ctx: Context) -> dict:
    g = build_game(load_system(ctx.args.system))
    value, bits = best_classical_assignment(g)
    return {"classical_value": _fr(value), "classical_value_float": float(value), "assignment": io.bits(bits)}


def _strategy_args(ctx: Context):
    s = load_system(ctx.args.system)
    g = build_game(s)
    strat = load_strategy(ctx.args.strategy, s)
    strat.validate(g)
    return s, g, strat


def cmd_eval(ctx: Context) -> dict:
    s, g, strat = _strategy_args(ctx)
    return {"value": _f(evaluate_strategy(g, strat)), "dim": strat.dim}


def cmd_bias(ctx: Context) -> dict:
    s, g, strat = _strategy_args(ctx)
    b = bias(g, observables_from_measurements(strat, s))
    w = evaluate_strategy(g, strat)
    return {
        "bias": [_f(b.real), _f(b.imag)],
        "value": _f(w),
        "value_from_bias": _f(abs(b + 1) / 2),
        "identity_error": float(f"{abs(abs(b + 1) / 2 - w):.3e}"),
    }


def cmd_delta(ctx: Context) -> dict:
    s, g, strat = _strategy_args(ctx)
    d = strategy_delta(strat, s)
    rep = approx_strategy_report(s, strat)
    return {
        "delta": float(f"{d.delta:.6e}"),
        "observable_commutator": float(f"{d.observable_commutator:.6e}"),
        "observable_bound_holds": d.bound_holds,
        "eps": _f(rep.eps),
        "inequalities": [
            {"name": c.name, "lhs": _f(c.worst_lhs), "bound": _f(c.bound), "holds": c.holds}
            for c in rep.checks
        ],
    }


def cmd_pzk_corr(ctx: Context) -> dict:
    s = load_system(ctx.args.system)
    g = build_game(s)
    corr = pzk_correlation(s)
    pairs = g.question_pairs
    norms = {_fr(corr.block_sum(i, j)) for i, j in pairs}
    data = io.correlation_json(corr, pairs)
    ctx.write_text("correlation.json", io.dumps(data))
    return {"value": _fr(corr.value()), "block_sums": sorted(norms), "correlation": data}


def _digest(ts) -> str:
    h = hashlib.sha256()
    for t in ts:
        h.update(f"{t.x} {t.y} {io.bits(t.a)} {t.b}\n".encode())
    return h.hexdigest()


def _frequency_table(g, corr, ts):
    cells = pooled_frequencies(g, corr, ts)
    return cells, max((c.z for c in cells), default=0.0)


def cmd_pzk_sample(ctx: Context) -> dict:
    a = ctx.args
    s = load_system(a.system)
    g = build_game(s)
    corr = pzk_correlation(s)
    ts = ctx.timed("sample", sample_transcripts, g, corr, a.rounds, a.seed, a.questions, a.workers)
    cells, worst = _frequency_table(g, corr, ts)
    report = {
        "rounds": a.rounds,
        "seed": a.seed,
        "questions": a.questions,
        "digest": _digest(ts),
        "accepted": sum(g.predicate(t.a, t.b, t.x, t.y) for t in ts),
        "cells": len(cells),
        "max_z": _f(worst, 6),
        "within_3_sigma": worst <= 3.0,
    }
    if ctx.out is not None:
        with ctx.path("transcripts.txt").open("w", encoding="utf-8") as fh:
            for t in ts:
                fh.write(f"{t.x + 1} {t.y + 1} {io.bits(t.a)} {t.b}\n")
        plotting.sampler_frequencies(
            [f"c{c}/{'out' if k < 0 else k + 1}:{io.bits(x)}{b}" for c, k, x, b in (cl.key for cl in cells)],
            [cl.observed for cl in cells], [cl.expected for cl in cells], [cl.sigma for cl in cells],
            ctx.path("sampler_frequencies.png"),
        )
    return report


def cmd_protocol(ctx: Context) -> dict:
    a = ctx.args
    s = load_system(a.system)
    g = build_game(s)
    prover = load_strategy(a.strategy, s).validate(g) if a.strategy else pzk_correlation(s)
    res = ctx.timed("protocol", run_protocol, g, prover, a.rounds, a.seed, a.workers)
    exp = res.expected
    return {
        "prover": a.strategy or "pzk",
        "rounds": res.rounds,
        "accepted": res.accepted,
        "rate": _f(res.rate),
        "expected": _fr(exp) if isinstance(exp, Fraction) else _f(exp),
    }


def cmd_zsolve(ctx: Context) -> dict:
    s = load_system(ctx.args.system)
    sol = solve_z2(s)
    out = {"consistent": sol.consistent, "rank": sol.rank, "nullity": len(sol.nullspace)}
    if sol.consistent:
        out["solution"] = io.bits(sol.solution)
    else:
        out["witness_rows"] = [i + 1 for i in sol.witness]
    return out


def _hnn_compile(p: Presentation, word_text: Optional[str]):
    if word_text is not None:
        h = hnn_extend(p, _word(word_text, p))
        return h, assemble_system(_doubled(h.presentation))
    return None, assemble_system(_doubled(p))


def cmd_cycles(ctx: Context) -> dict:
    p = load_presentation(ctx.args.presentation)
    _, compiled = _hnn_compile(p, ctx.args.word)
    rep = cycle_separation(compiled)
    data = {
        "ok": rep.ok,
        "cycles": [{"label": c.label, "columns": [j + 1 for j in c.columns]} for c in rep.cycles],
        "extra": [[j + 1 for j in e] for e in rep.extra],
        "unresolved": [list(u) if isinstance(u, tuple) else u for u in rep.unresolved],
        "replayed": rep.replayed,
    }
    if not rep.ok:
        raise AnalysisFailure("generator separation incomplete", data)
    return data


def cmd_rep_search(ctx: Context) -> dict:
    a = ctx.args
    if a.system:
        p = solution_group(load_system(a.system)).presentation
    else:
        p = load_presentation(a.presentation)
    res = ctx.timed("search", find_signed_rep, p, a.dim_cap, p.involution is not None)
    out = {"search": res.status, "nodes": res.nodes, "dims_tried": list(res.dims_tried), "exhausted": res.exhausted}
    if res.rep is not None:
        out["dim"] = res.rep.dim
        out["max_relation_error"] = float(f"{verify_rep(p, res.rep):.3e}")
        data = io.rep_json(res.rep)
        ctx.write_text("rep.json", io.dumps(data))
        out["representation"] = data
    return out


def cmd_npa(ctx: Context) -> dict:
    a = ctx.args
    g = build_game(load_system(a.system))
    if a.dump and ctx.out is not None:
        mp = build_moment_program(g, a.level)
        io.write_sdp_dump(mp, ctx.out)
        ctx.files.extend(["program.triplets", "objective.txt"])
    levels = list(range(1, a.level + 1))
    results = [ctx.timed(f"level{n}", npa_upper_bound, g, n) for n in levels]
    cv = classical_value(g) if g.n <= 24 else None
    out = {"level": a.level, "results": [r.as_dict() for r in results], "value": round(results[-1].value, 9)}
    if cv is not None:
        out["classical_value"] = _fr(cv)
        out["above_classical"] = results[-1].value >= float(cv) - 1e-6
    if ctx.out is not None:
        lower = {"classical": float(cv)} if cv is not None else {}
        plotting.npa_bounds(levels, [r.value for r in results], lower, ctx.path("npa_bounds.png"))
    return out


def cmd_verify_cert(ctx: Context) -> dict:
    p = load_presentation(ctx.args.presentation)
    cert = io.parse_certificate(_read(ctx.args.certificate), p.generators)
    chk = verify_area_certificate(p, cert)
    out = {"valid": chk.valid, "area": chk.area, "target": format_word(cert.target)}
    if not chk.valid:
        raise AnalysisFailure("certificate does not verify", out)
    return out


def _source_certificate(ctx: Context, p: Presentation, w):
    a = ctx.args
    if getattr(a, "certificate", None):
        cert = io.parse_certificate(_read(a.certificate), p.generators)
        if cert.target != w:
            from .words import reduce_word

            if reduce_word(cert.target) != reduce_word(w):
                raise PreconditionError("certificate target differs from the word")
        return cert
    if getattr(a, "max_area", None):
        cert = ctx.timed("area_search", search_area_certificate, p, w, a.max_area)
        if cert is None:
            raise AnalysisFailure(f"no certificate of area <= {a.max_area} found")
        return cert
    return None


def _transport(ctx: Context, p: Presentation, w, h, compiled, gamma, cert) -> dict:
    chk = verify_area_certificate(p, cert)
    if not chk.valid:
        raise PreconditionError("input certificate is not valid")
    hc = transport_certificate_hnn(cert, h)
    hchk = verify_area_certificate(h.presentation, hc)
    tr = transport_certificate_wagonwheel(hc, h.presentation, compiled, gamma)
    gchk = verify_area_certificate(gamma.presentation, tr.certificate)
    ctx.write_text("source.cert", io.format_certificate(cert))
    ctx.write_text("hnn.cert", io.format_certificate(hc))
    ctx.write_text("gamma.cert", io.format_certificate(tr.certificate))
    data = {
        "source_area": cert.area,
        "hnn_area": hc.area,
        "hnn_bound": 4 * cert.area + 1,
        "hnn_valid": hchk.valid,
        "gamma_area": tr.area,
        "gamma_bound": tr.bound,
        "gamma_valid": gchk.valid,
        "gamma_target": format_word(tr.certificate.target),
    }
    if ctx.out is not None:
        plotting.area_blowup(
            ["source", "hnn", "gamma"], [max(cert.area, 1), hc.area, tr.area],
            [max(cert.area, 1), 4 * cert.area + 1, tr.bound], ctx.path("area_blowup.png"),
        )
    if not (hchk.valid and gchk.valid and hc.area <= 4 * cert.area + 1 and tr.area <= tr.bound):
        raise AnalysisFailure("transported certificate failed its checks", data)
    return data


def cmd_transport_cert(ctx: Context) -> dict:
    p = load_presentation(ctx.args.presentation)
    w = _word(ctx.args.word, p)
    cert = _source_certificate(ctx, p, w)
    if cert is None:
        raise MalformedInput("supply --certificate or --max-area")
    h, compiled = _hnn_compile(p, ctx.args.word or "")
    gamma = solution_group(compiled.system)
    return _transport(ctx, p, w, h, compiled, gamma, cert)


def _stage(name: str, fn: Callable, *a):
    try:
        return fn(*a)
    except LsgError as exc:
        exc.stage = name
        raise


def cmd_pipeline(ctx: Context) -> dict:
    a = ctx.args
    p = _stage("parse", load_presentation, a.presentation)
    w = _stage("parse", _word, a.word, p)
    h = _stage("hnn", hnn_extend, p, w)
    norm = _stage("normalize", normalize_involution, h.presentation)
    dp = _stage("double", double_generators, norm)
    compiled = _stage("compile", assemble_system, dp)
    s = compiled.system
    g = _stage("game", build_game, s)
    gamma = _stage("solution-group", solution_group, s)
    stages = [
        {"stage": "input", "generators": len(p.generators), "relations": len(p.relations), "size": p.size},
        {"stage": "hnn", "generators": len(h.presentation.generators),
         "relations": len(h.presentation.relations), "size": h.presentation.size},
        {"stage": "normalized", "generators": len(norm.generators), "relations": len(norm.relations),
         "size": norm.size},
        {"stage": "doubled", "generators": len(dp.presentation.generators),
         "relations": len(dp.presentation.relations), "size": dp.presentation.size},
        {"stage": "system", "generators": s.n, "relations": s.m, "m": s.m, "n": s.n},
        {"stage": "gamma", "generators": len(gamma.presentation.generators),
         "relations": len(gamma.presentation.relations), "size": gamma.presentation.size},
    ]
    alice_sizes = sorted({len(g.outputs_A(i)) for i in range(g.m)})
    checks = {
        "size_bound_6N": dp.presentation.size <= 6 * norm.size,
        "row_weight_3": all(len(r) == 3 for r in s.rows),
        "equations_3n": all(len(lay.equations()) == 3 * lay.length for lay in compiled.layouts),
        "alice_outputs_le_8": max(alice_sizes) <= 8,
        "bob_outputs": 2,
        "longest_gamma_relation": gamma.presentation.max_relation_length,
    }
    report = {
        "word": format_word(w),
        "stages": stages,
        "checks": checks,
        "alice_output_sizes": alice_sizes,
        "flags": ["value < 1 expected"] if not w else [],
    }
    ctx.write_text("hnn.pres", io.format_presentation(h.presentation))
    ctx.write_text("doubled.pres", io.format_presentation(dp.presentation))
    ctx.write_text("gamma.pres", io.format_presentation(gamma.presentation))
    ctx.write_text("game.json", io.dumps(io.game_json(g)))
    _write_system(ctx, s)
    cert = _stage("certificate", _source_certificate, ctx, p, w)
    if cert is not None:
        report["transport"] = _stage("transport", _transport, ctx, p, w, h, compiled, gamma, cert)
    if ctx.out is not None:
        plotting.stage_sizes(stages, ctx.path("stage_sizes.png"))
    if not all(v for k, v in checks.items() if isinstance(v, bool)):
        raise AnalysisFailure("pipeline invariants failed", report)
    return report


def cmd_analyze(ctx: Context) -> dict:
    a = ctx.args
    s = load_system(a.system)
    g = build_game(s)
    tools: dict = {}
    errors: dict = {}

    def run(name, fn):
        try:
            tools[name] = fn()
        except LsgError as exc:
            errors[name] = _error_payload(exc)

    def classical():
        v, bits = best_classical_assignment(g)
        return {"value": _fr(v), "assignment": io.bits(bits)}

    def npa():
        r = npa_upper_bound(g, a.level)
        return r.as_dict()

    def strategy():
        strat = load_strategy(a.strategy, s).validate(g)
        d = strategy_delta(strat, s)
        return {"value": _f(evaluate_strategy(g, strat)), "delta": float(f"{d.delta:.6e}"), "dim": strat.dim}

    def sample():
        corr = pzk_correlation(s)
        ts = sample_transcripts(g, corr, a.rounds, a.seed, a.questions, a.workers)
        _, worst = _frequency_table(g, corr, ts)
        return {"rounds": a.rounds, "seed": a.seed, "digest": _digest(ts), "max_z": _f(worst, 6)}

    def reps():
        res = find_signed_rep(solution_group(s).presentation, a.dim_cap)
        return {"status": res.status, "nodes": res.nodes, "dim": res.rep.dim if res.rep else None}

    run("classical", classical)
    if not a.no_npa:
        run("npa", npa)
    if a.strategy:
        run("strategy", strategy)
    if a.sample:
        run("pzk_sample", sample)
    if a.rep_search:
        run("rep_search", reps)
    if "npa" in tools and "classical" in tools:
        bound = tools["npa"]["value"]
        lower = [float(Fraction(tools["classical"]["value"]))]
        if "strategy" in tools:
            lower.append(tools["strategy"]["value"])
        tools["npa"]["upper_bounds_lower"] = bound >= max(lower) - 1e-6
        if not tools["npa"]["upper_bounds_lower"]:
            errors["npa_check"] = {"type": "AnalysisFailure", "message": "bound below an exhibited value"}
    report = {"system": _system_summary(s), "tools": tools}
    if errors:
        report["errors"] = errors
        raise _Collected(report)
    return report


class _Collected(AnalysisFailure):
    def __init__(self, report: dict):
        super().__init__("one or more analyses failed")
        self.report = report


# Driver --------------------------------------------------------------------


def _error_payload(exc: BaseException) -> dict:
    out = {"type": type(exc).__name__, "message": str(exc.args[0]) if exc.args else str(exc)}
    stage = getattr(exc, "stage", None)
    if stage:
        out["stage"] = stage
    if len(exc.args) > 1 and isinstance(exc.args[1], dict):
        out["details"] = exc.args[1]
    return out


COMMANDS = {
    "compile": cmd_compile,
    "hnn": cmd_hnn,
    "double": cmd_double,
    "solution-group": cmd_solution_group,
    "game": cmd_game,
    "classical": cmd_classical,
    "eval": cmd_eval,
    "bias": cmd_bias,
    "delta": cmd_delta,
    "pzk-corr": cmd_pzk_corr,
    "pzk-sample": cmd_pzk_sample,
    "protocol": cmd_protocol,
    "zsolve": cmd_zsolve,
    "cycles": cmd_cycles,
    "rep-search": cmd_rep_search,
    "npa": cmd_npa,
    "verify-cert": cmd_verify_cert,
    "transport-cert": cmd_transport_cert,
    "pipeline": cmd_pipeline,
    "analyze": cmd_analyze,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="directory for report.json and produced files")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--timing", action="store_true", help="include wall-clock timings (not reproducible)")

    ap = argparse.ArgumentParser(prog="lsg", description="Linear-system game toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    def pres(sp, word=False, optional_word=False):
        sp.add_argument("presentation")
        if word:
            sp.add_argument("--word", default=None if optional_word else "", help="word w (e.g. \"a b'\")")

    def system(sp):
        sp.add_argument("system", help="system file, game JSON, or 'magic-square'")

    def strategy(sp, required=True):
        sp.add_argument("--strategy", required=required, help="strategy JSON or 'pauli'")

    sp = add("compile", "normalise, double and compile a presentation to a weight-3 system")
    pres(sp)
    pres(add("hnn", "HNN extension for a word"), word=True)
    pres(add("double", "normalise the involution and double the generators"))
    system(add("solution-group", "solution group presentation of a system"))
    system(add("game", "linear-system game JSON"))
    system(add("classical", "exact classical value"))
    for name, help_ in (("eval", "winning value of a strategy"),
                        ("bias", "bias and the value identity check"),
                        ("delta", "largest Alice/Bob commutator norm")):
        sp = add(name, help_)
        system(sp)
        strategy(sp)
    system(add("pzk-corr", "exact honest-prover correlation"))
    for name in ("pzk-sample", "protocol"):
        sp = add(name, "sample transcripts" if name == "pzk-sample" else "simulate the referee")
        system(sp)
        sp.add_argument("--rounds", type=int, default=10000)
        if name == "pzk-sample":
            sp.add_argument("--questions", choices=("game", "all"), default="game")
        else:
            strategy(sp, required=False)
    system(add("zsolve", "GF(2) solve with inconsistency witness"))
    sp = add("cycles", "generator separation on a compiled system")
    pres(sp, word=True, optional_word=True)
    sp = add("rep-search", "search for a signed-permutation-like representation")
    sp.add_argument("presentation", nargs="?")
    sp.add_argument("--system", help="search the solution group of this system instead")
    sp.add_argument("--dim-cap", type=int, default=8)
    sp = add("npa", "moment-matrix upper bound")
    system(sp)
    sp.add_argument("--level", type=int, default=1, choices=(1, 2))
    sp.add_argument("--dump", action="store_true", help="write the level's program to --out")
    sp = add("verify-cert", "check an area certificate")
    pres(sp)
    sp.add_argument("certificate")
    sp = add("transport-cert", "carry a certificate for w through HNN and compilation")
    pres(sp, word=True)
    sp.add_argument("--certificate")
    sp.add_argument("--max-area", type=int)
    sp = add("pipeline", "presentation and word to game and solution group")
    pres(sp, word=True)
    sp.add_argument("--certificate")
    sp.add_argument("--max-area", type=int)
    sp = add("analyze", "aggregate analyses for one system")
    system(sp)
    strategy(sp, required=False)
    sp.add_argument("--level", type=int, default=1, choices=(1, 2))
    sp.add_argument("--no-npa", action="store_true")
    sp.add_argument("--sample", action="store_true", help="run the honest-prover sampler")
    sp.add_argument("--rounds", type=int, default=10000)
    sp.add_argument("--questions", choices=("game", "all"), default="game")
    sp.add_argument("--rep-search", action="store_true")
    sp.add_argument("--dim-cap", type=int, default=8)
    return ap


def _emit(ctx: Optional[Context], report: dict) -> None:
    text = io.dumps(report)
    if ctx is not None and ctx.out is not None:
        (ctx.out / "report.json").write_text(text, encoding="utf-8")
    _sys.stdout.write(text)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    if args.command == "rep-search" and not (args.presentation or args.system):
        ap.error("rep-search needs a presentation or --system")
    ctx = None
    report: dict = {"schema": SCHEMA, "command": args.command}
    code = 0
    try:
        ctx = Context(args)
        report.update(COMMANDS[args.command](ctx))
        report["status"] = "ok"
    except _Collected as exc:
        report.update(exc.report)
        report["status"] = "error"
        code = exc.exit_code
    except LsgError as exc:
        report["status"] = "error"
        report["error"] = _error_payload(exc)
        code = exc.exit_code
    except AssertionError as exc:
        report["status"] = "error"
        report["error"] = {"type": "AnalysisFailure", "message": str(exc)}
        code = AnalysisFailure.exit_code
    except OSError as exc:
        report["status"] = "error"
        report["error"] = {"type": "MalformedInput", "message": str(exc)}
        code = MalformedInput.exit_code
    if ctx is not None:
        if ctx.files:
            report["files"] = sorted(set(ctx.files))
        if args.timing:
            report["timing"] = ctx.timing
    _emit(ctx, report)
    return code


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
