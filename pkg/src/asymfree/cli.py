"""Command-line front end.

Subcommands: bound, exact, mc, tail, freeness, verify, sample.
Exit codes: 0 success, 1 invalid configuration, 2 verification failure,
3 runtime cap exceeded.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import re
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__
from .bounds import corollary_intersection_bound, theorem_bounds
from .errors import AsymfreeError, CapExceededError, EmptyWordError, ExpressionSyntaxError
from .experiments import (
    conjugation_freeness_fraction,
    conjugation_spec,
    decay_sweep,
    mc_tail_probability,
    microstate_fraction,
    microstate_spec,
)
from .haarsample import SeededStream, sample_batch
from .matcore import make_traceless_diagonal, read_observable, write_matrix
from .suites import DEFAULT_SEED, SUITES, run_suite
from .weingarten import DEFAULT_ORDER_CAP, EntryMomentSpec, exact_entry_moment, exact_second_moment, exact_word_moment
from .wordcore import AlternatingExpression, Letter, reduce

__all__ = ["CSV_FIELDS", "RunConfig", "parse_expression", "format_expression", "run", "main"]

CSV_FIELDS = (
    "run_id", "command", "expr", "k", "n", "m", "w", "M", "samples", "seed",
    "mean_re", "mean_im", "second_abs", "stderr_mean", "stderr_second",
    "eps", "tail_frac", "mean_bound", "second_bound", "tail_bound", "tail_valid",
)

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_CAP = 0, 1, 2, 3

_WORD = re.compile(r"h([1-9][0-9]*)(\^-1)?$")
_OBS = re.compile(r"x([1-9][0-9]*)$")


def parse_expression(text: str) -> AlternatingExpression:
    """Parse ``(word_token+ obs_token)+`` where word_token is h<i> or h<i>^-1 and obs_token is x<j>.

    Consecutive word tokens form one freely reduced word; the expression's
    ``slots`` give the observable index of each term.
    """
    terms = []
    pending: list[Letter] = []
    start = 0
    for tok in re.finditer(r"\S+", text):
        s = tok.group()
        if (mw := _WORD.match(s)):
            if not pending:
                start = tok.start()
            pending.append(Letter(int(mw.group(1)), -1 if mw.group(2) else 1))
        elif (mo := _OBS.match(s)):
            if not pending:
                raise ExpressionSyntaxError(f"observable {s} has no word before it", tok.start())
            w = reduce(pending)
            if w.is_identity:
                raise EmptyWordError(f"the word at position {start} reduces to e")
            terms.append((w, int(mo.group(1))))
            pending = []
        else:
            raise ExpressionSyntaxError(f"unexpected token {s!r}", tok.start())
    if pending:
        raise ExpressionSyntaxError("trailing word without an observable", start)
    if not terms:
        raise ExpressionSyntaxError("empty expression", 0)
    return AlternatingExpression(tuple(terms))


def format_expression(expr: AlternatingExpression) -> str:
    return str(expr)


@dataclass
class RunConfig:
    command: str
    expr: str | None = None
    k: list[int] = field(default_factory=list)
    n: int | None = None
    m: int | None = None
    M: float = 1.0
    w: int | None = None
    eps: float | None = None
    samples: int = 10000
    seed: int = 0
    format: str = "json"
    out: str | None = None
    threads: int | None = None
    pattern: str = "balanced"
    xfile: str | None = None
    suite: str = "all"
    max_m: int = 3
    max_k: int = 6
    s: int = 1
    R: float | None = None
    mode: str = "microstate"
    card_E: int | None = None
    second: bool = False
    plain: str | None = None
    conj: str | None = None
    index: int = 0
    timing: bool = False
    cap: int = DEFAULT_ORDER_CAP

    def __post_init__(self):
        if self.format not in ("json", "csv"):
            raise AsymfreeError(f"format must be json or csv, got {self.format!r}")
        for name in ("samples", "max_m", "max_k", "s", "cap"):
            if getattr(self, name) < 1:
                raise AsymfreeError(f"--{name.replace('_', '-')} must be positive")
        if any(k < 1 for k in self.k):
            raise AsymfreeError("--k must be positive")
        for name in ("n", "m", "w"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise AsymfreeError(f"--{name} must be positive")
        if self.M <= 0 or (self.eps is not None and self.eps <= 0):
            raise AsymfreeError("--M and --eps must be positive")
        if self.threads is not None and self.threads < 1:
            raise AsymfreeError("--threads must be positive")

    def run_id(self) -> str:
        """Hash of every setting that can change the numbers (not format, paths or threads)."""
        keep = {k: v for k, v in asdict(self).items() if k not in ("format", "out", "threads", "timing")}
        return hashlib.sha256(json.dumps(keep, sort_keys=True).encode()).hexdigest()[:16]


# --- output ---------------------------------------------------------------

def _num(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, Fraction):
        x = float(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return "%.17g" % x
    return str(x)


def _json(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer, float, np.floating, Fraction)):
        s = _num(x)
        return json.dumps(s) if s in ("nan", "inf", "-inf") else s
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_json(v) for v in x) + "]"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def render(records: list[dict], fmt: str, wall_time: float | None = None) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for r in records:
            writer.writerow(["" if r.get(f) is None else _num(r[f]) for f in CSV_FIELDS])
        return buf.getvalue()
    doc = {"meta": {"version": __version__, "wall_time": wall_time}, "records": records}
    return _json(doc) + "\n"


def _record(cfg: RunConfig, **values) -> dict:
    rec = {f: None for f in CSV_FIELDS}
    rec.update(run_id=cfg.run_id(), command=cfg.command, seed=None)
    rec.update(values)
    return rec


def _bound_fields(report) -> dict:
    return {
        "mean_bound": report.mean_bound, "second_bound": report.second_moment_bound,
        "tail_bound": report.tail_bound, "tail_valid": report.tail_valid,
    }


# --- subcommands ------------------------------------------------------------

def _expr(cfg: RunConfig) -> AlternatingExpression:
    if not cfg.expr:
        raise AsymfreeError("--expr is required")
    return parse_expression(cfg.expr)


def _observables(cfg: RunConfig, k: int, count: int):
    if cfg.xfile:
        obs = read_observable(cfg.xfile)
        if len(obs) < count:
            raise AsymfreeError(f"{cfg.xfile} holds {len(obs)} observables, {count} needed")
        return obs
    return [make_traceless_diagonal(k, cfg.pattern, cfg.M)] * count


def _single_k(cfg: RunConfig) -> int:
    if len(cfg.k) != 1:
        raise AsymfreeError("exactly one --k is required")
    return cfg.k[0]


def _cmd_bound(cfg: RunConfig) -> list[dict]:
    m, w = cfg.m, cfg.w
    if cfg.expr:
        e = _expr(cfg)
        m, w = m or e.m, w or e.w
    if m is None or w is None:
        raise AsymfreeError("bound needs --m and --w (or --expr)")
    recs = []
    for k in cfg.k or [1]:
        rep = theorem_bounds(m, cfg.M, w, k, cfg.eps)
        rec = _record(cfg, expr=cfg.expr, k=k, m=m, w=w, M=cfg.M, eps=cfg.eps, **_bound_fields(rep))
        if cfg.card_E is not None:
            if cfg.eps is None:
                raise AsymfreeError("--card-E needs --eps")
            rec["measure_lower_bound"] = corollary_intersection_bound(cfg.card_E, m, cfg.M, w, k, cfg.eps)
        recs.append(rec)
    return recs


def _parse_cells(text: str | None) -> tuple:
    if not text:
        return ()
    try:
        return tuple(tuple(int(v) for v in cell.split(",")) for cell in text.split())
    except ValueError:
        raise AsymfreeError(f"bad entry list {text!r}; expected 'i,j[,g] ...'") from None


def _cmd_exact(cfg: RunConfig) -> list[dict]:
    k = _single_k(cfg)
    if cfg.plain is not None or cfg.conj is not None:
        spec = EntryMomentSpec(_parse_cells(cfg.plain), _parse_cells(cfg.conj), k)
        value = exact_entry_moment(spec, cfg.cap)
        rec = _record(cfg, k=k, mean_re=float(value), mean_im=0.0)
        rec["exact_mean"] = str(value)
        return [rec]
    e = _expr(cfg)
    n = cfg.n or e.n
    obs = _observables(cfg, k, max(e.slots))
    value = exact_word_moment(e, obs, k, n, cfg.cap)
    z = complex(value)
    rep = theorem_bounds(e.m, max(o.M for o in obs), e.w, k, cfg.eps)
    rec = _record(cfg, expr=format_expression(e), k=k, n=n, m=e.m, w=e.w, M=rep.M, eps=cfg.eps,
                  mean_re=z.real, mean_im=z.imag, **_bound_fields(rep))
    rec["exact_mean"] = str(value)
    if cfg.second:
        second = exact_second_moment(e, obs, k, n, cfg.cap)
        rec["second_abs"] = complex(second).real
        rec["exact_second"] = str(second)
    return [rec]


def _cmd_mc(cfg: RunConfig) -> list[dict]:
    e = _expr(cfg)
    n = cfg.n or e.n
    if not cfg.k:
        raise AsymfreeError("--k is required")
    rows = decay_sweep(e, lambda k: _observables(cfg, k, max(e.slots)), cfg.k, cfg.samples, cfg.seed,
                       n=n, eps=cfg.eps, threads=cfg.threads)
    recs = []
    for row in rows:
        est = row.estimate
        recs.append(_record(
            cfg, expr=format_expression(e), k=row.k, n=n, m=e.m, w=e.w, M=row.bounds.M, samples=est.samples,
            seed=cfg.seed, mean_re=est.mean.real, mean_im=est.mean.imag, second_abs=est.second_abs_moment,
            stderr_mean=est.std_error_mean, stderr_second=est.std_error_second, eps=cfg.eps, **_bound_fields(row.bounds),
        ))
    return recs


def _cmd_tail(cfg: RunConfig) -> list[dict]:
    e = _expr(cfg)
    n = cfg.n or e.n
    if cfg.eps is None:
        raise AsymfreeError("tail needs --eps")
    if not cfg.k:
        raise AsymfreeError("--k is required")
    recs = []
    for k in cfg.k:
        obs = _observables(cfg, k, max(e.slots))
        frac = mc_tail_probability(e, obs, k, n, cfg.eps, cfg.samples, cfg.seed, cfg.threads)
        rep = theorem_bounds(e.m, max(o.M for o in obs), e.w, k, cfg.eps)
        recs.append(_record(cfg, expr=format_expression(e), k=k, n=n, m=e.m, w=e.w, M=rep.M, samples=cfg.samples,
                            seed=cfg.seed, eps=cfg.eps, tail_frac=frac.fraction, stderr_mean=frac.std_error,
                            **_bound_fields(rep)))
    return recs


def _cmd_freeness(cfg: RunConfig) -> list[dict]:
    if cfg.eps is None or cfg.m is None:
        raise AsymfreeError("freeness needs --m and --eps")
    if cfg.mode not in ("microstate", "conjugation"):
        raise AsymfreeError("--mode must be microstate or conjugation")
    recs = []
    for k in cfg.k:
        xs = _observables(cfg, k, cfg.s)[: cfg.s]
        if cfg.mode == "microstate":
            n = cfg.n or 1
            spec = microstate_spec(xs, n, cfg.m, cfg.eps, cfg.R)
            frac = microstate_fraction(k, n, cfg.s, spec, xs, cfg.samples, cfg.seed, cfg.threads)
        else:
            n = cfg.s
            spec = conjugation_spec(xs, cfg.m, cfg.eps, cfg.R)
            frac = conjugation_freeness_fraction(k, cfg.s, spec, xs, cfg.samples, cfg.seed, cfg.threads)
        recs.append(_record(cfg, expr=cfg.mode, k=k, n=n, m=cfg.m, M=max(o.M for o in xs), samples=cfg.samples,
                            seed=cfg.seed, eps=cfg.eps, tail_frac=frac.fraction, stderr_mean=frac.std_error))
    return recs


def _cmd_sample(cfg: RunConfig) -> list[dict]:
    k = _single_k(cfg)
    n = cfg.n or 1
    if not cfg.out:
        raise AsymfreeError("sample needs --out (one file per unitary: <out>.<i>.json)")
    us = sample_batch(k, n, SeededStream(cfg.seed), [cfg.index])[0]
    for i in range(n):
        write_matrix(f"{cfg.out}.{i + 1}.json", us[i])
    return []


def _cmd_verify(cfg: RunConfig) -> tuple[list[dict], bool]:
    results = run_suite(cfg.suite, cfg.max_m, cfg.max_k, cfg.seed, cfg.threads)
    for r in results:
        print(r.line(), file=sys.stderr)
    recs = [{"check": r.name, "passed": r.passed, "cases": r.cases, "detail": r.detail} for r in results]
    return recs, all(r.passed for r in results)


_COMMANDS = {"bound": _cmd_bound, "exact": _cmd_exact, "mc": _cmd_mc, "tail": _cmd_tail,
             "freeness": _cmd_freeness, "sample": _cmd_sample}


def run(cfg: RunConfig) -> int:
    """Execute one configuration, write its output, and return the exit status."""
    t0 = time.perf_counter()
    try:
        ok = True
        if cfg.command == "verify":
            records, ok = _cmd_verify(cfg)
        else:
            records = _COMMANDS[cfg.command](cfg)
    except CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (AsymfreeError, KeyError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.command != "sample":
        if cfg.command == "verify" and cfg.format == "csv":
            text = "check,passed,cases,detail\n" + "".join(
                f"{r['check']},{_num(r['passed'])},{r['cases']},{json.dumps(r['detail'])}\n" for r in records)
        else:
            text = render(records, cfg.format, time.perf_counter() - t0 if cfg.timing else None)
        if cfg.out:
            with open(cfg.out, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_VERIFY


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="asymfree", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seed=0):
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--threads", type=int, help="worker threads; ASYMFREE_THREADS overrides")
        p.add_argument("--seed", type=int, default=seed, help="64-bit master seed")
        p.add_argument("--timing", action="store_true", help="record wall time in JSON meta")

    def obs(p):
        p.add_argument("--pattern", default="balanced", choices=("alternating", "balanced", "roots", "roots_of_unity"))
        p.add_argument("--xfile", help="observable JSON file (one object or a list)")
        p.add_argument("--M", type=float, default=1.0, help="observable norm for --pattern")

    p = sub.add_parser("bound", help="theorem and corollary bounds")
    p.add_argument("--m", type=int)
    p.add_argument("--w", type=int)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--k", type=int, nargs="+", default=[])
    p.add_argument("--eps", type=float)
    p.add_argument("--expr")
    p.add_argument("--card-E", dest="card_E", type=int, help="also report the intersection lower bound")
    common(p)

    p = sub.add_parser("exact", help="exact expected trace or entry moment")
    p.add_argument("--expr")
    p.add_argument("--k", type=int, nargs=1, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--second", action="store_true", help="also compute the exact second moment")
    p.add_argument("--plain", help="entry moment factors 'i,j[,g] ...'")
    p.add_argument("--conj", help="conjugated entry moment factors 'i,j[,g] ...'")
    p.add_argument("--cap", type=int, default=DEFAULT_ORDER_CAP)
    obs(p)
    common(p)

    for name, text in (("mc", "Monte Carlo moments (several --k give a decay sweep)"), ("tail", "empirical tail probability")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--expr", required=True)
        p.add_argument("--k", type=int, nargs="+", required=True)
        p.add_argument("--n", type=int)
        p.add_argument("--eps", type=float, required=name == "tail")
        p.add_argument("--samples", type=int, default=10000)
        obs(p)
        common(p)

    p = sub.add_parser("freeness", help="microstate and conjugation fractions")
    p.add_argument("--mode", choices=("microstate", "conjugation"), default="microstate")
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--n", type=int, help="number of unitaries (microstate mode)")
    p.add_argument("--s", type=int, default=1, help="number of fixed matrices")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--R", type=float, help="norm cap (default max(1, M))")
    p.add_argument("--samples", type=int, default=200)
    obs(p)
    common(p)

    p = sub.add_parser("verify", help="run invariant suites")
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--max-m", dest="max_m", type=int, default=3)
    p.add_argument("--max-k", dest="max_k", type=int, default=6)
    common(p, seed=DEFAULT_SEED)

    p = sub.add_parser("sample", help="write Haar unitaries as matrix JSON files")
    p.add_argument("--k", type=int, nargs=1, required=True)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--index", type=int, default=0, help="sample index within the stream")
    common(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    values = {k: v for k, v in vars(args).items() if v is not None}
    try:
        cfg = RunConfig(**values)
    except AsymfreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
