"""Command-line interface: synth, scan, space, check, bench, run."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from decimal import Decimal
from pathlib import Path

from . import library
from .adapters import family_size
from .cegis import (ADAPTED, FAILED, NOT_SUBSTITUTABLE, TIMEOUT, concrete_equivalent, random_inputs,
                    synthesize, triviality_filter)
from .config import (RunConfig, make_report, parse_family, report_adapter,
                     report_trail)
from .equiv import EquivPolicy
from .interp import FAULTED, LIMIT, RETURNED, ExecLimits, InputVector, execute
from .ir import FunctionDef, IRError, load_corpus_dir, parse_corpus, parse_function

EXIT_CODES = {ADAPTED: 0, NOT_SUBSTITUTABLE: 1, TIMEOUT: 2, FAILED: 4}
EXIT_TOOL_ERROR = 3
RUN_EXIT = {"div0": 10, "ovf": 11, "oob": 12, "explicit": 13}
RUN_EXIT_LIMIT = 14


class UsageError(Exception):
    pass


def resolve_function(ref: str) -> FunctionDef:
    """``name`` (built-in), ``file.ir`` (single function) or ``file.ir:name``."""
    path, _, name = ref.partition(":")
    p = Path(path)
    if p.suffix == ".ir" or p.exists():
        if not p.is_file():
            raise UsageError(f"no such file: {path}")
        corpus = parse_corpus(p.read_text())
        if name:
            if name not in corpus:
                raise UsageError(f"{path} has no function {name!r}")
            return corpus[name]
        if len(corpus) != 1:
            raise UsageError(f"{path} defines {len(corpus)} functions; use {path}:NAME")
        return next(iter(corpus.values()))
    try:
        return library.get(ref)
    except KeyError as e:
        raise UsageError(str(e.args[0])) from None


def scientific(v: int, digits: int = 7) -> str:
    return f"{Decimal(v):.{digits}E}"


def scan_pairs(n: int, k: int) -> list[tuple[int, int]]:
    """Ordered (target, inner) index pairs within distance k."""
    return [(i, j) for i in range(n) for j in range(max(0, i - k), min(n, i + k + 1)) if j != i]


def scan_pair_count(n: int, k: int) -> int:
    k = min(k, n - 1)
    return 2 * k * n - k * (k + 1)


def pair_seed(seed: int, a: str, b: str) -> int:
    h = hashlib.sha256(f"{seed}:{a}:{b}".encode()).digest()
    return int.from_bytes(h[:4], "little")


# --- argument plumbing ------------------------------------------------------

def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", default="argsub",
                   help="argsub | typeconv | arith | memsub, optionally +ret/+distinct/+anyn, or a preset")
    p.add_argument("--constants", default=None, help="e.g. 0,255 or 0..11 or count:2^32")
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--ops", default=None, help="arithmetic ops, comma separated")
    p.add_argument("--mem-sizes", default=None)
    p.add_argument("--mem-slots", type=int, default=None)
    p.add_argument("--backend", choices=("symbolic", "concrete"), default="symbolic")
    p.add_argument("--timeout-secs", type=float, default=120.0)
    p.add_argument("--solver-timeout-secs", type=float, default=5.0)
    p.add_argument("--solver-policy", choices=("treat-as-unsat", "report-unknown"), default="treat-as-unsat")
    p.add_argument("--solver", choices=("auto", "internal", "smtlib", "z3"), default="auto")
    p.add_argument("--solver-path", default=None)
    p.add_argument("--step-cap", type=int, default=4000)
    p.add_argument("--path-cap", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fault-policy", choices=("strict", "modulo-target-fault"), default="strict")
    p.add_argument("--memory-mode", choices=("final-state", "write-sequence"), default="final-state")
    p.add_argument("--identity-start", action="store_true")


def _run_config(a) -> RunConfig:
    fam = parse_family(a.family, a.constants, a.depth, a.ops, a.mem_sizes, a.mem_slots)
    return RunConfig(fam, a.backend, a.timeout_secs, a.solver_timeout_secs, a.solver_policy,
                     a.solver, a.solver_path, a.step_cap, a.path_cap, a.seed, a.fault_policy,
                     a.memory_mode, a.identity_start, getattr(a, "report", None))


# --- commands ---------------------------------------------------------------

def cmd_synth(a) -> int:
    cfg = _run_config(a)
    target, inner = resolve_function(a.target), resolve_function(a.inner)
    res = synthesize(target, inner, cfg.family, cfg=cfg.cegis())
    report = make_report(target, inner, res, cfg, a.target, a.inner)
    print(f"{target.name} <- {inner.name}: {res.verdict}")
    if res.adapter is not None:
        print(f"  {res.adapter.describe()}")
    s = res.state.stats
    print(f"  iterations {s.iterations}, total {s.total_secs:.3f}s, "
          f"solver {s.solver.seconds:.3f}s, adapter search {s.search_secs:.3f}s "
          f"(last {s.search_last_secs:.3f}s)")
    if s.incomplete_check:
        print("  note: exploration was truncated by limits")
    if res.error:
        print(f"  error: {res.error}", file=sys.stderr)
    if a.report:
        Path(a.report).write_text(json.dumps(report, indent=2))
    return EXIT_CODES[res.verdict]


def _scan_task(args):
    t_src, i_src, cfg, seed = args
    t, i = parse_function(t_src), parse_function(i_src)
    try:
        res = synthesize(t, i, cfg.family, cfg=cfg.cegis(seed))
        return t.name, i.name, res.verdict, res.adapter.describe() if res.adapter else "", \
            res.state.stats.total_secs
    except Exception as e:  # a crashing pair never stops the scan
        return t.name, i.name, "Crash", f"{type(e).__name__}: {e}", 0.0


def _prefilter_task(args):
    src, cfg = args
    return triviality_filter(parse_function(src), cfg.family, cfg.cegis())


def cmd_scan(a) -> int:
    from .ir import print_function
    cfg = _run_config(a)
    if a.window < 1:
        raise UsageError("--window must be >= 1")
    d = Path(a.corpus)
    if not d.is_dir():
        raise UsageError(f"no such corpus directory: {a.corpus}")
    funcs = list(load_corpus_dir(d).values())
    srcs = [print_function(f) for f in funcs]
    pairs = scan_pairs(len(funcs), a.window)
    print(f"corpus {len(funcs)} functions, window {a.window}: {len(pairs)} pairs")
    with ProcessPoolExecutor(max_workers=a.jobs) if a.jobs > 1 else _Serial() as pool:
        trivial = set()
        if a.prefilter:
            flags = list(pool.map(_prefilter_task, [(s, cfg) for s in srcs]))
            trivial = {k for k, v in enumerate(flags) if v}
            print(f"prefilter: {len(trivial)} trivial targets skipped")
        jobs = [(srcs[i], srcs[j], cfg, pair_seed(cfg.seed, funcs[i].name, funcs[j].name))
                for i, j in pairs if i not in trivial]
        rows = list(pool.map(_scan_task, jobs))
    counts = {"adapted": 0, "not-substitutable": 0, "timeout": 0, "crash": 0}
    key = {ADAPTED: "adapted", NOT_SUBSTITUTABLE: "not-substitutable", TIMEOUT: "timeout"}
    for t, i, verdict, detail, secs in rows:
        counts[key.get(verdict, "crash")] += 1
        if verdict == ADAPTED or a.verbose:
            print(f"  {t:<24} <- {i:<24} {verdict:<17} {detail}")
    print(f"{'pairs':<18}{len(rows)}")
    for k, v in counts.items():
        print(f"{k:<18}{v}")
    if a.report:
        Path(a.report).write_text(json.dumps({
            "pairs": len(rows), "scheduled": len(pairs), "counts": counts,
            "results": [dict(target=t, inner=i, verdict=v, detail=d_, secs=s)
                        for t, i, v, d_, s in rows]}, indent=2))
    return 0


class _Serial:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    @staticmethod
    def map(fn, items):
        return map(fn, items)


def cmd_space(a) -> int:
    fam = parse_family(a.family, a.constants, a.depth, a.ops, a.mem_sizes, a.mem_slots)
    target = resolve_function(a.target) if a.target else None
    inner = resolve_function(a.inner) if a.inner else None
    v = family_size(fam, a.t_arity, a.i_arity, target, inner)
    print(v)
    print(scientific(v))
    return 0


def cmd_check(a) -> int:
    try:
        report = json.loads(Path(a.report_file).read_text())
    except FileNotFoundError:
        raise UsageError(f"no such report: {a.report_file}") from None
    if report.get("verdict") != ADAPTED:
        raise UsageError("report verdict is not Adapted")
    target = parse_function(report["target_source"])
    inner = parse_function(report["inner_source"])
    adapter = report_adapter(report)
    conf = report.get("config", {})
    policy = EquivPolicy(conf.get("fault_policy", "strict"), conf.get("memory_mode", "final-state"))
    step_cap = conf.get("step_cap", 4000)
    inputs = list(report_trail(report))
    if a.exhaustive_bits:
        if target.arity != 1:
            raise UsageError("--exhaustive-bits needs a one-argument target")
        source = (InputVector.of([x]) for x in range(1 << a.exhaustive_bits))
    else:
        source = random_inputs(target, a.tests, a.seed)
    checked = 0
    for inp in [*inputs, *source]:
        t_out = execute(target, inp, ExecLimits(step_cap))
        if t_out.status == LIMIT:
            continue
        checked += 1
        if not concrete_equivalent(target, inner, adapter, inp, policy, step_cap, t_out):
            print(f"MISMATCH on {inp}")
            print(f"  target: {t_out.status_label()} {t_out.return_value}")
            return 1
    print(f"ok: {checked} inputs equivalent under {adapter.describe()}")
    return 0


def parse_settings(text: str) -> list[tuple[int, int]]:
    out = []
    for part in text.split(","):
        k, b = part.split(":")
        out.append((int(k), int(b)))
    return out


def bench_rows(settings, backends, cfg: RunConfig, repeats: int = 1):
    """(family_size, backend, median search secs, verdict, adapter, k, B) per setting and backend."""
    rows = []
    for k, b in settings:
        target, inner = library.popcnt_pair(k)
        fam = parse_family("argsub", f"0..{b}")
        size = family_size(fam, target.arity, inner.arity)
        for backend in backends:
            times, verdicts, adapters = [], [], []
            for r in range(repeats):
                c = cfg.with_(family=fam, backend=backend, seed=cfg.seed + r).cegis()
                res = synthesize(target, inner, fam, cfg=c)
                times.append(res.state.stats.search_secs)
                verdicts.append(res.verdict)
                adapters.append(res.adapter)
            verdict = verdicts[0] if len(set(verdicts)) == 1 else "Mixed"
            rows.append((size, backend, statistics.median(times), verdict, adapters[0], k, b))
    return rows


def cmd_bench(a) -> int:
    if a.generator != "popcnt":
        raise UsageError("only the popcnt generator is built in")
    cfg = _run_config(a)
    rows = bench_rows(parse_settings(a.settings), a.backends.split(","), cfg, a.repeats)
    out = open(a.csv, "w", newline="") if a.csv else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["family_size", "backend", "search_time_secs", "verdict"])
        for size, backend, secs, verdict, *_ in rows:
            w.writerow([size, backend, f"{secs:.6f}", verdict])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _parse_region(text: str) -> tuple[str, bytes]:
    name, _, data = text.partition("=")
    if not data:
        raise UsageError(f"bad region {text!r}; use NAME=HEX or NAME=@FILE")
    if data.startswith("@"):
        return name, Path(data[1:]).read_bytes()
    return name, bytes.fromhex(data)


def cmd_run(a) -> int:
    f = resolve_function(a.function)
    regions = dict(_parse_region(r) for r in a.region)
    inp = InputVector.of([int(x, 0) for x in a.args], regions)
    out = execute(f, inp, ExecLimits(a.step_cap))
    print(out.status_label() if out.status != RETURNED
          else f"Returned {out.return_value.signed} ({out.return_value.bits:#x})")
    for (r, off), b in sorted(out.final_writes.items()):
        print(f"  write {r}[{off}] = {b:#04x}")
    for tag, ops in out.events:
        print(f"  event {tag}({', '.join(str(v.signed) for v in ops)})")
    print(f"  steps {out.steps}")
    if out.status == RETURNED:
        return 0
    if out.status == FAULTED:
        return RUN_EXIT[out.fault_kind]
    return RUN_EXIT_LIMIT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adaptsynth", description="Adapter synthesis over a small bitvector IR")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("synth", help="synthesize an adapter for one (target, inner) pair")
    s.add_argument("target")
    s.add_argument("inner")
    _add_run_flags(s)
    s.add_argument("--report", default=None)
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("scan", help="windowed pair scan over a corpus directory")
    s.add_argument("corpus")
    _add_run_flags(s)
    s.add_argument("--window", type=int, default=5)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--prefilter", action="store_true", help="skip targets adaptable from the identity")
    s.add_argument("--report", default=None)
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(fn=cmd_scan)

    s = sub.add_parser("space", help="exact adapter-family size")
    s.add_argument("--family", default="argsub")
    s.add_argument("--constants", default=None)
    s.add_argument("--depth", type=int, default=None)
    s.add_argument("--ops", default=None)
    s.add_argument("--mem-sizes", default=None)
    s.add_argument("--mem-slots", type=int, default=None)
    s.add_argument("--t-arity", type=int, required=True)
    s.add_argument("--i-arity", type=int, required=True)
    s.add_argument("--target", default=None, help="function ref (memory families only)")
    s.add_argument("--inner", default=None, help="function ref (memory families only)")
    s.set_defaults(fn=cmd_space)

    s = sub.add_parser("check", help="replay a report's adapter on random inputs")
    s.add_argument("report_file")
    s.add_argument("--tests", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--exhaustive-bits", type=int, default=0)
    s.set_defaults(fn=cmd_check)

    s = sub.add_parser("bench", help="popcount benchmark series as CSV")
    s.add_argument("generator", nargs="?", default="popcnt")
    s.add_argument("--settings", default="1:2,1:11,2:11,3:11", help="k:B pairs")
    s.add_argument("--backends", default="symbolic,concrete")
    s.add_argument("--repeats", type=int, default=1)
    _add_run_flags(s)
    s.add_argument("--csv", default=None)
    s.set_defaults(fn=cmd_bench)

    s = sub.add_parser("run", help="interpret one function")
    s.add_argument("function")
    s.add_argument("args", nargs="*")
    s.add_argument("--region", action="append", default=[], help="NAME=HEX or NAME=@FILE")
    s.add_argument("--step-cap", type=int, default=4000)
    s.set_defaults(fn=cmd_run)
    return p


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    try:
        return a.fn(a)
    except (UsageError, IRError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_TOOL_ERROR


if __name__ == "__main__":
    sys.exit(main())
