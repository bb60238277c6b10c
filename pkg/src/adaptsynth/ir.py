"""Bitvector IR: instruction set, functions, corpora, text format.

Grammar (one function per ``func`` form; whitespace including newlines is
insignificant, ``#`` starts a comment)::

    func NAME ( [param {, param}] ) {region NAME SIZE} { block+ }
    block := LABEL : line+
    line  := REG = const.iW INT
           | REG = BINOP.iW REG, REG
           | REG = UNOP.iW REG
           | REG = CMPOP.iW REG, REG          (result is i1)
           | REG = sext.iW <- iW REG  |  REG = zext.iW <- iW REG
           | REG = trunc.iW <- iW REG
           | REG = load.N REGION [ REG ]
           | store.N REGION [ REG ] , REG
           | emit INT {, REG}
           | br REG, LABEL, LABEL  |  jmp LABEL  |  ret REG  |  fault INT

Parameters are i64 registers. Registers may be assigned more than once as long
as every use is preceded by an assignment on every incoming path.
"""
from __future__ import annotations

import re
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from .bitvec import ACCESS_SIZES, BINOPS, CMPOPS, UNOPS, WIDTHS, mask

MAX_PARAMS = 6
DEFAULT_REGION_CAP = 936

KEYWORDS = frozenset(("func", "region", "store", "emit", "br", "jmp", "ret", "fault"))


class IRError(ValueError):
    """Base class for IR parse and validation errors."""


class IRSyntaxError(IRError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line
        self.msg = msg


class IRValidationError(IRError):
    def __init__(self, violation: Violation):
        super().__init__(str(violation))
        self.violation = violation


class ArityError(IRValidationError):
    pass


class UndefinedLabel(IRValidationError):
    pass


class WidthMismatch(IRValidationError):
    pass


class RegionUnknown(IRValidationError):
    pass


# --- instructions -----------------------------------------------------------

@dataclass(frozen=True)
class Const:
    dst: str
    width: int
    value: int


@dataclass(frozen=True)
class BinOp:
    op: str
    dst: str
    width: int
    a: str
    b: str


@dataclass(frozen=True)
class UnOp:
    op: str
    dst: str
    width: int
    a: str


@dataclass(frozen=True)
class Cmp:
    """Comparison of two ``width``-bit registers producing an i1."""

    op: str
    dst: str
    width: int
    a: str
    b: str


@dataclass(frozen=True)
class Extend:
    kind: str  # "sext" | "zext"
    dst: str
    to_width: int
    from_width: int
    src: str


@dataclass(frozen=True)
class Trunc:
    dst: str
    to_width: int
    from_width: int
    src: str


@dataclass(frozen=True)
class Load:
    dst: str
    size: int
    region: str
    addr: str


@dataclass(frozen=True)
class Store:
    size: int
    region: str
    addr: str
    value: str


@dataclass(frozen=True)
class Emit:
    tag: int
    srcs: tuple[str, ...]


@dataclass(frozen=True)
class Br:
    cond: str
    then: str
    orelse: str


@dataclass(frozen=True)
class Jmp:
    label: str


@dataclass(frozen=True)
class Ret:
    src: str


@dataclass(frozen=True)
class Fault:
    tag: int


Instruction = Union[Const, BinOp, UnOp, Cmp, Extend, Trunc, Load, Store,
                    Emit, Br, Jmp, Ret, Fault]
TERMINATORS = (Br, Jmp, Ret, Fault)


def dest_width(ins: Instruction) -> int | None:
    """Width of the register an instruction defines, or None."""
    if isinstance(ins, (Const, BinOp, UnOp)):
        return ins.width
    if isinstance(ins, Cmp):
        return 1
    if isinstance(ins, (Extend, Trunc)):
        return ins.to_width
    if isinstance(ins, Load):
        return ins.size * 8
    return None


def uses(ins: Instruction) -> tuple[str, ...]:
    if isinstance(ins, (BinOp, Cmp)):
        return (ins.a, ins.b)
    if isinstance(ins, UnOp):
        return (ins.a,)
    if isinstance(ins, (Extend, Trunc)):
        return (ins.src,)
    if isinstance(ins, Load):
        return (ins.addr,)
    if isinstance(ins, Store):
        return (ins.addr, ins.value)
    if isinstance(ins, Emit):
        return ins.srcs
    if isinstance(ins, Br):
        return (ins.cond,)
    if isinstance(ins, Ret):
        return (ins.src,)
    return ()


def successors(ins: Instruction) -> tuple[str, ...]:
    if isinstance(ins, Br):
        return (ins.then, ins.orelse)
    if isinstance(ins, Jmp):
        return (ins.label,)
    return ()


# --- functions --------------------------------------------------------------

@dataclass(frozen=True)
class RegionDecl:
    name: str
    size: int


@dataclass(frozen=True)
class Block:
    label: str
    instrs: tuple[Instruction, ...]


@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: tuple[str, ...]
    regions: tuple[RegionDecl, ...]
    blocks: tuple[Block, ...]

    @property
    def entry(self) -> str:
        return self.blocks[0].label

    @property
    def arity(self) -> int:
        return len(self.params)

    def block(self, label: str) -> Block:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)

    def region(self, name: str) -> RegionDecl:
        for r in self.regions:
            if r.name == name:
                return r
        raise KeyError(name)

    def region_sizes(self) -> dict[str, int]:
        return {r.name: r.size for r in self.regions}

    def register_widths(self) -> dict[str, int]:
        """Width of every register (first definition wins; validate() checks consistency)."""
        widths = {p: 64 for p in self.params}
        for b in self.blocks:
            for ins in b.instrs:
                w = dest_width(ins)
                if w is not None:
                    widths.setdefault(ins.dst, w)
        return widths


class Corpus(OrderedDict):
    """Ordered name -> FunctionDef mapping; order is file/appearance order."""

    def add(self, f: FunctionDef) -> None:
        if f.name in self:
            raise IRError(f"duplicate function name {f.name!r}")
        self[f.name] = f


# --- validation -------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    rule: str
    label: str | None
    index: int | None
    message: str

    def __str__(self):
        where = ""
        if self.label is not None:
            where = f" at {self.label}"
            if self.index is not None:
                where += f"[{self.index}]"
        return f"{self.rule}{where}: {self.message}"


def validate(f: FunctionDef, region_cap: int = DEFAULT_REGION_CAP) -> list[Violation]:
    out: list[Violation] = []

    def bad(rule, label, index, msg):
        out.append(Violation(rule, label, index, msg))

    if len(f.params) > MAX_PARAMS:
        bad("ArityError", None, None, f"{len(f.params)} parameters, at most {MAX_PARAMS}")
    if len(set(f.params)) != len(f.params):
        bad("DuplicateParam", None, None, "parameter names must be distinct")
    region_sizes = {}
    for r in f.regions:
        if r.name in region_sizes:
            bad("DuplicateRegion", None, None, f"region {r.name} declared twice")
        region_sizes[r.name] = r.size
        if r.size < 1:
            bad("RegionSize", None, None, f"region {r.name} has size {r.size}")
        elif r.size > region_cap:
            bad("RegionSize", None, None, f"region {r.name} exceeds cap {region_cap}")
    if not f.blocks:
        bad("EmptyFunction", None, None, "function has no blocks")
        return out

    labels = set()
    for b in f.blocks:
        if b.label in labels:
            bad("DuplicateLabel", b.label, None, "label defined twice")
        labels.add(b.label)

    widths: dict[str, int] = {p: 64 for p in f.params}
    for b in f.blocks:
        for i, ins in enumerate(b.instrs):
            w = dest_width(ins)
            if w is None:
                continue
            if w not in WIDTHS:
                bad("WidthMismatch", b.label, i, f"bad width {w}")
            prev = widths.setdefault(ins.dst, w)
            if prev != w:
                bad("WidthMismatch", b.label, i,
                    f"register {ins.dst} redefined as i{w} (was i{prev})")

    def width_of(r):
        return widths.get(r)

    for b in f.blocks:
        if not b.instrs:
            bad("MissingTerminator", b.label, None, "empty block")
            continue
        if not isinstance(b.instrs[-1], TERMINATORS):
            bad("MissingTerminator", b.label, len(b.instrs) - 1, "block does not end in a terminator")
        for i, ins in enumerate(b.instrs):
            if isinstance(ins, TERMINATORS) and i != len(b.instrs) - 1:
                bad("TerminatorNotLast", b.label, i, "terminator before end of block")
            for lab in successors(ins):
                if lab not in labels:
                    bad("UndefinedLabel", b.label, i, f"unknown label {lab}")
            if isinstance(ins, (Load, Store)):
                if ins.region not in region_sizes:
                    bad("RegionUnknown", b.label, i, f"unknown region {ins.region}")
                if ins.size not in ACCESS_SIZES:
                    bad("WidthMismatch", b.label, i, f"bad access size {ins.size}")
            for r in uses(ins):
                if r not in widths:
                    bad("UseBeforeDef", b.label, i, f"register {r} is never assigned")
            _check_widths(ins, width_of, lambda msg: bad("WidthMismatch", b.label, i, msg))

    out.extend(_definite_assignment(f, labels))
    return out


def _check_widths(ins, width_of, report):
    def expect(reg, w, what):
        actual = width_of(reg)
        if actual is not None and actual != w:
            report(f"{what} {reg} is i{actual}, expected i{w}")

    if isinstance(ins, Const):
        if ins.width not in WIDTHS:
            report(f"bad width {ins.width}")
    elif isinstance(ins, BinOp):
        if ins.op not in BINOPS:
            report(f"unknown binop {ins.op}")
        expect(ins.a, ins.width, "operand")
        expect(ins.b, ins.width, "operand")
    elif isinstance(ins, UnOp):
        if ins.op not in UNOPS:
            report(f"unknown unop {ins.op}")
        expect(ins.a, ins.width, "operand")
    elif isinstance(ins, Cmp):
        if ins.op not in CMPOPS:
            report(f"unknown comparison {ins.op}")
        if ins.width not in WIDTHS:
            report(f"bad width {ins.width}")
        expect(ins.a, ins.width, "operand")
        expect(ins.b, ins.width, "operand")
    elif isinstance(ins, Extend):
        if ins.kind not in ("sext", "zext"):
            report(f"unknown extension {ins.kind}")
        if not ins.to_width > ins.from_width:
            report(f"{ins.kind} must strictly widen (i{ins.from_width} -> i{ins.to_width})")
        expect(ins.src, ins.from_width, "source")
    elif isinstance(ins, Trunc):
        if not ins.to_width < ins.from_width:
            report(f"trunc must strictly narrow (i{ins.from_width} -> i{ins.to_width})")
        expect(ins.src, ins.from_width, "source")
    elif isinstance(ins, Store):
        if ins.size in ACCESS_SIZES:
            expect(ins.value, ins.size * 8, "stored value")
    elif isinstance(ins, Br):
        expect(ins.cond, 1, "branch condition")
    elif isinstance(ins, Ret):
        expect(ins.src, 64, "return value")


def _definite_assignment(f: FunctionDef, labels: set[str]) -> list[Violation]:
    blocks = {b.label: b for b in f.blocks}
    preds: dict[str, list[str]] = {lab: [] for lab in blocks}
    for b in f.blocks:
        if b.instrs:
            for s in successors(b.instrs[-1]):
                if s in preds:
                    preds[s].append(b.label)
    # reachable set from entry
    reach, work = {f.entry}, [f.entry]
    while work:
        lab = work.pop()
        b = blocks[lab]
        if b.instrs:
            for s in successors(b.instrs[-1]):
                if s in blocks and s not in reach:
                    reach.add(s)
                    work.append(s)

    every = set(f.params)
    defs = {}
    for b in f.blocks:
        d = {ins.dst for ins in b.instrs if dest_width(ins) is not None}
        defs[b.label] = d
        every |= d
    out_sets = {lab: set(every) for lab in blocks}
    in_sets = {}
    changed = True
    while changed:
        changed = False
        for b in f.blocks:
            lab = b.label
            if lab not in reach:
                continue
            if lab == f.entry:
                cur = set(f.params)
            else:
                ps = [out_sets[p] for p in preds[lab] if p in reach]
                cur = set.intersection(*ps) if ps else set()
            in_sets[lab] = cur
            new_out = cur | defs[lab]
            if new_out != out_sets[lab]:
                out_sets[lab] = new_out
                changed = True

    out = []
    for b in f.blocks:
        if b.label not in reach:
            continue
        assigned = set(in_sets[b.label])
        for i, ins in enumerate(b.instrs):
            for r in uses(ins):
                if r in every and r not in assigned:
                    out.append(Violation("UseBeforeDef", b.label, i,
                                         f"register {r} may be used before assignment"))
            if dest_width(ins) is not None:
                assigned.add(ins.dst)
    return out


_RAISE_AS = {
    "ArityError": ArityError,
    "UndefinedLabel": UndefinedLabel,
    "WidthMismatch": WidthMismatch,
    "RegionUnknown": RegionUnknown,
}


def check(f: FunctionDef, region_cap: int = DEFAULT_REGION_CAP) -> FunctionDef:
    """Raise the first validation violation as an exception, else return f."""
    vs = validate(f, region_cap)
    if vs:
        raise _RAISE_AS.get(vs[0].rule, IRValidationError)(vs[0])
    return f


# --- parsing ----------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>\#[^\n]*)
  | (?P<int>-?0[xX][0-9a-fA-F]+|-?\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<arrow><-)
  | (?P<punct>[(){}\[\],:=.])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int


def _tokenize(text: str) -> list[_Tok]:
    toks, line, pos = [], 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise IRSyntaxError(line, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind == "nl":
            line += 1
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line))
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k=0) -> _Tok | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def line(self) -> int:
        t = self.peek()
        if t is None:
            return self.toks[-1].line if self.toks else 1
        return t.line

    def next(self) -> _Tok:
        t = self.peek()
        if t is None:
            raise IRSyntaxError(self.line(), "unexpected end of input")
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise IRSyntaxError(t.line, f"expected {text!r}, found {t.text!r}")
        return t

    def ident(self, what="identifier") -> str:
        t = self.next()
        if t.kind != "ident":
            raise IRSyntaxError(t.line, f"expected {what}, found {t.text!r}")
        return t.text

    def integer(self) -> int:
        t = self.next()
        if t.kind != "int":
            raise IRSyntaxError(t.line, f"expected integer, found {t.text!r}")
        return int(t.text, 0)

    def width(self) -> int:
        t = self.next()
        if t.kind != "ident" or not re.fullmatch(r"i\d+", t.text):
            raise IRSyntaxError(t.line, f"expected width like i32, found {t.text!r}")
        w = int(t.text[1:])
        if w not in WIDTHS:
            raise IRSyntaxError(t.line, f"unsupported width {t.text}")
        return w

    def at_end(self) -> bool:
        return self.i >= len(self.toks)

    # func NAME ( params ) regions { blocks }
    def function(self) -> FunctionDef:
        self.expect("func")
        name = self.ident("function name")
        self.expect("(")
        params = []
        if self.peek() and self.peek().text != ")":
            params.append(self.ident("parameter"))
            while self.peek() and self.peek().text == ",":
                self.next()
                params.append(self.ident("parameter"))
        self.expect(")")
        regions = []
        while self.peek() and self.peek().text == "region":
            self.next()
            rname = self.ident("region name")
            regions.append(RegionDecl(rname, self.integer()))
        self.expect("{")
        blocks = []
        while self.peek() and self.peek().text != "}":
            blocks.append(self.block())
        if not blocks:
            raise IRSyntaxError(self.line(), "function body has no blocks")
        self.expect("}")
        return FunctionDef(name, tuple(params), tuple(regions), tuple(blocks))

    def _is_label_start(self) -> bool:
        a, b = self.peek(), self.peek(1)
        return a is not None and b is not None and a.kind == "ident" and b.text == ":"

    def block(self) -> Block:
        if not self._is_label_start():
            raise IRSyntaxError(self.line(), "expected block label")
        label = self.ident("label")
        self.expect(":")
        instrs = []
        while self.peek() and self.peek().text != "}" and not self._is_label_start():
            instrs.append(self.instruction())
        if not instrs:
            raise IRSyntaxError(self.line(), f"block {label} has no instructions")
        return Block(label, tuple(instrs))

    def instruction(self) -> Instruction:
        t = self.peek()
        nxt = self.peek(1)
        if t.kind == "ident" and nxt is not None and nxt.text == "=":
            return self.assignment()
        kw = self.ident("instruction")
        if kw == "store":
            self.expect(".")
            size = self.integer()
            region = self.ident("region")
            self.expect("[")
            addr = self.ident("register")
            self.expect("]")
            self.expect(",")
            return Store(size, region, addr, self.ident("register"))
        if kw == "emit":
            tag = self.integer()
            srcs = []
            while self.peek() and self.peek().text == ",":
                self.next()
                srcs.append(self.ident("register"))
            return Emit(tag, tuple(srcs))
        if kw == "br":
            cond = self.ident("register")
            self.expect(",")
            then = self.ident("label")
            self.expect(",")
            return Br(cond, then, self.ident("label"))
        if kw == "jmp":
            return Jmp(self.ident("label"))
        if kw == "ret":
            return Ret(self.ident("register"))
        if kw == "fault":
            return Fault(self.integer())
        raise IRSyntaxError(t.line, f"unknown instruction {kw!r}")

    def assignment(self) -> Instruction:
        dst = self.ident("register")
        if dst in KEYWORDS:
            raise IRSyntaxError(self.line(), f"{dst!r} is reserved")
        self.expect("=")
        op_tok = self.next()
        op = op_tok.text
        self.expect(".")
        if op == "const":
            w = self.width()
            return Const(dst, w, self.integer() & mask(w))
        if op == "load":
            size = self.integer()
            region = self.ident("region")
            self.expect("[")
            addr = self.ident("register")
            self.expect("]")
            return Load(dst, size, region, addr)
        w = self.width()
        if op in ("sext", "zext", "trunc"):
            self.expect("<-")
            fw = self.width()
            src = self.ident("register")
            if op == "trunc":
                return Trunc(dst, w, fw, src)
            return Extend(op, dst, w, fw, src)
        if op in BINOPS or op in CMPOPS:
            a = self.ident("register")
            self.expect(",")
            b = self.ident("register")
            if op in CMPOPS:
                return Cmp(op, dst, w, a, b)
            return BinOp(op, dst, w, a, b)
        if op in UNOPS:
            return UnOp(op, dst, w, self.ident("register"))
        raise IRSyntaxError(op_tok.line, f"unknown operation {op!r}")


def parse_function(text: str, region_cap: int = DEFAULT_REGION_CAP) -> FunctionDef:
    p = _Parser(text)
    if p.at_end():
        raise IRSyntaxError(1, "empty input")
    f = p.function()
    if not p.at_end():
        raise IRSyntaxError(p.line(), "trailing input after function")
    return check(f, region_cap)


def parse_corpus(text: str, region_cap: int = DEFAULT_REGION_CAP) -> Corpus:
    p = _Parser(text)
    corpus = Corpus()
    while not p.at_end():
        corpus.add(check(p.function(), region_cap))
    return corpus


def load_corpus_dir(path: str | Path, region_cap: int = DEFAULT_REGION_CAP) -> Corpus:
    """Load every ``*.ir`` file in a directory (sorted by file name)."""
    corpus = Corpus()
    for fp in sorted(Path(path).glob("*.ir")):
        for f in parse_corpus(fp.read_text(), region_cap).values():
            corpus.add(f)
    return corpus


# --- printing ---------------------------------------------------------------

def _fmt_int(v: int) -> str:
    return str(v) if v < 1 << 16 else hex(v)


def format_instruction(ins: Instruction) -> str:
    if isinstance(ins, Const):
        return f"{ins.dst} = const.i{ins.width} {_fmt_int(ins.value)}"
    if isinstance(ins, (BinOp, Cmp)):
        return f"{ins.dst} = {ins.op}.i{ins.width} {ins.a}, {ins.b}"
    if isinstance(ins, UnOp):
        return f"{ins.dst} = {ins.op}.i{ins.width} {ins.a}"
    if isinstance(ins, Extend):
        return f"{ins.dst} = {ins.kind}.i{ins.to_width} <- i{ins.from_width} {ins.src}"
    if isinstance(ins, Trunc):
        return f"{ins.dst} = trunc.i{ins.to_width} <- i{ins.from_width} {ins.src}"
    if isinstance(ins, Load):
        return f"{ins.dst} = load.{ins.size} {ins.region}[{ins.addr}]"
    if isinstance(ins, Store):
        return f"store.{ins.size} {ins.region}[{ins.addr}], {ins.value}"
    if isinstance(ins, Emit):
        return "emit " + ", ".join([str(ins.tag), *ins.srcs])
    if isinstance(ins, Br):
        return f"br {ins.cond}, {ins.then}, {ins.orelse}"
    if isinstance(ins, Jmp):
        return f"jmp {ins.label}"
    if isinstance(ins, Ret):
        return f"ret {ins.src}"
    if isinstance(ins, Fault):
        return f"fault {ins.tag}"
    raise TypeError(ins)


def print_function(f: FunctionDef) -> str:
    lines = [f"func {f.name}({', '.join(f.params)})"]
    for r in f.regions:
        lines.append(f"  region {r.name} {r.size}")
    lines.append("{")
    for b in f.blocks:
        lines.append(f"{b.label}:")
        lines.extend("  " + format_instruction(ins) for ins in b.instrs)
    lines.append("}")
    return "\n".join(lines) + "\n"


def print_corpus(functions: Iterable[FunctionDef]) -> str:
    return "\n".join(print_function(f) for f in functions)
