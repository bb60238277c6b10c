"""Equivalence of a target outcome and an adapted inner outcome.

``equivalent_concrete`` judges two interpreter outcomes; ``mismatch_condition``
builds the i1 term that holds exactly on the inputs where the corresponding
symbolic outcomes would be judged inequivalent.

Memory is compared through a list of ``MemPair`` correspondences (see
``adapters.memory_pairs``). Only locations written by at least one side are
compared. When no pairs are given, regions correspond by name.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from . import term as T
from .adapters import MemPair, RetExpr, ret_term, ret_value
from .interp import FAULTED, LIMIT, RETURNED, ExecutionOutcome
from .symx import SymOutcome
from .term import Term

STRICT = "strict"
MODULO_TARGET_FAULT = "modulo-target-fault"
FAULT_MODES = (STRICT, MODULO_TARGET_FAULT)
FINAL_STATE = "final-state"
WRITE_SEQUENCE = "write-sequence"
MEMORY_MODES = (FINAL_STATE, WRITE_SEQUENCE)


@dataclass(frozen=True)
class EquivPolicy:
    fault_mode: str = STRICT
    memory_mode: str = FINAL_STATE
    compare_events: bool = True

    def __post_init__(self):
        if self.fault_mode not in FAULT_MODES:
            raise ValueError(f"unknown fault mode {self.fault_mode!r}")
        if self.memory_mode not in MEMORY_MODES:
            raise ValueError(f"unknown memory mode {self.memory_mode!r}")


def status_verdict(t_status: str, i_status: str, p: EquivPolicy) -> bool | None:
    """True/False when statuses alone decide, None when both returned."""
    if t_status == LIMIT or i_status == LIMIT:
        return False
    if t_status == FAULTED:
        return p.fault_mode == MODULO_TARGET_FAULT
    if i_status == FAULTED:
        return False
    return None


def _by_name_pairs(t_regions, i_regions) -> list[MemPair]:
    out = []
    for r, tm in t_regions.items():
        im = i_regions.get(r)
        if im is None:
            continue
        for off in range(min(len(tm), len(im))):
            out.append(MemPair(T.TRUE, r, off, r, off))
    return out


def _live(pairs: Sequence[MemPair]) -> list[MemPair]:
    out = []
    for p in pairs:
        if not (isinstance(p.guard, T.Const) and p.guard.bits == 1):
            raise ValueError("concrete comparison needs unguarded correspondences")
        out.append(p)
    return out


def equivalent_concrete(t: ExecutionOutcome, i: ExecutionOutcome, r: RetExpr = RetExpr(),
                        p: EquivPolicy = EquivPolicy(), pairs: Sequence[MemPair] | None = None,
                        t_init: Mapping[str, bytes] | None = None) -> bool:
    decided = status_verdict(t.status, i.status, p)
    if decided is not None:
        return decided
    if t.return_value.bits != ret_value(r.kind, i.return_value.bits):
        return False
    if p.compare_events and t.events != i.events:
        return False
    if pairs is None:
        pairs = _by_name_pairs(t.final_memory, i.final_memory)
    pairs = _live(pairs)
    if p.memory_mode == WRITE_SEQUENCE:
        return _write_sequences(t.write_log, i.write_log, pairs)
    t_init = t_init or {}
    tw, iw = t.final_writes, i.final_writes
    for q in pairs:
        t_loc = (q.t_region, q.t_off)
        if q.i_region is None:
            if t_loc in tw:
                init = t_init.get(q.t_region, b"")
                before = init[q.t_off] if q.t_off < len(init) else 0
                if tw[t_loc] != before:
                    return False
            continue
        i_loc = (q.i_region, q.i_off)
        if t_loc in tw or i_loc in iw:
            if t.final_memory[q.t_region][q.t_off] != i.final_memory[q.i_region][q.i_off]:
                return False
    return True


def _write_sequences(t_log, i_log, pairs: Sequence[MemPair]) -> bool:
    fwd = {(q.t_region, q.t_off): (q.i_region, q.i_off) for q in pairs if q.i_region is not None}
    inner_locs = set(fwd.values())
    mapped_t = [(fwd[(reg, off)], b) for reg, off, b in t_log if (reg, off) in fwd]
    mapped_i = [((reg, off), b) for reg, off, b in i_log if (reg, off) in inner_locs]
    return mapped_t == mapped_i


def _zext64(x: Term) -> Term:
    return x if x.width == 64 else T.extend("zext", 64, x)


def mismatch_condition(t: SymOutcome, i: SymOutcome | None, r=RetExpr(),
                       p: EquivPolicy = EquivPolicy(), pairs: Sequence[MemPair] | None = None,
                       t_init: Mapping[str, Sequence[Term]] | None = None,
                       i_init: Mapping[str, Sequence[Term]] | None = None) -> Term:
    """i1 term: the pair is inequivalent. ``r`` is a RetExpr or a Term -> Term function."""
    if t.status != RETURNED:
        return T.FALSE if status_verdict(t.status, RETURNED, p) else T.TRUE
    if i is None:
        raise ValueError("inner outcome required when the target returned")
    decided = status_verdict(t.status, i.status, p)
    if decided is not None:
        return T.FALSE if decided else T.TRUE
    adapt = r if callable(r) else (lambda x, k=r.kind: ret_term(k, x))
    diffs = [T.cmp("ne", _zext64(t.return_term), adapt(_zext64(i.return_term)))]
    if p.compare_events:
        ev = _event_mismatch(t.events, i.events)
        if ev is T.TRUE:
            return T.TRUE
        diffs.extend(ev)
    t_init = t_init or {}
    i_init = i_init or {}
    if pairs is None:
        pairs = _by_name_pairs(t_init, i_init)
    if p.memory_mode == WRITE_SEQUENCE:
        diffs.append(_write_sequence_mismatch(t.write_log, i.write_log, _live(pairs)))
    else:
        diffs.extend(_store_mismatch(t, i, pairs, t_init, i_init))
    return T.disj(diffs)


def _event_mismatch(te, ie):
    if len(te) != len(ie):
        return T.TRUE
    out = []
    for (ttag, tops), (itag, iops) in zip(te, ie):
        if ttag != itag or len(tops) != len(iops):
            return T.TRUE
        for a, b in zip(tops, iops):
            if a.width != b.width:
                return T.TRUE
            out.append(T.cmp("ne", a, b))
    return out


def _store_mismatch(t: SymOutcome, i: SymOutcome, pairs, t_init, i_init) -> list[Term]:
    out = []
    ts, is_ = t.final_store, i.final_store
    for q in pairs:
        t_written = ts.get(q.t_region, {})
        tv = t_written.get(q.t_off)
        if q.i_region is None:
            if tv is not None:
                out.append(T.bool_and(q.guard, T.cmp("ne", tv, t_init[q.t_region][q.t_off])))
            continue
        iv = is_.get(q.i_region, {}).get(q.i_off)
        if tv is None and iv is None:
            continue
        if tv is None:
            tv = t_init[q.t_region][q.t_off]
        if iv is None:
            iv = i_init[q.i_region][q.i_off]
        out.append(T.bool_and(q.guard, T.cmp("ne", tv, iv)))
    return out


def _write_sequence_mismatch(t_log, i_log, pairs) -> Term:
    fwd = {(q.t_region, q.t_off): (q.i_region, q.i_off) for q in pairs if q.i_region is not None}
    inner_locs = set(fwd.values())
    mt = [(fwd[(reg, off)], v) for reg, off, v in t_log if (reg, off) in fwd]
    mi = [((reg, off), v) for reg, off, v in i_log if (reg, off) in inner_locs]
    if len(mt) != len(mi) or any(a[0] != b[0] for a, b in zip(mt, mi)):
        return T.TRUE
    return T.disj(T.cmp("ne", a[1], b[1]) for a, b in zip(mt, mi))
