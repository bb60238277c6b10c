import random

import pytest

from adaptsynth import library
from adaptsynth.cegis import CegisConfig
from adaptsynth.equiv import MODULO_TARGET_FAULT, EquivPolicy


@pytest.fixture
def clamp_pair():
    return library.get("clamp_target"), library.get("clamp_reference")


@pytest.fixture
def rng():
    return random.Random(1234)


def quick_cfg(backend="symbolic", **kw):
    kw.setdefault("timeout_secs", 120)
    return CegisConfig(backend=backend, **kw)


def modulo_cfg(backend="symbolic", **kw):
    return quick_cfg(backend, policy=EquivPolicy(MODULO_TARGET_FAULT), **kw)


def checked_synthesize(target, inner, fam, backend="symbolic", cfg=None):
    """synthesize() with the loop invariants asserted after every iteration."""
    from adaptsynth.cegis import concrete_equivalent, synthesize

    cfg = cfg or quick_cfg(backend)
    seen_lengths = []

    def on_iteration(state):
        n = len(state.tests)
        assert not seen_lengths or n == seen_lengths[-1] + 1
        assert len(set(state.tests)) == n
        for inp in state.tests:
            assert concrete_equivalent(target, inner, state.candidate, inp, cfg.policy, cfg.step_cap)
        seen_lengths.append(n)

    res = synthesize(target, inner, fam, backend, cfg, on_iteration=on_iteration)
    assert res.state.stats.replay_counterexamples == 0
    if res.adapted:
        for inp in res.trail:
            assert concrete_equivalent(target, inner, res.adapter, inp, cfg.policy, cfg.step_cap)
    return res


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
