from fractions import Fraction as F

import pytest

from pinball.compiler import CompileOptions, compile_program, step_simulate
from pinball.errors import CompileError, DomainError
from pinball.pda import PdaConfig, PdaProgram, Transition, encode_bits, oracle_run, shipped_program


@pytest.fixture(scope="module")
def flip():
    p = shipped_program("flip")
    return p, compile_program(p)


def test_flip_ten_steps(flip):
    p, m = flip
    rep = step_simulate(m, p.initial, 10)
    assert rep.configs == oracle_run(p, p.initial, 10)
    assert rep.constant_reflections


def test_flip_fifty_steps(flip):
    p, m = flip
    rep = step_simulate(m, p.initial, 50)
    assert rep.configs == oracle_run(p, p.initial, 50)
    assert len(set(rep.reflections)) == 1


def test_period_and_budget_frozen(flip):
    _, m = flip
    assert m.period == F(25231, 200)
    assert m.reflections_per_step == 34


def test_zero_steps_rejected(flip):
    p, m = flip
    with pytest.raises(DomainError):
        step_simulate(m, p.initial, 0)


def _one_state(trans, halting=None, states=("q",), init_a=(1, 0, 1, 1)):
    return PdaProgram("t", list(states), {s: "A" for s in states if s not in (halting or {})}, trans, PdaConfig("q", init_a, (1, 1)), dict(halting or {}))


def test_undefined_transition_rejected():
    p = _one_state({("q", 0): Transition("q", (0,))})
    with pytest.raises(CompileError):
        compile_program(p)


@pytest.mark.parametrize("kappa,eps", [(F(1, 100), F(1, 20)), (F(1, 4), F(1, 2)), (F(1, 100), F(3, 4))])
def test_parameter_bounds_rejected(kappa, eps):
    with pytest.raises(CompileError):
        compile_program(shipped_program("flip"), kappa, eps)


def test_push_zero_program_halves_data_offset():
    # the popped bit goes back, then a 0 on top: net push 0
    p = _one_state({("q", 0): Transition("q", (0, 0)), ("q", 1): Transition("q", (1, 0))})
    m = compile_program(p)
    rep = step_simulate(m, p.initial, 6)
    offs = [encode_bits(c.stack_a) for c in [p.initial] + rep.configs]
    assert all(b == a / 2 for a, b in zip(offs, offs[1:]))


def _halting(verdict):
    # two 0s are consumed, then the 1 sends the machine to the halting state
    t = {("q", 0): Transition("q"), ("q", 1): Transition("h", (1,))}
    return _one_state(t, {"h": verdict}, states=("q", "h"), init_a=(0, 0, 1, 1, 1))


def test_accept_reaches_target():
    p = _halting("accept")
    m = compile_program(p)
    assert m.target is not None
    rep = step_simulate(m, p.initial, 5)
    assert rep.outcome.variant == "hit"


def test_reject_escapes():
    p = _halting("reject")
    m = compile_program(p)
    rep = step_simulate(m, p.initial, 5)
    assert rep.outcome.variant == "escaped"


def test_stack_independence():
    # counter only touches A: B decodes unchanged every step
    p = shipped_program("counter")
    rep = step_simulate(compile_program(p), p.initial, 12)
    assert all(c.stack_b == p.initial.stack_b for c in rep.configs)
    assert rep.configs == oracle_run(p, p.initial, 12)


def test_moving_mode_small_run():
    p = shipped_program("flip")
    m = compile_program(p, eps=F(1, 2), options=CompileOptions(time_mode="moving"))
    rep = step_simulate(m, p.initial, 6)
    assert rep.configs == oracle_run(p, p.initial, 6)
    assert rep.constant_reflections


def test_moving_mode_speed_cap():
    with pytest.raises(CompileError):
        compile_program(shipped_program("flip"), eps=F(1, 15), options=CompileOptions(time_mode="moving"))


def test_ray_mode_small_run():
    p = shipped_program("flip")
    m = compile_program(p, options=CompileOptions(time_mode="ray"))
    rep = step_simulate(m, p.initial, 4)
    assert rep.configs == oracle_run(p, p.initial, 4)
    assert rep.constant_reflections
