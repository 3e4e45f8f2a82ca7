import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import milp

from topheavy import InputError
from topheavy import bip_solver as bs
from topheavy.bip_solver import EQ, GE, LE, BinaryProgram, Row


def enumerate_best(prog: BinaryProgram):
    best, arg = -np.inf, None
    for bits in itertools.product((0, 1), repeat=prog.n):
        x = np.array(bits)
        if not bs.validate(prog, x):
            v = float(prog.objective @ x)
            if v > best + 1e-12:
                best, arg = v, x
    return best, arg


def random_program(rng, n):
    c = np.round(rng.normal(1.0, 1.0, n), 3)
    rows = []
    w = rng.integers(1, 10, n)
    rows.append(Row(dict(enumerate(w.tolist())), LE, int(w.sum() * rng.uniform(0.2, 0.6)), "knap"))
    for k in range(rng.integers(0, 4)):
        idx = rng.choice(n, size=rng.integers(2, min(n, 6) + 1), replace=False)
        coefs = {int(j): int(rng.integers(-3, 4)) or 1 for j in idx}
        sense = rng.choice([LE, GE, EQ])
        act = sum(coefs.values())
        rhs = int(rng.integers(min(0, act), max(0, act) + 1))
        rows.append(Row(coefs, str(sense), rhs, f"r{k}"))
    if rng.random() < 0.5:
        rows.append(Row({j: 1 for j in range(n)}, LE, int(rng.integers(1, n + 1)), "card"))
    fix = {int(rng.integers(n)): int(rng.integers(2))} if rng.random() < 0.2 else {}
    return BinaryProgram(c, rows, fix)


def test_trivial_examples():
    prog = BinaryProgram(np.array([1.0, 1.0]), [Row({0: 1, 1: 1}, LE, 1)])
    res = bs.solve(prog)
    assert res.status == bs.OPTIMAL and res.objective == 1 and res.assignment.sum() == 1


def test_knapsack_example():
    prog = BinaryProgram(np.array([6.0, 5.0, 4.0]), [Row({0: 3, 1: 2, 2: 2}, LE, 4)])
    for bound in ("lp", "fractional"):
        res = bs.BranchAndBound(prog, bound=bound).solve()
        assert res.objective == 9 and res.assignment.tolist() == [0, 1, 1]


def test_validate_examples():
    prog = BinaryProgram(np.ones(10), [Row({j: 1 for j in range(10)}, EQ, 9, "nine")])
    x = np.array([1] * 9 + [0])
    assert bs.validate(prog, x) == []
    v = bs.validate(prog, np.array([1] * 8 + [0, 0]))
    assert len(v) == 1 and v[0].slack == -1 and v[0].name == "nine"
    mixed = BinaryProgram(np.ones(3), [Row({0: 1, 1: 1}, LE, 1, "le"), Row({2: 1}, EQ, 1, "eq")])
    v = bs.validate(mixed, np.array([1, 1, 1]))
    assert [e.name for e in v] == ["le"]
    with pytest.raises(InputError):
        bs.validate(mixed, np.array([1, 0]))


def test_infeasible():
    prog = BinaryProgram(np.ones(2), [Row({0: 1, 1: 1}, GE, 3)])
    for backend in ("builtin", "highs"):
        res = bs.solve(prog, backend=backend)
        assert res.status == bs.INFEASIBLE and res.assignment is None


def test_bad_inputs():
    with pytest.raises(InputError):
        BinaryProgram(np.array([]))
    with pytest.raises(InputError):
        BinaryProgram(np.ones(2), [Row({5: 1}, LE, 1)])
    with pytest.raises(InputError):
        BinaryProgram(np.ones(2), [Row({0: 1}, "<", 1)])
    with pytest.raises(InputError):
        bs.solve(BinaryProgram(np.ones(2)), backend="cplex")


def test_exactness_against_enumeration():
    rng = np.random.default_rng(0)
    for trial in range(60):
        prog = random_program(rng, int(rng.integers(3, 13)))
        best, _ = enumerate_best(prog)
        for bound in ("lp", "fractional"):
            res = bs.BranchAndBound(prog, bound=bound).solve()
            if best == -np.inf:
                assert res.status == bs.INFEASIBLE
            else:
                assert res.status == bs.OPTIMAL
                assert res.objective == pytest.approx(best, abs=1e-9)
                assert bs.validate(prog, res.assignment) == []


def test_incumbent_trace_nondecreasing_and_deterministic():
    rng = np.random.default_rng(3)
    prog = random_program(rng, 18)
    a = bs.BranchAndBound(prog)
    ra = a.solve()
    b = bs.BranchAndBound(prog)
    rb = b.solve()
    assert all(y >= x for x, y in zip(a.trace, a.trace[1:]))
    assert np.array_equal(ra.assignment, rb.assignment) and ra.nodes == rb.nodes


def test_hints_seed_incumbent_and_pool_is_feasible():
    rng = np.random.default_rng(4)
    prog = random_program(rng, 16)
    res = bs.solve(prog)
    assert all(bs.validate(prog, x) == [] for x in res.pool)
    vals = [float(prog.objective @ x) for x in res.pool]
    assert vals == sorted(vals, reverse=True)
    again = bs.solve(prog, hints=[res.assignment, np.zeros(3)])
    assert again.objective == res.objective
    assert again.nodes <= res.nodes


def test_time_budget_returns_incumbent_status():
    rng = np.random.default_rng(5)
    prog = random_program(rng, 20)
    res = bs.BranchAndBound(prog, time_budget=0.0).solve()
    assert res.status in (bs.TIME_LIMIT, bs.OPTIMAL, bs.INFEASIBLE)


def test_objective_step():
    assert bs.objective_step(np.array([1.0, 2.0, -3.0])) == 1.0
    assert bs.objective_step(np.array([1.25, 0.5])) == 0.01
    assert bs.objective_step(np.array([0.123, 2.5])) == 0.001
    assert bs.objective_step(np.array([np.pi])) == 0.0


def test_builder_and_lp_text():
    b = bs.ProgramBuilder()
    x = b.add_var("x 1", 2.0)
    y = b.add_var("1y", 1.5)
    b.add_row({x: 1, y: 1}, LE, 1, "pick one")
    b.fix(y, 0)
    with pytest.raises(InputError):
        b.add_var("x 1")
    prog = b.build()
    text = bs.to_lp_format(prog)
    assert "Maximize" in text and "Subject To" in text and "Binary" in text
    assert "x_1" in text and "v1y" in text and "pick_one:" in text and "v1y = 0" in text
    assert text.endswith("End\n")


def test_lp_text_roundtrip_through_highs(tmp_path):
    highspy = pytest.importorskip("highspy")
    rng = np.random.default_rng(11)
    prog = random_program(rng, 12)
    path = tmp_path / "p.lp"
    path.write_text(bs.to_lp_format(prog))
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(path))
    h.run()
    ours = bs.solve(prog)
    if ours.status == bs.OPTIMAL:
        assert h.getInfo().objective_function_value == pytest.approx(ours.objective, abs=1e-9)


def test_sample_feasible():
    rng = np.random.default_rng(2)
    for _ in range(20):
        prog = random_program(rng, 10)
        best, _ = enumerate_best(prog)
        x = bs.sample_feasible(prog, rng)
        if best == -np.inf:
            assert x is None
        else:
            assert x is not None and bs.validate(prog, x) == []


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_builtin_matches_highs(seed):
    rng = np.random.default_rng(seed)
    prog = random_program(rng, int(rng.integers(5, 25)))
    a = bs.solve(prog, backend="builtin")
    b = bs.solve(prog, backend="highs")
    assert a.status == b.status
    if a.status == bs.OPTIMAL:
        assert a.objective == pytest.approx(b.objective, abs=1e-7)
