import io
import itertools

import numpy as np
import pytest

from topheavy import InputError, baseball, bip_solver as bs, synthetic
from topheavy.baseball import BaseballPlayer, BaseballSlate, longest_cyclic_run


def program_for(slate, prior=(), gamma=10, stacking=True):
    b = bs.ProgramBuilder()
    baseball.add_player_vars(slate, b)
    baseball.BaseballRules(slate, stacking).compile(b)
    b.rows += baseball.compile_overlap(slate, prior, gamma)
    return b.build()


def row_check(slate, lineup, prior=(), gamma=10, stacking=True):
    prog = program_for(slate, prior, gamma, stacking)
    return bs.validate(prog, baseball.aux_assignment(slate, prog, lineup))


def pick(slate, team, slots):
    return [p.player_id for p in slate.players if p.team == team and p.batting_slot in slots]


def pitcher(slate, team):
    return next(p.player_id for p in slate.players if p.team == team and p.position == "P")


def fill(slate, base, exclude_teams=()):
    """Complete ``base`` to a legal roster shape from other teams' hitters."""
    have = [slate.players[slate.index(p)] for p in base]
    need = dict(baseball.POSITION_COUNTS)
    for p in have:
        need[p.position] -= 1
    out = list(base)
    for p in sorted(slate.players, key=lambda p: p.salary):
        if p.team in exclude_teams or p.player_id in out:
            continue
        if need.get(p.position, 0) > 0:
            out.append(p.player_id)
            need[p.position] -= 1
    return out


@pytest.fixture(scope="module")
def slate():
    return synthetic.baseball_slate(4, seed=3)


def test_longest_cyclic_run():
    assert longest_cyclic_run([8, 9, 1, 2, 3]) == 5
    assert longest_cyclic_run([1, 2, 3, 4, 6]) == 4
    assert longest_cyclic_run(range(1, 10)) == 9
    assert longest_cyclic_run([]) == 0


def test_six_hitters_one_team(slate):
    lineup = pick(slate, "H00", range(1, 7))
    lineup = fill(slate, lineup + [pitcher(slate, "H01"), pitcher(slate, "A01")], ("H00",))
    errs = baseball.check_lineup(slate, lineup, stacking=False)
    assert any("hitters from H00" in e for e in errs)
    assert any(r.name.startswith("hitter_cap") for r in row_check(slate, lineup, stacking=False))


def test_one_game_only():
    s = synthetic.baseball_slate(2, seed=1)
    team, opp = "H00", "A00"
    ps = [p for p in s.players if p.team in (team, opp)]
    # any roster drawn from one game breaks the two-game rule
    lineup = [pitcher(s, team), pitcher(s, opp)]
    need = dict(baseball.POSITION_COUNTS, P=0)
    for p in ps:
        if p.is_hitter and need[p.position] > 0:
            lineup.append(p.player_id)
            need[p.position] -= 1
    errs = baseball.check_lineup(s, lineup, stacking=False)
    assert any("games" in e for e in errs)
    assert any(r.name == "min_games" for r in row_check(s, lineup, stacking=False))


def test_pitcher_examples(slate):
    base = pick(slate, "H00", [8, 9, 1, 2, 3])
    facing = fill(slate, base + [pitcher(slate, "A00"), pitcher(slate, "H01")], ("H00", "A00", "A01"))
    # A00's pitcher faces the H00 hitters
    assert any("faces" in e for e in baseball.check_lineup(slate, facing))
    assert any(r.name.startswith("pitcher_") for r in row_check(slate, facing))
    clear = fill(slate, base + [pitcher(slate, "H01"), pitcher(slate, "A01")], ("H00", "A00", "H01", "A01"))
    assert not any("faces" in e for e in baseball.check_lineup(slate, clear))
    assert not any(r.name.startswith("pitcher_") for r in row_check(slate, clear))


def test_cyclic_window_examples(slate):
    base = pick(slate, "H00", [8, 9, 1, 2, 3])
    lu = fill(slate, base + [pitcher(slate, "H01"), pitcher(slate, "A01")], ("H00", "A00", "H01", "A01"))
    assert not any("run" in e for e in baseball.check_lineup(slate, lu))
    assert not any(r.name == "one_window" for r in row_check(slate, lu))
    base4 = pick(slate, "H00", [1, 2, 3, 4, 6])
    lu4 = fill(slate, base4 + [pitcher(slate, "H01"), pitcher(slate, "A01")], ("H00", "A00", "H01", "A01"))
    assert any("run 4" in e for e in baseball.check_lineup(slate, lu4))
    assert any(r.name == "one_window" for r in row_check(slate, lu4))


def test_window_and_cap_together(slate):
    # five consecutive from one team is exactly the per-team hitter cap
    prog = program_for(slate)
    res = bs.solve(prog)
    lu = [slate.players[k].player_id for k in np.flatnonzero(res.assignment[:len(slate)])]
    assert baseball.check_lineup(slate, lu) == []
    hs = [slate.players[slate.index(p)] for p in lu if slate.players[slate.index(p)].is_hitter]
    assert max(sum(h.team == t for h in hs) for t in {h.team for h in hs}) == 5


def three_team_slate():
    rng = np.random.default_rng(4)
    field = ("SS", "2B", "OF", "1B", "3B", "OF", "C", "OF", "OF")
    ps = []
    for team, opp in (("A", "B"), ("B", "A"), ("C", "D")):
        for slot, pos in enumerate(field, start=1):
            ps.append(BaseballPlayer(f"{team}{slot}", f"{team}{slot}", pos, team, opp, slot,
                                     int(rng.integers(25, 60)) * 100, round(float(rng.uniform(3, 10)), 3)))
        ps.append(BaseballPlayer(f"{team}P", f"{team}P", "P", team, opp, None,
                                 int(rng.integers(70, 110)) * 100, round(float(rng.uniform(10, 20)), 3)))
    return BaseballSlate(ps)


def enumerate_best(slate):
    by = {pos: [k for k, p in enumerate(slate.players) if p.position == pos] for pos in baseball.POSITION_COUNTS}
    cands = []
    singles = [by[pos] for pos in ("C", "1B", "2B", "3B", "SS")]
    for ps in itertools.combinations(by["P"], 2):
        for one in itertools.product(*singles):
            for of in itertools.combinations(by["OF"], 3):
                ks = ps + one + of
                if sum(slate.players[k].salary for k in ks) <= slate.budget:
                    cands.append((sum(slate.players[k].proj_mean for k in ks), ks))
    cands.sort(key=lambda t: -t[0])
    for v, ks in cands:
        if not baseball.check_lineup(slate, [slate.players[k].player_id for k in ks]):
            return v
    return -np.inf


def test_single_lineup_matches_enumeration():
    s = three_team_slate()
    best = enumerate_best(s)
    port = baseball.build_baseball_portfolio(s, gamma=6, M=1)
    assert port.objectives[0] == pytest.approx(best, abs=1e-9)


def test_second_lineup_overlap(slate):
    port = baseball.build_baseball_portfolio(slate, gamma=6, M=2)
    assert len(port) == 2
    assert len(set(port.lineups[0]) & set(port.lineups[1])) <= 6
    for i, lu in enumerate(port.lineups):
        assert baseball.check_lineup(slate, lu, True, port.lineups[:i], 6) == []


def test_cross_solver(slate):
    for gamma, prior in ((10, []), (6, [pick(slate, "H00", range(1, 6)) + pick(slate, "H01", range(1, 6))])):
        prog = program_for(slate, prior, gamma)
        a = bs.solve(prog)
        b = bs.solve(prog, backend="highs")
        assert a.objective == pytest.approx(b.objective, abs=1e-6)


def test_random_feasible_points_pass_independent_check(slate):
    rng = np.random.default_rng(2)
    prior = []
    for _ in range(15):
        x = bs.sample_feasible(program_for(slate, prior, 6), rng)
        assert x is not None
        lu = [slate.players[k].player_id for k in np.flatnonzero(x[:len(slate)])]
        assert baseball.check_lineup(slate, lu, True, prior, 6) == []
        prior.append(lu)


def test_slate_validation_and_io(slate):
    buf = io.StringIO()
    baseball.write_slate(slate, buf)
    back = baseball.read_slate(io.StringIO(buf.getvalue()))
    assert back.players == slate.players
    h = slate.players[0]
    with pytest.raises(InputError):
        BaseballSlate([h, BaseballPlayer("x", "x", "C", h.team, h.opponent, h.batting_slot, 3000, 1.0)])
    with pytest.raises(InputError):
        BaseballSlate([BaseballPlayer("x", "x", "P", "A", "B", 3, 3000, 1.0)])
    with pytest.raises(InputError):
        BaseballSlate([BaseballPlayer("x", "x", "C", "A", "B", None, 3000, 1.0)])


def test_export_and_estimator(slate):
    est = baseball.BaseballLineupOptimizer(6, 2)
    X = est.fit(slate).transform(slate)
    assert X.shape == (2, len(slate)) and np.all(X.sum(axis=1) == 10)
    buf = io.StringIO()
    baseball.export_lineups(slate, est.lineups_, buf)
    assert buf.getvalue().splitlines()[0] == "P,P,C,1B,2B,3B,SS,OF,OF,OF"
