"""DraftKings NHL lineup rules compiled into binary-program rows.

A lineup is nine players: 2-3 centers, 3-4 wingers, 2-3 defensemen and one
goalie (the utility slot is implied by the ranges), at most ``B`` salary, from
at least three teams.  Stacking types layer structural rows on top:

========  =================================================================
type      rows
========  =================================================================
none      feasibility only
type1     goalie stack, one complete line, two lines with >= 2 players
type2     type1 + exactly two defensemen
type3     type1 + only first-power-play defensemen
type4     type3 + exactly three teams, <= 6 players per team
type5     type1 + exactly three teams, <= 6 players per team
========  =================================================================
"""
from __future__ import annotations

import csv
import enum
import io
import itertools
import logging
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import portfolio_ip
from .bip_solver import EQ, GE, LE, ProgramBuilder, Row
from .exceptions import InputError

logger = logging.getLogger(__name__)

POSITIONS = ("C", "W", "D", "G")
SKATERS = ("C", "W", "D")
ROSTER_SIZE = 9
BUDGET = 50_000
POSITION_RANGES = {"C": (2, 3), "W": (3, 4), "D": (2, 3), "G": (1, 1)}
MIN_TEAMS = 3
GOALIE_STACK_CAP = 6
TEAM_CAP = 6
DEFAULT_GAMMA = 7
# branching order: team choices, then complete lines, then partial lines
PRIORITY_TEAM, PRIORITY_LINE, PRIORITY_PART = 3, 2, 1
SUBSET_ROW_MAX = 4
SLATE_COLUMNS = ("player_id", "name", "position", "team", "opponent", "line", "pp1", "salary", "proj_mean")
EXPORT_SLOTS = ("C", "C", "W", "W", "W", "D", "D", "G", "UTIL")


class StackingType(str, enum.Enum):
    NONE = "none"
    TYPE1 = "type1"
    TYPE2 = "type2"
    TYPE3 = "type3"
    TYPE4 = "type4"
    TYPE5 = "type5"

    @classmethod
    def parse(cls, value) -> "StackingType":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace(" ", "").replace("_", "")
        aliases = {"0": "none", "nostacking": "none", "type0": "none"}
        key = aliases.get(key, key)
        if key.isdigit():
            key = f"type{key}"
        try:
            return cls(key)
        except ValueError:
            raise InputError(f"unknown stacking type {value!r}", "stacking") from None

    @property
    def goalie(self):
        return self is not StackingType.NONE

    lines = goalie

    @property
    def two_defense(self):
        return self is StackingType.TYPE2

    @property
    def pp_defense(self):
        return self in (StackingType.TYPE3, StackingType.TYPE4)

    @property
    def three_teams(self):
        return self in (StackingType.TYPE4, StackingType.TYPE5)


@dataclass(frozen=True)
class HockeyPlayer:
    player_id: str
    name: str
    position: str
    team: str
    opponent: str
    line: int | None
    pp1: bool
    salary: int
    proj_mean: float

    @property
    def is_skater(self):
        return self.position in SKATERS


@dataclass
class HockeySlate:
    players: list[HockeyPlayer]
    budget: int = BUDGET
    games: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        ids = [p.player_id for p in self.players]
        if len(set(ids)) != len(ids):
            raise InputError("player ids must be unique", "player_id")
        opp: dict[str, set] = defaultdict(set)
        for p in self.players:
            if p.position not in POSITIONS:
                raise InputError(f"bad position {p.position!r}", p.player_id)
            if p.salary <= 0:
                raise InputError("salary must be positive", p.player_id)
            if not p.opponent:
                raise InputError("opponent required", p.player_id)
            if p.team == p.opponent:
                raise InputError("team cannot oppose itself", p.player_id)
            opp[p.team].add(p.opponent)
        for team, opps in opp.items():
            if len(opps) != 1:
                raise InputError(f"team plays more than one opponent: {sorted(opps)}", team)
            (o,) = opps
            if o in opp and opp[o] != {team}:
                raise InputError(f"inconsistent game pairing {team}/{o}", team)
        games = {tuple(sorted((t, next(iter(o))))) for t, o in opp.items()}
        self.games = sorted(games)
        self._index = {p.player_id: k for k, p in enumerate(self.players)}

    def __len__(self):
        return len(self.players)

    @property
    def teams(self) -> list[str]:
        return sorted({p.team for p in self.players})

    def index(self, pid) -> int:
        try:
            return self._index[str(pid)]
        except KeyError:
            raise InputError(f"unknown player {pid!r}", "player_id") from None

    def lines(self) -> dict[tuple[str, int], list[int]]:
        """Offensive lines keyed by ``(team, line)``; values are player indices."""
        out: dict[tuple[str, int], list[int]] = defaultdict(list)
        for k, p in enumerate(self.players):
            if p.position in ("C", "W") and p.line is not None:
                out[(p.team, p.line)].append(k)
        return dict(sorted(out.items()))

    def means(self) -> np.ndarray:
        return np.array([p.proj_mean for p in self.players])

    def pool(self) -> portfolio_ip.ResourcePool:
        return portfolio_ip.ResourcePool([p.player_id for p in self.players], self.means())


def _parse_bool(s: str) -> bool:
    return s.strip().lower() in ("1", "true", "yes", "y", "t")


def read_slate(path_or_buffer, budget: int = BUDGET) -> HockeySlate:
    """Read a slate CSV; rows without a projection are dropped with a warning."""
    if isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__"):
        with open(path_or_buffer, newline="", encoding="utf-8") as fh:
            return read_slate(fh, budget)
    reader = csv.DictReader(path_or_buffer)
    missing = [c for c in SLATE_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise InputError(f"missing columns {missing}", "slate")
    players = []
    for n, rec in enumerate(reader, start=2):
        if not rec["proj_mean"].strip():
            logger.warning("dropping %s (%s): no projection", rec["player_id"], rec["name"])
            continue
        try:
            line = rec["line"].strip()
            players.append(HockeyPlayer(
                player_id=rec["player_id"].strip(),
                name=rec["name"].strip(),
                position=rec["position"].strip().upper(),
                team=rec["team"].strip(),
                opponent=rec["opponent"].strip(),
                line=int(line) if line else None,
                pp1=_parse_bool(rec["pp1"]),
                salary=int(rec["salary"]),
                proj_mean=float(rec["proj_mean"]),
            ))
        except ValueError as exc:
            raise InputError(str(exc), f"slate line {n}") from None
    return HockeySlate(players, budget)


def write_slate(slate: HockeySlate, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SLATE_COLUMNS)
    for p in slate.players:
        w.writerow([p.player_id, p.name, p.position, p.team, p.opponent,
                    "" if p.line is None else p.line, int(p.pp1), p.salary, repr(p.proj_mean)])


# ---------------------------------------------------------------------------
# row compilation; player k of the slate is variable k of the builder


def _safe(s: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]", "_", s)


def add_player_vars(slate: HockeySlate, b: ProgramBuilder) -> None:
    if b.n != 0:
        raise InputError("player variables must come first", "builder")
    for k, p in enumerate(slate.players):
        b.add_var(f"x_{k}_{_safe(p.player_id)}", p.proj_mean)


def _new_rows(b: ProgramBuilder, start: int) -> list[Row]:
    return b.rows[start:]


def compile_feasibility(slate: HockeySlate, b: ProgramBuilder) -> list[Row]:
    """Budget, roster size, position ranges and the three-team rule."""
    if len(slate.teams) < MIN_TEAMS:
        raise InputError(f"slate has {len(slate.teams)} teams; need {MIN_TEAMS}", "slate")
    start = len(b.rows)
    P = len(slate)
    b.add_row({k: p.salary for k, p in enumerate(slate.players)}, LE, slate.budget, "budget")
    if not any(r.name == "size" for r in b.rows):
        b.add_row({k: 1 for k in range(P)}, EQ, ROSTER_SIZE, "size")
    for pos, (lo, hi) in POSITION_RANGES.items():
        members = {k: 1 for k, p in enumerate(slate.players) if p.position == pos}
        if lo == hi:
            b.add_row(members, EQ, lo, f"pos_{pos}")
        else:
            b.add_row(members, GE, lo, f"pos_{pos}_min")
            b.add_row(members, LE, hi, f"pos_{pos}_max")
    tvars = []
    for team in slate.teams:
        t = b.add_var(f"t_{_safe(team)}", priority=PRIORITY_TEAM)
        tvars.append(t)
        row = {t: 1}
        for k, p in enumerate(slate.players):
            if p.team == team:
                row[k] = -1
        b.add_row(row, LE, 0, f"team_link_{_safe(team)}")
    b.add_row({t: 1 for t in tvars}, GE, MIN_TEAMS, "min_teams")
    return _new_rows(b, start)


def opposing_skaters(slate: HockeySlate, goalie: int) -> list[int]:
    g = slate.players[goalie]
    return [k for k, p in enumerate(slate.players) if p.is_skater and p.team == g.opponent]


def compile_goalie_stack(slate: HockeySlate, b: ProgramBuilder) -> list[Row]:
    """``6 x_g + sum(opposing skaters) <= 6`` for every goalie."""
    start = len(b.rows)
    for k, p in enumerate(slate.players):
        if p.position != "G":
            continue
        row = {k: GOALIE_STACK_CAP}
        for l in opposing_skaters(slate, k):
            row[l] = 1
        b.add_row(row, LE, GOALIE_STACK_CAP, f"goalie_{_safe(p.player_id)}")
    return _new_rows(b, start)


def compile_line_stacks(slate: HockeySlate, b: ProgramBuilder) -> list[Row]:
    """At least one complete line and at least two lines with two or more players.

    Besides ``3v <= sum x`` and ``2w <= sum x`` we add the subset rows these
    imply for 0-1 values (``v`` needs all but two members missing at most,
    ``w`` all but one). They cut off no roster but tighten the relaxation.
    """
    start = len(b.rows)
    vs, ws = [], []
    for (team, line), members in slate.lines().items():
        tag = f"{_safe(team)}_{line}"
        v = b.add_var(f"v_{tag}", priority=PRIORITY_LINE)
        w = b.add_var(f"w_{tag}", priority=PRIORITY_PART)
        vs.append(v)
        ws.append(w)
        b.add_row({v: 3, **{k: -1 for k in members}}, LE, 0, f"full_line_{tag}")
        b.add_row({w: 2, **{k: -1 for k in members}}, LE, 0, f"part_line_{tag}")
        if 3 <= len(members) <= SUBSET_ROW_MAX:
            for i, sub in enumerate(itertools.combinations(members, len(members) - 2)):
                b.add_row({v: 1, **{k: -1 for k in sub}}, LE, 0, f"full_line_{tag}_s{i}")
        if 2 <= len(members) <= SUBSET_ROW_MAX:
            for i, sub in enumerate(itertools.combinations(members, len(members) - 1)):
                b.add_row({w: 1, **{k: -1 for k in sub}}, LE, 0, f"part_line_{tag}_s{i}")
    b.add_row({v: 1 for v in vs}, GE, 1, "one_full_line")
    b.add_row({w: 1 for w in ws}, GE, 2, "two_part_lines")
    return _new_rows(b, start)


def compile_defense_stack(slate: HockeySlate, b: ProgramBuilder) -> list[Row]:
    """Zero every defenseman who is not on a first power-play unit."""
    start = len(b.rows)
    for k, p in enumerate(slate.players):
        if p.position == "D" and not p.pp1:
            b.add_row({k: 1}, EQ, 0, f"pp_{_safe(p.player_id)}")
    return _new_rows(b, start)


def compile_three_teams(slate: HockeySlate, b: ProgramBuilder) -> list[Row]:
    start = len(b.rows)
    tvars = {team: b.var(f"t_{_safe(team)}") for team in slate.teams}
    b.add_row({t: 1 for t in tvars.values()}, EQ, MIN_TEAMS, "exact_teams")
    for team, t in tvars.items():
        members = [k for k, p in enumerate(slate.players) if p.team == team]
        row = {k: 1 for k in members}
        row[t] = -TEAM_CAP
        b.add_row(row, LE, 0, f"team_cap_{_safe(team)}")
        # implied by the cap row for 0-1 values; tightens the relaxation
        for k in members:
            b.add_row({k: 1, t: -1}, LE, 0, f"team_member_{_safe(team)}_{k}")
    return _new_rows(b, start)


def compile_stacking(slate: HockeySlate, stacking, b: ProgramBuilder) -> list[Row]:
    """Stacking rows for ``stacking``; feasibility rows must already be present."""
    st = StackingType.parse(stacking)
    start = len(b.rows)
    if st.goalie:
        compile_goalie_stack(slate, b)
    if st.lines:
        compile_line_stacks(slate, b)
    if st.two_defense:
        b.add_row({k: 1 for k, p in enumerate(slate.players) if p.position == "D"}, EQ, 2, "two_defense")
    if st.pp_defense:
        compile_defense_stack(slate, b)
    if st.three_teams:
        compile_three_teams(slate, b)
    return _new_rows(b, start)


def compile_overlap(slate: HockeySlate, prior_lineups, gamma) -> list[Row]:
    """One ``shared players <= gamma`` row per earlier lineup."""
    if not 0 <= gamma <= ROSTER_SIZE:
        raise InputError(f"gamma must lie in [0, {ROSTER_SIZE}]", "gamma")
    rows = []
    for l, lineup in enumerate(prior_lineups):
        rows.append(Row({slate.index(pid): 1.0 for pid in lineup}, LE, float(gamma), f"overlap_{l}"))
    return rows


class HockeyRules:
    """Portfolio plugin: feasibility plus the rows of one stacking type."""

    def __init__(self, slate: HockeySlate, stacking=StackingType.NONE):
        self.slate = slate
        self.stacking = StackingType.parse(stacking)

    def compile(self, b: ProgramBuilder) -> None:
        compile_feasibility(self.slate, b)
        compile_stacking(self.slate, self.stacking, b)

    def program(self):
        b = ProgramBuilder()
        add_player_vars(self.slate, b)
        self.compile(b)
        return b.build()


def aux_assignment(slate: HockeySlate, program, lineup) -> np.ndarray:
    """Full 0-1 assignment (players plus auxiliaries) implied by a roster."""
    names = program.names
    x = np.zeros(program.n, dtype=int)
    chosen = [slate.index(pid) for pid in lineup]
    x[chosen] = 1
    teams = {slate.players[k].team for k in chosen}
    counts = defaultdict(int)
    for k in chosen:
        p = slate.players[k]
        if p.position in ("C", "W") and p.line is not None:
            counts[(p.team, p.line)] += 1
    for j, name in enumerate(names):
        if name.startswith("t_"):
            x[j] = int(any(name == f"t_{_safe(t)}" for t in teams))
    for (team, line) in slate.lines():
        tag = f"{_safe(team)}_{line}"
        c = counts.get((team, line), 0)
        if f"v_{tag}" in names:
            x[names.index(f"v_{tag}")] = int(c >= 3)
            x[names.index(f"w_{tag}")] = int(c >= 2)
    return x


def check_lineup(slate: HockeySlate, lineup, stacking=StackingType.NONE, prior=(), gamma=ROSTER_SIZE) -> list[str]:
    """Check a roster directly against the rules; returns violation messages.

    Independent of the row compilation: every rule is evaluated from the
    roster itself.
    """
    st = StackingType.parse(stacking)
    errs = []
    ids = list(lineup)
    if len(set(ids)) != len(ids):
        errs.append("duplicate players")
    ps = [slate.players[slate.index(pid)] for pid in set(ids)]
    if len(ps) != ROSTER_SIZE:
        errs.append(f"roster size {len(ps)} != {ROSTER_SIZE}")
    salary = sum(p.salary for p in ps)
    if salary > slate.budget:
        errs.append(f"salary {salary} > {slate.budget}")
    pos = defaultdict(int)
    for p in ps:
        pos[p.position] += 1
    for name, (lo, hi) in POSITION_RANGES.items():
        if not lo <= pos[name] <= hi:
            errs.append(f"{pos[name]} {name} outside [{lo}, {hi}]")
    teams = defaultdict(int)
    for p in ps:
        teams[p.team] += 1
    if len(teams) < MIN_TEAMS:
        errs.append(f"{len(teams)} teams < {MIN_TEAMS}")
    if st.goalie:
        for g in (p for p in ps if p.position == "G"):
            opp = [p for p in ps if p.is_skater and p.team == g.opponent]
            if opp:
                errs.append(f"goalie {g.player_id} faces {len(opp)} rostered skaters")
        # rows also bind for goalies left out of the lineup
        for g in slate.players:
            if g.position == "G":
                n = sum(1 for p in ps if p.is_skater and p.team == g.opponent)
                if n > GOALIE_STACK_CAP:
                    errs.append(f"{n} skaters opposing goalie {g.player_id} > {GOALIE_STACK_CAP}")
    if st.lines:
        counts = defaultdict(int)
        for p in ps:
            if p.position in ("C", "W") and p.line is not None:
                counts[(p.team, p.line)] += 1
        line_sizes = {key: len(m) for key, m in slate.lines().items()}
        full = sum(1 for key, c in counts.items() if c >= 3 and line_sizes[key] >= 3)
        part = sum(1 for c in counts.values() if c >= 2)
        if full < 1:
            errs.append("no complete line")
        if part < 2:
            errs.append(f"{part} lines with two or more players < 2")
    if st.two_defense and pos["D"] != 2:
        errs.append(f"{pos['D']} defensemen != 2")
    if st.pp_defense:
        for p in ps:
            if p.position == "D" and not p.pp1:
                errs.append(f"defenseman {p.player_id} not on first power play")
    if st.three_teams:
        if len(teams) != MIN_TEAMS:
            errs.append(f"{len(teams)} teams != {MIN_TEAMS}")
        for t, c in teams.items():
            if c > TEAM_CAP:
                errs.append(f"{c} players from {t} > {TEAM_CAP}")
    mine = set(ids)
    for l, other in enumerate(prior):
        shared = len(mine & set(other))
        if shared > gamma:
            errs.append(f"overlap {shared} with lineup {l} > {gamma}")
    return errs


@dataclass
class HockeyPortfolio:
    lineups: list[tuple[str, ...]]
    objectives: list[float]
    statuses: list[str]
    notes: list[str]

    def __len__(self):
        return len(self.lineups)


def build_hockey_portfolio(slate: HockeySlate, stacking=StackingType.TYPE4, gamma=DEFAULT_GAMMA,
                           M: int = 100, time_budget: float = 60.0, backend=None) -> HockeyPortfolio:
    """Greedy lineups maximizing projected points under the chosen stacking.

    ``time_budget`` applies to each lineup's integer program.
    """
    if not 0 <= gamma <= ROSTER_SIZE:
        raise InputError(f"gamma must lie in [0, {ROSTER_SIZE}]", "gamma")
    config = portfolio_ip.GreedyIPConfig(
        M=M, K=ROSTER_SIZE, epsilon=None, gamma=gamma, time_budget=time_budget,
        covariance="overlap", forbid_duplicates=True, backend=backend,
    )
    res = portfolio_ip.build_portfolio(slate.pool(), config, HockeyRules(slate, stacking))
    return HockeyPortfolio(
        [e.resources for e in res.entries],
        [e.objective for e in res.entries],
        [e.status for e in res.entries],
        list(res.notes),
    )


def export_lineups(slate: HockeySlate, lineups, fh) -> None:
    """Write lineups in site upload shape ``C,C,W,W,W,D,D,G,UTIL``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(EXPORT_SLOTS)
    for lineup in lineups:
        w.writerow(upload_row(slate, lineup))


def upload_row(slate: HockeySlate, lineup) -> list[str]:
    by_pos = defaultdict(list)
    for pid in sorted(lineup, key=slate.index):
        by_pos[slate.players[slate.index(pid)].position].append(pid)
    need = {"C": 2, "W": 3, "D": 2, "G": 1}
    row, util = [], []
    for pos in ("C", "W", "D", "G"):
        got = by_pos[pos]
        if len(got) < need[pos]:
            raise InputError(f"lineup lacks {pos}", "lineup")
        util += got[need[pos]:]
    for slot in EXPORT_SLOTS[:-1]:
        row.append(by_pos[slot].pop(0))
    if len(util) != 1:
        raise InputError("lineup does not fill exactly one utility slot", "lineup")
    return row + util


def read_lineups(fh) -> list[tuple[str, ...]]:
    reader = csv.reader(fh)
    header = next(reader, None)
    return [tuple(r) for r in reader if r]


class HockeyLineupOptimizer(BaseEstimator):
    """Estimator-style front end: ``fit(slate)`` builds ``lineups_``."""

    def __init__(self, stacking="type4", gamma=DEFAULT_GAMMA, n_lineups=100, time_budget=60.0, backend=None):
        self.stacking = stacking
        self.gamma = gamma
        self.n_lineups = n_lineups
        self.time_budget = time_budget
        self.backend = backend

    def fit(self, slate: HockeySlate, y=None):
        self.portfolio_ = build_hockey_portfolio(
            slate, self.stacking, self.gamma, self.n_lineups, self.time_budget, self.backend
        )
        self.lineups_ = self.portfolio_.lineups
        return self

    def transform(self, slate: HockeySlate):
        if not hasattr(self, "lineups_"):
            from sklearn.exceptions import NotFittedError
            raise NotFittedError("HockeyLineupOptimizer is not fitted")
        out = np.zeros((len(self.lineups_), len(slate)), dtype=int)
        for i, lineup in enumerate(self.lineups_):
            out[i, [slate.index(p) for p in lineup]] = 1
        return out
