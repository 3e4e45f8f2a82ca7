"""DraftKings MLB lineup rules compiled into binary-program rows.

Ten players: two pitchers, one each of C/1B/2B/3B/SS and three outfielders,
under the salary cap, drawn from at least two games, with at most five
hitters from any team. The portfolio always adds the pitcher exclusion and
the five-consecutive-batters stack (batting orders wrap, so 8-9-1-2-3 counts).
"""
from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import portfolio_ip
from .bip_solver import EQ, GE, LE, ProgramBuilder, Row
from .exceptions import InputError
from .hockey import _new_rows, _safe

logger = logging.getLogger(__name__)

POSITION_COUNTS = {"P": 2, "C": 1, "1B": 1, "2B": 1, "3B": 1, "SS": 1, "OF": 3}
ROSTER_SIZE = 10
BUDGET = 50_000
HITTER_CAP = 5
MIN_GAMES = 2
PITCHER_CAP = 8
WINDOW = 5
ORDER_LEN = 9
DEFAULT_GAMMA = 6
# branch on the stacked window before single players
PRIORITY_WINDOW = 2
SLATE_COLUMNS = ("player_id", "name", "position", "team", "opponent", "batting_slot", "salary", "proj_mean")
EXPORT_SLOTS = ("P", "P", "C", "1B", "2B", "3B", "SS", "OF", "OF", "OF")


@dataclass(frozen=True)
class BaseballPlayer:
    player_id: str
    name: str
    position: str
    team: str
    opponent: str
    batting_slot: int | None
    salary: int
    proj_mean: float

    @property
    def is_hitter(self):
        return self.position != "P"


@dataclass
class BaseballSlate:
    players: list[BaseballPlayer]
    budget: int = BUDGET
    games: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        ids = [p.player_id for p in self.players]
        if len(set(ids)) != len(ids):
            raise InputError("player ids must be unique", "player_id")
        opp: dict[str, set] = defaultdict(set)
        slots: dict[str, set] = defaultdict(set)
        for p in self.players:
            if p.position not in POSITION_COUNTS:
                raise InputError(f"bad position {p.position!r}", p.player_id)
            if p.salary <= 0:
                raise InputError("salary must be positive", p.player_id)
            if not p.opponent or p.team == p.opponent:
                raise InputError("a distinct opponent is required", p.player_id)
            if p.is_hitter:
                if p.batting_slot is None or not 1 <= p.batting_slot <= ORDER_LEN:
                    raise InputError("hitters need a batting slot in 1..9", p.player_id)
                if p.batting_slot in slots[p.team]:
                    raise InputError(f"batting slot {p.batting_slot} used twice", p.team)
                slots[p.team].add(p.batting_slot)
            elif p.batting_slot is not None:
                raise InputError("pitchers carry no batting slot", p.player_id)
            opp[p.team].add(p.opponent)
        for team, opps in opp.items():
            if len(opps) != 1:
                raise InputError(f"team plays more than one opponent: {sorted(opps)}", team)
            (o,) = opps
            if o in opp and opp[o] != {team}:
                raise InputError(f"inconsistent game pairing {team}/{o}", team)
        self.games = sorted({tuple(sorted((t, next(iter(o))))) for t, o in opp.items()})
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

    def game_of(self, k: int) -> tuple[str, str]:
        p = self.players[k]
        return tuple(sorted((p.team, p.opponent)))

    def windows(self) -> dict[tuple[str, int], list[int]]:
        """Cyclic 5-slot batting windows keyed by ``(team, first slot)``.

        Windows missing a batter cannot be completed and are left out.
        """
        by_slot = defaultdict(dict)
        for k, p in enumerate(self.players):
            if p.is_hitter:
                by_slot[p.team][p.batting_slot] = k
        out = {}
        for team in sorted(by_slot):
            for s in range(1, ORDER_LEN + 1):
                members = [by_slot[team].get((s - 1 + i) % ORDER_LEN + 1) for i in range(WINDOW)]
                if None not in members:
                    out[(team, s)] = members
        return out

    def means(self) -> np.ndarray:
        return np.array([p.proj_mean for p in self.players])

    def pool(self) -> portfolio_ip.ResourcePool:
        return portfolio_ip.ResourcePool([p.player_id for p in self.players], self.means())


def read_slate(path_or_buffer, budget: int = BUDGET) -> BaseballSlate:
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
            slot = rec["batting_slot"].strip()
            players.append(BaseballPlayer(
                player_id=rec["player_id"].strip(),
                name=rec["name"].strip(),
                position=rec["position"].strip().upper(),
                team=rec["team"].strip(),
                opponent=rec["opponent"].strip(),
                batting_slot=int(slot) if slot else None,
                salary=int(rec["salary"]),
                proj_mean=float(rec["proj_mean"]),
            ))
        except ValueError as exc:
            raise InputError(str(exc), f"slate line {n}") from None
    return BaseballSlate(players, budget)


def write_slate(slate: BaseballSlate, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SLATE_COLUMNS)
    for p in slate.players:
        w.writerow([p.player_id, p.name, p.position, p.team, p.opponent,
                    "" if p.batting_slot is None else p.batting_slot, p.salary, repr(p.proj_mean)])


# ---------------------------------------------------------------------------
# row compilation; player k of the slate is variable k of the builder

def add_player_vars(slate: BaseballSlate, b: ProgramBuilder) -> None:
    if b.n != 0:
        raise InputError("player variables must come first", "builder")
    for k, p in enumerate(slate.players):
        b.add_var(f"x_{k}_{_safe(p.player_id)}", p.proj_mean)


def compile_feasibility(slate: BaseballSlate, b: ProgramBuilder) -> list[Row]:
    """Budget, roster shape, per-team hitter cap and the two-game rule."""
    if len(slate.games) < MIN_GAMES:
        raise InputError(f"slate has {len(slate.games)} games; need {MIN_GAMES}", "slate")
    start = len(b.rows)
    P = len(slate)
    b.add_row({k: p.salary for k, p in enumerate(slate.players)}, LE, slate.budget, "budget")
    if not any(r.name == "size" for r in b.rows):
        b.add_row({k: 1 for k in range(P)}, EQ, ROSTER_SIZE, "size")
    for pos, n in POSITION_COUNTS.items():
        b.add_row({k: 1 for k, p in enumerate(slate.players) if p.position == pos}, EQ, n, f"pos_{pos}")
    for team in slate.teams:
        hitters = {k: 1 for k, p in enumerate(slate.players) if p.team == team and p.is_hitter}
        if len(hitters) > HITTER_CAP:
            b.add_row(hitters, LE, HITTER_CAP, f"hitter_cap_{_safe(team)}")
    gvars = []
    for game in slate.games:
        g = b.add_var(f"g_{_safe(game[0])}_{_safe(game[1])}")
        gvars.append(g)
        row = {g: 1}
        for k in range(P):
            if slate.game_of(k) == game:
                row[k] = -1
        b.add_row(row, LE, 0, f"game_link_{_safe(game[0])}_{_safe(game[1])}")
    b.add_row({g: 1 for g in gvars}, GE, MIN_GAMES, "min_games")
    return _new_rows(b, start)


def opposing_hitters(slate: BaseballSlate, pitcher: int) -> list[int]:
    p = slate.players[pitcher]
    return [k for k, q in enumerate(slate.players) if q.is_hitter and q.team == p.opponent]


def compile_pitcher_stack(slate: BaseballSlate, b: ProgramBuilder) -> list[Row]:
    """``8 x_p + sum(opposing hitters) <= 8`` for every pitcher."""
    start = len(b.rows)
    for k, p in enumerate(slate.players):
        if p.is_hitter:
            continue
        row = {k: PITCHER_CAP}
        for l in opposing_hitters(slate, k):
            row[l] = 1
        b.add_row(row, LE, PITCHER_CAP, f"pitcher_{_safe(p.player_id)}")
    return _new_rows(b, start)


def compile_consecutive_hitters(slate: BaseballSlate, b: ProgramBuilder) -> list[Row]:
    """At least one team window of five consecutive batters fully selected.

    ``u <= x_k`` per member is implied by ``5u <= sum x`` for binaries; the
    explicit rows only tighten the linear relaxation.
    """
    start = len(b.rows)
    us = []
    for (team, s), members in slate.windows().items():
        tag = f"{_safe(team)}_{s}"
        u = b.add_var(f"u_{tag}", priority=PRIORITY_WINDOW)
        us.append(u)
        b.add_row({u: WINDOW, **{k: -1 for k in members}}, LE, 0, f"window_{tag}")
        for k in members:
            b.add_row({u: 1, k: -1}, LE, 0, f"window_{tag}_{k}")
    if not us:
        raise InputError("no team has five consecutive batters on the slate", "slate")
    b.add_row({u: 1 for u in us}, GE, 1, "one_window")
    return _new_rows(b, start)


def compile_overlap(slate: BaseballSlate, prior_lineups, gamma) -> list[Row]:
    if not 0 <= gamma <= ROSTER_SIZE:
        raise InputError(f"gamma must lie in [0, {ROSTER_SIZE}]", "gamma")
    return [Row({slate.index(pid): 1.0 for pid in lineup}, LE, float(gamma), f"overlap_{l}")
            for l, lineup in enumerate(prior_lineups)]


class BaseballRules:
    """Portfolio plugin: feasibility, pitcher exclusion and the batting-order stack."""

    def __init__(self, slate: BaseballSlate, stacking: bool = True):
        self.slate = slate
        self.stacking = stacking

    def compile(self, b: ProgramBuilder) -> None:
        compile_feasibility(self.slate, b)
        if self.stacking:
            compile_pitcher_stack(self.slate, b)
            compile_consecutive_hitters(self.slate, b)

    def program(self):
        b = ProgramBuilder()
        add_player_vars(self.slate, b)
        self.compile(b)
        return b.build()


def aux_assignment(slate: BaseballSlate, program, lineup) -> np.ndarray:
    """Full 0-1 assignment (players plus game and window indicators) for a roster."""
    names = program.names
    pos = {name: j for j, name in enumerate(names)}
    x = np.zeros(program.n, dtype=int)
    chosen = {slate.index(pid) for pid in lineup}
    x[list(chosen)] = 1
    for game in {slate.game_of(k) for k in chosen}:
        x[pos[f"g_{_safe(game[0])}_{_safe(game[1])}"]] = 1
    for (team, s), members in slate.windows().items():
        name = f"u_{_safe(team)}_{s}"
        if name in pos and all(k in chosen for k in members):
            x[pos[name]] = 1
    return x


def longest_cyclic_run(slots) -> int:
    """Longest run of consecutive batting slots, wrapping 9 -> 1."""
    have = set(slots)
    if len(have) == ORDER_LEN:
        return ORDER_LEN
    best = 0
    for s in have:
        if (s - 2) % ORDER_LEN + 1 in have:
            continue  # not the start of a run
        n = 0
        while (s - 1 + n) % ORDER_LEN + 1 in have:
            n += 1
        best = max(best, n)
    return best


def check_lineup(slate: BaseballSlate, lineup, stacking: bool = True, prior=(), gamma=ROSTER_SIZE) -> list[str]:
    """Evaluate every rule from the roster itself; returns violation messages."""
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
    for name, n in POSITION_COUNTS.items():
        if pos[name] != n:
            errs.append(f"{pos[name]} {name} != {n}")
    hitters = defaultdict(list)
    for p in ps:
        if p.is_hitter:
            hitters[p.team].append(p)
    for team, hs in hitters.items():
        if len(hs) > HITTER_CAP:
            errs.append(f"{len(hs)} hitters from {team} > {HITTER_CAP}")
    games = {tuple(sorted((p.team, p.opponent))) for p in ps}
    if len(games) < MIN_GAMES:
        errs.append(f"{len(games)} games < {MIN_GAMES}")
    if stacking:
        for p in ps:
            if not p.is_hitter and hitters.get(p.opponent):
                errs.append(f"pitcher {p.player_id} faces {len(hitters[p.opponent])} rostered hitters")
        run = max((longest_cyclic_run(h.batting_slot for h in hs) for hs in hitters.values()), default=0)
        if run < WINDOW:
            errs.append(f"longest consecutive batting run {run} < {WINDOW}")
    mine = set(ids)
    for l, other in enumerate(prior):
        shared = len(mine & set(other))
        if shared > gamma:
            errs.append(f"overlap {shared} with lineup {l} > {gamma}")
    return errs


@dataclass
class BaseballPortfolio:
    lineups: list[tuple[str, ...]]
    objectives: list[float]
    statuses: list[str]
    notes: list[str]

    def __len__(self):
        return len(self.lineups)


def build_baseball_portfolio(slate: BaseballSlate, gamma=DEFAULT_GAMMA, M: int = 100,
                             time_budget: float = 60.0, backend=None) -> BaseballPortfolio:
    if not 0 <= gamma <= ROSTER_SIZE:
        raise InputError(f"gamma must lie in [0, {ROSTER_SIZE}]", "gamma")
    config = portfolio_ip.GreedyIPConfig(
        M=M, K=ROSTER_SIZE, epsilon=None, gamma=gamma, time_budget=time_budget,
        covariance="overlap", forbid_duplicates=True, backend=backend,
    )
    res = portfolio_ip.build_portfolio(slate.pool(), config, BaseballRules(slate))
    return BaseballPortfolio(
        [e.resources for e in res.entries],
        [e.objective for e in res.entries],
        [e.status for e in res.entries],
        list(res.notes),
    )


def upload_row(slate: BaseballSlate, lineup) -> list[str]:
    by_pos = defaultdict(list)
    for pid in sorted(lineup, key=slate.index):
        by_pos[slate.players[slate.index(pid)].position].append(pid)
    row = []
    for slot in EXPORT_SLOTS:
        if not by_pos[slot]:
            raise InputError(f"lineup lacks {slot}", "lineup")
        row.append(by_pos[slot].pop(0))
    if any(by_pos.values()):
        raise InputError("lineup has players beyond the roster slots", "lineup")
    return row


def export_lineups(slate: BaseballSlate, lineups, fh) -> None:
    """Write lineups in site upload shape ``P,P,C,1B,2B,3B,SS,OF,OF,OF``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(EXPORT_SLOTS)
    for lineup in lineups:
        w.writerow(upload_row(slate, lineup))


class BaseballLineupOptimizer(BaseEstimator):
    """Estimator-style front end: ``fit(slate)`` builds ``lineups_``."""

    def __init__(self, gamma=DEFAULT_GAMMA, n_lineups=100, time_budget=60.0, backend=None):
        self.gamma = gamma
        self.n_lineups = n_lineups
        self.time_budget = time_budget
        self.backend = backend

    def fit(self, slate: BaseballSlate, y=None):
        self.portfolio_ = build_baseball_portfolio(slate, self.gamma, self.n_lineups,
                                                   self.time_budget, self.backend)
        self.lineups_ = self.portfolio_.lineups
        return self

    def transform(self, slate: BaseballSlate):
        if not hasattr(self, "lineups_"):
            from sklearn.exceptions import NotFittedError
            raise NotFittedError("BaseballLineupOptimizer is not fitted")
        out = np.zeros((len(self.lineups_), len(slate)), dtype=int)
        for i, lineup in enumerate(self.lineups_):
            out[i, [slate.index(p) for p in lineup]] = 1
        return out
