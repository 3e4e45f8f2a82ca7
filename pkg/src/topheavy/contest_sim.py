"""Synthetic top-heavy contests: correlated player outcomes, a field of opposing
lineups, payouts by rank, and strategy comparisons.

The outcome model is Gaussian with stdev proportional to the projected mean.
Correlations follow the qualitative pattern of real scoring data: linemates
move together, teammates slightly, and a goalie moves against the skaters he
faces. The magnitudes are knobs, not measured constants.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from . import baseball, hockey
from .exceptions import InputError
from .gaussian_model import sample_gaussian, spectral_factor

Z95 = 1.959963984540054
RANK_CHUNK = 256


@dataclass(frozen=True)
class CorrelationSpec:
    same_line: float = 0.15
    same_team: float = 0.05
    goalie_opponent: float = -0.10
    stdev_scale: float = 1.0

    def __post_init__(self):
        for name in ("same_line", "same_team", "goalie_opponent"):
            if not -1 <= getattr(self, name) <= 1:
                raise InputError("correlations must lie in [-1, 1]", name)
        if not self.stdev_scale > 0:
            raise InputError("stdev_scale must be positive", "stdev_scale")


def correlation_matrix(slate, spec: CorrelationSpec) -> np.ndarray:
    """Player correlation matrix implied by ``spec`` for a hockey or baseball slate.

    Baseball uses batting-order neighbours (within two slots, wrapping) as
    the analogue of a line and the pitcher as the analogue of the goalie.
    """
    players = slate.players
    n = len(players)
    R = np.eye(n)
    team = np.array([p.team for p in players])
    opp = np.array([p.opponent for p in players])
    same_team = team[:, None] == team[None, :]
    R[same_team] = spec.same_team
    if isinstance(slate, hockey.HockeySlate):
        for members in slate.lines().values():
            R[np.ix_(members, members)] = spec.same_line
        keeper = np.array([p.position == "G" for p in players])
        skater = ~keeper
    elif isinstance(slate, baseball.BaseballSlate):
        slot = np.array([p.batting_slot or 0 for p in players])
        hitter = slot > 0
        d = np.abs(slot[:, None] - slot[None, :])
        near = np.minimum(d, baseball.ORDER_LEN - d) <= 2
        R[same_team & near & hitter[:, None] & hitter[None, :]] = spec.same_line
        keeper = ~hitter
        skater = hitter
    else:
        raise InputError(f"unsupported slate type {type(slate).__name__}", "slate")
    facing = keeper[:, None] & skater[None, :] & (opp[:, None] == team[None, :])
    R[facing] = spec.goalie_opponent
    R[facing.T] = spec.goalie_opponent
    np.fill_diagonal(R, 1.0)
    return R


def sample_outcomes(slate, spec: CorrelationSpec = CorrelationSpec(), seed=0, draws: int = 10_000) -> np.ndarray:
    """``(draws, players)`` matrix of jointly Gaussian fantasy points."""
    if draws < 1:
        raise InputError("draws must be positive", "draws")
    mean = slate.means()
    sd = spec.stdev_scale * np.abs(mean)
    cov = correlation_matrix(slate, spec) * np.outer(sd, sd)
    L = spectral_factor(cov)
    return np.concatenate(list(sample_gaussian(mean, L, draws, seed)))


# ---------------------------------------------------------------------------
# opposing field

def _slot_plan(slate):
    if isinstance(slate, hockey.HockeySlate):
        need = {"C": 2, "W": 3, "D": 2, "G": 1}
        return need, ("C", "W", "D"), lambda lu: hockey.check_lineup(slate, lu, "none")
    if isinstance(slate, baseball.BaseballSlate):
        return dict(baseball.POSITION_COUNTS), (), lambda lu: baseball.check_lineup(slate, lu, stacking=False)
    raise InputError(f"unsupported slate type {type(slate).__name__}", "slate")


def generate_population(slate, count: int, seed=0, max_tries: int = 2000, salary_floor: float = 0.94):
    """Random feasible lineups from a randomized greedy fill.

    Slots are filled in random order with picks weighted by projection times
    salary, so the field tends to spend most of the cap. Lineups below
    ``salary_floor`` of the budget are redrawn (the floor drops after
    repeated misses). Only feasibility rules apply, no stacking.
    """
    if count < 0:
        raise InputError("count must be nonnegative", "count")
    need, util, check = _slot_plan(slate)
    rng = np.random.default_rng(seed)
    players = slate.players
    pos = np.array([p.position for p in players])
    salary = np.array([p.salary for p in players], dtype=float)
    weight = np.clip(slate.means(), 1e-3, None) * salary
    cheapest = {q: np.sort(salary[pos == q]) for q in set(pos)}
    slots = [q for q, c in need.items() for _ in range(c)] + (["UTIL"] if util else [])
    out = []
    floor = salary_floor
    misses = 0
    while len(out) < count:
        lineup = _draw_lineup(rng, slots, util, pos, salary, weight, cheapest, slate.budget)
        ok = lineup is not None and salary[lineup].sum() >= floor * slate.budget
        if ok:
            ids = tuple(players[k].player_id for k in sorted(lineup))
            ok = not check(ids)
        if ok:
            out.append(ids)
            misses = 0
            continue
        misses += 1
        if misses % 200 == 0:
            floor -= 0.02
        if misses > max_tries:
            raise InputError("could not draw feasible population lineups", "slate")
    return out


def _draw_lineup(rng, slots, util, pos, salary, weight, cheapest, budget):
    order = list(rng.permutation(len(slots)))
    # the utility slot goes last so position minima are met first
    order.sort(key=lambda i: slots[i] == "UTIL")
    taken = np.zeros(pos.size, dtype=bool)
    spent = 0.0
    remaining = [slots[i] for i in order]
    for s_i, slot in enumerate(remaining):
        later = remaining[s_i + 1:]
        reserve = 0.0
        for q in set(later):
            if q == "UTIL":
                reserve += min(cheapest[u][0] for u in util)
            else:
                reserve += cheapest[q][: later.count(q)].sum()
        ok = ~taken & (salary <= budget - spent - reserve)
        ok &= np.isin(pos, util) if slot == "UTIL" else (pos == slot)
        cand = np.flatnonzero(ok)
        if cand.size == 0:
            return None
        w = weight[cand]
        k = int(rng.choice(cand, p=w / w.sum()))
        taken[k] = True
        spent += salary[k]
    return np.flatnonzero(taken)


# ---------------------------------------------------------------------------
# payouts and contests

@dataclass(frozen=True)
class PayoffTable:
    """Payout per rank over ``(rank_from, rank_to, payout)`` spans; ranks start at 1."""

    spans: tuple
    entry_fee: float = 1.0

    def __post_init__(self):
        spans = tuple((int(a), int(b), float(p)) for a, b, p in self.spans)
        if not spans:
            raise InputError("payoff table is empty", "payoff")
        prev_to, prev_pay = 0, math.inf
        for a, b, p in spans:
            if a < 1 or b < a:
                raise InputError(f"bad rank span {a}-{b}", "payoff")
            if a <= prev_to:
                raise InputError(f"rank span {a}-{b} overlaps the previous one", "payoff")
            if p < 0 or p > prev_pay:
                raise InputError("payouts must be nonnegative and nonincreasing in rank", "payoff")
            prev_to, prev_pay = b, p
        if not self.entry_fee > 0:
            raise InputError("entry fee must be positive", "entry_fee")
        object.__setattr__(self, "spans", spans)

    @property
    def paid_ranks(self) -> int:
        return self.spans[-1][1]

    def per_rank(self, n: int) -> np.ndarray:
        """Payout for ranks 1..n (zero beyond the table)."""
        pay = np.zeros(n)
        for a, b, p in self.spans:
            if a <= n:
                pay[a - 1:min(b, n)] = p
        return pay

    @property
    def total(self) -> float:
        return math.fsum((b - a + 1) * p for a, b, p in self.spans)

    @classmethod
    def read_csv(cls, path_or_buffer, entry_fee: float = 1.0) -> "PayoffTable":
        if isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__"):
            with open(path_or_buffer, newline="", encoding="utf-8") as fh:
                return cls.read_csv(fh, entry_fee)
        reader = csv.DictReader(path_or_buffer)
        if reader.fieldnames is None or not {"rank_from", "rank_to", "payout"} <= set(reader.fieldnames):
            raise InputError("payoff CSV needs rank_from,rank_to,payout", "payoff")
        try:
            spans = [(int(r["rank_from"]), int(r["rank_to"]), float(r["payout"])) for r in reader]
        except ValueError as exc:
            raise InputError(str(exc), "payoff") from None
        return cls(tuple(spans), entry_fee)

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("rank_from", "rank_to", "payout"))
        for a, b, p in self.spans:
            w.writerow((a, b, repr(p)))


def top_heavy_payoff(n_entries: int, entry_fee: float = 1.0, rake: float = 0.15,
                     paid_fraction: float = 0.2, decay: float = 1.1) -> PayoffTable:
    """A synthetic top-heavy table: payouts fall like rank^-decay over the paid ranks."""
    if n_entries < 1:
        raise InputError("n_entries must be positive", "n_entries")
    paid = max(1, int(math.ceil(paid_fraction * n_entries)))
    raw = np.arange(1, paid + 1, dtype=float) ** -decay
    pay = raw / raw.sum() * (1 - rake) * entry_fee * n_entries
    return PayoffTable(tuple((r, r, float(p)) for r, p in enumerate(pay, start=1)), entry_fee)


def shared_payouts(scores: np.ndarray, pay: np.ndarray) -> np.ndarray:
    """Payout per column for each row of scores; tied entries split their rank span evenly."""
    n = scores.shape[1]
    cum = np.concatenate([[0.0], np.cumsum(pay[:n])])
    lo = rankdata(-scores, method="min", axis=1).astype(int)
    hi = rankdata(-scores, method="max", axis=1).astype(int)
    return (cum[hi] - cum[lo - 1]) / (hi - lo + 1)


def indicator_matrix(slate, lineups) -> np.ndarray:
    X = np.zeros((len(lineups), len(slate)))
    for i, lu in enumerate(lineups):
        X[i, [slate.index(p) for p in lu]] = 1.0
    return X


@dataclass
class ContestResult:
    """Per-draw contest outcome for one portfolio against a fixed field.

    ``points``/``ranks``/``winnings`` are ``(draws, M)``; statistics are per draw.
    """

    points: np.ndarray
    ranks: np.ndarray
    winnings: np.ndarray
    fees: float
    profit_margin: np.ndarray
    beat_field_max: np.ndarray
    mu_diff: np.ndarray
    sigma_diff: np.ndarray
    paid_total: np.ndarray

    def summary(self) -> dict:
        d = self.profit_margin.size
        pm = self.profit_margin
        sd = float(pm.std(ddof=1)) if d > 1 else 0.0
        p_hat = float(self.beat_field_max.mean())
        lo, hi = wilson_interval(int(self.beat_field_max.sum()), d)
        best = self.points.max(axis=1)
        return {
            "draws": d,
            "lineups": int(self.points.shape[1]),
            "mean_profit_margin": float(pm.mean()),
            "profit_margin_ci95": [float(pm.mean() - Z95 * sd / math.sqrt(d)),
                                   float(pm.mean() + Z95 * sd / math.sqrt(d))],
            "median_profit_margin": float(np.median(pm)),
            "p_beat_field_max": p_hat,
            "p_beat_field_max_ci95": [lo, hi],
            "max_points_quantiles": {str(q): float(np.quantile(best, q)) for q in (0.05, 0.25, 0.5, 0.75, 0.95, 0.99)},
            "mean_mu1_minus_mu0": float(self.mu_diff.mean()),
            "mean_sigma1_minus_sigma0": float(self.sigma_diff.mean()),
        }


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


def run_contest(portfolio: np.ndarray, population: np.ndarray, outcomes: np.ndarray,
                payoff: PayoffTable, chunk: int = RANK_CHUNK) -> ContestResult:
    """Score, rank and pay a portfolio (rows of a 0-1 matrix) against the field.

    Portfolio entries come first in the ranking, but ties are split evenly so
    order does not matter.
    """
    P = np.atleast_2d(np.asarray(portfolio, dtype=float))
    Q = np.atleast_2d(np.asarray(population, dtype=float)).reshape(-1, P.shape[1])
    Y = np.atleast_2d(np.asarray(outcomes, dtype=float))
    if Y.shape[1] != P.shape[1]:
        raise InputError("outcomes and lineups cover different player sets", "outcomes")
    M, n_all = P.shape[0], P.shape[0] + Q.shape[0]
    if M == 0:
        raise InputError("portfolio is empty", "portfolio")
    pay = payoff.per_rank(n_all)
    parts = {k: [] for k in ("points", "ranks", "win", "best_q", "mu_q", "sd_q", "paid")}
    for s in range(0, Y.shape[0], chunk):
        y = Y[s:s + chunk]
        sp, sq = y @ P.T, y @ Q.T
        scores = np.concatenate([sp, sq], axis=1)
        won = shared_payouts(scores, pay)
        parts["points"].append(sp)
        parts["ranks"].append(rankdata(-scores, method="min", axis=1)[:, :M].astype(int))
        parts["win"].append(won[:, :M])
        parts["paid"].append(won.sum(axis=1))
        parts["best_q"].append(sq.max(axis=1) if sq.shape[1] else np.full(len(y), -np.inf))
        parts["mu_q"].append(sq.mean(axis=1) if sq.shape[1] else np.zeros(len(y)))
        parts["sd_q"].append(sq.std(axis=1) if sq.shape[1] else np.zeros(len(y)))
    pts = np.concatenate(parts["points"])
    win = np.concatenate(parts["win"])
    fees = payoff.entry_fee * M
    total = win.sum(axis=1)
    return ContestResult(
        points=pts,
        ranks=np.concatenate(parts["ranks"]),
        winnings=win,
        fees=fees,
        profit_margin=(total - fees) / fees,
        beat_field_max=pts.max(axis=1) >= np.concatenate(parts["best_q"]),
        mu_diff=pts.mean(axis=1) - np.concatenate(parts["mu_q"]),
        sigma_diff=pts.std(axis=1) - np.concatenate(parts["sd_q"]),
        paid_total=np.concatenate(parts["paid"]),
    )


@dataclass
class Comparison:
    strategies: dict[str, dict]
    results: dict[str, ContestResult] = field(repr=False)
    settings: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"settings": self.settings, "strategies": self.strategies},
                          indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        """Flat per-draw table for plotting."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("strategy", "draw", "max_points", "winnings", "profit_margin",
                    "beat_field_max", "mu1_minus_mu0", "sigma1_minus_sigma0"))
        for name, r in self.results.items():
            best = r.points.max(axis=1)
            won = r.winnings.sum(axis=1)
            for d in range(best.size):
                w.writerow((name, d, repr(float(best[d])), repr(float(won[d])),
                            repr(float(r.profit_margin[d])), int(r.beat_field_max[d]),
                            repr(float(r.mu_diff[d])), repr(float(r.sigma_diff[d]))))
        return buf.getvalue()


def compare_strategies(slate, strategies: dict, spec: CorrelationSpec = CorrelationSpec(),
                       draws: int = 10_000, payoff: PayoffTable | None = None, seed=0,
                       population=None, population_size: int = 1000) -> Comparison:
    """Evaluate several portfolios on the same simulated contests.

    ``strategies`` maps a name to a list of lineups (player-id tuples). All
    strategies face the same field and the same outcome draws, so their
    differences are not blurred by sampling noise in either.
    """
    if not strategies:
        raise InputError("need at least one strategy", "strategies")
    if draws < 1:
        raise InputError("draws must be positive", "draws")
    ss = np.random.SeedSequence(seed)
    pop_seed, out_seed = ss.spawn(2)
    if population is None:
        population = generate_population(slate, population_size, pop_seed)
    Q = indicator_matrix(slate, population)
    if payoff is None:
        M = max(len(v) for v in strategies.values())
        payoff = top_heavy_payoff(len(population) + M)
    Y = sample_outcomes(slate, spec, out_seed, draws)
    results, summaries = {}, {}
    for name, lineups in strategies.items():
        if not lineups:
            raise InputError(f"strategy {name!r} has no lineups", "strategies")
        res = run_contest(indicator_matrix(slate, lineups), Q, Y, payoff)
        results[name] = res
        summaries[name] = res.summary()
    settings = {"draws": draws, "seed": seed if isinstance(seed, (int, str)) else None,
                "population_size": len(population), "correlation": asdict(spec),
                "entry_fee": payoff.entry_fee, "paid_ranks": payoff.paid_ranks}
    return Comparison(summaries, results, settings)
