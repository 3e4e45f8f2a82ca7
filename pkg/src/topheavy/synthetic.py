"""Synthetic slates with realistic salary/projection structure.

Real slates are proprietary; these generators give reproducible stand-ins
for tests, benchmarks, the simulator and the CLI sample data.
"""
from __future__ import annotations

import numpy as np

from .baseball import BaseballPlayer, BaseballSlate
from .hockey import HockeyPlayer, HockeySlate


def _salary(rng, proj, base, per_point, hi):
    raw = base + per_point * proj + rng.normal(0, 350)
    return int(np.clip(round(raw / 100) * 100, 2500, hi))


def hockey_slate(n_games: int = 10, seed: int = 0, lines_per_team: int = 2,
                 defense_per_team: int = 2, pp1_defense: int = 1) -> HockeySlate:
    """Each team gets ``lines_per_team`` C-W-W lines, some defensemen and one goalie."""
    rng = np.random.default_rng(seed)
    players = []
    for g in range(n_games):
        home, away = f"H{g:02d}", f"A{g:02d}"
        for team, opp in ((home, away), (away, home)):
            strength = rng.normal(0, 0.3)
            for line in range(1, lines_per_team + 1):
                base = 4.2 - 0.9 * (line - 1) + strength
                for pos in ("C", "W", "W"):
                    proj = max(0.5, base + rng.normal(0, 0.6))
                    k = len(players)
                    players.append(HockeyPlayer(
                        f"P{k:04d}", f"{team}-{pos}{line}-{k}", pos, team, opp, line, line == 1,
                        _salary(rng, proj, 2000, 1000, 9000), round(proj, 3)))
            for d in range(defense_per_team):
                proj = max(0.5, 3.0 - 0.5 * d + strength + rng.normal(0, 0.5))
                k = len(players)
                players.append(HockeyPlayer(
                    f"P{k:04d}", f"{team}-D{d + 1}-{k}", "D", team, opp, None, d < pp1_defense,
                    _salary(rng, proj, 2000, 1000, 8000), round(proj, 3)))
            proj = max(1.0, 6.0 + 1.5 * strength + rng.normal(0, 0.8))
            k = len(players)
            players.append(HockeyPlayer(
                f"P{k:04d}", f"{team}-G-{k}", "G", team, opp, None, False,
                _salary(rng, proj, 5000, 450, 9000), round(proj, 3)))
    return HockeySlate(players)


# fielding positions for batting slots 1..9; the ninth bats as a second 1B/OF
_FIELD = ("SS", "2B", "OF", "1B", "3B", "OF", "C", "OF", "OF")


def baseball_slate(n_games: int = 8, seed: int = 0, pitchers_per_team: int = 1) -> BaseballSlate:
    """Nine hitters per team in batting order plus starting pitchers."""
    rng = np.random.default_rng(seed)
    players = []
    for g in range(n_games):
        home, away = f"H{g:02d}", f"A{g:02d}"
        for team, opp in ((home, away), (away, home)):
            strength = rng.normal(0, 0.4)
            top = rng.permutation(6)
            field = [_FIELD[i] for i in top] + list(_FIELD[6:])
            for slot, pos in enumerate(field, start=1):
                # top of the order bats more often
                proj = max(1.0, 8.5 - 0.35 * slot + 2.0 * strength + rng.normal(0, 1.2))
                k = len(players)
                players.append(BaseballPlayer(
                    f"B{k:04d}", f"{team}-{pos}{slot}-{k}", pos, team, opp, slot,
                    _salary(rng, proj, 1800, 320, 6500), round(proj, 3)))
            for s in range(pitchers_per_team):
                proj = max(3.0, 15.0 - 4.0 * s - 3.0 * strength + rng.normal(0, 2.5))
                k = len(players)
                players.append(BaseballPlayer(
                    f"B{k:04d}", f"{team}-P{s + 1}-{k}", "P", team, opp, None,
                    _salary(rng, proj, 3000, 420, 13000), round(proj, 3)))
    return BaseballSlate(players)


def training_records(n: int = 1000, seed: int = 0, intercept: float = 1.334,
                     coef=(0.634, 0.282), noise: float = 1.0, goalie_share: float = 0.1):
    """Projection records whose outcomes follow a known linear model.

    Two site forecasts are correlated noisy views of a latent skill; goalies
    also get a win probability, which the outcome ignores.
    """
    from .projections import ProjectionRecord

    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        goalie = rng.random() < goalie_share
        skill = rng.gamma(4.0, 1.0) + (2.0 if goalie else 0.0)
        f1 = round(skill + rng.normal(0, 0.5), 3)
        f2 = round(skill + rng.normal(0, 0.8), 3)
        y = intercept + coef[0] * f1 + coef[1] * f2 + (rng.normal(0, noise) if noise else 0.0)
        out.append(ProjectionRecord(
            f"R{k:05d}", "G" if goalie else ("C", "W", "D")[k % 3], f1, f2,
            round(float(rng.uniform(0.3, 0.7)), 3) if goalie else None, float(y)))
    return out
