"""Regenerate the synthetic sample files under data/."""
import csv
from pathlib import Path

import numpy as np

from topheavy import baseball, contest_sim, hockey, synthetic

OUT = Path(__file__).resolve().parent.parent / "data"


def write_records(path, records, with_actual=True):
    cols = ["player_id", "position", "f1", "f2", "win_prob"] + (["actual_points"] if with_actual else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            row = [r.player_id, r.position, r.f1, r.f2, "" if r.win_prob is None else r.win_prob]
            if with_actual:
                row.append(round(r.actual_points, 4))
            w.writerow(row)


def forecasts_for(slate, seed):
    # two noisy site forecasts per slate player, built around its projection
    rng = np.random.default_rng(seed)
    from topheavy.projections import ProjectionRecord
    out = []
    for p in slate.players:
        goalie = p.position == "G"
        out.append(ProjectionRecord(
            p.player_id, p.position, round(p.proj_mean + rng.normal(0, 0.4), 3),
            round(p.proj_mean + rng.normal(0, 0.6), 3),
            round(float(rng.uniform(0.3, 0.7)), 3) if goalie else None))
    return out


def main():
    OUT.mkdir(exist_ok=True)
    hs = synthetic.hockey_slate(10, seed=1)
    with open(OUT / "hockey_slate.csv", "w", newline="", encoding="utf-8") as fh:
        hockey.write_slate(hs, fh)
    bs = synthetic.baseball_slate(8, seed=1)
    with open(OUT / "baseball_slate.csv", "w", newline="", encoding="utf-8") as fh:
        baseball.write_slate(bs, fh)
    write_records(OUT / "training.csv", synthetic.training_records(1000, seed=7))
    write_records(OUT / "hockey_forecasts.csv", forecasts_for(hs, 11), with_actual=False)
    with open(OUT / "payoff.csv", "w", newline="", encoding="utf-8") as fh:
        contest_sim.top_heavy_payoff(1020).write_csv(fh)


if __name__ == "__main__":
    main()
