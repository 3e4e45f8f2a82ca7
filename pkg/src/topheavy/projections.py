"""Linear point projections from external site forecasts.

A player's mean is an affine function of two sites' projections f1, f2 and,
for goalies, the team win probability. Coefficients come from ordinary least
squares on past slates; two published fits ship as defaults.
"""
from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, check_array

from .exceptions import InputError

FEATURES = ("f1", "f2", "win_prob")
RIDGE = 1e-10
# relative eigenvalue floor of the column-scaled Gram matrix
RANK_TOL = 1e-13
TRAINING_COLUMNS = ("player_id", "position", "f1", "f2", "win_prob", "actual_points")

DEFAULTS = {
    # intercept, coefficients on (f1, f2)
    "skater-default": (1.334, (0.634, 0.282)),
    "goalie-default": (1.686, (0.628, -0.0173)),
}


@dataclass(frozen=True)
class ProjectionRecord:
    player_id: str
    position: str
    f1: float
    f2: float
    win_prob: float | None = None
    actual_points: float | None = None

    def __post_init__(self):
        goalie = self.position == "G"
        if goalie and self.win_prob is None:
            raise InputError("goalies need a win probability", self.player_id)
        if not goalie and self.win_prob is not None:
            raise InputError("win probability is for goalies only", self.player_id)
        if self.win_prob is not None and not 0 <= self.win_prob <= 1:
            raise InputError("win probability must lie in [0, 1]", self.player_id)

    def features(self, names) -> list[float]:
        out = []
        for n in names:
            v = getattr(self, n)
            if v is None:
                raise InputError(f"record has no {n}", self.player_id)
            out.append(float(v))
        return out


class LinearProjection(RegressorMixin, BaseEstimator):
    """OLS with an intercept, solved through the normal equations.

    A ridge of ``ridge`` on the diagonal only conditions the solve; a design
    that is rank deficient anyway is rejected.

    Fitted attributes: ``intercept_``, ``coef_``, ``stderr_`` (intercept
    first), ``r2_``, ``n_samples_``.
    """

    def __init__(self, features=("f1", "f2"), ridge=RIDGE):
        self.features = features
        self.ridge = ridge

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        n, p = X.shape
        if p != len(self.features):
            raise InputError(f"expected {len(self.features)} feature columns, got {p}", "X")
        if n < p + 2:
            raise InputError(f"need at least {p + 2} records, got {n}", "records")
        D = np.column_stack([np.ones(n), X])
        G = D.T @ D
        scale = np.sqrt(np.diag(G))
        if np.any(scale == 0):
            raise InputError("a feature column is identically zero", "X")
        ev = np.linalg.eigvalsh(G / np.outer(scale, scale))
        if ev[0] < RANK_TOL * ev[-1]:
            raise InputError("design matrix is rank deficient", "X")
        G_r = G + self.ridge * np.eye(p + 1)
        beta = np.linalg.solve(G_r, D.T @ y)
        resid = y - D @ beta
        rss = float(resid @ resid)
        tss = float(np.sum((y - y.mean()) ** 2))
        dof = n - p - 1
        sigma2 = rss / dof
        cov = sigma2 * np.linalg.inv(G_r)
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]
        self.stderr_ = np.sqrt(np.clip(np.diag(cov), 0, None))
        self.r2_ = 1.0 - rss / tss if tss > 0 else 1.0
        self.n_samples_ = n
        self.n_features_in_ = p
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.coef_.size:
            raise InputError(f"expected {self.coef_.size} feature columns, got {X.shape[1]}", "X")
        return self.intercept_ + X @ self.coef_

    def fit_records(self, records):
        X, y = design(records, self.features, target=True)
        return self.fit(X, y)

    def predict_record(self, rec: ProjectionRecord) -> float:
        check_is_fitted(self, "coef_")
        return float(self.intercept_ + np.dot(rec.features(self.features), self.coef_))

    def to_json(self) -> dict:
        check_is_fitted(self, "coef_")
        return {
            "features": list(self.features),
            "intercept": self.intercept_,
            "coef": [float(c) for c in self.coef_],
            "stderr": [float(s) for s in getattr(self, "stderr_", [])],
            "r2": getattr(self, "r2_", None),
            "n_samples": getattr(self, "n_samples_", None),
        }

    @classmethod
    def from_json(cls, doc) -> "LinearProjection":
        """Rebuild a model from :meth:`to_json` output (a dict or a path)."""
        if not isinstance(doc, dict):
            with open(doc) as fh:
                doc = json.load(fh)
        try:
            m = cls(tuple(doc["features"]))
            m.intercept_ = float(doc["intercept"])
            m.coef_ = np.array(doc["coef"], dtype=float)
        except KeyError as exc:
            raise InputError(f"missing key {exc}", "model") from None
        if m.coef_.size != len(m.features):
            raise InputError("coefficient count does not match features", "model")
        if doc.get("stderr"):
            m.stderr_ = np.array(doc["stderr"], dtype=float)
        if doc.get("r2") is not None:
            m.r2_ = float(doc["r2"])
        if doc.get("n_samples") is not None:
            m.n_samples_ = int(doc["n_samples"])
        m.n_features_in_ = m.coef_.size
        return m


def default_model(name: str) -> LinearProjection:
    try:
        b0, coef = DEFAULTS[name]
    except KeyError:
        raise InputError(f"unknown default model {name!r}; have {sorted(DEFAULTS)}", "model") from None
    m = LinearProjection(("f1", "f2"))
    m.intercept_ = b0
    m.coef_ = np.array(coef)
    m.n_features_in_ = 2
    return m


def design(records, features, target=False):
    """Feature matrix (and target vector) for records in order."""
    for f in features:
        if f not in FEATURES:
            raise InputError(f"unknown feature {f!r}", "features")
    X = np.array([r.features(features) for r in records], dtype=float).reshape(-1, len(features))
    if not target:
        return X
    if any(r.actual_points is None for r in records):
        raise InputError("training records need actual_points", "records")
    return X, np.array([r.actual_points for r in records], dtype=float)


def _opt_float(s):
    s = (s or "").strip()
    return float(s) if s else None


def read_records(path_or_buffer) -> list[ProjectionRecord]:
    """Training or prediction CSV: player_id,position,f1,f2,win_prob[,actual_points]."""
    if isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__"):
        with open(path_or_buffer, newline="", encoding="utf-8") as fh:
            return read_records(fh)
    reader = csv.DictReader(path_or_buffer)
    need = TRAINING_COLUMNS[:5]
    missing = [c for c in need if c not in (reader.fieldnames or [])]
    if missing:
        raise InputError(f"missing columns {missing}", "records")
    out = []
    for n, rec in enumerate(reader, start=2):
        try:
            out.append(ProjectionRecord(
                rec["player_id"].strip(), rec["position"].strip().upper(),
                float(rec["f1"]), float(rec["f2"]), _opt_float(rec["win_prob"]),
                _opt_float(rec.get("actual_points")),
            ))
        except ValueError as exc:
            raise InputError(str(exc), f"records line {n}") from None
    return out


def project(records, skater: LinearProjection, goalie: LinearProjection) -> dict[str, float]:
    """Projected mean per player id, using the goalie model for position G."""
    return {r.player_id: (goalie if r.position == "G" else skater).predict_record(r) for r in records}


def mae_by_position(records, skater: LinearProjection, goalie: LinearProjection) -> dict[str, float]:
    """Mean absolute error of the projections, grouped by position."""
    errs = defaultdict(list)
    pred = project(records, skater, goalie)
    for r in records:
        if r.actual_points is not None:
            errs[r.position].append(abs(pred[r.player_id] - r.actual_points))
    return {pos: math.fsum(e) / len(e) for pos, e in sorted(errs.items())}
