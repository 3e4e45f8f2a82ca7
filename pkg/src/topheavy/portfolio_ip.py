"""Greedy integer-programming construction of a portfolio of entries.

Entry ``i`` is the mean-maximal set of ``K`` resources whose variance is at
least ``epsilon_i`` and whose covariance with every earlier entry ``j`` is at
most ``gamma_ij``.  Quadratic terms are linearized:

* the covariance against a fixed earlier entry is linear in the new entry,
  ``cov(x, x_j) = x @ Sigma @ x_j`` (``covariance="exact"``), or replaced by
  the shared-resource count (``covariance="overlap"``);
* the variance floor uses one auxiliary 0-1 variable per correlated pair,
  ``y_kl = x_k AND x_l`` (``variance="quadratic"`` for the full quadratic
  form, ``variance="sign"`` for the ``n+ - n-`` pair-count form).

Sport rule sets plug in extra variables and rows through :class:`Plugin`.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from . import bip_solver
from .bip_solver import GE, LE, EQ, ProgramBuilder, Row
from .exceptions import InputError

logger = logging.getLogger(__name__)


class ResourcePool:
    """Resources with means, standard deviations and a correlation matrix."""

    def __init__(self, ids, means, stdevs=None, corr=None):
        self.ids = [str(i) for i in ids]
        if len(set(self.ids)) != len(self.ids):
            raise InputError("resource ids must be unique", "ids")
        self.means = np.asarray(means, dtype=float)
        P = len(self.ids)
        if self.means.shape != (P,):
            raise InputError("one mean per resource", "means")
        self.stdevs = np.ones(P) if stdevs is None else np.asarray(stdevs, dtype=float)
        if self.stdevs.shape != (P,) or np.any(self.stdevs < 0):
            raise InputError("one nonnegative stdev per resource", "stdevs")
        if corr is None:
            self.corr = np.eye(P)
        elif isinstance(corr, dict):
            self.corr = np.eye(P)
            index = {r: k for k, r in enumerate(self.ids)}
            for (a, b), r in corr.items():
                k, l = index.get(str(a), a), index.get(str(b), b)
                self.corr[k, l] = self.corr[l, k] = r
        else:
            self.corr = np.array(corr, dtype=float)
        if self.corr.shape != (P, P):
            raise InputError("correlation matrix shape mismatch", "corr")
        if not np.allclose(self.corr, self.corr.T) or np.any(np.abs(self.corr) > 1 + 1e-12):
            raise InputError("correlations must be symmetric with |rho| <= 1", "corr")
        if not np.allclose(np.diag(self.corr), 1.0):
            raise InputError("correlation diagonal must be 1", "corr")
        self._index = {r: k for k, r in enumerate(self.ids)}

    def __len__(self):
        return len(self.ids)

    @property
    def covariance(self) -> np.ndarray:
        return self.corr * np.outer(self.stdevs, self.stdevs)

    def indicator(self, entry) -> np.ndarray:
        v = np.zeros(len(self))
        for r in entry:
            try:
                v[self._index[str(r)]] = 1.0
            except KeyError:
                raise InputError(f"unknown resource {r!r}", "entry") from None
        return v

    @classmethod
    def from_sign_model(cls, ids, means, model: "SignCorrelationModel"):
        corr = {}
        for a, b in model.positive_pairs:
            corr[(a, b)] = model.delta
        for a, b in model.negative_pairs:
            corr[(a, b)] = -model.delta
        return cls(ids, means, None, corr)


@dataclass
class SignCorrelationModel:
    """Unit-variance resources whose pairwise correlation is 0, +delta or -delta."""

    positive_pairs: set
    negative_pairs: set
    delta: float

    def __post_init__(self):
        norm = lambda ps: {tuple(sorted(map(str, p))) for p in ps}
        self.positive_pairs = norm(self.positive_pairs)
        self.negative_pairs = norm(self.negative_pairs)
        if self.positive_pairs & self.negative_pairs:
            raise InputError("positive and negative pairs overlap", "pairs")
        if self.delta <= 0:
            raise InputError("delta must be positive", "delta")

    def _count(self, a, b):
        pos = neg = 0
        for k in a:
            for l in b:
                if k == l:
                    continue
                p = tuple(sorted((str(k), str(l))))
                pos += p in self.positive_pairs
                neg += p in self.negative_pairs
        return pos, neg

    def within(self, entry):
        """Unordered ``(n+, n-)`` correlated-pair counts inside one entry."""
        pos, neg = self._count(entry, entry)
        return pos // 2, neg // 2

    def between(self, a, b):
        """``(n+, n-)`` over ordered pairs ``k in a``, ``l in b``, ``k != l``."""
        return self._count(a, b)


def entry_mean(pool: ResourcePool, entry) -> float:
    return float(pool.means @ pool.indicator(entry))


def entry_variance(pool: ResourcePool, entry) -> float:
    v = pool.indicator(entry)
    return float(v @ pool.covariance @ v)


def entry_covariance(pool: ResourcePool, a, b) -> float:
    return float(pool.indicator(a) @ pool.covariance @ pool.indicator(b))


@dataclass
class GreedyIPConfig:
    """Parameters of the greedy construction.

    ``epsilon`` and ``gamma`` are scalars or per-entry / per-pair sequences
    (``gamma[i][j]`` for ``j < i``).  ``epsilon=None`` drops the variance
    floor; ``gamma=None`` drops the covariance caps.
    """

    M: int
    K: int
    epsilon: float | Sequence[float] | None = None
    gamma: float | Sequence[Sequence[float]] | None = None
    time_budget: float = 60.0
    variance: str = "quadratic"
    covariance: str = "exact"
    forbid_duplicates: bool = False
    backend: str | None = None

    def __post_init__(self):
        if self.M < 1 or self.K < 1:
            raise InputError("M and K must be at least 1", "config")
        if self.variance not in ("quadratic", "sign"):
            raise InputError(f"unknown variance form {self.variance!r}", "variance")
        if self.covariance not in ("exact", "overlap"):
            raise InputError(f"unknown covariance form {self.covariance!r}", "covariance")
        if self.epsilon is not None and np.any(np.asarray(self.epsilon, dtype=float) < 0):
            raise InputError("epsilon must be nonnegative", "epsilon")
        if self.gamma is not None and np.any(np.asarray(self.gamma, dtype=float) < 0):
            raise InputError("gamma must be nonnegative", "gamma")

    def eps(self, i: int):
        if self.epsilon is None or np.isscalar(self.epsilon):
            return self.epsilon
        return self.epsilon[i]

    def cap(self, i: int, j: int):
        if self.gamma is None or np.isscalar(self.gamma):
            return self.gamma
        return self.gamma[i][j]


@dataclass
class Entry:
    resources: tuple
    objective: float
    status: str


@dataclass
class PortfolioResult:
    entries: list[Entry] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


class Plugin(Protocol):
    """Adds rule-specific variables and rows to each step's program.

    Resource ``k`` of the pool is variable ``k`` of the builder.
    """

    def compile(self, builder: ProgramBuilder) -> None: ...


def _base_builder(pool: ResourcePool, config: GreedyIPConfig, plugin) -> ProgramBuilder:
    b = ProgramBuilder()
    for k, r in enumerate(pool.ids):
        b.add_var(f"x_{k}", pool.means[k])
    b.add_row({k: 1 for k in range(len(pool))}, EQ, config.K, "size")
    if plugin is not None:
        plugin.compile(b)
    return b


def _pair_var(b: ProgramBuilder, k: int, l: int) -> int:
    # the variable outlives a step but its linking rows do not, so add them every time
    name = f"y_{k}_{l}"
    try:
        y = b.var(name)
    except KeyError:
        y = b.add_var(name)
    b.add_row({y: 1, k: -1}, LE, 0, f"{name}_a")
    b.add_row({y: 1, l: -1}, LE, 0, f"{name}_b")
    b.add_row({y: 1, k: -1, l: -1}, GE, -1, f"{name}_c")
    return y


def variance_floor_rows(b: ProgramBuilder, pool: ResourcePool, eps: float, form: str):
    """Linearized ``variance >= eps`` (or ``n+ - n- >= eps`` for ``form='sign'``)."""
    P = len(pool)
    coefs: dict[int, float] = {}
    if form == "quadratic":
        for k in range(P):
            coefs[k] = pool.stdevs[k] ** 2
    cov = pool.covariance
    for k in range(P):
        for l in range(k + 1, P):
            rho = pool.corr[k, l]
            if rho == 0:
                continue
            y = _pair_var(b, k, l)
            coefs[y] = 2 * cov[k, l] if form == "quadratic" else float(np.sign(rho))
    b.add_row(coefs, GE, eps, "variance_floor")


def covariance_cap_row(pool: ResourcePool, prior: np.ndarray, cap: float, form: str, name: str) -> Row:
    if form == "overlap":
        a = prior
    else:
        a = pool.covariance @ prior
    return Row({k: float(c) for k, c in enumerate(a) if c != 0}, LE, float(cap), name)


def build_portfolio(pool: ResourcePool, config: GreedyIPConfig, plugin: Plugin | None = None) -> PortfolioResult:
    """Build up to ``config.M`` entries greedily, in creation order.

    A step that is infeasible (or times out without an incumbent) ends the
    portfolio; the entries built so far are returned with a note.
    """
    if len(pool) == 0:
        raise InputError("pool is empty", "pool")
    if config.K > len(pool):
        raise InputError(f"K={config.K} exceeds pool size {len(pool)}", "K")
    b = _base_builder(pool, config, plugin)
    rows0 = len(b.rows)
    result = PortfolioResult()
    priors: list[np.ndarray] = []
    P = len(pool)
    # feasible points from the previous step; most survive one more cap row
    hints: list = []
    for i in range(config.M):
        b.rows = b.rows[:rows0]
        eps = config.eps(i)
        # a nonpositive floor is vacuous for the quadratic form but not for n+ - n-
        if eps is not None and (eps > 0 or config.variance == "sign"):
            variance_floor_rows(b, pool, eps, config.variance)
        program = b.build()
        extra = []
        for j, xj in enumerate(priors):
            cap = config.cap(i, j)
            if cap is not None:
                extra.append(covariance_cap_row(pool, xj, cap, config.covariance, f"cap_{j}"))
            if config.forbid_duplicates:
                extra.append(covariance_cap_row(pool, xj, config.K - 1, "overlap", f"dup_{j}"))
        program = program.with_rows(extra)
        res = bip_solver.solve(program, config.time_budget, config.backend, hints=hints)
        hints = res.pool
        if res.assignment is None:
            why = "infeasible" if res.status == bip_solver.INFEASIBLE else "no incumbent within time budget"
            result.notes.append(f"entry {i + 1}: {why}; stopped after {i} entries")
            logger.info(result.notes[-1])
            break
        x = res.assignment[:P].astype(float)
        members = tuple(pool.ids[k] for k in np.flatnonzero(x))
        result.entries.append(Entry(members, float(pool.means @ x), res.status))
        priors.append(x)
        if res.status != bip_solver.OPTIMAL:
            result.notes.append(f"entry {i + 1}: {res.status}")
    return result


class GreedyPortfolio(BaseEstimator):
    """Estimator wrapper around :func:`build_portfolio`.

    ``fit(pool)`` stores the entries in ``entries_``; ``transform(pool)``
    returns the entry-by-resource 0-1 matrix.
    """

    def __init__(self, n_entries=10, entry_size=5, epsilon=None, gamma=None,
                 variance="quadratic", covariance="exact", forbid_duplicates=False,
                 time_budget=60.0, backend=None):
        self.n_entries = n_entries
        self.entry_size = entry_size
        self.epsilon = epsilon
        self.gamma = gamma
        self.variance = variance
        self.covariance = covariance
        self.forbid_duplicates = forbid_duplicates
        self.time_budget = time_budget
        self.backend = backend

    def _config(self):
        return GreedyIPConfig(
            self.n_entries, self.entry_size, self.epsilon, self.gamma, self.time_budget,
            self.variance, self.covariance, self.forbid_duplicates, self.backend,
        )

    def fit(self, pool: ResourcePool, y=None, plugin: Plugin | None = None):
        self.result_ = build_portfolio(pool, self._config(), plugin)
        self.entries_ = [e.resources for e in self.result_.entries]
        return self

    def transform(self, pool: ResourcePool):
        if not hasattr(self, "entries_"):
            from sklearn.exceptions import NotFittedError
            raise NotFittedError("GreedyPortfolio is not fitted")
        return np.array([pool.indicator(e) for e in self.entries_]).reshape(-1, len(pool))
