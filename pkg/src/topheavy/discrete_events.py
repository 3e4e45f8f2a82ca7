"""Union probability over finite spaces, its pairwise surrogate, and greedy selection.

Events live on a finite sample space given as atoms with probabilities. All
quantities are computed by direct atom enumeration, so they are exact up to
float summation and serve as the reference for the Gaussian and IP layers.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import CapacityError, InputError

PROB_TOL = 1e-12
PATTERN_GUARD = 20
# multiplicative tolerance for the p0 = (1-p)^M hypothesis check
P0_REL_TOL = 1e-9
# gains closer than this count as tied, so the lower index wins
GAIN_TIE_TOL = 1e-14


@dataclass(frozen=True)
class DiscreteEventSpace:
    """Atoms with probabilities plus named events (sets of atoms).

    Probabilities must already sum to one; nothing is renormalized.
    """

    atom_ids: tuple
    probs: np.ndarray
    event_ids: tuple
    masks: np.ndarray = field(repr=False)  # (n_events, n_atoms) bool

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size != len(self.atom_ids):
            raise InputError("one probability per atom required", "atoms")
        if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise InputError("atom probabilities must lie in [0, 1]", "atoms")
        total = math.fsum(p)
        if abs(total - 1.0) > PROB_TOL:
            raise InputError(f"atom probabilities sum to {total!r}, not 1", "atoms")
        if len(set(self.atom_ids)) != len(self.atom_ids):
            raise InputError("duplicate atom id", "atoms")
        if len(set(self.event_ids)) != len(self.event_ids):
            raise InputError("duplicate event id", "events")
        masks = np.asarray(self.masks, dtype=bool).reshape(len(self.event_ids), p.size)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "_event_index", {e: i for i, e in enumerate(self.event_ids)})

    @classmethod
    def from_sets(cls, atoms, events) -> "DiscreteEventSpace":
        """``atoms`` maps atom-id -> probability, ``events`` maps event-id -> atom ids."""
        atoms = dict(atoms)
        atom_ids = tuple(atoms)
        pos = {a: i for i, a in enumerate(atom_ids)}
        events = dict(events)
        masks = np.zeros((len(events), len(atom_ids)), dtype=bool)
        for i, (eid, members) in enumerate(events.items()):
            for a in members:
                if a not in pos:
                    raise InputError(f"event {eid!r} references unknown atom {a!r}", "events")
                masks[i, pos[a]] = True
        return cls(atom_ids, np.array([atoms[a] for a in atom_ids], dtype=float),
                   tuple(events), masks)

    @classmethod
    def from_json(cls, source) -> "DiscreteEventSpace":
        """Load ``{"atoms":[{"id","p"}], "events":[{"id","atoms"}]}`` from a path or dict."""
        if isinstance(source, dict):
            doc = source
        else:
            with open(source) as fh:
                doc = json.load(fh)
        try:
            atoms = [(a["id"], float(a["p"])) for a in doc["atoms"]]
            events = [(e["id"], list(e["atoms"])) for e in doc["events"]]
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed event-space document ({exc})", "json") from exc
        if len({a for a, _ in atoms}) != len(atoms):
            raise InputError("duplicate atom id", "atoms")
        if len({e for e, _ in events}) != len(events):
            raise InputError("duplicate event id", "events")
        return cls.from_sets(atoms, events)

    def to_json(self) -> dict:
        return {
            "atoms": [{"id": a, "p": float(p)} for a, p in zip(self.atom_ids, self.probs)],
            "events": [{"id": e, "atoms": [self.atom_ids[j] for j in np.flatnonzero(m)]}
                       for e, m in zip(self.event_ids, self.masks)],
        }

    @property
    def n_events(self) -> int:
        return len(self.event_ids)

    def index(self, event) -> int:
        """Position of an event given by id (or already an int position)."""
        if isinstance(event, (int, np.integer)) and not isinstance(event, bool):
            if not 0 <= event < self.n_events:
                raise InputError(f"event index {event} out of range", "S")
            return int(event)
        try:
            return self._event_index[event]
        except KeyError:
            raise InputError(f"unknown event {event!r}", "S") from None

    def resolve(self, S: Iterable, allow_empty=False) -> list[int]:
        """Validate an event subset and return its positions in order."""
        idx = [self.index(e) for e in S]
        if not idx and not allow_empty:
            raise InputError("event subset must be nonempty", "S")
        if len(set(idx)) != len(idx):
            raise InputError("event subset contains duplicates", "S")
        return idx

    def prob(self, event) -> float:
        return _mass(self.probs, self.masks[self.index(event)])


def _mass(p, mask) -> float:
    return math.fsum(p[mask])


def union_probability(space: DiscreteEventSpace, S) -> float:
    """P(at least one event of S occurs), summed over the atoms in the union."""
    idx = space.resolve(S)
    return _mass(space.probs, space.masks[idx].any(axis=0))


def union_probability_independent(p: Sequence[float]) -> float:
    """1 - prod(1 - p_i) for independent events."""
    p = _check_probs(p)
    return float(1.0 - np.prod(1.0 - p))


def top_m_independent(p: Sequence[float], M: int) -> list[int]:
    """Indices of the M largest probabilities (lowest index first among ties).

    Returned in ascending index order.
    """
    p = _check_probs(p)
    M = _check_m(M, p.size)
    order = sorted(range(p.size), key=lambda i: (-p[i], i))
    return sorted(order[:M])


def u2_surrogate(space: DiscreteEventSpace, S) -> float:
    """Sum of P(E) minus the sum of P(E and F) over unordered pairs in S."""
    idx = space.resolve(S)
    masks = space.masks[idx]
    singles = math.fsum(_mass(space.probs, m) for m in masks)
    pairs = math.fsum(_mass(space.probs, masks[a] & masks[b])
                      for a, b in itertools.combinations(range(len(idx)), 2))
    return singles - pairs


def exclusive_pattern_probabilities(space: DiscreteEventSpace, S) -> dict[tuple, float]:
    """p'_T for every T subset of S: all of T occur and nothing else in S does.

    Keys are tuples of event ids in the order given by S; the empty tuple
    holds p0(S). Every subset is present, including zero-probability ones.
    """
    idx = space.resolve(S)
    if len(idx) > PATTERN_GUARD:
        raise CapacityError(f"|S|={len(idx)} exceeds the pattern guard {PATTERN_GUARD}", "S")
    weights = 1 << np.arange(len(idx), dtype=np.int64)
    codes = weights @ space.masks[idx].astype(np.int64)
    buckets: dict[int, list] = {}
    for code, pr in zip(codes.tolist(), space.probs.tolist()):
        buckets.setdefault(code, []).append(pr)
    ids = [space.event_ids[i] for i in idx]
    out = {}
    for code in range(1 << len(idx)):
        key = tuple(ids[b] for b in range(len(idx)) if code >> b & 1)
        out[key] = math.fsum(buckets.get(code, ()))
    return out


def u2_via_patterns(space: DiscreteEventSpace, S) -> float:
    """The surrogate rewritten over exclusive patterns: 1/2 sum_l l(3-l) sum_{|T|=l} p'_T."""
    pats = exclusive_pattern_probabilities(space, S)
    return 0.5 * math.fsum(len(T) * (3 - len(T)) * v for T, v in pats.items() if T)


@dataclass(frozen=True)
class Theorem5Conditions:
    """Hypotheses of the conditional gap bound between U and U2."""

    p: float
    delta: float
    c1: float
    N: int
    M: int

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise InputError("p must lie in (0, 1)", "p")
        if self.delta <= 0:
            raise InputError("delta must be positive", "delta")
        if self.c1 <= 0:
            raise InputError("c1 must be positive", "c1")
        if self.N < 1 or self.M < 1:
            raise InputError("N and M must be positive integers", "N")

    @property
    def scale(self) -> float:
        return self.N ** (-self.delta)

    def regime_holds(self) -> bool:
        return self.p * self.M < self.scale < 1 / 3

    @property
    def bound(self) -> float:
        return 24 * self.c1 * self.scale


@dataclass(frozen=True)
class GapReport:
    U: float
    U2: float
    gap: float
    bound: float
    hypotheses_hold: bool
    within_bound: bool
    reasons: tuple = ()


def theorem5_gap_check(space: DiscreteEventSpace, S, cond: Theorem5Conditions) -> GapReport:
    """Relative gap (U - U2)/U against 24 c1 N^-delta, with the hypotheses checked numerically.

    Violated hypotheses are reported in ``reasons``; nothing is raised.
    """
    idx = space.resolve(S)
    pats = exclusive_pattern_probabilities(space, idx)
    # summing the nonempty patterns avoids cancellation in 1 - p0
    U = math.fsum(v for T, v in pats.items() if T)
    U2 = 0.5 * math.fsum(len(T) * (3 - len(T)) * v for T, v in pats.items() if T)
    gap = (U - U2) / U if U > 0 else 0.0
    reasons = []
    if len(idx) != cond.M:
        reasons.append(f"|S|={len(idx)} but M={cond.M}")
    if not cond.regime_holds():
        reasons.append("requires p*M < N^-delta < 1/3")
    p0 = (1 - cond.p) ** cond.M
    if abs(pats[()] - p0) > P0_REL_TOL * p0:
        reasons.append(f"p0={pats[()]!r} differs from (1-p)^M={p0!r}")
    for T, v in pats.items():
        if T and v > cond.c1 * cond.p ** len(T) * (1 + P0_REL_TOL):
            reasons.append(f"p'_T exceeds c1*p^l for T={T}")
            break
    return GapReport(U, U2, gap, cond.bound, not reasons, gap <= cond.bound, tuple(reasons))


def greedy_select(space: DiscreteEventSpace, candidates, M: int, objective: str = "exact") -> list:
    """Greedy maximization of U (``"exact"``) or U2 (``"u2"``), returning event ids in pick order.

    Each step takes the largest marginal gain; near-ties go to the lowest
    candidate position.
    """
    cand = space.resolve(candidates)
    M = _check_m(M, len(cand))
    if objective not in ("exact", "u2"):
        raise InputError(f"unknown objective {objective!r}", "objective")
    p = space.probs
    covered = np.zeros(p.size, dtype=bool)
    chosen: list[int] = []
    remaining = list(cand)
    for _ in range(M):
        best, best_gain = None, -math.inf
        for e in remaining:
            m = space.masks[e]
            if objective == "exact":
                gain = _mass(p, m & ~covered)
            else:
                gain = _mass(p, m) - math.fsum(_mass(p, m & space.masks[f]) for f in chosen)
            if gain > best_gain + GAIN_TIE_TOL:
                best, best_gain = e, gain
        chosen.append(best)
        remaining.remove(best)
        covered |= space.masks[best]
    return [space.event_ids[e] for e in chosen]


def max_coverage_space(ground: Sequence, sets: dict, weights: dict | None = None) -> DiscreteEventSpace:
    """Weighted max-coverage as a union-probability instance (uniform when unweighted)."""
    ground = list(ground)
    if not ground:
        raise InputError("ground set is empty", "ground")
    if weights is None:
        w = np.full(len(ground), 1.0 / len(ground))
    else:
        w = np.array([float(weights[g]) for g in ground])
        if np.any(w < 0) or w.sum() <= 0:
            raise InputError("weights must be nonnegative with positive total", "weights")
        w = w / w.sum()
    return DiscreteEventSpace.from_sets(zip(ground, w), sets)


def independent_space(p: Sequence[float], ids: Sequence | None = None) -> DiscreteEventSpace:
    """Product space of independent events E_i with P(E_i)=p_i (2^N atoms)."""
    p = _check_probs(p)
    n = p.size
    if n > PATTERN_GUARD:
        raise CapacityError(f"{n} independent events exceed the guard {PATTERN_GUARD}", "p")
    ids = tuple(ids) if ids is not None else tuple(f"E{i}" for i in range(n))
    codes = np.arange(1 << n)
    bits = (codes[None, :] >> np.arange(n)[:, None]) & 1
    probs = np.prod(np.where(bits == 1, p[:, None], 1.0 - p[:, None]), axis=0)
    atom_ids = tuple(format(c, f"0{n}b")[::-1] for c in codes)
    return DiscreteEventSpace(atom_ids, probs, ids, bits.astype(bool))


def _check_probs(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise InputError("expected a 1-d list of probabilities", "p")
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        bad = int(np.flatnonzero(~((p >= 0) & (p <= 1)))[0])
        raise InputError(f"p[{bad}]={p[bad]!r} is outside [0, 1]", "p")
    return p


def _check_m(M, n) -> int:
    if int(M) != M or M < 1:
        raise InputError("M must be a positive integer", "M")
    if M > n:
        raise InputError(f"M={M} exceeds the {n} available events", "M")
    return int(M)
