"""Structural side constraints on supports.

Partial support knowledge, per-node degree bounds, average-degree targets
and hub budgets, enforced inside the master branch-and-bound through a
complete-support check and a sound (not tight) partial-assignment pruner.
Degrees are full graph degrees d_i = sum_{j != i} Z_ij.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import InvalidInput


@dataclass(frozen=True)
class KnownZero:
    """Pairs whose precision entries are known to vanish."""

    pairs: frozenset

    def __init__(self, pairs):
        object.__setattr__(self, "pairs", frozenset((int(i), int(j)) if i < j else (int(j), int(i)) for i, j in pairs))


@dataclass(frozen=True)
class KnownOne:
    """Pairs known to be in the support (consume cardinality budget)."""

    pairs: frozenset

    def __init__(self, pairs):
        object.__setattr__(self, "pairs", frozenset((int(i), int(j)) if i < j else (int(j), int(i)) for i, j in pairs))


@dataclass(frozen=True)
class DegreeBounds:
    """Per-node degree window: lower[i] <= d_i <= upper[i]."""

    lower: tuple
    upper: tuple

    def __init__(self, lower, upper):
        lower = tuple(int(x) for x in lower)
        upper = tuple(int(x) for x in upper)
        if len(lower) != len(upper):
            raise InvalidInput("degree bound arrays must have equal length")
        for lo, hi in zip(lower, upper):
            if not 0 <= lo <= hi:
                raise InvalidInput(f"invalid degree window [{lo}, {hi}]")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)


@dataclass(frozen=True)
class AverageDegree:
    """|mean degree - target| <= slack.

    Since the degree sum is twice the pair count, this is exactly a window
    on the number of pairs: ceil(p(target - slack)/2) <= |pairs| <=
    floor(p(target + slack)/2).
    """

    target: float
    slack: float

    def pair_window(self, p):
        lo = max(0, math.ceil(p * (self.target - self.slack) / 2.0 - 1e-12))
        hi = math.floor(p * (self.target + self.slack) / 2.0 + 1e-12)
        return lo, hi


@dataclass(frozen=True)
class Hubs:
    """At most ``max_hubs`` nodes may exceed degree ``d_low``; none ``d_high``.

    Equivalent to the binary hub-indicator encoding d_i <= d_low +
    (d_high - d_low) y_i, sum y_i <= m, with the indicators eliminated.
    """

    d_low: int
    d_high: int
    max_hubs: int

    def __post_init__(self):
        if not (0 <= self.d_low <= self.d_high):
            raise InvalidInput("need 0 <= d_low <= d_high")
        if self.max_hubs < 0:
            raise InvalidInput("max_hubs must be nonnegative")


def _degrees(pairs, p):
    deg = [0] * p
    for i, j in pairs:
        deg[i] += 1
        deg[j] += 1
    return deg


def check_complete(z, constraints):
    """True iff the complete support satisfies every constraint."""
    pairs = set(z.pairs)
    p = z.dim
    deg = _degrees(pairs, p)
    for cs in constraints:
        if isinstance(cs, KnownZero):
            if pairs & cs.pairs:
                return False
        elif isinstance(cs, KnownOne):
            if not cs.pairs <= pairs:
                return False
        elif isinstance(cs, DegreeBounds):
            if len(cs.lower) != p:
                raise InvalidInput("degree bounds sized for a different dim")
            for i in range(p):
                if not cs.lower[i] <= deg[i] <= cs.upper[i]:
                    return False
        elif isinstance(cs, AverageDegree):
            lo, hi = cs.pair_window(p)
            if not lo <= len(pairs) <= hi:
                return False
        elif isinstance(cs, Hubs):
            if any(d > cs.d_high for d in deg):
                return False
            if sum(1 for d in deg if d > cs.d_low) > cs.max_hubs:
                return False
        else:
            raise InvalidInput(f"unknown constraint {cs!r}")
    return True


def prune_partial(fixed_one, fixed_zero, free, budget_left, constraints, p):
    """False only when no completion within budget can satisfy the constraints.

    Sound, deliberately incomplete pruning: per-node attainable degree
    intervals, remaining-budget sufficiency for degree deficits and
    known-one pairs, hub-count lower bounds and pair-count windows.
    """
    fixed_one = set(fixed_one)
    fixed_zero = set(fixed_zero)
    free = set(free)
    if budget_left < 0:
        return False
    deg1 = _degrees(fixed_one, p)
    inc = _degrees(free, p)
    for cs in constraints:
        if isinstance(cs, KnownZero):
            if fixed_one & cs.pairs:
                return False
        elif isinstance(cs, KnownOne):
            missing = cs.pairs - fixed_one
            if missing & fixed_zero:
                return False
            if not missing <= (free | fixed_one):
                return False
            if len(missing) > budget_left:
                return False
        elif isinstance(cs, DegreeBounds):
            if len(cs.lower) != p:
                raise InvalidInput("degree bounds sized for a different dim")
            deficit = 0
            for i in range(p):
                if deg1[i] > cs.upper[i]:
                    return False
                if deg1[i] + inc[i] < cs.lower[i]:
                    return False
                deficit += max(0, cs.lower[i] - deg1[i])
            # each added pair covers at most two unit deficits
            if math.ceil(deficit / 2.0) > budget_left:
                return False
        elif isinstance(cs, AverageDegree):
            lo, hi = cs.pair_window(p)
            n1 = len(fixed_one)
            reachable_hi = n1 + min(budget_left, len(free))
            if n1 > hi or reachable_hi < lo:
                return False
        elif isinstance(cs, Hubs):
            if any(d > cs.d_high for d in deg1):
                return False
            if sum(1 for d in deg1 if d > cs.d_low) > cs.max_hubs:
                return False
        else:
            raise InvalidInput(f"unknown constraint {cs!r}")
    return True


def load_constraints(path):
    """Parse the JSON constraint file consumed by the CLI.

    Recognized fields: ``known_zero`` / ``known_one`` (0-based index-pair
    lists), ``degree_lower`` / ``degree_upper`` (arrays), ``average_degree``
    ({target, slack}) and ``hubs`` ({d_low, d_high, max_hubs}).
    """
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"constraint file {path}: {exc}") from exc
    out = []
    if data.get("known_zero"):
        out.append(KnownZero(tuple(map(tuple, data["known_zero"]))))
    if data.get("known_one"):
        out.append(KnownOne(tuple(map(tuple, data["known_one"]))))
    if "degree_lower" in data or "degree_upper" in data:
        lower = data.get("degree_lower")
        upper = data.get("degree_upper")
        if lower is None or upper is None:
            raise InvalidInput("degree bounds need both degree_lower and degree_upper")
        out.append(DegreeBounds(lower, upper))
    if "average_degree" in data:
        ad = data["average_degree"]
        out.append(AverageDegree(float(ad["target"]), float(ad["slack"])))
    if "hubs" in data:
        hb = data["hubs"]
        out.append(Hubs(int(hb["d_low"]), int(hb["d_high"]), int(hb["max_hubs"])))
    return out
