"""Ground-truth games: directed graph, head coefficients, and coefficient tails.

A game stores, for every player i and in-neighbor j, the leading ``r_head``
expansion coefficients of the pairwise utility u_ij plus a parametric
descriptor of the remaining coefficients (exactly zero, or a summable
power-law envelope with alternating signs).  Utilities are evaluated as
truncations of the implied series.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta

from .basis import BasisSet

__all__ = [
    "ZeroTail",
    "PowerLawTail",
    "GameSpec",
    "true_utility",
    "generate_game",
    "game_to_json",
    "game_from_json",
    "save_game",
    "load_game",
]


@dataclass(frozen=True)
class ZeroTail:
    """No coefficients beyond the stored head."""

    def coefficient(self, k: int) -> float:
        return 0.0

    def sum_beyond(self, r: int) -> float:
        return 0.0

    def to_json(self) -> dict:
        return {"kind": "zero"}


@dataclass(frozen=True)
class PowerLawTail:
    """|coefficient(k)| = coef / k**exponent with alternating sign.

    ``k`` is the 1-based position in the full expansion.  exponent >= 2 keeps
    the series absolutely summable with an exactly computable remainder.
    """

    coef: float
    exponent: float = 2.0

    def __post_init__(self):
        if self.exponent < 2:
            raise ValueError("tail exponent must be >= 2 for absolute summability")
        if self.coef < 0:
            raise ValueError("tail coefficient scale must be nonnegative")

    def coefficient(self, k: int) -> float:
        return (-1.0) ** k * self.coef / float(k) ** self.exponent

    def sum_beyond(self, r: int) -> float:
        """Exact absolute tail mass sum_{k>r} coef/k^p (Hurwitz zeta)."""
        return float(self.coef * zeta(self.exponent, r + 1))

    def to_json(self) -> dict:
        return {"kind": "power_law", "coef": self.coef, "exponent": self.exponent}


def tail_from_json(obj: dict):
    kind = obj.get("kind")
    if kind == "zero":
        return ZeroTail()
    if kind == "power_law":
        return PowerLawTail(coef=float(obj["coef"]), exponent=float(obj["exponent"]))
    raise ValueError(f"unknown tail kind: {kind!r}")


@dataclass(frozen=True, eq=False)
class GameSpec:
    """A continuous-action game with pairwise utilities.

    neighbors[i] is the ascending tuple of in-neighbors of player i;
    coefficients[i, j, k] is the k-th head coefficient of the pairwise
    utility that neighbor j contributes to player i (zero when j is not an
    in-neighbor).  ``degree`` bounds every |neighbors[i]| from above, and
    ``action_budget`` bounds each player's action norm.
    """

    n: int
    degree: int
    neighbors: tuple[tuple[int, ...], ...]
    coefficients: np.ndarray
    tail: ZeroTail | PowerLawTail = field(default_factory=ZeroTail)
    action_budget: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        coef = np.ascontiguousarray(np.asarray(self.coefficients, dtype=float))
        if coef.shape[:2] != (self.n, self.n):
            raise ValueError("coefficients must have shape (n, n, r_head)")
        if not np.all(np.isfinite(coef)):
            raise ValueError("coefficients must be finite")
        if not 0 <= self.degree <= self.n - 1:
            raise ValueError("degree bound must lie in [0, n-1]")
        if self.action_budget <= 0:
            raise ValueError("action budget must be positive")
        nbrs = tuple(tuple(sorted(set(s))) for s in self.neighbors)
        if len(nbrs) != self.n:
            raise ValueError("need one neighbor set per player")
        for i, s in enumerate(nbrs):
            if i in s:
                raise ValueError(f"player {i} cannot be its own in-neighbor")
            if any(not 0 <= j < self.n for j in s):
                raise ValueError(f"neighbor index out of range for player {i}")
            if len(s) > self.degree:
                raise ValueError(f"player {i} exceeds the degree bound")
        # the nonzero pattern of the head must match the edge set
        for i in range(self.n):
            for j in range(self.n):
                if j == i or j not in nbrs[i]:
                    if np.any(coef[i, j] != 0.0):
                        raise ValueError(
                            f"nonzero coefficients on the non-edge ({j} -> {i})"
                        )
        coef.flags.writeable = False
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "neighbors", nbrs)

    @property
    def r_head(self) -> int:
        return self.coefficients.shape[2]

    def in_neighbors(self, i: int) -> tuple[int, ...]:
        return self.neighbors[i]

    def edges(self) -> tuple[tuple[int, int], ...]:
        """Directed edges (j, i) meaning j influences i, sorted."""
        return tuple(
            sorted((j, i) for i in range(self.n) for j in self.neighbors[i])
        )

    def head_l1(self, i: int) -> float:
        """Total head coefficient mass of player i's utility."""
        return float(np.abs(self.coefficients[i]).sum())

    def min_head_weight(self, i: int | None = None) -> float:
        """Smallest nonzero head coefficient magnitude (inf if none)."""
        if i is None:
            block = self.coefficients
        else:
            block = self.coefficients[i]
        mags = np.abs(block[block != 0.0])
        return float(mags.min()) if mags.size else float("inf")

    def coefficient_series(self, i: int, j: int, upto: int) -> np.ndarray:
        """First ``upto`` expansion coefficients of u_ij (head then tail)."""
        out = np.zeros(upto)
        head = min(self.r_head, upto)
        out[:head] = self.coefficients[i, j, :head]
        if j in self.neighbors[i]:
            for k in range(self.r_head, upto):
                out[k] = self.tail.coefficient(k + 1)
        return out


def true_utility(
    game: GameSpec,
    basis: BasisSet,
    i: int,
    x,
    tail_truncation: int | None = None,
):
    """Truncated-series utility of player i at joint action(s) x.

    ``x`` is one joint action of shape (n,) or a batch of shape (N, n).
    The sum runs over in-neighbors and series positions 0..tail_truncation-1,
    with tail coefficients materialized from the game's descriptor; it is a
    truncation of the underlying infinite expansion.
    """
    T = basis.r if tail_truncation is None else int(tail_truncation)
    if T < basis.r:
        raise ValueError("tail_truncation must be at least the basis size r")
    x = np.asarray(x, dtype=float)
    batch = x.ndim == 2
    X = x if batch else x[None, :]
    if X.shape[1] != game.n:
        raise ValueError("joint action length must equal the number of players")
    total = np.zeros(X.shape[0])
    for j in game.in_neighbors(i):
        coeffs = game.coefficient_series(i, j, T)
        head = min(basis.r, T)
        block = basis.profile(X[:, i], X[:, j])[:, :head]
        total += block @ coeffs[:head]
        for k in range(head, T):
            if coeffs[k] != 0.0:
                total += coeffs[k] * basis.term_any(k, X[:, i], X[:, j])
    return total if batch else float(total[0])


def generate_game(
    n: int,
    d: int,
    r: int,
    seed,
    min_weight: float,
    tail=None,
    action_budget: float = 1.0,
) -> GameSpec:
    """Random game with d in-neighbors per player and strong head coefficients.

    Every player draws d in-neighbors uniformly without replacement; every
    head coefficient is drawn uniformly from +-[min_weight, 2*min_weight], so
    no nonzero magnitude falls below min_weight.  Deterministic under seed.
    """
    if not 1 <= d <= n - 1:
        raise ValueError("need 1 <= d <= n-1")
    if min_weight <= 0:
        raise ValueError("min_weight must be positive")
    if tail is None:
        tail = ZeroTail()
    rng = np.random.default_rng(seed)
    neighbors = []
    for i in range(n):
        others = np.array([j for j in range(n) if j != i])
        picked = rng.choice(others, size=d, replace=False)
        neighbors.append(tuple(sorted(int(j) for j in picked)))
    coef = np.zeros((n, n, r))
    for i in range(n):
        for j in neighbors[i]:
            mags = rng.uniform(min_weight, 2.0 * min_weight, size=r)
            signs = rng.integers(0, 2, size=r) * 2 - 1
            coef[i, j] = signs * mags
    seed_note = seed if isinstance(seed, (int, np.integer)) else None
    return GameSpec(
        n=n,
        degree=d,
        neighbors=tuple(neighbors),
        coefficients=coef,
        tail=tail,
        action_budget=action_budget,
        seed=int(seed_note) if seed_note is not None else None,
    )


def game_to_json(game: GameSpec) -> dict:
    return {
        "n": game.n,
        "degree": game.degree,
        "neighbors": [list(s) for s in game.neighbors],
        "coefficients": game.coefficients.tolist(),
        "tail": game.tail.to_json(),
        "action_budget": game.action_budget,
        "seed": game.seed,
    }


def game_from_json(obj: dict) -> GameSpec:
    return GameSpec(
        n=int(obj["n"]),
        degree=int(obj["degree"]),
        neighbors=tuple(tuple(int(j) for j in s) for s in obj["neighbors"]),
        coefficients=np.asarray(obj["coefficients"], dtype=float),
        tail=tail_from_json(obj["tail"]),
        action_budget=float(obj["action_budget"]),
        seed=obj.get("seed"),
    )


def save_game(game: GameSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(game_to_json(game), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_game(path) -> GameSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return game_from_json(json.load(fh))
