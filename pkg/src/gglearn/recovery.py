"""From per-player coefficient estimates to a recovered graph and payoffs."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .basis import BasisSet, all_feature_matrices, feature_matrix, feature_vector, flat_pairs
from .game import GameSpec, true_utility
from .sampling import SampleSet
from .solver import SolverConfig, SolverResult, solve_player

__all__ = [
    "PlayerEstimate",
    "RecoveryResult",
    "StructureMetrics",
    "extract_support",
    "assemble_graph",
    "reconstruct_payoff",
    "payoff_error",
    "structure_metrics",
    "learn_game",
    "graph_to_dot",
    "graph_to_adjacency",
]

DEFAULT_SUPPORT_THRESHOLD = 1e-7  # 10x the solver's default KKT tolerance


@dataclass
class PlayerEstimate:
    player: int
    beta: np.ndarray
    support: tuple[int, ...]
    signs: np.ndarray

    def to_json(self) -> dict:
        return {
            "player": self.player,
            "beta": self.beta.tolist(),
            "support": list(self.support),
            "signs": self.signs.astype(int).tolist(),
        }


@dataclass
class RecoveryResult:
    """Recovered directed structure with the per-player estimates behind it."""

    n: int
    r: int
    graph: tuple[tuple[int, int], ...]
    per_player: dict[int, PlayerEstimate]
    support_threshold: float

    def in_neighbors(self, i: int) -> tuple[int, ...]:
        return self.per_player[i].support

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "graph": [list(e) for e in self.graph],
            "per_player": {str(i): est.to_json() for i, est in self.per_player.items()},
            "support_threshold": self.support_threshold,
        }


@dataclass
class StructureMetrics:
    exact_match: bool
    edge_precision: float
    edge_recall: float
    sign_consistency: bool

    def to_json(self) -> dict:
        return {
            "exact_match": self.exact_match,
            "edge_precision": self.edge_precision,
            "edge_recall": self.edge_recall,
            "sign_consistency": self.sign_consistency,
        }


def _beta_of(result) -> np.ndarray:
    return np.asarray(getattr(result, "beta", result), dtype=float)


def extract_support(result, tau: float, player: int, n: int, r: int) -> tuple[int, ...]:
    """In-neighbors implied by an estimate: j with max_k |beta_{jk}| > tau."""
    if tau < 0:
        raise ValueError("support threshold must be nonnegative")
    beta = _beta_of(result)
    if beta.shape != ((n - 1) * r,):
        raise ValueError("estimate length does not match (n-1)*r")
    picked = []
    for pos, j in enumerate(j for j in range(n) if j != player):
        if np.abs(beta[pos * r : (pos + 1) * r]).max() > tau:
            picked.append(j)
    return tuple(picked)


def assemble_graph(supports: dict[int, tuple[int, ...]]) -> tuple[tuple[int, int], ...]:
    """Union of per-player in-neighborhoods as directed edges (j, i)."""
    return tuple(sorted((j, i) for i, s in supports.items() for j in s))


def reconstruct_payoff(beta, basis: BasisSet, i: int, x) -> float:
    """Finite-expansion payoff at joint action x under estimated coefficients."""
    phi = feature_vector(basis, i, np.asarray(x, dtype=float))
    return float(phi @ _beta_of(beta))


def _default_test_points(game: GameSpec, beta, i: int, n: int, r: int, rng_seed=0):
    """Deterministic per-edge grids (others pinned at 0.5) plus random joints."""
    beta = _beta_of(beta)
    est_support = extract_support(beta, 0.0, i, n, r)
    probe = sorted(set(game.in_neighbors(i)) | set(est_support))
    pts = []
    grid = np.linspace(0.0, 1.0, 101)
    gi, gj = np.meshgrid(grid, grid, indexing="ij")
    for j in probe:
        block = np.full((gi.size, n), 0.5)
        block[:, i] = gi.ravel()
        block[:, j] = gj.ravel()
        pts.append(block)
    rng = np.random.default_rng(rng_seed)
    pts.append(rng.uniform(0.0, 1.0, size=(1000, n)))
    return np.concatenate(pts, axis=0) if pts else rng.uniform(0, 1, (1000, n))


def payoff_error(
    game: GameSpec,
    beta,
    basis: BasisSet,
    i: int,
    test_points=None,
    tail_truncation: int | None = None,
) -> dict:
    """Sup and mean absolute gap between true and reconstructed payoffs.

    The default evaluation set is a 101x101 grid over the (x_i, x_j) square
    for every true or estimated edge, other coordinates pinned at 0.5, plus
    1000 seeded random joint actions.
    """
    beta = _beta_of(beta)
    n, r = game.n, basis.r
    if test_points is None:
        test_points = _default_test_points(game, beta, i, n, r)
    pts = np.asarray(test_points, dtype=float)
    truth = true_utility(game, basis, i, pts, tail_truncation)
    estimate = feature_matrix(basis, i, pts) @ beta
    gap = np.abs(truth - estimate)
    return {"max_abs_err": float(gap.max()), "mean_abs_err": float(gap.mean())}


def structure_metrics(
    truth: GameSpec,
    rec: RecoveryResult,
    weight_floor: float | None = None,
) -> StructureMetrics:
    """Edge-set agreement and head-coefficient sign agreement.

    ``sign_consistency`` holds iff for every true edge, every head
    coefficient with magnitude at least ``weight_floor`` (all nonzero heads
    when None) has a matching estimated sign.
    """
    if rec.n != truth.n:
        raise ValueError("player counts differ")
    true_edges = set(truth.edges())
    rec_edges = set(rec.graph)
    tp = len(true_edges & rec_edges)
    precision = tp / len(rec_edges) if rec_edges else 1.0
    recall = tp / len(true_edges) if true_edges else 1.0
    exact = true_edges == rec_edges

    r_cmp = min(truth.r_head, rec.r)
    floor = 0.0 if weight_floor is None else weight_floor
    consistent = True
    for i in range(truth.n):
        est = rec.per_player[i].beta
        pairs = flat_pairs(i, truth.n, rec.r)
        for flat, (j, k) in enumerate(pairs):
            if j not in truth.neighbors[i] or k >= r_cmp:
                continue
            true_c = truth.coefficients[i, j, k]
            if true_c == 0.0 or abs(true_c) < floor:
                continue
            if np.sign(est[flat]) != np.sign(true_c):
                consistent = False
    return StructureMetrics(
        exact_match=exact,
        edge_precision=precision,
        edge_recall=recall,
        sign_consistency=consistent,
    )


def learn_game(
    samples: SampleSet,
    basis: BasisSet,
    cfg: SolverConfig | dict[int, SolverConfig],
    tau: float = DEFAULT_SUPPORT_THRESHOLD,
    jobs: int = 1,
) -> tuple[RecoveryResult, dict[int, SolverResult]]:
    """Solve every player's problem and combine the supports into one graph.

    ``cfg`` may be a single config shared by all players or a per-player
    mapping (different penalty weights).  Player problems are independent;
    ``jobs`` > 1 runs them on a thread pool with identical results.
    """
    n, r = samples.n_players, basis.r
    configs = cfg if isinstance(cfg, dict) else {i: cfg for i in range(n)}
    designs = all_feature_matrices(basis, samples.actions)

    def run(i: int) -> tuple[int, SolverResult]:
        return i, solve_player(designs[i], samples.payoffs[:, i], configs[i])

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            solved = dict(pool.map(run, range(n)))
    else:
        solved = dict(run(i) for i in range(n))

    per_player: dict[int, PlayerEstimate] = {}
    for i in range(n):
        res = solved[i]
        support = extract_support(res, tau, i, n, r)
        per_player[i] = PlayerEstimate(
            player=i,
            beta=res.beta,
            support=support,
            signs=np.sign(res.beta),
        )
    graph = assemble_graph({i: per_player[i].support for i in range(n)})
    return (
        RecoveryResult(
            n=n, r=r, graph=graph, per_player=per_player, support_threshold=tau
        ),
        solved,
    )


def graph_to_dot(edges, n: int) -> str:
    lines = ["digraph recovered {"]
    for i in range(n):
        lines.append(f"  p{i};")
    for j, i in sorted(edges):
        lines.append(f"  p{j} -> p{i};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_adjacency(edges, n: int) -> dict:
    adj: dict[str, list[int]] = {str(i): [] for i in range(n)}
    for j, i in sorted(edges):
        adj[str(i)].append(j)
    return {"n": n, "in_neighbors": adj}
