"""Loading real tabular action/payoff data and influence rankings.

The expected shape is two CSV tables with one row per observation (year)
and one column per player: actions in one file, payoffs in the other.
Actions are normalized into [0,1] per column so the built-in basis domain
applies; payoffs pass through unscaled.

The repo does not bundle any external dataset.  ``make_fixture`` plants a
hub-structured game and emits a schema-compatible synthetic table pair, so
the full pipeline (load, learn, rank influence) is exercisable end to end.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .basis import FourierPairwiseBasis
from .game import GameSpec
from .sampling import NoiseModel, SampleMeta, SampleSet, build_sample_set

__all__ = [
    "TableParseError",
    "load_table",
    "influence_ranking",
    "make_fixture",
    "NORMALIZATIONS",
]

NORMALIZATIONS = ("minmax_to_unit", "zscore_then_squash")


class TableParseError(ValueError):
    """Malformed input table; the message carries the row/column location."""


def _read_table(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableParseError(f"{path.name}: empty file") from None
        width = len(header)
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise TableParseError(
                    f"{path.name}: row {line_no} has {len(row)} cells, expected {width}"
                )
            parsed = []
            for col_no, cell in enumerate(row, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise TableParseError(
                        f"{path.name}: row {line_no}, column {col_no}: "
                        f"could not parse {cell!r} as a number"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise TableParseError(f"{path.name}: no data rows")
    return header, np.asarray(rows, dtype=float)


def _minmax_to_unit(col: np.ndarray) -> np.ndarray:
    lo, hi = col.min(), col.max()
    if hi == lo:
        return np.full_like(col, 0.5)
    return (col - lo) / (hi - lo)


def _zscore_then_squash(col: np.ndarray) -> np.ndarray:
    sd = col.std()
    if sd == 0:
        return np.full_like(col, 0.5)
    z = (col - col.mean()) / sd
    return 1.0 / (1.0 + np.exp(-z))


def load_table(
    actions_path,
    payoffs_path,
    normalization: str = "minmax_to_unit",
) -> SampleSet:
    """Read an actions/payoffs CSV pair into a sample set.

    Both tables must agree on row and column counts.  Missing cells are
    rejected rather than imputed.
    """
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {normalization!r}")
    _, actions = _read_table(actions_path)
    _, payoffs = _read_table(payoffs_path)
    if actions.shape[1] != payoffs.shape[1]:
        raise TableParseError(
            f"player counts differ: {actions.shape[1]} action columns vs "
            f"{payoffs.shape[1]} payoff columns"
        )
    if actions.shape[0] != payoffs.shape[0]:
        raise TableParseError(
            f"row counts differ: {actions.shape[0]} action rows vs "
            f"{payoffs.shape[0]} payoff rows"
        )
    scale = _minmax_to_unit if normalization == "minmax_to_unit" else _zscore_then_squash
    normalized = np.column_stack([scale(actions[:, j]) for j in range(actions.shape[1])])
    meta = SampleMeta(normalization=normalization)
    return SampleSet(actions=normalized, payoffs=payoffs, meta=meta)


def influence_ranking(edges, n: int) -> list[tuple[int, int]]:
    """(player, out_degree) sorted by degree descending, ties by index."""
    degree = [0] * n
    for j, _i in edges:
        if not 0 <= j < n:
            raise ValueError(f"edge source {j} out of range")
        degree[j] += 1
    return sorted(((p, degree[p]) for p in range(n)), key=lambda t: (-t[1], t[0]))


def make_fixture(
    n_rows: int = 47,
    n_cols: int = 31,
    seed: int = 0,
    sigma: float = 0.0,
    order: int = 2,
    min_weight: float = 1.0,
) -> tuple[GameSpec, SampleSet, int]:
    """Synthetic table-shaped dataset from a planted hub game.

    One hub player influences everyone (out-degree n-1); every player also
    has one further random in-neighbor, so in-degrees stay at most 2.  Each
    edge carries a single nonzero head coefficient (rotating over the basis
    indices) with magnitude in [min_weight, 2*min_weight], keeping supports
    small enough to identify from few rows.  Returns (game, samples, hub).
    """
    if n_cols < 3:
        raise ValueError("need at least three players")
    root = np.random.SeedSequence([seed, 474731])
    plant_stream, sample_stream = root.spawn(2)
    rng = np.random.default_rng(plant_stream)
    basis = FourierPairwiseBasis(order)
    r = basis.r
    hub = int(rng.integers(n_cols))
    neighbors: list[tuple[int, ...]] = []
    for i in range(n_cols):
        if i == hub:
            pick = int(rng.choice([j for j in range(n_cols) if j != hub]))
            neighbors.append((pick,))
        else:
            pick = int(rng.choice([j for j in range(n_cols) if j not in (i, hub)]))
            neighbors.append(tuple(sorted((hub, pick))))
    coef = np.zeros((n_cols, n_cols, r))
    edge_counter = 0
    for i in range(n_cols):
        for j in neighbors[i]:
            k = edge_counter % r
            mag = rng.uniform(min_weight, 2.0 * min_weight)
            sign = 1.0 if rng.integers(0, 2) else -1.0
            coef[i, j, k] = sign * mag
            edge_counter += 1
    game = GameSpec(
        n=n_cols,
        degree=2,
        neighbors=tuple(neighbors),
        coefficients=coef,
        seed=seed,
    )
    samples = build_sample_set(
        game,
        basis,
        NoiseModel(sigma),
        n_rows,
        sample_stream,
    )
    samples.meta.seed = seed
    return game, samples, hub
