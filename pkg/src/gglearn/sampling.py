"""Noisy black-box payoff oracle and learner-visible datasets.

The oracle perturbs every basis evaluation with independent zero-mean
sub-Gaussian noise and returns the weighted sum, so the observed payoff is
unbiased for the truncated-series utility.  Joint actions are drawn from a
configurable law (uniform on the unit box by default); whether those plays
are stable outcomes of the game is a property of the data source, not
something this module asserts.

Randomness is split by seed derivation: one child stream for the actions and
one per player for that player's noise, so per-player generation can run on
parallel workers and still be reproducible from the single seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import BasisSet
from .game import GameSpec, ZeroTail, true_utility

__all__ = [
    "NoiseModel",
    "SampleMeta",
    "SampleSet",
    "draw_actions",
    "noisy_payoff",
    "build_sample_set",
    "save_sample_set",
    "load_sample_set",
]

_FAMILIES = ("gaussian", "uniform", "rademacher")


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean sub-Gaussian noise with variance proxy sigma**2.

    gaussian: N(0, sigma^2).  uniform: U[-sigma, sigma].  rademacher:
    +-sigma with equal probability.  All three have variance at most
    sigma^2, with equality for the first and last.
    """

    sigma: float
    family: str = "gaussian"

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.sigma == 0:
            return np.zeros(size)
        if self.family == "gaussian":
            return rng.normal(0.0, self.sigma, size)
        if self.family == "uniform":
            return rng.uniform(-self.sigma, self.sigma, size)
        return self.sigma * (rng.integers(0, 2, size) * 2.0 - 1.0)

    def to_json(self) -> dict:
        return {"sigma": self.sigma, "family": self.family}

    @staticmethod
    def from_json(obj: dict) -> "NoiseModel":
        return NoiseModel(sigma=float(obj["sigma"]), family=str(obj["family"]))


@dataclass
class SampleMeta:
    """Provenance of a sample set.

    ``game_info`` carries whatever the generator chose to disclose about the
    underlying game (degree bound, tail mass, coefficient budget); real
    datasets leave it empty.  ``noise`` is None when the noise mechanism is
    unknown (ingested data).
    """

    seed: int | None = None
    noise: NoiseModel | None = None
    tail_truncation: int | None = None
    r: int | None = None
    normalization: str | None = None
    game_info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "noise": self.noise.to_json() if self.noise is not None else None,
            "tail_truncation": self.tail_truncation,
            "r": self.r,
            "normalization": self.normalization,
            "game_info": self.game_info,
        }

    @staticmethod
    def from_json(obj: dict) -> "SampleMeta":
        noise = obj.get("noise")
        return SampleMeta(
            seed=obj.get("seed"),
            noise=NoiseModel.from_json(noise) if noise is not None else None,
            tail_truncation=obj.get("tail_truncation"),
            r=obj.get("r"),
            normalization=obj.get("normalization"),
            game_info=obj.get("game_info") or {},
        )


@dataclass(eq=False)
class SampleSet:
    """N joint actions with per-player noisy payoffs.

    ``noise`` is the optional white-box record of the head noise draws, shape
    (N, n, (n-1)*r) in each player's flat feature order; black-box sets leave
    it None and downstream white-box diagnostics report not-applicable.
    """

    actions: np.ndarray
    payoffs: np.ndarray
    meta: SampleMeta
    noise: np.ndarray | None = None

    def __post_init__(self):
        self.actions = np.asarray(self.actions, dtype=float)
        self.payoffs = np.asarray(self.payoffs, dtype=float)
        if self.actions.ndim != 2 or self.payoffs.ndim != 2:
            raise ValueError("actions and payoffs must be 2-d")
        if self.actions.shape != self.payoffs.shape:
            raise ValueError("actions and payoffs must agree on (N, n)")
        if not np.all(np.isfinite(self.payoffs)):
            raise ValueError("payoffs must be finite")

    @property
    def n_samples(self) -> int:
        return self.actions.shape[0]

    @property
    def n_players(self) -> int:
        return self.actions.shape[1]

    def player_noise(self, i: int) -> np.ndarray | None:
        return None if self.noise is None else self.noise[:, i, :]


def draw_actions(n: int, n_samples: int, seed, mode: str = "uniform_box") -> np.ndarray:
    """N i.i.d. joint actions, each coordinate uniform on [0, 1]."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if mode != "uniform_box":
        raise ValueError(f"unknown action sampling mode {mode!r}")
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, size=(n_samples, n))


def _player_payoffs(
    game: GameSpec,
    basis: BasisSet,
    noise: NoiseModel,
    i: int,
    actions: np.ndarray,
    rng: np.random.Generator,
    tail_truncation: int,
    retain_noise: bool,
):
    """Noisy payoffs of player i for a batch of joint actions.

    Draw order is fixed: first the (N, n-1, r) head-noise block covering
    every potential neighbor, then for each in-neighbor ascending one block
    for the series positions beyond the retained r.  The head block is drawn
    whether or not it is retained so payoffs do not depend on the flag.
    """
    N = actions.shape[0]
    n, r = game.n, basis.r
    T = tail_truncation
    noisy = noise.sigma > 0
    if noisy:
        head_noise = noise.draw(rng, (N, n - 1, r))
    else:
        head_noise = np.zeros((N, n - 1, r)) if retain_noise else None
    u = np.zeros(N)
    for j in game.in_neighbors(i):
        pos = j if j < i else j - 1
        coeffs = game.coefficient_series(i, j, T)
        head = min(r, T)
        psi = basis.profile(actions[:, i], actions[:, j])[:, :head]
        if noisy:
            psi = psi + head_noise[:, pos, :head]
        u += psi @ coeffs[:head]
        extra = [k for k in range(head, T) if coeffs[k] != 0.0]
        if extra:
            gamma = noise.draw(rng, (N, len(extra))) if noisy else None
            for col, k in enumerate(extra):
                vals = basis.term_any(k, actions[:, i], actions[:, j])
                if noisy:
                    vals = vals + gamma[:, col]
                u += coeffs[k] * vals
    retained = head_noise.reshape(N, (n - 1) * r) if retain_noise else None
    return u, retained


def noisy_payoff(
    game: GameSpec,
    basis: BasisSet,
    noise: NoiseModel,
    i: int,
    x,
    rng: np.random.Generator,
    tail_truncation: int | None = None,
) -> float:
    """One noisy payoff observation for player i at joint action x."""
    T = _default_truncation(game, basis) if tail_truncation is None else tail_truncation
    x = np.asarray(x, dtype=float)
    u, _ = _player_payoffs(game, basis, noise, i, x[None, :], rng, T, False)
    return float(u[0])


def _default_truncation(game: GameSpec, basis: BasisSet) -> int:
    if isinstance(game.tail, ZeroTail):
        return max(basis.r, game.r_head)
    return max(4 * basis.r, game.r_head, 64)


def build_sample_set(
    game: GameSpec,
    basis: BasisSet,
    noise: NoiseModel,
    n_samples: int,
    seed,
    tail_truncation: int | None = None,
    retain_noise: bool = False,
    mode: str = "uniform_box",
) -> SampleSet:
    """Draw joint actions and query the noisy oracle for every player."""
    T = _default_truncation(game, basis) if tail_truncation is None else int(tail_truncation)
    if T < basis.r:
        raise ValueError("tail_truncation must be at least the basis size r")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    streams = root.spawn(game.n + 1)
    actions = draw_actions(game.n, n_samples, streams[0], mode)
    payoffs = np.empty((n_samples, game.n))
    noise_rec = (
        np.zeros((n_samples, game.n, (game.n - 1) * basis.r)) if retain_noise else None
    )
    for i in range(game.n):
        rng_i = np.random.default_rng(streams[1 + i])
        payoffs[:, i], retained = _player_payoffs(
            game, basis, noise, i, actions, rng_i, T, retain_noise
        )
        if retain_noise:
            noise_rec[:, i, :] = retained
    delta = game.tail.sum_beyond(basis.r)
    meta = SampleMeta(
        seed=int(seed) if isinstance(seed, (int, np.integer)) else None,
        noise=noise,
        tail_truncation=T,
        r=basis.r,
        game_info={
            "n": game.n,
            "degree": game.degree,
            "tail_bound": delta,
            "budget_hint": max(game.head_l1(i) for i in range(game.n)) + delta,
        },
    )
    return SampleSet(actions=actions, payoffs=payoffs, meta=meta, noise=noise_rec)


def _write_csv(path: Path, header: list[str], rows: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


def save_sample_set(samples: SampleSet, out_dir) -> None:
    """Write actions.csv, payoffs.csv, meta.json (and noise.npy if retained)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = samples.n_players
    _write_csv(out / "actions.csv", [f"player_{j + 1}" for j in range(n)], samples.actions)
    _write_csv(out / "payoffs.csv", [f"u_{j + 1}" for j in range(n)], samples.payoffs)
    meta = samples.meta.to_json()
    if samples.noise is not None:
        np.save(out / "noise.npy", samples.noise)
        meta["noise_file"] = "noise.npy"
    with open(out / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_csv(path: Path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(cell) for cell in row] for row in reader if row]
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != len(header):
        raise ValueError(f"malformed csv table: {path}")
    return arr


def load_sample_set(in_dir) -> SampleSet:
    """Inverse of save_sample_set."""
    src = Path(in_dir)
    actions = _read_csv(src / "actions.csv")
    payoffs = _read_csv(src / "payoffs.csv")
    with open(src / "meta.json", "r", encoding="utf-8") as fh:
        meta_obj = json.load(fh)
    noise = None
    noise_file = meta_obj.pop("noise_file", None)
    if noise_file is not None:
        noise = np.load(src / noise_file)
    return SampleSet(
        actions=actions,
        payoffs=payoffs,
        meta=SampleMeta.from_json(meta_obj),
        noise=noise,
    )
