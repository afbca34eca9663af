"""Recovery-probability sweeps and the sample-complexity scaling study.

Every trial is reproducible in isolation: the seed of trial t in a cell is
SeedSequence([base_seed, fingerprint(cell), t]), where the fingerprint is a
CRC of the cell's canonical parameter string.  Cells and trials are
independent jobs; results are merged in deterministic order.
"""

from __future__ import annotations

import csv
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .basis import FourierPairwiseBasis, all_feature_matrices, support_columns
from .diagnostics import (
    GramBlocks,
    check_incoherence,
    check_min_weight,
    check_positive_definiteness,
    error_bounds,
    lambda_threshold,
    tail_bound,
)
from .game import GameSpec, ZeroTail, generate_game
from .recovery import (
    assemble_graph,
    extract_support,
    payoff_error,
    structure_metrics,
    PlayerEstimate,
    RecoveryResult,
)
from .sampling import NoiseModel, build_sample_set
from .solver import SolverConfig, SolverConvergenceError, solve_player

__all__ = [
    "FixedPenalty",
    "ThresholdPenalty",
    "CellSpec",
    "CellResult",
    "SweepConfig",
    "run_cell",
    "run_sweep",
    "sweep_rows_to_csv",
    "ScalingResult",
    "scaling_study",
]


@dataclass(frozen=True)
class FixedPenalty:
    value: float

    def describe(self) -> str:
        return f"fixed:{self.value!r}"


@dataclass(frozen=True)
class ThresholdPenalty:
    """Penalty set to multiplier times the player's computed penalty floor."""

    multiplier: float = 1.1

    def describe(self) -> str:
        return f"threshold:{self.multiplier!r}"


@dataclass(frozen=True)
class CellSpec:
    n: int
    degree: int
    r: int
    n_samples: int
    sigma: float
    penalty: FixedPenalty | ThresholdPenalty
    min_weight: float = 0.5
    tail: object = field(default_factory=ZeroTail)
    noise_family: str = "gaussian"
    tau: float = 1e-7
    solver_tol: float = 1e-8
    solver_max_iter: int = 20_000

    def describe(self) -> str:
        return (
            f"n={self.n},d={self.degree},r={self.r},N={self.n_samples},"
            f"sigma={self.sigma!r},penalty={self.penalty.describe()},"
            f"w={self.min_weight!r},tail={self.tail.to_json()},"
            f"family={self.noise_family},tau={self.tau!r}"
        )

    def fingerprint(self) -> int:
        return zlib.crc32(self.describe().encode())


@dataclass
class CellResult:
    cell: CellSpec
    trials: int
    failed_trials: int
    exact_recovery_rate: float
    mean_precision: float
    mean_recall: float
    mean_est_err: float
    mean_payoff_err: float | None
    diagnostics_pass_rate: float
    est_err_within_bound_rate: float | None
    payoff_within_bound_rate: float | None

    def metrics(self) -> dict:
        return {
            "exact_recovery_rate": self.exact_recovery_rate,
            "mean_precision": self.mean_precision,
            "mean_recall": self.mean_recall,
            "mean_est_err": self.mean_est_err,
            "mean_payoff_err": self.mean_payoff_err,
            "diagnostics_pass_rate": self.diagnostics_pass_rate,
            "est_err_within_bound_rate": self.est_err_within_bound_rate,
            "payoff_within_bound_rate": self.payoff_within_bound_rate,
            "failed_trials": self.failed_trials,
        }


def _order_for(r: int) -> int:
    order = math.isqrt(r // 4)
    if 4 * order * order != r:
        raise ValueError(f"r={r} is not 4*order**2; not a built-in basis size")
    return order


def _trial_seed(base_seed: int, cell: CellSpec, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([base_seed, cell.fingerprint(), trial])


def _support_blocks(design: np.ndarray, cols: np.ndarray) -> GramBlocks:
    """Support and cross Gram blocks without forming the full matrix."""
    n_samples = design.shape[0]
    sub = design[:, cols]
    comp = np.setdiff1d(np.arange(design.shape[1]), cols)
    return GramBlocks(
        full=None,
        support=design[:, cols].T @ sub / n_samples,
        cross=design[:, comp].T @ sub / n_samples,
        support_cols=cols,
    )


@dataclass
class _Trial:
    exact: bool
    precision: float
    recall: float
    est_err: float
    diag_pass: bool
    est_err_ok: bool
    payoff_err: float | None
    payoff_ok: bool | None
    converged: bool


def _run_trial(cell: CellSpec, base_seed: int, trial: int, compute_payoff: bool) -> _Trial:
    root = _trial_seed(base_seed, cell, trial)
    game_seed, sample_seed = root.spawn(2)
    game = generate_game(
        cell.n, cell.degree, cell.r, game_seed, cell.min_weight, tail=cell.tail
    )
    basis = FourierPairwiseBasis(_order_for(cell.r))
    noise = NoiseModel(cell.sigma, cell.noise_family)
    samples = build_sample_set(game, basis, noise, cell.n_samples, sample_seed)
    delta = tail_bound(game, basis.r)

    supports: dict[int, tuple[int, ...]] = {}
    per_player: dict[int, PlayerEstimate] = {}
    est_errs: list[float] = []
    diag_ok = True
    est_ok = True
    payoff_ok: bool | None = None
    payoff_errs: list[float] = []
    designs = all_feature_matrices(basis, samples.actions)
    for i in range(cell.n):
        design, target = designs[i], samples.payoffs[:, i]
        cols = support_columns(i, game.in_neighbors(i), game.n, basis.r)
        blocks = _support_blocks(design, cols)
        c_min = alpha = None
        try:
            eig = check_positive_definiteness(blocks.support)
            c_min = eig.min_eigenvalue if eig.passed else None
            if eig.passed:
                inc = check_incoherence(blocks.cross, blocks.support)
                alpha = inc.margin
        except (ValueError, np.linalg.LinAlgError):
            pass

        budget = game.head_l1(i) + delta
        floor = None
        try:
            floor = lambda_threshold(
                basis.psi_bar,
                game.n,
                delta,
                cell.n_samples,
                game.degree,
                budget,
                alpha if alpha is not None else 1.0,
                cell.sigma,
            )
        except ValueError:
            pass
        if isinstance(cell.penalty, FixedPenalty):
            lam = cell.penalty.value
        else:
            if floor is None:
                raise ValueError("threshold penalty rule needs a computable floor")
            lam = cell.penalty.multiplier * floor

        cfg = SolverConfig(
            lam=lam,
            budget=max(2.0 * budget, 1.0),
            tol=cell.solver_tol,
            max_iter=cell.solver_max_iter,
        )
        result = solve_player(design, target, cfg)
        supports[i] = extract_support(result, cell.tau, i, game.n, basis.r)
        per_player[i] = PlayerEstimate(
            player=i, beta=result.beta, support=supports[i], signs=np.sign(result.beta)
        )

        player_diag = (
            c_min is not None
            and alpha is not None
            and alpha > 0
            and check_min_weight(game, i, lam, c_min).passed
            and floor is not None
            and lam > floor
        )
        diag_ok = diag_ok and player_diag

        if cols.size:
            true_s = np.concatenate(
                [game.coefficient_series(i, j, basis.r) for j in game.in_neighbors(i)]
            )
            est_s = result.beta[cols]
            err = float(np.abs(est_s - true_s).max())
            est_errs.append(err)
            if c_min is not None:
                bound = error_bounds(
                    lam, c_min, game.degree, len(game.in_neighbors(i)), basis.psi_bar, delta
                )
                if err > bound.coefficient_bound:
                    est_ok = False
                if compute_payoff:
                    perr = payoff_error(game, result.beta, basis, i)["max_abs_err"]
                    payoff_errs.append(perr)
                    ok = perr <= bound.payoff_bound
                    payoff_ok = ok if payoff_ok is None else (payoff_ok and ok)
            else:
                est_ok = False

    rec = RecoveryResult(
        n=game.n,
        r=basis.r,
        graph=assemble_graph(supports),
        per_player=per_player,
        support_threshold=cell.tau,
    )
    metrics = structure_metrics(game, rec)
    return _Trial(
        exact=metrics.exact_match,
        precision=metrics.edge_precision,
        recall=metrics.edge_recall,
        est_err=max(est_errs) if est_errs else 0.0,
        diag_pass=diag_ok,
        est_err_ok=est_ok,
        payoff_err=max(payoff_errs) if payoff_errs else None,
        payoff_ok=payoff_ok,
        converged=True,
    )


def run_cell(
    cell: CellSpec,
    trials: int,
    base_seed: int = 0,
    compute_payoff: bool = False,
    jobs: int = 1,
) -> CellResult:
    """Average recovery metrics over seeded trials of one parameter cell.

    Solver non-convergence marks the trial failed and is reported
    separately; failed trials count against the recovery rate but not
    against the conditional bound rates.
    """
    if trials < 1:
        raise ValueError("need at least one trial")

    def attempt(t: int) -> _Trial:
        try:
            return _run_trial(cell, base_seed, t, compute_payoff)
        except SolverConvergenceError:
            return _Trial(
                exact=False,
                precision=0.0,
                recall=0.0,
                est_err=float("nan"),
                diag_pass=False,
                est_err_ok=False,
                payoff_err=None,
                payoff_ok=None,
                converged=False,
            )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(attempt, range(trials)))
    else:
        outcomes = [attempt(t) for t in range(trials)]

    ok = [o for o in outcomes if o.converged]
    failed = trials - len(ok)
    diag_trials = [o for o in ok if o.diag_pass]
    payoff_votes = [o.payoff_ok for o in diag_trials if o.payoff_ok is not None]
    est_rate = (
        sum(1 for o in diag_trials if o.est_err_ok) / len(diag_trials)
        if diag_trials
        else None
    )
    payoff_rate = (
        sum(1 for v in payoff_votes if v) / len(payoff_votes) if payoff_votes else None
    )
    payoff_vals = [o.payoff_err for o in ok if o.payoff_err is not None]
    return CellResult(
        cell=cell,
        trials=trials,
        failed_trials=failed,
        exact_recovery_rate=sum(1 for o in outcomes if o.exact) / trials,
        mean_precision=float(np.mean([o.precision for o in ok])) if ok else 0.0,
        mean_recall=float(np.mean([o.recall for o in ok])) if ok else 0.0,
        mean_est_err=float(np.mean([o.est_err for o in ok])) if ok else float("nan"),
        mean_payoff_err=float(np.mean(payoff_vals)) if payoff_vals else None,
        diagnostics_pass_rate=len(diag_trials) / len(ok) if ok else 0.0,
        est_err_within_bound_rate=est_rate,
        payoff_within_bound_rate=payoff_rate,
    )


@dataclass(frozen=True)
class SweepConfig:
    n_values: tuple[int, ...]
    degree_values: tuple[int, ...]
    r_values: tuple[int, ...]
    sample_sizes: tuple[int, ...]
    sigmas: tuple[float, ...]
    penalties: tuple[FixedPenalty | ThresholdPenalty, ...]
    trials: int = 20
    base_seed: int = 0
    min_weight: float = 0.5
    tail: object = field(default_factory=ZeroTail)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be positive")
        for grid in (
            self.n_values,
            self.degree_values,
            self.r_values,
            self.sample_sizes,
            self.sigmas,
            self.penalties,
        ):
            if not grid:
                raise ValueError("every grid must be non-empty")

    def cells(self) -> list[CellSpec]:
        out = []
        for n, d, r, N, sigma, pen in product(
            self.n_values,
            self.degree_values,
            self.r_values,
            self.sample_sizes,
            self.sigmas,
            self.penalties,
        ):
            out.append(
                CellSpec(
                    n=n,
                    degree=d,
                    r=r,
                    n_samples=N,
                    sigma=sigma,
                    penalty=pen,
                    min_weight=self.min_weight,
                    tail=self.tail,
                )
            )
        return out


def run_sweep(config: SweepConfig, jobs: int = 1, compute_payoff: bool = False):
    """Run every cell; returns (list of CellResult, long-format rows)."""
    cells = config.cells()

    def one(cell: CellSpec) -> CellResult:
        return run_cell(cell, config.trials, config.base_seed, compute_payoff)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, cells))
    else:
        results = [one(c) for c in cells]
    rows = []
    for res in results:
        c = res.cell
        base = {
            "n": c.n,
            "d": c.degree,
            "r": c.r,
            "n_samples": c.n_samples,
            "sigma": c.sigma,
            "penalty": c.penalty.describe(),
            "min_weight": c.min_weight,
            "trials": res.trials,
        }
        for metric, value in res.metrics().items():
            rows.append({**base, "metric": metric, "value": value})
    return results, rows


_SWEEP_COLUMNS = [
    "n",
    "d",
    "r",
    "n_samples",
    "sigma",
    "penalty",
    "min_weight",
    "trials",
    "metric",
    "value",
]


def sweep_rows_to_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.DictWriter(fh, fieldnames=_SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in _SWEEP_COLUMNS})


@dataclass
class ScalingResult:
    n_values: tuple[int, ...]
    critical_samples: tuple[int | None, ...]
    saturated: tuple[bool, ...]
    slope_vs_log_n: float | None
    probe_rows: list

    def to_json(self) -> dict:
        return {
            "n_values": list(self.n_values),
            "critical_samples": list(self.critical_samples),
            "saturated": list(self.saturated),
            "slope_vs_log_n": self.slope_vs_log_n,
        }


def _probe_target(cell: CellSpec, trials: int, base_seed: int, target_rate: float):
    """Decide whether the cell's recovery rate reaches the target.

    Trials run in their deterministic order but stop as soon as the
    outcome is decided: with f allowed failures in ``trials``, seeing f+1
    failures settles a miss and reaching trials-f successes settles a hit,
    both exactly equivalent to running the full batch.
    """
    allowed = int(math.floor((1.0 - target_rate) * trials))
    failures = successes = 0
    for t in range(trials):
        try:
            ok = _run_trial(cell, base_seed, t, False).exact
        except SolverConvergenceError:
            ok = False
        if ok:
            successes += 1
        else:
            failures += 1
        if failures > allowed:
            return False, successes, failures
        if successes >= trials - allowed:
            return True, successes, failures
    return failures <= allowed, successes, failures


def scaling_study(
    degree: int,
    n_values,
    target_rate: float = 0.9,
    r: int = 4,
    sigma: float = 0.0,
    penalty: FixedPenalty | ThresholdPenalty | None = None,
    min_weight: float = 0.5,
    trials: int = 50,
    base_seed: int = 0,
    sample_cap: int = 8192,
    start: int = 8,
    solver_max_iter: int = 2000,
) -> ScalingResult:
    """Critical sample count per n to hit the target exact-recovery rate.

    For each n the study doubles N until the rate clears the target (cells
    above ``sample_cap`` are marked saturated), then bisects down to the
    smallest passing integer.  Probe batches stop early once the pass/fail
    decision is settled; the probe history is kept for the curve CSV.
    """
    n_values = tuple(int(v) for v in n_values)
    if len(n_values) < 3:
        raise ValueError("need at least three n values for a scaling slope")
    if penalty is None:
        penalty = FixedPenalty(0.02)
    probe_rows: list[dict] = []
    criticals: list[int | None] = []
    saturated_flags: list[bool] = []

    for n in n_values:
        cache: dict[int, bool] = {}

        def passes(n_samples: int, _n=n) -> bool:
            if n_samples not in cache:
                cell = CellSpec(
                    n=_n,
                    degree=degree,
                    r=r,
                    n_samples=n_samples,
                    sigma=sigma,
                    penalty=penalty,
                    min_weight=min_weight,
                    solver_max_iter=solver_max_iter,
                )
                hit, successes, failures = _probe_target(
                    cell, trials, base_seed, target_rate
                )
                cache[n_samples] = hit
                probe_rows.append(
                    {
                        "n": _n,
                        "n_samples": n_samples,
                        "passes": hit,
                        "successes": successes,
                        "failures": failures,
                        "trials_run": successes + failures,
                        "trials": trials,
                    }
                )
            return cache[n_samples]

        hi = max(2, start)
        while hi <= sample_cap and not passes(hi):
            hi *= 2
        if hi > sample_cap:
            criticals.append(None)
            saturated_flags.append(True)
            continue
        lo = max(1, hi // 2)
        if hi == max(2, start):
            lo = 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if passes(mid):
                hi = mid
            else:
                lo = mid
        criticals.append(hi)
        saturated_flags.append(False)

    usable = [(n, c) for n, c in zip(n_values, criticals) if c is not None]
    slope = None
    if len(usable) >= 2:
        logs = np.array([math.log(n) for n, _ in usable])
        vals = np.array([float(c) for _, c in usable])
        design = np.column_stack([np.ones_like(logs), logs])
        coef, *_ = np.linalg.lstsq(design, vals, rcond=None)
        slope = float(coef[1])
    return ScalingResult(
        n_values=n_values,
        critical_samples=tuple(criticals),
        saturated=tuple(saturated_flags),
        slope_vs_log_n=slope,
        probe_rows=probe_rows,
    )
