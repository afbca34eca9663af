"""Recoverability conditions, penalty thresholds, and error bounds.

Everything here is a deterministic function of the regression data (and,
for the white-box pieces, the retained noise draws).  The three conditions
checked per player are

  1. positive definiteness: the support block of the empirical feature Gram
     matrix H = (1/N) sum_s phi_s phi_s' has minimum eigenvalue c_min > 0;
  2. incoherence: the off-support rows satisfy
     |||H_cross . H_support^{-1}|||_inf = 1 - alpha with margin alpha > 0;
  3. minimum weight: every true head coefficient clears the threshold
     Delta = (2*lam/c_min) * (2*sqrt(d) + 1/sqrt(|S_i|)).

The penalty floor g is the largest of four closed-form terms; choosing
lam above it is what the recovery guarantee asks for.  The coefficient and
payoff error bounds are the matching closed forms:

  coefficient_bound = (2*lam/c_min) * (2*sqrt(d) + 1/sqrt(|S_i|))
  payoff_bound      = coefficient_bound * sqrt(d) * psi_bar + psi_bar * delta

with delta the absolute mass of the discarded coefficient tail.

A note on the noisy Gram: averaging it over the noise draws gives back the
clean H (the noise is zero mean and enters linearly); its support block is
not symmetric, so the reported minimum eigenvalue is that of the symmetric
part, which is exactly the quadratic-form minimum the conditions concern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSet, support_columns
from .game import GameSpec
from .sampling import NoiseModel, SampleSet, build_sample_set
from .solver import assemble_regression

__all__ = [
    "NotApplicableError",
    "GramBlocks",
    "EigenCheck",
    "IncoherenceCheck",
    "MinWeightCheck",
    "ErrorBounds",
    "NoisyGramBlocks",
    "DiagnosticsReport",
    "compute_gram",
    "check_positive_definiteness",
    "check_incoherence",
    "check_min_weight",
    "lambda_threshold",
    "error_bounds",
    "compute_noisy_gram",
    "noisy_condition_frequency",
    "tail_bound",
    "diagnose_player",
    "diagnose_game",
    "render_report_table",
]


class NotApplicableError(ValueError):
    """A diagnostic was requested on inputs where it is undefined."""


@dataclass
class GramBlocks:
    full: np.ndarray
    support: np.ndarray
    cross: np.ndarray
    support_cols: np.ndarray


@dataclass
class EigenCheck:
    min_eigenvalue: float
    passed: bool


@dataclass
class IncoherenceCheck:
    margin: float
    operator_norm: float
    passed: bool


@dataclass
class MinWeightCheck:
    threshold: float
    min_weight: float
    passed: bool


@dataclass
class ErrorBounds:
    coefficient_bound: float
    payoff_bound: float


@dataclass
class NoisyGramBlocks:
    full: np.ndarray
    support: np.ndarray
    cross: np.ndarray
    min_eigenvalue_sym: float
    incoherence_norm: float | None


def compute_gram(design: np.ndarray, support_cols_idx) -> GramBlocks:
    """Empirical Gram H = (1/N) X'X with its support and cross blocks.

    ``support_cols_idx`` lists the flat columns belonging to the in-neighbor
    set (see basis.support_columns).  An empty support yields 0x0 blocks and
    downstream checks report not-applicable.
    """
    design = np.asarray(design, dtype=float)
    n_samples = design.shape[0]
    cols = np.asarray(support_cols_idx, dtype=np.intp)
    gram = design.T @ design / n_samples
    comp = np.setdiff1d(np.arange(design.shape[1]), cols)
    return GramBlocks(
        full=gram,
        support=gram[np.ix_(cols, cols)],
        cross=gram[np.ix_(comp, cols)],
        support_cols=cols,
    )


def check_positive_definiteness(gram_support: np.ndarray, margin: float = 1e-10) -> EigenCheck:
    """Minimum eigenvalue of the (symmetric) support block."""
    block = np.asarray(gram_support, dtype=float)
    if block.size == 0:
        raise NotApplicableError("empty support: no block to check")
    if not np.allclose(block, block.T, atol=1e-10, rtol=0.0):
        raise ValueError("support block is not symmetric beyond 1e-10")
    c_min = float(np.linalg.eigvalsh(block)[0])
    return EigenCheck(min_eigenvalue=c_min, passed=c_min > margin)


def check_incoherence(gram_cross: np.ndarray, gram_support: np.ndarray) -> IncoherenceCheck:
    """Margin alpha = 1 - |||cross . support^{-1}|||_inf (row-sum operator norm)."""
    support = np.asarray(gram_support, dtype=float)
    cross = np.asarray(gram_cross, dtype=float)
    if support.size == 0:
        raise NotApplicableError("empty support: incoherence undefined")
    try:
        factor = np.linalg.solve(support, cross.T).T
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "support block is singular; positive definiteness fails first"
        ) from exc
    norm = float(np.abs(factor).sum(axis=1).max()) if factor.size else 0.0
    alpha = 1.0 - norm
    return IncoherenceCheck(margin=alpha, operator_norm=norm, passed=alpha > 0.0)


def check_min_weight(
    game: GameSpec,
    player: int,
    lam: float,
    c_min: float,
    degree: int | None = None,
) -> MinWeightCheck:
    """Whether the smallest true head coefficient clears the recovery threshold."""
    if c_min <= 0:
        raise NotApplicableError("minimum-weight threshold needs c_min > 0")
    d = game.degree if degree is None else degree
    s = len(game.in_neighbors(player))
    if s == 0:
        raise NotApplicableError("player has no in-neighbors")
    threshold = (2.0 * lam / c_min) * (2.0 * math.sqrt(d) + 1.0 / math.sqrt(s))
    weight = game.min_head_weight(player)
    return MinWeightCheck(threshold=threshold, min_weight=weight, passed=weight > threshold)


def lambda_threshold(
    psi_bar: float,
    n: int,
    delta: float,
    n_samples: int,
    d: int,
    budget: float,
    alpha: float,
    sigma: float,
) -> float:
    """Penalty floor: the exact four-term maximum.

    Terms 1-2 control the in-neighbor block (log d), terms 3-4 the
    complement (log(n-d), inflated by 1/(1-alpha/2)); within each pair one
    term carries the tail mass delta and the other the noise level sigma.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if d < 1:
        raise ValueError("degree bound must be at least 1")
    if n <= d:
        raise ValueError("need n > d (the complement term is undefined)")
    if delta < 0 or sigma < 0 or budget <= 0 or psi_bar <= 0:
        raise ValueError("psi_bar and budget must be positive; delta, sigma nonnegative")
    if alpha >= 2.0:
        raise ValueError("incoherence margin must be below 2")
    log_d = math.log(d)
    log_c = math.log(n - d)
    shrink = 1.0 - alpha / 2.0
    t1 = 20.0 * math.sqrt(2.0) * psi_bar * math.sqrt(d * delta * log_d / n_samples)
    t2 = 10.0 * math.sqrt(2.0) * sigma * psi_bar * budget * math.sqrt(log_d / n_samples)
    t3 = (20.0 * math.sqrt(2.0) * psi_bar / shrink) * math.sqrt(d * delta * log_c / n_samples)
    t4 = (10.0 * math.sqrt(2.0) * sigma * psi_bar * budget / shrink) * math.sqrt(log_c / n_samples)
    return max(t1, t2, t3, t4)


def error_bounds(
    lam: float,
    c_min: float,
    d: int,
    support_size: int,
    psi_bar: float,
    delta: float,
) -> ErrorBounds:
    """Closed-form coefficient (sup-norm) and payoff (sup) error bounds."""
    if c_min <= 0 or support_size < 1:
        raise NotApplicableError("error bounds need c_min > 0 and a nonempty support")
    coef = (2.0 * lam / c_min) * (2.0 * math.sqrt(d) + 1.0 / math.sqrt(support_size))
    payoff = coef * math.sqrt(d) * psi_bar + psi_bar * delta
    return ErrorBounds(coefficient_bound=coef, payoff_bound=payoff)


def tail_bound(game: GameSpec, r: int) -> float:
    """Absolute coefficient mass beyond position r, worst case over edges."""
    per_edge_extra = 0.0
    if game.r_head > r:
        extras = [
            float(np.abs(game.coefficients[i, j, r:]).sum())
            for i in range(game.n)
            for j in game.in_neighbors(i)
        ]
        per_edge_extra = max(extras) if extras else 0.0
    return per_edge_extra + game.tail.sum_beyond(max(r, game.r_head))


def compute_noisy_gram(
    design: np.ndarray,
    noise: np.ndarray,
    support_cols_idx,
) -> NoisyGramBlocks:
    """Noisy Gram (1/N)(X'X + X'Gamma) and its condition numbers.

    ``noise`` is the (N, p) matrix of retained head noise draws aligned with
    the design columns; black-box sample sets cannot produce it.
    """
    design = np.asarray(design, dtype=float)
    if noise is None:
        raise NotApplicableError("black-box samples: noise draws were not retained")
    noise = np.asarray(noise, dtype=float)
    if noise.shape != design.shape:
        raise ValueError("noise matrix must match the design shape")
    n_samples = design.shape[0]
    hhat = (design.T @ design + design.T @ noise) / n_samples
    cols = np.asarray(support_cols_idx, dtype=np.intp)
    comp = np.setdiff1d(np.arange(design.shape[1]), cols)
    support = hhat[np.ix_(cols, cols)]
    cross = hhat[np.ix_(comp, cols)]
    if support.size == 0:
        raise NotApplicableError("empty support")
    sym = (support + support.T) / 2.0
    min_eig = float(np.linalg.eigvalsh(sym)[0])
    inc = None
    try:
        factor = np.linalg.solve(support, cross.T).T
        inc = float(np.abs(factor).sum(axis=1).max()) if factor.size else 0.0
    except np.linalg.LinAlgError:
        inc = None
    return NoisyGramBlocks(
        full=hhat,
        support=support,
        cross=cross,
        min_eigenvalue_sym=min_eig,
        incoherence_norm=inc,
    )


def noisy_condition_frequency(
    game: GameSpec,
    basis: BasisSet,
    noise: NoiseModel,
    player: int,
    n_samples: int,
    replications: int,
    seed: int = 0,
) -> dict:
    """Empirical rates at which the noisy Gram inherits the clean conditions.

    Each replication draws a fresh white-box sample set and checks whether
    the noisy support block keeps at least half the clean minimum eigenvalue
    and whether the noisy incoherence norm stays within 1 - alpha/2 of the
    clean margin alpha.  Replications where the clean conditions themselves
    fail are skipped and counted separately.
    """
    cols = support_columns(player, game.in_neighbors(player), game.n, basis.r)
    eig_ok = inc_ok = usable = skipped = 0
    root = np.random.SeedSequence([seed, 20_260_809])
    for rep_seed in root.spawn(replications):
        samples = build_sample_set(
            game, basis, noise, n_samples, rep_seed, retain_noise=True
        )
        design, _ = assemble_regression(samples, basis, player)
        blocks = compute_gram(design, cols)
        clean = check_positive_definiteness(blocks.support)
        if not clean.passed:
            skipped += 1
            continue
        inc = check_incoherence(blocks.cross, blocks.support)
        if not inc.passed:
            skipped += 1
            continue
        usable += 1
        noisy = compute_noisy_gram(design, samples.player_noise(player), cols)
        if noisy.min_eigenvalue_sym >= clean.min_eigenvalue / 2.0:
            eig_ok += 1
        if noisy.incoherence_norm is not None and noisy.incoherence_norm <= 1.0 - inc.margin / 2.0:
            inc_ok += 1
    return {
        "replications": replications,
        "usable": usable,
        "skipped": skipped,
        "eig_ok_rate": eig_ok / usable if usable else float("nan"),
        "incoherence_ok_rate": inc_ok / usable if usable else float("nan"),
    }


@dataclass
class DiagnosticsReport:
    """Per-player condition checks, thresholds, and bounds.

    Fields that cannot be evaluated on the given inputs are None; the
    ``verdicts`` map mirrors that with None entries (the minimum-weight
    check, for instance, is only defined once positive definiteness holds).
    """

    player: int
    support: tuple[int, ...]
    lam: float
    budget: float
    sigma: float
    psi_bar: float
    n_players: int
    n_samples: int
    degree: int
    tail_mass: float
    min_eigenvalue: float | None = None
    incoherence_margin: float | None = None
    min_weight_threshold: float | None = None
    min_head_weight: float | None = None
    lambda_floor: float | None = None
    coefficient_error_bound: float | None = None
    payoff_error_bound: float | None = None
    feature_norm_bound: float | None = None
    noisy_min_eigenvalue: float | None = None
    noisy_incoherence_norm: float | None = None
    verdicts: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()
    gram: GramBlocks | None = None
    noisy_gram: NoisyGramBlocks | None = None

    def all_pass(self) -> bool:
        keys = ("positive_definite", "incoherent", "min_weight", "lambda_ok")
        return all(self.verdicts.get(k) is True for k in keys)

    def to_json(self, include_matrices: bool = False) -> dict:
        out = {
            "player": self.player,
            "support": list(self.support),
            "lambda": self.lam,
            "budget": self.budget,
            "sigma": self.sigma,
            "psi_bar": self.psi_bar,
            "n_players": self.n_players,
            "n_samples": self.n_samples,
            "degree": self.degree,
            "tail_mass": self.tail_mass,
            "min_eigenvalue": self.min_eigenvalue,
            "incoherence_margin": self.incoherence_margin,
            "min_weight_threshold": self.min_weight_threshold,
            "min_head_weight": self.min_head_weight,
            "lambda_floor": self.lambda_floor,
            "coefficient_error_bound": self.coefficient_error_bound,
            "payoff_error_bound": self.payoff_error_bound,
            "feature_norm_bound": self.feature_norm_bound,
            "noisy_min_eigenvalue": self.noisy_min_eigenvalue,
            "noisy_incoherence_norm": self.noisy_incoherence_norm,
            "verdicts": dict(self.verdicts),
            "notes": list(self.notes),
        }
        if include_matrices and self.gram is not None:
            out["gram"] = self.gram.full.tolist()
            if self.noisy_gram is not None:
                out["noisy_gram"] = self.noisy_gram.full.tolist()
        return out


def diagnose_player(
    game: GameSpec,
    samples: SampleSet,
    basis: BasisSet,
    player: int,
    lam: float,
    budget: float | None = None,
    delta: float | None = None,
    keep_matrices: bool = False,
) -> DiagnosticsReport:
    """Evaluate every condition and bound for one player on one dataset."""
    design, _ = assemble_regression(samples, basis, player)
    support = game.in_neighbors(player)
    cols = support_columns(player, support, game.n, basis.r)
    sigma = samples.meta.noise.sigma if samples.meta.noise is not None else 0.0
    tail_mass = tail_bound(game, basis.r) if delta is None else delta
    if budget is None:
        budget = max(game.head_l1(i) for i in range(game.n)) + tail_mass
    verdicts: dict = {
        "positive_definite": None,
        "incoherent": None,
        "min_weight": None,
        "lambda_ok": None,
    }
    notes: list[str] = []
    report = DiagnosticsReport(
        player=player,
        support=support,
        lam=lam,
        budget=budget,
        sigma=sigma,
        psi_bar=basis.psi_bar,
        n_players=game.n,
        n_samples=samples.n_samples,
        degree=game.degree,
        tail_mass=tail_mass,
        verdicts=verdicts,
    )
    if len(support) == 0:
        notes.append("player has no in-neighbors; conditions are not applicable")
        report.notes = tuple(notes)
        return report

    blocks = compute_gram(design, cols)
    if keep_matrices:
        report.gram = blocks
    eig = check_positive_definiteness(blocks.support)
    report.min_eigenvalue = eig.min_eigenvalue
    verdicts["positive_definite"] = eig.passed
    report.feature_norm_bound = float(
        np.sqrt((design[:, cols] ** 2).sum(axis=1).max())
    )
    report.min_head_weight = game.min_head_weight(player)

    if eig.passed:
        inc = check_incoherence(blocks.cross, blocks.support)
        report.incoherence_margin = inc.margin
        verdicts["incoherent"] = inc.passed
        mw = check_min_weight(game, player, lam, eig.min_eigenvalue)
        report.min_weight_threshold = mw.threshold
        verdicts["min_weight"] = mw.passed
        bounds = error_bounds(
            lam, eig.min_eigenvalue, game.degree, len(support), basis.psi_bar, tail_mass
        )
        report.coefficient_error_bound = bounds.coefficient_bound
        report.payoff_error_bound = bounds.payoff_bound
        if inc.passed:
            floor = lambda_threshold(
                basis.psi_bar,
                game.n,
                tail_mass,
                samples.n_samples,
                game.degree,
                budget,
                inc.margin,
                sigma,
            )
            report.lambda_floor = floor
            verdicts["lambda_ok"] = lam > floor
    else:
        notes.append(
            "support Gram block is not positive definite; dependent checks skipped"
        )

    if samples.noise is not None:
        noisy = compute_noisy_gram(design, samples.player_noise(player), cols)
        report.noisy_min_eigenvalue = noisy.min_eigenvalue_sym
        report.noisy_incoherence_norm = noisy.incoherence_norm
        if keep_matrices:
            report.noisy_gram = noisy
        notes.append(
            "noisy Gram computed from retained draws; averaging it over the "
            "noise recovers the clean Gram, and fields follow the displayed "
            "definitions"
        )
    report.notes = tuple(notes)
    return report


def diagnose_game(
    game: GameSpec,
    samples: SampleSet,
    basis: BasisSet,
    lam: float,
    budget: float | None = None,
    delta: float | None = None,
) -> dict[int, DiagnosticsReport]:
    return {
        i: diagnose_player(game, samples, basis, i, lam, budget=budget, delta=delta)
        for i in range(game.n)
    }


def _fmt(x, width=11) -> str:
    if x is None:
        return "--".rjust(width)
    return f"{x:.4g}".rjust(width)


def _verdict(v) -> str:
    if v is None:
        return "  --"
    return "PASS" if v else "FAIL"


def render_report_table(reports: dict[int, DiagnosticsReport]) -> str:
    """Human-readable PASS/FAIL table, one row per player."""
    header = (
        f"{'player':>6} {'c_min':>11} {'alpha':>11} {'Delta':>11} "
        f"{'min|coef|':>11} {'g':>11} {'lambda':>11}  PD   INC  MINW  LAM"
    )
    lines = [header, "-" * len(header)]
    for i in sorted(reports):
        rep = reports[i]
        v = rep.verdicts
        lines.append(
            f"{i:>6} {_fmt(rep.min_eigenvalue)} {_fmt(rep.incoherence_margin)} "
            f"{_fmt(rep.min_weight_threshold)} {_fmt(rep.min_head_weight)} "
            f"{_fmt(rep.lambda_floor)} {_fmt(rep.lam)}  "
            f"{_verdict(v.get('positive_definite'))} {_verdict(v.get('incoherent'))} "
            f"{_verdict(v.get('min_weight'))} {_verdict(v.get('lambda_ok'))}"
        )
    return "\n".join(lines) + "\n"
