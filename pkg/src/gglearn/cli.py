"""Command-line frontend binding the library into reproducible runs.

Every subcommand writes a manifest next to its primary output recording the
resolved argument vector and the library version; ``gglearn rerun`` replays
a manifest and reproduces the outputs byte for byte (no timestamps are ever
written into result files).

Exit codes: 0 success, 2 usage error, 3 data error, 4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .basis import FourierPairwiseBasis, basis_to_json
from .diagnostics import diagnose_game, render_report_table, lambda_threshold
from .experiments import (
    FixedPenalty,
    SweepConfig,
    ThresholdPenalty,
    run_sweep,
    sweep_rows_to_csv,
)
from .game import (
    PowerLawTail,
    ZeroTail,
    generate_game,
    load_game,
    save_game,
)
from .ingest import TableParseError, influence_ranking, load_table, make_fixture
from .recovery import (
    graph_to_adjacency,
    graph_to_dot,
    learn_game,
    structure_metrics,
)
from .sampling import NoiseModel, build_sample_set, load_sample_set, save_sample_set
from .solver import SolverConfig, SolverConvergenceError, assemble_regression, solve_player

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NO_CONVERGENCE = 4


class UsageError(ValueError):
    pass


class DataError(ValueError):
    pass


def _dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(anchor: Path, command: str, argv: list[str]) -> None:
    if anchor.suffix:
        path = anchor.with_name(anchor.stem + ".manifest.json")
    else:
        anchor.mkdir(parents=True, exist_ok=True)
        path = anchor / "manifest.json"
    _dump_json({"command": command, "argv": argv, "version": __version__}, path)


def _parse_tail(text: str):
    if text == "zero":
        return ZeroTail()
    if text.startswith("powerlaw:"):
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError("tail must be 'zero' or 'powerlaw:COEF:EXPONENT'")
        try:
            return PowerLawTail(coef=float(parts[1]), exponent=float(parts[2]))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    raise UsageError(f"unknown tail descriptor {text!r}")


def _parse_basis(text: str) -> FourierPairwiseBasis:
    if text.startswith("fourier:"):
        try:
            return FourierPairwiseBasis(int(text.split(":", 1)[1]))
        except ValueError as exc:
            raise UsageError(f"bad basis spec {text!r}") from exc
    raise UsageError(
        f"unknown basis {text!r}; the CLI supports 'fourier:ORDER' "
        "(custom bases carry code and are library-only)"
    )


def _jobs_default() -> int:
    env = os.environ.get("GGLEARN_JOBS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _cmd_generate(args, argv) -> int:
    try:
        game = generate_game(
            args.n,
            args.d,
            args.r,
            args.seed,
            args.min_weight,
            tail=_parse_tail(args.tail),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    save_game(game, out)
    _write_manifest(out, "generate", argv)
    print(f"wrote {out} (n={game.n}, d={game.degree}, r={game.r_head})")
    return EXIT_OK


def _cmd_sample(args, argv) -> int:
    game = _load_game_checked(args.game)
    basis = FourierPairwiseBasis(args.order) if args.order else FourierPairwiseBasis(
        _order_from_r(game.r_head)
    )
    noise = NoiseModel(args.sigma, args.family)
    samples = build_sample_set(
        game,
        basis,
        noise,
        args.n_samples,
        args.seed,
        tail_truncation=args.tail_truncation,
        retain_noise=args.retain_noise,
    )
    out = Path(args.out_dir)
    save_sample_set(samples, out)
    _write_manifest(out, "sample", argv)
    print(f"wrote {out}/actions.csv payoffs.csv meta.json (N={samples.n_samples})")
    return EXIT_OK


def _order_from_r(r: int) -> int:
    order = int(round((r / 4) ** 0.5))
    if 4 * order * order != r:
        raise UsageError(f"r={r} is not a built-in basis size (4*order**2)")
    return order


def _load_game_checked(path):
    try:
        return load_game(path)
    except FileNotFoundError as exc:
        raise DataError(f"game file not found: {path}") from exc
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataError(f"bad game file {path}: {exc}") from exc


def _load_samples_checked(path):
    try:
        return load_sample_set(path)
    except FileNotFoundError as exc:
        raise DataError(f"sample directory incomplete: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"bad sample data in {path}: {exc}") from exc


def _auto_penalty(samples, args) -> tuple[dict[int, float], dict]:
    """Penalty per player for --lambda auto.

    With synthetic metadata (sigma, tail bound, degree, budget hint) the
    threshold rule applies directly, using a conservative incoherence margin
    of 1 unless --alpha is given.  Otherwise fall back to a warm-started
    penalty grid selected by BIC, reporting the full path.
    """
    info = samples.meta.game_info or {}
    sigma = samples.meta.noise.sigma if samples.meta.noise else None
    n = samples.n_players
    multiplier = 1.1
    if sigma is not None and {"degree", "tail_bound", "budget_hint"} <= info.keys():
        alpha = args.alpha if args.alpha is not None else 1.0
        budget = args.budget if args.budget else info["budget_hint"]
        floor = lambda_threshold(
            1.0,
            n,
            info["tail_bound"],
            samples.n_samples,
            info["degree"],
            budget,
            alpha,
            sigma,
        )
        lam = multiplier * floor
        if lam > 0:
            return (
                {i: lam for i in range(n)},
                {"mode": "threshold", "floor": floor, "multiplier": multiplier},
            )
    return _grid_penalty(samples, args)


def _grid_penalty(samples, args) -> tuple[dict[int, float], dict]:
    basis = _parse_basis(args.basis)
    lams: dict[int, float] = {}
    path_report = []
    for i in range(samples.n_players):
        design, target = assemble_regression(samples, basis, i)
        n_s = design.shape[0]
        lam_max = float(np.abs((2.0 / n_s) * design.T @ target).max())
        lam_max = max(lam_max, 1e-12)
        grid = lam_max * np.geomspace(1.0, 1e-4, 25)
        best_lam, best_bic = grid[0], np.inf
        entries = []
        for lam in grid:
            cfg = SolverConfig(lam=float(lam), budget=args.budget or 1e9)
            res = solve_player(design, target, cfg)
            k = int(np.count_nonzero(res.beta))
            mse = max(
                float(((target - design @ res.beta) ** 2).mean()), 1e-300
            )
            bic = n_s * np.log(mse) + k * np.log(n_s)
            entries.append({"lambda": float(lam), "nonzeros": k, "bic": float(bic)})
            if bic < best_bic:
                best_bic, best_lam = bic, float(lam)
        lams[i] = best_lam
        path_report.append({"player": i, "chosen": best_lam, "path": entries})
    return lams, {"mode": "grid_bic", "paths": path_report}


def _cmd_learn(args, argv) -> int:
    samples = _load_samples_checked(args.samples)
    basis = _parse_basis(args.basis)
    jobs = args.jobs or _jobs_default()
    penalty_report: dict = {}
    if args.lam == "auto":
        lams, penalty_report = _auto_penalty(samples, args)
    else:
        try:
            lam_val = float(args.lam)
        except ValueError:
            raise UsageError(f"--lambda must be 'auto' or a number, got {args.lam!r}")
        if lam_val < 0:
            raise UsageError("--lambda must be nonnegative")
        lams = {i: lam_val for i in range(samples.n_players)}
        penalty_report = {"mode": "fixed", "value": lam_val}
    budget = args.budget or 1e9
    configs = {
        i: SolverConfig(lam=lams[i], budget=budget, tol=args.tol) for i in lams
    }
    rec, solved = learn_game(samples, basis, configs, tau=args.tau, jobs=jobs)
    result = {
        "basis": basis_to_json(basis),
        "penalty": penalty_report,
        "lambdas": {str(i): lams[i] for i in lams},
        "budget": budget,
        "tau": args.tau,
        "recovery": rec.to_json(),
        "solver": {
            str(i): {
                "objective": solved[i].objective,
                "kkt_residual": solved[i].kkt_residual,
                "iterations": solved[i].iterations,
                "budget_active": solved[i].budget_active,
                "l1_norm": solved[i].l1_norm,
            }
            for i in solved
        },
    }
    if args.truth:
        truth = _load_game_checked(args.truth)
        result["structure_metrics"] = structure_metrics(truth, rec).to_json()
    out = Path(args.out)
    _dump_json(result, out)
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as fh:
            fh.write(graph_to_dot(rec.graph, rec.n))
    _write_manifest(out, "learn", argv)
    print(f"wrote {out} ({len(rec.graph)} edges)")
    return EXIT_OK


def _cmd_diagnose(args, argv) -> int:
    game = _load_game_checked(args.game)
    samples = _load_samples_checked(args.samples)
    basis = (
        FourierPairwiseBasis(args.order)
        if args.order
        else FourierPairwiseBasis(_order_from_r(game.r_head))
    )
    reports = diagnose_game(game, samples, basis, args.lam, budget=args.budget)
    payload = {
        "lambda": args.lam,
        "white_box": samples.noise is not None,
        "players": {str(i): reports[i].to_json() for i in reports},
    }
    out = Path(args.out)
    _dump_json(payload, out)
    _write_manifest(out, "diagnose", argv)
    print(render_report_table(reports), end="")
    print(f"wrote {out}")
    return EXIT_OK


def _parse_penalty(obj) -> FixedPenalty | ThresholdPenalty:
    kind = obj.get("kind")
    if kind == "fixed":
        return FixedPenalty(float(obj["value"]))
    if kind == "threshold":
        return ThresholdPenalty(float(obj.get("multiplier", 1.1)))
    raise DataError(f"unknown penalty rule {kind!r} in sweep config")


def _cmd_sweep(args, argv) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"sweep config not found: {args.config}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"bad sweep config: {exc}") from exc
    try:
        config = SweepConfig(
            n_values=tuple(raw["n"]),
            degree_values=tuple(raw["d"]),
            r_values=tuple(raw["r"]),
            sample_sizes=tuple(raw["n_samples"]),
            sigmas=tuple(raw["sigma"]),
            penalties=tuple(_parse_penalty(p) for p in raw["penalty"]),
            trials=int(raw.get("trials", 20)),
            base_seed=int(raw.get("seed", 0)),
            min_weight=float(raw.get("min_weight", 0.5)),
            tail=_parse_tail(raw.get("tail", "zero")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad sweep config: {exc}") from exc
    jobs = args.jobs or _jobs_default()
    results, rows = run_sweep(config, jobs=jobs)
    out = Path(args.out)
    sweep_rows_to_csv(rows, out)
    summary = [
        {"cell": res.cell.describe(), **res.metrics()} for res in results
    ]
    _dump_json(summary, out.with_name(out.stem + ".summary.json"))
    _write_manifest(out, "sweep", argv)
    print(f"wrote {out} ({len(rows)} rows)")
    return EXIT_OK


def _cmd_influence(args, argv) -> int:
    try:
        with open(args.result, "r", encoding="utf-8") as fh:
            result = json.load(fh)
        rec = result["recovery"]
        edges = [tuple(e) for e in rec["graph"]]
        n = int(rec["n"])
    except FileNotFoundError as exc:
        raise DataError(f"result file not found: {args.result}") from exc
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"bad result file {args.result}: {exc}") from exc
    ranking = influence_ranking(edges, n)
    print(f"{'player':>8} {'out_degree':>12}")
    for player, deg in ranking:
        print(f"{player:>8} {deg:>12}")
    payload = {"ranking": [{"player": p, "out_degree": d} for p, d in ranking]}
    if args.out:
        out = Path(args.out)
        _dump_json(payload, out)
        _write_manifest(out, "influence", argv)
    return EXIT_OK


def _cmd_fixture(args, argv) -> int:
    try:
        rows_s, cols_s = args.shape.lower().split("x")
        n_rows, n_cols = int(rows_s), int(cols_s)
    except ValueError:
        raise UsageError(f"--shape must look like 47x31, got {args.shape!r}")
    game, samples, hub = make_fixture(
        n_rows=n_rows, n_cols=n_cols, seed=args.seed, sigma=args.sigma
    )
    out = Path(args.out_dir)
    save_sample_set(samples, out)
    from .game import game_to_json

    _dump_json({"hub": hub, "game": game_to_json(game)}, out / "fixture_truth.json")
    _write_manifest(out, "fixture", argv)
    print(f"wrote {out} ({n_rows} rows x {n_cols} players, hub={hub})")
    return EXIT_OK


def _cmd_rerun(args, argv) -> int:
    try:
        with open(args.manifest, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        stored = manifest["argv"]
    except FileNotFoundError as exc:
        raise DataError(f"manifest not found: {args.manifest}") from exc
    except (json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"bad manifest {args.manifest}: {exc}") from exc
    return main(stored)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gglearn",
        description="Learn the structure and payoffs of continuous-action games "
        "from noisy payoff samples.",
    )
    parser.add_argument("--version", action="version", version=f"gglearn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a random ground-truth game")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--min-weight", type=float, default=0.5)
    p.add_argument("--tail", default="zero", help="zero | powerlaw:COEF:EXPONENT")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sample", help="draw noisy payoff samples from a game")
    p.add_argument("--game", required=True)
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--family", default="gaussian", choices=["gaussian", "uniform", "rademacher"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--order", type=int, default=None, help="basis order (default from game)")
    p.add_argument("--tail-truncation", type=int, default=None)
    p.add_argument("--retain-noise", action="store_true", help="keep draws for white-box diagnostics")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("learn", help="estimate the game structure from samples")
    p.add_argument("--samples", required=True, help="directory with actions/payoffs/meta")
    p.add_argument("--basis", default="fourier:2")
    p.add_argument("--lambda", dest="lam", default="auto", help="'auto' or a number")
    p.add_argument("--alpha", type=float, default=None, help="incoherence margin for auto")
    p.add_argument("--budget", type=float, default=None)
    p.add_argument("--tau", type=float, default=1e-7)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--truth", default=None, help="game.json to score the recovery against")
    p.add_argument("--dot", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("diagnose", help="condition checks and bounds per player")
    p.add_argument("--game", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--budget", type=float, default=None)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="recovery-rate sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("influence", help="out-degree ranking of a learned graph")
    p.add_argument("--result", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("fixture", help="synthetic table-shaped dataset from a planted game")
    p.add_argument("--shape", default="47x31")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("rerun", help="replay a manifest")
    p.add_argument("manifest")
    return parser


_HANDLERS = {
    "generate": _cmd_generate,
    "sample": _cmd_sample,
    "learn": _cmd_learn,
    "diagnose": _cmd_diagnose,
    "sweep": _cmd_sweep,
    "influence": _cmd_influence,
    "fixture": _cmd_fixture,
    "rerun": _cmd_rerun,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return _HANDLERS[args.command](args, argv)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, TableParseError) as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverConvergenceError as exc:
        print(f"error: non-convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
