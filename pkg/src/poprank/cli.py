"""Command-line pipeline.

    poprank synth    --out DATA
    poprank ingest   --interactions DATA/interactions.csv --pages DATA/pages.csv \\
                     --train 40:55 --test 56:61 --out WORK
    poprank rank     --workdir WORK [--alpha -0.5]
    poprank sweep    --workdir WORK --alphas -2:1:0.25
    poprank predict  --workdir WORK
    poprank polarize --workdir WORK
    poprank pipeline --workdir WORK          # rank + sweep + predict + polarize

Every command records its settings in ``WORK/manifest.json``. Exit codes:
0 success, 1 data error, 2 usage error, 3 no ranking convergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .engine import UPDATE_ORDERS, PopRankConfig, alpha_grid, popularity, run, sweep_alpha
from .evaluate import (DEFAULT_THRESHOLDS, TARGET_KINDS, category_mean_rank, mse_curve,
                       polarization_groups, polarization_report, predict_report,
                       write_mse_curve, write_polarization, write_scatter)
from .ingest import (Targets, WindowConfig, aggregate_training, categories_of, future_targets,
                     load_interactions, load_pages, parse_window, subsample_users,
                     write_interactions, write_pages)
from .model import BiadjacencyMatrix, Category, PopRankError, RankResult, prune_matrix
from .rca import rca_matrix
from .synth import SynthConfig, generate

log = logging.getLogger("poprank")

EXIT_DATA, EXIT_USAGE, EXIT_NOT_CONVERGED = 1, 2, 3


class NotConverged(Exception):
    pass


# ---------------------------------------------------------------------------
# file helpers
# ---------------------------------------------------------------------------

def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _rel(path: Path, start: Path) -> str:
    return Path(os.path.relpath(path.resolve(), start.resolve())).as_posix()


def _load_manifest(workdir: Path) -> dict:
    path = workdir / "manifest.json"
    if not path.exists():
        raise PopRankError(f"{path} not found; run `poprank ingest` first")
    return json.loads(path.read_text(encoding="utf-8"))


def _record_command(workdir: Path, name: str, settings: dict) -> None:
    manifest = _load_manifest(workdir)
    manifest.setdefault("commands", {})[name] = settings
    _dump_json(workdir / "manifest.json", manifest)


def _write_targets(path: Path, targets: dict[str, Targets], cats: dict[str, Category]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["page_id", "activity_of", "activity_on", "n_users", "category"])
        for p, t in targets.items():
            w.writerow([p, repr(t.activity_of), repr(t.activity_on), t.n_users,
                        cats.get(p, Category.UNKNOWN).value])


def _read_targets(path: Path) -> tuple[dict[str, Targets], dict[str, Category]]:
    targets, cats = {}, {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            p = row["page_id"]
            targets[p] = Targets(float(row["activity_of"]), float(row["activity_on"]),
                                 int(row["n_users"]))
            cats[p] = Category(row["category"])
    return targets, cats


def _write_rank_csvs(workdir: Path, res: RankResult) -> None:
    with open(workdir / "impact.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["page_id", "impact", "impact_rank"])
        for p in sorted(res.impact, key=lambda k: -res.impact_rank[k]):
            w.writerow([p, repr(res.impact[p]), repr(res.impact_rank[p])])
    with open(workdir / "engagement.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "engagement", "engagement_rank"])
        for u in sorted(res.engagement, key=lambda k: -res.engagement_rank[k]):
            w.writerow([u, repr(res.engagement[u]), repr(res.engagement_rank[u])])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = SynthConfig(n_users=args.n_users, n_pages=args.n_pages, n_months=args.n_months,
                      seed=args.seed, start_month=args.start_month,
                      reinforcement=args.reinforcement)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records, meta, truth = generate(cfg)
    write_interactions(records, out / "interactions.csv")
    write_pages(meta, out / "pages.csv")
    with open(out / "truth.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["page_id", "quality"])
        for p, q in truth.items():
            w.writerow([p, repr(q)])
    _dump_json(out / "synth.json", cfg.to_dict())
    print(f"wrote {len(records)} interaction records for {cfg.n_pages} pages to {out}")
    return 0


def cmd_ingest(args) -> int:
    window = WindowConfig(*args.train, *args.test, min_page_comments=args.min_comments)
    inter_path, pages_path = Path(args.interactions), Path(args.pages)
    records = load_interactions(inter_path)
    if args.sample_users is not None:
        records = subsample_users(records, args.sample_users, args.sample_seed)
    meta = load_pages(pages_path)
    v = aggregate_training(records, window)
    cats = categories_of(meta)
    targets = future_targets(records, v.page_index, meta, window)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "matrix.json", v.to_dict())
    _write_targets(out / "targets.csv", targets, cats)
    _dump_json(out / "manifest.json", {
        "tool_version": __version__,
        "inputs": {
            "interactions": {"path": _rel(inter_path, out), "sha256": _sha256(inter_path)},
            "pages": {"path": _rel(pages_path, out), "sha256": _sha256(pages_path)},
        },
        "window": window.to_dict(),
        "sample_users": (None if args.sample_users is None
                         else {"n": args.sample_users, "seed": args.sample_seed}),
        "output_dir": ".",
        "commands": {},
    })
    print(f"aggregate matrix: {v.n_users} users x {v.n_pages} pages, "
          f"{v.weights.nnz} nonzero entries")
    return 0


def _engine_config(args, alpha=None) -> PopRankConfig:
    return PopRankConfig(alpha=args.alpha if alpha is None else alpha,
                         max_iterations=args.max_iterations, T_threshold=args.T_threshold,
                         update_order=args.update_order)


def _input_matrix(workdir: Path, mode: str, rca_threshold: float) -> BiadjacencyMatrix:
    v = BiadjacencyMatrix.from_dict(
        json.loads((workdir / "matrix.json").read_text(encoding="utf-8")))
    m = rca_matrix(v, rca_threshold) if mode == "rca" else v
    return prune_matrix(m)


def _engine_settings(args, cfg: PopRankConfig) -> dict:
    return {"poprank": cfg.to_dict(), "matrix_mode": args.input_matrix,
            "rca_threshold": args.rca_threshold}


def _rank(args, workdir: Path) -> tuple[BiadjacencyMatrix, RankResult]:
    m = _input_matrix(workdir, args.input_matrix, args.rca_threshold)
    res = run(m, _engine_config(args))
    if not res.converged:
        raise NotConverged(f"alpha={res.alpha}: ranking did not settle after "
                           f"{res.iterations} iterations (final T={res.final_T:.3g})")
    return m, res


def cmd_rank(args) -> int:
    workdir = Path(args.workdir)
    _, res = _rank(args, workdir)
    _dump_json(workdir / "rank.json", res.to_dict())
    _write_rank_csvs(workdir, res)
    _record_command(workdir, "rank", _engine_settings(args, _engine_config(args)))
    print(f"alpha={res.alpha}: converged after {res.iterations} iterations"
          + (" (values underflowed; only rankings are meaningful)" if res.underflow else ""))
    return 0


def cmd_sweep(args) -> int:
    workdir = Path(args.workdir)
    start, stop, step = (float(x) for x in args.alphas.split(":"))
    alphas = alpha_grid(start, stop, step)
    m = _input_matrix(workdir, args.input_matrix, args.rca_threshold)
    targets, _ = _read_targets(workdir / "targets.csv")
    results, errors = sweep_alpha(m, alphas, _engine_config(args))
    _, pop_ranks = popularity(m)
    rows = mse_curve(results, targets, pop_ranks, kind=args.target, regress_on=args.regress_on)
    write_mse_curve(workdir / "mse_curve.csv", rows)
    _dump_json(workdir / "sweep.json", {
        "results": {repr(a): r.to_dict() for a, r in results.items()},
        "errors": {repr(a): e for a, e in errors.items()},
        "not_converged": [a for a, r in sorted(results.items()) if not r.converged],
    })
    settings = _engine_settings(args, _engine_config(args))
    settings.update(alphas=alphas, target=args.target, regress_on=args.regress_on)
    _record_command(workdir, "sweep", settings)
    for row in rows:
        print(f"alpha={row.alpha:+.3f}  mse_impact={row.mse_impact:.6g}  "
              f"mse_popularity={row.mse_popularity:.6g}")
    skipped = len(alphas) - len(rows)
    if skipped:
        print(f"{skipped} alpha value(s) failed or did not converge; see sweep.json")
    return 0


def cmd_predict(args) -> int:
    workdir = Path(args.workdir)
    m, res = _rank(args, workdir)
    targets, cats = _read_targets(workdir / "targets.csv")
    _, pop_ranks = popularity(m)
    report = predict_report(res, targets, cats, pop_ranks, regress_on=args.regress_on)
    write_scatter(workdir / "scatter.csv", res, targets, report.impact[args.target], args.target)
    out = report.to_dict()
    out["category_mean_rank"] = category_mean_rank(res.impact_rank, cats)
    _dump_json(workdir / "predict.json", out)
    settings = _engine_settings(args, _engine_config(args))
    settings.update(target=args.target, regress_on=args.regress_on)
    _record_command(workdir, "predict", settings)
    for kind, fit in report.impact.items():
        base = report.baseline[kind]
        print(f"{kind:12s} R2={fit.r_squared:.4f} mse={fit.mse:.6g} p={fit.p_value:.3g}  "
              f"(popularity R2={base.r_squared:.4f} mse={base.mse:.6g})")
    return 0


def cmd_polarize(args) -> int:
    workdir = Path(args.workdir)
    manifest = _load_manifest(workdir)
    window = WindowConfig.from_dict(manifest["window"])
    records = load_interactions(workdir / manifest["inputs"]["interactions"]["path"])
    sample = manifest.get("sample_users")
    if sample:
        records = subsample_users(records, sample["n"], sample["seed"])
    thresholds = ([float(t) for t in args.thresholds.split(",")] if args.thresholds
                  else list(DEFAULT_THRESHOLDS))
    m, res = _rank(args, workdir)
    _, cats = _read_targets(workdir / "targets.csv")
    _, pop_ranks = popularity(m)
    groups = polarization_groups(records, (window.train_start, window.train_end), thresholds)
    rows = polarization_report(groups, res, records, cats, pop_ranks,
                               test_window=(window.test_start, window.test_end),
                               regress_on=args.regress_on)
    write_polarization(workdir / "polarization.csv", rows)
    settings = _engine_settings(args, _engine_config(args))
    settings.update(thresholds=thresholds, regress_on=args.regress_on)
    _record_command(workdir, "polarize", settings)
    for t, row in rows.items():
        if row.skipped:
            print(f"x*={t:.2f}  skipped: {row.reason}")
        else:
            print(f"x*={t:.2f}  R2={row.impact.r_squared:.4f}  mse={row.impact.mse:.6g}")
    return 0


def cmd_pipeline(args) -> int:
    for fn in (cmd_rank, cmd_sweep, cmd_predict, cmd_polarize):
        fn(args)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workdir", required=True, help="directory written by `poprank ingest`")
    p.add_argument("--alpha", type=float, default=-0.5)
    p.add_argument("--update-order", choices=UPDATE_ORDERS, default="sequential")
    p.add_argument("--input-matrix", choices=("rca", "raw"), default="rca")
    p.add_argument("--rca-threshold", type=float, default=1.0)
    p.add_argument("--max-iterations", type=int, default=PopRankConfig.max_iterations)
    p.add_argument("--T-threshold", type=float, default=PopRankConfig.T_threshold)


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--regress-on", choices=("rank", "value"), default="rank")
    p.add_argument("--target", choices=TARGET_KINDS, default="activity_of")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poprank", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--out", required=True)
    defaults = SynthConfig()
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.add_argument("--n-users", type=int, default=defaults.n_users)
    p.add_argument("--n-pages", type=int, default=defaults.n_pages)
    p.add_argument("--n-months", type=int, default=defaults.n_months)
    p.add_argument("--start-month", type=int, default=defaults.start_month)
    p.add_argument("--reinforcement", type=float, default=defaults.reinforcement)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="filter, aggregate and build targets")
    p.add_argument("--interactions", required=True)
    p.add_argument("--pages", required=True)
    p.add_argument("--train", required=True, type=parse_window, help="training months START:END")
    p.add_argument("--test", required=True, type=parse_window, help="test months START:END")
    p.add_argument("--min-comments", type=int, default=5)
    p.add_argument("--sample-users", type=int, default=None,
                   help="uniformly subsample this many users before filtering")
    p.add_argument("--sample-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("rank", help="run the iteration once")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("sweep", help="MSE against alpha")
    _add_engine_flags(p)
    _add_eval_flags(p)
    p.add_argument("--alphas", default="-2:1:0.25", help="START:STOP:STEP, inclusive")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("predict", help="regress test-window activity on the ranking")
    _add_engine_flags(p)
    _add_eval_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("polarize", help="per-polarization-group regressions")
    _add_engine_flags(p)
    _add_eval_flags(p)
    p.add_argument("--thresholds", default=None, help="comma-separated; default 0.1,...,1.0")
    p.set_defaults(func=cmd_polarize)

    p = sub.add_parser("pipeline", help="rank, sweep, predict and polarize")
    _add_engine_flags(p)
    _add_eval_flags(p)
    p.add_argument("--alphas", default="-2:1:0.25")
    p.add_argument("--thresholds", default=None)
    p.set_defaults(func=cmd_pipeline)
    return parser


def _glue_negative_values(argv: list[str]) -> list[str]:
    # argparse reads "-2:1:0.25" as an option
    out, i = [], 0
    while i < len(argv):
        if argv[i] in ("--alphas", "--thresholds") and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(_glue_negative_values(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "alphas", None) is not None and len(args.alphas.split(":")) != 3:
            parser.error("--alphas must be START:STOP:STEP")
        return args.func(args)
    except NotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (PopRankError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
