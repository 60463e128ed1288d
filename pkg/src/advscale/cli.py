"""Command-line surface for the toolkit.

Artifacts are plain tables (csv or line-records) so downstream plotting
stays out of this package. Every subcommand is deterministic given its
inputs, flags, and --seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import allocator, envelope, parametric, run_data, validity
from .errors import ToolkitError, UsageError
from .synthgen import SynthDesign, generate_runs

OUT_DIR_ENV = "ADVSCALE_OUT_DIR"

_FLOAT_FORMAT = "{:.10g}"


class _Parser(argparse.ArgumentParser):
    """argparse that reports bad usage through the package's exit contract."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    common.add_argument(
        "--out-dir",
        default=None,
        help=f"directory for artifacts (default: ${OUT_DIR_ENV} or current directory)",
    )
    common.add_argument(
        "--format",
        choices=("csv", "line-records"),
        default="csv",
        help="artifact table format",
    )
    return common


def _resolve_out(args, name: str | None) -> Path | None:
    if name is None:
        return None
    path = Path(name)
    if path.is_absolute():
        return path
    base = args.out_dir or os.environ.get(OUT_DIR_ENV) or "."
    out = Path(base) / path
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        return _FLOAT_FORMAT.format(value)
    return str(value)


def _write_rows(path: Path, rows: list[dict], fmt: str) -> None:
    if fmt == "line-records":
        with path.open("w") as handle:
            for row in rows:
                handle.write(json.dumps(row, sort_keys=True) + "\n")
        return
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _fmt(value) for key, value in row.items()})


def _print_rows(rows: list[dict]) -> None:
    for row in rows:
        print("  ".join(f"{key}={_fmt(value)}" for key, value in row.items()))


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"{flag}: expected comma-separated numbers, got {text!r}") from exc
    if not values:
        raise UsageError(f"{flag}: expected at least one value")
    return values


def _load_params_arg(args) -> parametric.Approach2Params | parametric.Approach3Params:
    if args.params is not None:
        params = parametric.load_params(args.params)
    else:
        params = parametric.published_params(args.approach)
    expected = parametric.Approach2Params if args.approach == 2 else parametric.Approach3Params
    if not isinstance(params, expected):
        raise UsageError(
            f"--params file holds an approach-{3 if args.approach == 2 else 2} fit; "
            f"--approach {args.approach} was requested"
        )
    return params


def _study_paths(labels_arg: str, images_arg: str, study_arg: str | None):
    labels_path = Path(labels_arg)
    if labels_path.is_dir():
        labels_path = labels_path / "labels.jsonl"
    images_path = Path(images_arg)
    if images_path.is_dir():
        images_path = images_path / "images.jsonl"
    study_path = Path(study_arg) if study_arg else labels_path.parent / "study.json"
    return labels_path, images_path, study_path


def _cmd_ingest(args) -> int:
    runs = run_data.load_runs(args.runs)
    models = sorted({run.model.name for run in runs})
    generators = sorted({run.dataset.generator for run in runs})
    worst = run_data.flops_model_max_relative_error(runs)
    print(f"runs={len(runs)}  models={len(models)}  generators={len(generators)}")
    print(f"flops_model_max_relative_error={_fmt(worst)}")
    out = _resolve_out(args, args.out)
    if out is not None:
        run_data.dump_runs(runs, out)
        print(f"wrote {out}")
    return 0


def _cmd_envelope(args) -> int:
    runs = run_data.load_runs(args.runs)
    points = envelope.compute_envelope(runs, n_query=args.n_query)
    if not args.raw:
        points = envelope.monotone_filter(points)
    fits = envelope.fit_power_laws(points)
    print(
        f"points={len(points)}  "
        f"a={_fmt(fits.n_of_flops.exponent)}  b={_fmt(fits.d_of_flops.exponent)}  "
        f"a+b={_fmt(fits.n_of_flops.exponent + fits.d_of_flops.exponent)}  "
        f"loss_exponent={_fmt(fits.loss_of_flops.exponent)}"
    )
    out = _resolve_out(args, args.out)
    if out is not None:
        rows = [
            {
                "flops": point.flops,
                "loss": point.loss,
                "n_star": point.n_star,
                "d_star": point.d_star,
                "run_id": point.run_id,
            }
            for point in points
        ]
        _write_rows(out, rows, args.format)
        print(f"wrote {out}")
    return 0


def _run_fit(args, fitter) -> int:
    runs = run_data.load_runs(args.runs)
    config = parametric.FitConfig(filter_enabled=not args.no_filter)
    if fitter is parametric.fit_approach2:
        result = fitter(runs, config, stage1_generator=args.stage1_generator)
    else:
        result = fitter(runs, config)
    items = parametric.params_to_dict(result.params)
    print("  ".join(f"{key}={_fmt(value)}" for key, value in items.items()))
    out = _resolve_out(args, args.out)
    if out is not None:
        out.write_text(json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n")
        print(f"wrote {out}")
    return 0


def _cmd_fit2(args) -> int:
    return _run_fit(args, parametric.fit_approach2)


def _cmd_fit3(args) -> int:
    return _run_fit(args, parametric.fit_approach3)


def _cmd_allocate(args) -> int:
    params = _load_params_arg(args)
    rows = []
    for flops in _parse_float_list(args.flops, "--flops"):
        if args.approach == 2:
            alloc = allocator.optimal_allocation_v2(flops, args.fid, params)
        else:
            alloc = allocator.optimal_allocation_v3(flops, args.fid, params)
            if alloc.boundary_warning:
                print(
                    f"warning: optimum at flops={_fmt(flops)} sits at the search boundary",
                    file=sys.stderr,
                )
        rows.append(
            {
                "flops": alloc.flops,
                "fid": alloc.fid,
                "n_star": alloc.n_star,
                "d_star": alloc.d_star,
                "l_star": alloc.l_star,
                "a": alloc.a,
                "b": alloc.b,
                "g": alloc.g,
            }
        )
    _print_rows(rows)
    out = _resolve_out(args, args.out)
    if out is not None:
        _write_rows(out, rows, args.format)
        print(f"wrote {out}")
    return 0


def _cmd_overhead(args) -> int:
    params = _load_params_arg(args)
    if not isinstance(params, parametric.Approach2Params):
        raise UsageError("overhead requires approach-2 parameters")
    omega_n_list = _parse_float_list(args.omega_n, "--omega-n")
    points = allocator.overhead_curve(args.flops, args.fid, params, omega_n_list)
    rows = [
        {
            "omega_n": point.omega_n,
            "omega_d": point.omega_d,
            "overhead_pct": point.overhead_pct,
        }
        for point in points
    ]
    _print_rows(rows)
    out = _resolve_out(args, args.out)
    if out is not None:
        _write_rows(out, rows, args.format)
        print(f"wrote {out}")
    return 0


def _cmd_loss_acc(args) -> int:
    if args.published:
        fit = allocator.published_loss_accuracy()
    else:
        if args.runs is None:
            raise UsageError("loss-acc requires --runs unless --published is set")
        runs = run_data.load_runs(args.runs)
        fit = allocator.fit_loss_accuracy(runs)
    print(
        f"slope={_fmt(fit.slope)}  intercept={_fmt(fit.intercept)}  "
        f"r_squared={_fmt(fit.r_squared)}"
    )
    out = _resolve_out(args, args.out)
    if out is not None:
        payload = {"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared}
        out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        print(f"wrote {out}")
    return 0


def _cmd_frontier(args) -> int:
    params = _load_params_arg(args)
    acc_map = (
        allocator.load_loss_accuracy(args.acc_map)
        if args.acc_map
        else allocator.published_loss_accuracy()
    )
    fids = _parse_float_list(args.fids, "--fids")
    if args.flops_lo <= 0 or args.flops_hi <= args.flops_lo:
        raise UsageError("frontier requires 0 < --flops-lo < --flops-hi")
    if args.points < 2:
        raise UsageError("frontier requires --points >= 2")
    grid = np.geomspace(args.flops_lo, args.flops_hi, args.points)
    table = allocator.frontier(params, acc_map, fids, grid)
    rows = [
        {
            "fid": row.fid,
            "flops": row.flops,
            "n_star": row.n_star,
            "d_star": row.d_star,
            "l_star": row.l_star,
            "accuracy": row.accuracy,
        }
        for row in table.rows
    ]
    for asym in table.asymptotes:
        print(
            f"fid={_fmt(asym.fid)}  loss_limit={_fmt(asym.loss_limit)}  "
            f"accuracy_limit={_fmt(asym.accuracy_limit)}"
        )
    out = _resolve_out(args, args.out)
    if out is not None:
        _write_rows(out, rows, args.format)
        asym_out = out.with_name(out.stem + "_asymptotes" + out.suffix)
        _write_rows(
            asym_out,
            [
                {
                    "fid": asym.fid,
                    "loss_limit": asym.loss_limit,
                    "accuracy_limit": asym.accuracy_limit,
                }
                for asym in table.asymptotes
            ],
            args.format,
        )
        print(f"wrote {out}")
        print(f"wrote {asym_out}")
    else:
        _print_rows(rows)
    return 0


def _cmd_validity(args) -> int:
    labels_path, images_path, study_path = _study_paths(args.labels, args.images, args.study)
    labels = validity.load_labels(labels_path)
    images = validity.load_images(images_path)
    report = validity.classify_validity(labels, images)
    counts = report.counts
    print(
        f"corpus={counts['corpus']}  valid={counts['valid']}  invalid={counts['invalid']}  "
        f"deceptive={counts['deceptive']}  ambiguous={counts['ambiguous']}"
    )
    for table_condition in ("adversarial", "clean"):
        for user in validity.user_accuracy(labels, images, table_condition).values():
            print(
                f"user={user.user_id}  kind={user.user_kind}  condition={table_condition}  "
                f"correct={user.correct}  total={user.total}  "
                f"accuracy={100.0 * user.accuracy:.2f}%"
            )
    if not study_path.exists():
        print(f"note: no study file at {study_path}; skipping benchmark table")
        return 0
    study = json.loads(study_path.read_text())
    include_machine = args.population == "humans+machine"
    avg_all = validity.average_human_correct(
        labels, images, include_machine=include_machine
    )
    avg_valid = validity.average_human_correct(
        labels, images, image_ids=report.valid_ids, include_machine=include_machine
    )
    table = validity.revised_benchmark(
        report,
        sota_correct_count=int(study["sota_correct"]),
        total_test=int(study["total_test"]),
        avg_human_correct_on_misclassified=avg_all,
        avg_human_correct_on_valid=avg_valid,
    )
    print(f"sota_all={table.sota_all_pct:.2f}%  sota_valid={table.sota_valid_pct:.2f}%")
    print(
        f"human_augmented_all={table.human_augmented_all_pct:.2f}%  "
        f"human_augmented_valid={table.human_augmented_valid_pct:.2f}%"
    )
    out = _resolve_out(args, args.out)
    if out is not None:
        payload = {
            "counts": counts,
            "sota_all_pct": table.sota_all_pct,
            "sota_valid_pct": table.sota_valid_pct,
            "human_augmented_all_pct": table.human_augmented_all_pct,
            "human_augmented_valid_pct": table.human_augmented_valid_pct,
        }
        out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        print(f"wrote {out}")
    return 0


def _cmd_synth(args) -> int:
    truth = parametric.load_params(args.truth)
    if args.models is not None:
        model_sizes = [int(v) for v in _parse_float_list(args.models, "--models")]
    else:
        model_sizes = [spec.params_n for spec in run_data.load_model_catalog()]
    dataset_sizes = [int(v) for v in _parse_float_list(args.datasets, "--datasets")]
    fids = _parse_float_list(args.fids, "--fids")
    acc_map = allocator.load_loss_accuracy(args.acc_map) if args.acc_map else None
    design = SynthDesign(
        model_sizes=model_sizes,
        dataset_sizes=dataset_sizes,
        fids=fids,
        eval_points_per_run=args.points,
        noise_sigma=args.sigma,
        seed=args.seed,
        additive_noise=args.additive,
        accuracy_map=acc_map,
    )
    runs = generate_runs(truth, design)
    out = _resolve_out(args, args.out)
    run_data.dump_runs(runs, out)
    print(f"wrote {out} ({len(runs)} runs)")
    return 0


def build_parser() -> _Parser:
    common = _common_flags()
    parser = _Parser(prog="advscale", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", metavar="subcommand")

    p = sub.add_parser("ingest", parents=[common], help="validate and summarize a run file")
    p.add_argument("--runs", required=True, help="run-record JSONL file")
    p.add_argument("--out", default=None, help="re-emit normalized records here")
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser(
        "envelope", parents=[common], help="compute the compute-frontier envelope"
    )
    p.add_argument("--runs", required=True, help="run-record JSONL file")
    p.add_argument("--n-query", type=int, default=1000, help="number of query budgets")
    p.add_argument(
        "--raw", action="store_true", help="skip the monotone filter before fitting"
    )
    p.add_argument("--out", default=None, help="write envelope points here")
    p.set_defaults(handler=_cmd_envelope)

    for name, help_text in (
        ("fit2", "fit the quality-dependent loss form"),
        ("fit3", "fit the bottleneck loss form"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--runs", required=True, help="run-record JSONL file")
        p.add_argument(
            "--no-filter", action="store_true", help="fit on all runs, not the filtered subset"
        )
        if name == "fit2":
            p.add_argument(
                "--stage1-generator",
                default=None,
                help="generator for the base stage (default: lowest fid present)",
            )
        p.add_argument("--out", default=None, help="write the fit report here")
        p.set_defaults(handler=_cmd_fit2 if name == "fit2" else _cmd_fit3)

    p = sub.add_parser("allocate", parents=[common], help="compute-optimal model/data split")
    p.add_argument("--approach", type=int, choices=(2, 3), required=True)
    p.add_argument("--fid", type=float, required=True, help="generator quality")
    p.add_argument("--flops", required=True, help="budget, or comma-separated budgets")
    p.add_argument("--params", default=None, help="fitted-params JSON (default: published)")
    p.add_argument("--out", default=None, help="write the allocation table here")
    p.set_defaults(handler=_cmd_allocate)

    p = sub.add_parser("overhead", parents=[common], help="cost of training off-optimum")
    p.add_argument("--fid", type=float, required=True, help="generator quality")
    p.add_argument("--flops", type=float, required=True, help="budget")
    p.add_argument(
        "--omega-n",
        default="0.25,0.5,0.75,1,1.5,2",
        help="comma-separated model-size rescalings",
    )
    p.add_argument("--params", default=None, help="fitted-params JSON (default: published)")
    p.add_argument("--approach", type=int, choices=(2,), default=2, help=argparse.SUPPRESS)
    p.add_argument("--out", default=None, help="write the overhead table here")
    p.set_defaults(handler=_cmd_overhead)

    p = sub.add_parser("loss-acc", parents=[common], help="fit the loss-to-accuracy map")
    p.add_argument("--runs", default=None, help="run-record JSONL file with adv_acc")
    p.add_argument(
        "--published", action="store_true", help="emit the published map instead of fitting"
    )
    p.add_argument("--out", default=None, help="write the map here")
    p.set_defaults(handler=_cmd_loss_acc)

    p = sub.add_parser("frontier", parents=[common], help="accuracy frontier across budgets")
    p.add_argument("--approach", type=int, choices=(2, 3), required=True)
    p.add_argument("--params", default=None, help="fitted-params JSON (default: published)")
    p.add_argument("--acc-map", default=None, help="loss-accuracy JSON (default: published)")
    p.add_argument("--fids", default="0,1.76", help="comma-separated fids")
    p.add_argument("--flops-lo", type=float, default=1e21, help="smallest budget")
    p.add_argument("--flops-hi", type=float, default=1e26, help="largest budget")
    p.add_argument("--points", type=int, default=21, help="budgets per fid")
    p.add_argument("--out", default=None, help="write frontier rows here")
    p.set_defaults(handler=_cmd_frontier)

    p = sub.add_parser("validity", parents=[common], help="adjudicate study label records")
    p.add_argument("--labels", required=True, help="label JSONL file, or its directory")
    p.add_argument("--images", required=True, help="image-meta JSONL file, or its directory")
    p.add_argument("--study", default=None, help="study counts JSON (default: alongside labels)")
    p.add_argument(
        "--population",
        choices=("humans", "humans+machine"),
        default="humans",
        help="users averaged in the human-augmented bound",
    )
    p.add_argument("--out", default=None, help="write the report here")
    p.set_defaults(handler=_cmd_validity)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic run logs")
    p.add_argument("--truth", required=True, help="ground-truth params JSON")
    p.add_argument("--models", default=None, help="comma-separated model sizes (default: catalog)")
    p.add_argument(
        "--datasets",
        default="1e6,3e6,1e7,3e7,1e8",
        help="comma-separated dataset sizes",
    )
    p.add_argument("--fids", default="1.65", help="comma-separated fids")
    p.add_argument("--points", type=int, default=40, help="eval points per run")
    p.add_argument("--sigma", type=float, default=0.0, help="log-noise standard deviation")
    p.add_argument("--additive", action="store_true", help="add noise instead of scaling")
    p.add_argument("--acc-map", default=None, help="plant adv_acc through this map")
    p.add_argument("--out", default="synth_runs.jsonl", help="output run file")
    p.set_defaults(handler=_cmd_synth)

    return parser


def run_command(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "handler", None) is None:
            parser.print_help()
            raise UsageError("missing subcommand")
        return args.handler(args)
    except SystemExit as exc:
        # argparse exits directly only for --help/--version.
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
