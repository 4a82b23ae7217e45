"""harmbench command line: one executable, one subcommand per task.

Exit codes are stable: 0 success, 1 usage error, 2 data error. With
--json each subcommand writes exactly one JSON document to stdout
(non-finite floats are rendered as strings so the document stays valid
for strict parsers).

Config precedence is flag > environment variable > built-in default;
the recognized variables are HARMBENCH_BG_THRESHOLD, HARMBENCH_BINS
and HARMBENCH_WORKERS.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .anatomy import anatomy_preservation, as_label_volume
from .distribution import (
    DEFAULT_BINS,
    DEFAULT_EXACT_CAP,
    ForegroundPolicy,
    coarsen_jointly,
    extract_foreground,
)
from .errors import HarmbenchError, NoSuccessfulRows
from .harness import (
    EvalConfig,
    emit_report,
    evaluate_all,
    load_manifest,
    read_rows_csv,
    series_from_rows,
    summarize,
    summarize_groups,
    write_rows_csv,
)
from .nifti import load_volume
from .reference import SsimParams, paired_metrics
from .stats import correlation_matrix
from .synth import write_synthetic_dataset
from .wasserstein import DEFAULT_VERDICT_TOL, classify, nwd


class _Parser(argparse.ArgumentParser):
    """argparse's default usage-error exit code is 2; this tool keeps 2
    for data errors, so usage errors exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _env(name: str, cast, fallback):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return fallback
    try:
        return cast(raw)
    except ValueError:
        return fallback


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _print_json(payload: dict) -> None:
    print(json.dumps(_json_safe(payload)))


def _print_pairs(pairs: list[tuple[str, object]]) -> None:
    for key, value in pairs:
        print(f"{key}\t{value if isinstance(value, str) else repr(value)}")


def _add_fg_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--bg-threshold",
        type=float,
        default=_env("HARMBENCH_BG_THRESHOLD", float, 0.0),
        help="foreground keeps intensities strictly above this (default 0)",
    )
    p.add_argument("--fg-mask", type=Path, default=None,
                   help="label volume; nonzero voxels are foreground")


def _add_wd_mode_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group()
    group.add_argument("--bins", type=int, default=None,
                       help="force the binned distance with this many bins")
    group.add_argument("--exact", action="store_true",
                       help="force the exact distance regardless of sample count")
    p.add_argument("--exact-cap", type=int, default=DEFAULT_EXACT_CAP,
                   help="auto mode switches to binning above this sample count")


def _add_ssim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=int, default=7, help="SSIM cubic window edge")
    p.add_argument("--k1", type=float, default=0.01)
    p.add_argument("--k2", type=float, default=0.03)


def _policy(ns) -> ForegroundPolicy:
    if getattr(ns, "fg_mask", None):
        mask = as_label_volume(load_volume(ns.fg_mask))
        return ForegroundPolicy(mode="explicit-mask", mask=mask)
    return ForegroundPolicy(threshold=ns.bg_threshold)


def _wd_mode(ns) -> tuple[str, int]:
    if ns.bins is not None:
        return "binned", ns.bins
    if ns.exact:
        return "exact", _env("HARMBENCH_BINS", int, DEFAULT_BINS)
    return "auto", _env("HARMBENCH_BINS", int, DEFAULT_BINS)


def _parse_labels(spec: str | None) -> dict[int, str] | None:
    if not spec:
        return None
    legend = {}
    for item in spec.split(","):
        key, _, name = item.partition("=")
        legend[int(key.strip())] = name.strip() or f"label-{int(key.strip())}"
    return legend


# ------------------------------------------------------------- subcommands


def _cmd_wd(ns) -> int:
    policy = _policy(ns)
    dists = tuple(
        extract_foreground(load_volume(p), policy)
        for p in (ns.input, ns.target, ns.pred)
    )
    mode, bins = _wd_mode(ns)
    d_i, d_t, d_p = coarsen_jointly(dists, bins=bins, exact_cap=ns.exact_cap, mode=mode)
    pair = nwd(d_i, d_t, d_p)
    verdict = classify(pair, ns.tol)
    fields = [
        ("wd_ip", pair.wd_ip),
        ("wd_tp", pair.wd_tp),
        ("wd_it", pair.wd_it),
        ("nwd_ip", pair.nwd_ip),
        ("nwd_tp", pair.nwd_tp),
        ("verdict", verdict.kind.value),
    ]
    if ns.json:
        _print_json(dict(fields))
    else:
        _print_pairs(fields)
    return 0


def _cmd_ap(ns) -> int:
    legend = _parse_labels(ns.labels)
    seg_i = as_label_volume(load_volume(ns.seg_input), legend)
    seg_p = as_label_volume(load_volume(ns.seg_pred), legend)
    report = anatomy_preservation(seg_i, seg_p, weighted=ns.weighted)
    if ns.json:
        _print_json({"per_structure": report.per_structure, "mean_ap": report.mean_ap})
    else:
        _print_pairs([(name, ap) for name, ap in report.per_structure.items()])
        _print_pairs([("mean_ap", report.mean_ap)])
    return 0


def _cmd_refmetrics(ns) -> int:
    params = SsimParams(window=ns.window, k1=ns.k1, k2=ns.k2)
    row = paired_metrics(load_volume(ns.pred), load_volume(ns.gt), _policy(ns), params)
    fields = [("ssim", row.ssim), ("psnr", row.psnr_db), ("mae", row.mae), ("mse", row.mse)]
    if ns.json:
        _print_json(dict(fields))
    else:
        _print_pairs(fields)
    return 0


def _cmd_corr(ns) -> int:
    raw = read_rows_csv(ns.in_path)
    row_names = [s.strip() for s in ns.rows.split(",") if s.strip()]
    col_names = [s.strip() for s in ns.cols.split(",") if s.strip()]
    rows = [series_from_rows(raw, name) for name in row_names]
    cols = [series_from_rows(raw, name) for name in col_names]
    matrix = correlation_matrix(rows, cols)
    if ns.json:
        _print_json({
            "rows": list(matrix.row_names),
            "cols": list(matrix.col_names),
            "rho": [[v for v in r] for r in matrix.rho.tolist()],
        })
    else:
        print("\t" + "\t".join(matrix.col_names))
        for name, r in zip(matrix.row_names, matrix.rho):
            print(name + "\t" + "\t".join(f"{v:.3f}" for v in r))
    return 0


def _evaluate_config(ns) -> EvalConfig:
    mode, bins = _wd_mode(ns)
    return EvalConfig(
        bg_threshold=ns.bg_threshold,
        bins=bins,
        exact_cap=ns.exact_cap,
        wd_mode=mode,
        tol=ns.tol,
        ssim=SsimParams(window=ns.window, k1=ns.k1, k2=ns.k2),
        labels=_parse_labels(ns.labels),
        weighted_ap=ns.weighted,
        workers=ns.workers,
    )


def _cmd_evaluate(ns) -> int:
    records = load_manifest(ns.manifest)
    config = _evaluate_config(ns)
    meta = {"version": __version__, **config.to_meta()}
    try:
        rows = evaluate_all(records, config)
    except NoSuccessfulRows as exc:
        if ns.out:
            write_rows_csv(exc.rows, ns.out, meta)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if ns.out:
        write_rows_csv(rows, ns.out, meta)
    tables = summarize(rows, ns.group_by)
    fmt = "json" if ns.json else ns.report
    sys.stdout.buffer.write(emit_report(tables, fmt, meta))
    sys.stdout.buffer.flush()
    return 0


def _cmd_synth(ns) -> int:
    manifest = write_synthetic_dataset(
        ns.out, sites=ns.sites, n=ns.n, seed=ns.seed, size=ns.size
    )
    if ns.json:
        _print_json({"manifest": str(manifest)})
    else:
        print(manifest)
    return 0


def _cmd_report(ns) -> int:
    raw = read_rows_csv(ns.in_path)
    ok = [r for r in raw if r.get("status") == "ok"]
    if not ok:
        raise NoSuccessfulRows("results file has no successful rows")
    meta = {"version": __version__}
    groups = []
    for r in ok:
        key = r["site_out"] if ns.group_by == "site_out" else f"{r['site_in']}→{r['site_out']}"
        metrics = {}
        for name in ("ssim", "psnr", "mae", "mse", "nwd_ip", "nwd_tp", "ap"):
            cell = (r.get(name) or "").strip()
            if cell:
                metrics[name] = float(cell)
        groups.append((key, metrics))
    fmt = "json" if ns.json else ns.format
    sys.stdout.buffer.write(emit_report(summarize_groups(groups), fmt, meta))
    sys.stdout.buffer.flush()
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="harmbench", description=__doc__)
    parser.add_argument("--version", action="version", version=f"harmbench {__version__}")
    parser.set_defaults(func=None)
    sub = parser.add_subparsers(dest="cmd", parser_class=_Parser)

    def common(p):
        p.add_argument("--json", action="store_true", help="emit one JSON document")

    p = sub.add_parser("wd", help="normalized Wasserstein metrics for one triplet")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--target", type=Path, required=True)
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--tol", type=float, default=DEFAULT_VERDICT_TOL)
    _add_fg_flags(p)
    _add_wd_mode_flags(p)
    common(p)
    p.set_defaults(func=_cmd_wd)

    p = sub.add_parser("ap", help="anatomy preservation from two segmentations")
    p.add_argument("--seg-input", type=Path, required=True)
    p.add_argument("--seg-pred", type=Path, required=True)
    p.add_argument("--labels", default=None, help="e.g. 1=GM,2=WM")
    p.add_argument("--weighted", action="store_true",
                   help="weight the mean by input volume (not the reporting default)")
    common(p)
    p.set_defaults(func=_cmd_ap)

    p = sub.add_parser("refmetrics", help="MAE/MSE/PSNR/SSIM against a ground truth")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    _add_fg_flags(p)
    _add_ssim_flags(p)
    common(p)
    p.set_defaults(func=_cmd_refmetrics)

    p = sub.add_parser("corr", help="rank correlation between result columns")
    p.add_argument("--in", dest="in_path", type=Path, required=True)
    p.add_argument("--rows", default="nwd_ip,nwd_tp,ap")
    p.add_argument("--cols", default="ssim,psnr,mae,mse")
    common(p)
    p.set_defaults(func=_cmd_corr)

    p = sub.add_parser("evaluate", help="run every metric over a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="per-row results CSV")
    p.add_argument("--report", choices=["md", "markdown", "csv", "json"], default="md")
    p.add_argument("--group-by", choices=["direction", "site_out"], default="direction")
    p.add_argument("--workers", type=int, default=_env("HARMBENCH_WORKERS", int, 1))
    p.add_argument("--tol", type=float, default=DEFAULT_VERDICT_TOL)
    p.add_argument("--labels", default=None, help="segmentation legend, e.g. 1=GM,2=WM")
    p.add_argument("--weighted", action="store_true")
    _add_fg_flags(p)
    _add_wd_mode_flags(p)
    _add_ssim_flags(p)
    common(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("synth", help="write a deterministic phantom dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--sites", type=int, default=2)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--size", type=int, default=64, help="cubic volume edge, voxels")
    common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("report", help="summarize an existing results CSV")
    p.add_argument("--in", dest="in_path", type=Path, required=True)
    p.add_argument("--format", choices=["md", "markdown", "csv", "json"], default="md")
    p.add_argument("--group-by", choices=["direction", "site_out"], default="direction")
    common(p)
    p.set_defaults(func=_cmd_report)

    return parser


def run(argv: list[str] | None = None) -> int:
    """Dispatch; returns the process exit code instead of raising."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 1
    if ns.func is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return ns.func(ns)
    except HarmbenchError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
