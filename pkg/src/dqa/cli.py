"""Command-line entry points for the full study pipeline.

Subcommands: ingest (file formats to record JSON), fit (beat model),
metrics (distortion measures), kappa (agreement on one table), study
build (blinded manifest + key), serve (rating service), analyze
(agreement report from logged responses).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis_report, signal_io
from .agreement_stats import ContingencyTable, kappa
from .beat_model import BasisConfig, fit_beat
from .distortion_metrics import WaveletConfig, evaluate
from .signal_io import FORMAT_BINARY, FORMAT_CSV, Record
from .study_builder import (
    QuestionnaireSchema,
    StudyConfig,
    StudyRecord,
    build_study,
    key_from_dict,
    key_to_dict,
    manifest_from_dict,
    manifest_to_dict,
)

FORMAT_JSON = "json"


def _read_json(path) -> dict:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_any(path, format: str) -> Record:
    if format == FORMAT_JSON:
        return signal_io.record_from_json(Path(path).read_text())
    return signal_io.load_record(path, format)


def cmd_ingest(args) -> int:
    record = signal_io.load_record(args.path, args.format)
    Path(args.out).write_text(signal_io.record_to_json(record))
    print(f"wrote {args.out}: record {record.id}, "
          f"{len(record.leads)} leads, {record.n_samples} samples "
          f"at {record.fs:g} Hz")
    return 0


def _basis_config(d: dict) -> BasisConfig:
    kwargs = dict(d)
    if "n_hermite" in kwargs:
        kwargs["n_hermite"] = tuple(kwargs["n_hermite"])
    if kwargs.get("spline_knots") is not None:
        kwargs["spline_knots"] = tuple(kwargs["spline_knots"])
    return BasisConfig(**kwargs)


def cmd_fit(args) -> int:
    record = _load_any(args.record, args.format)
    config = _basis_config(_read_json(args.config)) if args.config \
        else BasisConfig()
    windows = _read_json(args.beats)
    if not isinstance(windows, list):
        raise ValueError("beat windows file must be a JSON list of "
                         '{"lead", "t_start", "duration"} objects')
    fits = []
    for w in windows:
        strip = signal_io.extract_strip(record, w["lead"], w["t_start"],
                                        w["duration"])
        fit = fit_beat(strip, config)
        fits.append({"lead": w["lead"], "t_start": w["t_start"],
                     "duration": w["duration"], "fit": fit.to_dict()})
        print(f"  {w['lead']} @ {w['t_start']:.3f}s: residual rms "
              f"{fit.residual_rms:.5f} mV, converged {fit.converged}")
    _write_json(args.out, {"record_id": record.id, "fits": fits})
    print(f"wrote {args.out}: {len(fits)} beat fits")
    return 0


def _signal_from_file(path, lead) -> np.ndarray:
    """A 1-D signal from either a record JSON or a bare JSON array."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, list):
        return np.asarray(data, dtype=float)
    record = signal_io.record_from_json(json.dumps(data))
    name = lead or record.leads[0]
    return record.lead(name)


def cmd_metrics(args) -> int:
    x = _signal_from_file(args.reference, args.lead)
    y = _signal_from_file(args.approximation, args.lead)
    cfg = WaveletConfig(levels=args.levels, filter=args.filter)
    weights = None
    if args.weights:
        weights = np.asarray(_read_json(args.weights), dtype=float)
    result = evaluate(x, y, cfg, wwprd_weights=weights)
    _write_json(args.out, result.to_dict())
    wwprd_text = "-" if result.wwprd is None else f"{result.wwprd:.4f}"
    print(f"wrote {args.out}: PRD {result.prd:.4f}%  "
          f"WWPRD {wwprd_text}%  WEDD {result.wedd:.4f}%")
    return 0


def cmd_kappa(args) -> int:
    d = _read_json(args.table)
    table = ContingencyTable.from_dict(d)
    result = kappa(table, printed_denominator=args.printed_denominator)
    json.dump(result.to_dict(), sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def cmd_study_build(args) -> int:
    cfg = _read_json(args.config)
    records, originals, recons = [], {}, {}
    for entry in cfg["records"]:
        rid = entry["record_id"]
        fmt = entry.get("format", FORMAT_JSON)
        originals[rid] = _load_any(entry["original"], fmt)
        recons[rid] = _load_any(entry["reconstructed"], fmt)
        records.append(StudyRecord(record_id=rid,
                                   leads=tuple(entry["leads"]),
                                   window=tuple(entry["window"])))
    config = StudyConfig(
        records=tuple(records),
        n_duplicates=cfg.get("n_duplicates", 6),
        n_subsets=cfg.get("n_subsets", 4),
        seed=cfg.get("seed", 0),
        raters=tuple(cfg.get("raters", ("C1", "C2", "C3"))))
    manifest, key = build_study(config, originals, recons)
    _write_json(args.out, manifest_to_dict(manifest))
    _write_json(args.key, key_to_dict(key))
    n = len(manifest.presentations)
    print(f"wrote {args.out}: study {manifest.study_id}, {n} presentations "
          f"in {manifest.n_subsets} subsets for {len(manifest.raters)} "
          f"raters")
    print(f"wrote {args.key}: sealed blinding key ({len(key.entries)} "
          f"entries); keep it away from raters")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .session_service import create_app

    manifest = manifest_from_dict(_read_json(args.manifest))
    app = create_app(manifest, args.store)
    print(f"serving study {manifest.study_id} on port {args.port}; "
          f"responses stored under {args.store}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_analyze(args) -> int:
    key = key_from_dict(_read_json(args.key))
    analysis_report.verify_key(key)
    if args.manifest:
        schema = manifest_from_dict(_read_json(args.manifest)).schema
    else:
        schema = QuestionnaireSchema()
    rows = analysis_report.live_from_log(args.responses)
    if not rows:
        raise ValueError(f"no responses in {args.responses}")

    report = analysis_report.between_method(rows, key, schema)
    raters = {r["rater_id"] for r in rows}
    if len(raters) >= 2:
        report = report.merged(analysis_report.inter_rater(rows, schema))
    else:
        report.warnings.append(
            "inter-rater analysis skipped: fewer than 2 raters")
    if any(e.duplicate for e in key.entries.values()):
        report = report.merged(
            analysis_report.within_observer(rows, key, schema))
    else:
        report.warnings.append(
            "within-observer analysis skipped: no duplicated presentations")
    quality = analysis_report.quality_diff(rows, key)
    diagnoses = analysis_report.diagnosis_table(rows, key)

    written = analysis_report.render_report(report, args.out,
                                            quality=quality,
                                            diagnoses=diagnoses)
    print(f"{len(rows)} live responses from {len(raters)} raters; "
          f"{len(report.cells)} agreement cells")
    for warning in report.warnings:
        print(f"  warning: {warning}")
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dqa",
        description="Diagnostic quality assessment for compressed ECGs: "
                    "signal ingestion, beat-model fitting, distortion "
                    "metrics, blinded rating studies, and agreement "
                    "analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert a source file to record JSON")
    p.add_argument("path")
    p.add_argument("--format", required=True,
                   choices=[FORMAT_CSV, FORMAT_BINARY])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit", help="fit the beat model to signal windows")
    p.add_argument("record", help="record file (JSON by default)")
    p.add_argument("--format", default=FORMAT_JSON,
                   choices=[FORMAT_JSON, FORMAT_CSV, FORMAT_BINARY])
    p.add_argument("--config", help="JSON file of basis-config overrides")
    p.add_argument("--beats", required=True,
                   help='JSON list of {"lead", "t_start", "duration"}')
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("metrics",
                       help="distortion measures between two signals")
    p.add_argument("reference", help="record JSON or bare JSON array")
    p.add_argument("approximation", help="record JSON or bare JSON array")
    p.add_argument("--lead", help="lead to compare (records only; "
                                  "default first)")
    p.add_argument("--weights",
                   help="JSON array of subband weights (enables WWPRD)")
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--filter", default="db4")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("kappa",
                       help="agreement statistics for one table")
    p.add_argument("table", help='JSON {"categories", "counts"}; rows are '
                                 "the first measurement")
    p.add_argument("--printed-denominator", action="store_true",
                   help="divide by 1 - P_o instead of 1 - P_c")
    p.set_defaults(func=cmd_kappa)

    p_study = sub.add_parser("study", help="study construction")
    study_sub = p_study.add_subparsers(dest="study_command", required=True)
    p = study_sub.add_parser("build",
                             help="build a blinded manifest and key")
    p.add_argument("--config", required=True,
                   help="study JSON: records with source paths, "
                        "n_duplicates, n_subsets, seed, raters")
    p.add_argument("--out", required=True, help="manifest output path")
    p.add_argument("--key", required=True, help="blinding key output path")
    p.set_defaults(func=cmd_study_build)

    p = sub.add_parser("serve", help="run the rating service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--store", required=True,
                   help="directory for the response log and snapshots")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("analyze",
                       help="agreement report from logged responses")
    p.add_argument("--responses", required=True,
                   help="append-only response log (JSONL)")
    p.add_argument("--key", required=True, help="sealed blinding key JSON")
    p.add_argument("--manifest",
                   help="manifest JSON (for the questionnaire schema; "
                        "defaults to the standard schema)")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
