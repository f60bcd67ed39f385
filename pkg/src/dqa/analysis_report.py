"""Joining rated responses with the blinding key and computing the
study's agreement analyses.

Three groupings are computed feature by feature: between-method (each
rater's answers on original versus reconstructed strips of the same
record and lead), inter-rater (rater pairs on identical presentations),
and within-observer (first versus second showing of duplicated
presentations).  Every reported kappa cell keeps its contingency table
so results are traceable.  Quality-score differences and main-diagnosis
text are exported alongside.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .agreement_stats import ContingencyTable, KappaResult, contingency, kappa
from .study_builder import (
    ORIGINAL,
    RECONSTRUCTED,
    BlindingKey,
    QuestionnaireSchema,
    seal_entries,
)

__all__ = [
    "AgreementCell",
    "AgreementReport",
    "QualityDiff",
    "verify_key",
    "live_from_log",
    "between_method",
    "inter_rater",
    "within_observer",
    "quality_diff",
    "diagnosis_table",
    "render_report",
]

BETWEEN_METHOD = "between-method"
INTER_RATER = "inter-rater"
WITHIN_OBSERVER = "within-observer"

BOOL_CATEGORIES = ("no", "yes")


@dataclass(frozen=True)
class AgreementCell:
    """One kappa result with its provenance and source table."""

    group: str
    feature: str
    label: str  # rater id, or "C1-C2" style pair label
    table: ContingencyTable
    result: KappaResult

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "feature": self.feature,
            "label": self.label,
            "table": self.table.to_dict(),
            "result": self.result.to_dict(),
        }


@dataclass
class AgreementReport:
    cells: list[AgreementCell] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def cell(self, feature: str, label: str) -> AgreementCell:
        for c in self.cells:
            if c.feature == feature and c.label == label:
                return c
        raise KeyError(f"no cell for {feature!r} / {label!r}")

    def features(self) -> list[str]:
        seen = dict.fromkeys(c.feature for c in self.cells)
        return list(seen)

    def labels(self) -> list[str]:
        return sorted(dict.fromkeys(c.label for c in self.cells))

    def merged(self, *others: "AgreementReport") -> "AgreementReport":
        out = AgreementReport(cells=list(self.cells),
                              warnings=list(self.warnings))
        for other in others:
            out.cells.extend(other.cells)
            out.warnings.extend(other.warnings)
        return out


@dataclass
class QualityDiff:
    """Original-minus-reconstructed quality scores where both arms were
    scored by the same rater."""

    cells: dict[tuple[str, str, str], int]  # (record, lead, rater) -> diff
    record_means: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "cells": [
                {"record_id": r, "lead": lead, "rater_id": rater,
                 "diff": diff}
                for (r, lead, rater), diff in sorted(self.cells.items())
            ],
            "record_means": dict(sorted(self.record_means.items())),
        }


def verify_key(key: BlindingKey) -> None:
    """Refuse to analyze with a key whose seal does not match.

    The seal is a content hash written at build time; any edit to the
    entries after the study was built breaks it.
    """
    if key.seal != seal_entries(key.study_id, key.entries):
        raise ValueError(
            "blinding key seal mismatch: the key content changed after "
            "the study was built"
        )


def live_from_log(path) -> list[dict]:
    """Replay an append-only response log into live rows.

    Later submissions for the same (rater, strip) replace earlier ones,
    mirroring the service's resubmission semantics.
    """
    live: dict[tuple[str, str], dict] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            live[(d["rater_id"], d["strip_id"])] = d
    return sorted(live.values(), key=lambda d: d["sequence"])


def _feature_items(schema: QuestionnaireSchema,
                   include_flags: bool) -> list[tuple[str, str, tuple]]:
    items = [
        ("P morphology", "p_morphology", schema.p_morphologies),
        ("QRS morphology", "qrs_morphology", schema.qrs_morphologies),
        ("T morphology", "t_morphology", schema.t_morphologies),
        ("ST morphology", "st_morphology", schema.st_morphologies),
        ("ST depressed", "st_depressed", BOOL_CATEGORIES),
        ("ST elevated", "st_elevated", BOOL_CATEGORIES),
    ]
    if include_flags:
        items += [
            ("P pathologic", "p_pathologic", BOOL_CATEGORIES),
            ("QRS pathologic", "qrs_pathologic", BOOL_CATEGORIES),
            ("T pathologic", "t_pathologic", BOOL_CATEGORIES),
            ("ST pathologic", "st_pathologic", BOOL_CATEGORIES),
        ]
    return items


def _answer(row: dict, lead: str, item: str):
    value = row["answers"]["leads"].get(lead, {}).get(item)
    if isinstance(value, bool):
        return BOOL_CATEGORIES[int(value)]
    return value


def _cells_from_pairs(group: str, label: str, paired_rows: list,
                      schema: QuestionnaireSchema) -> list[AgreementCell]:
    """Turn a list of (row_A, row_B, lead) into one cell per feature.

    Mandatory items always yield a cell; optional pathology flags yield
    one only where both sides answered at least once.
    """
    cells = []
    for feature, item, categories in _feature_items(schema, True):
        pairs = []
        for row_a, row_b, lead in paired_rows:
            a = _answer(row_a, lead, item)
            b = _answer(row_b, lead, item)
            if a is None or b is None:
                continue
            pairs.append((a, b))
        if not pairs:
            continue
        table = contingency(pairs, categories)
        cells.append(AgreementCell(group=group, feature=feature,
                                   label=label, table=table,
                                   result=kappa(table)))
    return cells


def _group_rows(rows: list[dict], key: BlindingKey):
    """Index live rows by rater and by the key's coordinates."""
    unknown = [r["strip_id"] for r in rows
               if r["strip_id"] not in key.entries]
    if unknown:
        raise ValueError(f"responses reference strips not in the key: "
                         f"{sorted(set(unknown))}")
    by_rater: dict[str, dict[str, dict]] = {}
    for row in rows:
        by_rater.setdefault(row["rater_id"], {})[row["strip_id"]] = row
    return by_rater


def between_method(rows: list[dict], key: BlindingKey,
                   schema: Optional[QuestionnaireSchema] = None,
                   ) -> AgreementReport:
    """Per rater: answers on the original strip paired with answers on
    the reconstructed strip of the same record and lead.  Duplicated
    records contribute their first showing only."""
    schema = schema or QuestionnaireSchema()
    verify_key(key)
    by_rater = _group_rows(rows, key)
    report = AgreementReport()
    first_showing = {sid: e for sid, e in key.entries.items()
                     if e.occurrence == 0}
    for rater in sorted(by_rater):
        answered = by_rater[rater]
        by_record: dict[str, dict[str, dict]] = {}
        for sid, e in first_showing.items():
            if sid in answered:
                by_record.setdefault(e.record_id, {})[e.arm] = answered[sid]
        paired = []
        for record_id in sorted(by_record):
            arms = by_record[record_id]
            if ORIGINAL in arms and RECONSTRUCTED in arms:
                entry = next(e for sid, e in first_showing.items()
                             if e.record_id == record_id
                             and e.arm == ORIGINAL)
                for lead in entry.leads:
                    paired.append((arms[ORIGINAL], arms[RECONSTRUCTED],
                                   lead))
            else:
                present = next(iter(arms))
                report.warnings.append(
                    f"{rater}: record {record_id} answered only for the "
                    f"{present} arm; skipped")
        report.cells.extend(
            _cells_from_pairs(BETWEEN_METHOD, rater, paired, schema))
    return report


def inter_rater(rows: list[dict],
                schema: Optional[QuestionnaireSchema] = None,
                key: Optional[BlindingKey] = None,
                arm: Optional[str] = None) -> AgreementReport:
    """All rater pairs, pairing answers on identical presentations.

    Both arms are pooled by default; pass ``arm`` (with the key) to
    restrict to one arm.
    """
    schema = schema or QuestionnaireSchema()
    if arm is not None:
        if key is None:
            raise ValueError("filtering by arm requires the blinding key")
        if arm not in (ORIGINAL, RECONSTRUCTED):
            raise ValueError(f"unknown arm {arm!r}")
        verify_key(key)
        _group_rows(rows, key)  # reject strip ids the key cannot unblind
        rows = [r for r in rows if key.entries[r["strip_id"]].arm == arm]
    by_rater: dict[str, dict[str, dict]] = {}
    for row in rows:
        by_rater.setdefault(row["rater_id"], {})[row["strip_id"]] = row
    raters = sorted(by_rater)
    if len(raters) < 2:
        raise ValueError("inter-rater agreement needs at least 2 raters")
    report = AgreementReport()
    for i, rater_a in enumerate(raters):
        for rater_b in raters[i + 1:]:
            label = f"{rater_a}-{rater_b}"
            shared = sorted(set(by_rater[rater_a]) & set(by_rater[rater_b]))
            if not shared:
                report.warnings.append(
                    f"{label}: no presentations answered by both")
                continue
            paired = []
            for sid in shared:
                row_a = by_rater[rater_a][sid]
                row_b = by_rater[rater_b][sid]
                for lead in sorted(row_a["answers"]["leads"]):
                    if lead in row_b["answers"]["leads"]:
                        paired.append((row_a, row_b, lead))
            report.cells.extend(
                _cells_from_pairs(INTER_RATER, label, paired, schema))
    return report


def within_observer(rows: list[dict], key: BlindingKey,
                    schema: Optional[QuestionnaireSchema] = None,
                    ) -> AgreementReport:
    """Per rater: first showing of each duplicated presentation paired
    with its second showing, both arms pooled."""
    schema = schema or QuestionnaireSchema()
    verify_key(key)
    by_rater = _group_rows(rows, key)
    duplicates: dict[tuple[str, str], dict[int, str]] = {}
    for sid, e in key.entries.items():
        if e.duplicate:
            duplicates.setdefault((e.record_id, e.arm), {})[e.occurrence] = sid
    if not duplicates:
        raise ValueError("study has no duplicated presentations")
    report = AgreementReport()
    for rater in sorted(by_rater):
        answered = by_rater[rater]
        paired = []
        for (record_id, arm) in sorted(duplicates):
            occ = duplicates[(record_id, arm)]
            first, second = occ.get(0), occ.get(1)
            if first in answered and second in answered:
                for lead in key.entries[first].leads:
                    paired.append((answered[first], answered[second], lead))
            elif first in answered or second in answered:
                report.warnings.append(
                    f"{rater}: duplicate {record_id}/{arm} answered only "
                    f"once; skipped")
        report.cells.extend(
            _cells_from_pairs(WITHIN_OBSERVER, rater, paired, schema))
    return report


def quality_diff(rows: list[dict], key: BlindingKey) -> QualityDiff:
    """Q_original minus Q_reconstructed per (record, lead, rater), with
    per-record means; duplicates use their first showing."""
    verify_key(key)
    by_rater = _group_rows(rows, key)
    cells: dict[tuple[str, str, str], int] = {}
    for rater in sorted(by_rater):
        answered = by_rater[rater]
        by_record: dict[str, dict[str, dict]] = {}
        for sid, e in key.entries.items():
            if e.occurrence == 0 and sid in answered:
                by_record.setdefault(e.record_id, {})[e.arm] = answered[sid]
        for record_id, arms in by_record.items():
            if ORIGINAL not in arms or RECONSTRUCTED not in arms:
                continue
            leads_o = arms[ORIGINAL]["answers"]["leads"]
            leads_r = arms[RECONSTRUCTED]["answers"]["leads"]
            for lead in leads_o:
                if lead not in leads_r:
                    continue
                q_o = leads_o[lead].get("quality")
                q_r = leads_r[lead].get("quality")
                if q_o is None or q_r is None:
                    continue
                cells[(record_id, lead, rater)] = int(q_o) - int(q_r)
    sums: dict[str, list[int]] = {}
    for (record_id, _, _), diff in cells.items():
        sums.setdefault(record_id, []).append(diff)
    means = {r: sum(v) / len(v) for r, v in sums.items()}
    return QualityDiff(cells=cells, record_means=means)


def diagnosis_table(rows: list[dict], key: BlindingKey) -> list[dict]:
    """Main-diagnosis free text for both arms, with an exact-match
    column; interpretation beyond exact equality is a manual task."""
    verify_key(key)
    by_rater = _group_rows(rows, key)
    out = []
    for rater in sorted(by_rater):
        answered = by_rater[rater]
        by_record: dict[str, dict[str, dict]] = {}
        for sid, e in key.entries.items():
            if e.occurrence == 0 and sid in answered:
                by_record.setdefault(e.record_id, {})[e.arm] = answered[sid]
        for record_id in sorted(by_record):
            arms = by_record[record_id]
            if ORIGINAL not in arms or RECONSTRUCTED not in arms:
                continue
            d_o = arms[ORIGINAL]["answers"].get("main_diagnosis")
            d_r = arms[RECONSTRUCTED]["answers"].get("main_diagnosis")
            if d_o is None and d_r is None:
                continue
            exact = (d_o or "").strip() == (d_r or "").strip()
            out.append({"rater_id": rater, "record_id": record_id,
                        "diagnosis_original": d_o,
                        "diagnosis_reconstructed": d_r,
                        "exact_match": exact})
    return out


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.2f}"


def _kappa_cell(result: KappaResult) -> str:
    if result.na:
        return "n/a (n/a)"
    return f"{_fmt(result.kappa)} ({_fmt(result.kappa_max)})"


def _ci_cell(result: KappaResult) -> str:
    lo, hi = result.ci95
    if lo is None or hi is None:
        return "n/a"
    return f"[{lo:.2f}, {hi:.2f}]"


def render_report(report: AgreementReport, out_dir,
                  quality: Optional[QualityDiff] = None,
                  diagnoses: Optional[list[dict]] = None) -> list[Path]:
    """Write deterministic CSV, JSON, and plot-data files.

    Per group, the kappa CSV has one row per feature and two columns per
    rater or pair: "kappa (kappa_max)" and the 95% interval.  The JSON
    carries full precision plus every contingency table.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    groups = sorted(dict.fromkeys(c.group for c in report.cells))
    for group in groups:
        cells = [c for c in report.cells if c.group == group]
        features = list(dict.fromkeys(c.feature for c in cells))
        labels = sorted(dict.fromkeys(c.label for c in cells))
        lines = [",".join(
            ["feature"] + [x for label in labels
                           for x in (f"{label} kappa (kappa_max)",
                                     f"{label} ci95")])]
        for feature in features:
            row = [feature]
            for label in labels:
                match = [c for c in cells
                         if c.feature == feature and c.label == label]
                if match:
                    row.append('"' + _kappa_cell(match[0].result) + '"')
                    row.append('"' + _ci_cell(match[0].result) + '"')
                else:
                    row += ["", ""]
            lines.append(",".join(row))
        path = out_dir / f"{group}_kappa.csv"
        path.write_text("\n".join(lines) + "\n")
        written.append(path)

    plot_lines = ["group,feature,label,n,p_o,kappa,kappa_max,ci_low,ci_high,na"]
    for c in sorted(report.cells,
                    key=lambda c: (c.group, c.feature, c.label)):
        r = c.result
        ci = r.ci95 or (None, None)
        plot_lines.append(",".join([
            c.group, c.feature.replace(",", " "), c.label, str(r.n),
            f"{r.p_o:.6f}",
            "" if r.kappa is None else f"{r.kappa:.6f}",
            "" if r.kappa_max is None else f"{r.kappa_max:.6f}",
            "" if ci[0] is None else f"{ci[0]:.6f}",
            "" if ci[1] is None else f"{ci[1]:.6f}",
            str(r.na).lower(),
        ]))
    plot_path = out_dir / "kappa_plot_data.csv"
    plot_path.write_text("\n".join(plot_lines) + "\n")
    written.append(plot_path)

    payload = {
        "cells": [c.to_dict() for c in sorted(
            report.cells, key=lambda c: (c.group, c.feature, c.label))],
        "warnings": sorted(report.warnings),
    }
    if quality is not None:
        payload["quality"] = quality.to_dict()
        q_lines = ["record_id,lead,rater_id,diff"]
        for (record_id, lead, rater), diff in sorted(quality.cells.items()):
            q_lines.append(f"{record_id},{lead},{rater},{diff}")
        q_path = out_dir / "quality_diff.csv"
        q_path.write_text("\n".join(q_lines) + "\n")
        written.append(q_path)
        m_lines = ["record_id,mean_diff"]
        for record_id, mean in sorted(quality.record_means.items()):
            m_lines.append(f"{record_id},{mean:.6f}")
        m_path = out_dir / "quality_means.csv"
        m_path.write_text("\n".join(m_lines) + "\n")
        written.append(m_path)
    if diagnoses is not None:
        payload["diagnoses"] = diagnoses
        d_lines = ["rater_id,record_id,exact_match,original,reconstructed"]
        for d in diagnoses:
            d_lines.append(",".join([
                d["rater_id"], d["record_id"],
                str(d["exact_match"]).lower(),
                json.dumps(d["diagnosis_original"] or ""),
                json.dumps(d["diagnosis_reconstructed"] or "")]))
        d_path = out_dir / "diagnoses.csv"
        d_path.write_text("\n".join(d_lines) + "\n")
        written.append(d_path)

    json_path = out_dir / "agreement.json"
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True)
                         + "\n")
    written.append(json_path)
    return written
