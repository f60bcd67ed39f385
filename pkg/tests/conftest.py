"""Shared builders for study-pipeline tests."""

import numpy as np

from dqa.signal_io import Record
from dqa.study_builder import (
    QuestionnaireSchema,
    StudyConfig,
    StudyRecord,
    build_study,
)


def record_pair(record_id, fs=360.0, n=720, leads=("I", "II", "V5"), seed=0):
    """An original/reconstruction pair with distinct but related samples."""
    rng = np.random.default_rng(seed)
    base = rng.normal(0.0, 0.4, size=(len(leads), n))
    original = Record(id=record_id, leads=tuple(leads), samples=base, fs=fs)
    recon = Record(id=record_id, leads=tuple(leads), samples=0.9 * base,
                   fs=fs)
    return original, recon


def study_sources(n_records, fs=360.0, n=720, leads=("I", "II", "V5")):
    originals, recons = {}, {}
    for i in range(n_records):
        record_id = f"rec{i:03d}"
        originals[record_id], recons[record_id] = record_pair(
            record_id, fs=fs, n=n, leads=leads, seed=i)
    return originals, recons


def make_study(n_records=4, n_duplicates=1, n_subsets=4, seed=0,
               leads=("I", "II", "V5"), window=(0.0, 1.0),
               raters=("C1", "C2", "C3"), fs=360.0):
    n = int(round((window[0] + window[1]) * fs)) + 1
    originals, recons = study_sources(n_records, fs=fs, n=n, leads=leads)
    config = StudyConfig(
        records=tuple(StudyRecord(record_id=rid, leads=tuple(leads),
                                  window=window)
                      for rid in sorted(originals)),
        n_duplicates=n_duplicates, n_subsets=n_subsets, seed=seed,
        raters=tuple(raters))
    manifest, key = build_study(config, originals, recons)
    return config, manifest, key


def complete_answers(schema: QuestionnaireSchema, leads, pick=0, quality=4,
                     diagnosis=None):
    """A fully filled questionnaire response for one presentation."""
    lead_answers = {}
    for lead in leads:
        lead_answers[lead] = {
            "p_morphology": schema.p_morphologies[pick
                                                  % len(schema.p_morphologies)],
            "qrs_morphology": schema.qrs_morphologies[
                pick % len(schema.qrs_morphologies)],
            "t_morphology": schema.t_morphologies[
                pick % len(schema.t_morphologies)],
            "st_morphology": schema.st_morphologies[
                pick % len(schema.st_morphologies)],
            "st_depressed": False,
            "st_elevated": False,
            "quality": quality,
        }
    answers = {"leads": lead_answers}
    if diagnosis is not None:
        answers["main_diagnosis"] = diagnosis
    return answers
