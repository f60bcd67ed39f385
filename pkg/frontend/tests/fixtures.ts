/**
 * Shared test fixtures: grid geometry matching the service's documented
 * millimetre conventions, and an in-memory mock of the rating service
 * that records every request for blinding scans.
 */

import type {
  Answers,
  QuestionnaireSchemaJson,
  RenderSpecJson,
  StripPayload,
} from "../src/types.js";

export const SCHEMA: QuestionnaireSchemaJson = {
  p_morphologies: ["insignificant", "positive", "negative", "biphasic"],
  qrs_morphologies: [
    "R",
    "Rs",
    "rS",
    "RS",
    "qR",
    "qRs",
    "QS",
    "Q",
    "rSr'",
    "other",
  ],
  t_morphologies: ["positive", "negative", "biphasic", "flattened"],
  st_morphologies: ["normal", "ascending", "descending", "other"],
  quality_range: [1, 5],
  version: "1",
};

function gridLines(lo: number, hi: number, step: number): number[] {
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-9; v += step) {
    out.push(Number(v.toFixed(6)));
  }
  return out;
}

/** Geometry the service would send: 25 mm/s, 10 mm/mV, ±5 mm extent. */
export function makeRenderSpec(
  durationS: number,
  fs: number,
  yMinMm = -5,
  yMaxMm = 5,
): RenderSpecJson {
  const widthMm = 25 * durationS;
  return {
    mm_per_mv: 10,
    mm_per_s: 25,
    fs,
    mm_per_sample: 25 / fs,
    width_mm: widthMm,
    y_min_mm: yMinMm,
    y_max_mm: yMaxMm,
    x_major_mm: gridLines(0, widthMm, 5),
    x_minor_mm: gridLines(0, widthMm, 1),
    y_major_mm: gridLines(yMinMm, yMaxMm, 5),
    y_minor_mm: gridLines(yMinMm, yMaxMm, 1),
  };
}

export function makeStripPayload(
  stripId: string,
  subset: number,
  position: number,
  leads: string[] = ["I", "II"],
  durationS = 0.4,
  fs = 100,
): StripPayload {
  const n = Math.round(durationS * fs);
  const samples: Record<string, number[]> = {};
  const render: Record<string, RenderSpecJson> = {};
  for (const [k, lead] of leads.entries()) {
    samples[lead] = Array.from({ length: n }, (_, i) =>
      Math.sin((2 * Math.PI * (i + 10 * k)) / n),
    );
    render[lead] = makeRenderSpec(durationS, fs);
  }
  return {
    strip_id: stripId,
    subset,
    position,
    leads,
    fs,
    duration: durationS,
    samples,
    render,
  };
}

interface RecordedRequest {
  method: string;
  url: string;
  body: string;
}

type PostFailure =
  | { kind: "network" }
  | { kind: "validation"; problems: string[] };

/**
 * Minimal but faithful service double.  Internally it knows which
 * hidden record and arm each strip came from (so tests can prove that
 * knowledge never leaks); the wire responses only ever carry the
 * opaque ids.
 */
export class MockService {
  readonly requests: RecordedRequest[] = [];
  readonly answered = new Map<string, Answers>();
  readonly hiddenTruth = new Map<
    string,
    { record: string; arm: string }
  >();
  private readonly strips: StripPayload[] = [];
  private postFailure: PostFailure | null = null;

  constructor(subsetSizes: number[] = [3, 2]) {
    let position = 0;
    let n = 0;
    for (const [subset, size] of subsetSizes.entries()) {
      for (let i = 0; i < size; i += 1) {
        const id = `f${n.toString(16).padStart(31, "0")}`;
        this.strips.push(makeStripPayload(id, subset, i));
        this.hiddenTruth.set(id, {
          record: `rec${n}`,
          arm: n % 2 === 0 ? "original" : "reconstructed",
        });
        position += 1;
        n += 1;
      }
    }
  }

  get total(): number {
    return this.strips.length;
  }

  failNextPost(failure: PostFailure): void {
    this.postFailure = failure;
  }

  fetch = async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const body = typeof init?.body === "string" ? init.body : "";
    this.requests.push({ method, url, body });
    const path = new URL(url, "http://service.test").pathname;

    if (path === "/study/schema") {
      return json({
        study_id: "0abc",
        n_subsets: 2,
        n_presentations: this.total,
        schema: SCHEMA,
      });
    }
    if (path === "/session/next-strip") {
      const pending = this.strips.filter(
        (s) => !this.answered.has(s.strip_id),
      );
      if (pending.length === 0) {
        return json({ done: true, completed: this.answered.size });
      }
      const strip = pending[0];
      return json({
        done: false,
        strip_id: strip.strip_id,
        subset: strip.subset,
        position: strip.position,
        remaining_in_subset: pending.filter(
          (s) => s.subset === strip.subset,
        ).length,
        completed: this.answered.size,
        total: this.total,
      });
    }
    if (path === "/session/progress") {
      const subsets = [0, 1].map((subset) => {
        const inSubset = this.strips.filter((s) => s.subset === subset);
        return {
          subset,
          completed: inSubset.filter((s) =>
            this.answered.has(s.strip_id),
          ).length,
          total: inSubset.length,
        };
      });
      const current = subsets.find((s) => s.completed < s.total);
      return json({
        rater_id: "C1",
        completed: this.answered.size,
        total: this.total,
        current_subset: current ? current.subset : 1,
        subsets,
      });
    }
    const stripMatch = path.match(/^\/strip\/([0-9a-f]+)$/);
    if (stripMatch && method === "GET") {
      const strip = this.strips.find(
        (s) => s.strip_id === stripMatch[1],
      );
      if (!strip) return json({ detail: "unknown strip" }, 404);
      return json(strip);
    }
    const postMatch = path.match(/^\/strip\/([0-9a-f]+)\/response$/);
    if (postMatch && method === "POST") {
      if (this.postFailure?.kind === "network") {
        this.postFailure = null;
        throw new TypeError("fetch failed");
      }
      if (this.postFailure?.kind === "validation") {
        const problems = this.postFailure.problems;
        this.postFailure = null;
        return json({ detail: { problems } }, 422);
      }
      const strip = this.strips.find(
        (s) => s.strip_id === postMatch[1],
      );
      if (!strip) return json({ detail: "unknown strip" }, 404);
      const payload = JSON.parse(body) as { answers: Answers };
      const replaced = this.answered.has(strip.strip_id);
      this.answered.set(strip.strip_id, payload.answers);
      return json({
        sequence: this.answered.size,
        replaced,
        timestamp: "2026-01-01T00:00:00+00:00",
      });
    }
    return json({ detail: "not found" }, 404);
  };
}

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "content-type": "application/json" },
  });
}

/** Strings that must never appear in any DOM or request during a
 * blinded session: hidden record ids, arm names, and source naming. */
export function forbiddenStrings(service: MockService): string[] {
  const out = ["original", "reconstructed", "record_id", "arm"];
  for (const truth of service.hiddenTruth.values()) {
    out.push(truth.record);
  }
  return out;
}
