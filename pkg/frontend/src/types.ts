/**
 * Payload shapes of the rating service's HTTP JSON API.
 *
 * These mirror the documented wire format exactly; the client has no
 * other coupling to the backend.
 */

export interface QuestionnaireSchemaJson {
  p_morphologies: string[];
  qrs_morphologies: string[];
  t_morphologies: string[];
  st_morphologies: string[];
  quality_range: [number, number];
  version: string;
}

export interface StudyInfo {
  study_id: string;
  n_subsets: number;
  n_presentations: number;
  schema: QuestionnaireSchemaJson;
}

export interface NextStripPending {
  done: false;
  strip_id: string;
  subset: number;
  position: number;
  remaining_in_subset: number;
  completed: number;
  total: number;
}

export interface NextStripDone {
  done: true;
  completed: number;
}

export type NextStrip = NextStripPending | NextStripDone;

/** Clinical-grid geometry for one lead, in millimetres. */
export interface RenderSpecJson {
  mm_per_mv: number;
  mm_per_s: number;
  fs: number;
  mm_per_sample: number;
  width_mm: number;
  y_min_mm: number;
  y_max_mm: number;
  x_major_mm: number[];
  x_minor_mm: number[];
  y_major_mm: number[];
  y_minor_mm: number[];
}

export interface StripPayload {
  strip_id: string;
  subset: number;
  position: number;
  leads: string[];
  fs: number;
  duration: number;
  samples: Record<string, number[]>;
  render: Record<string, RenderSpecJson>;
}

export interface LeadAnswers {
  p_morphology?: string;
  qrs_morphology?: string;
  t_morphology?: string;
  st_morphology?: string;
  st_depressed?: boolean;
  st_elevated?: boolean;
  quality?: number;
  p_pathologic?: boolean;
  qrs_pathologic?: boolean;
  t_pathologic?: boolean;
  st_pathologic?: boolean;
}

export interface Answers {
  leads: Record<string, LeadAnswers>;
  main_diagnosis?: string;
}

export interface SubmitAck {
  sequence: number;
  replaced: boolean;
  timestamp: string;
}

export interface SubsetProgress {
  subset: number;
  completed: number;
  total: number;
}

export interface Progress {
  rater_id: string;
  completed: number;
  total: number;
  current_subset: number;
  subsets: SubsetProgress[];
}

export const MORPHOLOGY_ITEMS = [
  "p_morphology",
  "qrs_morphology",
  "t_morphology",
  "st_morphology",
] as const;

export const BOOLEAN_ITEMS = ["st_depressed", "st_elevated"] as const;

export const PATHOLOGY_FLAGS = [
  "p_pathologic",
  "qrs_pathologic",
  "t_pathologic",
  "st_pathologic",
] as const;

export type MorphologyItem = (typeof MORPHOLOGY_ITEMS)[number];
export type BooleanItem = (typeof BOOLEAN_ITEMS)[number];
export type PathologyFlag = (typeof PATHOLOGY_FLAGS)[number];
