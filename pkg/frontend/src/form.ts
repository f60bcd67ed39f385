/**
 * Questionnaire form state with validation and local draft persistence.
 *
 * The validation schema is built from the questionnaire definition the
 * service publishes, so the client never hardcodes label sets.  Problem
 * paths use the same "leads.<lead>.<item>" convention the service
 * returns on a 422, letting either side's findings highlight the same
 * field.  Every change is mirrored to storage so an interrupted session
 * (crash, reload, network drop mid-submit) keeps its unsubmitted work.
 */

import { z } from "zod";

import type {
  Answers,
  LeadAnswers,
  QuestionnaireSchemaJson,
} from "./types.js";
import {
  BOOLEAN_ITEMS,
  MORPHOLOGY_ITEMS,
  PATHOLOGY_FLAGS,
} from "./types.js";

const DRAFT_PREFIX = "dqa-draft:";

function labelEnum(labels: string[]): z.ZodType<string> {
  return z.enum(labels as [string, ...string[]]);
}

export function leadAnswersSchema(
  schema: QuestionnaireSchemaJson,
): z.ZodType<LeadAnswers> {
  const [lo, hi] = schema.quality_range;
  return z.object({
    p_morphology: labelEnum(schema.p_morphologies),
    qrs_morphology: labelEnum(schema.qrs_morphologies),
    t_morphology: labelEnum(schema.t_morphologies),
    st_morphology: labelEnum(schema.st_morphologies),
    st_depressed: z.boolean(),
    st_elevated: z.boolean(),
    quality: z.number().int().min(lo).max(hi),
    p_pathologic: z.boolean().optional(),
    qrs_pathologic: z.boolean().optional(),
    t_pathologic: z.boolean().optional(),
    st_pathologic: z.boolean().optional(),
  }) as z.ZodType<LeadAnswers>;
}

export function answersSchema(
  schema: QuestionnaireSchemaJson,
  leads: string[],
): z.ZodType<Answers> {
  const perLead = leadAnswersSchema(schema);
  const leadShape: Record<string, z.ZodType<LeadAnswers>> = {};
  for (const lead of leads) {
    leadShape[lead] = perLead;
  }
  return z.object({
    leads: z.object(leadShape),
    main_diagnosis: z.string().optional(),
  }) as z.ZodType<Answers>;
}

export type FormItem =
  | (typeof MORPHOLOGY_ITEMS)[number]
  | (typeof BOOLEAN_ITEMS)[number]
  | (typeof PATHOLOGY_FLAGS)[number]
  | "quality";

export class FormState {
  private readonly validator: z.ZodType<Answers>;
  private answers: Answers;
  private touched = false;

  constructor(
    readonly schema: QuestionnaireSchemaJson,
    readonly leads: string[],
    readonly stripId: string,
    private readonly storage?: Storage,
  ) {
    this.validator = answersSchema(schema, leads);
    this.answers = this.loadDraft() ?? emptyAnswers(leads);
  }

  static draftKey(stripId: string): string {
    return DRAFT_PREFIX + stripId;
  }

  get dirty(): boolean {
    return this.touched;
  }

  getLeadItem(lead: string, item: FormItem): unknown {
    return this.answers.leads[lead]?.[item];
  }

  setLeadItem(lead: string, item: FormItem, value: unknown): void {
    if (!(lead in this.answers.leads)) {
      throw new Error(`form has no lead ${lead}`);
    }
    (this.answers.leads[lead] as Record<string, unknown>)[item] = value;
    this.touched = true;
    this.saveDraft();
  }

  get diagnosis(): string {
    return this.answers.main_diagnosis ?? "";
  }

  setDiagnosis(text: string): void {
    if (text === "") {
      delete this.answers.main_diagnosis;
    } else {
      this.answers.main_diagnosis = text;
    }
    this.touched = true;
    this.saveDraft();
  }

  /** Item paths that are missing or invalid; empty when submittable. */
  problems(): string[] {
    const result = this.validator.safeParse(this.answers);
    if (result.success) return [];
    const paths = result.error.issues.map((issue) =>
      issue.path.join("."),
    );
    return [...new Set(paths)];
  }

  complete(): boolean {
    return this.problems().length === 0;
  }

  toAnswers(): Answers {
    return JSON.parse(JSON.stringify(this.answers)) as Answers;
  }

  clearDraft(): void {
    this.storage?.removeItem(FormState.draftKey(this.stripId));
  }

  private saveDraft(): void {
    this.storage?.setItem(
      FormState.draftKey(this.stripId),
      JSON.stringify(this.answers),
    );
  }

  private loadDraft(): Answers | null {
    const raw = this.storage?.getItem(FormState.draftKey(this.stripId));
    if (!raw) return null;
    try {
      const parsed = JSON.parse(raw) as Answers;
      if (typeof parsed !== "object" || parsed === null || !parsed.leads) {
        return null;
      }
      // Drafts from a different lead set (schema change) are discarded.
      for (const lead of this.leads) {
        if (!(lead in parsed.leads)) return null;
      }
      return parsed;
    } catch {
      return null;
    }
  }
}

function emptyAnswers(leads: string[]): Answers {
  const leadAnswers: Record<string, LeadAnswers> = {};
  for (const lead of leads) {
    leadAnswers[lead] = {};
  }
  return { leads: leadAnswers };
}
