/**
 * Session controller: one blinded strip per screen, per-lead tabs, the
 * questionnaire form, and subset-level progress.
 *
 * The DOM never receives record names, arms, or even the opaque strip
 * id; the only study information shown is the rater's own progress
 * within the current work package.  Drafts live in storage keyed by
 * strip, so a reload or network drop never loses unsubmitted answers.
 */

import { NetworkError, SessionApi, ValidationError } from "./api.js";
import { FormState, type FormItem } from "./form.js";
import { renderStrip } from "./render.js";
import type {
  QuestionnaireSchemaJson,
  StripPayload,
  StudyInfo,
} from "./types.js";

export const ZOOM_LEVELS = [0.75, 1, 2.5] as const;

interface MorphologyField {
  item: FormItem;
  label: string;
  labels: (schema: QuestionnaireSchemaJson) => string[];
}

const MORPHOLOGY_FIELDS: MorphologyField[] = [
  {
    item: "p_morphology",
    label: "P wave morphology",
    labels: (s) => s.p_morphologies,
  },
  {
    item: "qrs_morphology",
    label: "QRS morphology",
    labels: (s) => s.qrs_morphologies,
  },
  {
    item: "t_morphology",
    label: "T wave morphology",
    labels: (s) => s.t_morphologies,
  },
  {
    item: "st_morphology",
    label: "ST segment morphology",
    labels: (s) => s.st_morphologies,
  },
];

const BOOLEAN_FIELDS: { item: FormItem; label: string }[] = [
  { item: "st_depressed", label: "ST depression present" },
  { item: "st_elevated", label: "ST elevation present" },
];

const FLAG_FIELDS: { item: FormItem; label: string }[] = [
  { item: "p_pathologic", label: "P wave pathologic" },
  { item: "qrs_pathologic", label: "QRS pathologic" },
  { item: "t_pathologic", label: "T wave pathologic" },
  { item: "st_pathologic", label: "ST segment pathologic" },
];

export class SessionController {
  private info!: StudyInfo;
  private payload: StripPayload | null = null;
  private form: FormState | null = null;
  private activeLead = "";
  private zoom: number = ZOOM_LEVELS[1];

  constructor(
    private readonly api: SessionApi,
    private readonly root: HTMLElement,
    private readonly storage?: Storage,
  ) {}

  async start(): Promise<void> {
    this.info = await this.api.schema();
    await this.loadNext();
  }

  /** The strip currently on screen; null once the session is done. */
  get currentStripId(): string | null {
    return this.payload?.strip_id ?? null;
  }

  async loadNext(): Promise<void> {
    const next = await this.api.nextStrip();
    if (next.done) {
      this.payload = null;
      this.form = null;
      this.renderDone(next.completed);
      return;
    }
    this.payload = await this.api.strip(next.strip_id);
    this.form = new FormState(
      this.info.schema,
      this.payload.leads,
      this.payload.strip_id,
      this.storage,
    );
    this.activeLead = this.payload.leads[0];
    const progress = await this.api.progress();
    const subset = progress.subsets[progress.current_subset];
    this.renderSession(
      `Package ${subset.subset + 1} · ${subset.completed} of ` +
        `${subset.total} answered`,
    );
  }

  private renderDone(completed: number): void {
    this.root.replaceChildren();
    const done = el("div", "done");
    done.append(
      el("h2", "", "Session complete"),
      el("p", "", `You answered ${completed} strips. Thank you.`),
    );
    this.root.appendChild(done);
  }

  private renderSession(progressText: string): void {
    const payload = this.payload;
    const form = this.form;
    if (!payload || !form) return;
    this.root.replaceChildren();

    const header = el("header", "session-header");
    header.append(
      el("span", "progress", progressText),
      el("span", "status"),
    );
    this.root.appendChild(header);

    const zoomBar = el("div", "zoom-controls");
    for (const level of ZOOM_LEVELS) {
      const button = el(
        "button",
        "zoom",
        `${level}×`,
      ) as HTMLButtonElement;
      button.type = "button";
      button.dataset.zoom = String(level);
      button.addEventListener("click", () => {
        this.zoom = level;
        this.drawStrip();
      });
      zoomBar.appendChild(button);
    }
    this.root.appendChild(zoomBar);

    const tabs = el("nav", "lead-tabs");
    for (const lead of payload.leads) {
      const tab = el("button", "lead-tab", lead) as HTMLButtonElement;
      tab.type = "button";
      tab.dataset.lead = lead;
      tab.addEventListener("click", () => {
        this.activeLead = lead;
        this.drawStrip();
        this.showActiveLeadForm();
      });
      tabs.appendChild(tab);
    }
    this.root.appendChild(tabs);

    this.root.appendChild(el("div", "strip-container"));
    this.root.appendChild(this.buildForm());
    this.drawStrip();
    this.showActiveLeadForm();
    this.refreshSubmit();
  }

  private drawStrip(): void {
    const container =
      this.root.querySelector<HTMLElement>(".strip-container");
    if (container && this.payload) {
      renderStrip(container, this.payload, this.activeLead, this.zoom);
    }
    for (const tab of this.root.querySelectorAll<HTMLElement>(
      ".lead-tab",
    )) {
      tab.classList.toggle(
        "active",
        tab.dataset.lead === this.activeLead,
      );
    }
  }

  private buildForm(): HTMLFormElement {
    const payload = this.payload!;
    const form = document.createElement("form");
    form.className = "questionnaire";
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submit();
    });

    for (const lead of payload.leads) {
      form.appendChild(this.buildLeadSection(lead));
    }

    const diagnosisLabel = el("label", "diagnosis-label");
    diagnosisLabel.append("Main diagnosis (optional)");
    const diagnosis = document.createElement("textarea");
    diagnosis.className = "diagnosis";
    diagnosis.value = this.form!.diagnosis;
    diagnosis.addEventListener("input", () => {
      this.form!.setDiagnosis(diagnosis.value);
    });
    diagnosisLabel.appendChild(diagnosis);
    form.appendChild(diagnosisLabel);

    const submit = el("button", "submit", "Submit") as HTMLButtonElement;
    submit.type = "submit";
    form.appendChild(submit);
    return form;
  }

  private buildLeadSection(lead: string): HTMLElement {
    const schema = this.info.schema;
    const state = this.form!;
    const section = el("section", "lead-form");
    section.dataset.lead = lead;

    for (const field of MORPHOLOGY_FIELDS) {
      const label = el("label", "item");
      label.dataset.path = `leads.${lead}.${field.item}`;
      label.append(field.label);
      const select = document.createElement("select");
      select.appendChild(new Option("— choose —", ""));
      for (const value of field.labels(schema)) {
        select.appendChild(new Option(value, value));
      }
      const existing = state.getLeadItem(lead, field.item);
      if (typeof existing === "string") select.value = existing;
      select.addEventListener("change", () => {
        state.setLeadItem(
          lead,
          field.item,
          select.value === "" ? undefined : select.value,
        );
        this.itemChanged(label);
      });
      label.appendChild(select);
      section.appendChild(label);
    }

    for (const field of [...BOOLEAN_FIELDS, ...FLAG_FIELDS]) {
      const optional = FLAG_FIELDS.includes(field);
      const label = el("label", "item checkbox");
      label.dataset.path = `leads.${lead}.${field.item}`;
      const box = document.createElement("input");
      box.type = "checkbox";
      const existing = state.getLeadItem(lead, field.item);
      box.checked = existing === true;
      // Mandatory booleans are an explicit yes/no: untouched means no.
      if (!optional && existing === undefined) {
        state.setLeadItem(lead, field.item, false);
      }
      box.addEventListener("change", () => {
        state.setLeadItem(lead, field.item, box.checked);
        this.itemChanged(label);
      });
      label.append(box, field.label);
      section.appendChild(label);
    }

    const qualityLabel = el("label", "item");
    qualityLabel.dataset.path = `leads.${lead}.quality`;
    const [lo, hi] = schema.quality_range;
    qualityLabel.append(`Signal quality (${lo}–${hi})`);
    const quality = document.createElement("input");
    quality.type = "number";
    quality.min = String(lo);
    quality.max = String(hi);
    const existing = state.getLeadItem(lead, "quality");
    if (typeof existing === "number") quality.value = String(existing);
    quality.addEventListener("input", () => {
      state.setLeadItem(
        lead,
        "quality",
        quality.value === "" ? undefined : Number(quality.value),
      );
      this.itemChanged(qualityLabel);
    });
    qualityLabel.appendChild(quality);
    section.appendChild(qualityLabel);

    return section;
  }

  private itemChanged(label: HTMLElement): void {
    label.classList.remove("problem");
    this.refreshSubmit();
  }

  private showActiveLeadForm(): void {
    for (const section of this.root.querySelectorAll<HTMLElement>(
      ".lead-form",
    )) {
      section.hidden = section.dataset.lead !== this.activeLead;
    }
  }

  private refreshSubmit(): void {
    const submit =
      this.root.querySelector<HTMLButtonElement>("button.submit");
    if (submit && this.form) {
      submit.disabled = !this.form.complete();
    }
  }

  private markProblems(paths: string[]): void {
    for (const path of paths) {
      this.root
        .querySelector<HTMLElement>(`[data-path="${path}"]`)
        ?.classList.add("problem");
    }
  }

  private setStatus(text: string): void {
    const status = this.root.querySelector<HTMLElement>(".status");
    if (status) status.textContent = text;
  }

  async submit(): Promise<void> {
    const payload = this.payload;
    const form = this.form;
    if (!payload || !form) return;
    if (!form.complete()) {
      this.markProblems(form.problems());
      return;
    }
    try {
      await this.api.submit(payload.strip_id, form.toAnswers());
    } catch (error) {
      if (error instanceof ValidationError) {
        this.markProblems(error.problems);
        this.setStatus("Please complete the highlighted items.");
        return;
      }
      if (error instanceof NetworkError) {
        this.setStatus(
          "Connection lost; your answers are saved locally. Retry.",
        );
        return;
      }
      throw error;
    }
    form.clearDraft();
    await this.loadNext();
  }
}

function el(
  tag: string,
  className: string,
  text?: string,
): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}
