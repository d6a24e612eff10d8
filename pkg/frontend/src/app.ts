/** Annotator frontend: login, instructions, blinded task panels, submission.
 *
 * The app only ever renders blind candidate labels; model identities never
 * reach the browser. All writes go through the service API, one POST per
 * candidate, and the server stays the authority on duplicates and count
 * invariants.
 */

import { ApiClient, ApiError } from "./api.js";
import { clearDraft, loadDraft, saveDraft } from "./drafts.js";
import type {
  AnnotationSubmission,
  CandidateDraft,
  CoherenceLabel,
  FactSpan,
  TaskDraft,
  TaskPayload,
} from "./types.js";
import { COHERENCE_OPTIONS } from "./types.js";
import { candidateViolations, describeViolation, isCount } from "./validation.js";

const LOGIN_KEY = "facteval:login";

type ViewState = "login" | "instructions" | "task" | "done";

export interface AppOptions {
  root: HTMLElement;
  baseUrl?: string;
  /** Injectable for tests; defaults to window.confirm. */
  confirmOverwrite?: (label: string) => boolean;
}

interface Login {
  evaluatorId: string;
  token: string;
}

export class App {
  readonly root: HTMLElement;
  readonly baseUrl: string;
  state: ViewState = "login";
  client: ApiClient | null = null;
  evaluatorId = "";
  task: TaskPayload | null = null;
  draft: TaskDraft | null = null;
  accepted = new Set<string>();
  serverErrors: Record<string, string[]> = {};
  private readonly confirmOverwrite: (label: string) => boolean;

  constructor(options: AppOptions) {
    this.root = options.root;
    this.baseUrl = options.baseUrl ?? "";
    this.confirmOverwrite =
      options.confirmOverwrite ??
      ((label) => window.confirm(`Candidate ${label} was already submitted. Overwrite it?`));
  }

  async start(): Promise<void> {
    const stored = this.storedLogin();
    if (stored) {
      await this.login(stored.evaluatorId, stored.token, false);
      return;
    }
    this.renderLogin();
  }

  private storedLogin(): Login | null {
    try {
      const raw = localStorage.getItem(LOGIN_KEY);
      return raw ? (JSON.parse(raw) as Login) : null;
    } catch {
      return null;
    }
  }

  async login(evaluatorId: string, token: string, remember = true): Promise<void> {
    const client = new ApiClient(this.baseUrl, evaluatorId, token);
    let instructions: string;
    try {
      instructions = await client.instructions();
      await client.nextTask(); // validates the token before we proceed
    } catch (error) {
      this.renderLogin(error instanceof ApiError ? error.message : "service unreachable");
      return;
    }
    this.client = client;
    this.evaluatorId = evaluatorId;
    if (remember) {
      try {
        localStorage.setItem(LOGIN_KEY, JSON.stringify({ evaluatorId, token }));
      } catch {
        // best effort
      }
    }
    this.renderInstructions(instructions);
  }

  logout(): void {
    try {
      localStorage.removeItem(LOGIN_KEY);
    } catch {
      // ignore
    }
    this.client = null;
    this.renderLogin();
  }

  async beginTasks(): Promise<void> {
    if (!this.client) return;
    let task: TaskPayload | null;
    try {
      task = await this.client.nextTask();
    } catch (error) {
      this.renderBanner(error instanceof Error ? error.message : "task fetch failed");
      return;
    }
    if (task === null) {
      await this.renderDone();
      return;
    }
    this.task = task;
    this.draft = loadDraft(this.evaluatorId, task);
    this.accepted = new Set();
    this.serverErrors = {};
    this.renderTask();
  }

  // ------------------------------------------------------------- draft edits

  setRFacts(value: number | null): void {
    if (!this.draft || !this.task) return;
    this.draft.r_facts = value;
    this.persistDraft();
    this.refreshValidation();
  }

  setCandidateCount(
    label: string,
    field: "g_facts" | "common_facts" | "correct_facts",
    value: number | null,
  ): void {
    const candidate = this.candidateDraft(label);
    if (!candidate) return;
    candidate[field] = value;
    this.persistDraft();
    this.refreshValidation();
  }

  setCoherence(label: string, value: CoherenceLabel): void {
    const candidate = this.candidateDraft(label);
    if (!candidate) return;
    candidate.coherence = value;
    this.persistDraft();
    this.refreshValidation();
  }

  setWaiver(label: string, value: boolean): void {
    const candidate = this.candidateDraft(label);
    if (!candidate) return;
    candidate.waiver = value;
    this.persistDraft();
    this.refreshValidation();
  }

  addSpan(target: string, start: number, end: number): void {
    if (!this.draft || !this.task) return;
    const text =
      target === "reference"
        ? this.task.report.reference
        : this.task.candidates.find((c) => c.label === target)?.text;
    if (text === undefined || !(0 <= start && start < end && end <= text.length)) return;
    const span: FactSpan = { target, start, end };
    if (target === "reference") {
      this.draft.referenceSpans.push(span);
    } else {
      this.candidateDraft(target)?.spans.push(span);
    }
    this.persistDraft();
    this.renderSpans(target);
  }

  /** Capture the current text selection inside a rendered text block. */
  markSelection(target: string): boolean {
    const block = this.root.querySelector<HTMLElement>(`[data-text-target="${target}"]`);
    const selection = window.getSelection();
    if (!block || !selection || selection.rangeCount === 0 || selection.isCollapsed) {
      return false;
    }
    const range = selection.getRangeAt(0);
    const node = block.firstChild;
    if (!node || range.startContainer !== node || range.endContainer !== node) {
      return false;
    }
    this.addSpan(target, range.startOffset, range.endOffset);
    return true;
  }

  private candidateDraft(label: string): CandidateDraft | null {
    return this.draft?.candidates[label] ?? null;
  }

  private persistDraft(): void {
    if (this.task && this.draft) {
      saveDraft(this.evaluatorId, this.task.task_id, this.draft);
    }
  }

  // -------------------------------------------------------------- submission

  violationsFor(label: string): string[] {
    if (!this.draft) return ["missing_counts"];
    return candidateViolations(this.draft.r_facts, this.draft.candidates[label]);
  }

  allValid(): boolean {
    if (!this.task || !this.draft) return false;
    return this.task.candidates.every((c) => this.violationsFor(c.label).length === 0);
  }

  submissionFor(label: string, overwrite = false): AnnotationSubmission {
    if (!this.task || !this.draft) throw new Error("no active task");
    const candidate = this.draft.candidates[label];
    const spans = [...this.draft.referenceSpans, ...candidate.spans];
    const record: AnnotationSubmission = {
      task_id: this.task.task_id,
      evaluator_id: this.evaluatorId,
      label,
      r_facts: this.draft.r_facts as number,
      g_facts: candidate.g_facts as number,
      common_facts: candidate.common_facts as number,
      correct_facts: candidate.correct_facts as number,
      coherence: candidate.coherence as CoherenceLabel,
    };
    if (spans.length > 0) record.fact_spans = spans;
    if (candidate.waiver) record.waiver = true;
    if (overwrite) record.overwrite = true;
    return record;
  }

  /** POST every pending candidate; advance to the next task when all accept. */
  async submitTask(): Promise<void> {
    if (!this.client || !this.task || !this.draft || !this.allValid()) return;
    this.serverErrors = {};
    for (const candidate of this.task.candidates) {
      const label = candidate.label;
      if (this.accepted.has(label)) continue;
      let result = await this.client.submit(this.submissionFor(label));
      if (result.status === 409 && this.confirmOverwrite(label)) {
        result = await this.client.submit(this.submissionFor(label, true));
      }
      if (result.status === 201) {
        this.accepted.add(label);
      } else if (result.status === 422) {
        this.serverErrors[label] = result.violations ?? [];
      } else {
        this.serverErrors[label] = [result.error ?? `submission failed (${result.status})`];
      }
    }
    if (this.task.candidates.every((c) => this.accepted.has(c.label))) {
      clearDraft(this.evaluatorId, this.task.task_id);
      await this.beginTasks();
      return;
    }
    this.refreshValidation();
  }

  // --------------------------------------------------------------- rendering

  private clear(): HTMLElement {
    this.root.textContent = "";
    const main = el("div", { class: "facteval" });
    this.root.appendChild(main);
    return main;
  }

  private renderBanner(message: string): void {
    const existing = this.root.querySelector(".banner");
    existing?.remove();
    const banner = el("div", { class: "banner" }, message);
    const retry = el("button", { type: "button" }, "Retry");
    retry.addEventListener("click", () => void this.beginTasks());
    banner.appendChild(retry);
    this.root.prepend(banner);
  }

  private renderLogin(error?: string): void {
    this.state = "login";
    const main = this.clear();
    main.appendChild(el("h1", {}, "Description evaluation"));
    if (error) main.appendChild(el("p", { class: "error" }, error));
    const form = el("form", { class: "login" });
    const evaluator = input("text", "evaluator-id", "evaluator id");
    const token = input("password", "evaluator-token", "access token");
    const button = el("button", { type: "submit" }, "Start") as HTMLButtonElement;
    form.append(
      labelled("Evaluator", evaluator),
      labelled("Token", token),
      button,
    );
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.login(evaluator.value.trim(), token.value.trim());
    });
    main.appendChild(form);
  }

  private renderInstructions(text: string): void {
    this.state = "instructions";
    const main = this.clear();
    main.appendChild(el("h1", {}, "Before you start"));
    main.appendChild(el("pre", { class: "instructions" }, text));
    const begin = el("button", { type: "button", id: "begin" }, "Begin annotation");
    begin.addEventListener("click", () => void this.beginTasks());
    main.appendChild(begin);
  }

  private async renderDone(): Promise<void> {
    this.state = "done";
    this.task = null;
    const main = this.clear();
    main.appendChild(el("h1", {}, "All tasks complete"));
    main.appendChild(el("p", {}, "Thank you. Every assigned description has been rated."));
    if (this.client) {
      try {
        const progress = await this.client.progress();
        const list = el("ul", { class: "progress" });
        for (const [evaluator, counts] of Object.entries(progress.evaluators)) {
          list.appendChild(
            el("li", {}, `${evaluator}: ${counts.accepted} of ${counts.expected} accepted`),
          );
        }
        main.appendChild(list);
      } catch {
        // progress is informational only
      }
    }
  }

  private renderTask(): void {
    if (!this.task || !this.draft) return;
    if (this.task.candidates.length === 0) {
      const main = this.clear();
      main.appendChild(el("h1", {}, "Invalid task"));
      main.appendChild(
        el("p", { class: "error" }, `Task ${this.task.task_id} has no candidates to rate.`),
      );
      return;
    }
    this.state = "task";
    const main = this.clear();
    main.appendChild(el("h1", {}, `Task ${this.task.task_id}`));

    const report = el("section", { class: "report" });
    report.appendChild(el("h2", {}, "Clinical report"));
    report.appendChild(el("pre", { class: "text" }, this.task.report.body));
    main.appendChild(report);

    const reference = el("section", { class: "reference" });
    reference.appendChild(el("h2", {}, "Reference description"));
    const referenceText = el("pre", { class: "text", "data-text-target": "reference" });
    referenceText.textContent = this.task.report.reference;
    reference.appendChild(referenceText);
    const markReference = el("button", { type: "button", class: "mark" }, "Mark selection as fact");
    markReference.addEventListener("click", () => this.markSelection("reference"));
    reference.appendChild(markReference);
    reference.appendChild(el("ul", { class: "spans", "data-spans-for": "reference" }));
    const rField = numberField("How many facts are in the reference (R)?", "r-facts", this.draft.r_facts);
    rField.input.addEventListener("input", () => this.setRFacts(parseCount(rField.input.value)));
    reference.appendChild(rField.wrapper);
    main.appendChild(reference);

    for (const candidate of this.task.candidates) {
      main.appendChild(this.renderCandidate(candidate.label, candidate.text));
    }

    const controls = el("div", { class: "controls" });
    const submit = el("button", { type: "button", id: "submit-task" }, "Submit task") as HTMLButtonElement;
    submit.addEventListener("click", () => void this.submitTask());
    controls.appendChild(submit);
    main.appendChild(controls);

    this.renderSpans("reference");
    this.refreshValidation();
  }

  private renderCandidate(label: string, text: string): HTMLElement {
    const draft = this.draft!.candidates[label];
    const panel = el("section", { class: "candidate", "data-candidate": label });
    panel.appendChild(el("h2", {}, `Candidate ${label}`));
    const block = el("pre", { class: "text", "data-text-target": label });
    block.textContent = text;
    panel.appendChild(block);
    const mark = el("button", { type: "button", class: "mark" }, "Mark selection as fact");
    mark.addEventListener("click", () => this.markSelection(label));
    panel.appendChild(mark);
    panel.appendChild(el("ul", { class: "spans", "data-spans-for": label }));

    const fields: [string, "g_facts" | "common_facts" | "correct_facts"][] = [
      [`How many facts does ${label} contain (G)?`, "g_facts"],
      [`How many facts does ${label} share with the reference (R&G)?`, "common_facts"],
      [`How many facts in ${label} are correct against the report (C)?`, "correct_facts"],
    ];
    for (const [question, field] of fields) {
      const control = numberField(question, `${label}-${field}`, draft[field]);
      control.input.addEventListener("input", () =>
        this.setCandidateCount(label, field, parseCount(control.input.value)),
      );
      panel.appendChild(control.wrapper);
    }

    const coherence = el("fieldset", { class: "coherence" });
    coherence.appendChild(el("legend", {}, `Is ${label} grammatically correct and fluent?`));
    for (const option of COHERENCE_OPTIONS) {
      const radio = input("radio", `${label}-coherence-${option.label}`) as HTMLInputElement;
      radio.name = `${label}-coherence`;
      radio.value = option.label;
      radio.checked = draft.coherence === option.label;
      radio.addEventListener("change", () => this.setCoherence(label, option.label));
      const wrap = el("label", { class: "radio" });
      wrap.append(radio, option.display);
      coherence.appendChild(wrap);
    }
    panel.appendChild(coherence);

    const waiver = input("checkbox", `${label}-waiver`) as HTMLInputElement;
    waiver.checked = draft.waiver;
    waiver.addEventListener("change", () => this.setWaiver(label, waiver.checked));
    const waiverWrap = el("label", { class: "waiver" });
    waiverWrap.append(waiver, "I mean to report more shared facts than correct ones.");
    panel.appendChild(waiverWrap);

    panel.appendChild(el("ul", { class: "violations", "data-violations-for": label }));
    return panel;
  }

  private renderSpans(target: string): void {
    if (!this.draft) return;
    const list = this.root.querySelector(`[data-spans-for="${target}"]`);
    if (!list) return;
    list.textContent = "";
    const spans =
      target === "reference" ? this.draft.referenceSpans : this.draft.candidates[target]?.spans ?? [];
    for (const span of spans) {
      list.appendChild(el("li", {}, `fact span ${span.start}-${span.end}`));
    }
  }

  refreshValidation(): void {
    if (!this.task) return;
    for (const candidate of this.task.candidates) {
      const list = this.root.querySelector(`[data-violations-for="${candidate.label}"]`);
      if (!list) continue;
      list.textContent = "";
      if (this.accepted.has(candidate.label)) {
        list.appendChild(el("li", { class: "accepted" }, "accepted"));
        continue;
      }
      for (const violation of this.violationsFor(candidate.label)) {
        list.appendChild(el("li", { class: "violation" }, describeViolation(violation)));
      }
      for (const violation of this.serverErrors[candidate.label] ?? []) {
        list.appendChild(el("li", { class: "violation server" }, describeViolation(violation)));
      }
    }
    const submit = this.root.querySelector<HTMLButtonElement>("#submit-task");
    if (submit) submit.disabled = !this.allValid();
  }
}

// ------------------------------------------------------------------ helpers

export function parseCount(raw: string): number | null {
  const trimmed = raw.trim();
  if (trimmed === "") return null;
  if (!/^-?\d+$/.test(trimmed)) return null;
  return Number(trimmed);
}

function el(
  tag: string,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElement {
  const node = document.createElement(tag);
  for (const [name, value] of Object.entries(attrs)) {
    node.setAttribute(name, value);
  }
  if (text !== undefined) node.textContent = text;
  return node;
}

function input(type: string, id: string, placeholder = ""): HTMLInputElement {
  const node = document.createElement("input");
  node.type = type;
  node.id = id;
  if (placeholder) node.placeholder = placeholder;
  return node;
}

function labelled(text: string, control: HTMLElement): HTMLElement {
  const wrap = el("label", { class: "field" });
  wrap.append(text, control);
  return wrap;
}

function numberField(
  question: string,
  id: string,
  value: number | null,
): { wrapper: HTMLElement; input: HTMLInputElement } {
  const control = input("number", id);
  control.min = "0";
  control.step = "1";
  if (value !== null) control.value = String(value);
  const wrapper = el("div", { class: "count" });
  const label = el("label", {}, question) as HTMLLabelElement;
  label.htmlFor = id;
  wrapper.append(label, control);
  return { wrapper, input: control };
}
