/** Wire types for the annotation service API. */

export type CoherenceLabel = "coherent" | "minor_errors" | "major_errors";

export const COHERENCE_OPTIONS: { label: CoherenceLabel; display: string }[] = [
  { label: "coherent", display: "Coherent" },
  { label: "minor_errors", display: "Minor Errors" },
  { label: "major_errors", display: "Major Errors" },
];

export interface FactSpan {
  target: string; // "reference" or a candidate blind label
  start: number;
  end: number;
}

export interface CandidatePayload {
  label: string;
  text: string;
}

export interface TaskPayload {
  task_id: string;
  report: { id: string; body: string; reference: string };
  candidates: CandidatePayload[];
  assigned: string[];
}

export interface AnnotationSubmission {
  task_id: string;
  evaluator_id: string;
  label: string;
  r_facts: number;
  g_facts: number;
  common_facts: number;
  correct_facts: number;
  coherence: CoherenceLabel;
  fact_spans?: FactSpan[];
  waiver?: boolean;
  overwrite?: boolean;
}

export interface EvaluatorProgress {
  accepted: number;
  expected: number;
  remaining: number;
}

export interface ProgressPayload {
  expected_total: number;
  accepted_total: number;
  evaluators: Record<string, EvaluatorProgress>;
}

export interface CandidateDraft {
  g_facts: number | null;
  common_facts: number | null;
  correct_facts: number | null;
  coherence: CoherenceLabel | null;
  waiver: boolean;
  spans: FactSpan[];
}

export interface TaskDraft {
  r_facts: number | null;
  referenceSpans: FactSpan[];
  candidates: Record<string, CandidateDraft>;
}

export function emptyCandidateDraft(): CandidateDraft {
  return {
    g_facts: null,
    common_facts: null,
    correct_facts: null,
    coherence: null,
    waiver: false,
    spans: [],
  };
}

export function emptyTaskDraft(task: TaskPayload): TaskDraft {
  const candidates: Record<string, CandidateDraft> = {};
  for (const candidate of task.candidates) {
    candidates[candidate.label] = emptyCandidateDraft();
  }
  return { r_facts: null, referenceSpans: [], candidates };
}
