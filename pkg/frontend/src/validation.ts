/** Client-side mirror of the service's count invariants.
 *
 * Submission stays disabled until every candidate passes; the server remains
 * the authority and re-checks everything on POST.
 */

import type { CandidateDraft } from "./types.js";

export const VIOLATION_MESSAGES: Record<string, string> = {
  missing_r_facts: "Count the facts in the reference first.",
  missing_counts: "All three counts are required.",
  negative_count: "Counts must be non-negative whole numbers.",
  common_exceeds_min_r_g: "Facts in common cannot exceed either total (R or G).",
  correct_exceeds_generated: "Correct facts cannot exceed the facts in the description (G).",
  common_exceeds_correct:
    "A fact shared with the reference normally counts as correct; tick the waiver to submit anyway.",
  missing_coherence: "Choose a coherence rating.",
};

export function isCount(value: number | null): value is number {
  return value !== null && Number.isInteger(value) && value >= 0;
}

/** Violation ids for one candidate's draft, given the task-level R count. */
export function candidateViolations(rFacts: number | null, draft: CandidateDraft): string[] {
  const violations: string[] = [];
  if (!isCount(rFacts)) {
    violations.push("missing_r_facts");
  }
  const counts = [draft.g_facts, draft.common_facts, draft.correct_facts];
  if (counts.some((c) => c === null)) {
    violations.push("missing_counts");
  }
  if (counts.some((c) => c !== null && (!Number.isInteger(c) || c < 0))) {
    violations.push("negative_count");
  }
  if (draft.coherence === null) {
    violations.push("missing_coherence");
  }
  if (violations.length > 0) {
    return violations;
  }
  const r = rFacts as number;
  const g = draft.g_facts as number;
  const common = draft.common_facts as number;
  const correct = draft.correct_facts as number;
  if (common > Math.min(r, g)) {
    violations.push("common_exceeds_min_r_g");
  }
  if (correct > g) {
    violations.push("correct_exceeds_generated");
  }
  if (common > correct && !draft.waiver) {
    violations.push("common_exceeds_correct");
  }
  return violations;
}

export function describeViolation(id: string): string {
  return VIOLATION_MESSAGES[id] ?? id;
}
