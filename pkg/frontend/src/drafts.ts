/** Draft persistence: clinical reports are long, interruptions happen.
 *
 * Drafts live in localStorage keyed by (evaluator, task) and survive page
 * reloads; they are cleared once every candidate of the task is accepted.
 */

import type { TaskDraft, TaskPayload } from "./types.js";
import { emptyTaskDraft } from "./types.js";

const PREFIX = "facteval:draft";

function key(evaluatorId: string, taskId: string): string {
  return `${PREFIX}:${evaluatorId}:${taskId}`;
}

export function loadDraft(evaluatorId: string, task: TaskPayload): TaskDraft {
  const fresh = emptyTaskDraft(task);
  try {
    const raw = localStorage.getItem(key(evaluatorId, task.task_id));
    if (!raw) return fresh;
    const stored = JSON.parse(raw) as TaskDraft;
    // tolerate drafts from an older bundle layout
    for (const candidate of task.candidates) {
      if (!stored.candidates?.[candidate.label]) {
        stored.candidates[candidate.label] = fresh.candidates[candidate.label];
      }
    }
    return stored;
  } catch {
    return fresh;
  }
}

export function saveDraft(evaluatorId: string, taskId: string, draft: TaskDraft): void {
  try {
    localStorage.setItem(key(evaluatorId, taskId), JSON.stringify(draft));
  } catch {
    // storage full or unavailable: drafts are best-effort
  }
}

export function clearDraft(evaluatorId: string, taskId: string): void {
  try {
    localStorage.removeItem(key(evaluatorId, taskId));
  } catch {
    // ignore
  }
}
