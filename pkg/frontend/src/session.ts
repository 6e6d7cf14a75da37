/** Pairwise-annotation session: pull task, submit choice, advance on ack.

The UI only moves forward once the server acknowledges a submission. A
"Tie" needs an explicit confirmation step (the guideline reserves ties for
the case where both answers are inadequate). Retries reuse the
(tournament, annotator) pair as the idempotency key: a duplicate-submit
conflict after a dropped response counts as acknowledged.
*/

import { ApiClient, ApiError } from "./api.js";
import type { Choice, TaskPayload } from "./types.js";

export type SessionStatus = "idle" | "task" | "confirm-tie" | "submitting" | "retry" | "done";

export interface SessionView {
  status: SessionStatus;
  payload: TaskPayload | null;
  pendingChoice: Choice | null;
  error: string | null;
  submitted: number;
}

export class AnnotationSession {
  private status: SessionStatus = "idle";
  private payload: TaskPayload | null = null;
  private pendingChoice: Choice | null = null;
  private error: string | null = null;
  private submitted = 0;

  constructor(private readonly api: ApiClient) {}

  view(): SessionView {
    return {
      status: this.status,
      payload: this.payload,
      pendingChoice: this.pendingChoice,
      error: this.error,
      submitted: this.submitted,
    };
  }

  /** Fetch the next unanswered task (or the done signal). */
  async loadNext(): Promise<SessionView> {
    this.payload = await this.api.nextTask();
    this.pendingChoice = null;
    this.error = null;
    this.status = this.payload.done ? "done" : "task";
    return this.view();
  }

  /**
   * Record the annotator's selection. "A"/"B" submit immediately; "Tie"
   * first moves to confirm-tie and only submits once confirmTie() is
   * called, so accidental ties cannot slip through.
   */
  async choose(choice: Choice): Promise<SessionView> {
    if (this.status !== "task" && this.status !== "retry") {
      throw new Error(`cannot choose in state ${this.status}`);
    }
    if (choice === "Tie" && this.pendingChoice !== "Tie") {
      this.pendingChoice = "Tie";
      this.status = "confirm-tie";
      return this.view();
    }
    this.pendingChoice = choice;
    return this.submit();
  }

  async confirmTie(): Promise<SessionView> {
    if (this.status !== "confirm-tie") {
      throw new Error("no tie awaiting confirmation");
    }
    return this.submit();
  }

  cancelTie(): SessionView {
    if (this.status === "confirm-tie") {
      this.pendingChoice = null;
      this.status = "task";
    }
    return this.view();
  }

  /** Re-attempt after a network failure; never double-submits. */
  async retry(): Promise<SessionView> {
    if (this.status !== "retry" || this.pendingChoice === null) {
      throw new Error("nothing to retry");
    }
    return this.submit();
  }

  private async submit(): Promise<SessionView> {
    const task = this.payload?.task;
    const choice = this.pendingChoice;
    if (!task || !choice) throw new Error("no task/choice to submit");
    this.status = "submitting";
    try {
      await this.api.submitChoice(task.tournament_id, choice);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        // the earlier attempt landed; (tournament, annotator) is the
        // idempotency key, so treat the conflict as acknowledged
      } else if (error instanceof ApiError) {
        this.error = error.message;
        this.status = "task";
        this.pendingChoice = null;
        return this.view();
      } else {
        this.error = "network failure; your choice was kept for retry";
        this.status = "retry";
        return this.view();
      }
    }
    this.submitted += 1;
    return this.loadNext();
  }
}
