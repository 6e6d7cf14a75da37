/** Feature-rating session: one six-scale form per (HS, CN) task. */

import { ApiClient, ApiError } from "./api.js";
import type { FeatureForm, FeatureTaskPayload } from "./types.js";
import { emptyFeatureForm, isComplete, validateFeatureForm } from "./validation.js";

export interface FeatureView {
  done: boolean;
  payload: FeatureTaskPayload | null;
  form: FeatureForm;
  errors: string[];
  canSubmit: boolean;
  error: string | null;
  submitted: number;
}

export class FeatureSession {
  private payload: FeatureTaskPayload | null = null;
  private form: FeatureForm = emptyFeatureForm();
  private error: string | null = null;
  private submitted = 0;

  constructor(private readonly api: ApiClient) {}

  view(): FeatureView {
    return {
      done: this.payload?.done ?? false,
      payload: this.payload,
      form: { ...this.form },
      errors: validateFeatureForm(this.form),
      canSubmit: isComplete(this.form),
      error: this.error,
      submitted: this.submitted,
    };
  }

  async loadNext(): Promise<FeatureView> {
    this.payload = await this.api.nextFeatureTask();
    this.form = emptyFeatureForm();
    this.error = null;
    return this.view();
  }

  /** Set one scale; invalid values are rejected client-side. */
  setValue(feature: keyof FeatureForm, value: number): FeatureView {
    const probe = { ...this.form, [feature]: value };
    const fieldErrors = validateFeatureForm(probe).filter((e) => e.startsWith(feature));
    if (fieldErrors.length) {
      this.error = fieldErrors[0];
      return this.view();
    }
    this.form = probe;
    this.error = null;
    return this.view();
  }

  /** Submit requires every scale set and in range (mirror of the server). */
  async submit(): Promise<FeatureView> {
    const task = this.payload?.task;
    if (!task) throw new Error("no feature task loaded");
    const errors = validateFeatureForm(this.form);
    if (errors.length) {
      this.error = errors[0];
      return this.view();
    }
    try {
      await this.api.submitFeature(task.task_id, this.form as unknown as Record<string, number>);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        // already recorded; fall through and advance
      } else if (error instanceof ApiError) {
        this.error = error.message;
        return this.view();
      } else {
        this.error = "network failure; the form was kept for retry";
        return this.view();
      }
    }
    this.submitted += 1;
    return this.loadNext();
  }
}
