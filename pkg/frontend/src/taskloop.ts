/** Task-loop controller: fetch task, capture verdict, submit, advance.
 *
 * Pure state machine over the service API — no DOM.  Rendering subscribes
 * to snapshots; keyboard and buttons call the action methods.  A failed
 * submission never discards the captured verdict: conflicts keep the form
 * and bump the version, network failures keep the form for retry.
 */

import { ApiError } from "./api.js";
import type { NextTaskResponse, SubmitResponse, Task, Temporality, Verdict } from "./types.js";

/** The slice of the service API the task loop needs. */
export interface AnnotationApi {
  nextTask(annotator: string): Promise<NextTaskResponse>;
  submit(verdict: Verdict): Promise<SubmitResponse>;
}

export type Phase = "idle" | "loading" | "annotating" | "submitting" | "done" | "failed";

export interface FormState {
  /** null until the annotator chooses; submit stays disabled meanwhile. */
  correct: boolean | null;
  negated: boolean;
  temporality: Temporality;
}

export interface Notice {
  kind: "conflict" | "network";
  message: string;
}

export interface Snapshot {
  phase: Phase;
  task: Task | null;
  form: FormState;
  done: number;
  remaining: number;
  notice: Notice | null;
  /** Chapters of tasks this session has successfully submitted. */
  annotatedChapters: ReadonlySet<string>;
}

export type Listener = (snapshot: Snapshot) => void;

function defaultForm(): FormState {
  return { correct: null, negated: false, temporality: "recent" };
}

export class TaskLoop {
  private readonly api: AnnotationApi;
  private readonly annotatorId: string;
  private readonly listeners: Listener[] = [];

  private phase: Phase = "idle";
  private task: Task | null = null;
  private form: FormState = defaultForm();
  private done = 0;
  private remaining = 0;
  private notice: Notice | null = null;
  private readonly annotatedChapters = new Set<string>();
  /** What retry() should repeat after a network failure. */
  private pendingAction: "load" | "submit" | null = null;

  constructor(api: AnnotationApi, annotatorId: string) {
    if (!annotatorId) throw new Error("annotator id must be non-empty");
    this.api = api;
    this.annotatorId = annotatorId;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      const i = this.listeners.indexOf(listener);
      if (i >= 0) this.listeners.splice(i, 1);
    };
  }

  snapshot(): Snapshot {
    return {
      phase: this.phase,
      task: this.task === null ? null : { ...this.task },
      form: { ...this.form },
      done: this.done,
      remaining: this.remaining,
      notice: this.notice,
      annotatedChapters: new Set(this.annotatedChapters),
    };
  }

  private emit(): void {
    const snap = this.snapshot();
    for (const listener of [...this.listeners]) listener(snap);
  }

  /** Fetch the first task. */
  async start(): Promise<void> {
    await this.loadNext();
  }

  private async loadNext(): Promise<void> {
    this.phase = "loading";
    this.emit();
    try {
      const response = await this.api.nextTask(this.annotatorId);
      this.done = response.done;
      this.remaining = response.remaining;
      this.task = response.task;
      if (response.task === null) {
        this.phase = "done";
      } else {
        this.phase = "annotating";
        this.form = {
          correct: null,
          negated: response.task.suggested.negated ?? false,
          temporality: response.task.suggested.temporality ?? "recent",
        };
      }
      this.notice = null;
      this.pendingAction = null;
    } catch (error) {
      this.phase = "failed";
      this.pendingAction = "load";
      this.notice = { kind: "network", message: describe(error) };
    }
    this.emit();
  }

  get canSubmit(): boolean {
    return this.phase === "annotating" && this.form.correct !== null;
  }

  setCorrect(value: boolean): void {
    if (this.phase !== "annotating") return;
    this.form.correct = value;
    this.emit();
  }

  /** Enabled only once the mention is marked correct. */
  toggleNegated(): void {
    if (this.phase !== "annotating" || this.form.correct !== true) return;
    this.form.negated = !this.form.negated;
    this.emit();
  }

  /** Enabled only once the mention is marked correct. */
  toggleTemporality(): void {
    if (this.phase !== "annotating" || this.form.correct !== true) return;
    this.form.temporality = this.form.temporality === "recent" ? "historic" : "recent";
    this.emit();
  }

  verdict(): Verdict {
    if (this.task === null || this.form.correct === null) {
      throw new Error("no submittable verdict");
    }
    return {
      doc_id: this.task.doc_id,
      start: this.task.start,
      end: this.task.end,
      cui: this.task.cui,
      annotator_id: this.annotatorId,
      correct: this.form.correct,
      negated: this.form.negated,
      temporality: this.form.temporality,
      timestamp: null,
      version: this.task.version,
    };
  }

  async submit(): Promise<void> {
    if (!this.canSubmit || this.task === null) return;
    const submitted = this.task;
    this.phase = "submitting";
    this.emit();
    try {
      await this.api.submit(this.verdict());
      this.annotatedChapters.add(submitted.chapter);
      this.notice = null;
      await this.loadNext();
      return;
    } catch (error) {
      this.phase = "annotating";
      if (error instanceof ApiError && error.status === 409) {
        // Someone wrote this slot first.  Adopt the stored version so a
        // resubmit overwrites deliberately; the captured form survives.
        // Replace rather than mutate: issued snapshots stay frozen.
        if (error.currentVersion !== null) {
          this.task = { ...submitted, version: error.currentVersion };
        }
        this.notice = {
          kind: "conflict",
          message: "This mention was updated elsewhere — review and press Enter to resubmit.",
        };
      } else {
        this.pendingAction = "submit";
        this.notice = { kind: "network", message: describe(error) };
      }
      this.emit();
    }
  }

  /** Repeat the action a network failure interrupted; the form is intact. */
  async retry(): Promise<void> {
    const action = this.pendingAction;
    this.pendingAction = null;
    if (action === "submit") {
      this.phase = "annotating";
      await this.submit();
    } else {
      await this.loadNext();
    }
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  if (error instanceof Error) return error.message;
  return String(error);
}
