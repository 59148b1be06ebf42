import { describe, expect, it } from "vitest";

import { ApiError } from "../src/api.js";
import { TaskLoop, type AnnotationApi, type Snapshot } from "../src/taskloop.js";
import type { NextTaskResponse, SubmitResponse, Task, Verdict } from "../src/types.js";

function makeTask(overrides: Partial<Task> = {}): Task {
  return {
    doc_id: "doc1",
    start: 12,
    end: 19,
    cui: "C0008354",
    icd_code: "A00",
    chapter: "I",
    preferred_term: "cholera",
    matched_text: "cholera",
    sentence_index: 0,
    context: { prior: null, current: "Patient has cholera.", next: "Follow up." },
    highlight: { start: 12, end: 19 },
    suggested: { negated: false, temporality: "recent" },
    version: 0,
    ...overrides,
  };
}

/** Scripted service double: a task queue plus injectable failures. */
class StubApi implements AnnotationApi {
  queue: Task[] = [];
  submitted: Verdict[] = [];
  doneCount = 0;
  failNextLoad: Error | null = null;
  failNextSubmit: Error | null = null;

  async nextTask(_annotator: string): Promise<NextTaskResponse> {
    if (this.failNextLoad !== null) {
      const error = this.failNextLoad;
      this.failNextLoad = null;
      throw error;
    }
    return {
      task: this.queue[0] ?? null,
      done: this.doneCount,
      remaining: this.queue.length,
    };
  }

  async submit(verdict: Verdict): Promise<SubmitResponse> {
    if (this.failNextSubmit !== null) {
      const error = this.failNextSubmit;
      this.failNextSubmit = null;
      throw error;
    }
    this.submitted.push(verdict);
    this.queue.shift();
    this.doneCount += 1;
    return { version: verdict.version + 1 };
  }
}

function started(api: StubApi): Promise<TaskLoop> {
  const loop = new TaskLoop(api, "carol");
  return loop.start().then(() => loop);
}

describe("TaskLoop start", () => {
  it("loads the first task and pre-fills the form from the suggestion", async () => {
    const api = new StubApi();
    api.queue = [makeTask({ suggested: { negated: true, temporality: "historic" } })];
    const loop = await started(api);
    const snap = loop.snapshot();
    expect(snap.phase).toBe("annotating");
    expect(snap.task?.doc_id).toBe("doc1");
    expect(snap.form).toEqual({ correct: null, negated: true, temporality: "historic" });
    expect(snap.done).toBe(0);
    expect(snap.remaining).toBe(1);
  });

  it("defaults the form when the suggestion carries nulls", async () => {
    const api = new StubApi();
    api.queue = [makeTask({ suggested: { negated: null, temporality: null } })];
    const loop = await started(api);
    expect(loop.snapshot().form).toEqual({
      correct: null,
      negated: false,
      temporality: "recent",
    });
  });

  it("shows the all-done state on an exhausted queue", async () => {
    const api = new StubApi();
    api.doneCount = 7;
    const loop = await started(api);
    const snap = loop.snapshot();
    expect(snap.phase).toBe("done");
    expect(snap.task).toBeNull();
    expect(snap.done).toBe(7);
    expect(snap.remaining).toBe(0);
  });
});

describe("TaskLoop form guards", () => {
  it("keeps submit disabled until a verdict is chosen", async () => {
    const api = new StubApi();
    api.queue = [makeTask()];
    const loop = await started(api);
    expect(loop.canSubmit).toBe(false);
    await loop.submit();
    expect(api.submitted).toHaveLength(0);
    loop.setCorrect(true);
    expect(loop.canSubmit).toBe(true);
  });

  it("enables attribute toggles only once the mention is marked correct", async () => {
    const api = new StubApi();
    api.queue = [makeTask()];
    const loop = await started(api);
    loop.toggleNegated();
    loop.toggleTemporality();
    expect(loop.snapshot().form).toMatchObject({ negated: false, temporality: "recent" });
    loop.setCorrect(false);
    loop.toggleNegated();
    expect(loop.snapshot().form.negated).toBe(false);
    loop.setCorrect(true);
    loop.toggleNegated();
    loop.toggleTemporality();
    expect(loop.snapshot().form).toMatchObject({ negated: true, temporality: "historic" });
  });

  it("hands out defensive snapshot copies", async () => {
    const api = new StubApi();
    api.queue = [makeTask()];
    const loop = await started(api);
    const snap = loop.snapshot();
    snap.form.correct = true;
    expect(loop.snapshot().form.correct).toBeNull();
    if (snap.task !== null) snap.task.version = 99;
    expect(loop.snapshot().task?.version).toBe(0);
  });
});

describe("TaskLoop submission", () => {
  it("submits the captured verdict and advances to the next task", async () => {
    const api = new StubApi();
    api.queue = [makeTask(), makeTask({ doc_id: "doc2", chapter: "X" })];
    const loop = await started(api);
    loop.setCorrect(true);
    loop.toggleNegated();
    await loop.submit();
    expect(api.submitted).toEqual([
      {
        doc_id: "doc1",
        start: 12,
        end: 19,
        cui: "C0008354",
        annotator_id: "carol",
        correct: true,
        negated: true,
        temporality: "recent",
        timestamp: null,
        version: 0,
      },
    ]);
    const snap = loop.snapshot();
    expect(snap.task?.doc_id).toBe("doc2");
    expect(snap.done).toBe(1);
    expect(snap.annotatedChapters).toEqual(new Set(["I"]));
    expect(snap.form.correct).toBeNull(); // fresh form for the new task
  });

  it("never double-submits while a submission is in flight", async () => {
    const api = new StubApi();
    api.queue = [makeTask()];
    const loop = await started(api);
    loop.setCorrect(true);
    await Promise.all([loop.submit(), loop.submit()]);
    expect(api.submitted).toHaveLength(1);
  });

  it("reaches the all-done state after the final task", async () => {
    const api = new StubApi();
    api.queue = [makeTask()];
    const loop = await started(api);
    loop.setCorrect(false);
    await loop.submit();
    expect(loop.snapshot().phase).toBe("done");
    expect(loop.snapshot().done).toBe(1);
  });
});

describe("TaskLoop conflict handling", () => {
  it("keeps the form, adopts the stored version, and resubmits on demand", async () => {
    const api = new StubApi();
    api.queue = [makeTask()];
    const loop = await started(api);
    loop.setCorrect(true);
    loop.toggleNegated();
    api.failNextSubmit = new ApiError(409, "version-conflict", "stale verdict", 5);

    await loop.submit();
    const snap = loop.snapshot();
    expect(snap.phase).toBe("annotating");
    expect(snap.notice?.kind).toBe("conflict");
    expect(snap.form).toMatchObject({ correct: true, negated: true });
    expect(snap.task?.version).toBe(5);

    await loop.submit(); // the replay
    expect(api.submitted).toHaveLength(1);
    expect(api.submitted[0]?.version).toBe(5);
    expect(loop.snapshot().notice).toBeNull();
  });
});

describe("TaskLoop network failures", () => {
  it("keeps the pending verdict and retries the submission", async () => {
    const api = new StubApi();
    api.queue = [makeTask()];
    const loop = await started(api);
    loop.setCorrect(true);
    api.failNextSubmit = new TypeError("fetch failed");

    await loop.submit();
    const snap = loop.snapshot();
    expect(snap.phase).toBe("annotating");
    expect(snap.notice?.kind).toBe("network");
    expect(snap.form.correct).toBe(true); // no data loss
    expect(api.submitted).toHaveLength(0);

    await loop.retry();
    expect(api.submitted).toHaveLength(1);
    expect(api.submitted[0]?.correct).toBe(true);
    expect(loop.snapshot().notice).toBeNull();
  });

  it("retries a failed task fetch", async () => {
    const api = new StubApi();
    api.queue = [makeTask()];
    api.failNextLoad = new TypeError("fetch failed");
    const loop = new TaskLoop(api, "carol");
    await loop.start();
    expect(loop.snapshot().phase).toBe("failed");
    expect(loop.snapshot().notice?.kind).toBe("network");
    await loop.retry();
    expect(loop.snapshot().phase).toBe("annotating");
  });
});

describe("TaskLoop subscriptions", () => {
  it("emits a snapshot per state change and honours unsubscribe", async () => {
    const api = new StubApi();
    api.queue = [makeTask()];
    const loop = new TaskLoop(api, "carol");
    const phases: Snapshot["phase"][] = [];
    const unsubscribe = loop.subscribe((snap) => phases.push(snap.phase));
    await loop.start();
    expect(phases).toEqual(["loading", "annotating"]);
    unsubscribe();
    loop.setCorrect(true);
    expect(phases).toHaveLength(2);
  });
});
