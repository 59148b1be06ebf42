/** Round-trip tests against a live annotation service.
 *
 * Skipped unless COMORBID_SERVICE_URL points at a running service — start
 * one with scripts/integration.sh, which serves the 50-mention agreement
 * fixture (alice/bob pre-seeded, chapter I kappa exactly 0.4).
 *
 * The session test drives the real UI: snapshots render into a DOM mount,
 * and every annotator action arrives as a keyboard event.
 */
import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { bindShortcuts } from "../src/keyboard.js";
import { renderAgreementPanel, renderApp } from "../src/render.js";
import { TaskLoop, type Snapshot } from "../src/taskloop.js";
import type { Temporality } from "../src/types.js";

const serviceUrl = process.env.COMORBID_SERVICE_URL ?? "";

function press(key: string): void {
  window.dispatchEvent(new KeyboardEvent("keydown", { key, bubbles: true, cancelable: true }));
}

function waitFor(
  loop: TaskLoop,
  predicate: (snapshot: Snapshot) => boolean,
  label: string,
  timeoutMs = 15000,
): Promise<Snapshot> {
  return new Promise((resolve, reject) => {
    const timer = setTimeout(() => {
      unsubscribe();
      reject(new Error(`timed out waiting for ${label}`));
    }, timeoutMs);
    const settle = (snapshot: Snapshot) => {
      clearTimeout(timer);
      unsubscribe();
      resolve(snapshot);
    };
    const unsubscribe = loop.subscribe((snapshot) => {
      if (predicate(snapshot)) settle(snapshot);
    });
    const current = loop.snapshot();
    if (predicate(current)) settle(current);
  });
}

interface Plan {
  correct: boolean;
  negated: boolean;
  temporality: Temporality;
}

// Ten varied verdicts covering every control path (accept, reject,
// negation toggle, temporality toggle, both).
const PLANS: Plan[] = [
  { correct: true, negated: false, temporality: "recent" },
  { correct: false, negated: false, temporality: "recent" },
  { correct: true, negated: true, temporality: "recent" },
  { correct: true, negated: false, temporality: "historic" },
  { correct: true, negated: true, temporality: "historic" },
  { correct: false, negated: false, temporality: "recent" },
  { correct: true, negated: false, temporality: "recent" },
  { correct: true, negated: true, temporality: "recent" },
  { correct: false, negated: false, temporality: "recent" },
  { correct: true, negated: false, temporality: "historic" },
];

interface ExpectedRecord {
  doc_id: string;
  start: number;
  end: number;
  cui: string;
  correct: boolean;
  negated: boolean;
  temporality: Temporality;
}

describe.runIf(serviceUrl !== "")("live annotation service", () => {
  const client = new ApiClient(serviceUrl);
  // Filled by the session test, checked field-for-field by the export test.
  const submitted: ExpectedRecord[] = [];

  it("renders the fixture agreement before this session adds verdicts", { timeout: 30000 }, async () => {
    const report = await client.agreement();
    const chapterI = report.chapters.find((entry) => entry.chapter === "I");
    expect(chapterI?.kappa).toBeCloseTo(0.4, 9);

    const panel = renderAgreementPanel(report, new Set());
    const cells = new Map(
      [...panel.querySelectorAll("tr")].map((row) => [
        row.querySelector("th")?.textContent,
        row.querySelector("td")?.textContent,
      ]),
    );
    expect(cells.get("I")).toBe("0.40");
    expect(cells.get("II")).toBe("—");
  });

  it("completes ten annotation tasks through the rendered UI", { timeout: 120000 }, async () => {
    const mount = document.createElement("div");
    document.body.appendChild(mount);
    const loop = new TaskLoop(client, "carol");
    const handlers = {
      onCorrect: (value: boolean) => loop.setCorrect(value),
      onToggleNegated: () => loop.toggleNegated(),
      onToggleTemporality: () => loop.toggleTemporality(),
      onSubmit: () => void loop.submit(),
      onRetry: () => void loop.retry(),
    };
    const unsubscribe = loop.subscribe((snapshot) => renderApp(mount, snapshot, handlers));
    const detach = bindShortcuts(loop, window);
    try {
      await loop.start();

      for (const [index, plan] of PLANS.entries()) {
        const snapshot = await waitFor(
          loop,
          (s) => s.phase === "annotating" && s.done === index,
          `task ${index + 1}`,
        );
        const task = snapshot.task;
        if (task === null) throw new Error(`no task at step ${index + 1}`);

        // The mention is on screen, highlighted from the server offsets.
        const mark = mount.querySelector("mark.mention-highlight");
        expect(mark?.textContent).toBe(task.matched_text);

        press(plan.correct ? "y" : "n");
        if (plan.correct && plan.negated) press("g");
        if (plan.correct && plan.temporality === "historic") press("h");
        submitted.push({
          doc_id: task.doc_id,
          start: task.start,
          end: task.end,
          cui: task.cui,
          correct: plan.correct,
          // A rejected mention keeps the untouched suggested attributes.
          negated: plan.correct ? plan.negated : false,
          temporality: plan.correct ? plan.temporality : "recent",
        });
        press("Enter");
        await waitFor(loop, (s) => s.done === index + 1, `submission ${index + 1}`);
      }

      const final = await waitFor(loop, (s) => s.phase === "annotating", "post-session task");
      expect(final.done).toBe(10);
      expect(final.remaining).toBe(40);
      expect(mount.querySelector(".progress")?.textContent).toBe("10 / 50 annotated");
    } finally {
      detach();
      unsubscribe();
      mount.remove();
    }
  });

  it("reports the session in the progress endpoint", { timeout: 30000 }, async () => {
    const progress = await client.progress("carol");
    expect(progress).toEqual({ annotator: "carol", done: 10, remaining: 40, total: 50 });
  });

  it("exports the submitted verdicts field-for-field", { timeout: 30000 }, async () => {
    expect(submitted).toHaveLength(10);
    const response = await client.exportRecords();
    const carol = response.records.filter((record) => record.annotator_id === "carol");
    expect(carol).toHaveLength(10);

    const byKey = new Map(
      carol.map((record) => [
        `${record.doc_id}:${record.start}:${record.end}:${record.cui}`,
        record,
      ]),
    );
    for (const expected of submitted) {
      const key = `${expected.doc_id}:${expected.start}:${expected.end}:${expected.cui}`;
      const record = byKey.get(key);
      if (record === undefined) throw new Error(`no exported record for ${key}`);
      expect(record.annotator_id).toBe("carol");
      expect(record.correct).toBe(expected.correct);
      expect(record.negated).toBe(expected.negated);
      expect(record.temporality).toBe(expected.temporality);
      // The service stamps submissions sent without a client timestamp.
      expect(Number.isNaN(Date.parse(record.timestamp))).toBe(false);
    }
  });

  it("resolves a concurrent-edit conflict by resubmitting", { timeout: 60000 }, async () => {
    const first = new TaskLoop(client, "dave");
    const second = new TaskLoop(client, "dave");
    await first.start();
    await second.start();
    const held = first.snapshot().task;
    expect(held).not.toBeNull();
    expect(second.snapshot().task?.doc_id).toBe(held?.doc_id);

    second.setCorrect(true);
    await second.submit(); // wins the slot

    first.setCorrect(false);
    await first.submit(); // stale version: rejected, not lost
    const conflicted = first.snapshot();
    expect(conflicted.phase).toBe("annotating");
    expect(conflicted.notice?.kind).toBe("conflict");
    expect(conflicted.form.correct).toBe(false);
    expect(conflicted.task?.version).toBeGreaterThan(held?.version ?? 0);

    await first.submit(); // deliberate overwrite at the adopted version
    expect(first.snapshot().notice).toBeNull();

    const progress = await client.progress("dave");
    expect(progress.done).toBe(1); // both writes hit the same mention
  });
});

describe.runIf(serviceUrl === "")("live annotation service", () => {
  it.skip("requires COMORBID_SERVICE_URL (run scripts/integration.sh)", () => {});
});
