/** DOM rendering for the annotation screen.
 *
 * The mention highlight is derived solely from the server-provided
 * offsets into the current sentence — the client never recomputes or
 * edits spans.  All text lands via textContent, never innerHTML.
 */

import type { Snapshot } from "./taskloop.js";
import type { AgreementReport, Task } from "./types.js";

/** ICD-10 chapter identifiers in chapter order. */
export const CHAPTER_ORDER: readonly string[] = [
  "I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X", "XI",
  "XII", "XIII", "XIV", "XV", "XVI", "XVII", "XVIII", "XIX", "XX", "XXI", "XXII",
];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** The three-sentence context block with the mention highlighted. */
export function renderContext(task: Task): HTMLElement {
  const box = el("div", "context");
  if (task.context.prior !== null) {
    box.appendChild(el("p", "context-prior", task.context.prior));
  }
  const current = el("p", "context-current");
  const { start, end } = task.highlight;
  current.appendChild(document.createTextNode(task.context.current.slice(0, start)));
  const mark = el("mark", "mention-highlight", task.context.current.slice(start, end));
  current.appendChild(mark);
  current.appendChild(document.createTextNode(task.context.current.slice(end)));
  box.appendChild(current);
  if (task.context.next !== null) {
    box.appendChild(el("p", "context-next", task.context.next));
  }
  return box;
}

export interface ControlHandlers {
  onCorrect: (value: boolean) => void;
  onToggleNegated: () => void;
  onToggleTemporality: () => void;
  onSubmit: () => void;
}

/** Verdict controls.  Attribute controls unlock once correct === true;
 * submit unlocks once correct is chosen at all. */
export function renderControls(snapshot: Snapshot, handlers: ControlHandlers): HTMLElement {
  const { form } = snapshot;
  const box = el("div", "controls");

  const yes = el("button", "correct-yes", "Correct (y)");
  yes.setAttribute("aria-pressed", String(form.correct === true));
  yes.addEventListener("click", () => handlers.onCorrect(true));
  const no = el("button", "correct-no", "Incorrect (n)");
  no.setAttribute("aria-pressed", String(form.correct === false));
  no.addEventListener("click", () => handlers.onCorrect(false));
  box.append(yes, no);

  const attrsEnabled = form.correct === true;

  const negated = el("button", "toggle-negated", `Negated: ${form.negated ? "yes" : "no"} (g)`);
  negated.disabled = !attrsEnabled;
  negated.setAttribute("aria-pressed", String(form.negated));
  negated.addEventListener("click", handlers.onToggleNegated);
  box.appendChild(negated);

  const temporality = el("button", "toggle-temporality", `Temporality: ${form.temporality} (h)`);
  temporality.disabled = !attrsEnabled;
  temporality.addEventListener("click", handlers.onToggleTemporality);
  box.appendChild(temporality);

  const submit = el("button", "submit", "Submit (Enter)");
  submit.disabled = !(snapshot.phase === "annotating" && form.correct !== null);
  submit.addEventListener("click", handlers.onSubmit);
  box.appendChild(submit);

  return box;
}

export function renderMentionHeader(task: Task): HTMLElement {
  const head = el("div", "mention-head");
  head.appendChild(el("span", "preferred-term", task.preferred_term));
  head.appendChild(
    el("span", "concept-ids", `${task.cui} · ${task.icd_code} · chapter ${task.chapter}`),
  );
  return head;
}

export function renderProgress(snapshot: Snapshot): HTMLElement {
  const total = snapshot.done + snapshot.remaining;
  return el("div", "progress", `${snapshot.done} / ${total} annotated`);
}

export function renderDone(snapshot: Snapshot): HTMLElement {
  const box = el("div", "all-done");
  box.appendChild(el("h2", undefined, "All done"));
  box.appendChild(el("p", undefined, `${snapshot.done} mentions annotated.`));
  return box;
}

export function renderNotice(snapshot: Snapshot, onRetry: () => void): HTMLElement | null {
  if (snapshot.notice === null) return null;
  const banner = el("div", `banner banner-${snapshot.notice.kind}`);
  banner.appendChild(el("span", "banner-message", snapshot.notice.message));
  if (snapshot.notice.kind === "network") {
    const retry = el("button", "retry", "Retry");
    retry.addEventListener("click", onRetry);
    banner.appendChild(retry);
  }
  return banner;
}

/** Per-chapter κ table.
 *
 * A chapter the report covers shows its κ.  A chapter with no computable
 * κ in the report but with verdicts submitted this session shows "n/a"
 * (κ is undefined there so far — e.g. unanimous agreement).  Chapters
 * without any data show "—", never 0.
 */
export function renderAgreementPanel(
  report: AgreementReport,
  annotatedChapters: ReadonlySet<string>,
): HTMLElement {
  const byChapter = new Map(report.chapters.map((entry) => [entry.chapter, entry]));
  const panel = el("div", "agreement");
  panel.appendChild(el("h2", undefined, "Agreement"));
  const table = el("table");
  const body = el("tbody");
  for (const chapter of CHAPTER_ORDER) {
    const row = el("tr");
    row.appendChild(el("th", undefined, chapter));
    const cell = el("td", "kappa-cell");
    const entry = byChapter.get(chapter);
    if (entry !== undefined) {
      cell.textContent = entry.kappa.toFixed(2);
    } else if (annotatedChapters.has(chapter)) {
      cell.textContent = "n/a";
      cell.title = "κ is undefined for this chapter so far (no annotator variation)";
    } else {
      cell.textContent = "—";
    }
    row.appendChild(cell);
    body.appendChild(row);
  }
  table.appendChild(body);
  panel.appendChild(table);
  const overall = el(
    "div",
    "overall-kappa",
    report.overall === null ? "overall: —" : `overall: ${report.overall.toFixed(2)}`,
  );
  panel.appendChild(overall);
  return panel;
}

/** Render one full snapshot into the mount point. */
export function renderApp(
  mount: HTMLElement,
  snapshot: Snapshot,
  handlers: ControlHandlers & { onRetry: () => void },
): void {
  mount.replaceChildren();
  const banner = renderNotice(snapshot, handlers.onRetry);
  if (banner !== null) mount.appendChild(banner);
  if (snapshot.phase === "done") {
    mount.appendChild(renderDone(snapshot));
    mount.appendChild(renderProgress(snapshot));
    return;
  }
  if (snapshot.task !== null) {
    mount.appendChild(renderMentionHeader(snapshot.task));
    mount.appendChild(renderContext(snapshot.task));
    mount.appendChild(renderControls(snapshot, handlers));
  } else if (snapshot.phase === "loading" || snapshot.phase === "idle") {
    mount.appendChild(el("p", "loading", "Loading…"));
  }
  mount.appendChild(renderProgress(snapshot));
}
