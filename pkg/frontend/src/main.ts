/** Boot: annotator sign-in, task loop wiring, agreement side panel. */

import { ApiClient } from "./api.js";
import { bindShortcuts } from "./keyboard.js";
import { renderAgreementPanel, renderApp } from "./render.js";
import { TaskLoop } from "./taskloop.js";

function serviceBase(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("service") ?? window.location.origin;
}

async function refreshAgreement(
  api: ApiClient,
  panelMount: HTMLElement,
  annotated: ReadonlySet<string>,
): Promise<void> {
  try {
    const report = await api.agreement();
    panelMount.replaceChildren(renderAgreementPanel(report, annotated));
  } catch {
    // The panel is advisory; leave the previous contents on failure.
  }
}

function startSession(annotatorId: string, root: HTMLElement): void {
  const api = new ApiClient(serviceBase());
  const loop = new TaskLoop(api, annotatorId);

  root.replaceChildren();
  const taskMount = document.createElement("main");
  taskMount.id = "task";
  const panelMount = document.createElement("aside");
  panelMount.id = "panel";
  root.append(taskMount, panelMount);

  const handlers = {
    onCorrect: (value: boolean) => loop.setCorrect(value),
    onToggleNegated: () => loop.toggleNegated(),
    onToggleTemporality: () => loop.toggleTemporality(),
    onSubmit: () => void loop.submit(),
    onRetry: () => void loop.retry(),
  };

  let lastDone = -1;
  loop.subscribe((snapshot) => {
    renderApp(taskMount, snapshot, handlers);
    if (snapshot.done !== lastDone) {
      lastDone = snapshot.done;
      void refreshAgreement(api, panelMount, snapshot.annotatedChapters);
    }
  });
  bindShortcuts(loop, window);
  void loop.start();
}

function renderSignIn(root: HTMLElement): void {
  const form = document.createElement("form");
  form.id = "sign-in";
  const label = document.createElement("label");
  label.textContent = "Annotator id: ";
  const input = document.createElement("input");
  input.name = "annotator";
  input.autofocus = true;
  label.appendChild(input);
  const button = document.createElement("button");
  button.type = "submit";
  button.textContent = "Start";
  form.append(label, button);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const id = input.value.trim();
    if (id) startSession(id, root);
  });
  root.replaceChildren(form);
}

export function boot(): void {
  const root = document.getElementById("app");
  if (root === null) throw new Error("missing #app mount point");
  renderSignIn(root);
}

if (typeof document !== "undefined" && document.getElementById("app") !== null) {
  boot();
}
