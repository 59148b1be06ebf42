/** Keyboard shortcuts: y/n verdict, g negated, h historic, Enter submit. */

import type { TaskLoop } from "./taskloop.js";

export type Action =
  | "correct-yes"
  | "correct-no"
  | "toggle-negated"
  | "toggle-temporality"
  | "submit";

interface KeyEventLike {
  key: string;
  target?: unknown;
  ctrlKey?: boolean;
  metaKey?: boolean;
  altKey?: boolean;
}

function isTypingTarget(target: unknown): boolean {
  return (
    typeof HTMLElement !== "undefined" &&
    target instanceof HTMLElement &&
    (target.tagName === "INPUT" || target.tagName === "TEXTAREA" || target.isContentEditable)
  );
}

/** Map a keydown to an annotator action, or null when it isn't a shortcut. */
export function actionForKey(event: KeyEventLike): Action | null {
  if (event.ctrlKey || event.metaKey || event.altKey) return null;
  if (isTypingTarget(event.target)) return null;
  switch (event.key) {
    case "y":
    case "Y":
      return "correct-yes";
    case "n":
    case "N":
      return "correct-no";
    case "g":
    case "G":
      return "toggle-negated";
    case "h":
    case "H":
      return "toggle-temporality";
    case "Enter":
      return "submit";
    default:
      return null;
  }
}

export function applyAction(loop: TaskLoop, action: Action): void {
  switch (action) {
    case "correct-yes":
      loop.setCorrect(true);
      break;
    case "correct-no":
      loop.setCorrect(false);
      break;
    case "toggle-negated":
      loop.toggleNegated();
      break;
    case "toggle-temporality":
      loop.toggleTemporality();
      break;
    case "submit":
      void loop.submit();
      break;
  }
}

/** Attach the shortcut handler; returns the detach function. */
export function bindShortcuts(loop: TaskLoop, target: EventTarget): () => void {
  const handler = (event: Event) => {
    const action = actionForKey(event as unknown as KeyEventLike);
    if (action === null) return;
    (event as KeyboardEvent).preventDefault?.();
    applyAction(loop, action);
  };
  target.addEventListener("keydown", handler);
  return () => target.removeEventListener("keydown", handler);
}
