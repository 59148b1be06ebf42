/** Wire types for the annotation service API (see docs/api.md). */

export type Temporality = "recent" | "historic";

export interface TaskContext {
  /** Sentence before the mention's sentence, or null at the document start. */
  prior: string | null;
  /** The sentence containing the mention. */
  current: string;
  /** Sentence after, or null at the document end. */
  next: string | null;
}

export interface Highlight {
  /** Mention offsets within `context.current` (end exclusive). */
  start: number;
  end: number;
}

export interface Suggested {
  negated: boolean | null;
  temporality: Temporality | null;
}

export interface Task {
  doc_id: string;
  start: number;
  end: number;
  cui: string;
  icd_code: string;
  chapter: string;
  preferred_term: string;
  matched_text: string;
  sentence_index: number;
  context: TaskContext;
  highlight: Highlight;
  suggested: Suggested;
  version: number;
}

export interface NextTaskResponse {
  task: Task | null;
  done: number;
  remaining: number;
}

export interface Verdict {
  doc_id: string;
  start: number;
  end: number;
  cui: string;
  annotator_id: string;
  correct: boolean;
  negated: boolean;
  temporality: Temporality;
  timestamp: string | null;
  version: number;
}

export interface SubmitResponse {
  version: number;
}

export interface AgreementPair {
  a: string;
  b: string;
  kappa: number;
}

export interface AgreementChapter {
  chapter: string;
  kappa: number;
  pairs: AgreementPair[];
}

export interface AgreementReport {
  chapters: AgreementChapter[];
  overall: number | null;
}

export interface Progress {
  annotator: string;
  done: number;
  remaining: number;
  total: number;
}

export interface ExportedRecord {
  doc_id: string;
  start: number;
  end: number;
  cui: string;
  annotator_id: string;
  correct: boolean;
  negated: boolean;
  temporality: Temporality;
  timestamp: string;
}

export interface ExportResponse {
  records: ExportedRecord[];
}
