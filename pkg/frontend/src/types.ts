export type Phase = 'adversarial' | 'clean';
export type Confidence = 'low' | 'high';

/** The ten classes a user can pick from; rendered on every page. */
export const CLASS_VOCABULARY = [
  'airplane',
  'automobile',
  'bird',
  'cat',
  'deer',
  'dog',
  'frog',
  'horse',
  'ship',
  'truck',
] as const;

export type ClassName = (typeof CLASS_VOCABULARY)[number];

/**
 * One corpus image in the manifest. The quiz shows the attacked payload in
 * the first phase and the untouched payload in the second; ground truth is
 * deliberately absent so the client cannot score anything.
 */
export interface ManifestEntry {
  image_id: string;
  adversarial_src: string;
  clean_src: string;
}

/** A single label record, in the exact shape the validity tooling ingests. */
export interface LabelRecord {
  condition: Phase;
  confidence: Confidence;
  image_id: string;
  predicted_class: string;
  user_id: string;
  user_kind: 'human';
}

export interface QuizSession {
  sessionId: string;
  userId: string;
  phase: Phase;
  /** Manifest order, shared by both phases. */
  entries: ManifestEntry[];
  /** Index into entries for the current phase. */
  cursor: number;
  /** Append-only; submissions can never be edited or removed. */
  responses: LabelRecord[];
}

/** Raised when a session cannot be constructed at all. */
export class SetupError extends Error {}

/** Raised when a submission is refused; the session is left unchanged. */
export class SubmissionRejected extends Error {}

export const BATCH_SIZE = 100;
