import {
  BATCH_SIZE,
  CLASS_VOCABULARY,
  Confidence,
  LabelRecord,
  ManifestEntry,
  QuizSession,
  SetupError,
  SubmissionRejected,
} from './types.js';

/** Parse and validate a manifest document (the JSON file as loaded). */
export function loadManifest(doc: unknown): ManifestEntry[] {
  if (!Array.isArray(doc)) {
    throw new SetupError('manifest must be a JSON array');
  }
  if (doc.length === 0) {
    throw new SetupError('manifest is empty');
  }
  const seen = new Set<string>();
  return doc.map((raw, i) => {
    if (typeof raw !== 'object' || raw === null) {
      throw new SetupError(`manifest entry ${i} is not an object`);
    }
    const entry = raw as Record<string, unknown>;
    for (const field of ['image_id', 'adversarial_src', 'clean_src']) {
      if (typeof entry[field] !== 'string' || entry[field] === '') {
        throw new SetupError(`manifest entry ${i}: missing ${field}`);
      }
    }
    const imageId = entry.image_id as string;
    if (seen.has(imageId)) {
      throw new SetupError(`manifest repeats image_id ${imageId}`);
    }
    seen.add(imageId);
    return {
      image_id: imageId,
      adversarial_src: entry.adversarial_src as string,
      clean_src: entry.clean_src as string,
    };
  });
}

export function startSession(userId: string, entries: ManifestEntry[]): QuizSession {
  if (userId === '') {
    throw new SetupError('userId must be non-empty');
  }
  if (entries.length === 0) {
    throw new SetupError('manifest is empty');
  }
  return {
    sessionId: newSessionId(),
    userId,
    phase: 'adversarial',
    entries: [...entries],
    cursor: 0,
    responses: [],
  };
}

function newSessionId(): string {
  if (typeof crypto !== 'undefined' && 'randomUUID' in crypto) {
    return crypto.randomUUID();
  }
  return `s-${Date.now()}-${Math.floor(Math.random() * 1e9)}`;
}

/** Per-phase batch sizes, e.g. 250 images -> [100, 100, 50]. */
export function batchSizes(session: QuizSession): number[] {
  const sizes: number[] = [];
  for (let n = session.entries.length; n > 0; n -= BATCH_SIZE) {
    sizes.push(Math.min(n, BATCH_SIZE));
  }
  return sizes;
}

export function batchIndex(session: QuizSession): number {
  return Math.floor(session.cursor / BATCH_SIZE);
}

export function currentBatch(session: QuizSession): ManifestEntry[] {
  const start = batchIndex(session) * BATCH_SIZE;
  return session.entries.slice(start, start + BATCH_SIZE);
}

export function currentEntry(session: QuizSession): ManifestEntry | null {
  return session.entries[session.cursor] ?? null;
}

export function isComplete(session: QuizSession): boolean {
  return session.phase === 'clean' && session.cursor >= session.entries.length;
}

/**
 * Record one answer and advance. The submitted image must be the one at the
 * cursor, the class must be in the vocabulary, and a rejected submission
 * leaves the session exactly as it was. Finishing the last adversarial
 * batch moves the quiz into the clean phase; the reverse never happens.
 */
export function submitLabel(
  session: QuizSession,
  imageId: string,
  predictedClass: string,
  confidence: Confidence,
): QuizSession {
  if (isComplete(session)) {
    throw new SubmissionRejected('session is already complete');
  }
  const entry = currentEntry(session);
  if (entry === null || entry.image_id !== imageId) {
    throw new SubmissionRejected(
      `out-of-order submission: expected ${entry?.image_id ?? 'none'}, got ${imageId}`,
    );
  }
  if (!(CLASS_VOCABULARY as readonly string[]).includes(predictedClass)) {
    throw new SubmissionRejected(`class ${predictedClass} is not in the vocabulary`);
  }
  if (confidence !== 'low' && confidence !== 'high') {
    throw new SubmissionRejected(`confidence must be low or high, got ${confidence}`);
  }
  const record: LabelRecord = {
    condition: session.phase,
    confidence,
    image_id: imageId,
    predicted_class: predictedClass,
    user_id: session.userId,
    user_kind: 'human',
  };
  session.responses.push(record);
  session.cursor += 1;
  if (session.phase === 'adversarial' && session.cursor >= session.entries.length) {
    session.phase = 'clean';
    session.cursor = 0;
  }
  return session;
}

/**
 * Serialize all responses as JSON Lines in the validity tooling's label
 * record shape. Field order is fixed so re-exporting is byte-identical.
 */
export function exportRecords(session: QuizSession): string {
  if (session.responses.length === 0) {
    throw new SetupError('nothing to export: session has no responses');
  }
  const lines = session.responses.map(formatRecord);
  return lines.join('\n') + '\n';
}

function formatRecord(r: LabelRecord): string {
  return JSON.stringify({
    condition: r.condition,
    confidence: r.confidence,
    image_id: r.image_id,
    predicted_class: r.predicted_class,
    user_id: r.user_id,
    user_kind: r.user_kind,
  });
}

/** Count of responses per phase, for progress display and sanity checks. */
export function responseTally(session: QuizSession): { adversarial: number; clean: number } {
  let adversarial = 0;
  let clean = 0;
  for (const r of session.responses) {
    if (r.condition === 'adversarial') adversarial += 1;
    else clean += 1;
  }
  return { adversarial, clean };
}
