import { describe, expect, it } from 'vitest';

import {
  batchSizes,
  currentEntry,
  exportRecords,
  isComplete,
  loadManifest,
  startSession,
  submitLabel,
} from '../src/session.js';
import { MemoryStore, resumeOrStart, saveSession } from '../src/storage.js';
import {
  CLASS_VOCABULARY,
  ManifestEntry,
  QuizSession,
  SetupError,
  SubmissionRejected,
} from '../src/types.js';

function manifestOf(n: number): ManifestEntry[] {
  return Array.from({ length: n }, (_, i) => ({
    image_id: `img-${String(i).padStart(4, '0')}`,
    adversarial_src: `images/adv/${i}.png`,
    clean_src: `images/clean/${i}.png`,
  }));
}

function answer(session: QuizSession, cls = 'dog'): QuizSession {
  const entry = currentEntry(session);
  if (entry === null) throw new Error('no current entry');
  return submitLabel(session, entry.image_id, cls, 'low');
}

function snapshot(session: QuizSession): string {
  return JSON.stringify(session);
}

describe('manifest loading', () => {
  it('accepts a well-formed document', () => {
    const doc = manifestOf(3).map((e) => ({ ...e }));
    expect(loadManifest(doc)).toHaveLength(3);
  });

  it('rejects an empty manifest', () => {
    expect(() => loadManifest([])).toThrow(SetupError);
    expect(() => startSession('u1', [])).toThrow(SetupError);
  });

  it('rejects duplicates and missing fields', () => {
    const twice = [...manifestOf(1), ...manifestOf(1)];
    expect(() => loadManifest(twice)).toThrow(/repeats/);
    expect(() => loadManifest([{ image_id: 'a', adversarial_src: 'x' }])).toThrow(
      /clean_src/,
    );
  });
});

describe('batching', () => {
  it('splits 250 images into batches of 100, 100, 50', () => {
    const session = startSession('u1', manifestOf(250));
    expect(batchSizes(session)).toEqual([100, 100, 50]);
  });

  it('keeps a short corpus in one batch', () => {
    expect(batchSizes(startSession('u1', manifestOf(7)))).toEqual([7]);
    expect(batchSizes(startSession('u1', manifestOf(100)))).toEqual([100]);
  });
});

describe('submission state machine', () => {
  it('starts at cursor 0 in the adversarial phase', () => {
    const session = startSession('u1', manifestOf(5));
    expect(session.phase).toBe('adversarial');
    expect(session.cursor).toBe(0);
    expect(session.responses).toEqual([]);
  });

  it('a valid submission appends one record and advances by 1', () => {
    const session = startSession('u1', manifestOf(5));
    answer(session, 'cat');
    expect(session.cursor).toBe(1);
    expect(session.responses).toHaveLength(1);
    expect(session.responses[0]).toEqual({
      condition: 'adversarial',
      confidence: 'low',
      image_id: 'img-0000',
      predicted_class: 'cat',
      user_id: 'u1',
      user_kind: 'human',
    });
  });

  it('rejects a class outside the vocabulary without state change', () => {
    const session = startSession('u1', manifestOf(5));
    const before = snapshot(session);
    expect(() => submitLabel(session, 'img-0000', 'zebra', 'high')).toThrow(
      SubmissionRejected,
    );
    expect(snapshot(session)).toBe(before);
  });

  it('rejects out-of-order submissions without state change', () => {
    const session = startSession('u1', manifestOf(5));
    const before = snapshot(session);
    expect(() => submitLabel(session, 'img-0003', 'dog', 'low')).toThrow(
      SubmissionRejected,
    );
    expect(snapshot(session)).toBe(before);
  });

  it('rejects a bad confidence value', () => {
    const session = startSession('u1', manifestOf(5));
    expect(() =>
      submitLabel(session, 'img-0000', 'dog', 'medium' as never),
    ).toThrow(SubmissionRejected);
  });

  it('never edits earlier responses', () => {
    const session = startSession('u1', manifestOf(3));
    answer(session, 'dog');
    const first = snapshot(session).length;
    answer(session, 'cat');
    answer(session, 'bird');
    expect(session.responses.map((r) => r.predicted_class)).toEqual([
      'dog',
      'cat',
      'bird',
    ]);
    expect(snapshot(session).length).toBeGreaterThan(first);
  });
});

describe('phase order', () => {
  it('flips to clean only after the last adversarial image', () => {
    const session = startSession('u1', manifestOf(5));
    for (let i = 0; i < 4; i++) {
      answer(session);
      expect(session.phase).toBe('adversarial');
    }
    answer(session);
    expect(session.phase).toBe('clean');
    expect(session.cursor).toBe(0);
  });

  it('records the phase it was in at submission time', () => {
    const session = startSession('u1', manifestOf(2));
    answer(session);
    answer(session);
    answer(session);
    expect(session.responses.map((r) => r.condition)).toEqual([
      'adversarial',
      'adversarial',
      'clean',
    ]);
  });

  it('completes after both phases and then refuses further answers', () => {
    const session = startSession('u1', manifestOf(2));
    for (let i = 0; i < 4; i++) answer(session);
    expect(isComplete(session)).toBe(true);
    expect(() => submitLabel(session, 'img-0000', 'dog', 'low')).toThrow(
      SubmissionRejected,
    );
  });
});

describe('export', () => {
  it('refuses to export an empty session', () => {
    const session = startSession('u1', manifestOf(2));
    expect(() => exportRecords(session)).toThrow(/no responses/);
  });

  it('writes one line with all six fields for one response', () => {
    const session = startSession('u1', manifestOf(2));
    answer(session, 'ship');
    const out = exportRecords(session);
    const lines = out.split('\n').filter((l) => l !== '');
    expect(lines).toHaveLength(1);
    const record = JSON.parse(lines[0]);
    expect(Object.keys(record).sort()).toEqual([
      'condition',
      'confidence',
      'image_id',
      'predicted_class',
      'user_id',
      'user_kind',
    ]);
  });

  it('exports one record per response, in order, and is idempotent', () => {
    const session = startSession('u1', manifestOf(3));
    for (const cls of ['dog', 'cat', 'frog']) answer(session, cls);
    const first = exportRecords(session);
    expect(first.split('\n').filter((l) => l !== '')).toHaveLength(
      session.responses.length,
    );
    expect(exportRecords(session)).toBe(first);
  });
});

describe('persistence', () => {
  it('round-trips cursor and responses through a store', () => {
    const store = new MemoryStore();
    const entries = manifestOf(10);
    const session = startSession('u1', entries);
    answer(session, 'dog');
    answer(session, 'cat');
    saveSession(store, session);

    const resumed = resumeOrStart(store, 'u1', entries);
    expect(resumed.cursor).toBe(2);
    expect(resumed.phase).toBe('adversarial');
    expect(resumed.responses).toEqual(session.responses);
    expect(resumed.sessionId).toBe(session.sessionId);
  });

  it('starts fresh when the corpus differs', () => {
    const store = new MemoryStore();
    const session = startSession('u1', manifestOf(4));
    answer(session);
    saveSession(store, session);
    const other = resumeOrStart(store, 'u1', manifestOf(6));
    expect(other.cursor).toBe(0);
    expect(other.responses).toEqual([]);
  });

  it('gives two users independent sessions over the same image order', () => {
    const store = new MemoryStore();
    const entries = manifestOf(8);
    const a = resumeOrStart(store, 'user-a', entries);
    const b = resumeOrStart(store, 'user-b', entries);
    answer(a, 'dog');
    expect(b.cursor).toBe(0);
    expect(a.entries.map((e) => e.image_id)).toEqual(b.entries.map((e) => e.image_id));
  });
});

describe('vocabulary', () => {
  it('has exactly ten classes and accepts each of them', () => {
    expect(CLASS_VOCABULARY).toHaveLength(10);
    const session = startSession('u1', manifestOf(10));
    for (const cls of CLASS_VOCABULARY) answer(session, cls);
    expect(session.responses.map((r) => r.predicted_class)).toEqual([
      ...CLASS_VOCABULARY,
    ]);
  });
});
