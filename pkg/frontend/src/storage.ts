import { ManifestEntry, QuizSession } from './types.js';
import { startSession } from './session.js';

/** Minimal key-value store so tests can swap localStorage out. */
export interface SessionStore {
  get(key: string): string | null;
  set(key: string, value: string): void;
  remove(key: string): void;
}

export class MemoryStore implements SessionStore {
  private data = new Map<string, string>();

  get(key: string): string | null {
    return this.data.get(key) ?? null;
  }

  set(key: string, value: string): void {
    this.data.set(key, value);
  }

  remove(key: string): void {
    this.data.delete(key);
  }
}

export function browserStore(): SessionStore {
  return {
    get: (key) => window.localStorage.getItem(key),
    set: (key, value) => window.localStorage.setItem(key, value),
    remove: (key) => window.localStorage.removeItem(key),
  };
}

function storageKey(userId: string): string {
  return `quiz-session:${userId}`;
}

/** Called after every accepted submission so an interrupted tab can resume. */
export function saveSession(store: SessionStore, session: QuizSession): void {
  store.set(storageKey(session.userId), JSON.stringify(session));
}

export function clearSession(store: SessionStore, userId: string): void {
  store.remove(storageKey(userId));
}

/**
 * Restore the saved session for this user if it covers the same corpus,
 * otherwise start fresh. Payload paths are taken from the current manifest
 * so a re-deploy of the image files does not invalidate progress.
 */
export function resumeOrStart(
  store: SessionStore,
  userId: string,
  entries: ManifestEntry[],
): QuizSession {
  const raw = store.get(storageKey(userId));
  if (raw !== null) {
    try {
      const saved = JSON.parse(raw) as QuizSession;
      const sameCorpus =
        Array.isArray(saved.entries) &&
        saved.entries.length === entries.length &&
        saved.entries.every((e, i) => e.image_id === entries[i].image_id);
      if (sameCorpus) {
        return { ...saved, entries: [...entries] };
      }
    } catch {
      // fall through to a fresh session on any malformed saved state
    }
  }
  return startSession(userId, entries);
}
