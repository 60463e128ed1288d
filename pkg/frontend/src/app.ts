import { Confidence, SubmissionRejected } from './types.js';
import { exportRecords, loadManifest, submitLabel } from './session.js';
import { browserStore, clearSession, saveSession, resumeOrStart } from './storage.js';
import { renderPage } from './render.js';

// Static-hosting entry point: fetch the manifest, resume or start a session
// for the user named in the query string, and re-render after each answer.

async function main(): Promise<void> {
  const root = document.getElementById('quiz');
  if (root === null) {
    return;
  }
  const userId = new URLSearchParams(window.location.search).get('user') ?? '';
  if (userId === '') {
    root.innerHTML = '<p>Add ?user=&lt;your id&gt; to the address to begin.</p>';
    return;
  }
  const response = await fetch('manifest.json');
  const entries = loadManifest(await response.json());
  const store = browserStore();
  const session = resumeOrStart(store, userId, entries);

  let chosenClass: string | null = null;
  let chosenConfidence: Confidence | null = null;

  const redraw = () => {
    chosenClass = null;
    chosenConfidence = null;
    root.innerHTML = renderPage(session);
  };

  root.addEventListener('click', (event) => {
    const target = event.target as HTMLElement;
    if (target.matches('.class-choice')) {
      chosenClass = target.dataset.class ?? null;
      root.querySelectorAll('.class-choice').forEach((el) => {
        el.classList.toggle('selected', el === target);
      });
    } else if (target.matches('.quiz-submit')) {
      const imageId = root.querySelector<HTMLElement>('.quiz-page')?.dataset.imageId;
      if (imageId === undefined || chosenClass === null || chosenConfidence === null) {
        return;
      }
      try {
        submitLabel(session, imageId, chosenClass, chosenConfidence);
      } catch (err) {
        if (err instanceof SubmissionRejected) {
          redraw();
          return;
        }
        throw err;
      }
      saveSession(store, session);
      redraw();
    } else if (target.matches('.quiz-export')) {
      const blob = new Blob([exportRecords(session)], { type: 'application/jsonl' });
      const link = document.createElement('a');
      link.href = URL.createObjectURL(blob);
      link.download = `labels-${session.userId}.jsonl`;
      link.click();
      URL.revokeObjectURL(link.href);
      clearSession(store, session.userId);
    }
    updateSubmitState();
  });

  root.addEventListener('change', (event) => {
    const target = event.target as HTMLInputElement;
    if (target.name === 'confidence') {
      chosenConfidence = target.value as Confidence;
    }
    updateSubmitState();
  });

  const updateSubmitState = () => {
    const button = root.querySelector<HTMLButtonElement>('.quiz-submit');
    if (button !== null) {
      button.disabled = chosenClass === null || chosenConfidence === null;
    }
  };

  redraw();
}

main().catch((err) => {
  const root = document.getElementById('quiz');
  if (root !== null) {
    root.innerHTML = `<p class="quiz-error">Could not start the quiz: ${String(err)}</p>`;
  }
});
