import { BATCH_SIZE, CLASS_VOCABULARY, QuizSession } from './types.js';
import {
  batchIndex,
  batchSizes,
  currentEntry,
  isComplete,
  responseTally,
} from './session.js';

export interface QuizText {
  title: string;
  instructions: string;
}

// The study's original wording is configurable; this default restates the
// task without naming either phase's relationship to the other.
export const DEFAULT_TEXT: QuizText = {
  title: 'Image classification study',
  instructions:
    'Look at the image and pick the class that best describes the main ' +
    'object, then rate how confident you are (low or high). Some images ' +
    'may look distorted or unclear; always choose the closest class. ' +
    'Answers are final once submitted and no grading is shown during the quiz.',
};

function escapeHtml(s: string): string {
  return s
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function instructionsBlock(text: QuizText): string {
  const classes = CLASS_VOCABULARY.map(
    (c) => `<li class="vocab-item">${c}</li>`,
  ).join('');
  return `<header class="quiz-header">
  <h1>${escapeHtml(text.title)}</h1>
  <p class="quiz-instructions">${escapeHtml(text.instructions)}</p>
  <ul class="quiz-vocab">${classes}</ul>
</header>`;
}

function progressBlock(session: QuizSession): string {
  const sizes = batchSizes(session);
  const batch = batchIndex(session);
  const withinBatch = session.cursor - batch * BATCH_SIZE + 1;
  const round = session.phase === 'adversarial' ? 1 : 2;
  return `<p class="quiz-progress">Round ${round}, batch ${batch + 1} of ${sizes.length}, image ${withinBatch} of ${sizes[batch]}</p>`;
}

/**
 * The whole page for the current cursor position as an HTML string. The
 * instruction text and the full class vocabulary appear on every page; the
 * page never includes ground truth or any correctness feedback.
 */
export function renderPage(session: QuizSession, text: QuizText = DEFAULT_TEXT): string {
  if (isComplete(session)) {
    return renderCompletion(session, text);
  }
  const entry = currentEntry(session);
  if (entry === null) {
    return renderCompletion(session, text);
  }
  const src = session.phase === 'adversarial' ? entry.adversarial_src : entry.clean_src;
  const buttons = CLASS_VOCABULARY.map(
    (c) => `<button type="button" class="class-choice" data-class="${c}">${c}</button>`,
  ).join('\n      ');
  return `${instructionsBlock(text)}
<main class="quiz-page" data-image-id="${escapeHtml(entry.image_id)}">
  ${progressBlock(session)}
  <img class="quiz-image" src="${escapeHtml(src)}" alt="image to classify">
  <fieldset class="quiz-classes">
    <legend>Class</legend>
      ${buttons}
  </fieldset>
  <fieldset class="quiz-confidence">
    <legend>Confidence</legend>
    <label><input type="radio" name="confidence" value="low"> low</label>
    <label><input type="radio" name="confidence" value="high"> high</label>
  </fieldset>
  <button type="button" class="quiz-submit" disabled>Submit</button>
</main>`;
}

function renderCompletion(session: QuizSession, text: QuizText): string {
  const tally = responseTally(session);
  return `${instructionsBlock(text)}
<main class="quiz-page quiz-done">
  <p>All done. You answered ${tally.adversarial + tally.clean} images; thank you.</p>
  <button type="button" class="quiz-export">Download responses</button>
</main>`;
}
