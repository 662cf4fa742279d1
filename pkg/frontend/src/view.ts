// Pure rendering helpers: session state in, HTML strings out. The DOM
// wiring in main.ts is the only code that touches `document`.

import type { CanvasCard } from './canvas';
import type { Highlight, Session, TranscriptTurn } from './types';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

/** Badge derives solely from the server-reported status. */
export function statusBadge(status: Highlight['status']): string {
  switch (status) {
    case 'accept':
      return '<span class="badge badge-accept">accepted</span>';
    case 'review':
      return '<span class="badge badge-review">needs review</span>';
    case 'reject':
      return '<span class="badge badge-reject">rejected</span>';
  }
}

/** REJECT cards stay hidden unless the "show rejected" toggle is on. */
export function visibleCards(
  cards: readonly CanvasCard[],
  showRejected: boolean,
): CanvasCard[] {
  return cards.filter((c) => c.visible || showRejected);
}

export function renderTurn(turn: TranscriptTurn): string {
  return (
    `<div class="turn" id="turn-${turn.index}">` +
    `<span class="speaker">${escapeHtml(turn.speaker.label)}</span> ` +
    `${escapeHtml(turn.text)}</div>`
  );
}

export function renderCard(card: CanvasCard): string {
  const review = card.status === 'review' ? ' card-review' : '';
  return (
    `<div class="card${review}" data-highlight="${card.highlightId}">` +
    statusBadge(card.status) +
    `<a class="anchor" href="#segment-${card.segmentIndex}">` +
    `segment ${card.segmentIndex}</a>` +
    `<textarea class="draft">${escapeHtml(card.draftText)}</textarea>` +
    `<button class="discard">discard</button>` +
    `</div>`
  );
}

export function renderReviewScreen(
  session: Session,
  cards: readonly CanvasCard[],
  showRejected: boolean,
): string {
  const turns = session.transcript.turns.map(renderTurn).join('');
  const shown = visibleCards(cards, showRejected);
  const cardHtml =
    shown.length > 0
      ? shown.map(renderCard).join('')
      : '<p class="empty">No highlights yet — re-run the pipeline.</p>';
  return (
    `<div class="review">` +
    `<section class="transcript">${turns}</section>` +
    `<section class="candidates">${cardHtml}</section>` +
    `</div>`
  );
}

export function renderErrorBanner(message: string): string {
  return (
    `<div class="error-banner">${escapeHtml(message)} ` +
    `<button class="retry">retry</button></div>`
  );
}
