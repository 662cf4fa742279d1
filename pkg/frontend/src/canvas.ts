// Editing-canvas state: local drafts over the server's highlights.
// Saving diffs the drafts against the loaded session and posts exactly
// one edit event per changed card, in segment order.

import { ApiClient, ApiError } from './api';
import type { EditEventPayload, Highlight, Session } from './types';

export interface CanvasCard {
  highlightId: string;
  segmentIndex: number;
  /** Server-confirmed text at load time. */
  savedText: string;
  /** Local draft; equals savedText until the user edits. */
  draftText: string;
  status: Highlight['status'];
  visible: boolean;
}

export type SaveOutcome =
  | { kind: 'clean' }
  | { kind: 'saved'; eventsPosted: number; version: number }
  | { kind: 'conflict'; message: string };

function cardsFromSession(session: Session): CanvasCard[] {
  return [...session.highlights]
    .sort((a, b) => a.segment_index - b.segment_index)
    .map((h) => ({
      highlightId: h.highlight_id,
      segmentIndex: h.segment_index,
      savedText: h.text,
      draftText: h.text,
      status: h.status,
      visible: h.visible,
    }));
}

export class CanvasState {
  private cards: CanvasCard[];
  private version: number;
  private discards = new Set<string>();
  private restores = new Set<string>();

  constructor(
    private readonly api: ApiClient,
    private session: Session,
  ) {
    this.cards = cardsFromSession(session);
    this.version = session.version;
  }

  get sessionId(): string {
    return this.session.session_id;
  }

  get currentSession(): Session {
    return this.session;
  }

  get serverVersion(): number {
    return this.version;
  }

  /** Cards in canvas (segment) order. */
  list(): readonly CanvasCard[] {
    return this.cards;
  }

  card(highlightId: string): CanvasCard {
    const found = this.cards.find((c) => c.highlightId === highlightId);
    if (!found) throw new Error(`no card ${highlightId}`);
    return found;
  }

  get dirty(): boolean {
    return (
      this.discards.size > 0 ||
      this.restores.size > 0 ||
      this.cards.some((c) => c.draftText !== c.savedText)
    );
  }

  setDraft(highlightId: string, text: string): void {
    if (!text.trim()) {
      throw new Error('edited text must be non-empty');
    }
    this.card(highlightId).draftText = text;
  }

  discard(highlightId: string): void {
    const c = this.card(highlightId);
    c.visible = false;
    this.restores.delete(highlightId);
    this.discards.add(highlightId);
  }

  restore(highlightId: string): void {
    const c = this.card(highlightId);
    c.visible = true;
    this.discards.delete(highlightId);
    this.restores.add(highlightId);
  }

  /** Pending events, one per changed card, in canvas order. */
  pendingEvents(): EditEventPayload[] {
    const events: EditEventPayload[] = [];
    for (const c of this.cards) {
      if (c.draftText !== c.savedText) {
        events.push({
          highlight_id: c.highlightId,
          action: 'edit',
          new_text: c.draftText,
          version: -1, // filled in at post time
        });
      }
      if (this.discards.has(c.highlightId)) {
        events.push({ highlight_id: c.highlightId, action: 'discard', version: -1 });
      }
      if (this.restores.has(c.highlightId)) {
        events.push({ highlight_id: c.highlightId, action: 'restore', version: -1 });
      }
    }
    return events;
  }

  /**
   * Post one event per change. No network call when clean; a version
   * conflict stops the save so the caller can reload and merge.
   */
  async save(): Promise<SaveOutcome> {
    if (!this.dirty) return { kind: 'clean' };
    let posted = 0;
    try {
      for (const event of this.pendingEvents()) {
        const ack = await this.api.postEvent(this.sessionId, {
          ...event,
          version: this.version,
        });
        this.version = ack.version;
        posted += 1;
      }
    } catch (err) {
      if (err instanceof ApiError && err.isConflict) {
        return { kind: 'conflict', message: err.message };
      }
      throw err;
    }
    for (const c of this.cards) c.savedText = c.draftText;
    this.discards.clear();
    this.restores.clear();
    return { kind: 'saved', eventsPosted: posted, version: this.version };
  }

  /** Re-fetch the session and rebuild cards from server state. */
  async reload(includeHidden = false): Promise<void> {
    this.session = await this.api.loadSession(this.sessionId, includeHidden);
    this.cards = cardsFromSession(this.session);
    this.version = this.session.version;
    this.discards.clear();
    this.restores.clear();
  }
}
