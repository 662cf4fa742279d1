// The secondary acceptance criterion as one scenario: load a seeded
// session, edit one REVIEW highlight, save, reload — exactly one EDIT
// event on the server and the canvas text matches; REJECT highlights
// stay hidden by default.

import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api';
import { CanvasState } from '../src/canvas';
import { visibleCards } from '../src/view';
import { FakeServer, seededSession } from './fakeServer';

describe('UI round-trip', () => {
  it('edit one REVIEW highlight, save, reload', async () => {
    const server = new FakeServer();
    const session = seededSession();
    server.seed(session);
    const api = new ApiClient('', server.fetch);

    // load the seeded session
    const canvas = new CanvasState(api, await api.loadSession(session.session_id, true));
    const reviewCard = canvas.list().find((c) => c.status === 'review');
    expect(reviewCard).toBeDefined();

    // REJECT highlights hidden by default
    expect(
      visibleCards(canvas.list(), false).some((c) => c.status === 'reject'),
    ).toBe(false);

    // edit the REVIEW highlight and save
    const edited = 'Contract renewal confirmed for next quarter.';
    canvas.setDraft(reviewCard!.highlightId, edited);
    const outcome = await canvas.save();
    expect(outcome).toMatchObject({ kind: 'saved', eventsPosted: 1 });

    // exactly one EDIT event on the server
    const events = server.eventsFor(session.session_id);
    expect(events.filter((e) => e.action === 'edit')).toHaveLength(1);
    expect(events).toHaveLength(1);

    // reload: canvas text matches what was saved
    await canvas.reload(true);
    const reloaded = canvas.card(reviewCard!.highlightId);
    expect(reloaded.savedText).toBe(edited);
    expect(reloaded.draftText).toBe(edited);

    // round-trip: canvas order and texts equal server state
    const serverDoc = await api.loadSession(session.session_id, true);
    expect(canvas.list().map((c) => c.draftText)).toEqual(
      [...serverDoc.highlights]
        .sort((a, b) => a.segment_index - b.segment_index)
        .map((h) => h.text),
    );
  });
});
