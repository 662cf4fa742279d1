import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api';
import { CanvasState } from '../src/canvas';
import { statusBadge, visibleCards } from '../src/view';
import { FakeServer, seededSession } from './fakeServer';

async function setup() {
  const server = new FakeServer();
  const session = seededSession();
  server.seed(session);
  const api = new ApiClient('', server.fetch);
  const canvas = new CanvasState(api, await api.loadSession(session.session_id, true));
  return { server, session, api, canvas };
}

describe('CanvasState', () => {
  it('orders cards by segment and starts clean', async () => {
    const { canvas } = await setup();
    expect(canvas.list().map((c) => c.segmentIndex)).toEqual([0, 1, 1]);
    expect(canvas.dirty).toBe(false);
  });

  it('save with no changes makes no network call', async () => {
    const { canvas, server } = await setup();
    const before = server.requestLog.length;
    const outcome = await canvas.save();
    expect(outcome.kind).toBe('clean');
    expect(server.requestLog.length).toBe(before);
  });

  it('rejects empty drafts client-side', async () => {
    const { canvas } = await setup();
    expect(() => canvas.setDraft('h0-0', '   ')).toThrow(/non-empty/);
  });

  it('posts exactly one EDIT event per changed card', async () => {
    const { canvas, server, session } = await setup();
    canvas.setDraft('h0-0', 'Billing error confirmed and refunded.');
    const outcome = await canvas.save();
    expect(outcome).toMatchObject({ kind: 'saved', eventsPosted: 1 });
    const events = server.eventsFor(session.session_id);
    expect(events).toHaveLength(1);
    expect(events[0]).toMatchObject({
      highlight_id: 'h0-0',
      action: 'edit',
      new_text: 'Billing error confirmed and refunded.',
    });
    expect(canvas.dirty).toBe(false);
  });

  it('tracks the server version across successive events', async () => {
    const { canvas } = await setup();
    canvas.setDraft('h0-0', 'First change.');
    canvas.setDraft('h1-0', 'Second change.');
    const outcome = await canvas.save();
    expect(outcome).toMatchObject({ kind: 'saved', eventsPosted: 2, version: 3 });
  });

  it('surfaces a conflict when another client moved the session', async () => {
    const { canvas, api, session } = await setup();
    await api.postEvent(session.session_id, {
      highlight_id: 'h0-0',
      action: 'accept',
      version: 1,
    });
    canvas.setDraft('h1-0', 'Stale edit.');
    const outcome = await canvas.save();
    expect(outcome.kind).toBe('conflict');
    await canvas.reload(true);
    expect(canvas.serverVersion).toBe(2);
    expect(canvas.dirty).toBe(false);
  });

  it('discard and restore round-trip through events', async () => {
    const { canvas, server, session } = await setup();
    canvas.discard('h0-0');
    await canvas.save();
    canvas.restore('h0-0');
    await canvas.save();
    const actions = server.eventsFor(session.session_id).map((e) => e.action);
    expect(actions).toEqual(['discard', 'restore']);
    expect(canvas.card('h0-0').visible).toBe(true);
  });
});

describe('view helpers', () => {
  it('badge derives solely from server status', () => {
    expect(statusBadge('accept')).toContain('badge-accept');
    expect(statusBadge('review')).toContain('needs review');
    expect(statusBadge('reject')).toContain('badge-reject');
  });

  it('hides rejected cards unless toggled', async () => {
    const { canvas } = await setup();
    expect(visibleCards(canvas.list(), false).map((c) => c.highlightId)).toEqual([
      'h0-0',
      'h1-0',
    ]);
    expect(visibleCards(canvas.list(), true)).toHaveLength(3);
  });
});
