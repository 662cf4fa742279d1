import { describe, expect, it } from 'vitest';

import { ApiClient, ApiError } from '../src/api';
import { FakeServer, seededSession } from './fakeServer';

function setup() {
  const server = new FakeServer();
  const session = seededSession();
  server.seed(session);
  const api = new ApiClient('', server.fetch);
  return { server, session, api };
}

describe('ApiClient', () => {
  it('loads a session with hidden highlights filtered by default', async () => {
    const { api, session } = setup();
    const loaded = await api.loadSession(session.session_id);
    expect(loaded.session_id).toBe(session.session_id);
    expect(loaded.highlights.map((h) => h.highlight_id)).toEqual(['h0-0', 'h1-0']);
  });

  it('includes rejected highlights when asked', async () => {
    const { api, session } = setup();
    const loaded = await api.loadSession(session.session_id, true);
    expect(loaded.highlights).toHaveLength(3);
    expect(loaded.highlights[2].perplexity).toBeNull();
  });

  it('raises ApiError with code on 404', async () => {
    const { api } = setup();
    await expect(api.loadSession('missing')).rejects.toMatchObject({
      status: 404,
      code: 'not_found',
    });
  });

  it('posts events and returns the new version', async () => {
    const { api, session } = setup();
    const ack = await api.postEvent(session.session_id, {
      highlight_id: 'h0-0',
      action: 'accept',
      version: 1,
    });
    expect(ack.version).toBe(2);
  });

  it('flags version conflicts as retryable', async () => {
    const { api, session } = setup();
    try {
      await api.postEvent(session.session_id, {
        highlight_id: 'h0-0',
        action: 'accept',
        version: 99,
      });
      expect.unreachable('should have thrown');
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).isConflict).toBe(true);
      expect((err as ApiError).code).toBe('version_conflict');
    }
  });

  it('finalizes a session', async () => {
    const { api, session } = setup();
    const ack = await api.finalize(session.session_id);
    expect(ack.state).toBe('finalized');
    await expect(
      api.postEvent(session.session_id, {
        highlight_id: 'h0-0',
        action: 'accept',
        version: ack.version,
      }),
    ).rejects.toMatchObject({ code: 'session_finalized' });
  });
});
