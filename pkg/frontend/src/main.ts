// DOM wiring: loads the session named in the URL hash, renders the
// review screen, and hooks edit/discard/save controls to CanvasState.

import { ApiClient } from './api';
import { CanvasState } from './canvas';
import { renderErrorBanner, renderReviewScreen } from './view';

const root = document.getElementById('app');
if (!root) throw new Error('missing #app container');

const api = new ApiClient('/api');
let canvas: CanvasState | null = null;
let showRejected = false;

function render(): void {
  if (!canvas) return;
  root!.innerHTML = renderReviewScreen(
    canvas.currentSession,
    canvas.list(),
    showRejected,
  );
  wireCards();
}

function wireCards(): void {
  if (!canvas) return;
  for (const el of Array.from(root!.querySelectorAll<HTMLElement>('.card'))) {
    const id = el.dataset.highlight!;
    const draft = el.querySelector<HTMLTextAreaElement>('.draft')!;
    draft.addEventListener('change', () => {
      try {
        canvas!.setDraft(id, draft.value);
      } catch (err) {
        showError(String(err));
      }
    });
    el.querySelector<HTMLButtonElement>('.discard')!.addEventListener(
      'click',
      () => {
        canvas!.discard(id);
        render();
      },
    );
  }
}

function showError(message: string): void {
  const banner = document.createElement('div');
  banner.innerHTML = renderErrorBanner(message);
  root!.prepend(banner);
  banner.querySelector('.retry')?.addEventListener('click', () => {
    banner.remove();
    void boot();
  });
}

async function save(): Promise<void> {
  if (!canvas) return;
  const outcome = await canvas.save();
  if (outcome.kind === 'conflict') {
    showError('Someone else edited this session. Reloading latest state.');
    await canvas.reload(showRejected);
  }
  render();
}

async function boot(): Promise<void> {
  const sessionId = window.location.hash.replace(/^#/, '');
  if (!sessionId) {
    root!.innerHTML = renderErrorBanner('No session id in the URL hash.');
    return;
  }
  try {
    const session = await api.loadSession(sessionId, showRejected);
    canvas = new CanvasState(api, session);
    render();
  } catch (err) {
    root!.innerHTML = renderErrorBanner(String(err));
    root!.querySelector('.retry')?.addEventListener('click', () => void boot());
  }
}

document.getElementById('save')?.addEventListener('click', () => void save());
document
  .getElementById('toggle-rejected')
  ?.addEventListener('change', (ev) => {
    showRejected = (ev.target as HTMLInputElement).checked;
    void canvas?.reload(showRejected).then(render);
  });

void boot();
