// Browser bootstrap: a single-page app over the render functions. All
// annotation decisions live server-side; this file only moves payloads
// between the service and the DOM.

import { ApiClient, ApiError } from './api';
import { labelForKey } from './labels';
import {
  renderAnnotatorView,
  renderDashboard,
  renderJudgeView,
  renderLogin,
  type DashboardState,
  type TaskViewState,
} from './render';
import type { Role, TaskLease } from './types';

const DASHBOARD_POLL_MS = 5000;

interface Session {
  client: ApiClient;
  project: string;
  role: Role;
}

let session: Session | null = null;
let taskState: TaskViewState = {
  lease: null,
  busy: false,
  error: null,
  leaseExpired: false,
};
let dashboardState: DashboardState = { stats: null, stale: false };
let pollTimer: number | undefined;

function root(): HTMLElement {
  const el = document.getElementById('app');
  if (!el) throw new Error('missing #app mount point');
  return el;
}

function paint(): void {
  if (!session) {
    root().innerHTML = renderLogin({
      baseUrl: window.location.origin,
      project: '',
      error: taskState.error,
    });
    return;
  }
  if (session.role === 'operator') {
    root().innerHTML = renderDashboard(dashboardState);
  } else if (session.role === 'judge') {
    root().innerHTML = renderJudgeView(taskState);
  } else {
    root().innerHTML = renderAnnotatorView(taskState);
  }
}

async function leaseNext(): Promise<void> {
  if (!session) return;
  taskState = { lease: null, busy: true, error: null, leaseExpired: false };
  paint();
  try {
    const lease = await session.client.leaseNext(session.project, session.role);
    taskState = { lease, busy: false, error: null, leaseExpired: false };
  } catch (error) {
    taskState = {
      lease: null,
      busy: false,
      error: error instanceof Error ? error.message : String(error),
      leaseExpired: error instanceof ApiError && error.code === 'lease_expired',
    };
  }
  paint();
}

async function submitLabel(label: string): Promise<void> {
  if (!session || !taskState.lease) return;
  const current: TaskLease = taskState.lease;
  taskState = { ...taskState, busy: true };
  paint();
  try {
    await session.client.submit(current.task_id, label);
    await leaseNext(); // optimistic flow: straight to the next task
  } catch (error) {
    const expired = error instanceof ApiError && error.code === 'lease_expired';
    const lost = error instanceof ApiError && error.status === 403;
    taskState = {
      lease: expired || lost ? null : current,
      busy: false,
      error: error instanceof Error ? error.message : String(error),
      leaseExpired: expired || lost,
    };
    paint();
  }
}

async function releaseTask(): Promise<void> {
  if (!session || !taskState.lease) return;
  try {
    await session.client.release(taskState.lease.task_id);
  } catch {
    // releasing a lost lease is fine either way
  }
  await leaseNext();
}

async function pollStats(): Promise<void> {
  if (!session) return;
  try {
    const stats = await session.client.stats(session.project);
    dashboardState = { stats, stale: false };
  } catch {
    dashboardState = { ...dashboardState, stale: true };
  }
  paint();
}

function startDashboard(): void {
  void pollStats();
  pollTimer = window.setInterval(() => void pollStats(), DASHBOARD_POLL_MS);
}

function login(form: HTMLElement): void {
  const value = (name: string): string =>
    (form.querySelector(`[name=${name}]`) as HTMLInputElement | HTMLSelectElement)
      .value;
  session = {
    client: new ApiClient(value('baseUrl'), value('token')),
    project: value('project'),
    role: value('role') as Role,
  };
  if (pollTimer) window.clearInterval(pollTimer);
  if (session.role === 'operator') {
    startDashboard();
  } else {
    void leaseNext();
  }
}

export function mount(): void {
  paint();
  root().addEventListener('click', (event) => {
    const target = (event.target as HTMLElement).closest('[data-action]');
    if (!target) return;
    const action = target.getAttribute('data-action');
    if (action === 'login') login(root());
    else if (action === 'lease-next') void leaseNext();
    else if (action === 'release') void releaseTask();
    else if (action === 'submit-label') {
      const label = target.getAttribute('data-label');
      if (label) void submitLabel(label);
    }
  });
  document.addEventListener('keydown', (event) => {
    if (!session || session.role === 'operator' || taskState.busy) return;
    if (event.target instanceof HTMLInputElement) return;
    const label = labelForKey(event.key);
    if (label && taskState.lease) void submitLabel(label);
  });
}

mount();
