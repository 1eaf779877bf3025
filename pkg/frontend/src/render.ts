// Pure HTML-string renderers. Every view is a function of explicit state, so
// tests can assert on output without a browser. Renderers whitelist the
// payload fields they show; unknown fields a server may add never reach the
// DOM (that property carries the judge-blindness guarantee end to end).

import { CW_LABELS, LABEL_DEFINITIONS } from './labels';
import type { ProjectStats, TaskLease, VariabilityRow } from './types';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

export function formatPercent(part: number, whole: number): string {
  if (whole <= 0) return '0.0%';
  return `${((100 * part) / whole).toFixed(1)}%`;
}

function guidelinesPanel(): string {
  const items = CW_LABELS.map(
    (label, i) =>
      `<li><b>${i + 1}. ${escapeHtml(label)}</b>: ${escapeHtml(
        LABEL_DEFINITIONS[label],
      )}</li>`,
  ).join('');
  return `<aside class="guidelines"><h3>Label definitions</h3><ol>${items}</ol></aside>`;
}

function labelButtons(): string {
  return CW_LABELS.map(
    (label, i) =>
      `<button class="label-btn" data-action="submit-label" data-label="${escapeHtml(
        label,
      )}" accesskey="${i + 1}">${i + 1} · ${escapeHtml(label)}</button>`,
  ).join('');
}

export interface TaskViewState {
  lease: TaskLease | null;
  busy: boolean;
  error: string | null;
  /** Set when the server answered lease_expired; offers a re-lease action. */
  leaseExpired: boolean;
}

export function renderAnnotatorView(state: TaskViewState): string {
  const parts: string[] = ['<section class="annotator-view">'];
  if (state.error) {
    parts.push(
      `<div class="error-banner">${escapeHtml(state.error)}` +
        (state.leaseExpired
          ? ' <button data-action="lease-next">Get a new task</button>'
          : '') +
        '</div>',
    );
  }
  if (state.busy) {
    parts.push('<p class="loading">Working&hellip;</p>');
  } else if (!state.lease) {
    parts.push(
      '<p class="empty">No tasks waiting.</p>' +
        '<button data-action="lease-next">Check again</button>',
    );
  } else {
    parts.push(
      `<blockquote class="claim-text">${escapeHtml(
        state.lease.payload.claim_text,
      )}</blockquote>`,
      `<div class="label-row">${labelButtons()}</div>`,
      '<button class="secondary" data-action="release">Release task</button>',
    );
  }
  parts.push(guidelinesPanel(), '</section>');
  return parts.join('\n');
}

export function renderJudgeView(state: TaskViewState): string {
  const parts: string[] = ['<section class="judge-view">'];
  if (state.error) {
    parts.push(
      `<div class="error-banner">${escapeHtml(state.error)}` +
        (state.leaseExpired
          ? ' <button data-action="lease-next">Get a new case</button>'
          : '') +
        '</div>',
    );
  }
  if (state.busy) {
    parts.push('<p class="loading">Working&hellip;</p>');
  } else if (!state.lease) {
    parts.push(
      '<p class="empty">No cases to adjudicate.</p>' +
        '<button data-action="lease-next">Check again</button>',
    );
  } else {
    const presented = state.lease.payload.labels ?? [];
    // Chips appear exactly in server order and carry no source attribution.
    const chips = presented
      .map(
        (label) =>
          `<button class="label-chip" data-action="submit-label" data-label="${escapeHtml(
            label,
          )}">${escapeHtml(label)}</button>`,
      )
      .join('');
    parts.push(
      `<blockquote class="claim-text">${escapeHtml(
        state.lease.payload.claim_text,
      )}</blockquote>`,
    );
    if (state.lease.payload.message_text) {
      parts.push(
        `<details class="message-context"><summary>Message context</summary>` +
          `<p>${escapeHtml(state.lease.payload.message_text)}</p></details>`,
      );
    }
    parts.push(
      `<div class="chip-row"><span>Assigned labels:</span>${chips}</div>`,
      '<details class="other-label"><summary>Choose another label</summary>' +
        `<div class="label-row">${labelButtons()}</div></details>`,
      '<button class="secondary" data-action="release">Release case</button>',
    );
  }
  parts.push(guidelinesPanel(), '</section>');
  return parts.join('\n');
}

export interface DashboardState {
  stats: ProjectStats | null;
  /** True when the last poll failed; the previous snapshot stays visible. */
  stale: boolean;
}

function queueTable(stats: ProjectStats): string {
  const rows = Object.entries(stats.tasks)
    .map(
      ([role, counts]) =>
        `<tr><td>${escapeHtml(role)}</td><td>${counts.pending}</td>` +
        `<td>${counts.leased}</td><td>${counts.done}</td><td>${counts.total}</td></tr>`,
    )
    .join('');
  return (
    '<table class="queues"><thead><tr><th>queue</th><th>pending</th>' +
    '<th>leased</th><th>done</th><th>total</th></tr></thead>' +
    `<tbody>${rows}</tbody></table>`
  );
}

function variabilityTable(rows: VariabilityRow[]): string {
  const classes = ['all_equal', 'two_equal', 'unequal'];
  const body = rows
    .map(
      (row) =>
        `<tr><td>${escapeHtml(row.stratum)}</td>` +
        classes
          .map(
            (cls) =>
              `<td>${row.counts[cls] ?? 0} (${(row.percents[cls] ?? 0).toFixed(1)}%)</td>`,
          )
          .join('') +
        `<td>${row.total}</td></tr>`,
    )
    .join('');
  return (
    '<table class="variability"><thead><tr><th>stratum</th><th>all equal</th>' +
    '<th>2 equal</th><th>unequal</th><th>total</th></tr></thead>' +
    `<tbody>${body}</tbody></table>`
  );
}

export function renderDashboard(state: DashboardState): string {
  const parts: string[] = ['<section class="dashboard">'];
  if (state.stale) {
    parts.push(
      '<div class="stale-banner">Live stats unavailable; showing the last snapshot.</div>',
    );
  }
  const stats = state.stats;
  if (!stats) {
    parts.push('<p class="empty">No statistics yet.</p></section>');
    return parts.join('\n');
  }
  const judged = stats.effort ? stats.effort.judged_count : 0;
  const judgedPercent = formatPercent(judged, stats.total_claims);
  parts.push(
    `<div class="gauge" data-metric="judged">` +
      `<span class="gauge-value">${judgedPercent}</span>` +
      `<span class="gauge-label">judged (${judged} of ${stats.total_claims} claims)</span></div>`,
    `<div class="gauge" data-metric="completion">` +
      `<span class="gauge-value">${stats.completion_percent.toFixed(1)}%</span>` +
      `<span class="gauge-label">final labels in place</span></div>`,
    queueTable(stats),
  );
  if (stats.effort) {
    const effort = stats.effort;
    parts.push(
      '<table class="provenance"><thead><tr><th>judge outcome</th><th>count</th>' +
        '<th>% of judged</th></tr></thead><tbody>' +
        `<tr><td>sided with annotator</td><td>${effort.sided_human}</td>` +
        `<td>${effort.sided_human_percent.toFixed(2)}%</td></tr>` +
        `<tr><td>sided with model</td><td>${effort.sided_llm}</td>` +
        `<td>${effort.sided_llm_percent.toFixed(2)}%</td></tr>` +
        `<tr><td>overrode both</td><td>${effort.override}</td>` +
        `<td>${effort.override_percent.toFixed(2)}%</td></tr>` +
        `<tr><td>independent</td><td>${effort.independent}</td>` +
        `<td>${effort.independent_percent.toFixed(2)}%</td></tr>` +
        '</tbody></table>',
    );
  }
  if (stats.variability && stats.variability.length) {
    parts.push(variabilityTable(stats.variability));
  }
  parts.push('</section>');
  return parts.join('\n');
}

export interface LoginState {
  baseUrl: string;
  project: string;
  error: string | null;
}

export function renderLogin(state: LoginState): string {
  return [
    '<section class="login">',
    '<h2>Sign in</h2>',
    state.error ? `<div class="error-banner">${escapeHtml(state.error)}</div>` : '',
    `<label>Service URL <input name="baseUrl" value="${escapeHtml(state.baseUrl)}"></label>`,
    `<label>Project <input name="project" value="${escapeHtml(state.project)}"></label>`,
    '<label>Access token <input name="token" type="password"></label>',
    '<label>Role <select name="role">' +
      '<option value="first_annotator">Annotator</option>' +
      '<option value="judge">Judge</option>' +
      '<option value="operator">Operator</option></select></label>',
    '<button data-action="login">Enter</button>',
    '</section>',
  ]
    .filter(Boolean)
    .join('\n');
}
