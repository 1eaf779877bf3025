import { describe, expect, it } from 'vitest';

import { CW_LABELS, labelForKey } from '../src/labels';
import {
  escapeHtml,
  formatPercent,
  renderAnnotatorView,
  renderDashboard,
  renderJudgeView,
  renderLogin,
} from '../src/render';
import type { ProjectStats, TaskLease } from '../src/types';

function lease(overrides: Partial<TaskLease> = {}): TaskLease {
  return {
    task_id: 't1',
    claim_id: 'c1',
    role: 'first_annotator',
    expires_in_seconds: 1800,
    payload: { claim_text: 'a claim to label' },
    ...overrides,
  };
}

const fresh = { busy: false, error: null, leaseExpired: false };

describe('annotator view', () => {
  it('renders the claim and all three full label names', () => {
    const html = renderAnnotatorView({ ...fresh, lease: lease() });
    expect(html).toContain('a claim to label');
    for (const label of CW_LABELS) expect(html).toContain(label);
    expect((html.match(/data-action="submit-label"/g) ?? []).length).toBe(3);
  });

  it('shows the definitions side panel', () => {
    const html = renderAnnotatorView({ ...fresh, lease: lease() });
    expect(html).toContain('Label definitions');
    expect(html).toContain('opinions, beliefs, declarations');
  });

  it('renders the empty-queue state', () => {
    const html = renderAnnotatorView({ ...fresh, lease: null });
    expect(html).toContain('No tasks waiting');
    expect(html).toContain('data-action="lease-next"');
  });

  it('surfaces lease expiry with a re-lease action', () => {
    const html = renderAnnotatorView({
      lease: null,
      busy: false,
      error: 'the lease TTL elapsed; the task was requeued',
      leaseExpired: true,
    });
    expect(html).toContain('error-banner');
    expect(html).toContain('data-action="lease-next"');
  });

  it('escapes hostile claim text', () => {
    const html = renderAnnotatorView({
      ...fresh,
      lease: lease({ payload: { claim_text: '<script>alert(1)</script> & more' } }),
    });
    expect(html).not.toContain('<script>');
    expect(html).toContain('&lt;script&gt;');
    expect(html).toContain('&amp; more');
  });
});

describe('judge view', () => {
  it('renders two unattributed chips in server order plus a palette', () => {
    const html = renderJudgeView({
      ...fresh,
      lease: lease({
        role: 'judge',
        payload: {
          claim_text: 'contested claim',
          labels: ['Check-worthy Factual', 'Non-Factual'],
        },
      }),
    });
    const chipSection = html.slice(html.indexOf('chip-row'));
    expect(
      chipSection.indexOf('Check-worthy Factual'),
    ).toBeLessThan(chipSection.indexOf('Non-Factual'));
    expect(html).toContain('Choose another label');
    expect((html.match(/label-chip/g) ?? []).length).toBe(2);
  });

  it('renders a single chip for no-majority cases with the full palette', () => {
    const html = renderJudgeView({
      ...fresh,
      lease: lease({
        role: 'judge',
        payload: { claim_text: 'solo case', labels: ['Unimportant Factual'] },
      }),
    });
    expect((html.match(/label-chip/g) ?? []).length).toBe(1);
    expect((html.match(/data-action="submit-label"/g) ?? []).length).toBe(1 + 3);
  });

  it('shows message context only when the server provides it', () => {
    const withContext = renderJudgeView({
      ...fresh,
      lease: lease({
        role: 'judge',
        payload: {
          claim_text: 'claim',
          labels: ['Non-Factual'],
          message_text: 'the full message around the claim',
        },
      }),
    });
    expect(withContext).toContain('Message context');
    const without = renderJudgeView({
      ...fresh,
      lease: lease({
        role: 'judge',
        payload: { claim_text: 'claim', labels: ['Non-Factual'] },
      }),
    });
    expect(without).not.toContain('Message context');
  });

  it('keeps 50 adversarial cases blind: no annotator identity reaches the DOM', () => {
    // Simulates a leaky server adding attribution fields; the renderer only
    // ever reads the whitelisted payload fields, so none of it may appear.
    const planted = [
      'ann-alice-7',
      'olmo2-32b',
      'judge-carol',
      'did:annotator:42',
      'sourceKind=human',
    ];
    for (let i = 0; i < 50; i++) {
      const leaky = lease({
        role: 'judge',
        payload: {
          claim_text: `case number ${i}`,
          labels:
            i % 3 === 0
              ? ['Non-Factual']
              : ['Check-worthy Factual', 'Non-Factual'],
          // fields a buggy server might attach; not part of LeasePayload
          ...({
            annotator: planted[0],
            model: planted[1],
            judge: planted[2],
            source: planted[3],
            provenance: planted[4],
            permutation_seed: 12345,
          } as object),
        },
      });
      const html = renderJudgeView({ ...fresh, lease: leaky });
      for (const needle of planted) expect(html).not.toContain(needle);
      expect(html).not.toContain('12345');
      expect(html).not.toContain('seed');
    }
  });
});

function statsFixture(overrides: Partial<ProjectStats> = {}): ProjectStats {
  return {
    project_id: 'p1',
    total_claims: 1615,
    tasks: {
      first_annotator: { total: 1615, pending: 0, leased: 0, done: 1615 },
      judge: { total: 754, pending: 0, leased: 0, done: 754 },
    },
    finals: 1615,
    completion_percent: 100.0,
    effort: {
      total_claims: 1615,
      accepted: 861,
      judged_count: 754,
      judged_percent: 46.68730650154799,
      sided_human: 589,
      sided_human_percent: 78.11671087533156,
      sided_llm: 138,
      sided_llm_percent: 18.30238726790451,
      override: 27,
      override_percent: 3.581120848806366,
      independent: 0,
      independent_percent: 0,
      strata: {
        HS: { total: 633, judged: 257, judged_percent: 40.6 },
        'Non-HS': { total: 982, judged: 497, judged_percent: 50.61 },
      },
    },
    variability: [
      {
        stratum: 'overall',
        total: 1615,
        counts: { all_equal: 1463, two_equal: 148, unequal: 4 },
        percents: { all_equal: 90.6, two_equal: 9.2, unequal: 0.2 },
      },
    ],
    ...overrides,
  };
}

describe('dashboard view', () => {
  it('renders the judged gauge as 46.7% from the effort fixture', () => {
    const html = renderDashboard({ stats: statsFixture(), stale: false });
    expect(html).toContain('46.7%');
    expect(html).toContain('754 of 1615 claims');
  });

  it('shows the provenance split and variability table', () => {
    const html = renderDashboard({ stats: statsFixture(), stale: false });
    expect(html).toContain('sided with annotator');
    expect(html).toContain('589');
    expect(html).toContain('78.12%');
    expect(html).toContain('all equal');
    expect(html).toContain('1463');
  });

  it('renders a zeroed dashboard for an empty project', () => {
    const html = renderDashboard({
      stats: statsFixture({
        total_claims: 0,
        tasks: { first_annotator: { total: 0, pending: 0, leased: 0, done: 0 } },
        finals: 0,
        completion_percent: 0,
        effort: null,
        variability: null,
      }),
      stale: false,
    });
    expect(html).toContain('0.0%');
    expect(html).not.toContain('provenance');
  });

  it('keeps the last snapshot behind a stale banner on poll failure', () => {
    const html = renderDashboard({ stats: statsFixture(), stale: true });
    expect(html).toContain('stale-banner');
    expect(html).toContain('46.7%');
  });

  it('handles the no-data state', () => {
    const html = renderDashboard({ stats: null, stale: true });
    expect(html).toContain('No statistics yet');
  });
});

describe('helpers', () => {
  it('maps keys 1/2/3 to the canonical label order', () => {
    expect(labelForKey('1')).toBe('Non-Factual');
    expect(labelForKey('2')).toBe('Unimportant Factual');
    expect(labelForKey('3')).toBe('Check-worthy Factual');
    expect(labelForKey('4')).toBeNull();
    expect(labelForKey('x')).toBeNull();
  });

  it('formats percentages defensively', () => {
    expect(formatPercent(754, 1615)).toBe('46.7%');
    expect(formatPercent(0, 0)).toBe('0.0%');
  });

  it('escapes all HTML metacharacters', () => {
    expect(escapeHtml(`<a href="x" onclick='y'>&`)).toBe(
      '&lt;a href=&quot;x&quot; onclick=&#39;y&#39;&gt;&amp;',
    );
  });

  it('renders the login screen with base-URL and token fields', () => {
    const html = renderLogin({ baseUrl: 'http://localhost:8800', project: '', error: null });
    expect(html).toContain('name="baseUrl"');
    expect(html).toContain('name="token"');
    expect(html).toContain('first_annotator');
  });
});
