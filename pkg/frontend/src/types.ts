// Wire types mirroring the annotation service JSON. The console renders only
// these fields; anything else a server might send is ignored by design.

export type Role = 'first_annotator' | 'judge' | 'operator';

export interface LeasePayload {
  claim_text: string;
  /** Judge tasks only: 1 or 2 unattributed candidate labels, server order. */
  labels?: string[];
  /** Present only when the project exposes parent-message context. */
  message_text?: string;
}

export interface TaskLease {
  task_id: string;
  claim_id: string;
  role: Role;
  expires_in_seconds: number;
  payload: LeasePayload;
}

export interface SubmitResult {
  status: string;
  final?: { claim_id: string; gold: string; provenance: string };
}

export interface RoleCounts {
  total: number;
  pending: number;
  leased: number;
  done: number;
}

export interface EffortSummary {
  total_claims: number;
  accepted: number;
  judged_count: number;
  judged_percent: number;
  sided_human: number;
  sided_human_percent: number;
  sided_llm: number;
  sided_llm_percent: number;
  override: number;
  override_percent: number;
  independent: number;
  independent_percent: number;
  strata: Record<string, { total: number; judged: number; judged_percent: number }>;
}

export interface VariabilityRow {
  stratum: string;
  total: number;
  counts: Record<string, number>;
  percents: Record<string, number>;
}

export interface ProjectStats {
  project_id: string;
  total_claims: number;
  tasks: Record<string, RoleCounts>;
  finals: number;
  completion_percent: number;
  effort: EffortSummary | null;
  variability: VariabilityRow[] | null;
}

export interface ApiErrorBody {
  code: string;
  message: string;
}
