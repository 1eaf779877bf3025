import type { ApiErrorBody, ProjectStats, Role, SubmitResult, TaskLease } from './types';

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function toError(response: Response): Promise<ApiError> {
  let body: ApiErrorBody = { code: 'unknown', message: response.statusText };
  try {
    body = (await response.json()) as ApiErrorBody;
  } catch {
    // non-JSON error bodies keep the status text
  }
  return new ApiError(response.status, body.code, body.message);
}

/** Thin fetch wrapper; the service is the single source of truth. */
export class ApiClient {
  constructor(
    private baseUrl: string,
    private token: string,
  ) {}

  private headers(): Record<string, string> {
    return {
      Authorization: `Bearer ${this.token}`,
      'Content-Type': 'application/json',
    };
  }

  async leaseNext(project: string, role: Role): Promise<TaskLease | null> {
    const url = new URL('/tasks/next', this.baseUrl);
    url.searchParams.set('project', project);
    url.searchParams.set('role', role);
    const response = await fetch(url, { headers: this.headers() });
    if (response.status === 204) return null;
    if (!response.ok) throw await toError(response);
    return (await response.json()) as TaskLease;
  }

  async submit(taskId: string, label: string): Promise<SubmitResult> {
    const response = await fetch(new URL(`/tasks/${taskId}/submit`, this.baseUrl), {
      method: 'POST',
      headers: this.headers(),
      body: JSON.stringify({ label }),
    });
    if (!response.ok) throw await toError(response);
    return (await response.json()) as SubmitResult;
  }

  async release(taskId: string): Promise<void> {
    const response = await fetch(new URL(`/tasks/${taskId}/release`, this.baseUrl), {
      method: 'POST',
      headers: this.headers(),
    });
    if (!response.ok) throw await toError(response);
  }

  async stats(project: string): Promise<ProjectStats> {
    const response = await fetch(new URL(`/projects/${project}/stats`, this.baseUrl), {
      headers: this.headers(),
    });
    if (!response.ok) throw await toError(response);
    return (await response.json()) as ProjectStats;
  }
}
