/** Typed fetch client for the gridscope JSON API. */

import type {
  ApiErrorBody,
  JobDetailResponse,
  JobListResponse,
  LoginResponse,
  PredictResponse,
  SubmitForm,
  SubmitResponse,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public status: number,
    public stage: string,
    message: string,
    public retryAfter?: number,
  ) {
    super(message);
  }
}

export class ApiClient {
  private token: string | null = null;

  constructor(
    public baseUrl: string = '',
    private fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  get authenticated(): boolean {
    return this.token !== null;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers['Content-Type'] = 'application/json';
    if (this.token) headers['Authorization'] = `Bearer ${this.token}`;
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let payload: Partial<ApiErrorBody> = {};
      try {
        payload = (await response.json()) as ApiErrorBody;
      } catch {
        // non-JSON error body; fall through with defaults
      }
      throw new ApiError(
        response.status,
        payload.stage ?? 'Unknown',
        payload.message ?? response.statusText,
        payload.retryAfter,
      );
    }
    return (await response.json()) as T;
  }

  async login(user: string, token: string): Promise<LoginResponse> {
    const session = await this.request<LoginResponse>('POST', '/auth/login', { user, token });
    this.token = session.token;
    return session;
  }

  listJobs(): Promise<JobListResponse> {
    return this.request('GET', '/jobs');
  }

  jobDetail(jobId: number, lines = 20): Promise<JobDetailResponse> {
    return this.request('GET', `/jobs/${jobId}?lines=${lines}`);
  }

  submitJob(form: SubmitForm): Promise<SubmitResponse> {
    return this.request('POST', '/jobs', {
      jobName: form.jobName,
      scriptPath: form.scriptPath,
      sourceDirectory: form.sourceDirectory,
      memoryRequested: form.memoryRequested,
      cores: form.cores,
      parallel: form.parallel,
      outputPath: form.outputPath,
    });
  }

  cancelJob(jobId: number): Promise<{ jobId: number; cancelled: boolean }> {
    return this.request('DELETE', `/jobs/${jobId}`);
  }

  refresh(): Promise<unknown> {
    return this.request('POST', '/refresh');
  }

  predict(tool: string, reads: number, metric: string): Promise<PredictResponse> {
    const query = `tool=${encodeURIComponent(tool)}&reads=${reads}&metric=${metric}`;
    return this.request('GET', `/predict?${query}`);
  }
}
