/** Hash-routed single-page client over the gridscope API. */

import { ApiClient, ApiError } from './api.js';
import { createPoller, safeRefreshIntervalMs, type Poller } from './polling.js';
import { renderJobDetail } from './views/jobDetail.js';
import { renderJobList } from './views/jobList.js';
import { renderLogin } from './views/login.js';
import { renderNewJob } from './views/newJob.js';
import type { JobDetailResponse, SubmitForm } from './types.js';

export interface AppConfig {
  apiBaseUrl: string;
  refreshIntervalMs: number;
  limiterWindowSeconds: number;
  limiterThreshold: number;
}

export const DEFAULT_CONFIG: AppConfig = {
  apiBaseUrl: '',
  refreshIntervalMs: 15_000,
  limiterWindowSeconds: 10,
  limiterThreshold: 10,
};

export class App {
  readonly api: ApiClient;
  private poller: Poller | null = null;
  private refreshMs: number;
  private prefill: Partial<SubmitForm> | undefined;
  private loginError = '';
  private lastRoutedHash: string | null = null;

  constructor(
    private root: HTMLElement,
    config: Partial<AppConfig> = {},
    fetchFn?: typeof fetch,
  ) {
    const merged = { ...DEFAULT_CONFIG, ...config };
    this.api = new ApiClient(merged.apiBaseUrl, fetchFn);
    // never refresh faster than the server-side budget allows
    this.refreshMs = Math.max(
      merged.refreshIntervalMs,
      safeRefreshIntervalMs(merged.limiterWindowSeconds, merged.limiterThreshold),
    );
  }

  start(): void {
    window.addEventListener('hashchange', () => void this.route());
    void this.route();
  }

  async route(): Promise<void> {
    const hash = window.location.hash || '#/jobs';
    // setting location.hash queues a hashchange that would re-render the
    // same screen (wiping transient state, doubling pollers): dedupe it
    if (hash === this.lastRoutedHash) return;
    this.stopPolling();
    if (!this.api.authenticated && hash !== '#/login') {
      this.lastRoutedHash = '#/login';
      window.location.hash = '#/login';
      this.showLogin();
      return;
    }
    this.lastRoutedHash = hash;
    const jobMatch = /^#\/jobs\/(\d+)$/.exec(hash);
    if (hash === '#/login') {
      this.showLogin();
    } else if (hash === '#/new') {
      this.showNewJob();
    } else if (jobMatch) {
      await this.showJobDetail(Number(jobMatch[1]));
    } else {
      await this.showJobList();
    }
  }

  private stopPolling(): void {
    this.poller?.stop();
    this.poller = null;
  }

  showLogin(error?: string): void {
    if (error !== undefined) this.loginError = error;
    renderLogin(
      this.root,
      {
        onLogin: (user, token) => {
          void this.api
            .login(user, token)
            .then(() => {
              this.loginError = '';
              window.location.hash = '#/jobs';
              return this.route();
            })
            .catch((failure: unknown) => {
              const message = failure instanceof ApiError ? failure.message : 'login failed';
              this.showLogin(message);
            });
        },
      },
      this.loginError,
    );
  }

  async showJobList(): Promise<void> {
    const tick = async (): Promise<void> => {
      try {
        const response = await this.api.listJobs();
        renderJobList(this.root, response, {
          onOpenJob: (jobId) => {
            window.location.hash = `#/jobs/${jobId}`;
          },
          onNewJob: () => {
            this.prefill = undefined;
            window.location.hash = '#/new';
          },
        });
      } catch (failure) {
        this.handleFailure(failure);
      }
    };
    this.poller = createPoller(tick, this.refreshMs);
    this.poller.start();
  }

  async showJobDetail(jobId: number): Promise<void> {
    const tick = async (): Promise<void> => {
      try {
        const detail = await this.api.jobDetail(jobId);
        renderJobDetail(this.root, detail, {
          onCancel: (id) => {
            void this.api.cancelJob(id).then(() => this.poller?.fetchNow());
          },
          onResubmit: (d: JobDetailResponse) => {
            this.prefill = {
              jobName: d.record.jobName,
              scriptPath: d.record.path,
              sourceDirectory: d.record.sourceDirectory,
              memoryRequested: d.record.memoryRequested,
              cores: d.record.cores,
              parallel: d.record.parallel === 1,
              outputPath: d.record.outpath,
            };
            window.location.hash = '#/new';
          },
          onNewJob: () => {
            this.prefill = undefined;
            window.location.hash = '#/new';
          },
          onBack: () => {
            window.location.hash = '#/jobs';
          },
        });
      } catch (failure) {
        if (failure instanceof ApiError && failure.status === 404) {
          this.showMissingJob(jobId);
          return;
        }
        this.handleFailure(failure);
      }
    };
    this.poller = createPoller(tick, this.refreshMs);
    this.poller.start();
  }

  showNewJob(): void {
    renderNewJob(
      this.root,
      {
        onSubmit: (form: SubmitForm) => {
          void this.api
            .submitJob(form)
            .then(() => {
              window.location.hash = '#/jobs';
            })
            .catch((failure: unknown) => this.handleFailure(failure));
        },
        onBack: () => {
          window.location.hash = '#/jobs';
        },
        onEstimate: async (tool, reads, metric) => {
          try {
            const estimate = await this.api.predict(tool, reads, metric);
            const value =
              metric === 'max_memory_bytes'
                ? `${(estimate.value / 1024 ** 3).toFixed(2)} GiB`
                : `${(estimate.value / 3600).toFixed(2)} h`;
            const spread =
              metric === 'max_memory_bytes'
                ? `${(estimate.rmse / 1024 ** 3).toFixed(2)} GiB`
                : `${(estimate.rmse / 3600).toFixed(2)} h`;
            return `~${value} (rmse ${spread}, from ${estimate.n} jobs)`;
          } catch (failure) {
            if (failure instanceof ApiError && failure.status === 404) {
              return 'No fitted model for that tool yet.';
            }
            throw failure;
          }
        },
      },
      this.prefill,
    );
  }

  showMissingJob(jobId: number): void {
    this.root.textContent = '';
    const box = document.createElement('div');
    box.className = 'missing-job';
    const message = document.createElement('p');
    message.textContent = `Job ${jobId} is not in the archive.`;
    box.appendChild(message);
    const back = document.createElement('a');
    back.href = '#/jobs';
    back.textContent = 'Back to jobs';
    box.appendChild(back);
    this.root.appendChild(box);
  }

  private handleFailure(failure: unknown): void {
    if (failure instanceof ApiError && failure.status === 401) {
      this.api.setToken(null);
      this.stopPolling();
      this.lastRoutedHash = '#/login';
      window.location.hash = '#/login';
      this.showLogin('Session expired, sign in again.');
      return;
    }
    if (failure instanceof ApiError && failure.status === 429) {
      const throttleBanner = document.createElement('div');
      throttleBanner.className = 'throttle-banner';
      const wait = failure.retryAfter ? ` Retry in ${Math.ceil(failure.retryAfter)}s.` : '';
      throttleBanner.textContent = `Request budget exhausted.${wait}`;
      this.root.prepend(throttleBanner);
      return;
    }
    const banner = document.createElement('div');
    banner.className = 'error-banner';
    banner.textContent = failure instanceof Error ? failure.message : String(failure);
    this.root.prepend(banner);
  }
}

export function bootstrap(): void {
  const root = document.getElementById('app');
  if (!root) throw new Error('missing #app container');
  const globals = window as unknown as { GRIDSCOPE_CONFIG?: Partial<AppConfig> };
  new App(root, globals.GRIDSCOPE_CONFIG ?? {}).start();
}
