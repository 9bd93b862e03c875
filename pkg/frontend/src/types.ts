/** Wire types mirroring the server's JSON contract. */

export interface JobSummary {
  jobId: number;
  jobName: string;
  user: string;
  status: string;
  startedOrSubmittedAt: string;
  queueOrNode: string;
  slots: number;
}

export interface JobListResponse {
  jobs: JobSummary[];
  cached: boolean;
  cachedAt: string | null;
}

export interface JobRecord {
  jobId: number;
  jobName: string;
  user: string;
  status: string;
  path: string;
  command: string;
  sourceDirectory: string;
  outpath: string;
  memoryRequested: string;
  parallel: number;
  cores: number;
  timeAdded: string;
  runTime: string;
  timeRemaining: string;
  currentMemory: number;
  maximumMemory: number;
  clusterNode: string;
  finalRunTime: string;
  finalStatus: string;
}

export interface LogFinding {
  severity: 'Warning' | 'Error';
  line: number;
  text: string;
}

export interface JobDetailResponse {
  record: JobRecord;
  scriptContent: string;
  outputTail: string[];
  logFindings: LogFinding[];
  cached: boolean;
}

export interface SubmitForm {
  jobName: string;
  scriptPath: string;
  sourceDirectory: string;
  memoryRequested: string;
  cores: number;
  parallel: boolean;
  outputPath: string;
}

export interface SubmitResponse {
  jobId: number;
  record: JobRecord;
}

export interface LoginResponse {
  token: string;
  principal: string;
  issuedAt: string;
  expiresAt: string;
}

export interface ApiErrorBody {
  stage: string;
  message: string;
  retryAfter?: number;
}

export interface PredictResponse {
  tool: string;
  metric: string;
  covariate: number;
  value: number;
  rmse: number;
  n: number;
}

const TERMINAL_STATUSES = new Set(['Completed', 'Error', 'Deleted', 'Unknown']);

/** Terminal when finalized server-side or the live status can never resume. */
export function isTerminal(record: JobRecord): boolean {
  return record.finalStatus !== '' || TERMINAL_STATUSES.has(record.status);
}
