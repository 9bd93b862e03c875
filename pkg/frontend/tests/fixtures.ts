/** Recorded API payloads (shapes match the server contract tests). */

import type { JobDetailResponse, JobListResponse, JobRecord } from '../src/types.js';

export const threeJobs: JobListResponse = {
  jobs: [
    {
      jobId: 101,
      jobName: 'align1',
      user: 'alice',
      status: 'Running',
      startedOrSubmittedAt: '2024-01-01T00:00:10',
      queueOrNode: 'all.q@node002',
      slots: 4,
    },
    {
      jobId: 102,
      jobName: 'align2',
      user: 'alice',
      status: 'Queued',
      startedOrSubmittedAt: '2024-01-01T00:00:12',
      queueOrNode: '',
      slots: 1,
    },
    {
      jobId: 103,
      jobName: 'variant_call',
      user: 'bob',
      status: 'Error',
      startedOrSubmittedAt: '2024-01-01T00:01:02',
      queueOrNode: '',
      slots: 1,
    },
  ],
  cached: false,
  cachedAt: null,
};

export const record101: JobRecord = {
  jobId: 101,
  jobName: 'align1',
  user: 'alice',
  status: 'Running',
  path: '/home/alice/run.sh',
  command: 'qsub -N align1 -wd /home/alice -l h_vmem=8G -pe smp 4 /home/alice/run.sh',
  sourceDirectory: '/home/alice',
  outpath: '/home/alice/align1.o101',
  memoryRequested: '8G',
  parallel: 1,
  cores: 4,
  timeAdded: '2024-01-01T00:00:00+00:00',
  runTime: '00:05:10',
  timeRemaining: '',
  currentMemory: 1073741824,
  maximumMemory: 2684354560,
  clusterNode: 'all.q@node002',
  finalRunTime: '',
  finalStatus: '',
};

export const detail101: JobDetailResponse = {
  record: record101,
  scriptContent: '#!/bin/sh\nbwa mem ref.fa reads.fq > out.sam\n',
  outputTail: ['[align1] started on all.q@node002', 'aligned 1000 reads'],
  logFindings: [
    { severity: 'Warning', line: 1, text: 'WARNING: low memory' },
    { severity: 'Error', line: 3, text: 'Error: segfault at 0x0' },
  ],
  cached: false,
};

export function terminalDetail(): JobDetailResponse {
  return {
    ...detail101,
    record: { ...record101, status: 'Completed', finalStatus: 'Completed', finalRunTime: '01:00:00' },
  };
}
