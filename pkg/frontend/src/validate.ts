/** Client-side submit-form validation; runs before any network call. */

import type { SubmitForm } from './types.js';

export function validateSubmitForm(form: SubmitForm): string[] {
  const errors: string[] = [];
  if (!form.jobName.trim()) {
    errors.push('job name is required');
  } else if (/[\s'"`;|&<>$\\]/.test(form.jobName)) {
    errors.push('job name must not contain spaces or shell characters');
  }
  if (!form.scriptPath.trim()) {
    errors.push('script path is required');
  }
  if (!form.sourceDirectory.trim()) {
    errors.push('source directory is required');
  }
  if (!Number.isInteger(form.cores) || form.cores < 1) {
    errors.push('cores must be an integer >= 1');
  }
  if (!form.parallel && form.cores !== 1) {
    errors.push('non-parallel jobs must use exactly 1 core');
  }
  if (!/^\d+(\.\d+)?[KMGT]?$/.test(form.memoryRequested.trim())) {
    errors.push('memory must look like 4G, 512M, ...');
  }
  return errors;
}
