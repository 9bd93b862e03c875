/** Job summary screen: one row per job, five fields, server order. */

import { renderLocalTime, statusBadgeClass } from '../format.js';
import type { JobListResponse } from '../types.js';

export interface JobListHandlers {
  onOpenJob(jobId: number): void;
  onNewJob(): void;
}

export function renderJobList(
  container: HTMLElement,
  response: JobListResponse,
  handlers: JobListHandlers,
): void {
  container.textContent = '';

  const header = document.createElement('div');
  header.className = 'screen-header';
  const title = document.createElement('h1');
  title.textContent = 'Jobs';
  header.appendChild(title);
  const newButton = document.createElement('button');
  newButton.className = 'action new-job';
  newButton.textContent = 'New Job';
  newButton.addEventListener('click', () => handlers.onNewJob());
  header.appendChild(newButton);
  container.appendChild(header);

  if (response.cached) {
    const banner = document.createElement('div');
    banner.className = 'stale-banner';
    const at = response.cachedAt ? renderLocalTime(response.cachedAt) : 'earlier';
    banner.textContent = `Showing cached results from ${at}`;
    container.appendChild(banner);
  }

  if (response.jobs.length === 0) {
    const empty = document.createElement('p');
    empty.className = 'empty-state';
    empty.textContent = 'No jobs on the cluster right now.';
    container.appendChild(empty);
    return;
  }

  const table = document.createElement('table');
  table.className = 'job-table';
  const head = table.createTHead().insertRow();
  for (const label of ['Job ID', 'Name', 'User', 'State', 'Started']) {
    const cell = document.createElement('th');
    cell.textContent = label;
    head.appendChild(cell);
  }
  const body = table.createTBody();
  for (const job of response.jobs) {
    const row = body.insertRow();
    row.className = 'job-row';

    const idCell = row.insertCell();
    const link = document.createElement('a');
    link.href = `#/jobs/${job.jobId}`;
    link.textContent = String(job.jobId);
    link.addEventListener('click', (event) => {
      event.preventDefault();
      handlers.onOpenJob(job.jobId);
    });
    idCell.appendChild(link);

    row.insertCell().textContent = job.jobName;
    row.insertCell().textContent = job.user;

    const statusCell = row.insertCell();
    const badge = document.createElement('span');
    badge.className = statusBadgeClass(job.status);
    badge.textContent = job.status;
    statusCell.appendChild(badge);

    row.insertCell().textContent = renderLocalTime(job.startedOrSubmittedAt);
  }
  container.appendChild(table);
}
