import { beforeEach, describe, expect, it, vi } from 'vitest';

import { renderJobList } from '../src/views/jobList.js';
import { threeJobs } from './fixtures.js';

const handlers = { onOpenJob: vi.fn(), onNewJob: vi.fn() };

describe('job list screen', () => {
  let container: HTMLElement;

  beforeEach(() => {
    container = document.createElement('div');
    document.body.appendChild(container);
  });

  it('renders one row per job with matching ids, in server order', () => {
    renderJobList(container, threeJobs, handlers);
    const rows = container.querySelectorAll('tbody tr');
    expect(rows).toHaveLength(3);
    const ids = Array.from(rows).map((row) => row.querySelector('a')!.textContent);
    expect(ids).toEqual(['101', '102', '103']);
  });

  it('renders exactly the five summary fields per row', () => {
    renderJobList(container, threeJobs, handlers);
    const first = container.querySelector('tbody tr')!;
    const cells = first.querySelectorAll('td');
    expect(cells).toHaveLength(5);
    expect(cells[0].textContent).toBe('101'); // job id
    expect(cells[1].textContent).toBe('align1'); // name
    expect(cells[2].textContent).toBe('alice'); // user
    expect(cells[3].querySelector('.badge')!.textContent).toBe('Running'); // state
    expect(cells[4].textContent).not.toBe(''); // started timestamp, locale-rendered
    const headers = Array.from(container.querySelectorAll('th')).map((th) => th.textContent);
    expect(headers).toEqual(['Job ID', 'Name', 'User', 'State', 'Started']);
  });

  it('links each job id to its detail screen', () => {
    renderJobList(container, threeJobs, handlers);
    const link = container.querySelector('tbody a')!;
    expect(link.getAttribute('href')).toBe('#/jobs/101');
    (link as HTMLAnchorElement).click();
    expect(handlers.onOpenJob).toHaveBeenCalledWith(101);
  });

  it('shows an empty state instead of a table when there are no jobs', () => {
    renderJobList(container, { jobs: [], cached: false, cachedAt: null }, handlers);
    expect(container.querySelector('table')).toBeNull();
    expect(container.querySelector('.empty-state')!.textContent).toMatch(/no jobs/i);
  });

  it('renders rows plus a staleness banner for throttled cached payloads', () => {
    renderJobList(
      container,
      { ...threeJobs, cached: true, cachedAt: '2024-01-01T00:00:30+00:00' },
      handlers,
    );
    expect(container.querySelectorAll('tbody tr')).toHaveLength(3);
    expect(container.querySelector('.stale-banner')!.textContent).toMatch(/cached/i);
  });

  it('status badges vary by state', () => {
    renderJobList(container, threeJobs, handlers);
    const badges = Array.from(container.querySelectorAll('.badge'));
    expect(badges.map((b) => b.className)).toEqual([
      'badge badge-running',
      'badge badge-queued',
      'badge badge-error',
    ]);
  });
});
