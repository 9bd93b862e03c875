/** Formatting-only helpers: the client never computes on job data. */

const BADGE_CLASSES: Record<string, string> = {
  Queued: 'badge badge-queued',
  Running: 'badge badge-running',
  Suspended: 'badge badge-suspended',
  Error: 'badge badge-error',
  Deleted: 'badge badge-deleted',
  Completed: 'badge badge-completed',
};

export function statusBadgeClass(status: string): string {
  return BADGE_CLASSES[status] ?? 'badge badge-unknown';
}

export function renderLocalTime(iso: string): string {
  const parsed = new Date(iso);
  if (Number.isNaN(parsed.getTime())) return iso;
  return parsed.toLocaleString();
}

export function scriptName(path: string): string {
  const parts = path.split('/');
  return parts[parts.length - 1] || path;
}
