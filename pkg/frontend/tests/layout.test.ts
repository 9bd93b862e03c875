/**
 * 360-px layout audit. jsdom has no layout engine, so this checks the
 * invariants that make the narrow viewport work: the viewport meta tag,
 * no fixed pixel widths wider than 360 outside media queries, fluid
 * containers, and wrap-friendly content styles.
 */

import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import { describe, expect, it, vi } from 'vitest';

import { renderJobDetail } from '../src/views/jobDetail.js';
import { renderJobList } from '../src/views/jobList.js';
import { detail101, threeJobs } from './fixtures.js';

const here = dirname(fileURLToPath(import.meta.url));
const css = readFileSync(join(here, '../src/style.css'), 'utf8');
const html = readFileSync(join(here, '../index.html'), 'utf8');

function widthDeclarations(source: string): number[] {
  // fixed widths declared outside media queries
  const withoutMedia = source.replace(/@media[^{]*\{[\s\S]*?\n\}/g, '');
  const widths: number[] = [];
  for (const match of withoutMedia.matchAll(/(?:^|[^-])(?:min-)?width:\s*(\d+(?:\.\d+)?)px/g)) {
    widths.push(Number(match[1]));
  }
  return widths;
}

describe('360px layout audit', () => {
  it('declares a mobile viewport', () => {
    expect(html).toMatch(/<meta name="viewport" content="width=device-width, initial-scale=1"/);
  });

  it('stylesheet has no fixed widths wider than 360px', () => {
    for (const width of widthDeclarations(css)) {
      expect(width).toBeLessThanOrEqual(360);
    }
  });

  it('containers are fluid: app shell and tables use relative widths', () => {
    expect(css).toMatch(/#app\s*\{[^}]*max-width:\s*[\d.]+rem/);
    expect(css).toMatch(/\.job-table\s*\{[^}]*width:\s*100%/);
  });

  it('long content is wrap-safe (tables, preformatted blocks)', () => {
    expect(css).toMatch(/\.job-table th,\s*\.job-table td\s*\{[^}]*overflow-wrap:\s*anywhere/);
    expect(css).toMatch(/\.monospace\s*\{[^}]*white-space:\s*pre-wrap/);
  });

  it('rendered screens carry no inline pixel widths', () => {
    const listContainer = document.createElement('div');
    renderJobList(listContainer, threeJobs, { onOpenJob: vi.fn(), onNewJob: vi.fn() });
    const detailContainer = document.createElement('div');
    renderJobDetail(detailContainer, detail101, {
      onCancel: vi.fn(),
      onResubmit: vi.fn(),
      onNewJob: vi.fn(),
      onBack: vi.fn(),
    });
    for (const node of [
      ...listContainer.querySelectorAll<HTMLElement>('*'),
      ...detailContainer.querySelectorAll<HTMLElement>('*'),
    ]) {
      expect(node.style.width).toBe('');
      expect(node.getAttribute('width')).toBeNull();
    }
  });
});
