import { beforeEach, describe, expect, it, vi } from 'vitest';

import { renderJobDetail } from '../src/views/jobDetail.js';
import { detail101, terminalDetail } from './fixtures.js';

function makeHandlers() {
  return { onCancel: vi.fn(), onResubmit: vi.fn(), onNewJob: vi.fn(), onBack: vi.fn() };
}

describe('job detail screen', () => {
  let container: HTMLElement;

  beforeEach(() => {
    container = document.createElement('div');
    document.body.appendChild(container);
  });

  it('renders source directory, script name, and script content byte-for-byte', () => {
    renderJobDetail(container, detail101, makeHandlers());
    expect(container.querySelector('.source-directory')!.textContent).toBe('/home/alice');
    expect(container.querySelector('.script-name')!.textContent).toBe('run.sh');
    expect(container.querySelector('.script-content')!.textContent).toBe(
      '#!/bin/sh\nbwa mem ref.fa reads.fq > out.sam\n',
    );
  });

  it('renders the output tail lines in order', () => {
    renderJobDetail(container, detail101, makeHandlers());
    expect(container.querySelector('.output-tail')!.textContent).toBe(
      '[align1] started on all.q@node002\naligned 1000 reads',
    );
  });

  it('styles error findings distinctly from warnings', () => {
    renderJobDetail(container, detail101, makeHandlers());
    const errors = container.querySelectorAll('.finding-error');
    const warnings = container.querySelectorAll('.finding-warning');
    expect(errors).toHaveLength(1);
    expect(warnings).toHaveLength(1);
    expect(errors[0].textContent).toContain('segfault');
  });

  it('enables Cancel for live jobs and wires it to the handler', () => {
    const handlers = makeHandlers();
    renderJobDetail(container, detail101, handlers);
    const cancel = container.querySelector<HTMLButtonElement>('.action.cancel')!;
    expect(cancel.disabled).toBe(false);
    cancel.click();
    expect(handlers.onCancel).toHaveBeenCalledWith(101);
  });

  it('disables Cancel for terminal jobs', () => {
    renderJobDetail(container, terminalDetail(), makeHandlers());
    const cancel = container.querySelector<HTMLButtonElement>('.action.cancel')!;
    expect(cancel.disabled).toBe(true);
  });

  it('resubmit hands the full detail back for prefill', () => {
    const handlers = makeHandlers();
    renderJobDetail(container, detail101, handlers);
    container.querySelector<HTMLButtonElement>('.action.resubmit')!.click();
    expect(handlers.onResubmit).toHaveBeenCalledWith(detail101);
  });

  it('shows a friendly message when the error log is clean', () => {
    renderJobDetail(container, { ...detail101, logFindings: [] }, makeHandlers());
    expect(container.querySelector('.no-findings')).not.toBeNull();
    expect(container.querySelectorAll('.finding')).toHaveLength(0);
  });
});
