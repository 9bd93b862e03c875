/** Per-job screen: directory, script name/content, output tail, log findings. */

import { scriptName } from '../format.js';
import { isTerminal, type JobDetailResponse } from '../types.js';

export interface JobDetailHandlers {
  onCancel(jobId: number): void;
  onResubmit(detail: JobDetailResponse): void;
  onNewJob(): void;
  onBack(): void;
}

export function renderJobDetail(
  container: HTMLElement,
  detail: JobDetailResponse,
  handlers: JobDetailHandlers,
): void {
  container.textContent = '';
  const record = detail.record;

  const header = document.createElement('div');
  header.className = 'screen-header';
  const back = document.createElement('a');
  back.href = '#/jobs';
  back.className = 'back-link';
  back.textContent = '< Jobs';
  back.addEventListener('click', (event) => {
    event.preventDefault();
    handlers.onBack();
  });
  header.appendChild(back);
  const title = document.createElement('h1');
  title.textContent = `${record.jobId} ${record.jobName}`;
  header.appendChild(title);
  container.appendChild(header);

  const meta = document.createElement('dl');
  meta.className = 'job-meta';
  addField(meta, 'Source directory', record.sourceDirectory, 'source-directory');
  addField(meta, 'Script', scriptName(record.path), 'script-name');
  addField(meta, 'State', record.finalStatus || record.status, 'job-state');
  container.appendChild(meta);

  const script = document.createElement('section');
  script.className = 'panel script-panel';
  const scriptTitle = document.createElement('h2');
  scriptTitle.textContent = 'Script';
  script.appendChild(scriptTitle);
  const scriptBody = document.createElement('pre');
  scriptBody.className = 'monospace script-content';
  scriptBody.textContent = detail.scriptContent;
  script.appendChild(scriptBody);
  container.appendChild(script);

  const output = document.createElement('section');
  output.className = 'panel output-panel';
  const outputTitle = document.createElement('h2');
  outputTitle.textContent = 'Output (last lines)';
  output.appendChild(outputTitle);
  const tail = document.createElement('pre');
  tail.className = 'monospace output-tail';
  tail.textContent = detail.outputTail.join('\n');
  output.appendChild(tail);
  container.appendChild(output);

  const logs = document.createElement('section');
  logs.className = 'panel findings-panel';
  const logsTitle = document.createElement('h2');
  logsTitle.textContent = 'Warnings and errors';
  logs.appendChild(logsTitle);
  if (detail.logFindings.length === 0) {
    const none = document.createElement('p');
    none.className = 'no-findings';
    none.textContent = 'Nothing flagged in the error log.';
    logs.appendChild(none);
  } else {
    const list = document.createElement('ul');
    list.className = 'findings';
    for (const finding of detail.logFindings) {
      const item = document.createElement('li');
      item.className = `finding finding-${finding.severity.toLowerCase()}`;
      item.textContent = `line ${finding.line}: ${finding.text}`;
      list.appendChild(item);
    }
    logs.appendChild(list);
  }
  container.appendChild(logs);

  const actions = document.createElement('div');
  actions.className = 'actions';
  const cancel = document.createElement('button');
  cancel.className = 'action cancel';
  cancel.textContent = 'Cancel';
  cancel.disabled = isTerminal(record);
  cancel.addEventListener('click', () => handlers.onCancel(record.jobId));
  actions.appendChild(cancel);
  const resubmit = document.createElement('button');
  resubmit.className = 'action resubmit';
  resubmit.textContent = 'Resubmit';
  resubmit.addEventListener('click', () => handlers.onResubmit(detail));
  actions.appendChild(resubmit);
  const fresh = document.createElement('button');
  fresh.className = 'action new-job';
  fresh.textContent = 'New Job';
  fresh.addEventListener('click', () => handlers.onNewJob());
  actions.appendChild(fresh);
  container.appendChild(actions);
}

function addField(list: HTMLDListElement, label: string, value: string, cls: string): void {
  const term = document.createElement('dt');
  term.textContent = label;
  list.appendChild(term);
  const detail = document.createElement('dd');
  detail.className = cls;
  detail.textContent = value;
  list.appendChild(detail);
}
