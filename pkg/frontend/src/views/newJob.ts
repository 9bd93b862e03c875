/** New-job form; inline validation gates every network call. */

import type { SubmitForm } from '../types.js';
import { validateSubmitForm } from '../validate.js';

export interface NewJobHandlers {
  onSubmit(form: SubmitForm): void;
  onBack(): void;
  /** Resolve a plain-text resource estimate for (tool, reads, metric). */
  onEstimate?(tool: string, reads: number, metric: string): Promise<string>;
}

const FIELDS: Array<{ key: keyof SubmitForm; label: string; placeholder: string }> = [
  { key: 'jobName', label: 'Job name', placeholder: 'align_sample1' },
  { key: 'scriptPath', label: 'Script path', placeholder: '/home/you/run.sh' },
  { key: 'sourceDirectory', label: 'Source directory', placeholder: '/home/you' },
  { key: 'memoryRequested', label: 'Memory', placeholder: '4G' },
  { key: 'outputPath', label: 'Output path (optional)', placeholder: '' },
];

export function renderNewJob(
  container: HTMLElement,
  handlers: NewJobHandlers,
  prefill?: Partial<SubmitForm>,
): void {
  container.textContent = '';

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
  title.textContent = 'New Job';
  header.appendChild(title);
  container.appendChild(header);

  const form = document.createElement('form');
  form.className = 'new-job-form';
  const inputs = new Map<string, HTMLInputElement>();

  for (const field of FIELDS) {
    const label = document.createElement('label');
    label.textContent = field.label;
    const input = document.createElement('input');
    input.name = field.key;
    input.placeholder = field.placeholder;
    const preset = prefill?.[field.key];
    if (preset !== undefined) input.value = String(preset);
    label.appendChild(input);
    form.appendChild(label);
    inputs.set(field.key, input);
  }

  const coresLabel = document.createElement('label');
  coresLabel.textContent = 'Cores';
  const cores = document.createElement('input');
  cores.name = 'cores';
  cores.type = 'number';
  cores.min = '1';
  cores.value = String(prefill?.cores ?? 1);
  coresLabel.appendChild(cores);
  form.appendChild(coresLabel);

  const parallelLabel = document.createElement('label');
  parallelLabel.className = 'checkbox';
  const parallel = document.createElement('input');
  parallel.name = 'parallel';
  parallel.type = 'checkbox';
  parallel.checked = prefill?.parallel ?? false;
  parallelLabel.appendChild(parallel);
  parallelLabel.appendChild(document.createTextNode(' Parallel (multi-core)'));
  form.appendChild(parallelLabel);

  const errorBox = document.createElement('ul');
  errorBox.className = 'form-errors';
  form.appendChild(errorBox);

  const submit = document.createElement('button');
  submit.type = 'submit';
  submit.className = 'action submit';
  submit.textContent = 'Submit job';
  form.appendChild(submit);

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    const candidate: SubmitForm = {
      jobName: inputs.get('jobName')!.value,
      scriptPath: inputs.get('scriptPath')!.value,
      sourceDirectory: inputs.get('sourceDirectory')!.value,
      memoryRequested: inputs.get('memoryRequested')!.value || '1G',
      cores: Number(cores.value),
      parallel: parallel.checked,
      outputPath: inputs.get('outputPath')!.value,
    };
    const errors = validateSubmitForm(candidate);
    errorBox.textContent = '';
    if (errors.length > 0) {
      for (const message of errors) {
        const item = document.createElement('li');
        item.className = 'form-error';
        item.textContent = message;
        errorBox.appendChild(item);
      }
      return; // invalid: no network call
    }
    handlers.onSubmit(candidate);
  });

  container.appendChild(form);
  if (handlers.onEstimate) {
    container.appendChild(buildEstimator(handlers.onEstimate));
  }
}

function buildEstimator(
  estimate: (tool: string, reads: number, metric: string) => Promise<string>,
): HTMLElement {
  const panel = document.createElement('section');
  panel.className = 'panel estimator';
  const title = document.createElement('h2');
  title.textContent = 'Estimate from history';
  panel.appendChild(title);

  const tool = document.createElement('input');
  tool.name = 'estimateTool';
  tool.placeholder = 'tool tag, e.g. bwa';
  panel.appendChild(tool);
  const reads = document.createElement('input');
  reads.name = 'estimateReads';
  reads.placeholder = 'reads, e.g. 12100000';
  panel.appendChild(reads);
  const metric = document.createElement('select');
  metric.name = 'estimateMetric';
  for (const [value, label] of [
    ['elapsed_seconds', 'elapsed time'],
    ['max_memory_bytes', 'peak memory'],
  ]) {
    const option = document.createElement('option');
    option.value = value;
    option.textContent = label;
    metric.appendChild(option);
  }
  panel.appendChild(metric);

  const result = document.createElement('p');
  result.className = 'estimate-result';
  const button = document.createElement('button');
  button.type = 'button';
  button.className = 'action estimate';
  button.textContent = 'Estimate';
  button.addEventListener('click', () => {
    const readsValue = Number(reads.value);
    if (!tool.value.trim() || !Number.isFinite(readsValue) || readsValue <= 0) {
      result.textContent = 'Enter a tool tag and a positive read count.';
      return; // invalid: no network call
    }
    void estimate(tool.value.trim(), readsValue, metric.value)
      .then((text) => {
        result.textContent = text;
      })
      .catch((failure: unknown) => {
        result.textContent = failure instanceof Error ? failure.message : String(failure);
      });
  });
  panel.appendChild(button);
  panel.appendChild(result);
  return panel;
}
