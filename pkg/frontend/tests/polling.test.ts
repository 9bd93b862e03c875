import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import { createPoller, safeRefreshIntervalMs } from '../src/polling.js';

describe('poller', () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it('fetches immediately and then on the interval', async () => {
    const tick = vi.fn().mockResolvedValue(undefined);
    const poller = createPoller(tick, 1000);
    poller.start();
    expect(tick).toHaveBeenCalledTimes(1);
    await vi.advanceTimersByTimeAsync(3000);
    expect(tick).toHaveBeenCalledTimes(4);
    poller.stop();
    await vi.advanceTimersByTimeAsync(5000);
    expect(tick).toHaveBeenCalledTimes(4);
  });

  it('skips ticks while a request is still in flight', async () => {
    let release: () => void = () => undefined;
    const tick = vi.fn(
      () =>
        new Promise<void>((resolve) => {
          release = resolve;
        }),
    );
    const poller = createPoller(tick, 1000);
    poller.start();
    await vi.advanceTimersByTimeAsync(3500); // three intervals pass, request pending
    expect(tick).toHaveBeenCalledTimes(1);
    release();
    await vi.advanceTimersByTimeAsync(1000);
    expect(tick).toHaveBeenCalledTimes(2);
    poller.stop();
  });

  it('errors do not kill the loop', async () => {
    const tick = vi.fn().mockRejectedValue(new Error('boom'));
    const poller = createPoller(tick, 1000);
    poller.start();
    await vi.advanceTimersByTimeAsync(2000);
    expect(tick).toHaveBeenCalledTimes(3);
    poller.stop();
  });
});

describe('refresh budget', () => {
  it('never refreshes faster than window/threshold', () => {
    expect(safeRefreshIntervalMs(10, 10)).toBe(15_000); // floor dominates
    expect(safeRefreshIntervalMs(60, 2)).toBe(30_000); // budget dominates
    expect(safeRefreshIntervalMs(10, 1, 5_000)).toBe(10_000);
  });
});
