/** Interval polling with an in-flight guard: overlapping ticks are skipped. */

export interface Poller {
  start(): void;
  stop(): void;
  /** Fetch immediately and restart the interval. */
  fetchNow(): void;
}

export function createPoller(tick: () => Promise<void>, intervalMs: number): Poller {
  let timer: ReturnType<typeof setInterval> | null = null;
  let inFlight = false;

  async function run(): Promise<void> {
    if (inFlight) return; // previous request still pending: skip this tick
    inFlight = true;
    try {
      await tick();
    } catch {
      // keep the last rendered state on errors; the next tick retries
    } finally {
      inFlight = false;
    }
  }

  return {
    start() {
      if (timer !== null) return;
      void run();
      timer = setInterval(() => void run(), intervalMs);
    },
    stop() {
      if (timer !== null) {
        clearInterval(timer);
        timer = null;
      }
    },
    fetchNow() {
      this.stop();
      void run();
      timer = setInterval(() => void run(), intervalMs);
    },
  };
}

/**
 * Pick a refresh interval that keeps this client inside the server's
 * per-user budget: never faster than window/threshold, never below the
 * configured floor.
 */
export function safeRefreshIntervalMs(
  windowSeconds: number,
  threshold: number,
  floorMs = 15_000,
): number {
  const budgetMs = (windowSeconds / Math.max(threshold, 1)) * 1000;
  return Math.max(floorMs, Math.ceil(budgetMs));
}
