/** Trailing-edge debounce; the wrapped call collapses bursts into one. */
export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  intervalMs: number,
): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | undefined;
  return (...args: A) => {
    if (timer !== undefined) {
      clearTimeout(timer);
    }
    timer = setTimeout(() => {
      timer = undefined;
      fn(...args);
    }, intervalMs);
  };
}

/**
 * Per-endpoint single-flight scheduler.
 *
 * At most one request is in flight; while it runs, newer payloads replace
 * the pending slot so only the latest one is issued afterwards. Responses
 * that lost the race are dropped via their request id.
 */
export class SingleFlight<P, R> {
  private inFlight = false;
  private pending: P | null = null;
  private nextId = 0;
  private controller: AbortController | null = null;
  inFlightPeak = 0; // instrumentation for tests
  private active = 0;

  constructor(
    private readonly issue: (payload: P, signal: AbortSignal) => Promise<R>,
    private readonly onResult: (payload: P, result: R) => void,
    private readonly onError: (err: unknown) => void = () => undefined,
  ) {}

  request(payload: P): void {
    if (this.inFlight) {
      this.pending = payload;
      return;
    }
    void this.fire(payload);
  }

  private async fire(payload: P): Promise<void> {
    const id = ++this.nextId;
    this.inFlight = true;
    this.active += 1;
    this.inFlightPeak = Math.max(this.inFlightPeak, this.active);
    this.controller = new AbortController();
    try {
      const result = await this.issue(payload, this.controller.signal);
      if (id === this.nextId) {
        this.onResult(payload, result);
      }
    } catch (err) {
      if (!(err instanceof DOMException && err.name === "AbortError")) {
        this.onError(err);
      }
    } finally {
      this.active -= 1;
      this.inFlight = false;
      const next = this.pending;
      this.pending = null;
      if (next !== null) {
        void this.fire(next);
      }
    }
  }

  cancel(): void {
    this.pending = null;
    this.controller?.abort();
  }
}
