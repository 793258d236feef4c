/** Debouncing and per-panel request sequencing.
 *
 * Each panel keeps at most one logical request in flight; newer calls
 * supersede older ones and any response that is no longer the latest is
 * discarded, so out-of-order completions can never paint stale data.
 */

export class Debouncer<A extends unknown[]> {
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private ms: number,
    private fn: (...args: A) => void,
  ) {}

  call(...args: A): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.fn(...args);
    }, this.ms);
  }

  cancel(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }
}

export class PanelRequester {
  private seq = 0;

  /** Run fn; resolve with its result only if no newer run started since. */
  async run<T>(fn: () => Promise<T>): Promise<T | undefined> {
    const id = ++this.seq;
    const result = await fn();
    return id === this.seq ? result : undefined;
  }

  get inFlightSuperseded(): number {
    return this.seq;
  }
}
