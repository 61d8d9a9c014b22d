/**
 * Last-write-wins request queue for slider drags.
 *
 * At most one request per key is outstanding. While one flies, newer
 * values for the same key overwrite each other and only the newest is
 * sent afterwards, so a drag reaches the service as a short prefix plus
 * the final value, never the full event stream.
 */
export class DragCoalescer {
  private queued = new Map<string, number>();
  private inflight = new Set<string>();
  private waiters: (() => void)[] = [];

  constructor(
    private readonly send: (key: string, value: number) => Promise<void>,
    private readonly onSendError: (
      key: string,
      value: number,
      err: unknown,
    ) => void = () => {},
  ) {}

  push(key: string, value: number): void {
    this.queued.set(key, value);
    if (!this.inflight.has(key)) void this.pump(key);
  }

  /** True while `key` has a request in flight or a value waiting. */
  pending(key: string): boolean {
    return this.inflight.has(key) || this.queued.has(key);
  }

  get busy(): boolean {
    return this.inflight.size > 0;
  }

  /** Resolves once every queued value has been sent. */
  idle(): Promise<void> {
    if (!this.busy) return Promise.resolve();
    return new Promise((resolve) => this.waiters.push(resolve));
  }

  private async pump(key: string): Promise<void> {
    this.inflight.add(key);
    try {
      while (this.queued.has(key)) {
        const value = this.queued.get(key)!;
        this.queued.delete(key);
        try {
          await this.send(key, value);
        } catch (err) {
          // a failed send must not stall the rest of the drag
          this.onSendError(key, value, err);
        }
      }
    } finally {
      this.inflight.delete(key);
      if (this.inflight.size === 0) {
        const waiting = this.waiters;
        this.waiters = [];
        for (const wake of waiting) wake();
      }
    }
  }
}
