/** Latest-wins preview pipeline: one warp request in flight per session.
 *
 * Every edit gets a monotonically increasing ticket. While a request is in
 * flight, newer edits overwrite the single pending slot; when the in-flight
 * request settles, only the newest pending edit is submitted, and results
 * are applied only if no newer ticket has been issued since.
 */
export class PreviewScheduler<T> {
  private ticket = 0;
  private inFlight = false;
  private pending: (() => Promise<T>) | undefined;

  constructor(
    private readonly apply: (result: T) => void,
    private readonly onError: (err: unknown) => void = () => {},
  ) {}

  submit(task: () => Promise<T>): void {
    this.ticket += 1;
    const mine = this.ticket;
    const run = async () => {
      this.inFlight = true;
      try {
        const result = await task();
        if (mine === this.ticket) this.apply(result);
      } catch (err) {
        if (mine === this.ticket) this.onError(err);
      } finally {
        this.inFlight = false;
        const next = this.pending;
        this.pending = undefined;
        if (next) this.submit(next);
      }
    };
    if (this.inFlight) {
      this.pending = task;
    } else {
      void run();
    }
  }

  get busy(): boolean {
    return this.inFlight;
  }
}
