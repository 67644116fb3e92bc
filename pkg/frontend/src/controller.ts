import type { SearchResponse } from './types.js';

export type SearchRunner = (query: string, signal: AbortSignal) => Promise<SearchResponse>;

function isAbort(error: unknown): boolean {
  return error instanceof DOMException && error.name === 'AbortError';
}

/**
 * Debounced, single-flight search dispatcher.
 *
 * At most one request is in flight: issuing a new search aborts the previous
 * one, and stale responses (however late they land) are never delivered, so
 * the rendered results always belong to the newest query.
 */
export class SearchController {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inflight: AbortController | null = null;
  private sequence = 0;

  constructor(
    private readonly run: SearchRunner,
    private readonly onResult: (query: string, response: SearchResponse) => void,
    private readonly onError: (query: string, error: unknown) => void,
    private readonly debounceMs = 300,
  ) {}

  /** Schedule a search after the debounce window; typing resets the window. */
  request(query: string): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.flush(query);
    }, this.debounceMs);
  }

  /** Run a search immediately, cancelling whatever was in flight. */
  async flush(query: string): Promise<void> {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const ticket = ++this.sequence;
    try {
      const response = await this.run(query, controller.signal);
      if (ticket === this.sequence) this.onResult(query, response);
    } catch (error) {
      if (ticket === this.sequence && !isAbort(error)) this.onError(query, error);
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }

  cancel(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.sequence++;
    this.inflight?.abort();
    this.inflight = null;
  }
}
