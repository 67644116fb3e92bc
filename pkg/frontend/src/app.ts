import { ApiError } from './api.js';
import { SearchController } from './controller.js';
import {
  hideBanner,
  renderBadge,
  renderEvidence,
  renderHighlights,
  showBanner,
} from './render.js';
import { createSession, withDocument, withMatches, withSelection } from './state.js';
import type {
  EntityInfo,
  IndexResponse,
  SearchResponse,
  UiSessionState,
} from './types.js';

/** Structural client interface so tests can substitute a mock service. */
export interface ServiceClient {
  indexDocument(text: string, docId?: string): Promise<IndexResponse>;
  search(
    docId: string,
    query: string,
    options?: { topK?: number; signal?: AbortSignal },
  ): Promise<SearchResponse>;
  getEntity(entityId: string): Promise<EntityInfo>;
}

export interface AppOptions {
  debounceMs?: number;
  topK?: number;
}

const TEMPLATE = `
  <div class="layout">
    <section class="input-pane">
      <label for="doc-input">Document</label>
      <textarea id="doc-input" data-testid="doc-input"
        placeholder="Paste the document to search"></textarea>
      <label for="query-input">Query</label>
      <input id="query-input" data-testid="query-input" type="search"
        placeholder="Describe what to find, e.g. social network platforms" />
      <div class="badge" data-testid="badge"></div>
      <div class="banner" data-testid="banner"></div>
    </section>
    <section class="result-pane">
      <div class="highlights" data-testid="highlights"></div>
      <aside class="evidence" data-testid="evidence"></aside>
    </section>
  </div>
`;

export class App {
  state: UiSessionState = createSession();

  private readonly docInput: HTMLTextAreaElement;
  private readonly queryInput: HTMLInputElement;
  private readonly badge: HTMLElement;
  private readonly banner: HTMLElement;
  private readonly highlights: HTMLElement;
  private readonly evidence: HTMLElement;
  private readonly controller: SearchController;
  private readonly entityCache = new Map<string, EntityInfo>();
  private indexedText: string | null = null;
  private readonly topK?: number;

  constructor(
    root: HTMLElement,
    private readonly client: ServiceClient,
    options: AppOptions = {},
  ) {
    root.innerHTML = TEMPLATE;
    this.docInput = root.querySelector('[data-testid="doc-input"]') as HTMLTextAreaElement;
    this.queryInput = root.querySelector('[data-testid="query-input"]') as HTMLInputElement;
    this.badge = root.querySelector('[data-testid="badge"]') as HTMLElement;
    this.banner = root.querySelector('[data-testid="banner"]') as HTMLElement;
    this.highlights = root.querySelector('[data-testid="highlights"]') as HTMLElement;
    this.evidence = root.querySelector('[data-testid="evidence"]') as HTMLElement;
    this.topK = options.topK;
    this.controller = new SearchController(
      (query, signal) => this.runSearch(query, signal),
      (query, response) => this.applyResults(query, response),
      (query, error) => this.reportError(query, error),
      options.debounceMs ?? 300,
    );
    this.docInput.addEventListener('input', () => this.resetDocument());
    this.queryInput.addEventListener('input', () => {
      const query = this.queryInput.value;
      if (!query.trim()) {
        this.controller.cancel();
        this.clearResults();
        return;
      }
      this.controller.request(query);
    });
    this.queryInput.addEventListener('keydown', (event) => {
      if (event.key === 'Enter' && this.queryInput.value.trim()) {
        void this.controller.flush(this.queryInput.value);
      }
    });
    this.render();
  }

  /** Immediate search, bypassing the debounce (used by tests and Enter). */
  searchNow(query: string): Promise<void> {
    this.queryInput.value = query;
    return this.controller.flush(query);
  }

  private resetDocument(): void {
    this.indexedText = null;
    this.state = createSession();
    this.state = { ...this.state, documentText: this.docInput.value };
    this.clearResults();
  }

  private clearResults(): void {
    this.state = { ...this.state, matches: [], selectedMatch: null, currentQuery: '' };
    this.badge.textContent = '';
    this.render();
  }

  private async ensureIndexed(): Promise<string> {
    const text = this.docInput.value;
    if (!text) throw new Error('paste a document first');
    if (this.indexedText === text && this.state.docId) return this.state.docId;
    // The exact textarea content is posted; offsets in responses address it.
    const stats = await this.client.indexDocument(text);
    this.indexedText = text;
    this.state = withDocument(this.state, stats.doc_id, text);
    return stats.doc_id;
  }

  private async runSearch(query: string, signal: AbortSignal): Promise<SearchResponse> {
    const docId = await this.ensureIndexed();
    return this.client.search(docId, query, { topK: this.topK, signal });
  }

  private applyResults(query: string, response: SearchResponse): void {
    hideBanner(this.banner);
    this.state = withMatches(this.state, query, response.matches);
    renderBadge(this.badge, response.matches);
    this.render();
  }

  private reportError(query: string, error: unknown): void {
    if (error instanceof ApiError && error.status === 409) {
      showBanner(this.banner, `Index is stale: ${error.message}`, 'Re-index', () => {
        this.indexedText = null;
        void this.controller.flush(query);
      });
      return;
    }
    const message = error instanceof Error ? error.message : String(error);
    showBanner(this.banner, `Search failed: ${message}`, 'Retry', () => {
      void this.controller.flush(query);
    });
  }

  private async selectMatch(index: number): Promise<void> {
    this.state = withSelection(this.state, index);
    const match = this.state.matches[index];
    let info = this.entityCache.get(match.entity_id) ?? null;
    renderEvidence(this.evidence, match, info);
    if (!info) {
      try {
        info = await this.client.getEntity(match.entity_id);
        this.entityCache.set(match.entity_id, info);
      } catch {
        info = { entity_id: match.entity_id, title: match.entity_id, description: '' };
      }
      if (this.state.selectedMatch === index) {
        renderEvidence(this.evidence, match, info);
      }
    }
  }

  private render(): void {
    renderHighlights(
      this.highlights,
      this.state.documentText,
      this.state.matches,
      (index) => void this.selectMatch(index),
    );
    const selected =
      this.state.selectedMatch === null ? null : this.state.matches[this.state.selectedMatch];
    renderEvidence(
      this.evidence,
      selected,
      selected ? (this.entityCache.get(selected.entity_id) ?? null) : null,
    );
  }
}

export function mountApp(
  root: HTMLElement,
  client: ServiceClient,
  options: AppOptions = {},
): App {
  return new App(root, client, options);
}
