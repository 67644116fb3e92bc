import type { EntityInfo, IndexResponse, SearchResponse } from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

/** Thin client for the search service's /v1 endpoints. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  /**
   * Index a document. The text is sent exactly as given: any client-side
   * normalization would break the returned character offsets.
   */
  async indexDocument(text: string, docId?: string): Promise<IndexResponse> {
    const body: Record<string, string> = { text };
    if (docId) body.doc_id = docId;
    const response = await this.fetchFn(`${this.baseUrl}/v1/documents`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    return asJson<IndexResponse>(response);
  }

  async search(
    docId: string,
    query: string,
    options: { topK?: number; signal?: AbortSignal } = {},
  ): Promise<SearchResponse> {
    const body: Record<string, unknown> = { query };
    if (options.topK !== undefined) body.top_k = options.topK;
    const response = await this.fetchFn(
      `${this.baseUrl}/v1/documents/${encodeURIComponent(docId)}/search`,
      {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(body),
        signal: options.signal,
      },
    );
    return asJson<SearchResponse>(response);
  }

  async getEntity(entityId: string): Promise<EntityInfo> {
    const response = await this.fetchFn(
      `${this.baseUrl}/v1/entities/${encodeURIComponent(entityId)}`,
    );
    return asJson<EntityInfo>(response);
  }
}
