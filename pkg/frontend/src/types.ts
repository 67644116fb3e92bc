export interface Match {
  start: number;
  end: number;
  text: string;
  entity_id: string;
  score: number;
  rank: number;
}

export interface SearchResponse {
  doc_id: string;
  matches: Match[];
  latency_ms: number;
}

export interface IndexResponse {
  doc_id: string;
  mention_count: number;
  entity_count: number;
  indexing_ms: number;
}

export interface EntityInfo {
  entity_id: string;
  title: string;
  description: string;
}

/** Client-side session; the UI is a pure view over service responses. */
export interface UiSessionState {
  docId: string | null;
  documentText: string;
  currentQuery: string;
  matches: Match[];
  selectedMatch: number | null;
  history: string[];
}
