import type { Match, UiSessionState } from './types.js';

export function createSession(): UiSessionState {
  return {
    docId: null,
    documentText: '',
    currentQuery: '',
    matches: [],
    selectedMatch: null,
    history: [],
  };
}

export function withDocument(
  state: UiSessionState,
  docId: string,
  text: string,
): UiSessionState {
  return { ...state, docId, documentText: text, matches: [], selectedMatch: null };
}

export function withMatches(
  state: UiSessionState,
  query: string,
  matches: Match[],
): UiSessionState {
  const history =
    query && state.history[state.history.length - 1] !== query
      ? [...state.history, query]
      : state.history;
  return { ...state, currentQuery: query, matches, selectedMatch: null, history };
}

export function withSelection(state: UiSessionState, index: number | null): UiSessionState {
  if (index !== null && (index < 0 || index >= state.matches.length)) {
    throw new RangeError(`selected match ${index} out of range`);
  }
  return { ...state, selectedMatch: index };
}
