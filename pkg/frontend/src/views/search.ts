/** Search view: the raw query string goes to the server unmodified, so
 * operators learn exactly one grammar (terms, "phrases", field:value). */

import { ApiError, MfApi, SearchHit } from "../api.js";

export interface SearchState {
  query: string;
  hits: SearchHit[];
  searched: boolean;
  error: string | null;
}

export function initialSearchState(): SearchState {
  return { query: "", hits: [], searched: false, error: null };
}

export async function runSearch(
  api: MfApi,
  state: SearchState,
  limit = 50,
): Promise<SearchState> {
  try {
    const hits = await api.search(state.query, limit);
    return { ...state, hits, searched: true, error: null };
  } catch (err) {
    if (err instanceof ApiError) {
      const hint =
        err.code === "empty_query"
          ? "enter terms, a \"quoted phrase\" or a field:value filter"
          : err.code === "unbalanced_quote"
            ? "close the quotation mark"
            : err.message;
      return { ...state, hits: [], searched: true, error: hint };
    }
    throw err;
  }
}
