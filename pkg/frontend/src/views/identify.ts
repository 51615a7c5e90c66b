/** Photo identification flow. The match list mirrors the API response
 * ordering exactly; the console never re-ranks. */

import { ApiError, IdentifyResponse, MfApi } from "../api.js";

export interface IdentifyViewModel {
  loading: boolean;
  response: IdentifyResponse | null;
  /** Rows are the response's matches, in response order. */
  matches: IdentifyResponse["matches"];
  guidance: string | null;
  error: string | null;
  thresholdOverride: number | null;
  topN: number;
}

export function initialIdentifyState(topN = 5): IdentifyViewModel {
  return {
    loading: false,
    response: null,
    matches: [],
    guidance: null,
    error: null,
    thresholdOverride: null,
    topN,
  };
}

export async function runIdentify(
  api: MfApi,
  state: IdentifyViewModel,
  photo: Blob,
): Promise<IdentifyViewModel> {
  try {
    const response = await api.identify(
      photo,
      state.topN,
      state.thresholdOverride ?? undefined,
    );
    return {
      ...state,
      loading: false,
      response,
      matches: response.matches,
      guidance: response.matches.length ? null : "no enrolled person within the threshold",
      error: null,
    };
  } catch (err) {
    if (err instanceof ApiError) {
      if (err.code === "no_face_detected") {
        return {
          ...state,
          loading: false,
          response: null,
          matches: [],
          guidance: "no face found in the photo; retake it closer and better lit",
          error: null,
        };
      }
      if (err.code === "empty_gallery") {
        return {
          ...state,
          loading: false,
          response: null,
          matches: [],
          guidance: "the gallery is empty; an administrator must enroll persons first",
          error: null,
        };
      }
      return { ...state, loading: false, error: `${err.code}: ${err.message}` };
    }
    throw err;
  }
}

/** File the selected candidate as the confirmed identity of a person
 * report: OPEN reports get the match proposed first, then confirmed. */
export async function confirmMatch(
  api: MfApi,
  reportId: string,
  personId: string,
): Promise<string> {
  const report = await api.getReport(reportId);
  if (report.status === "OPEN") {
    await api.setPersonReportStatus(reportId, "MATCH_PROPOSED", personId);
  }
  const updated = await api.setPersonReportStatus(reportId, "CONFIRMED");
  return updated.status;
}
