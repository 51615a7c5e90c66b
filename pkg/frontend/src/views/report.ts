/** Found/lost item entry flow: validate locally (the server's rule is
 * description-or-photo), submit, show the server-assigned id, clear the
 * form. Errors keep the entered data for a retry. */

import { ApiError, MfApi, ReportRecord } from "../api.js";

export interface ReportForm {
  kind: string;
  category: string;
  description: string;
  location: string;
  photo: Blob | null;
}

export interface ReportFlowState {
  form: ReportForm;
  submitting: boolean;
  confirmation: ReportRecord | null;
  error: string | null;
  needsReauth: boolean;
}

export function emptyForm(kind = "FOUND"): ReportForm {
  return { kind, category: "other", description: "", location: "", photo: null };
}

export function initialReportState(kind = "FOUND"): ReportFlowState {
  return {
    form: emptyForm(kind),
    submitting: false,
    confirmation: null,
    error: null,
    needsReauth: false,
  };
}

/** The submit button mirrors the server rule: description or photo. */
export function canSubmit(form: ReportForm): boolean {
  return form.description.trim().length > 0 || form.photo !== null;
}

export async function submitReport(
  api: MfApi,
  state: ReportFlowState,
): Promise<ReportFlowState> {
  if (!canSubmit(state.form)) {
    return { ...state, error: "a report needs a description or a photo" };
  }
  try {
    const record = await api.submitItemReport(
      {
        kind: state.form.kind,
        category: state.form.category,
        description: state.form.description,
        location: state.form.location,
      },
      state.form.photo,
    );
    // success clears the form; the confirmation carries the server id
    return {
      form: emptyForm(state.form.kind),
      submitting: false,
      confirmation: record,
      error: null,
      needsReauth: false,
    };
  } catch (err) {
    if (err instanceof ApiError) {
      // entered data is preserved for retry; 401 asks for a new token
      return {
        ...state,
        submitting: false,
        confirmation: null,
        error: `${err.code}: ${err.message}`,
        needsReauth: err.status === 401,
      };
    }
    throw err;
  }
}
