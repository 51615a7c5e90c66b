/**
 * Typed client for the missing-and-found service API (/api/v1).
 *
 * The console performs no scoring or matching of its own: everything it
 * displays comes verbatim out of these responses.
 */

export interface MatchRow {
  person_id: string;
  distance: number;
  rank: number;
  full_name: string | null;
  nationality: string | null;
  group_id: string | null;
}

export interface IdentifyResponse {
  matches: MatchRow[];
  face_box: { x: number; y: number; w: number; h: number; score: number };
  model_version: number;
  threshold: number;
  elapsed_ms: number;
}

export interface ReportRecord {
  report_id: string;
  kind: string;
  status: string;
  location: string;
  reported_at: string;
  description?: string;
  category?: string;
  photo_ref?: string | null;
  matched_person_id?: string | null;
  subject_person_id?: string | null;
}

export interface SearchHit {
  report: ReportRecord;
  score: number;
}

export interface Alert {
  alert_id: string;
  kind: "PERSON_MATCH" | "CLAIM_FILED";
  payload: Record<string, unknown>;
  raised_at: string;
  acknowledged_by: string | null;
}

export interface ClaimDetail {
  claim: {
    claim_id: string;
    report_id: string;
    claimant_name: string;
    evidence_text: string;
    evidence_photo_ref: string | null;
    filed_at: string;
    decision: string;
  };
  report: ReportRecord;
}

export interface WhoAmI {
  role: string;
  operator: string;
  kiosk_id: string | null;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class MfApi {
  constructor(
    readonly baseUrl: string,
    private token: string,
    private fetchFn: FetchLike = fetch,
  ) {}

  private async request(path: string, init: RequestInit = {}): Promise<Response> {
    const headers = new Headers(init.headers);
    headers.set("Authorization", `Bearer ${this.token}`);
    const resp = await this.fetchFn(`${this.baseUrl}/api/v1${path}`, { ...init, headers });
    if (!resp.ok) {
      let code = "http_error";
      let message = `HTTP ${resp.status}`;
      try {
        const body = await resp.json();
        code = body.code ?? code;
        message = body.message ?? message;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, code, message);
    }
    return resp;
  }

  private async json<T>(path: string, init: RequestInit = {}): Promise<T> {
    const resp = await this.request(path, init);
    return (await resp.json()) as T;
  }

  whoami(): Promise<WhoAmI> {
    return this.json("/whoami");
  }

  async submitItemReport(
    fields: { kind: string; category: string; description: string; location: string },
    photo?: Blob | null,
  ): Promise<ReportRecord> {
    if (photo) {
      const form = new FormData();
      for (const [key, value] of Object.entries(fields)) form.set(key, value);
      form.set("photo", photo, "photo.pgm");
      return this.json("/reports/items", { method: "POST", body: form });
    }
    return this.json("/reports/items", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(fields),
    });
  }

  async submitPersonReport(fields: {
    kind: string;
    location: string;
    photo_b64: string;
    subject_person_id?: string;
  }): Promise<{ report: ReportRecord; alerts_raised: number }> {
    return this.json("/reports/persons", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(fields),
    });
  }

  getReport(reportId: string): Promise<ReportRecord> {
    return this.json(`/reports/${reportId}`);
  }

  async search(query: string, limit = 50): Promise<SearchHit[]> {
    const params = new URLSearchParams({ query, limit: String(limit) });
    const body = await this.json<{ results: SearchHit[] }>(`/reports?${params}`);
    return body.results;
  }

  identify(photo: Blob, topN?: number, threshold?: number): Promise<IdentifyResponse> {
    const form = new FormData();
    form.set("photo", photo, "probe.pgm");
    if (topN !== undefined) form.set("top_n", String(topN));
    if (threshold !== undefined) form.set("threshold", String(threshold));
    return this.json("/identify", { method: "POST", body: form });
  }

  setPersonReportStatus(
    reportId: string,
    status: string,
    matchedPersonId?: string | null,
  ): Promise<ReportRecord> {
    const body: Record<string, unknown> = { status };
    if (matchedPersonId !== undefined) body.matched_person_id = matchedPersonId;
    return this.json(`/reports/persons/${reportId}/status`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  listAlerts(ack?: boolean): Promise<Alert[]> {
    const params = ack === undefined ? "" : `?ack=${ack}`;
    return this.json<{ alerts: Alert[] }>(`/alerts${params}`).then((b) => b.alerts);
  }

  ackAlert(alertId: string): Promise<Alert> {
    return this.json(`/alerts/${alertId}/ack`, { method: "POST" });
  }

  fileClaim(
    reportId: string,
    claim: { claimant_name: string; evidence_text: string },
  ): Promise<{ claim_id: string; report: ReportRecord }> {
    return this.json(`/reports/${reportId}/claims`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(claim),
    });
  }

  getClaim(claimId: string): Promise<ClaimDetail> {
    return this.json(`/claims/${claimId}`);
  }

  decideClaim(claimId: string, decision: "ACCEPTED" | "DENIED"): Promise<ClaimDetail> {
    return this.json(`/claims/${claimId}/decision`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ decision }),
    });
  }

  enrollPerson(
    fields: { full_name: string; nationality: string; group_id?: string },
    photos: Blob[],
  ): Promise<{ person_id: string; full_name: string }> {
    const form = new FormData();
    form.set("full_name", fields.full_name);
    form.set("nationality", fields.nationality);
    if (fields.group_id) form.set("group_id", fields.group_id);
    photos.forEach((p, i) => form.append("photos", p, `photo-${i}.pgm`));
    return this.json("/persons", { method: "POST", body: form });
  }

  async getPhoto(photoRef: string): Promise<ArrayBuffer> {
    const resp = await this.request(`/photos/${photoRef}`);
    return resp.arrayBuffer();
  }
}
