/** Claim adjudication worklist: CLAIM_FILED alerts resolve to claim
 * details; the decision buttons call the server, which owns all state. */

import { Alert, ApiError, ClaimDetail, MfApi } from "../api.js";

export interface ClaimWorkItem {
  alert: Alert;
  detail: ClaimDetail | null;
  error: string | null;
}

export async function claimWorklist(api: MfApi, alerts: Alert[]): Promise<ClaimWorkItem[]> {
  const items: ClaimWorkItem[] = [];
  for (const alert of alerts) {
    if (alert.kind !== "CLAIM_FILED") continue;
    const claimId = String(alert.payload.claim_id ?? "");
    try {
      items.push({ alert, detail: await api.getClaim(claimId), error: null });
    } catch (err) {
      const message = err instanceof ApiError ? err.message : String(err);
      items.push({ alert, detail: null, error: message });
    }
  }
  return items;
}

export async function decide(
  api: MfApi,
  claimId: string,
  decision: "ACCEPTED" | "DENIED",
): Promise<ClaimDetail> {
  return api.decideClaim(claimId, decision);
}
