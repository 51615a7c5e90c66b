/** Browser shell: token sign-in, role-gated tabs, and the five views. */

import { Alert, MfApi, ReportRecord } from "./api.js";
import { decodePnm } from "./pgm.js";
import { SessionState, View, canSee, newSession, switchView, visibleViews, allowedItemKinds } from "./state.js";
import { AlertPoller } from "./views/alerts.js";
import { claimWorklist, decide } from "./views/claims.js";
import { IdentifyViewModel, confirmMatch, initialIdentifyState, runIdentify } from "./views/identify.js";
import { ReportFlowState, canSubmit, initialReportState, submitReport } from "./views/report.js";
import { SearchState, initialSearchState, runSearch } from "./views/search.js";

let api: MfApi;
let session: SessionState;
let poller: AlertPoller | null = null;

let reportState: ReportFlowState = initialReportState();
let identifyState: IdentifyViewModel = initialIdentifyState();
let searchState: SearchState = initialSearchState();

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  node.append(...children);
  return node;
}

function root(): HTMLElement {
  return document.getElementById("app")!;
}

export async function signIn(baseUrl: string, token: string): Promise<void> {
  api = new MfApi(baseUrl, token);
  const who = await api.whoami();
  session = newSession(token, who.role, who.operator);
  reportState = initialReportState(allowedItemKinds(session.role)[0]);
  renderShell();
}

function renderShell(): void {
  root().replaceChildren();
  const tabs = el("nav", { class: "tabs" });
  for (const view of visibleViews(session.role)) {
    const button = el("button", { class: view === session.activeView ? "tab active" : "tab" }, view);
    button.addEventListener("click", () => {
      session = switchView(session, view);
      renderShell();
    });
    tabs.append(button);
  }
  const banner = el("div", { class: "session" },
    `signed in as ${session.operator} (${session.role})`);
  const body = el("main", { id: "view" });
  root().append(banner, tabs, body);
  poller?.stop();
  poller = null;
  renderActiveView(body);
}

function renderActiveView(body: HTMLElement): void {
  const view = session.activeView;
  if (!canSee(session, view)) return;
  if (view === "Report") renderReport(body);
  else if (view === "Search") renderSearch(body);
  else if (view === "Identify") renderIdentify(body);
  else if (view === "Claims") renderClaims(body);
  else renderAlerts(body);
}

// --- Report ---

function renderReport(body: HTMLElement): void {
  body.replaceChildren();
  const form = el("form", { class: "panel report-form" });
  const kindSelect = el("select", { name: "kind" });
  for (const kind of allowedItemKinds(session.role)) {
    kindSelect.append(el("option", { value: kind }, kind));
  }
  kindSelect.value = reportState.form.kind;
  const categorySelect = el("select", { name: "category" });
  for (const c of ["watch", "phone", "bag", "document", "jewelry", "other"]) {
    categorySelect.append(el("option", { value: c }, c));
  }
  categorySelect.value = reportState.form.category;
  const description = el("textarea", { name: "description", rows: "3" });
  description.value = reportState.form.description;
  const location = el("input", { name: "location" });
  location.value = reportState.form.location;
  const photoInput = el("input", { type: "file", name: "photo", accept: ".pgm,.ppm" });
  const submit = el("button", { type: "submit" }, "submit report");

  const refreshSubmit = () => {
    reportState.form.kind = kindSelect.value;
    reportState.form.category = categorySelect.value;
    reportState.form.description = description.value;
    reportState.form.location = location.value;
    submit.toggleAttribute("disabled", !canSubmit(reportState.form));
  };
  for (const input of [kindSelect, categorySelect, description, location]) {
    input.addEventListener("input", refreshSubmit);
  }
  photoInput.addEventListener("change", () => {
    reportState.form.photo = photoInput.files?.[0] ?? null;
    refreshSubmit();
  });
  refreshSubmit();

  form.append(
    el("label", {}, "kind ", kindSelect),
    el("label", {}, "category ", categorySelect),
    el("label", {}, "description ", description),
    el("label", {}, "location ", location),
    el("label", {}, "photo ", photoInput),
    submit,
  );
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    reportState = await submitReport(api, reportState);
    renderReport(body);
  });
  body.append(form);
  if (reportState.confirmation) {
    body.append(el("div", { class: "ok", id: "confirmation" },
      `report accepted: ${reportState.confirmation.report_id}`));
  }
  if (reportState.error) {
    body.append(el("div", { class: "err" },
      reportState.needsReauth ? `${reportState.error} (sign in again; your input is kept)` : reportState.error));
  }
}

// --- Search ---

function renderSearch(body: HTMLElement): void {
  body.replaceChildren();
  const input = el("input", { id: "query", placeholder: 'terms "phrase" status:open' });
  input.value = searchState.query;
  const go = el("button", {}, "search");
  const results = el("div", { id: "results" });
  go.addEventListener("click", async () => {
    searchState = { ...searchState, query: input.value };
    searchState = await runSearch(api, searchState);
    results.replaceChildren();
    if (searchState.error) results.append(el("div", { class: "err" }, searchState.error));
    for (const hit of searchState.hits) {
      results.append(renderReportRow(hit.report, hit.score));
    }
    if (searchState.searched && !searchState.error && searchState.hits.length === 0) {
      results.append(el("div", { class: "muted" }, "no results"));
    }
  });
  body.append(el("div", { class: "panel" }, input, go), results);
}

function renderReportRow(report: ReportRecord, score?: number): HTMLElement {
  const line = `${report.kind} · ${report.status} · ${report.location}` +
    (report.description ? ` · ${report.description}` : "") +
    (score !== undefined ? ` · score ${score.toFixed(3)}` : "");
  return el("div", { class: "row", "data-report-id": report.report_id }, line);
}

// --- Identify ---

function renderIdentify(body: HTMLElement): void {
  body.replaceChildren();
  const photoInput = el("input", { type: "file", id: "probe", accept: ".pgm,.ppm" });
  const topN = el("input", { type: "number", value: String(identifyState.topN), min: "1" });
  const threshold = el("input", { type: "number", step: "0.05", placeholder: "threshold override" });
  const go = el("button", {}, "identify");
  const preview = el("canvas", { id: "probe-preview", width: "128", height: "128" });
  const reportIdInput = el("input", { id: "link-report", placeholder: "person report id (for confirm)" });
  const out = el("div", { id: "matches" });

  photoInput.addEventListener("change", async () => {
    const file = photoInput.files?.[0];
    if (!file) return;
    try {
      const decoded = decodePnm(await file.arrayBuffer());
      preview.width = decoded.width;
      preview.height = decoded.height;
      preview.getContext("2d")?.putImageData(
        new ImageData(decoded.rgba, decoded.width, decoded.height), 0, 0);
    } catch {
      /* preview is best-effort */
    }
  });

  go.addEventListener("click", async () => {
    const file = photoInput.files?.[0];
    if (!file) return;
    identifyState.topN = Number(topN.value) || 5;
    identifyState.thresholdOverride = threshold.value ? Number(threshold.value) : null;
    identifyState = await runIdentify(api, identifyState, file);
    out.replaceChildren();
    if (identifyState.guidance) out.append(el("div", { class: "muted" }, identifyState.guidance));
    if (identifyState.error) out.append(el("div", { class: "err" }, identifyState.error));
    for (const match of identifyState.matches) {
      const row = el("div", { class: "row match", "data-person-id": match.person_id },
        `#${match.rank}  ${match.full_name ?? match.person_id}  distance ${match.distance.toFixed(4)}`);
      const confirm = el("button", {}, "confirm match");
      confirm.addEventListener("click", async () => {
        const reportId = reportIdInput.value.trim();
        if (!reportId) return;
        const status = await confirmMatch(api, reportId, match.person_id);
        row.append(el("span", { class: "ok" }, ` confirmed (${status})`));
      });
      row.append(confirm);
      out.append(row);
    }
    if (identifyState.response) {
      out.append(el("div", { class: "muted" },
        `model v${identifyState.response.model_version}, ${identifyState.response.elapsed_ms.toFixed(0)} ms`));
    }
  });

  body.append(el("div", { class: "panel" },
    el("label", {}, "probe photo ", photoInput),
    el("label", {}, "top n ", topN),
    el("label", {}, "threshold ", threshold),
    el("label", {}, "report ", reportIdInput),
    go, preview,
  ), out);
}

// --- Claims ---

function renderClaims(body: HTMLElement): void {
  body.replaceChildren();
  const list = el("div", { id: "claims" });
  const refresh = el("button", {}, "refresh");
  refresh.addEventListener("click", async () => {
    const alerts = await api.listAlerts();
    const items = await claimWorklist(api, alerts);
    list.replaceChildren();
    for (const item of items) {
      if (!item.detail) continue;
      const claim = item.detail.claim;
      const row = el("div", { class: "row claim", "data-claim-id": claim.claim_id },
        `${claim.claimant_name}: "${claim.evidence_text}" on ${item.detail.report.description ?? item.detail.report.report_id} [${claim.decision}]`);
      if (claim.decision === "PENDING" && session.role === "admin") {
        for (const decision of ["ACCEPTED", "DENIED"] as const) {
          const button = el("button", {}, decision.toLowerCase());
          button.addEventListener("click", async () => {
            await decide(api, claim.claim_id, decision);
            refresh.click();
          });
          row.append(button);
        }
      }
      list.append(row);
    }
  });
  body.append(el("div", { class: "panel" }, refresh), list);
}

// --- Alerts ---

function renderAlerts(body: HTMLElement): void {
  body.replaceChildren();
  const banner = el("div", { id: "staleness", class: "muted" });
  const list = el("div", { id: "alerts" });
  poller = new AlertPoller(api, (state) => {
    banner.textContent = state.stale
      ? `polling failed; showing data from ${state.lastSuccess ? new Date(state.lastSuccess).toLocaleTimeString() : "never"}`
      : "";
    banner.className = state.stale ? "err" : "muted";
    list.replaceChildren();
    for (const alert of state.alerts) list.append(renderAlertRow(alert));
    if (state.alerts.length === 0) list.append(el("div", { class: "muted" }, "no unacknowledged alerts"));
  });
  poller.start();
  body.append(banner, list);
}

function renderAlertRow(alert: Alert): HTMLElement {
  const summary = alert.kind === "PERSON_MATCH"
    ? `person match: ${alert.payload.person_id} (distance ${(alert.payload.distance as number).toFixed(3)})`
    : `claim filed: ${alert.payload.claim_id}`;
  const row = el("div", { class: "row alert", "data-alert-id": alert.alert_id },
    `${alert.raised_at}  ${summary}`);
  const ack = el("button", {}, "acknowledge");
  ack.addEventListener("click", () => {
    ack.toggleAttribute("disabled", true); // optimistic freeze
    void poller?.acknowledge(alert.alert_id);
  });
  row.append(ack);
  return row;
}

// --- bootstrap ---

export function mount(): void {
  const form = el("form", { class: "panel signin" },
    el("label", {}, "server ", el("input", { id: "server", value: window.location.origin })),
    el("label", {}, "token ", el("input", { id: "token", type: "password" })),
    el("button", { type: "submit" }, "sign in"),
  );
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const server = (document.getElementById("server") as HTMLInputElement).value;
    const token = (document.getElementById("token") as HTMLInputElement).value;
    try {
      await signIn(server, token);
    } catch (err) {
      form.append(el("div", { class: "err" }, String(err)));
    }
  });
  root().replaceChildren(form);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mount();
}
