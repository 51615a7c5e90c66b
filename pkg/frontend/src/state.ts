/** Session state and role-based view gating. Views a role may not use are
 * never rendered. */

export type View = "Report" | "Search" | "Identify" | "Claims" | "Alerts";

export const ALL_VIEWS: View[] = ["Report", "Search", "Identify", "Claims", "Alerts"];

const VIEWS_BY_ROLE: Record<string, View[]> = {
  public: ["Report", "Search"],
  kiosk: ["Report", "Search"],
  staff: ["Report", "Search", "Identify", "Claims"],
  admin: ["Report", "Search", "Identify", "Claims", "Alerts"],
};

export interface SessionState {
  token: string;
  role: string;
  operator: string;
  activeView: View;
  pendingUploads: number;
}

export function visibleViews(role: string): View[] {
  return VIEWS_BY_ROLE[role] ?? [];
}

export function canSee(state: SessionState, view: View): boolean {
  return visibleViews(state.role).includes(view);
}

/** Item kinds a role may submit; the public access point takes LOST only. */
export function allowedItemKinds(role: string): string[] {
  return role === "public" ? ["LOST"] : ["FOUND", "LOST"];
}

export function newSession(token: string, role: string, operator: string): SessionState {
  const views = visibleViews(role);
  return {
    token,
    role,
    operator,
    activeView: views[0] ?? "Search",
    pendingUploads: 0,
  };
}

export function switchView(state: SessionState, view: View): SessionState {
  if (!canSee(state, view)) return state;
  return { ...state, activeView: view };
}
