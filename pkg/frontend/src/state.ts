// Application state and its reducer.
//
// The state is a pure function of two transcripts: server inputs (WebSocket
// frames, REST responses, connection transitions) and user inputs (clicks,
// filter edits).  `reduce` never reads clocks, randomness, or the DOM —
// anything time-dependent arrives inside the input — so any session can be
// replayed in tests and must produce identical view models.

import type {
  AgentInfo,
  AgentStatusBody,
  DeviceDetail,
  DeviceSummary,
  Envelope,
  GattResultBody,
  ProximityEntry,
  RssiSampleBody,
  SnapshotBody,
} from "./types.js";
import {
  CLOSE_CODE_LAGGED,
  KIND_AGENT_STATUS,
  KIND_DEVICE_APPEARED,
  KIND_DEVICE_UPDATED,
  KIND_GATT_RESULT,
  KIND_RSSI_SAMPLE,
  KIND_SNAPSHOT,
} from "./types.js";

export type RadarScale = "log" | "linear";
export type Connection = "connecting" | "live" | "lagged" | "closed";

/** Raw text of the filter controls; parsing happens at the point of use. */
export interface FilterState {
  manufacturer: string;
  minRssi: string;
  activeWithinS: string;
  name: string;
}

export interface RssiSample {
  timestamp_us: number;
  rssi: number;
  source_id: string;
}

/** Samples kept per device for the chart; older ones fall off. */
export const SAMPLE_CAP = 512;

/** Mirror of the service's recency window (seconds) for list highlighting. */
export const RECENT_WINDOW_US = 10_000_000;

export interface AppState {
  connection: Connection;
  /** How many snapshots have been applied; >1 means we reconnected. */
  snapshotCount: number;
  devices: ReadonlyMap<string, DeviceSummary>;
  agents: readonly AgentInfo[];
  samples: ReadonlyMap<string, readonly RssiSample[]>;
  /** Timestamps (us) after which data may be missing (reconnect gaps). */
  gaps: readonly number[];
  /** Largest event timestamp seen; anchors gap markers. */
  lastEventUs: number;
  proximity: readonly ProximityEntry[];
  selected: string | null;
  /** Selected device missing from the latest snapshot. */
  selectedStale: boolean;
  detail: DeviceDetail | null;
  /** Cached detail is behind the event stream; the shell should refetch. */
  detailStale: boolean;
  /** Index into detail.advertisements shown in the dissection pane. */
  advIndex: number;
  /** Tree rows whose expansion was flipped away from the depth default. */
  toggledNodes: ReadonlySet<string>;
  selectedNode: string | null;
  scale: RadarScale;
  recording: boolean;
  recordingSinceUs: number | null;
  filter: FilterState;
  enumerateStatus: string | null;
}

export function initialState(): AppState {
  return {
    connection: "connecting",
    snapshotCount: 0,
    devices: new Map(),
    agents: [],
    samples: new Map(),
    gaps: [],
    lastEventUs: 0,
    proximity: [],
    selected: null,
    selectedStale: false,
    detail: null,
    detailStale: false,
    advIndex: -1,
    toggledNodes: new Set(),
    selectedNode: null,
    scale: "log",
    recording: false,
    recordingSinceUs: null,
    filter: { manufacturer: "", minRssi: "", activeWithinS: "", name: "" },
    enumerateStatus: null,
  };
}

export type ServerInput =
  | { type: "ws-connecting" }
  | { type: "ws-frame"; frame: Envelope }
  | { type: "ws-closed"; code: number; reason: string }
  | { type: "detail-loaded"; deviceId: string; detail: DeviceDetail }
  | { type: "proximity-loaded"; entries: ProximityEntry[] }
  | { type: "enumerate-result"; deviceId: string; httpStatus: number; message: string };

export type UserInput =
  | { type: "select-device"; deviceId: string | null }
  | { type: "set-scale"; scale: RadarScale }
  | { type: "set-filter"; field: keyof FilterState; value: string }
  | { type: "toggle-recording"; nowUs: number }
  | { type: "toggle-node"; path: string }
  | { type: "select-node"; path: string | null }
  | { type: "select-adv"; index: number };

export type Input = ServerInput | UserInput;

export function reduce(state: AppState, input: Input): AppState {
  switch (input.type) {
    case "ws-connecting":
      return { ...state, connection: "connecting" };
    case "ws-closed":
      return {
        ...state,
        connection: input.code === CLOSE_CODE_LAGGED ? "lagged" : "closed",
      };
    case "ws-frame":
      return applyFrame(state, input.frame);
    case "detail-loaded":
      if (input.deviceId !== state.selected) return state; // stale response
      return {
        ...state,
        detail: input.detail,
        detailStale: false,
        advIndex: input.detail.advertisements.length - 1,
      };
    case "proximity-loaded":
      return { ...state, proximity: input.entries };
    case "enumerate-result":
      return {
        ...state,
        enumerateStatus: `${input.httpStatus}: ${input.message}`,
      };
    case "select-device":
      if (input.deviceId === state.selected) return state;
      return {
        ...state,
        selected: input.deviceId,
        selectedStale: false,
        detail: null,
        detailStale: input.deviceId !== null,
        advIndex: -1,
        toggledNodes: new Set(),
        selectedNode: null,
        enumerateStatus: null,
      };
    case "set-scale":
      return { ...state, scale: input.scale };
    case "set-filter":
      return {
        ...state,
        filter: { ...state.filter, [input.field]: input.value },
      };
    case "toggle-recording":
      return state.recording
        ? { ...state, recording: false }
        : { ...state, recording: true, recordingSinceUs: input.nowUs };
    case "toggle-node": {
      const toggled = new Set(state.toggledNodes);
      if (toggled.has(input.path)) toggled.delete(input.path);
      else toggled.add(input.path);
      return { ...state, toggledNodes: toggled };
    }
    case "select-node":
      return { ...state, selectedNode: input.path };
    case "select-adv":
      return {
        ...state,
        advIndex: input.index,
        toggledNodes: new Set(),
        selectedNode: null,
      };
  }
}

function applyFrame(state: AppState, frame: Envelope): AppState {
  switch (frame.kind) {
    case KIND_SNAPSHOT:
      return applySnapshot(state, frame.body as SnapshotBody);
    case KIND_DEVICE_APPEARED:
    case KIND_DEVICE_UPDATED:
      return applyDeviceSummary(state, frame.body as DeviceSummary);
    case KIND_RSSI_SAMPLE:
      return applyRssiSample(state, frame.body as RssiSampleBody);
    case KIND_GATT_RESULT: {
      const body = frame.body as GattResultBody;
      if (body.device_id !== state.selected) return state;
      return { ...state, detailStale: true };
    }
    case KIND_AGENT_STATUS:
      return applyAgentStatus(state, frame.body as AgentStatusBody);
    default:
      return state; // unknown kinds are forward-compatible no-ops
  }
}

function applySnapshot(state: AppState, body: SnapshotBody): AppState {
  const devices = new Map<string, DeviceSummary>();
  for (const summary of body.devices) devices.set(summary.device_id, summary);
  const reconnected = state.snapshotCount > 0;
  const gaps =
    reconnected && state.lastEventUs > 0
      ? [...state.gaps, state.lastEventUs]
      : state.gaps;
  const selectedStale =
    state.selected !== null && !devices.has(state.selected);
  return {
    ...state,
    connection: "live",
    snapshotCount: state.snapshotCount + 1,
    devices,
    agents: body.agents,
    gaps,
    selectedStale,
    detailStale: state.detailStale || (state.selected !== null && reconnected),
  };
}

function applyDeviceSummary(state: AppState, summary: DeviceSummary): AppState {
  const devices = new Map(state.devices);
  devices.set(summary.device_id, summary);
  let next: AppState = { ...state, devices };
  if (summary.device_id === state.selected) {
    // Keep the detail pane fresh without waiting for a refetch: summary
    // fields update in place; nested lists still come from the next fetch.
    next = {
      ...next,
      detail: state.detail ? { ...state.detail, ...summary } : state.detail,
      detailStale: true,
      selectedStale: false,
    };
  }
  return next;
}

function applyRssiSample(state: AppState, body: RssiSampleBody): AppState {
  const samples = new Map(state.samples);
  const prior = samples.get(body.device_id) ?? [];
  const sample: RssiSample = {
    timestamp_us: body.timestamp_us,
    rssi: body.rssi,
    source_id: body.source_id,
  };
  const appended =
    prior.length >= SAMPLE_CAP
      ? [...prior.slice(prior.length - SAMPLE_CAP + 1), sample]
      : [...prior, sample];
  samples.set(body.device_id, appended);
  return {
    ...state,
    samples,
    lastEventUs: Math.max(state.lastEventUs, body.timestamp_us),
  };
}

function applyAgentStatus(state: AppState, body: AgentStatusBody): AppState {
  const agents = state.agents.slice();
  const index = agents.findIndex((a) => a.name === body.agent);
  if (index >= 0) {
    const existing = agents[index]!;
    agents[index] = { ...existing, online: body.online };
  } else {
    agents.push({
      name: body.agent,
      online: body.online,
      capabilities: [],
      advertisements: 0,
      malformed_lines: 0,
      connected_at_us: state.lastEventUs,
    });
  }
  return { ...state, agents };
}

// ---------------------------------------------------------------------------
// Filter mirror
//
// The same four controls drive both the client-side live list and the query
// string sent to GET /api/devices; the parameter names below are exactly the
// ones the service documents.

export interface ParsedFilter {
  manufacturer: string | null;
  minRssi: number | null;
  activeWithinS: number | null;
  name: string | null;
}

export function parseFilter(filter: FilterState): ParsedFilter {
  const minRssi = Number.parseInt(filter.minRssi, 10);
  const activeWithin = Number.parseFloat(filter.activeWithinS);
  return {
    manufacturer: filter.manufacturer.trim() || null,
    minRssi: Number.isNaN(minRssi) ? null : minRssi,
    activeWithinS:
      Number.isNaN(activeWithin) || activeWithin < 0 ? null : activeWithin,
    name: filter.name.trim() || null,
  };
}

/** Query parameters for GET /api/devices — exactly the documented names. */
export function filterQueryParams(filter: FilterState): Record<string, string> {
  const parsed = parseFilter(filter);
  const params: Record<string, string> = {};
  if (parsed.manufacturer !== null) params["manufacturer"] = parsed.manufacturer;
  if (parsed.minRssi !== null) params["min_rssi"] = String(parsed.minRssi);
  if (parsed.activeWithinS !== null)
    params["active_within_s"] = String(parsed.activeWithinS);
  if (parsed.name !== null) params["name"] = parsed.name;
  return params;
}

/** Client-side twin of the server-side device filter semantics. */
export function matchesFilter(
  summary: DeviceSummary,
  filter: FilterState,
  nowUs: number,
): boolean {
  const parsed = parseFilter(filter);
  if (parsed.manufacturer !== null && summary.manufacturer !== parsed.manufacturer)
    return false;
  if (
    parsed.minRssi !== null &&
    (summary.last_rssi === null || summary.last_rssi < parsed.minRssi)
  )
    return false;
  if (
    parsed.activeWithinS !== null &&
    nowUs - summary.last_seen_us > parsed.activeWithinS * 1e6
  )
    return false;
  if (parsed.name !== null) {
    const name = summary.name ?? "";
    if (!name.toLowerCase().includes(parsed.name.toLowerCase())) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// View models — the exact content the renderer binds, kept pure so golden
// tests cover what the user sees.

export interface DeviceRow {
  deviceId: string;
  displayName: string;
  manufacturer: string;
  deviceType: string;
  rssiText: string;
  macCount: number;
  advCount: number;
  trackable: boolean;
  recent: boolean;
  selected: boolean;
}

export function deviceListView(state: AppState, nowUs: number): DeviceRow[] {
  const rows: DeviceRow[] = [];
  for (const summary of state.devices.values()) {
    if (!matchesFilter(summary, state.filter, nowUs)) continue;
    rows.push({
      deviceId: summary.device_id,
      displayName: summary.name ?? "(unnamed)",
      manufacturer: summary.manufacturer ?? "",
      deviceType: summary.fingerprint?.device_type ?? "",
      rssiText: summary.last_rssi === null ? "" : `${summary.last_rssi} dBm`,
      macCount: summary.mac_count,
      advCount: summary.adv_count,
      trackable: summary.mac_count > 1,
      recent: nowUs - summary.last_seen_us <= RECENT_WINDOW_US,
      selected: summary.device_id === state.selected,
    });
  }
  // Most recently active first, ties in insertion order (stable sort),
  // matching the ordering of GET /api/devices.
  const byId = new Map<string, number>();
  let i = 0;
  for (const summary of state.devices.values()) byId.set(summary.device_id, i++);
  rows.sort((a, b) => {
    const first = state.devices.get(a.deviceId)!;
    const second = state.devices.get(b.deviceId)!;
    if (second.last_seen_us !== first.last_seen_us)
      return second.last_seen_us - first.last_seen_us;
    return byId.get(a.deviceId)! - byId.get(b.deviceId)!;
  });
  return rows;
}

export function connectionLabel(state: AppState): string {
  switch (state.connection) {
    case "connecting":
      return "connecting…";
    case "live":
      return "live";
    case "lagged":
      return "lagged — resyncing";
    case "closed":
      return "disconnected — retrying";
  }
}
