// Network shell: one WebSocket to /api/events plus thin REST helpers.
// All data flows out through the dispatch callback as reducer inputs; this
// module owns reconnection policy and nothing else.

import type { DeviceDetail, Envelope, ProximityEntry } from "./types.js";
import type { ServerInput } from "./state.js";

export type Dispatch = (input: ServerInput) => void;

const RECONNECT_BASE_MS = 500;
const RECONNECT_MAX_MS = 8000;
/** A lagged close means the server is healthy; resync almost immediately. */
const RECONNECT_LAGGED_MS = 200;

export function eventsUrl(base: string): string {
  const url = new URL("/api/events", base);
  url.protocol = url.protocol === "https:" ? "wss:" : "ws:";
  return url.toString();
}

/**
 * Keep one WebSocket alive forever: connect, dispatch every frame, and on
 * any close dispatch the close and reconnect (each new connection replays
 * snapshot-then-deltas, which is what makes recovery lossless).
 */
export function startEventStream(base: string, dispatch: Dispatch): void {
  let attempt = 0;

  const connect = (): void => {
    dispatch({ type: "ws-connecting" });
    const socket = new WebSocket(eventsUrl(base));

    socket.onopen = () => {
      attempt = 0;
    };
    socket.onmessage = (message: MessageEvent<string>) => {
      let frame: Envelope;
      try {
        frame = JSON.parse(message.data) as Envelope;
      } catch {
        return; // not ours; ignore
      }
      dispatch({ type: "ws-frame", frame });
    };
    socket.onclose = (event: CloseEvent) => {
      dispatch({ type: "ws-closed", code: event.code, reason: event.reason });
      const delayMs =
        event.code === 1013
          ? RECONNECT_LAGGED_MS
          : Math.min(RECONNECT_MAX_MS, RECONNECT_BASE_MS * 2 ** attempt);
      attempt += 1;
      setTimeout(connect, delayMs);
    };
    socket.onerror = () => {
      // onclose fires afterwards and owns the retry.
    };
  };

  connect();
}

async function getJson<T>(path: string): Promise<T> {
  const response = await fetch(path);
  if (!response.ok) throw new Error(`${path}: HTTP ${response.status}`);
  return (await response.json()) as T;
}

export async function fetchDetail(
  deviceId: string,
  dispatch: Dispatch,
): Promise<void> {
  try {
    const detail = await getJson<DeviceDetail>(
      `/api/devices/${encodeURIComponent(deviceId)}`,
    );
    dispatch({ type: "detail-loaded", deviceId, detail });
  } catch {
    // device may have been dropped between events; the next snapshot wins
  }
}

export async function fetchProximity(dispatch: Dispatch): Promise<void> {
  try {
    const entries = await getJson<ProximityEntry[]>("/api/proximity");
    dispatch({ type: "proximity-loaded", entries });
  } catch {
    // keep the previous scene; the poller will try again
  }
}

export async function requestEnumeration(
  deviceId: string,
  dispatch: Dispatch,
): Promise<void> {
  try {
    const response = await fetch(
      `/api/devices/${encodeURIComponent(deviceId)}/enumerate`,
      { method: "POST" },
    );
    let message = response.statusText;
    try {
      const body = (await response.json()) as Record<string, unknown>;
      if (typeof body["status"] === "string") message = body["status"];
      else if (typeof body["detail"] === "string") message = body["detail"];
    } catch {
      // non-JSON body; keep the status text
    }
    dispatch({
      type: "enumerate-result",
      deviceId,
      httpStatus: response.status,
      message,
    });
  } catch (error) {
    dispatch({
      type: "enumerate-result",
      deviceId,
      httpStatus: 0,
      message: String(error),
    });
  }
}

/** Download the session RSSI log through the export endpoint. */
export function downloadRssiCsv(): void {
  const anchor = document.createElement("a");
  anchor.href = "/api/export/rssi.csv";
  anchor.download = "rssi.csv";
  document.body.appendChild(anchor);
  anchor.click();
  anchor.remove();
}
