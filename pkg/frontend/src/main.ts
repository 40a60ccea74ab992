// Entry point: one reducer-owned state, one WebSocket, renders coalesced
// onto animation frames.  Side effects (REST calls, the CSV download) hang
// off specific inputs here so the reducer stays pure.

import type { AppState, Input } from "./state.js";
import { initialState, reduce } from "./state.js";
import { mountApp, render, setEnumerateHandler } from "./render.js";
import {
  downloadRssiCsv,
  fetchDetail,
  fetchProximity,
  requestEnumeration,
  startEventStream,
} from "./net.js";

const PROXIMITY_POLL_MS = 1000;
const DETAIL_REFRESH_MS = 400;
const RENDER_TICK_MS = 1000; // recency highlights decay without events

function nowUs(): number {
  return Date.now() * 1000;
}

function start(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");

  let state: AppState = initialState();
  let renderQueued = false;
  let detailRefreshTimer: number | null = null;

  const dom = mountApp(root, dispatch);

  function scheduleRender(): void {
    if (renderQueued) return;
    renderQueued = true;
    requestAnimationFrame(() => {
      renderQueued = false;
      render(dom, state, nowUs(), dispatch);
    });
  }

  function dispatch(input: Input): void {
    const before = state;
    state = reduce(state, input);
    if (state !== before) scheduleRender();
    runEffects(input, before);
  }

  function runEffects(input: Input, before: AppState): void {
    // Selecting a device loads its detail view.
    if (input.type === "select-device" && input.deviceId !== null) {
      void fetchDetail(input.deviceId, dispatch);
    }
    // Stopping a recording saves the session log through the export API.
    if (input.type === "toggle-recording" && before.recording) {
      downloadRssiCsv();
    }
    // Events made the cached detail stale: refetch, at most ~2x/second.
    if (state.detailStale && state.selected !== null && detailRefreshTimer === null) {
      const deviceId = state.selected;
      detailRefreshTimer = window.setTimeout(() => {
        detailRefreshTimer = null;
        if (state.selected === deviceId && state.detailStale) {
          void fetchDetail(deviceId, dispatch);
        }
      }, DETAIL_REFRESH_MS);
    }
  }

  setEnumerateHandler((deviceId) => {
    void requestEnumeration(deviceId, dispatch);
  });

  startEventStream(window.location.href, dispatch);

  window.setInterval(() => {
    void fetchProximity(dispatch);
  }, PROXIMITY_POLL_MS);
  void fetchProximity(dispatch);

  // Recency highlighting and the chart window depend on wall time; refresh
  // them even when no event arrives.
  window.setInterval(scheduleRender, RENDER_TICK_MS);

  scheduleRender();
}

start();
