// DOM renderer.  `mountApp` builds the static skeleton (including the
// filter inputs, which are never rewritten so typing never loses focus) and
// `render` projects the current AppState into the dynamic regions.  All
// content comes from the pure view models; this file only moves it into
// elements.

import type { AppState, DeviceRow, Input } from "./state.js";
import { connectionLabel, deviceListView } from "./state.js";
import { layoutRadar } from "./radar.js";
import { buildHexView } from "./hex.js";
import type { ByteRange } from "./hex.js";
import { TreeFormatError, flattenTree, nodeRange, validateTree } from "./tree.js";
import { layoutChart } from "./chart.js";
import type { AdvertisementView } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
export const RADAR_SIZE = 420;
const CHART_WIDTH = 380;
const CHART_HEIGHT = 130;

export type DispatchFn = (input: Input) => void;

export interface AppDom {
  connectionBadge: HTMLElement;
  recordButton: HTMLButtonElement;
  scaleLog: HTMLButtonElement;
  scaleLinear: HTMLButtonElement;
  radarHost: HTMLElement;
  listBody: HTMLElement;
  detailHost: HTMLElement;
  agentsHost: HTMLElement;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  return node;
}

export function mountApp(root: HTMLElement, dispatch: DispatchFn): AppDom {
  root.textContent = "";

  const header = el("header");
  header.appendChild(el("h1", "title", "btlemap"));
  const connectionBadge = el("span", "connection", "connecting…");
  header.appendChild(connectionBadge);

  const scaleBox = el("span", "scale-toggle");
  scaleBox.appendChild(el("span", "scale-label", "radial scale:"));
  const scaleLog = el("button", "scale-btn active", "log");
  scaleLog.addEventListener("click", () =>
    dispatch({ type: "set-scale", scale: "log" }),
  );
  const scaleLinear = el("button", "scale-btn", "linear");
  scaleLinear.addEventListener("click", () =>
    dispatch({ type: "set-scale", scale: "linear" }),
  );
  scaleBox.appendChild(scaleLog);
  scaleBox.appendChild(scaleLinear);
  header.appendChild(scaleBox);

  const recordButton = el("button", "record", "● record");
  recordButton.addEventListener("click", () =>
    dispatch({ type: "toggle-recording", nowUs: Date.now() * 1000 }),
  );
  header.appendChild(recordButton);
  root.appendChild(header);

  const main = el("main");

  const radarSection = el("section", "radar-pane");
  const radarHost = el("div", "radar-host");
  radarSection.appendChild(radarHost);
  main.appendChild(radarSection);

  const listSection = el("section", "list-pane");
  const filters = el("div", "filters");
  const filterSpecs: Array<{
    field: "manufacturer" | "minRssi" | "activeWithinS" | "name";
    placeholder: string;
  }> = [
    { field: "name", placeholder: "name contains…" },
    { field: "manufacturer", placeholder: "manufacturer (exact)" },
    { field: "minRssi", placeholder: "min RSSI (dBm)" },
    { field: "activeWithinS", placeholder: "active within (s)" },
  ];
  for (const spec of filterSpecs) {
    const input = el("input", "filter");
    input.placeholder = spec.placeholder;
    input.addEventListener("input", () =>
      dispatch({ type: "set-filter", field: spec.field, value: input.value }),
    );
    filters.appendChild(input);
  }
  listSection.appendChild(filters);
  const listBody = el("div", "device-list");
  listSection.appendChild(listBody);
  main.appendChild(listSection);

  const detailSection = el("section", "detail-pane");
  const detailHost = el("div", "detail-host");
  detailSection.appendChild(detailHost);
  main.appendChild(detailSection);

  root.appendChild(main);

  const footer = el("footer");
  const agentsHost = el("div", "agents");
  footer.appendChild(agentsHost);
  root.appendChild(footer);

  return {
    connectionBadge,
    recordButton,
    scaleLog,
    scaleLinear,
    radarHost,
    listBody,
    detailHost,
    agentsHost,
  };
}

export function render(
  dom: AppDom,
  state: AppState,
  nowUs: number,
  dispatch: DispatchFn,
): void {
  dom.connectionBadge.textContent = connectionLabel(state);
  dom.connectionBadge.className = `connection ${state.connection}`;

  dom.recordButton.textContent = state.recording
    ? "■ stop → CSV"
    : "● record";
  dom.recordButton.classList.toggle("recording", state.recording);

  dom.scaleLog.classList.toggle("active", state.scale === "log");
  dom.scaleLinear.classList.toggle("active", state.scale === "linear");

  renderRadar(dom.radarHost, state, dispatch);
  renderList(dom.listBody, state, nowUs, dispatch);
  renderDetail(dom.detailHost, state, nowUs, dispatch);
  renderAgents(dom.agentsHost, state);
}

function renderRadar(
  host: HTMLElement,
  state: AppState,
  dispatch: DispatchFn,
): void {
  const scene = layoutRadar(state.proximity, state.scale, RADAR_SIZE, RADAR_SIZE);
  const svg = svgEl("svg", {
    viewBox: `0 0 ${scene.width} ${scene.height}`,
    class: "radar",
  });

  for (const ring of scene.rings) {
    svg.appendChild(
      svgEl("circle", {
        cx: String(scene.cx),
        cy: String(scene.cy),
        r: ring.radiusPx.toFixed(1),
        class: "ring",
      }),
    );
    const label = svgEl("text", {
      x: String(scene.cx + 3),
      y: (scene.cy - ring.radiusPx + 11).toFixed(1),
      class: "ring-label",
    });
    label.textContent = ring.label;
    svg.appendChild(label);
  }

  svg.appendChild(
    svgEl("circle", {
      cx: String(scene.cx),
      cy: String(scene.cy),
      r: "3",
      class: "origin",
    }),
  );

  for (const blip of scene.blips) {
    const classes = ["blip"];
    if (blip.clamped) classes.push("clamped");
    if (blip.stale) classes.push("stale");
    if (blip.deviceId === state.selected) classes.push("selected");
    const dot = svgEl("circle", {
      cx: blip.x.toFixed(1),
      cy: blip.y.toFixed(1),
      r: "6",
      class: classes.join(" "),
    });
    const summary = state.devices.get(blip.deviceId);
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `${summary?.name ?? blip.deviceId} — ${
      blip.clamped ? "beyond range" : `≈${blip.distanceM.toFixed(1)} m`
    }`;
    dot.appendChild(title);
    dot.addEventListener("click", () =>
      dispatch({ type: "select-device", deviceId: blip.deviceId }),
    );
    svg.appendChild(dot);

    const caption = svgEl("text", {
      x: (blip.x + 8).toFixed(1),
      y: (blip.y + 4).toFixed(1),
      class: "blip-label",
    });
    caption.textContent = shortName(summary?.name ?? null, blip.deviceId);
    svg.appendChild(caption);
  }

  host.textContent = "";
  host.appendChild(svg);
}

function shortName(name: string | null, deviceId: string): string {
  const text = name ?? deviceId;
  return text.length > 14 ? `${text.slice(0, 13)}…` : text;
}

function renderList(
  host: HTMLElement,
  state: AppState,
  nowUs: number,
  dispatch: DispatchFn,
): void {
  const rows = deviceListView(state, nowUs);
  host.textContent = "";
  if (rows.length === 0) {
    host.appendChild(el("div", "empty", "no devices match"));
    return;
  }
  for (const row of rows) {
    host.appendChild(deviceRowEl(row, dispatch));
  }
}

function deviceRowEl(row: DeviceRow, dispatch: DispatchFn): HTMLElement {
  const classes = ["device-row"];
  if (row.recent) classes.push("recent");
  if (row.selected) classes.push("selected");
  const box = el("div", classes.join(" "));
  box.addEventListener("click", () =>
    dispatch({ type: "select-device", deviceId: row.deviceId }),
  );

  const top = el("div", "row-top");
  top.appendChild(el("span", "row-name", row.displayName));
  if (row.trackable) top.appendChild(el("span", "badge", "trackable"));
  top.appendChild(el("span", "row-rssi", row.rssiText));
  box.appendChild(top);

  const sub = el("div", "row-sub");
  const kind = [row.manufacturer, row.deviceType].filter(Boolean).join(" · ");
  sub.appendChild(el("span", "row-kind", kind || "unknown"));
  sub.appendChild(
    el("span", "row-counts", `${row.macCount} MAC·${row.advCount} adv`),
  );
  box.appendChild(sub);
  return box;
}

function renderDetail(
  host: HTMLElement,
  state: AppState,
  nowUs: number,
  dispatch: DispatchFn,
): void {
  host.textContent = "";
  if (state.selected === null) {
    host.appendChild(
      el("div", "empty", "select a device to inspect its advertisements"),
    );
    return;
  }

  if (state.selectedStale) {
    host.appendChild(
      el("div", "stale-banner", "device missing from the latest snapshot"),
    );
  }

  const summary = state.devices.get(state.selected);
  const detail = state.detail;
  const headline = el(
    "h2",
    "detail-name",
    summary?.name ?? detail?.name ?? state.selected,
  );
  host.appendChild(headline);

  const facts = el("div", "facts");
  const fact = (label: string, value: string): void => {
    if (!value) return;
    const row = el("div", "fact");
    row.appendChild(el("span", "fact-label", label));
    row.appendChild(el("span", "fact-value", value));
    facts.appendChild(row);
  };
  fact("id", state.selected);
  fact("MAC", summary?.current_mac ?? "");
  const fingerprint = summary?.fingerprint;
  if (fingerprint) {
    fact(
      "fingerprint",
      [fingerprint.manufacturer, fingerprint.device_type, fingerprint.model]
        .filter(Boolean)
        .join(" · "),
    );
    fact("evidence", fingerprint.evidence.join(", "));
  }
  if (detail) {
    if (detail.advertised_name || detail.gatt_name) {
      fact("advertised name", detail.advertised_name ?? "");
      fact("GATT name", detail.gatt_name ?? "");
    }
    fact("MAC history", detail.macs.map((m) => m.mac).join(", "));
  }
  host.appendChild(facts);

  if (detail && detail.trackable_fields.length > 0) {
    const box = el("div", "findings");
    box.appendChild(el("h3", "section-title", "trackability"));
    for (const finding of detail.trackable_fields) {
      box.appendChild(
        el(
          "div",
          "finding",
          `${finding.field_descriptor} = ${finding.constant_value_hex} ` +
            `across ${finding.distinct_macs_observed} MACs`,
        ),
      );
    }
    host.appendChild(box);
  }

  const gattBox = el("div", "gatt");
  const enumerate = el("button", "enumerate", "enumerate GATT");
  const selectedId = state.selected;
  enumerate.addEventListener("click", () => {
    // the shell owns the HTTP call; signalled through a custom input
    dispatchEnumerate?.(selectedId);
  });
  gattBox.appendChild(enumerate);
  if (state.enumerateStatus) {
    gattBox.appendChild(el("span", "enumerate-status", state.enumerateStatus));
  }
  if (detail && detail.gatt_services.length > 0) {
    const list = el("div", "services");
    for (const service of detail.gatt_services) {
      const item = el("div", "service", `service ${service.uuid}`);
      for (const characteristic of service.characteristics) {
        item.appendChild(
          el(
            "div",
            "characteristic",
            `${characteristic.uuid} [${characteristic.properties.join(",")}]` +
              (characteristic.value_hex ? ` = ${characteristic.value_hex}` : ""),
          ),
        );
      }
      list.appendChild(item);
    }
    gattBox.appendChild(list);
  }
  host.appendChild(gattBox);

  if (detail && detail.advertisements.length > 0) {
    const advIndex = Math.min(
      Math.max(state.advIndex, 0),
      detail.advertisements.length - 1,
    );
    const adv = detail.advertisements[advIndex]!;
    host.appendChild(advPane(adv, advIndex, detail.advertisements.length, state, dispatch));
  }

  const samples = state.samples.get(state.selected) ?? [];
  host.appendChild(chartPane(samples, state, nowUs));
}

// The enumerate button needs a network side effect, which render code must
// not perform; main.ts registers the actual handler here.
let dispatchEnumerate: ((deviceId: string) => void) | null = null;
export function setEnumerateHandler(handler: (deviceId: string) => void): void {
  dispatchEnumerate = handler;
}

function advPane(
  adv: AdvertisementView,
  advIndex: number,
  advCount: number,
  state: AppState,
  dispatch: DispatchFn,
): HTMLElement {
  const pane = el("div", "adv-pane");

  const nav = el("div", "adv-nav");
  const prev = el("button", "adv-step", "‹");
  prev.disabled = advIndex === 0;
  prev.addEventListener("click", () =>
    dispatch({ type: "select-adv", index: advIndex - 1 }),
  );
  const next = el("button", "adv-step", "›");
  next.disabled = advIndex === advCount - 1;
  next.addEventListener("click", () =>
    dispatch({ type: "select-adv", index: advIndex + 1 }),
  );
  nav.appendChild(prev);
  nav.appendChild(
    el(
      "span",
      "adv-pos",
      `advertisement ${advIndex + 1}/${advCount} · ${adv.pdu_type} · ` +
        `${adv.rssi} dBm · ch ${adv.channel ?? "?"}`,
    ),
  );
  nav.appendChild(next);
  pane.appendChild(nav);

  let highlight: ByteRange | null = null;
  let treeHost: HTMLElement;
  try {
    const root = validateTree(adv.tree);
    if (state.selectedNode !== null) {
      highlight = nodeRange(root, state.selectedNode);
    }
    treeHost = el("div", "tree");
    for (const row of flattenTree(root, state.toggledNodes, state.selectedNode)) {
      const rowEl = el("div", `tree-row${row.selected ? " selected" : ""}`);
      rowEl.style.paddingLeft = `${row.depth * 14 + 4}px`;
      if (row.hasChildren) {
        const arrow = el("span", "twist", row.expanded ? "▾" : "▸");
        arrow.addEventListener("click", (event) => {
          event.stopPropagation();
          dispatch({ type: "toggle-node", path: row.path });
        });
        rowEl.appendChild(arrow);
      } else {
        rowEl.appendChild(el("span", "twist-space", " "));
      }
      rowEl.appendChild(el("span", "tree-label", row.label));
      if (row.decoded) {
        rowEl.appendChild(el("span", "tree-decoded", `: ${row.decoded}`));
      }
      rowEl.addEventListener("click", () =>
        dispatch({
          type: "select-node",
          path: row.selected ? null : row.path,
        }),
      );
      treeHost.appendChild(rowEl);
    }
  } catch (error) {
    if (!(error instanceof TreeFormatError)) throw error;
    treeHost = el("div", "error-panel", `bad dissection data: ${error.message}`);
  }

  try {
    const hexHost = el("div", "hex");
    for (const line of buildHexView(adv.payload_hex, highlight)) {
      const lineEl = el("div", "hex-line");
      lineEl.appendChild(el("span", "hex-offset", line.offsetLabel));
      const bytes = el("span", "hex-bytes");
      for (const cell of line.cells) {
        bytes.appendChild(
          el("span", `hex-byte${cell.highlighted ? " hl" : ""}`, cell.hex),
        );
      }
      lineEl.appendChild(bytes);
      const ascii = el("span", "hex-ascii");
      for (const cell of line.cells) {
        ascii.appendChild(
          el("span", `hex-char${cell.highlighted ? " hl" : ""}`, cell.ascii),
        );
      }
      lineEl.appendChild(ascii);
      hexHost.appendChild(lineEl);
    }
    pane.appendChild(hexHost);
  } catch {
    pane.appendChild(el("div", "error-panel", "bad payload hex"));
  }

  pane.appendChild(treeHost);
  return pane;
}

function chartPane(
  samples: readonly import("./state.js").RssiSample[],
  state: AppState,
  nowUs: number,
): HTMLElement {
  const pane = el("div", "chart-pane");
  pane.appendChild(el("h3", "section-title", "RSSI (last 60 s)"));
  const layout = layoutChart(samples, state.gaps, CHART_WIDTH, CHART_HEIGHT, nowUs);
  const svg = svgEl("svg", {
    viewBox: `0 0 ${CHART_WIDTH} ${CHART_HEIGHT}`,
    class: "chart",
  });
  for (const tick of layout.ticks) {
    svg.appendChild(
      svgEl("line", {
        x1: "0",
        y1: tick.y.toFixed(1),
        x2: String(CHART_WIDTH),
        y2: tick.y.toFixed(1),
        class: "tick-line",
      }),
    );
    const label = svgEl("text", {
      x: "2",
      y: (tick.y - 2).toFixed(1),
      class: "tick-label",
    });
    label.textContent = tick.label;
    svg.appendChild(label);
  }
  for (const gapX of layout.gapXs) {
    svg.appendChild(
      svgEl("line", {
        x1: gapX.toFixed(1),
        y1: "0",
        x2: gapX.toFixed(1),
        y2: String(CHART_HEIGHT),
        class: "gap-marker",
      }),
    );
  }
  for (const segment of layout.segments) {
    if (segment.points.length === 1) {
      const point = segment.points[0]!;
      svg.appendChild(
        svgEl("circle", {
          cx: point.x.toFixed(1),
          cy: point.y.toFixed(1),
          r: "2",
          class: "chart-dot",
        }),
      );
      continue;
    }
    svg.appendChild(
      svgEl("polyline", {
        points: segment.points
          .map((p) => `${p.x.toFixed(1)},${p.y.toFixed(1)}`)
          .join(" "),
        class: "chart-line",
      }),
    );
  }
  if (state.recording) {
    const dot = svgEl("circle", {
      cx: String(CHART_WIDTH - 10),
      cy: "10",
      r: "5",
      class: "rec-dot",
    });
    svg.appendChild(dot);
  }
  pane.appendChild(svg);
  return pane;
}

function renderAgents(host: HTMLElement, state: AppState): void {
  host.textContent = "";
  if (state.agents.length === 0) {
    host.appendChild(el("span", "agent none", "no scanner agents"));
    return;
  }
  for (const agent of state.agents) {
    host.appendChild(
      el(
        "span",
        `agent ${agent.online ? "online" : "offline"}`,
        `${agent.name} · ${agent.online ? "online" : "offline"} · ` +
          `${agent.advertisements} advs`,
      ),
    );
  }
}
