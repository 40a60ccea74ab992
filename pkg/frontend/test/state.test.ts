// Reducer and view-model tests.  The state must be a pure function of the
// input transcript: replaying the same transcript twice yields identical
// view models, and the post-reconnect device list must equal the list a
// fresh client would build from the second snapshot alone (which is the
// same store.query() result GET /api/devices serves).

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import type { AppState, Input } from "../src/state.js";
import {
  SAMPLE_CAP,
  connectionLabel,
  deviceListView,
  filterQueryParams,
  initialState,
  matchesFilter,
  reduce,
} from "../src/state.js";
import {
  AGENT,
  DELTAS,
  DEV_A,
  DEV_B,
  NOW_US,
  SNAPSHOT_1,
  SNAPSHOT_2,
  snapshotFrame,
} from "./fixtures.js";

function replay(inputs: Input[], from?: AppState): AppState {
  let state = from ?? initialState();
  for (const input of inputs) state = reduce(state, input);
  return state;
}

function liveSession(): Input[] {
  return [
    { type: "ws-connecting" },
    { type: "ws-frame", frame: snapshotFrame(SNAPSHOT_1) },
    ...DELTAS.map((frame): Input => ({ type: "ws-frame", frame })),
  ];
}

const golden = JSON.parse(
  readFileSync(new URL("./golden/device-list.json", import.meta.url), "utf8"),
) as unknown;

describe("replay determinism", () => {
  it("identical transcripts produce identical view models", () => {
    const first = replay(liveSession());
    const second = replay(liveSession());
    expect(deviceListView(first, NOW_US)).toEqual(deviceListView(second, NOW_US));
    expect(first.agents).toEqual(second.agents);
    expect([...first.samples.entries()]).toEqual([...second.samples.entries()]);
  });

  it("device list matches the golden snapshot", () => {
    const state = replay(liveSession());
    expect(deviceListView(state, NOW_US)).toEqual(golden);
  });

  it("orders by recency with hand-derived flags", () => {
    const state = replay(liveSession());
    const rows = deviceListView(state, NOW_US);
    // last_seen: dev-d 102.5s > dev-b 102.0s > dev-a 101.0s > dev-c 80.0s
    expect(rows.map((r) => r.deviceId)).toEqual([
      "dev-d",
      "dev-b",
      "dev-a",
      "dev-c",
    ]);
    // now = 103s with a 10s recency window: only dev-c (23s old) is stale
    expect(rows.map((r) => r.recent)).toEqual([true, true, true, false]);
    expect(rows[0]!.trackable).toBe(true); // dev-d rotated across 2 MACs
    expect(rows[2]!.displayName).toBe("Jana's Phone");
    expect(rows[2]!.rssiText).toBe("-50 dBm");
  });

  it("tracks connection state through the session", () => {
    let state = replay([{ type: "ws-connecting" }]);
    expect(state.connection).toBe("connecting");
    state = replay([{ type: "ws-frame", frame: snapshotFrame(SNAPSHOT_1) }], state);
    expect(state.connection).toBe("live");
    expect(connectionLabel(state)).toBe("live");
    state = reduce(state, { type: "ws-closed", code: 1013, reason: "lagged" });
    expect(state.connection).toBe("lagged");
    state = reduce(state, { type: "ws-closed", code: 1006, reason: "" });
    expect(state.connection).toBe("closed");
  });
});

describe("reconnect semantics", () => {
  function reconnectSession(): Input[] {
    return [
      ...liveSession(),
      { type: "ws-closed", code: 1013, reason: "lagged" },
      { type: "ws-connecting" },
      { type: "ws-frame", frame: snapshotFrame(SNAPSHOT_2) },
    ];
  }

  it("post-reconnect list equals a fresh client's list for the same snapshot", () => {
    const reconnected = replay(reconnectSession());
    const fresh = replay([
      { type: "ws-connecting" },
      { type: "ws-frame", frame: snapshotFrame(SNAPSHOT_2) },
    ]);
    // The snapshot body is built from the same store.query() as
    // GET /api/devices, so equality here is equality with a fresh REST
    // query: no ghost devices survive the resync.
    expect(deviceListView(reconnected, NOW_US)).toEqual(
      deviceListView(fresh, NOW_US),
    );
    expect(reconnected.devices.has("dev-c")).toBe(false);
    expect(reconnected.devices.has("dev-d")).toBe(false);
    expect(reconnected.connection).toBe("live");
  });

  it("marks a reconnect gap at the last event timestamp", () => {
    const state = replay(reconnectSession());
    // Latest sample before the drop was dev-b's at 102s.
    expect(state.gaps).toEqual([102_000_000]);
    // RSSI history survives the resync; only the gap marker notes the hole.
    expect(state.samples.get("dev-a")).toHaveLength(1);
  });

  it("flags a selected device that the new snapshot no longer contains", () => {
    const before = replay(liveSession());
    const selected = reduce(before, { type: "select-device", deviceId: "dev-d" });
    const after = replay(
      [
        { type: "ws-closed", code: 1013, reason: "lagged" },
        { type: "ws-connecting" },
        { type: "ws-frame", frame: snapshotFrame(SNAPSHOT_2) },
      ],
      selected,
    );
    expect(after.selected).toBe("dev-d");
    expect(after.selectedStale).toBe(true);
  });
});

describe("event application", () => {
  it("updates a summary in place on device_updated", () => {
    const state = replay(liveSession());
    expect(state.devices.get("dev-a")!.last_rssi).toBe(-50);
    expect(state.devices.get("dev-a")!.adv_count).toBe(121);
  });

  it("appends rssi samples and caps history", () => {
    let state = replay([{ type: "ws-frame", frame: snapshotFrame(SNAPSHOT_1) }]);
    for (let i = 0; i < SAMPLE_CAP + 25; i++) {
      state = reduce(state, {
        type: "ws-frame",
        frame: {
          seq: i + 1,
          kind: "rssi_sample",
          body: {
            device_id: "dev-a",
            timestamp_us: 100_000_000 + i * 1000,
            rssi: -50,
            source_id: "sim-scanner",
          },
        },
      });
    }
    const samples = state.samples.get("dev-a")!;
    expect(samples).toHaveLength(SAMPLE_CAP);
    expect(samples[samples.length - 1]!.timestamp_us).toBe(
      100_000_000 + (SAMPLE_CAP + 24) * 1000,
    );
  });

  it("applies agent status to known agents and stubs unknown ones", () => {
    const state = replay(liveSession());
    expect(state.agents).toHaveLength(1);
    expect(state.agents[0]!.online).toBe(false); // heartbeat timeout delta
    const withNew = reduce(state, {
      type: "ws-frame",
      frame: {
        seq: 8,
        kind: "agent_status",
        body: { agent: "pi-probe", online: true },
      },
    });
    expect(withNew.agents).toHaveLength(2);
    expect(withNew.agents[1]!.name).toBe("pi-probe");
    expect(withNew.agents[1]!.online).toBe(true);
  });

  it("keeps agent identity from the snapshot", () => {
    const state = replay([{ type: "ws-frame", frame: snapshotFrame(SNAPSHOT_1) }]);
    expect(state.agents).toEqual([AGENT]);
  });

  it("marks cached detail stale when events touch the selected device", () => {
    let state = replay([{ type: "ws-frame", frame: snapshotFrame(SNAPSHOT_1) }]);
    state = reduce(state, { type: "select-device", deviceId: "dev-c" });
    state = reduce(state, {
      type: "detail-loaded",
      deviceId: "dev-c",
      detail: {
        ...state.devices.get("dev-c")!,
        advertised_name: "BOOMBOX Box",
        gatt_name: null,
        gatt_services: [],
        macs: [{ mac: "00:0a:95:aa:bb:cc", first_seen_us: 5_000_000, last_seen_us: 80_000_000 }],
        trackable_fields: [],
        advertisements: [],
        enumeration_failed_at_us: null,
      },
    });
    expect(state.detailStale).toBe(false);
    state = reduce(state, { type: "ws-frame", frame: DELTAS[6]! }); // gatt_result dev-c
    expect(state.detailStale).toBe(true);
  });

  it("ignores detail responses for a device no longer selected", () => {
    let state = replay([{ type: "ws-frame", frame: snapshotFrame(SNAPSHOT_1) }]);
    state = reduce(state, { type: "select-device", deviceId: "dev-a" });
    const detail = {
      ...DEV_B,
      advertised_name: null,
      gatt_name: null,
      gatt_services: [],
      macs: [],
      trackable_fields: [],
      advertisements: [],
      enumeration_failed_at_us: null,
    };
    const next = reduce(state, {
      type: "detail-loaded",
      deviceId: "dev-b",
      detail,
    });
    expect(next.detail).toBeNull();
  });
});

describe("filter controls", () => {
  it("produces exactly the documented query parameters", () => {
    expect(
      filterQueryParams({
        manufacturer: "Apple, Inc.",
        minRssi: "-70",
        activeWithinS: "30",
        name: "pods",
      }),
    ).toEqual({
      manufacturer: "Apple, Inc.",
      min_rssi: "-70",
      active_within_s: "30",
      name: "pods",
    });
  });

  it("omits unset and unparseable controls", () => {
    expect(
      filterQueryParams({ manufacturer: "", minRssi: "", activeWithinS: "", name: "" }),
    ).toEqual({});
    expect(
      filterQueryParams({
        manufacturer: "  ",
        minRssi: "abc",
        activeWithinS: "-5",
        name: "",
      }),
    ).toEqual({});
  });

  it("mirrors the server-side matching semantics", () => {
    const now = NOW_US;
    const none = { manufacturer: "", minRssi: "", activeWithinS: "", name: "" };
    expect(matchesFilter(DEV_A, none, now)).toBe(true);
    // manufacturer: exact match only
    expect(matchesFilter(DEV_A, { ...none, manufacturer: "Apple, Inc." }, now)).toBe(true);
    expect(matchesFilter(DEV_A, { ...none, manufacturer: "Apple" }, now)).toBe(false);
    // min_rssi: devices without a reading are excluded
    expect(matchesFilter(DEV_A, { ...none, minRssi: "-50" }, now)).toBe(true);
    expect(matchesFilter(DEV_A, { ...none, minRssi: "-40" }, now)).toBe(false);
    expect(
      matchesFilter({ ...DEV_A, last_rssi: null }, { ...none, minRssi: "-90" }, now),
    ).toBe(false);
    // active_within_s: boundary is inclusive (age == window passes)
    const age3s = { ...DEV_A, last_seen_us: now - 3_000_000 };
    expect(matchesFilter(age3s, { ...none, activeWithinS: "3" }, now)).toBe(true);
    expect(matchesFilter(age3s, { ...none, activeWithinS: "2.9" }, now)).toBe(false);
    // name: case-insensitive substring; unnamed devices never match
    expect(matchesFilter(DEV_A, { ...none, name: "jana" }, now)).toBe(true);
    expect(matchesFilter(DEV_A, { ...none, name: "JANA'S" }, now)).toBe(true);
    expect(matchesFilter(DEV_A, { ...none, name: "speaker" }, now)).toBe(false);
    expect(matchesFilter(DEV_B, { ...none, name: "a" }, now)).toBe(false);
  });

  it("filters the live list", () => {
    let state = replay(liveSession());
    state = reduce(state, {
      type: "set-filter",
      field: "manufacturer",
      value: "Apple, Inc.",
    });
    const rows = deviceListView(state, NOW_US);
    expect(rows.map((r) => r.deviceId)).toEqual(["dev-b", "dev-a"]);
  });
});

describe("user input", () => {
  it("resets per-device panes when the selection changes", () => {
    let state = replay(liveSession());
    state = reduce(state, { type: "select-device", deviceId: "dev-a" });
    state = reduce(state, { type: "toggle-node", path: "r.0" });
    state = reduce(state, { type: "select-node", path: "r.0.1" });
    expect(state.toggledNodes.has("r.0")).toBe(true);
    state = reduce(state, { type: "select-device", deviceId: "dev-b" });
    expect(state.toggledNodes.size).toBe(0);
    expect(state.selectedNode).toBeNull();
    expect(state.detail).toBeNull();
    expect(state.detailStale).toBe(true);
  });

  it("toggles recording and remembers when it started", () => {
    let state = initialState();
    state = reduce(state, { type: "toggle-recording", nowUs: 50_000_000 });
    expect(state.recording).toBe(true);
    expect(state.recordingSinceUs).toBe(50_000_000);
    state = reduce(state, { type: "toggle-recording", nowUs: 60_000_000 });
    expect(state.recording).toBe(false);
  });

  it("defaults to the log radial scale and can switch to linear", () => {
    let state = initialState();
    expect(state.scale).toBe("log");
    state = reduce(state, { type: "set-scale", scale: "linear" });
    expect(state.scale).toBe("linear");
  });
});
