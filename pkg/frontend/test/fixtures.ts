// Hand-authored server transcript used by the replay tests.  Every value
// below is written out literally so expected view models can be derived by
// hand; shapes match the documented wire format exactly.

import type {
  AgentInfo,
  DeviceSummary,
  Envelope,
  ProximityEntry,
  SnapshotBody,
} from "../src/types.js";

export const NOW_US = 103_000_000;

function summary(partial: Partial<DeviceSummary> & { device_id: string }): DeviceSummary {
  return {
    name: null,
    manufacturer: null,
    fingerprint: null,
    current_mac: "00:00:00:00:00:00",
    mac_count: 1,
    first_seen_us: 0,
    last_seen_us: 0,
    last_rssi: null,
    smoothed_rssi: null,
    tx_power: null,
    adv_count: 0,
    gatt_service_count: 0,
    ...partial,
  };
}

export const DEV_A: DeviceSummary = summary({
  device_id: "dev-a",
  name: "Jana's Phone",
  manufacturer: "Apple, Inc.",
  fingerprint: {
    manufacturer: "Apple, Inc.",
    device_type: "Apple device",
    model: null,
    evidence: ["apple-nearby", "known-company"],
  },
  current_mac: "5e:11:22:33:44:55",
  mac_count: 3,
  first_seen_us: 10_000_000,
  last_seen_us: 100_000_000,
  last_rssi: -48,
  smoothed_rssi: -49.2,
  adv_count: 120,
  gatt_service_count: 2,
});

export const DEV_B: DeviceSummary = summary({
  device_id: "dev-b",
  manufacturer: "Apple, Inc.",
  fingerprint: {
    manufacturer: "Apple, Inc.",
    device_type: "earphones",
    model: "AirPods Pro (2nd generation)",
    evidence: ["apple-earphones"],
  },
  current_mac: "62:aa:bb:cc:dd:ee",
  first_seen_us: 20_000_000,
  last_seen_us: 99_200_000,
  last_rssi: -61,
  smoothed_rssi: -60.4,
  adv_count: 80,
});

export const DEV_C: DeviceSummary = summary({
  device_id: "dev-c",
  name: "BOOMBOX Box",
  current_mac: "00:0a:95:aa:bb:cc",
  first_seen_us: 5_000_000,
  last_seen_us: 80_000_000,
  last_rssi: -70,
  smoothed_rssi: -69.1,
  adv_count: 44,
});

export const AGENT: AgentInfo = {
  name: "sim-scanner",
  online: true,
  capabilities: ["adv", "gatt"],
  advertisements: 300,
  malformed_lines: 0,
  connected_at_us: 1_000_000,
};

export const SNAPSHOT_1: SnapshotBody = {
  devices: [DEV_A, DEV_B, DEV_C],
  agents: [AGENT],
};

export const DEV_A_UPDATED: DeviceSummary = {
  ...DEV_A,
  last_seen_us: 101_000_000,
  last_rssi: -50,
  adv_count: 121,
};

export const DEV_B_UPDATED: DeviceSummary = {
  ...DEV_B,
  last_seen_us: 102_000_000,
  last_rssi: -60,
  adv_count: 81,
};

export const DEV_D: DeviceSummary = summary({
  device_id: "dev-d",
  manufacturer: "Nordic Semiconductor ASA",
  current_mac: "7a:01:02:03:04:05",
  mac_count: 2,
  first_seen_us: 90_000_000,
  last_seen_us: 102_500_000,
  last_rssi: -77,
  smoothed_rssi: -76.5,
  adv_count: 12,
});

/** The delta frames that follow SNAPSHOT_1, in stream order. */
export const DELTAS: Envelope[] = [
  {
    seq: 1,
    kind: "rssi_sample",
    body: {
      device_id: "dev-a",
      timestamp_us: 101_000_000,
      rssi: -50,
      source_id: "sim-scanner",
    },
  },
  { seq: 2, kind: "device_updated", body: DEV_A_UPDATED },
  {
    seq: 3,
    kind: "rssi_sample",
    body: {
      device_id: "dev-b",
      timestamp_us: 102_000_000,
      rssi: -60,
      source_id: "sim-scanner",
    },
  },
  { seq: 4, kind: "device_updated", body: DEV_B_UPDATED },
  { seq: 5, kind: "device_appeared", body: DEV_D },
  {
    seq: 6,
    kind: "agent_status",
    body: { agent: "sim-scanner", online: false, reason: "heartbeat timeout" },
  },
  {
    seq: 7,
    kind: "gatt_result",
    body: {
      device_id: "dev-c",
      services: [
        {
          uuid: "1800",
          characteristics: [
            { uuid: "2a00", properties: ["read"], value_hex: "424f4f4d424f5820426f78" },
          ],
        },
      ],
    },
  },
];

/** Snapshot delivered by the SECOND connection (dev-c and dev-d are gone,
 * dev-e is new, the agent is back online). */
export const DEV_A_LATER: DeviceSummary = {
  ...DEV_A_UPDATED,
  last_seen_us: 104_000_000,
  last_rssi: -47,
  adv_count: 130,
};

export const DEV_E: DeviceSummary = summary({
  device_id: "dev-e",
  name: "hidden-beacon",
  current_mac: "11:22:33:44:55:66",
  first_seen_us: 103_500_000,
  last_seen_us: 103_900_000,
  last_rssi: -82,
  smoothed_rssi: -82,
  adv_count: 3,
});

export const SNAPSHOT_2: SnapshotBody = {
  devices: [DEV_A_LATER, DEV_B_UPDATED, DEV_E],
  agents: [{ ...AGENT, online: true, advertisements: 420 }],
};

export function snapshotFrame(body: SnapshotBody): Envelope {
  return { seq: 0, kind: "snapshot", body };
}

// ---------------------------------------------------------------------------
// Radar fixture: six proximity entries covering the interesting cases —
// sub-meter, ring boundaries, rim clamp, stale, and angle extremes.

export const PROXIMITY_FIXTURE: ProximityEntry[] = [
  { device_id: "dev-a", distance_m: 1.0, angle_rad: 0.0, smoothed_rssi: -49.2, stale: false, clamped: false },
  { device_id: "dev-b", distance_m: 2.0, angle_rad: Math.PI / 2, smoothed_rssi: -60.4, stale: false, clamped: false },
  { device_id: "dev-c", distance_m: 10.0, angle_rad: Math.PI, smoothed_rssi: -69.1, stale: false, clamped: false },
  { device_id: "dev-d", distance_m: 60.0, angle_rad: 2.3561944901923448, smoothed_rssi: -88.0, stale: false, clamped: true },
  { device_id: "dev-e", distance_m: 0.05, angle_rad: 1.0, smoothed_rssi: -30.0, stale: false, clamped: false },
  { device_id: "dev-f", distance_m: 25.0, angle_rad: 5.0, smoothed_rssi: -75.0, stale: true, clamped: false },
];
