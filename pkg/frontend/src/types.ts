// Mirrors of the JSON shapes served by the btlemap HTTP + WebSocket API.
// Field names match the wire format exactly (snake_case).

export interface Fingerprint {
  manufacturer: string | null;
  device_type: string | null;
  model: string | null;
  evidence: string[];
}

export interface DeviceSummary {
  device_id: string;
  name: string | null;
  manufacturer: string | null;
  fingerprint: Fingerprint | null;
  current_mac: string;
  mac_count: number;
  first_seen_us: number;
  last_seen_us: number;
  last_rssi: number | null;
  smoothed_rssi: number | null;
  tx_power: number | null;
  adv_count: number;
  gatt_service_count: number;
}

export interface MacSighting {
  mac: string;
  first_seen_us: number;
  last_seen_us: number;
}

export interface TrackabilityFinding {
  field_descriptor: string;
  constant_value_hex: string;
  distinct_macs_observed: number;
  first_seen_us: number;
  last_seen_us: number;
}

export interface GattCharacteristic {
  uuid: string;
  properties: string[];
  value_hex?: string;
}

export interface GattService {
  uuid: string;
  characteristics: GattCharacteristic[];
}

/** One node of the dissection tree embedded in advertisement detail. */
export interface TreeNode {
  label: string;
  offset: number;
  length: number;
  children: TreeNode[];
  decoded?: string;
}

export interface AdvertisementView {
  timestamp_us: number;
  source_id: string;
  mac: string;
  address_type: string;
  pdu_type: string;
  rssi: number;
  payload_hex: string;
  channel: number | null;
  tree: TreeNode;
}

export interface DeviceDetail extends DeviceSummary {
  advertised_name: string | null;
  gatt_name: string | null;
  gatt_services: GattService[];
  macs: MacSighting[];
  trackable_fields: TrackabilityFinding[];
  advertisements: AdvertisementView[];
  enumeration_failed_at_us: number | null;
}

export interface AgentInfo {
  name: string;
  online: boolean;
  capabilities: string[];
  advertisements: number;
  malformed_lines: number;
  connected_at_us: number;
}

export interface ProximityEntry {
  device_id: string;
  distance_m: number;
  angle_rad: number;
  smoothed_rssi: number;
  stale: boolean;
  clamped: boolean;
}

export interface RssiSampleBody {
  device_id: string;
  timestamp_us: number;
  rssi: number;
  source_id: string;
}

export interface AgentStatusBody {
  agent: string;
  online: boolean;
  reason?: string;
}

export interface GattResultBody {
  device_id: string;
  services: GattService[];
}

export interface SnapshotBody {
  devices: DeviceSummary[];
  agents: AgentInfo[];
}

/** Every WebSocket frame: sequence number, event kind, kind-specific body. */
export interface Envelope {
  seq: number;
  kind: string;
  body: unknown;
}

export const KIND_SNAPSHOT = "snapshot";
export const KIND_DEVICE_APPEARED = "device_appeared";
export const KIND_DEVICE_UPDATED = "device_updated";
export const KIND_RSSI_SAMPLE = "rssi_sample";
export const KIND_GATT_RESULT = "gatt_result";
export const KIND_AGENT_STATUS = "agent_status";

export const CLOSE_CODE_LAGGED = 1013;
