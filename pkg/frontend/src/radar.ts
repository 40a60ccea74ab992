// Radar scene layout: distances and server-assigned angles in, pixel
// positions out.  Pure arithmetic — no randomness, no clock — so a fixed
// snapshot always lays out identically and positions only move when the
// entries themselves change.

import type { ProximityEntry } from "./types.js";
import type { RadarScale } from "./state.js";

/** Mirror of the service's display clamp: nothing plots beyond this. */
export const MAX_DISTANCE_M = 50;

/** Closest distance the log scale resolves; nearer entries sit at center. */
export const LOG_MIN_DISTANCE_M = 0.1;

/** Margin between the outer rim and the viewport edge, for ring labels. */
export const RIM_MARGIN_PX = 18;

export interface RingSpec {
  distanceM: number;
  radiusPx: number;
  label: string;
}

export interface Blip {
  deviceId: string;
  x: number;
  y: number;
  radiusPx: number;
  angleRad: number;
  distanceM: number;
  clamped: boolean;
  stale: boolean;
}

export interface RadarScene {
  width: number;
  height: number;
  cx: number;
  cy: number;
  rimPx: number;
  scale: RadarScale;
  rings: RingSpec[];
  blips: Blip[];
}

/**
 * Radial distance→pixel mapping.
 *
 * Log scale (default): BLE distance estimates span two orders of magnitude,
 * so radius grows with log10 of distance between LOG_MIN_DISTANCE_M (center)
 * and MAX_DISTANCE_M (rim).  Linear scale maps [0, MAX_DISTANCE_M] straight
 * onto [0, rim] for close-range hunting.
 */
export function radiusFor(
  distanceM: number,
  scale: RadarScale,
  rimPx: number,
): number {
  if (!(distanceM > 0)) return 0;
  let fraction: number;
  if (scale === "log") {
    fraction =
      Math.log10(Math.max(distanceM, LOG_MIN_DISTANCE_M) / LOG_MIN_DISTANCE_M) /
      Math.log10(MAX_DISTANCE_M / LOG_MIN_DISTANCE_M);
  } else {
    fraction = distanceM / MAX_DISTANCE_M;
  }
  return rimPx * Math.min(1, Math.max(0, fraction));
}

/** Ring distances per scale; the innermost ring sits beyond 1 m so nearby
 * devices render strictly inside it. */
export function ringDistances(scale: RadarScale): number[] {
  return scale === "log" ? [2, 5, 10, 20, 50] : [10, 20, 30, 40, 50];
}

export function layoutRadar(
  entries: readonly ProximityEntry[],
  scale: RadarScale,
  width: number,
  height: number,
): RadarScene {
  const cx = width / 2;
  const cy = height / 2;
  const rimPx = Math.max(10, Math.min(width, height) / 2 - RIM_MARGIN_PX);

  const rings: RingSpec[] = ringDistances(scale).map((distanceM) => ({
    distanceM,
    radiusPx: radiusFor(distanceM, scale, rimPx),
    label: `${distanceM} m`,
  }));

  const blips: Blip[] = entries.map((entry) => {
    const radiusPx = entry.clamped
      ? rimPx
      : radiusFor(entry.distance_m, scale, rimPx);
    return {
      deviceId: entry.device_id,
      x: cx + radiusPx * Math.cos(entry.angle_rad),
      y: cy + radiusPx * Math.sin(entry.angle_rad),
      radiusPx,
      angleRad: entry.angle_rad,
      distanceM: entry.distance_m,
      clamped: entry.clamped,
      stale: entry.stale,
    };
  });
  // Stable z-order regardless of the order entries arrive in.
  blips.sort((a, b) => (a.deviceId < b.deviceId ? -1 : a.deviceId > b.deviceId ? 1 : 0));

  return { width, height, cx, cy, rimPx, scale, rings, blips };
}
