// RSSI-over-time chart layout for the selected device.  The polyline is
// split at reconnect gap markers so missing data renders as a visible hole,
// never as an interpolated line.

import type { RssiSample } from "./state.js";

export interface ChartPoint {
  x: number;
  y: number;
  timestampUs: number;
  rssi: number;
}

export interface ChartSegment {
  points: ChartPoint[];
}

export interface ChartTick {
  y: number;
  label: string;
}

export interface ChartLayout {
  segments: ChartSegment[];
  /** X positions of reconnect gap markers inside the visible window. */
  gapXs: number[];
  ticks: ChartTick[];
  windowStartUs: number;
  windowEndUs: number;
}

export const CHART_WINDOW_US = 60_000_000; // show the last minute
const Y_PAD_DB = 3;

export function layoutChart(
  samples: readonly RssiSample[],
  gaps: readonly number[],
  width: number,
  height: number,
  nowUs: number,
): ChartLayout {
  const windowEndUs = nowUs;
  const windowStartUs = nowUs - CHART_WINDOW_US;
  const visible = samples.filter(
    (s) => s.timestamp_us >= windowStartUs && s.timestamp_us <= windowEndUs,
  );

  let lo = -90;
  let hi = -30;
  if (visible.length > 0) {
    lo = Math.min(...visible.map((s) => s.rssi)) - Y_PAD_DB;
    hi = Math.max(...visible.map((s) => s.rssi)) + Y_PAD_DB;
    if (hi - lo < 10) {
      const mid = (hi + lo) / 2;
      lo = mid - 5;
      hi = mid + 5;
    }
  }

  const xFor = (timestampUs: number): number =>
    ((timestampUs - windowStartUs) / CHART_WINDOW_US) * width;
  const yFor = (rssi: number): number =>
    height - ((rssi - lo) / (hi - lo)) * height;

  const gapsInWindow = gaps
    .filter((g) => g >= windowStartUs && g <= windowEndUs)
    .sort((a, b) => a - b);

  const segments: ChartSegment[] = [];
  let current: ChartPoint[] = [];
  let gapIndex = 0;
  let previousUs: number | null = null;
  for (const sample of visible) {
    // A gap between the previous sample and this one severs the line.
    while (
      gapIndex < gapsInWindow.length &&
      gapsInWindow[gapIndex]! < sample.timestamp_us
    ) {
      if (previousUs !== null && gapsInWindow[gapIndex]! >= previousUs) {
        if (current.length > 0) segments.push({ points: current });
        current = [];
      }
      gapIndex++;
    }
    current.push({
      x: xFor(sample.timestamp_us),
      y: yFor(sample.rssi),
      timestampUs: sample.timestamp_us,
      rssi: sample.rssi,
    });
    previousUs = sample.timestamp_us;
  }
  if (current.length > 0) segments.push({ points: current });

  const ticks: ChartTick[] = [];
  const step = Math.max(5, Math.ceil((hi - lo) / 4 / 5) * 5);
  for (let v = Math.ceil(lo / step) * step; v <= hi; v += step) {
    ticks.push({ y: yFor(v), label: `${v}` });
  }

  return {
    segments,
    gapXs: gapsInWindow.map(xFor),
    ticks,
    windowStartUs,
    windowEndUs,
  };
}
