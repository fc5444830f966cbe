/** Pure view-model helpers: chart series shaping, axis scaling, formatting,
 * and role gating. No network, no DOM — everything here is unit-testable and
 * derives solely from API payloads. */

import type { ApplyReport, PortStatsPayload } from "./api.js";

export interface Point {
  t: number; // epoch milliseconds
  v: number;
}

export interface Panel {
  title: string;
  unit: string;
  color: string;
  points: Point[];
  headline: number; // server-computed current rate for the window
}

/** Per-interval deltas of a cumulative counter, scaled per second.
 * Decreasing pairs (counter reset) produce no point; rate semantics beyond
 * this presentational difference stay server-side in payload.rates. */
export function counterDeltas(samples: [number, number][], scale = 1): Point[] {
  const out: Point[] = [];
  for (let i = 1; i < samples.length; i++) {
    const [t0, v0] = samples[i - 1];
    const [t1, v1] = samples[i];
    if (t1 <= t0 || v1 < v0) continue;
    out.push({ t: t1, v: ((v1 - v0) / ((t1 - t0) / 1000)) * scale });
  }
  return out;
}

/** The four panels of the traffic view: bits and packets, in and out. */
export function statsToPanels(payload: PortStatsPayload): Panel[] {
  const s = payload.samples;
  return [
    { title: "bits in/s", unit: "bit/s", color: "#2563eb",
      points: counterDeltas(s["sdx_port_rx_bytes_total"] ?? [], 8),
      headline: payload.rates.bits_in_per_sec },
    { title: "bits out/s", unit: "bit/s", color: "#16a34a",
      points: counterDeltas(s["sdx_port_tx_bytes_total"] ?? [], 8),
      headline: payload.rates.bits_out_per_sec },
    { title: "packets in/s", unit: "pkt/s", color: "#9333ea",
      points: counterDeltas(s["sdx_port_rx_packets_total"] ?? []),
      headline: payload.rates.pkts_in_per_sec },
    { title: "packets out/s", unit: "pkt/s", color: "#ea580c",
      points: counterDeltas(s["sdx_port_tx_packets_total"] ?? []),
      headline: payload.rates.pkts_out_per_sec },
  ];
}

export interface Scale {
  x: (t: number) => number;
  y: (v: number) => number;
  yMax: number;
}

/** Map points into a width x height box with a little headroom. */
export function chartScale(points: Point[], width: number, height: number): Scale {
  const t0 = points.length ? points[0].t : 0;
  const t1 = points.length ? points[points.length - 1].t : 1;
  const vMax = points.reduce((m, p) => Math.max(m, p.v), 0);
  const yMax = vMax > 0 ? vMax * 1.1 : 1;
  const dt = t1 > t0 ? t1 - t0 : 1;
  return {
    x: (t: number) => ((t - t0) / dt) * width,
    y: (v: number) => height - (v / yMax) * height,
    yMax,
  };
}

const UNITS: [number, string][] = [
  [1e9, "G"],
  [1e6, "M"],
  [1e3, "k"],
];

export function formatRate(value: number, unit: string): string {
  for (const [factor, prefix] of UNITS) {
    if (Math.abs(value) >= factor) {
      return `${(value / factor).toFixed(2)} ${prefix}${unit}`;
    }
  }
  return `${value.toFixed(value === Math.round(value) ? 0 : 1)} ${unit}`;
}

export function formatBytes(n: number): string {
  if (n >= 1 << 30) return `${(n / (1 << 30)).toFixed(1)} GiB`;
  if (n >= 1 << 20) return `${(n / (1 << 20)).toFixed(1)} MiB`;
  if (n >= 1 << 10) return `${(n / (1 << 10)).toFixed(1)} KiB`;
  return `${n} B`;
}

export const ALL_TABS = ["status", "editor", "stats", "users"] as const;
export type Tab = (typeof ALL_TABS)[number];

/** Role gating mirrors the server matrix; the server still enforces it. */
export function visibleTabs(role: string): Tab[] {
  switch (role) {
    case "admin":
      return ["status", "editor", "stats", "users"];
    case "moderator":
      return ["status", "stats"];
    default:
      return ["stats"];
  }
}

export function summarizeApply(report: ApplyReport): string {
  const parts = Object.entries(report.per_dp)
    .sort(([a], [b]) => a.localeCompare(b))
    .map(([dp, row]) =>
      row.deferred ? `${dp}: deferred` : `${dp}: +${row.added}/-${row.removed}`);
  if (report.failed.length) parts.push(`failed: ${report.failed.join(", ")}`);
  return `${parts.join("  ")}  (${report.duration.toFixed(3)}s)`;
}

/** Ports a user may chart: own ports for customers, everything otherwise. */
export function selectablePorts(role: string,
                                owned: { dp: string; port: number }[],
                                all: { dp: string; port: number }[]):
    { dp: string; port: number }[] {
  const source = role === "customer" ? owned : all;
  return [...source].sort((a, b) =>
    a.dp === b.dp ? a.port - b.port : a.dp.localeCompare(b.dp));
}
