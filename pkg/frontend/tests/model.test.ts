import assert from "node:assert/strict";
import { test } from "node:test";

import type { PortStatsPayload } from "../src/api.js";
import { chartScale, counterDeltas, formatBytes, formatRate, selectablePorts,
         statsToPanels, summarizeApply, visibleTabs } from "../src/model.js";

test("counterDeltas: per-interval rate from cumulative samples", () => {
  const points = counterDeltas([[0, 0], [1000, 1000], [3000, 5000]]);
  assert.deepEqual(points, [{ t: 1000, v: 1000 }, { t: 3000, v: 2000 }]);
});

test("counterDeltas: scale factor applies (bytes to bits)", () => {
  const points = counterDeltas([[0, 0], [1000, 125]], 8);
  assert.deepEqual(points, [{ t: 1000, v: 1000 }]);
});

test("counterDeltas: counter reset produces no point", () => {
  const points = counterDeltas([[0, 100], [1000, 40], [2000, 90]]);
  assert.deepEqual(points, [{ t: 2000, v: 50 }]);
});

test("counterDeltas: empty and single-sample series yield nothing", () => {
  assert.deepEqual(counterDeltas([]), []);
  assert.deepEqual(counterDeltas([[0, 5]]), []);
});

function samplePayload(): PortStatsPayload {
  return {
    dp: "sw1", port: 2, window: 60,
    rates: { bits_in_per_sec: 1e9, bits_out_per_sec: 0,
             pkts_in_per_sec: 100000, pkts_out_per_sec: 0, window_seconds: 60 },
    samples: {
      sdx_port_rx_bytes_total: [[0, 0], [15000, 1875000000]],
      sdx_port_tx_bytes_total: [[0, 0], [15000, 0]],
      sdx_port_rx_packets_total: [[0, 0], [15000, 1500000]],
      sdx_port_tx_packets_total: [[0, 0], [15000, 0]],
    },
  };
}

test("statsToPanels: four panels, values recomputable from the payload", () => {
  const payload = samplePayload();
  const panels = statsToPanels(payload);
  assert.equal(panels.length, 4);
  assert.deepEqual(panels.map((p) => p.title),
                   ["bits in/s", "bits out/s", "packets in/s", "packets out/s"]);
  // chart points equal an independent recomputation from the same payload
  assert.deepEqual(panels[0].points,
                   counterDeltas(payload.samples["sdx_port_rx_bytes_total"], 8));
  assert.equal(panels[0].points[0].v, 1e9);
  // headline values come from the server-computed rates verbatim
  assert.equal(panels[0].headline, payload.rates.bits_in_per_sec);
  assert.equal(panels[2].headline, payload.rates.pkts_in_per_sec);
});

test("chartScale: endpoints map onto the box with 10% headroom", () => {
  const points = [{ t: 0, v: 0 }, { t: 100, v: 50 }, { t: 200, v: 100 }];
  const scale = chartScale(points, 400, 100);
  assert.equal(scale.x(0), 0);
  assert.equal(scale.x(200), 400);
  assert.ok(Math.abs(scale.yMax - 110) < 1e-9);
  assert.equal(scale.y(0), 100);
  assert.ok(Math.abs(scale.y(scale.yMax)) < 1e-9);
});

test("chartScale: empty series does not divide by zero", () => {
  const scale = chartScale([], 400, 100);
  assert.equal(scale.yMax, 1);
  assert.equal(scale.y(0), 100);
});

test("formatRate picks sensible prefixes", () => {
  assert.equal(formatRate(1e9, "bit/s"), "1.00 Gbit/s");
  assert.equal(formatRate(125000, "pkt/s"), "125.00 kpkt/s");
  assert.equal(formatRate(42, "pkt/s"), "42 pkt/s");
});

test("formatBytes", () => {
  assert.equal(formatBytes(512), "512 B");
  assert.equal(formatBytes(85.473 * (1 << 20) | 0), "85.5 MiB");
});

test("visibleTabs: role gating matches the server matrix", () => {
  assert.deepEqual(visibleTabs("admin"), ["status", "editor", "stats", "users"]);
  assert.deepEqual(visibleTabs("moderator"), ["status", "stats"]);
  assert.deepEqual(visibleTabs("customer"), ["stats"]);
});

test("summarizeApply", () => {
  const text = summarizeApply({
    per_dp: { sw1: { added: 2, removed: 1, deferred: false },
              sw2: { added: 0, removed: 0, deferred: true } },
    deferred: ["sw2"], failed: [], duration: 0.01234, fingerprint: "abc",
  });
  assert.equal(text, "sw1: +2/-1  sw2: deferred  (0.012s)");
});

test("selectablePorts: customers see owned ports only", () => {
  const owned = [{ dp: "sw1", port: 1 }];
  const all = [{ dp: "sw1", port: 2 }, { dp: "sw1", port: 1 }];
  assert.deepEqual(selectablePorts("customer", owned, all), owned);
  assert.deepEqual(selectablePorts("admin", owned, all),
                   [{ dp: "sw1", port: 1 }, { dp: "sw1", port: 2 }]);
});
