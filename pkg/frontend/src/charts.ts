/** Canvas line charts for the traffic panels. Rendering only; values come
 * straight from the view model. */

import { chartScale, formatRate, type Panel } from "./model.js";

const PAD = { left: 8, right: 8, top: 22, bottom: 8 };

export function drawPanel(canvas: HTMLCanvasElement, panel: Panel): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const w = canvas.width;
  const h = canvas.height;
  const plotW = w - PAD.left - PAD.right;
  const plotH = h - PAD.top - PAD.bottom;
  ctx.clearRect(0, 0, w, h);

  ctx.fillStyle = "#0f172a";
  ctx.fillRect(0, 0, w, h);
  ctx.font = "12px system-ui, sans-serif";
  ctx.fillStyle = "#94a3b8";
  ctx.fillText(panel.title, PAD.left, 14);
  ctx.fillStyle = panel.color;
  const headline = formatRate(panel.headline, panel.unit);
  ctx.fillText(headline, w - PAD.right - ctx.measureText(headline).width, 14);

  const scale = chartScale(panel.points, plotW, plotH);
  ctx.strokeStyle = "#1e293b";
  ctx.beginPath();
  for (const frac of [0.25, 0.5, 0.75]) {
    ctx.moveTo(PAD.left, PAD.top + plotH * frac);
    ctx.lineTo(PAD.left + plotW, PAD.top + plotH * frac);
  }
  ctx.stroke();

  if (!panel.points.length) {
    ctx.fillStyle = "#475569";
    ctx.fillText("no data", PAD.left + plotW / 2 - 20, PAD.top + plotH / 2);
    return;
  }
  ctx.strokeStyle = panel.color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  panel.points.forEach((p, i) => {
    const x = PAD.left + scale.x(p.t);
    const y = PAD.top + scale.y(p.v);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}
