/**
 * Canvas/DOM painting. Everything drawable is computed in view.ts;
 * this module owns pixels only and runs solely in the browser.
 */

import { StateMessage } from "./protocol.js";
import { UiSessionState } from "./session.js";
import {
  chartView,
  depthView,
  dialView,
  recordingView,
  trailView,
  usGauge,
} from "./view.js";

export interface Dom {
  connection: HTMLElement;
  banner: HTMLElement;
  toast: HTMLElement;
  topdown: HTMLCanvasElement;
  camera: HTMLCanvasElement;
  depthBars: HTMLCanvasElement;
  trust: HTMLElement;
  usL: HTMLCanvasElement;
  usR: HTMLCanvasElement;
  dial: HTMLCanvasElement;
  recording: HTMLElement;
  counts: HTMLElement;
  navChart: HTMLCanvasElement;
  recChart: HTMLCanvasElement;
  keptChart: HTMLCanvasElement;
}

const FG = "#d8dee9";
const DIM = "#4c566a";
const ACCENT = "#88c0d0";
const WARN = "#ebcb8b";
const ALERT = "#bf616a";
const OK = "#a3be8c";

function ctx2d(c: HTMLCanvasElement): CanvasRenderingContext2D {
  const ctx = c.getContext("2d");
  if (ctx === null) throw new Error("canvas 2d context unavailable");
  return ctx;
}

function clear(c: HTMLCanvasElement): CanvasRenderingContext2D {
  const ctx = ctx2d(c);
  ctx.clearRect(0, 0, c.width, c.height);
  return ctx;
}

// ---------------------------------------------------------------------------
// panels

function drawTopdown(c: HTMLCanvasElement, s: UiSessionState): void {
  const ctx = clear(c);
  const { width: W, height: H } = c;
  ctx.strokeStyle = DIM;
  ctx.lineWidth = 1;
  for (let i = 1; i < 8; i++) {
    const x = (i * W) / 8;
    const y = (i * H) / 8;
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, H);
    ctx.moveTo(0, y);
    ctx.lineTo(W, y);
    ctx.stroke();
  }
  const tv = trailView(s);
  if (tv.points.length === 0) return;
  // unit square -> canvas, y flipped so +y points up on screen
  const px = (u: number): number => u * W;
  const py = (u: number): number => H - u * H;
  ctx.strokeStyle = ACCENT;
  ctx.lineWidth = 2;
  ctx.beginPath();
  tv.points.forEach(([ux, uy], i) => {
    if (i === 0) ctx.moveTo(px(ux), py(uy));
    else ctx.lineTo(px(ux), py(uy));
  });
  ctx.stroke();
  if (tv.poseUnit !== null) {
    const [ux, uy] = tv.poseUnit;
    const r = 8;
    ctx.save();
    ctx.translate(px(ux), py(uy));
    ctx.rotate(-tv.heading); // canvas y is flipped
    ctx.fillStyle = OK;
    ctx.beginPath();
    ctx.moveTo(r, 0);
    ctx.lineTo(-r * 0.6, r * 0.55);
    ctx.lineTo(-r * 0.6, -r * 0.55);
    ctx.closePath();
    ctx.fill();
    ctx.restore();
  }
  ctx.fillStyle = DIM;
  ctx.font = "10px sans-serif";
  ctx.fillText(`${tv.span.toFixed(1)} m across`, 6, H - 6);
}

function drawCamera(c: HTMLCanvasElement, msg: StateMessage): void {
  const { w, h, b64 } = msg.image;
  const raw = atob(b64);
  if (raw.length !== w * h * 3) return;
  const rgba = new Uint8ClampedArray(w * h * 4);
  for (let i = 0, j = 0; i < raw.length; i += 3, j += 4) {
    rgba[j] = raw.charCodeAt(i);
    rgba[j + 1] = raw.charCodeAt(i + 1);
    rgba[j + 2] = raw.charCodeAt(i + 2);
    rgba[j + 3] = 255;
  }
  const off = new OffscreenCanvas(w, h);
  const octx = off.getContext("2d");
  if (octx === null) return;
  octx.putImageData(new ImageData(rgba, w, h), 0, 0);
  const ctx = clear(c);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, c.width, c.height);
}

function drawDepth(c: HTMLCanvasElement, trust: HTMLElement,
                   msg: StateMessage): void {
  const dv = depthView(msg.depth);
  const ctx = clear(c);
  const { width: W, height: H } = c;
  const labels = ["L", "M", "R"];
  dv.bars.forEach((frac, i) => {
    const x = 10 + i * (W / 3);
    const barW = W / 3 - 20;
    ctx.strokeStyle = DIM;
    ctx.strokeRect(x, 4, barW, H - 22);
    if (frac === null) {
      ctx.fillStyle = DIM;
      ctx.fillText("—", x + barW / 2 - 4, H / 2);
    } else {
      const hgt = (H - 22) * frac;
      ctx.fillStyle = frac < 0.2 ? ALERT : ACCENT;
      ctx.fillRect(x, 4 + (H - 22) - hgt, barW, hgt);
    }
    ctx.fillStyle = FG;
    ctx.font = "10px sans-serif";
    ctx.fillText(labels[i], x + barW / 2 - 3, H - 6);
  });
  trust.textContent = dv.usBranch
    ? "depth rejected: ultrasonic branch"
    : "depth trusted";
  trust.style.color = dv.usBranch ? WARN : OK;
}

function drawGauge(c: HTMLCanvasElement, meters: number): void {
  const g = usGauge(meters);
  const ctx = clear(c);
  const { width: W, height: H } = c;
  ctx.strokeStyle = DIM;
  ctx.strokeRect(0.5, 0.5, W - 1, H - 1);
  ctx.fillStyle = g.near ? ALERT : ACCENT;
  ctx.fillRect(1, 1, (W - 2) * g.frac, H - 2);
  ctx.fillStyle = FG;
  ctx.font = "10px sans-serif";
  ctx.fillText(`${meters.toFixed(2)} m`, 4, H - 4);
}

function drawDial(c: HTMLCanvasElement, msg: StateMessage, beta: number): void {
  const dv = dialView(msg, beta);
  const ctx = clear(c);
  const { width: W, height: H } = c;
  const cx = W / 2;
  const cy = H - 12;
  const R = Math.min(W / 2 - 8, H - 24);
  const toCanvas = (a: number): [number, number] => [
    cx + R * Math.sin(a),
    cy - R * Math.cos(a),
  ];
  ctx.strokeStyle = DIM;
  ctx.lineWidth = 6;
  ctx.beginPath();
  ctx.arc(cx, cy, R, -Math.PI / 2 - 2.1, -Math.PI / 2 + 2.1);
  ctx.stroke();
  // the would-record zone spans beta..1 on the arc
  ctx.strokeStyle = dv.wouldRecord ? ALERT : WARN;
  ctx.beginPath();
  ctx.arc(cx, cy, R, -Math.PI / 2 + dv.betaAngle, -Math.PI / 2 + 2.1);
  ctx.stroke();
  const [bx, by] = toCanvas(dv.betaAngle);
  ctx.fillStyle = FG;
  ctx.beginPath();
  ctx.arc(bx, by, 3, 0, 2 * Math.PI);
  ctx.fill();
  const [nx, ny] = toCanvas(dv.angle);
  ctx.strokeStyle = dv.wouldRecord ? ALERT : FG;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(cx, cy);
  ctx.lineTo(nx, ny);
  ctx.stroke();
  ctx.fillStyle = FG;
  ctx.font = "11px sans-serif";
  ctx.fillText(`p_r ${dv.p.toFixed(3)}`, 6, 12);
  ctx.fillText(`β ${beta.toFixed(2)}`, W - 52, 12);
}

function drawChart(c: HTMLCanvasElement, label: string,
                   series: Parameters<typeof chartView>[0]): void {
  const cv = chartView(series);
  const ctx = clear(c);
  const { width: W, height: H } = c;
  ctx.strokeStyle = DIM;
  ctx.strokeRect(0.5, 0.5, W - 1, H - 1);
  ctx.fillStyle = FG;
  ctx.font = "10px sans-serif";
  ctx.fillText(label, 4, 11);
  if (cv.points.length === 0) return;
  const spread = cv.max - cv.min || 1;
  ctx.strokeStyle = ACCENT;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  cv.points.forEach(([u, value], i) => {
    const x = 4 + u * (W - 8);
    const y = H - 4 - ((value - cv.min) / spread) * (H - 20);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
  const last = cv.points[cv.points.length - 1][1];
  ctx.fillText(last.toPrecision(3), W - 48, 11);
}

// ---------------------------------------------------------------------------

export function renderAll(dom: Dom, s: UiSessionState, beta: number): void {
  dom.connection.textContent = s.connection + (s.driver ? " · driver" : "");
  dom.connection.style.color =
    s.connection === "open" ? OK : s.connection === "closed" ? ALERT : WARN;
  dom.banner.textContent = s.banner ?? "";
  dom.banner.style.display = s.banner === null ? "none" : "block";
  dom.toast.textContent = s.toast ?? "";
  dom.toast.style.display = s.toast === null ? "none" : "block";

  drawTopdown(dom.topdown, s);
  const msg = s.latest;
  if (msg !== null) {
    drawCamera(dom.camera, msg);
    drawDepth(dom.depthBars, dom.trust, msg);
    drawGauge(dom.usL, msg.us.l);
    drawGauge(dom.usR, msg.us.r);
    drawDial(dom.dial, msg, beta);
    const rec = recordingView(msg);
    dom.recording.textContent = rec.on ? "● " + rec.label : rec.label;
    dom.recording.style.color = rec.on ? ALERT : DIM;
    dom.counts.textContent =
      `iter ${msg.counts.iter} · kept ${msg.counts.kept}` +
      ` · total ${msg.counts.total} · t ${msg.t.toFixed(1)}s` +
      (s.episodeRunning ? "" : " · stopped");
  }
  drawChart(dom.navChart, "nav loss", s.navLoss);
  drawChart(dom.recChart, "rec loss", s.recLoss);
  drawChart(dom.keptChart, "frames kept", s.keptCounts);
}
