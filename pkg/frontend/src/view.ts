/**
 * Pure view models: state/status messages in, drawable numbers out.
 *
 * Everything here is side-effect free so the bindings can be tested
 * without a DOM; render.ts only turns these into pixels.
 */

import { DepthSummary, StateMessage } from "./protocol.js";
import { SeriesPoint, UiSessionState } from "./session.js";

export interface DialView {
  /** recording-head probability in [0, 1] */
  p: number;
  /** needle angle in radians; the dial spans -2.1 to +2.1 rad */
  angle: number;
  /** beta marker angle in radians */
  betaAngle: number;
  /** true when p_r exceeds beta, i.e. this frame would be recorded */
  wouldRecord: boolean;
}

const DIAL_SPAN = 2.1; // rad on each side of vertical

const dialAngle = (p: number): number => -DIAL_SPAN + 2 * DIAL_SPAN * p;

export function dialView(msg: StateMessage, beta: number): DialView {
  const p = Math.min(1, Math.max(0, msg.p_r));
  return {
    p,
    angle: dialAngle(p),
    betaAngle: dialAngle(beta),
    wouldRecord: msg.p_r > beta,
  };
}

export interface DepthView {
  trusted: boolean;
  /** true when the rejected-depth ultrasonic branch is in charge */
  usBranch: boolean;
  /** left/mid/right means as bar fractions of the view range; null = no return */
  bars: Array<number | null>;
}

const DEPTH_RANGE_M = 4.0;

export function depthView(depth: DepthSummary): DepthView {
  const frac = (x: number | null): number | null =>
    x === null ? null : Math.min(1, Math.max(0, x / DEPTH_RANGE_M));
  return {
    trusted: depth.trusted,
    usBranch: !depth.trusted,
    bars: [frac(depth.left), frac(depth.mid), frac(depth.right)],
  };
}

export interface RecordingView {
  on: boolean;
  label: string;
}

export function recordingView(msg: StateMessage): RecordingView {
  return { on: msg.recording, label: msg.recording ? "REC" : "idle" };
}

export interface GaugeView {
  /** reading as a fraction of the gauge range */
  frac: number;
  near: boolean;
}

const US_RANGE_M = 2.0;
const US_NEAR_M = 0.5;

export function usGauge(meters: number): GaugeView {
  return {
    frac: Math.min(1, Math.max(0, meters / US_RANGE_M)),
    near: meters < US_NEAR_M,
  };
}

export interface ChartView {
  /** one [x, y] pair per distinct status seq, x evenly spaced in [0, 1] */
  points: Array<[number, number]>;
  min: number;
  max: number;
}

export function chartView(series: SeriesPoint[]): ChartView {
  if (series.length === 0) return { points: [], min: 0, max: 1 };
  const values = series.map((p) => p.value);
  const min = Math.min(...values);
  const max = Math.max(...values);
  const denom = Math.max(1, series.length - 1);
  return {
    points: series.map((p, i) => [i / denom, p.value] as [number, number]),
    min,
    max,
  };
}

export interface TrailView {
  /** trail in unit-square coordinates, newest last */
  points: Array<[number, number]>;
  /** current pose in the same unit square, with world heading */
  poseUnit: [number, number] | null;
  heading: number;
  /** meters covered by one unit square side, for the scale caption */
  span: number;
}

/** Fit the trail and current pose into a unit square, preserving aspect. */
export function trailView(s: UiSessionState): TrailView {
  if (s.trail.length === 0)
    return { points: [], poseUnit: null, heading: 0, span: 1 };
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const [x, y] of s.trail) {
    minX = Math.min(minX, x);
    maxX = Math.max(maxX, x);
    minY = Math.min(minY, y);
    maxY = Math.max(maxY, y);
  }
  const span = Math.max(maxX - minX, maxY - minY, 1e-6) * 1.1;
  const cx = (minX + maxX) / 2;
  const cy = (minY + maxY) / 2;
  const toUnit = (x: number, y: number): [number, number] => [
    0.5 + (x - cx) / span,
    0.5 + (y - cy) / span,
  ];
  const pose = s.latest === null ? null : s.latest.pose;
  return {
    points: s.trail.map(([x, y]) => toUnit(x, y)),
    poseUnit: pose === null ? null : toUnit(pose.x, pose.y),
    heading: pose === null ? 0 : pose.th,
    span,
  };
}
