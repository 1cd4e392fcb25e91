/** Minimal dependency-free line chart on a canvas.
 *
 * Geometry is computed by pure functions so tests (and headless e2e runs,
 * where jsdom has no 2D context) can verify what would be drawn; draw()
 * is a thin painter over that geometry.
 */

import { Point } from "./state.js";

export interface ChartOptions {
  vMin: number;
  vMax: number;
  guides?: () => number[]; // horizontal threshold lines, value units
  color?: string;
  label?: string;
}

export interface Geometry {
  polyline: Array<[number, number]>;
  guideYs: number[];
}

export function valueToY(v: number, vMin: number, vMax: number, height: number): number {
  const clamped = Math.min(Math.max(v, vMin), vMax);
  return height - ((clamped - vMin) / (vMax - vMin)) * height;
}

export function computeGeometry(
  points: Point[],
  width: number,
  height: number,
  opts: ChartOptions,
): Geometry {
  const guideYs = (opts.guides?.() ?? []).map((g) =>
    valueToY(g, opts.vMin, opts.vMax, height),
  );
  if (points.length === 0) return { polyline: [], guideYs };
  const t0 = points[0].t;
  const t1 = points[points.length - 1].t;
  const span = Math.max(t1 - t0, 1);
  const polyline = points.map((p): [number, number] => [
    ((p.t - t0) / span) * width,
    valueToY(p.v, opts.vMin, opts.vMax, height),
  ]);
  return { polyline, guideYs };
}

export class LineChart {
  readonly canvas: HTMLCanvasElement;
  private ctx: CanvasRenderingContext2D | null = null;
  lastGeometry: Geometry = { polyline: [], guideYs: [] };

  constructor(
    readonly opts: ChartOptions,
    width = 320,
    height = 90,
  ) {
    this.canvas = document.createElement("canvas");
    this.canvas.width = width;
    this.canvas.height = height;
    this.canvas.className = "chart";
    // jsdom has no 2D context; geometry still updates so headless tests can
    // assert what would be painted
    const headless =
      typeof navigator !== "undefined" && navigator.userAgent.includes("jsdom");
    try {
      this.ctx = headless ? null : this.canvas.getContext("2d");
    } catch {
      this.ctx = null;
    }
  }

  draw(points: Point[]): void {
    const { width, height } = this.canvas;
    this.lastGeometry = computeGeometry(points, width, height, this.opts);
    const ctx = this.ctx;
    if (!ctx) return;
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#10181f";
    ctx.fillRect(0, 0, width, height);
    ctx.strokeStyle = "#3a4a5a";
    ctx.setLineDash([4, 4]);
    for (const y of this.lastGeometry.guideYs) {
      ctx.beginPath();
      ctx.moveTo(0, y);
      ctx.lineTo(width, y);
      ctx.stroke();
    }
    ctx.setLineDash([]);
    const line = this.lastGeometry.polyline;
    if (line.length < 2) return;
    ctx.strokeStyle = this.opts.color ?? "#4ec9b0";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(line[0][0], line[0][1]);
    for (const [x, y] of line.slice(1)) ctx.lineTo(x, y);
    ctx.stroke();
  }
}
