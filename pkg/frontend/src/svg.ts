import { scaleLinear, scaleLog, ScaleContinuousNumeric } from "d3-scale";
import { line } from "d3-shape";

export type Scale = ScaleContinuousNumeric<number, number>;

export interface Frame {
  width: number;
  height: number;
  margin: { top: number; right: number; bottom: number; left: number };
}

export const DEFAULT_FRAME: Frame = {
  width: 640,
  height: 420,
  margin: { top: 24, right: 24, bottom: 48, left: 64 },
};

export function makeScale(
  kind: "linear" | "log",
  domain: [number, number],
  range: [number, number]
): Scale {
  const scale = kind === "log" ? scaleLog() : scaleLinear();
  return scale.domain(domain).range(range).nice();
}

function esc(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Builds one SVG element as a string; children are pre-rendered strings. */
export function el(
  tag: string,
  attrs: Record<string, string | number>,
  children: readonly string[] = []
): string {
  const parts = Object.entries(attrs).map(
    ([k, v]) => `${k}="${esc(String(v))}"`
  );
  const open = `<${tag}${parts.length ? " " + parts.join(" ") : ""}>`;
  return children.length || tag === "text"
    ? `${open}${children.join("")}</${tag}>`
    : `${open.slice(0, -1)}/>`;
}

export function text(
  content: string,
  attrs: Record<string, string | number>
): string {
  return el("text", attrs, [esc(content)]);
}

/** Polyline path through (x, y) pairs mapped by the given scales. */
export function curvePath(
  xs: readonly number[],
  ys: readonly number[],
  x: Scale,
  y: Scale,
  attrs: Record<string, string | number>
): string {
  const gen = line<number>()
    .x((_, i) => x(xs[i]))
    .y((_, i) => y(ys[i]));
  const d = gen(xs.map((_, i) => i)) ?? "";
  return el("path", { d, fill: "none", ...attrs });
}

/** Point markers with symmetric vertical error bars. */
export function errorBarSeries(
  xs: readonly number[],
  ys: readonly number[],
  errs: readonly number[],
  x: Scale,
  y: Scale,
  color: string,
  klass: string
): string {
  const marks: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    const cx = x(xs[i]);
    marks.push(
      el("line", {
        x1: cx,
        x2: cx,
        y1: y(ys[i] - errs[i]),
        y2: y(ys[i] + errs[i]),
        stroke: color,
        "stroke-width": 1,
      })
    );
    marks.push(
      el("circle", { cx, cy: y(ys[i]), r: 3.5, fill: color })
    );
  }
  return el("g", { class: klass }, marks);
}

export function horizontalLine(
  value: number,
  x: Scale,
  y: Scale,
  attrs: Record<string, string | number>
): string {
  const [x0, x1] = x.range();
  return el("line", {
    x1: x0,
    x2: x1,
    y1: y(value),
    y2: y(value),
    ...attrs,
  });
}

export function verticalLine(
  value: number,
  x: Scale,
  y: Scale,
  attrs: Record<string, string | number>
): string {
  const [y0, y1] = y.range();
  return el("line", {
    x1: x(value),
    x2: x(value),
    y1: y0,
    y2: y1,
    ...attrs,
  });
}

/** Bottom and left axes with tick marks and labels. */
export function axes(
  x: Scale,
  y: Scale,
  frame: Frame,
  xLabel: string,
  yLabel: string
): string {
  const { width, height, margin } = frame;
  const parts: string[] = [];
  const y0 = height - margin.bottom;
  parts.push(
    el("line", {
      x1: margin.left,
      x2: width - margin.right,
      y1: y0,
      y2: y0,
      stroke: "black",
    }),
    el("line", {
      x1: margin.left,
      x2: margin.left,
      y1: margin.top,
      y2: y0,
      stroke: "black",
    })
  );
  const fmtX = x.tickFormat(6);
  for (const t of x.ticks(6)) {
    const px = x(t);
    parts.push(
      el("line", { x1: px, x2: px, y1: y0, y2: y0 + 5, stroke: "black" }),
      text(fmtX(t), {
        x: px,
        y: y0 + 18,
        "text-anchor": "middle",
        "font-size": 11,
      })
    );
  }
  const fmtY = y.tickFormat(6);
  for (const t of y.ticks(6)) {
    const py = y(t);
    parts.push(
      el("line", {
        x1: margin.left - 5,
        x2: margin.left,
        y1: py,
        y2: py,
        stroke: "black",
      }),
      text(fmtY(t), {
        x: margin.left - 8,
        y: py + 4,
        "text-anchor": "end",
        "font-size": 11,
      })
    );
  }
  parts.push(
    text(xLabel, {
      x: (margin.left + width - margin.right) / 2,
      y: height - 10,
      "text-anchor": "middle",
      "font-size": 13,
    }),
    text(yLabel, {
      x: 16,
      y: (margin.top + y0) / 2,
      "text-anchor": "middle",
      "font-size": 13,
      transform: `rotate(-90 16 ${(margin.top + y0) / 2})`,
    })
  );
  return el("g", { class: "axes" }, parts);
}

export function document(frame: Frame, body: readonly string[]): string {
  return (
    '<?xml version="1.0" encoding="UTF-8"?>\n' +
    el(
      "svg",
      {
        xmlns: "http://www.w3.org/2000/svg",
        width: frame.width,
        height: frame.height,
        "font-family": "sans-serif",
      },
      body
    ) +
    "\n"
  );
}
