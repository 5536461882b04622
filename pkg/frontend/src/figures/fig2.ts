import { join } from "path";
import { column, groupBy, loadCsv, loadOptionalCsv } from "../csv";
import {
  DEFAULT_FRAME,
  axes,
  curvePath,
  document,
  el,
  horizontalLine,
  makeScale,
  text,
} from "../svg";
import { FigureSpec, RenderResult } from "./types";

const N_B = 1.0 / (Math.E - 1.0);

/** Curve colors by detector-to-qubit coupling ratio, slowest first. */
const COLORS = ["#e0a815", "#2b6cb0", "#c53030"];

export const spec: FigureSpec = {
  tag: "fig2",
  inputs: [
    {
      file: "fig2.csv",
      columns: [
        "gamma_over_kappa",
        "lambda_over_gamma",
        "power_over_kappa_omega",
        "heat_over_kappa_omega",
      ],
    },
    {
      file: "fig2_inset.csv",
      columns: ["D", "p_minus", "p_plus", "p_total"],
      optional: true,
    },
  ],
  xScale: "log",
  yScale: "linear",
  referenceLines: ["dotted horizontal line at the power ceiling n_B"],
};

export function render(inDir: string): RenderResult {
  const warnings: string[] = [];
  const rows = loadCsv(join(inDir, "fig2.csv"), spec.inputs[0].columns);
  const groups = [...groupBy(rows, "gamma_over_kappa").entries()].sort(
    (a, b) => Number(a[0]) - Number(b[0])
  );

  const frame = DEFAULT_FRAME;
  const lam = column(rows, "lambda_over_gamma");
  const x = makeScale(
    "log",
    [Math.min(...lam), Math.max(...lam)],
    [frame.margin.left, frame.width - frame.margin.right]
  );
  const y = makeScale(
    "linear",
    [-N_B, N_B],
    [frame.height - frame.margin.bottom, frame.margin.top]
  );

  const body: string[] = [];
  groups.forEach(([ratio, g], i) => {
    const xs = column(g, "lambda_over_gamma");
    const color = COLORS[i % COLORS.length];
    body.push(
      curvePath(xs, column(g, "power_over_kappa_omega").map((v) => -v), x, y, {
        class: "curve",
        stroke: color,
        "stroke-width": 2,
        "data-ratio": ratio,
      })
    );
    body.push(
      curvePath(xs, column(g, "heat_over_kappa_omega"), x, y, {
        class: "heat",
        stroke: "black",
        "stroke-width": 1.2,
        "stroke-dasharray": "6 4",
        "data-ratio": ratio,
      })
    );
  });
  body.push(
    horizontalLine(N_B, x, y, {
      class: "reference",
      stroke: "black",
      "stroke-width": 1,
      "stroke-dasharray": "2 3",
    })
  );
  body.push(
    axes(x, y, frame, "measurement rate over feedback rate", "extracted power")
  );

  const inset = loadOptionalCsv(
    join(inDir, "fig2_inset.csv"),
    spec.inputs[1].columns
  );
  if (inset === null) {
    warnings.push("fig2_inset.csv missing; rendering without the inset");
  } else {
    const d = column(inset, "D");
    const xi = makeScale("linear", [Math.min(...d), Math.max(...d)], [0, 150]);
    const tops = column(inset, "p_total");
    const yi = makeScale("linear", [0, Math.max(...tops)], [90, 0]);
    const series: Array<[string, string]> = [
      ["p_minus", "#2b6cb0"],
      ["p_plus", "#c53030"],
      ["p_total", "black"],
    ];
    const parts = series.map(([name, color]) =>
      curvePath(d, column(inset, name), xi, yi, {
        class: "inset-curve",
        stroke: color,
        "stroke-width": 1.2,
      })
    );
    parts.push(text("outcome distribution", { x: 0, y: 104, "font-size": 10 }));
    body.push(
      el(
        "g",
        {
          class: "inset",
          transform: `translate(${frame.margin.left + 24}, ${frame.margin.top + 8})`,
        },
        parts
      )
    );
  }

  return { svg: document(frame, body), warnings };
}
