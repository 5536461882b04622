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
} from "../svg";
import { FigureSpec, RenderResult } from "./types";

const COLORS = ["#2b6cb0", "#c53030"];

export const spec: FigureSpec = {
  tag: "fig3",
  inputs: [
    {
      file: "fig3.csv",
      columns: [
        "kappa_over_gamma",
        "lambda_over_gamma",
        "power_over_g_omega",
        "heat_over_g_omega",
        "e_m_over_g_omega",
      ],
    },
    {
      file: "fig3_inset.csv",
      columns: ["D", "P", "a_x", "a_z"],
      optional: true,
    },
  ],
  xScale: "log",
  yScale: "linear",
  referenceLines: ["solid horizontal zero line"],
};

export function render(inDir: string): RenderResult {
  const warnings: string[] = [];
  const rows = loadCsv(join(inDir, "fig3.csv"), spec.inputs[0].columns);
  const groups = [...groupBy(rows, "kappa_over_gamma").entries()].sort(
    (a, b) => Number(a[0]) - Number(b[0])
  );

  const frame = DEFAULT_FRAME;
  const lam = column(rows, "lambda_over_gamma");
  const x = makeScale(
    "log",
    [Math.min(...lam), Math.max(...lam)],
    [frame.margin.left, frame.width - frame.margin.right]
  );
  const values = rows.flatMap((r) => [
    Number(r.power_over_g_omega),
    Number(r.heat_over_g_omega),
    Number(r.e_m_over_g_omega),
  ]);
  const y = makeScale(
    "linear",
    [Math.min(...values), Math.max(...values)],
    [frame.height - frame.margin.bottom, frame.margin.top]
  );

  const body: string[] = [];
  groups.forEach(([ratio, g], i) => {
    const xs = column(g, "lambda_over_gamma");
    const color = COLORS[i % COLORS.length];
    body.push(
      curvePath(xs, column(g, "power_over_g_omega"), x, y, {
        class: "curve",
        stroke: color,
        "stroke-width": 2,
        "data-ratio": ratio,
      }),
      curvePath(xs, column(g, "heat_over_g_omega"), x, y, {
        class: "heat",
        stroke: color,
        "stroke-width": 1.2,
        "stroke-dasharray": "6 4",
        "data-ratio": ratio,
      }),
      curvePath(xs, column(g, "e_m_over_g_omega"), x, y, {
        class: "meas-energy",
        stroke: color,
        "stroke-width": 1.2,
        "stroke-dasharray": "2 3",
        "data-ratio": ratio,
      })
    );
  });
  body.push(
    horizontalLine(0, x, y, {
      class: "reference",
      stroke: "black",
      "stroke-width": 0.8,
    })
  );
  body.push(
    axes(x, y, frame, "measurement rate over feedback rate", "energy rates")
  );

  const inset = loadOptionalCsv(
    join(inDir, "fig3_inset.csv"),
    spec.inputs[1].columns
  );
  if (inset === null) {
    warnings.push("fig3_inset.csv missing; rendering without the inset");
  } else {
    const d = column(inset, "D");
    const xi = makeScale("linear", [Math.min(...d), Math.max(...d)], [0, 150]);
    const yi = makeScale("linear", [-0.5, 0.5], [90, 0]);
    const series: Array<[string, string]> = [
      ["P", "black"],
      ["a_x", "#2b6cb0"],
      ["a_z", "#c53030"],
    ];
    body.push(
      el(
        "g",
        {
          class: "inset",
          transform: `translate(${frame.width - frame.margin.right - 170}, ${frame.margin.top + 8})`,
        },
        series.map(([name, color]) =>
          curvePath(d, column(inset, name), xi, yi, {
            class: "inset-curve",
            stroke: color,
            "stroke-width": 1.2,
          })
        )
      )
    );
  }

  return { svg: document(frame, body), warnings };
}
