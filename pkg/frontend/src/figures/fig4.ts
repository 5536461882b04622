import { join } from "path";
import { column, loadCsv, loadOptionalCsv } from "../csv";
import {
  DEFAULT_FRAME,
  axes,
  curvePath,
  document,
  el,
  errorBarSeries,
  horizontalLine,
  makeScale,
} from "../svg";
import { FigureSpec, RenderResult } from "./types";

export const spec: FigureSpec = {
  tag: "fig4",
  inputs: [
    {
      file: "fig4.csv",
      columns: [
        "lambda_over_gamma",
        "ft_full",
        "ft_full_se",
        "ft_sigma",
        "ft_sigma_se",
      ],
    },
    { file: "fig4_inset.csv", columns: ["t", "a", "D"], optional: true },
  ],
  xScale: "log",
  yScale: "linear",
  referenceLines: ["solid horizontal line at the fluctuation-theorem value 1"],
};

export function render(inDir: string): RenderResult {
  const warnings: string[] = [];
  const rows = loadCsv(join(inDir, "fig4.csv"), spec.inputs[0].columns);

  const frame = DEFAULT_FRAME;
  const lam = column(rows, "lambda_over_gamma");
  const x = makeScale(
    "log",
    [Math.min(...lam), Math.max(...lam)],
    [frame.margin.left, frame.width - frame.margin.right]
  );
  const values = rows.flatMap((r) => [Number(r.ft_full), Number(r.ft_sigma)]);
  const y = makeScale(
    "linear",
    [Math.min(0, ...values), Math.max(2, ...values)],
    [frame.height - frame.margin.bottom, frame.margin.top]
  );

  const body: string[] = [
    horizontalLine(1, x, y, {
      class: "reference",
      stroke: "black",
      "stroke-width": 1,
    }),
    errorBarSeries(
      lam,
      column(rows, "ft_full"),
      column(rows, "ft_full_se"),
      x,
      y,
      "#c53030",
      "series-full"
    ),
    errorBarSeries(
      lam,
      column(rows, "ft_sigma"),
      column(rows, "ft_sigma_se"),
      x,
      y,
      "#2b6cb0",
      "series-sigma"
    ),
    axes(
      x,
      y,
      frame,
      "measurement rate over feedback rate",
      "integral fluctuation-theorem estimator"
    ),
  ];

  const inset = loadOptionalCsv(
    join(inDir, "fig4_inset.csv"),
    spec.inputs[1].columns
  );
  if (inset === null) {
    warnings.push("fig4_inset.csv missing; rendering without the inset");
  } else {
    const t = column(inset, "t");
    const xi = makeScale("linear", [Math.min(...t), Math.max(...t)], [0, 170]);
    const yi = makeScale("linear", [-1.6, 1.6], [80, 0]);
    body.push(
      el(
        "g",
        {
          class: "inset",
          transform: `translate(${frame.margin.left + 24}, ${frame.height - frame.margin.bottom - 110})`,
        },
        [
          curvePath(t, column(inset, "a"), xi, yi, {
            class: "inset-curve",
            stroke: "#c53030",
            "stroke-width": 1.2,
          }),
          curvePath(t, column(inset, "D"), xi, yi, {
            class: "inset-curve",
            stroke: "#2b6cb0",
            "stroke-width": 1.2,
          }),
        ]
      )
    );
  }

  return { svg: document(frame, body), warnings };
}
