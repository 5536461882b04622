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
  tag: "fig5",
  inputs: [
    {
      file: "fig5.csv",
      columns: [
        "lambda_over_gamma",
        "mean_sigma_rate",
        "se_sigma_rate",
        "mean_sigma_m_rate",
        "se_sigma_m_rate",
        "spectral_power_over_T",
      ],
    },
    {
      file: "fig5_inset.csv",
      columns: [
        "lambda_over_gamma",
        "mc_sigma_m_rate",
        "se_sigma_m_rate",
        "closed_form_rate",
      ],
      optional: true,
    },
  ],
  xScale: "log",
  yScale: "linear",
  referenceLines: ["solid horizontal zero line"],
};

export function render(inDir: string): RenderResult {
  const warnings: string[] = [];
  const rows = loadCsv(join(inDir, "fig5.csv"), spec.inputs[0].columns);

  const frame = DEFAULT_FRAME;
  const lam = column(rows, "lambda_over_gamma");
  const x = makeScale(
    "log",
    [Math.min(...lam), Math.max(...lam)],
    [frame.margin.left, frame.width - frame.margin.right]
  );
  const values = rows.flatMap((r) => [
    Number(r.mean_sigma_rate),
    Number(r.mean_sigma_m_rate),
    Number(r.spectral_power_over_T),
  ]);
  const y = makeScale(
    "linear",
    [Math.min(...values), Math.max(...values)],
    [frame.height - frame.margin.bottom, frame.margin.top]
  );

  const body: string[] = [
    horizontalLine(0, x, y, {
      class: "reference",
      stroke: "black",
      "stroke-width": 0.8,
    }),
    curvePath(lam, column(rows, "spectral_power_over_T"), x, y, {
      class: "curve",
      stroke: "black",
      "stroke-width": 1.5,
    }),
    errorBarSeries(
      lam,
      column(rows, "mean_sigma_rate"),
      column(rows, "se_sigma_rate"),
      x,
      y,
      "#2b6cb0",
      "series-sigma-rate"
    ),
    errorBarSeries(
      lam,
      column(rows, "mean_sigma_m_rate"),
      column(rows, "se_sigma_m_rate"),
      x,
      y,
      "#c53030",
      "series-sigma-m-rate"
    ),
    axes(
      x,
      y,
      frame,
      "measurement rate over feedback rate",
      "entropy production rates"
    ),
  ];

  const inset = loadOptionalCsv(
    join(inDir, "fig5_inset.csv"),
    spec.inputs[1].columns
  );
  if (inset === null) {
    warnings.push("fig5_inset.csv missing; rendering without the inset");
  } else {
    const li = column(inset, "lambda_over_gamma");
    const xi = makeScale("log", [Math.min(...li), Math.max(...li)], [0, 160]);
    const rates = column(inset, "closed_form_rate");
    const yi = makeScale("linear", [0, Math.max(...rates) * 1.2], [90, 0]);
    body.push(
      el(
        "g",
        {
          class: "inset",
          transform: `translate(${frame.margin.left + 24}, ${frame.margin.top + 8})`,
        },
        [
          curvePath(li, rates, xi, yi, {
            class: "inset-curve",
            stroke: "black",
            "stroke-width": 1.2,
          }),
          errorBarSeries(
            li,
            column(inset, "mc_sigma_m_rate"),
            column(inset, "se_sigma_m_rate"),
            xi,
            yi,
            "#c53030",
            "inset-points"
          ),
        ]
      )
    );
  }

  return { svg: document(frame, body), warnings };
}
