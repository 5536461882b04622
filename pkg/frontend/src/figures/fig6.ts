import { join } from "path";
import { column, loadCsv } from "../csv";
import {
  DEFAULT_FRAME,
  axes,
  curvePath,
  document,
  makeScale,
  verticalLine,
} from "../svg";
import { FigureSpec, RenderResult } from "./types";

const LINE_STYLES: Record<string, Record<string, string | number>> = {
  mean_sigma: { stroke: "#2b6cb0", "stroke-dasharray": "6 4" },
  mean_sigma_m_cg: { stroke: "#c53030", "stroke-dasharray": "6 4" },
  minus_mean_sigma_m_cg: { stroke: "#c53030", "stroke-dasharray": "2 3" },
};

export const spec: FigureSpec = {
  tag: "fig6",
  inputs: [
    {
      file: "fig6.csv",
      columns: ["bin_center", "sigma_density", "sigma_m_cg_density"],
    },
    { file: "fig6_lines.csv", columns: ["name", "value"] },
  ],
  xScale: "linear",
  yScale: "linear",
  referenceLines: [
    "vertical line at the mean entropy production",
    "vertical line at the mean measurement entropy",
    "vertical line at minus the mean measurement entropy",
  ],
};

/** Turns bin centers and densities into the outline of a step histogram. */
function stepOutline(
  centers: readonly number[],
  density: readonly number[]
): { xs: number[]; ys: number[] } {
  const half = (centers[1] - centers[0]) / 2;
  const xs: number[] = [];
  const ys: number[] = [];
  for (let i = 0; i < centers.length; i++) {
    xs.push(centers[i] - half, centers[i] + half);
    ys.push(density[i], density[i]);
  }
  return { xs, ys };
}

export function render(inDir: string): RenderResult {
  const rows = loadCsv(join(inDir, "fig6.csv"), spec.inputs[0].columns);
  const lines = loadCsv(join(inDir, "fig6_lines.csv"), spec.inputs[1].columns);

  const frame = DEFAULT_FRAME;
  const centers = column(rows, "bin_center");
  const densities = [
    column(rows, "sigma_density"),
    column(rows, "sigma_m_cg_density"),
  ];
  const x = makeScale(
    "linear",
    [Math.min(...centers), Math.max(...centers)],
    [frame.margin.left, frame.width - frame.margin.right]
  );
  const y = makeScale(
    "linear",
    [0, Math.max(...densities[0], ...densities[1])],
    [frame.height - frame.margin.bottom, frame.margin.top]
  );

  const body: string[] = [];
  const colors = ["#2b6cb0", "#c53030"];
  const names = ["sigma", "sigma-m-cg"];
  densities.forEach((density, i) => {
    const { xs, ys } = stepOutline(centers, density);
    body.push(
      curvePath(xs, ys, x, y, {
        class: "hist",
        stroke: colors[i],
        "stroke-width": 1.5,
        "data-series": names[i],
      })
    );
  });
  for (const row of lines) {
    const style = LINE_STYLES[String(row.name)] ?? { stroke: "black" };
    body.push(
      verticalLine(Number(row.value), x, y, {
        class: "vline",
        "stroke-width": 1.2,
        "data-name": String(row.name),
        ...style,
      })
    );
  }
  body.push(axes(x, y, frame, "entropy per trajectory", "probability density"));

  return { svg: document(frame, body), warnings: [] };
}
