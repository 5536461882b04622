export interface InputSpec {
  /** CSV file name inside the input directory. */
  file: string;
  /** Columns the renderer reads from that file. */
  columns: readonly string[];
  /** Optional inputs degrade gracefully with a warning when absent. */
  optional?: boolean;
}

export interface FigureSpec {
  tag: string;
  inputs: readonly InputSpec[];
  xScale: "linear" | "log";
  yScale: "linear" | "log";
  /** Human-readable inventory of the reference lines drawn. */
  referenceLines: readonly string[];
}

export interface RenderResult {
  svg: string;
  warnings: string[];
}

export type Renderer = (inDir: string) => RenderResult;
