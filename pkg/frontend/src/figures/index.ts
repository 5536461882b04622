import * as fig2 from "./fig2";
import * as fig3 from "./fig3";
import * as fig4 from "./fig4";
import * as fig5 from "./fig5";
import * as fig6 from "./fig6";
import { FigureSpec, Renderer } from "./types";

export { FigureSpec, RenderResult, Renderer } from "./types";

export const FIGURES: ReadonlyMap<
  string,
  { spec: FigureSpec; render: Renderer }
> = new Map([
  ["fig2", { spec: fig2.spec, render: fig2.render }],
  ["fig3", { spec: fig3.spec, render: fig3.render }],
  ["fig4", { spec: fig4.spec, render: fig4.render }],
  ["fig5", { spec: fig5.spec, render: fig5.render }],
  ["fig6", { spec: fig6.spec, render: fig6.render }],
]);
