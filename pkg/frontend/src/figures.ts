/**
 * The five figure kinds over the runner's CSV/JSON outputs.
 *
 * escape   - future minima M_n against the threshold exp(ln n g(ln ln n))
 * lil      - running max of M_n / sqrt(n ln ln ln n)
 * coupling - | |walk| - |diffusion| | along coupled runs, log-power reference
 * kmt      - median max |S_k - W_k| against ln n with the affine fit
 * tails    - m^2-weighted per-level decoupling frequencies
 */

import { readdirSync } from "fs";
import path from "path";

import { column, readCsv } from "./csv.js";
import { FigureSpec, SchemaError, loadManifest, loadSummary } from "./schema.js";
import { Series, renderChart } from "./svg.js";

const PALETTE = ["#2456a4", "#c23b22", "#3a7d44", "#8e5fa8", "#b88600", "#4a4a4a"];

function dataFiles(runDir: string, prefix: string): string[] {
  const names = readdirSync(runDir)
    .filter((f) => f.startsWith(prefix) && f.endsWith(".csv"))
    .sort();
  if (names.length === 0) {
    throw new SchemaError(`no ${prefix}*.csv files in ${runDir}`);
  }
  return names.map((f) => path.join(runDir, f));
}

export function renderFigure(spec: FigureSpec): string {
  for (const dir of spec.inputs) {
    loadManifest(dir);
  }
  switch (spec.kind) {
    case "escape":
      return escapeFigure(spec);
    case "lil":
      return lilFigure(spec);
    case "coupling":
      return couplingFigure(spec);
    case "kmt":
      return kmtFigure(spec);
    case "tails":
      return tailsFigure(spec);
  }
}

function escapeFigure(spec: FigureSpec): string {
  const series: Series[] = [];
  let thresholdDone = false;
  spec.inputs.forEach((dir, d) => {
    for (const [i, f] of dataFiles(dir, "curve_").entries()) {
      const t = readCsv(f);
      const n = column(t, "n");
      series.push({
        x: n,
        y: column(t, "M_n"),
        label: i === 0 ? `future minima (run ${d})` : "",
        color: PALETTE[(d + i) % PALETTE.length],
        width: 1.3,
      });
      if (!thresholdDone) {
        series.push({
          x: n,
          y: column(t, "threshold"),
          label: "threshold exp(ln n g(ln ln n))",
          color: "#111111",
          dash: "6,4",
          width: 1.8,
        });
        thresholdDone = true;
      }
    }
  });
  return renderChart({
    title: spec.title ?? "future minima against the threshold family",
    xLabel: "steps n",
    yLabel: "distance to the origin",
    xScale: "log",
    yScale: "log",
    series,
  });
}

function lilFigure(spec: FigureSpec): string {
  const series: Series[] = [];
  spec.inputs.forEach((dir, d) => {
    for (const [i, f] of dataFiles(dir, "curve_").entries()) {
      const t = readCsv(f);
      const n = column(t, "n");
      const M = column(t, "M_n");
      const x: number[] = [];
      const y: number[] = [];
      let run = 0;
      for (let k = 0; k < n.length; k++) {
        if (n[k] < 16) continue;
        const denom = Math.sqrt(n[k] * Math.log(Math.log(Math.log(n[k]))));
        if (!Number.isFinite(denom) || denom <= 0) continue;
        run = Math.max(run, M[k] / denom);
        x.push(n[k]);
        y.push(run);
      }
      series.push({
        x,
        y,
        label: i === 0 ? `running max (run ${d})` : "",
        color: PALETTE[(d + i) % PALETTE.length],
        width: 1.3,
      });
    }
  });
  return renderChart({
    title: spec.title ?? "running max of M_n / sqrt(n ln ln ln n)",
    xLabel: "steps n",
    yLabel: "normalized future minimum",
    xScale: "log",
    yScale: "linear",
    series,
  });
}

function couplingFigure(spec: FigureSpec): string {
  const alpha = spec.alpha ?? 31;
  const series: Series[] = [];
  let tMax = 10;
  spec.inputs.forEach((dir, d) => {
    for (const [i, f] of dataFiles(dir, "samples_").entries()) {
      const t = readCsv(f);
      const ts = column(t, "t");
      const rw = column(t, "r_walk");
      const rb = column(t, "r_bm");
      const diff = ts.map((_, k) => Math.abs(rw[k] - rb[k]));
      tMax = Math.max(tMax, ...ts);
      series.push({
        x: ts,
        y: diff.map((v) => Math.max(v, 1e-3)),
        label: i === 0 ? `| |walk| - |diffusion| | (run ${d})` : "",
        color: PALETTE[(d + i) % PALETTE.length],
        width: 1.2,
        markers: true,
      });
    }
  });
  const refX: number[] = [];
  const refY: number[] = [];
  for (let k = 0; k <= 64; k++) {
    const t = Math.pow(10, (k / 64) * Math.log10(tMax));
    if (t <= 1.5) continue;
    refX.push(t);
    refY.push(Math.pow(Math.log(t), alpha));
  }
  series.push({
    x: refX,
    y: refY,
    label: `reference (ln t)^${alpha}`,
    color: "#111111",
    dash: "6,4",
    width: 1.8,
  });
  return renderChart({
    title: spec.title ?? "coupled radii discrepancy below the log-power bound",
    xLabel: "time t",
    yLabel: "radial discrepancy",
    xScale: "log",
    yScale: "log",
    series,
  });
}

function kmtFigure(spec: FigureSpec): string {
  const summary = loadSummary(spec.inputs[0]) as {
    exponents?: number[];
    medians?: number[];
    slope?: number;
    intercept?: number;
  };
  if (!summary.exponents || !summary.medians) {
    throw new SchemaError("kmt figure needs a summary with exponents/medians");
  }
  const lnN = summary.exponents.map((j) => Math.log(Math.pow(2, j)));
  const series: Series[] = [
    {
      x: lnN,
      y: summary.medians,
      label: "median max |S_k - W_k|",
      color: PALETTE[0],
      width: 0,
      markers: true,
    },
    {
      x: lnN,
      y: lnN.map((v) => (summary.slope ?? 0) * v + (summary.intercept ?? 0)),
      label: `fit ${fmtNum(summary.slope)} ln n + ${fmtNum(summary.intercept)}`,
      color: "#c23b22",
      width: 1.8,
    },
  ];
  return renderChart({
    title: spec.title ?? "dyadic-coupling discrepancy grows with ln n",
    xLabel: "ln n",
    yLabel: "median max discrepancy",
    xScale: "linear",
    yScale: "linear",
    series,
  });
}

function tailsFigure(spec: FigureSpec): string {
  const summary = loadSummary(spec.inputs[0]) as {
    per_level_p_hat?: Record<string, number>;
  };
  const per = summary.per_level_p_hat;
  if (!per || Object.keys(per).length === 0) {
    throw new SchemaError("tails figure needs per_level_p_hat in the summary");
  }
  const ms = Object.keys(per).map(Number).sort((a, b) => a - b);
  const series: Series[] = [
    {
      x: ms,
      y: ms.map((m) => m * m * per[String(m)]),
      label: "m^2 p_hat(m)",
      color: PALETTE[0],
      width: 1.6,
      markers: true,
    },
  ];
  return renderChart({
    title: spec.title ?? "level-weighted decoupling frequencies",
    xLabel: "level m",
    yLabel: "m^2 p_hat",
    xScale: "linear",
    yScale: "linear",
    series,
  });
}

function fmtNum(v: number | undefined): string {
  return v === undefined ? "?" : v.toPrecision(3);
}
