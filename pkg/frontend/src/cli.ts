#!/usr/bin/env node
/**
 * plots render --spec spec.json
 *
 * Renders one figure from simulation outputs to SVG.  Rendering is a pure
 * function of the inputs: the same spec and data give a byte-identical file.
 */

import { writeFileSync, mkdirSync } from "fs";
import path from "path";

import { renderFigure } from "./figures.js";
import { loadSpec } from "./schema.js";

function main(argv: string[]): number {
  const [cmd, ...rest] = argv;
  if (cmd !== "render") {
    console.error("usage: plots render --spec <spec.json>");
    return 2;
  }
  const i = rest.indexOf("--spec");
  if (i < 0 || i + 1 >= rest.length) {
    console.error("usage: plots render --spec <spec.json>");
    return 2;
  }
  const spec = loadSpec(rest[i + 1]);
  const svg = renderFigure(spec);
  mkdirSync(path.dirname(path.resolve(spec.out)), { recursive: true });
  writeFileSync(spec.out, svg);
  const lines = svg.split("\n").length;
  console.log(`wrote ${spec.out} (${spec.kind}, ${lines} svg lines)`);
  return 0;
}

process.exit(main(process.argv.slice(2)));
