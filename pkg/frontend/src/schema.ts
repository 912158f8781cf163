/**
 * Input schema for figure rendering.
 *
 * Every figure spec points at one or more run directories produced by the
 * condwalk CLI.  A run directory holds `manifest.json` (with the schema
 * version), `summary.json`, and the per-replica CSV data files.
 */

import { readFileSync, existsSync } from "fs";
import path from "path";

export const SUPPORTED_SCHEMA_VERSION = 1;

export type FigureKind = "escape" | "lil" | "coupling" | "kmt" | "tails";

export interface FigureSpec {
  kind: FigureKind;
  /** run directories from the simulation CLI */
  inputs: string[];
  /** output SVG path */
  out: string;
  title?: string;
  /** reference exponent for the coupling figure (log-power bound) */
  alpha?: number;
}

export interface RunManifest {
  schema_version: number;
  subcommand: string;
  seed: number;
  replicas: number;
  params: Record<string, unknown>;
}

export class SchemaError extends Error {}

export function loadSpec(specPath: string): FigureSpec {
  const raw = JSON.parse(readFileSync(specPath, "utf-8"));
  const kinds: FigureKind[] = ["escape", "lil", "coupling", "kmt", "tails"];
  if (!kinds.includes(raw.kind)) {
    throw new SchemaError(`unknown figure kind ${JSON.stringify(raw.kind)}`);
  }
  if (!Array.isArray(raw.inputs) || raw.inputs.length === 0) {
    throw new SchemaError("spec.inputs must be a non-empty array of run directories");
  }
  if (typeof raw.out !== "string" || raw.out.length === 0) {
    throw new SchemaError("spec.out must name the output SVG file");
  }
  return raw as FigureSpec;
}

/** Read and validate a run directory's manifest. */
export function loadManifest(runDir: string): RunManifest {
  const p = path.join(runDir, "manifest.json");
  if (!existsSync(p)) {
    throw new SchemaError(`input ${runDir} has no manifest.json`);
  }
  const man = JSON.parse(readFileSync(p, "utf-8")) as RunManifest;
  if (man.schema_version !== SUPPORTED_SCHEMA_VERSION) {
    throw new SchemaError(
      `schema version ${man.schema_version} in ${runDir}; ` +
        `this renderer supports ${SUPPORTED_SCHEMA_VERSION}`
    );
  }
  return man;
}

export function loadSummary(runDir: string): Record<string, unknown> {
  const p = path.join(runDir, "summary.json");
  if (!existsSync(p)) {
    throw new SchemaError(`input ${runDir} has no summary.json`);
  }
  return JSON.parse(readFileSync(p, "utf-8"));
}
