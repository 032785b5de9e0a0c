import { readFileSync, readdirSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { join } from "node:path";

import { BlockData, assembleBlock } from "../src/assets.js";
import { BlockId, Manifest, blockBounds, blockDir, parseManifest } from "../src/manifest.js";

export const FIXTURES = fileURLToPath(new URL("./fixtures", import.meta.url));

export function fixtureJson<T = any>(name: string): T {
  return JSON.parse(readFileSync(join(FIXTURES, name), "utf-8")) as T;
}

export function fixtureManifest(scene = "scene"): Manifest {
  return parseManifest(
    JSON.parse(readFileSync(join(FIXTURES, scene, "manifest.json"), "utf-8")),
  );
}

export async function loadFixtureBlock(
  m: Manifest, b: BlockId, scene = "scene",
): Promise<BlockData> {
  const dir = join(FIXTURES, scene, blockDir(b));
  const files = new Map<string, Uint8Array>();
  for (const name of readdirSync(dir)) {
    files.set(name, new Uint8Array(readFileSync(join(dir, name))));
  }
  return assembleBlock(m, b, files, blockBounds(m.layout, b));
}
