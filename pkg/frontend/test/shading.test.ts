import { describe, expect, it } from "vitest";

import { evalShader, positionalEncoding } from "../src/shading.js";
import { fixtureJson } from "./helpers.js";

describe("deferred shading parity", () => {
  const fx = fixtureJson<{ weights: any; cases: any[] }>("shading.json");

  it("matches the pipeline's forward pass on every fixture case", () => {
    for (const c of fx.cases) {
      const got = evalShader(fx.weights, c.cdiff, c.feature, c.dir);
      for (let i = 0; i < 3; i++) {
        expect(Math.abs(got[i] - c.residual[i])).toBeLessThan(1e-9);
      }
    }
  });

  it("zero weights produce a zero residual", () => {
    const zeros = (n: number, m: number) =>
      Array.from({ length: n }, () => new Array(m).fill(0));
    const w = {
      w0: zeros(31, 16), b0: new Array(16).fill(0),
      w1: zeros(16, 16), b1: new Array(16).fill(0),
      w2: zeros(16, 3), b2: [0, 0, 0], freq_bands: 4,
    };
    expect(evalShader(w, [0.5, 0.5, 0.5], [0, 0, 0, 0], [0, 0, 1])).toEqual([0, 0, 0]);
  });

  it("positional encoding layout: sin triple then cos triple per octave", () => {
    const pe = positionalEncoding([0.5, 0.2, 0.8], 4);
    expect(pe.length).toBe(24);
    expect(pe[0]).toBeCloseTo(Math.sin(0.5), 12);
    expect(pe[3]).toBeCloseTo(Math.cos(0.5), 12);
    expect(pe[6]).toBeCloseTo(Math.sin(1.0), 12);
  });
});
