/** WebGL2 block renderer.
 *
 * One shader invocation per block (its textures bound alone, well
 * under the 16-unit limit), rendered to an offscreen target, then a
 * composite pass folds the target into the accumulation buffer front
 * to back: C += T * C_k, T *= 1 - alpha_k. The present pass blends
 * the background behind everything.
 */

import { BlockData, atlasSlotGrid } from "./assets.js";
import {
  RenderTarget,
  compileProgram,
  createTarget,
  texture2dRgba8,
  texture3dR8,
  texture3dR32i,
  texture3dRgba8,
} from "./gl.js";
import { Camera } from "./math.js";
import { Manifest, blockKey } from "./manifest.js";
import { BLOCK_FS, COMPOSITE_FS, FULLSCREEN_VS, PRESENT_FS } from "./shaders.js";
import { ShaderWeights } from "./shading.js";

export interface GpuBlock {
  key: string;
  data: BlockData;
  indirection: WebGLTexture;
  atlasA: WebGLTexture;
  atlasB: WebGLTexture;
  cellOcc: WebGLTexture;
  planes: Record<string, { a: WebGLTexture; b: WebGLTexture }>;
  slotGrid: number;
}

export interface FrameStats {
  blocksDrawn: number;
  ms: number;
}

export class BlockViewer {
  readonly gl: WebGL2RenderingContext;
  private blockProg: WebGLProgram;
  private compositeProg: WebGLProgram;
  private presentProg: WebGLProgram;
  private blockTarget: RenderTarget;
  private accumTarget: RenderTarget;
  private vao: WebGLVertexArrayObject;

  constructor(gl: WebGL2RenderingContext, width: number, height: number) {
    this.gl = gl;
    this.blockProg = compileProgram(gl, FULLSCREEN_VS, BLOCK_FS);
    this.compositeProg = compileProgram(gl, FULLSCREEN_VS, COMPOSITE_FS);
    this.presentProg = compileProgram(gl, FULLSCREEN_VS, PRESENT_FS);
    this.blockTarget = createTarget(gl, width, height);
    this.accumTarget = createTarget(gl, width, height);
    this.vao = gl.createVertexArray()!;
  }

  upload(data: BlockData): GpuBlock {
    const gl = this.gl;
    const [rx, ry, rz] = data.res;
    const nb = data.nb;
    const indirection = texture3dR32i(gl, nb[0], nb[1], nb[2],
                                      reorder3dI32(data.indirection, nb));
    const s = Math.max(atlasSlotGrid(data.nSlots), 1);
    const w = s * 8;
    const atlasBytesA = new Uint8Array(w * w * 8 * 4);
    const atlasBytesB = new Uint8Array(w * w * 8 * 4);
    for (let z = 0; z < data.atlasSlices.length; z++) {
      const { a, b } = data.atlasSlices[z];
      atlasBytesA.set(a.rgba, z * w * w * 4);
      atlasBytesB.set(b.rgba, z * w * w * 4);
    }
    const atlasA = texture3dRgba8(gl, w, w, 8, atlasBytesA);
    const atlasB = texture3dRgba8(gl, w, w, 8, atlasBytesB);

    // cell occupancy: 1 byte per cell, x fastest for the upload layout
    const cells = [rx - 1, ry - 1, rz - 1];
    const occBytes = new Uint8Array(cells[0] * cells[1] * cells[2]);
    const occ = data.occ.levels[0];
    let o = 0;
    for (let z = 0; z < cells[2]; z++) {
      for (let y = 0; y < cells[1]; y++) {
        for (let x = 0; x < cells[0]; x++) {
          let any = 0;
          for (let dx = 0; dx < 2 && !any; dx++) {
            for (let dy = 0; dy < 2 && !any; dy++) {
              for (let dz = 0; dz < 2 && !any; dz++) {
                any = occ[((x + dx) * ry + y + dy) * rz + z + dz];
              }
            }
          }
          occBytes[o++] = any ? 255 : 0;
        }
      }
    }
    const cellOcc = texture3dR8(gl, cells[0], cells[1], cells[2], occBytes);

    const planes: GpuBlock["planes"] = {};
    for (const name of ["xy", "xz", "yz"]) {
      const img = data.planeImages[name];
      planes[name] = {
        a: texture2dRgba8(gl, img.a.width, img.a.height, new Uint8Array(img.a.rgba), true),
        b: texture2dRgba8(gl, img.b.width, img.b.height, new Uint8Array(img.b.rgba), true),
      };
    }
    return {
      key: blockKey(data.block), data, indirection, atlasA, atlasB, cellOcc,
      planes, slotGrid: s,
    };
  }

  dispose(b: GpuBlock) {
    const gl = this.gl;
    gl.deleteTexture(b.indirection);
    gl.deleteTexture(b.atlasA);
    gl.deleteTexture(b.atlasB);
    gl.deleteTexture(b.cellOcc);
    for (const p of Object.values(b.planes)) {
      gl.deleteTexture(p.a);
      gl.deleteTexture(p.b);
    }
  }

  /** Draw depth-ordered blocks, composite, and present to the canvas. */
  drawFrame(
    cam: Camera, blocks: GpuBlock[], manifest: Manifest,
    weights: ShaderWeights | null,
  ): FrameStats {
    const gl = this.gl;
    const t0 = performance.now();
    gl.bindVertexArray(this.vao);
    gl.disable(gl.DEPTH_TEST);

    gl.bindFramebuffer(gl.FRAMEBUFFER, this.accumTarget.fbo);
    gl.viewport(0, 0, this.accumTarget.width, this.accumTarget.height);
    gl.disable(gl.BLEND);
    gl.clearColor(0, 0, 0, 0);
    gl.clear(gl.COLOR_BUFFER_BIT);

    let drawn = 0;
    for (const block of blocks) {
      this.drawBlock(cam, block, manifest, weights);
      // fold into the accumulation buffer front to back
      gl.bindFramebuffer(gl.FRAMEBUFFER, this.accumTarget.fbo);
      gl.viewport(0, 0, this.accumTarget.width, this.accumTarget.height);
      gl.enable(gl.BLEND);
      gl.blendFuncSeparate(
        gl.ONE_MINUS_DST_ALPHA, gl.ONE, gl.ONE_MINUS_DST_ALPHA, gl.ONE,
      );
      gl.useProgram(this.compositeProg);
      gl.activeTexture(gl.TEXTURE0);
      gl.bindTexture(gl.TEXTURE_2D, this.blockTarget.tex);
      gl.uniform1i(gl.getUniformLocation(this.compositeProg, "uLayer"), 0);
      gl.drawArrays(gl.TRIANGLES, 0, 3);
      gl.disable(gl.BLEND);
      drawn += 1;
    }

    gl.bindFramebuffer(gl.FRAMEBUFFER, null);
    gl.viewport(0, 0, gl.drawingBufferWidth, gl.drawingBufferHeight);
    gl.useProgram(this.presentProg);
    gl.activeTexture(gl.TEXTURE0);
    gl.bindTexture(gl.TEXTURE_2D, this.accumTarget.tex);
    gl.uniform1i(gl.getUniformLocation(this.presentProg, "uAccum"), 0);
    gl.uniform3fv(
      gl.getUniformLocation(this.presentProg, "uBackground"),
      manifest.background,
    );
    gl.drawArrays(gl.TRIANGLES, 0, 3);
    gl.bindVertexArray(null);
    return { blocksDrawn: drawn, ms: performance.now() - t0 };
  }

  private drawBlock(
    cam: Camera, block: GpuBlock, manifest: Manifest, weights: ShaderWeights | null,
  ) {
    const gl = this.gl;
    gl.bindFramebuffer(gl.FRAMEBUFFER, this.blockTarget.fbo);
    gl.viewport(0, 0, this.blockTarget.width, this.blockTarget.height);
    gl.clearColor(0, 0, 0, 0);
    gl.clear(gl.COLOR_BUFFER_BIT);
    gl.useProgram(this.blockProg);
    const u = (name: string) => gl.getUniformLocation(this.blockProg, name);

    const [lo, hi] = block.data.bounds;
    const [rx, ry, rz] = block.data.res;
    const rot = cam.rotation;
    gl.uniform3fv(u("uEye"), cam.eye);
    gl.uniformMatrix3fv(u("uCamRot"), false, [
      rot[0][0], rot[1][0], rot[2][0],
      rot[0][1], rot[1][1], rot[2][1],
      rot[0][2], rot[1][2], rot[2][2],
    ]);
    gl.uniform2f(u("uFocal"), cam.fx, cam.fy);
    gl.uniform2f(u("uPrincipal"), cam.cx, cam.cy);
    gl.uniform2f(u("uImageSize"), cam.width, cam.height);
    gl.uniform3fv(u("uBoxLo"), lo);
    gl.uniform3fv(u("uBoxHi"), hi);
    gl.uniform3i(u("uRes"), rx, ry, rz);
    gl.uniform1f(u("uDelta"), (hi[0] - lo[0]) / (rx - 1));
    gl.uniform1i(u("uTriRes"), block.data.triplaneRes);
    gl.uniform1i(u("uSlotGrid"), block.slotGrid);
    gl.uniform1f(u("uEpsT"), 1e-4);

    const q = manifest.quantization;
    gl.uniform4f(u("uQLoA"), q[0][0], q[1][0], q[2][0], q[3][0]);
    gl.uniform4f(u("uQHiA"), q[0][1], q[1][1], q[2][1], q[3][1]);
    gl.uniform4f(u("uQLoB"), q[4][0], q[5][0], q[6][0], q[7][0]);
    gl.uniform4f(u("uQHiB"), q[4][1], q[5][1], q[6][1], q[7][1]);

    const w = weights ?? zeroWeights();
    gl.uniform1fv(u("uW0"), flatten2d(w.w0));
    gl.uniform1fv(u("uB0"), w.b0);
    gl.uniform1fv(u("uW1"), flatten2d(w.w1));
    gl.uniform1fv(u("uB1"), w.b1);
    gl.uniform1fv(u("uW2"), flatten2d(w.w2));
    gl.uniform1fv(u("uB2"), w.b2);

    const bind3d = (unit: number, tex: WebGLTexture, name: string) => {
      gl.activeTexture(gl.TEXTURE0 + unit);
      gl.bindTexture(gl.TEXTURE_3D, tex);
      gl.uniform1i(u(name), unit);
    };
    const bind2d = (unit: number, tex: WebGLTexture, name: string) => {
      gl.activeTexture(gl.TEXTURE0 + unit);
      gl.bindTexture(gl.TEXTURE_2D, tex);
      gl.uniform1i(u(name), unit);
    };
    bind3d(0, block.indirection, "uIndirection");
    bind3d(1, block.atlasA, "uAtlasA");
    bind3d(2, block.atlasB, "uAtlasB");
    bind3d(3, block.cellOcc, "uCellOcc");
    bind2d(4, block.planes.xy.a, "uPlaneXYa");
    bind2d(5, block.planes.xy.b, "uPlaneXYb");
    bind2d(6, block.planes.xz.a, "uPlaneXZa");
    bind2d(7, block.planes.xz.b, "uPlaneXZb");
    bind2d(8, block.planes.yz.a, "uPlaneYZa");
    bind2d(9, block.planes.yz.b, "uPlaneYZb");

    gl.drawArrays(gl.TRIANGLES, 0, 3);
  }

  readAccum(): Float32Array {
    const gl = this.gl;
    gl.bindFramebuffer(gl.FRAMEBUFFER, this.accumTarget.fbo);
    const out = new Float32Array(this.accumTarget.width * this.accumTarget.height * 4);
    gl.readPixels(0, 0, this.accumTarget.width, this.accumTarget.height,
                  gl.RGBA, gl.FLOAT, out);
    gl.bindFramebuffer(gl.FRAMEBUFFER, null);
    return out;
  }
}

function flatten2d(m: number[][]): Float32Array {
  const out = new Float32Array(m.length * m[0].length);
  let i = 0;
  for (const row of m) for (const v of row) out[i++] = v;
  return out;
}

function zeroWeights(): ShaderWeights {
  const zeros = (n: number, m: number) =>
    Array.from({ length: n }, () => new Array<number>(m).fill(0));
  return {
    w0: zeros(31, 16), b0: new Array(16).fill(0),
    w1: zeros(16, 16), b1: new Array(16).fill(0),
    w2: zeros(16, 3), b2: [0, 0, 0],
    freq_bands: 4,
  };
}

/** x-fastest layout for 3D texture upload (WebGL expects width fastest). */
function reorder3dI32(src: Int32Array, nb: [number, number, number]): Int32Array {
  const out = new Int32Array(src.length);
  let o = 0;
  for (let z = 0; z < nb[2]; z++) {
    for (let y = 0; y < nb[1]; y++) {
      for (let x = 0; x < nb[0]; x++) {
        out[o++] = src[(x * nb[1] + y) * nb[2] + z];
      }
    }
  }
  return out;
}
