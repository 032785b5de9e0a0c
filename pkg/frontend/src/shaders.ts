/** GLSL for the per-block raymarch pass and the screen-space passes.
 *
 * The block shader mirrors the CPU reference exactly: same lattice
 * (t_entry + (i + 0.5) * delta), cell-occupancy skip, dequantized
 * trilinear voxel + bilinear plane sums, clamped exp / sigmoid
 * activations, front-to-back accumulation, then the deferred MLP once
 * per ray. Output is this block's (shaded color, opacity); the
 * composite pass folds targets together front to back.
 */

export const FULLSCREEN_VS = `#version 300 es
out vec2 vUv;
void main() {
  vec2 p = vec2((gl_VertexID << 1) & 2, gl_VertexID & 2);
  vUv = p;
  gl_Position = vec4(p * 2.0 - 1.0, 0.0, 1.0);
}
`;

export const BLOCK_FS = `#version 300 es
precision highp float;
precision highp int;
precision highp sampler3D;
precision highp isampler3D;

in vec2 vUv;
out vec4 frag;

uniform vec3 uEye;
uniform mat3 uCamRot;       // world-from-camera columns
uniform vec2 uFocal;        // fx, fy
uniform vec2 uPrincipal;    // cx, cy
uniform vec2 uImageSize;

uniform vec3 uBoxLo;
uniform vec3 uBoxHi;
uniform ivec3 uRes;         // vertex grid resolution
uniform float uDelta;       // march step (world units)
uniform int uTriRes;
uniform int uSlotGrid;      // atlas slots per row
uniform float uEpsT;

uniform isampler3D uIndirection;
uniform sampler3D uAtlasA;
uniform sampler3D uAtlasB;
uniform sampler3D uCellOcc;   // (res-1)^3, 1 = occupied
uniform sampler2D uPlaneXYa;
uniform sampler2D uPlaneXYb;
uniform sampler2D uPlaneXZa;
uniform sampler2D uPlaneXZb;
uniform sampler2D uPlaneYZa;
uniform sampler2D uPlaneYZb;

uniform vec4 uQLoA, uQHiA;  // dequant ranges, channels 0-3
uniform vec4 uQLoB, uQHiB;  // channels 4-7

const int H = 16;
const int D_IN = 31;        // 3 diffuse + 4 feature + 24 encoding
uniform float uW0[D_IN * H];
uniform float uB0[H];
uniform float uW1[H * H];
uniform float uB1[H];
uniform float uW2[H * 3];
uniform float uB2[3];

vec2 boxIntersect(vec3 ro, vec3 rd) {
  vec3 inv = 1.0 / rd;
  vec3 a = (uBoxLo - ro) * inv;
  vec3 b = (uBoxHi - ro) * inv;
  vec3 lo = min(a, b);
  vec3 hi = max(a, b);
  return vec2(max(max(lo.x, lo.y), max(lo.z, 1e-6)),
              min(min(hi.x, hi.y), hi.z));
}

vec4 fetchCornerA(ivec3 v) {
  ivec3 mb = v >> 3;
  int slot = texelFetch(uIndirection, mb, 0).r;
  if (slot < 0) return vec4(0.0);
  ivec3 l = v & 7;
  return texelFetch(uAtlasA,
    ivec3((slot % uSlotGrid) * 8 + l.x, (slot / uSlotGrid) * 8 + l.y, l.z), 0);
}

vec4 fetchCornerB(ivec3 v) {
  ivec3 mb = v >> 3;
  int slot = texelFetch(uIndirection, mb, 0).r;
  if (slot < 0) return vec4(0.0);
  ivec3 l = v & 7;
  return texelFetch(uAtlasB,
    ivec3((slot % uSlotGrid) * 8 + l.x, (slot / uSlotGrid) * 8 + l.y, l.z), 0);
}

void samplePre(vec3 g, out vec4 preA, out vec4 preB) {
  ivec3 c = clamp(ivec3(floor(g)), ivec3(0), uRes - 2);
  vec3 f = g - vec3(c);
  vec4 a = vec4(0.0);
  vec4 b = vec4(0.0);
  for (int dx = 0; dx < 2; dx++)
  for (int dy = 0; dy < 2; dy++)
  for (int dz = 0; dz < 2; dz++) {
    float w = (dx == 1 ? f.x : 1.0 - f.x)
            * (dy == 1 ? f.y : 1.0 - f.y)
            * (dz == 1 ? f.z : 1.0 - f.z);
    ivec3 v = c + ivec3(dx, dy, dz);
    a += w * fetchCornerA(v);
    b += w * fetchCornerB(v);
  }
  preA = uQLoA + (uQHiA - uQLoA) * a;
  preB = uQLoB + (uQHiB - uQLoB) * b;

  vec3 gt = g * vec3(float(uTriRes - 1)) / vec3(uRes - 1);
  vec2 tr = vec2(float(uTriRes));
  vec2 xy = (gt.xy + 0.5) / tr;
  vec2 xz = (gt.xz + 0.5) / tr;
  vec2 yz = (gt.yz + 0.5) / tr;
  preA += uQLoA + (uQHiA - uQLoA) * texture(uPlaneXYa, xy);
  preB += uQLoB + (uQHiB - uQLoB) * texture(uPlaneXYb, xy);
  preA += uQLoA + (uQHiA - uQLoA) * texture(uPlaneXZa, xz);
  preB += uQLoB + (uQHiB - uQLoB) * texture(uPlaneXZb, xz);
  preA += uQLoA + (uQHiA - uQLoA) * texture(uPlaneYZa, yz);
  preB += uQLoB + (uQHiB - uQLoB) * texture(uPlaneYZb, yz);
}

vec3 deferredResidual(vec3 cdiff, vec4 feat, vec3 dir) {
  float x[D_IN];
  x[0] = cdiff.r; x[1] = cdiff.g; x[2] = cdiff.b;
  x[3] = feat.x; x[4] = feat.y; x[5] = feat.z; x[6] = feat.w;
  int o = 7;
  float s = 1.0;
  for (int band = 0; band < 4; band++) {
    x[o++] = sin(s * dir.x); x[o++] = sin(s * dir.y); x[o++] = sin(s * dir.z);
    x[o++] = cos(s * dir.x); x[o++] = cos(s * dir.y); x[o++] = cos(s * dir.z);
    s *= 2.0;
  }
  float h0[H];
  for (int j = 0; j < H; j++) {
    float acc = uB0[j];
    for (int i = 0; i < D_IN; i++) acc += x[i] * uW0[i * H + j];
    h0[j] = max(acc, 0.0);
  }
  float h1[H];
  for (int j = 0; j < H; j++) {
    float acc = uB1[j];
    for (int i = 0; i < H; i++) acc += h0[i] * uW1[i * H + j];
    h1[j] = max(acc, 0.0);
  }
  vec3 outc;
  for (int j = 0; j < 3; j++) {
    float acc = uB2[j];
    for (int i = 0; i < H; i++) acc += h1[i] * uW2[i * 3 + j];
    outc[j] = acc;
  }
  return outc;
}

void main() {
  vec2 px = vUv * uImageSize;
  vec3 dCam = vec3((px.x - uPrincipal.x) / uFocal.x,
                   (px.y - uPrincipal.y) / uFocal.y, 1.0);
  vec3 dir = normalize(uCamRot * dCam);
  vec2 tt = boxIntersect(uEye, dir);
  if (tt.y <= tt.x) { frag = vec4(0.0); return; }

  int count = int(floor((tt.y - tt.x) / uDelta + 0.5));
  vec3 span = uBoxHi - uBoxLo;
  vec3 resF = vec3(uRes - 1);

  float trans = 1.0;
  vec3 cdiff = vec3(0.0);
  vec4 feat = vec4(0.0);
  float acc = 0.0;
  for (int i = 0; i < 4096; i++) {
    if (i >= count || trans <= uEpsT) break;
    float t = tt.x + (float(i) + 0.5) * uDelta;
    vec3 p = uEye + t * dir;
    vec3 g = clamp((p - uBoxLo) / span * resF, vec3(0.0), resF);
    ivec3 cell = clamp(ivec3(floor(g)), ivec3(0), uRes - 2);
    if (texelFetch(uCellOcc, cell, 0).r < 0.5) continue;
    vec4 preA; vec4 preB;
    samplePre(g, preA, preB);
    float sigma = min(exp(min(preA.r, 9.2103)), 10000.0);
    float alpha = 1.0 - exp(-sigma * uDelta);
    float w = trans * alpha;
    cdiff += w / (1.0 + exp(-preA.gba));
    feat += w / (1.0 + exp(-preB));
    acc += w;
    trans *= 1.0 - alpha;
  }
  if (acc <= 0.0) { frag = vec4(0.0); return; }
  vec3 shaded = clamp(cdiff + deferredResidual(cdiff, feat, dir), 0.0, 1.0);
  frag = vec4(shaded, acc);
}
`;

export const COMPOSITE_FS = `#version 300 es
precision highp float;
in vec2 vUv;
out vec4 frag;
uniform sampler2D uLayer;
void main() {
  frag = texture(uLayer, vUv);
}
`;

export const PRESENT_FS = `#version 300 es
precision highp float;
in vec2 vUv;
out vec4 frag;
uniform sampler2D uAccum;
uniform vec3 uBackground;
void main() {
  vec4 acc = texture(uAccum, vec2(vUv.x, 1.0 - vUv.y));
  vec3 color = acc.rgb + max(1.0 - acc.a, 0.0) * uBackground;
  frag = vec4(color, 1.0);
}
`;
