/** Small vector/camera math shared by the policy, loader and renderer.
 *
 * The camera convention mirrors the asset pipeline: x right, y down,
 * z forward, world up is +z, rotation columns are the camera axes.
 */

export type Vec3 = [number, number, number];
export type Mat3 = [Vec3, Vec3, Vec3]; // row-major rows

export function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function add(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function scale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

export function norm(a: Vec3): number {
  return Math.hypot(a[0], a[1], a[2]);
}

export function normalize(a: Vec3): Vec3 {
  const n = norm(a);
  if (n === 0) throw new Error("cannot normalize a zero vector");
  return [a[0] / n, a[1] / n, a[2] / n];
}

export interface Camera {
  rotation: Mat3; // world-from-camera, rows
  eye: Vec3;
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
}

export function lookAt(
  eye: Vec3, target: Vec3, width: number, height: number,
  fovDeg = 60, up: Vec3 = [0, 0, 1],
): Camera {
  let forward = sub(target, eye);
  forward = normalize(forward);
  let right = cross(forward, up);
  if (norm(right) < 1e-9) {
    right = cross(forward, [0, 1, 0]);
    if (norm(right) < 1e-9) right = cross(forward, [1, 0, 0]);
  }
  right = normalize(right);
  const down = cross(forward, right);
  // rows of the world-from-camera matrix hold the axes as columns
  const rotation: Mat3 = [
    [right[0], down[0], forward[0]],
    [right[1], down[1], forward[1]],
    [right[2], down[2], forward[2]],
  ];
  const f = (0.5 * width) / Math.tan(((fovDeg / 180) * Math.PI) / 2);
  return { rotation, eye, fx: f, fy: f, cx: width / 2, cy: height / 2, width, height };
}

export interface CameraJson {
  rotation?: number[][];
  eye: number[];
  target?: number[];
  fov_deg?: number;
  fx?: number;
  fy?: number;
  cx?: number;
  cy?: number;
  width: number;
  height: number;
  up?: number[];
}

export function cameraFromJson(d: CameraJson): Camera {
  if (d.rotation) {
    return {
      rotation: d.rotation as Mat3,
      eye: d.eye as Vec3,
      fx: d.fx!,
      fy: d.fy!,
      cx: d.cx!,
      cy: d.cy!,
      width: d.width,
      height: d.height,
    };
  }
  return lookAt(
    d.eye as Vec3, d.target as Vec3, d.width, d.height,
    d.fov_deg ?? 60, (d.up as Vec3) ?? [0, 0, 1],
  );
}

/** Project a world point to (u px, v px, camera z); z <= 0 means behind. */
export function project(cam: Camera, p: Vec3): [number, number, number] {
  const r = cam.rotation;
  const d = sub(p, cam.eye);
  // camera = R^T (p - eye) since rows hold axis components
  const x = d[0] * r[0][0] + d[1] * r[1][0] + d[2] * r[2][0];
  const y = d[0] * r[0][1] + d[1] * r[1][1] + d[2] * r[2][1];
  const z = d[0] * r[0][2] + d[1] * r[1][2] + d[2] * r[2][2];
  return [(cam.fx * x) / z + cam.cx, (cam.fy * y) / z + cam.cy, z];
}

/** Unit world-space ray direction through pixel (px, py), pixel centers. */
export function rayDirection(cam: Camera, px: number, py: number): Vec3 {
  const u = (px + 0.5 - cam.cx) / cam.fx;
  const v = (py + 0.5 - cam.cy) / cam.fy;
  const r = cam.rotation;
  const d: Vec3 = [
    r[0][0] * u + r[0][1] * v + r[0][2],
    r[1][0] * u + r[1][1] * v + r[1][2],
    r[2][0] * u + r[2][1] * v + r[2][2],
  ];
  return normalize(d);
}

/** Entry/exit of a ray against an AABB; miss leaves t0 >= t1. */
export function rayAabb(
  origin: Vec3, dir: Vec3, lo: Vec3, hi: Vec3, tNear: number, tFar: number,
): [number, number] {
  let t0 = tNear;
  let t1 = tFar;
  for (let a = 0; a < 3; a++) {
    if (dir[a] === 0) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return [1, 0];
      continue;
    }
    const inv = 1 / dir[a];
    let ta = (lo[a] - origin[a]) * inv;
    let tb = (hi[a] - origin[a]) * inv;
    if (ta > tb) [ta, tb] = [tb, ta];
    if (ta > t0) t0 = ta;
    if (tb < t1) t1 = tb;
  }
  return [t0, t1];
}
