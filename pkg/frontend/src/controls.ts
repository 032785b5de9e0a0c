/** Orbit + fly camera controls.
 *
 * State is a pure value; `applyEvent` folds one input event into it,
 * so a scripted event list replays deterministically (the navigation
 * tests drive it that way). The DOM binding at the bottom just turns
 * browser events into these.
 */

import { Camera, Vec3, add, lookAt, scale, sub } from "./math.js";

export interface NavState {
  mode: "orbit" | "fly";
  target: Vec3;
  radius: number;
  azimuth: number;   // radians around +z, 0 along +x
  elevation: number; // radians above the xy plane
  eye: Vec3;         // authoritative in fly mode
  fovDeg: number;
  width: number;
  height: number;
}

export type NavEvent =
  | { kind: "orbit"; dAzimuth: number; dElevation: number }
  | { kind: "zoom"; factor: number }
  | { kind: "pan"; dx: number; dy: number }
  | { kind: "fly"; forward: number; right: number; up: number }
  | { kind: "look"; dYaw: number; dPitch: number }
  | { kind: "mode"; mode: "orbit" | "fly" };

const MIN_ELEVATION = -1.45;
const MAX_ELEVATION = 1.45;

export function orbitEye(s: NavState): Vec3 {
  const ce = Math.cos(s.elevation);
  return [
    s.target[0] + s.radius * ce * Math.cos(s.azimuth),
    s.target[1] + s.radius * ce * Math.sin(s.azimuth),
    s.target[2] + s.radius * Math.sin(s.elevation),
  ];
}

export function initialState(
  target: Vec3, radius: number, width: number, height: number, fovDeg = 60,
): NavState {
  const s: NavState = {
    mode: "orbit", target, radius, azimuth: 0, elevation: 0.5,
    eye: [0, 0, 0], fovDeg, width, height,
  };
  s.eye = orbitEye(s);
  return s;
}

export function applyEvent(s: NavState, e: NavEvent): NavState {
  const out = { ...s, target: [...s.target] as Vec3, eye: [...s.eye] as Vec3 };
  switch (e.kind) {
    case "mode":
      out.mode = e.mode;
      if (e.mode === "orbit") out.eye = orbitEye(out);
      break;
    case "orbit":
      out.azimuth += e.dAzimuth;
      out.elevation = Math.min(Math.max(out.elevation + e.dElevation, MIN_ELEVATION), MAX_ELEVATION);
      out.eye = orbitEye(out);
      break;
    case "zoom":
      out.radius = Math.max(out.radius * e.factor, 1e-3);
      out.eye = orbitEye(out);
      break;
    case "pan": {
      const cam = toCamera(s);
      const r = cam.rotation;
      const right: Vec3 = [r[0][0], r[1][0], r[2][0]];
      const down: Vec3 = [r[0][1], r[1][1], r[2][1]];
      const step = s.radius * 0.002;
      const delta = add(scale(right, -e.dx * step), scale(down, -e.dy * step));
      out.target = add(out.target, delta);
      out.eye = out.mode === "orbit" ? orbitEye(out) : add(out.eye, delta);
      break;
    }
    case "fly": {
      const cam = toCamera(s);
      const r = cam.rotation;
      const fwd: Vec3 = [r[0][2], r[1][2], r[2][2]];
      const right: Vec3 = [r[0][0], r[1][0], r[2][0]];
      out.eye = add(out.eye, add(
        add(scale(fwd, e.forward), scale(right, e.right)),
        [0, 0, e.up],
      ));
      out.target = add(out.eye, scale(fwd, Math.max(s.radius, 1)));
      break;
    }
    case "look": {
      out.azimuth += e.dYaw;
      out.elevation = Math.min(Math.max(out.elevation + e.dPitch, MIN_ELEVATION), MAX_ELEVATION);
      const ce = Math.cos(out.elevation);
      const fwd: Vec3 = [
        -ce * Math.cos(out.azimuth),
        -ce * Math.sin(out.azimuth),
        -Math.sin(out.elevation),
      ];
      out.target = add(out.eye, scale(fwd, Math.max(s.radius, 1)));
      break;
    }
  }
  return out;
}

export function toCamera(s: NavState): Camera {
  const eye = s.mode === "orbit" ? orbitEye(s) : s.eye;
  let target = s.target;
  if (Math.hypot(...sub(target, eye)) < 1e-9) {
    target = add(eye, [1, 0, 0]);
  }
  return lookAt(eye, target, s.width, s.height, s.fovDeg);
}

export function replay(s: NavState, events: NavEvent[]): NavState {
  return events.reduce(applyEvent, s);
}

/** Wire pointer/keyboard events on a canvas to nav events. */
export function bindControls(
  canvas: HTMLCanvasElement, state: { nav: NavState }, onChange: () => void,
): () => void {
  let dragging = false;
  let panning = false;
  let lastX = 0;
  let lastY = 0;

  const down = (e: PointerEvent) => {
    dragging = e.button === 0;
    panning = e.button === 2 || e.shiftKey;
    lastX = e.clientX;
    lastY = e.clientY;
    canvas.setPointerCapture(e.pointerId);
  };
  const move = (e: PointerEvent) => {
    if (!dragging && !panning) return;
    const dx = e.clientX - lastX;
    const dy = e.clientY - lastY;
    lastX = e.clientX;
    lastY = e.clientY;
    if (panning) {
      state.nav = applyEvent(state.nav, { kind: "pan", dx, dy });
    } else if (state.nav.mode === "orbit") {
      state.nav = applyEvent(state.nav, {
        kind: "orbit", dAzimuth: -dx * 0.008, dElevation: dy * 0.008,
      });
    } else {
      state.nav = applyEvent(state.nav, {
        kind: "look", dYaw: -dx * 0.004, dPitch: dy * 0.004,
      });
    }
    onChange();
  };
  const up = () => {
    dragging = panning = false;
  };
  const wheel = (e: WheelEvent) => {
    e.preventDefault();
    state.nav = applyEvent(state.nav, {
      kind: "zoom", factor: Math.exp(e.deltaY * 0.001),
    });
    onChange();
  };
  const key = (e: KeyboardEvent) => {
    const step = state.nav.radius * 0.05;
    const map: Record<string, NavEvent> = {
      w: { kind: "fly", forward: step, right: 0, up: 0 },
      s: { kind: "fly", forward: -step, right: 0, up: 0 },
      a: { kind: "fly", forward: 0, right: -step, up: 0 },
      d: { kind: "fly", forward: 0, right: step, up: 0 },
      q: { kind: "fly", forward: 0, right: 0, up: -step },
      e: { kind: "fly", forward: 0, right: 0, up: step },
      f: { kind: "mode", mode: state.nav.mode === "fly" ? "orbit" : "fly" },
    };
    const ev = map[e.key.toLowerCase()];
    if (ev) {
      if (ev.kind === "fly" && state.nav.mode !== "fly") {
        state.nav = applyEvent(state.nav, { kind: "mode", mode: "fly" });
      }
      state.nav = applyEvent(state.nav, ev);
      onChange();
    }
  };
  canvas.addEventListener("pointerdown", down);
  canvas.addEventListener("pointermove", move);
  canvas.addEventListener("pointerup", up);
  canvas.addEventListener("wheel", wheel, { passive: false });
  canvas.addEventListener("contextmenu", (e) => e.preventDefault());
  window.addEventListener("keydown", key);
  return () => {
    canvas.removeEventListener("pointerdown", down);
    canvas.removeEventListener("pointermove", move);
    canvas.removeEventListener("pointerup", up);
    canvas.removeEventListener("wheel", wheel);
    window.removeEventListener("keydown", key);
  };
}
