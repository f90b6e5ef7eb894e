/**
 * Browser wiring: one animation loop that pumps input, pulls the latest
 * validated frame, paints the scene, and refreshes the HUD. Everything with
 * logic worth testing lives in the imported modules; this file only binds
 * them to the DOM.
 */

import { Camera } from "./camera.js";
import { HudModel } from "./hud.js";
import { GamepadSample, InputLoop } from "./input.js";
import { SessionSocket } from "./net.js";
import { Ctx2D, renderFrame } from "./renderer.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

const canvas = byId<HTMLCanvasElement>("view");
const ctx = canvas.getContext("2d") as unknown as Ctx2D;
const hudConnection = byId<HTMLElement>("hud-connection");
const hudStatus = byId<HTMLElement>("hud-status");
const hudBanner = byId<HTMLElement>("hud-banner");
const hudLog = byId<HTMLElement>("hud-log");
const startBtn = byId<HTMLButtonElement>("btn-start");
const resetBtn = byId<HTMLButtonElement>("btn-reset");

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://` +
  `${location.host}/ws`;
const socket = new SessionSocket(wsUrl);
const camera = new Camera();
const hud = new HudModel();
const input = new InputLoop({
  send: (msg) => socket.send(msg),
  reset: () => {
    socket.send({ type: "reset" });
    hud.clearError();
  },
});

function sampleGamepad(): GamepadSample | null {
  const pads = navigator.getGamepads ? navigator.getGamepads() : [];
  for (const p of pads) {
    if (p && p.connected) {
      return {
        axes: p.axes.slice(),
        buttons: p.buttons.map((b) => b.value),
      };
    }
  }
  return null;
}
input.setGamepadSampler(sampleGamepad);

function resize(): void {
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  camera.setViewport(canvas.width, canvas.height);
}
window.addEventListener("resize", resize);

startBtn.addEventListener("click", () => {
  socket.send({ type: "start" });
  hud.clearError();
  canvas.focus();
});
resetBtn.addEventListener("click", () => {
  socket.send({ type: "reset" });
  hud.clearError();
});

window.addEventListener("keydown", (ev) => {
  if (ev.code === "KeyP") {
    camera.toggleMode();
    return;
  }
  if (ev.code === "Enter") {
    socket.send({ type: "start" });
    hud.clearError();
    return;
  }
  if (input.keyDown(ev.code)) ev.preventDefault();
});
window.addEventListener("keyup", (ev) => input.keyUp(ev.code));

let dragging = false;
let lastX = 0;
let lastY = 0;
canvas.addEventListener("mousedown", (ev) => {
  dragging = true;
  lastX = ev.clientX;
  lastY = ev.clientY;
});
window.addEventListener("mouseup", () => {
  dragging = false;
});
window.addEventListener("mousemove", (ev) => {
  if (!dragging) return;
  camera.orbit((ev.clientX - lastX) * -0.008, (ev.clientY - lastY) * 0.008);
  lastX = ev.clientX;
  lastY = ev.clientY;
});
canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  camera.zoom(ev.deltaY > 0 ? 1.1 : 1 / 1.1);
});

let lastFpsAt = performance.now();
let framesSince = 0;
let fpsText = "";
let lastEventKey = "";

function frame(now: number): void {
  input.tick(now);
  const latest = socket.latestFrame();
  const notices = socket.takeNotices();
  hud.pushNotices(notices);
  if (latest) {
    // A frame's events go to the log once, not every paint of that frame.
    const key = `${latest.session}:${latest.tick}`;
    if (key !== lastEventKey) {
      hud.pushFrameEvents(latest);
      lastEventKey = key;
    }
  }

  renderFrame(ctx, camera, latest);
  const view = hud.view(
    latest,
    socket.connectionState(),
    socket.isStale(),
    socket.currentBackoffMs(),
  );
  input.setLocked(view.lockInput);

  framesSince += 1;
  if (now - lastFpsAt >= 1000) {
    fpsText = ` · ${(framesSince * 1000 / (now - lastFpsAt)).toFixed(0)} fps`;
    framesSince = 0;
    lastFpsAt = now;
  }
  hudConnection.textContent = view.connection + fpsText;
  hudStatus.textContent = view.status;
  if (view.banner) {
    hudBanner.textContent = view.banner;
    hudBanner.dataset.kind = view.bannerKind ?? "";
    hudBanner.style.display = "block";
  } else {
    hudBanner.style.display = "none";
  }
  hudLog.textContent = view.log.join("\n");

  requestAnimationFrame(frame);
}

resize();
socket.connect();
requestAnimationFrame(frame);
