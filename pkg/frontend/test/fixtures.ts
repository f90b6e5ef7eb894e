/** Canonical protocol payloads shared across the unit tests. */

import type { StateFrame } from "../src/protocol.js";

export function makeStateFrame(overrides: Partial<StateFrame> = {}): StateFrame {
  const base: StateFrame = {
    type: "state",
    session: 7,
    tick: 42,
    elapsed_ticks: 42,
    status: "running",
    gripper: {
      position: [0.1, -0.2, 0.3],
      orientation: [1, 0, 0, 0],
      open: true,
      attached: null,
    },
    objects: [
      {
        id: "screwdriver",
        shape: "cylinder",
        dims: [0.012, 0.2],
        position: [0.38, -0.12, 0.1],
        orientation: [0.97, 0, 0, 0.24],
        color: [0.8, 0.3, 0.2],
      },
      {
        id: "cup",
        shape: "cylinder",
        dims: [0.075, 0.12],
        position: [-0.28, 0.18, 0.06],
        orientation: [1, 0, 0, 0],
        color: [0.2, 0.4, 0.8],
      },
    ],
    cloud: {
      positions: [[0.1, 0.2, 0.0], [0.3, -0.1, 0.05]],
      colors: [[0.5, 0.5, 0.5], [1, 0, 0]],
    },
    events: [],
    resets: 0,
  };
  return { ...base, ...overrides };
}

/** Deterministic uniform in [0, 1): small LCG so oracles are repeatable. */
export function makeRng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}
