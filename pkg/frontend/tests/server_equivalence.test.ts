// Integration against the real backend: the UI store is driven by scripted
// events while `canonmap serve` runs in a child process. Covers the two
// release criteria for the UI:
//   11. for 20 scripted (seed, threshold) pairs the previewed member set
//       equals the server's geodesic group exactly, and
//   12. parts authored through the UI drive `canonmap estimate` unchanged,
//       with names and member counts agreeing with the parts file.

import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ApiClient } from "../src/api.js";
import { SelectionStore } from "../src/state.js";

const PORT = 7912;
const BASE = `http://127.0.0.1:${PORT}`;

let work: string;
let server: ChildProcess;

const MAKE_MESH = `
import json, sys
from canonmap.mesh_io import save_ply
from canonmap.meshgen import warped_sphere
mesh = warped_sphere(2, scale=0.12)
save_ply(sys.argv[1], mesh.vertices, mesh.faces)
print(mesh.vertex_count)
`;

const MAKE_SCENARIO = `
import json, sys
cfg = {
  "object_pose": [0,0,-1,0, 0,1,0,0, 1,0,0,0.72, 0,0,0,1],
  "camera": {"fx":600,"fy":600,"cx":320,"cy":240,"width":640,"height":480},
  "pixel_budget": 300,
  "rng_seed": 21,
}
json.dump(cfg, open(sys.argv[1], "w"))
`;

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 120; i++) {
    try {
      const resp = await fetch(`${BASE}/api/mesh`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error("backend did not come up on " + BASE);
}

beforeAll(async () => {
  work = mkdtempSync(join(tmpdir(), "part-selector-"));
  execFileSync("python3", ["-c", MAKE_MESH, join(work, "toy.ply")]);
  server = spawn(
    "canonmap",
    [
      "serve",
      "--mesh", join(work, "toy.ply"),
      "--parts", join(work, "parts.json"),
      "--port", String(PORT),
    ],
    { stdio: "ignore" },
  );
  await waitForServer();
}, 60_000);

afterAll(() => {
  server?.kill();
});

function makeStore(pickMap: (x: number) => number | null): SelectionStore {
  return new SelectionStore(new ApiClient(BASE), {
    pick: (x) => pickMap(x),
    debounceMs: 5,
  });
}

describe("UI against live backend", () => {
  it("criterion 11: scripted previews equal the server geodesic groups",
     async () => {
    const api = new ApiClient(BASE);
    const store = makeStore((x) => Math.round(x));
    await store.init();
    const vertexCount = store.state.vertexCount;
    expect(vertexCount).toBe(162);

    // 20 scripted (seed, threshold) pairs spread over the mesh and range
    const pairs: Array<[number, number]> = [];
    for (let k = 0; k < 20; k++) {
      const seed = (k * 31) % vertexCount;
      const threshold = [0, 0.01, 0.03, 0.06, 0.1][k % 5];
      pairs.push([seed, threshold]);
    }

    for (const [seed, threshold] of pairs) {
      // burst of intermediate events first: only the final pair may land
      store.dispatch({ kind: "click", x: (seed + 7) % vertexCount, y: 0 });
      store.dispatch({ kind: "threshold", meters: threshold / 2 + 0.004 });
      store.dispatch({ kind: "click", x: seed, y: 0 });
      store.dispatch({ kind: "threshold", meters: threshold });
      await store.settle();
      const oracle = await api.geodesicGroup(seed, threshold);
      expect(store.state.selectedVertex).toBe(seed);
      expect(store.state.previewMembers).toEqual(oracle.members);
      expect(store.state.previewMembers).toContain(seed);
    }
  }, 60_000);

  it("criterion 11 addendum: preview matches the CLI dry-run exactly",
     async () => {
    const store = makeStore((x) => Math.round(x));
    await store.init();
    for (const [seed, threshold] of [[5, 0.05], [80, 0.02], [130, 0.08]]) {
      store.dispatch({ kind: "click", x: seed, y: 0 });
      store.dispatch({ kind: "threshold", meters: threshold });
      await store.settle();
      const out = execFileSync(
        "canonmap",
        [
          "parts", "define",
          "--mesh", join(work, "toy.ply"),
          "--parts", join(work, "scratch.json"),
          "--seed", String(seed),
          "--threshold", String(threshold),
          "--name", "probe",
          "--dry-run",
        ],
        { encoding: "utf-8" },
      );
      const dryRun = JSON.parse(out) as { members: number[] };
      expect(store.state.previewMembers).toEqual(dryRun.members);
    }
  }, 60_000);

  it("criterion 12: UI-authored parts drive estimate without modification",
     async () => {
    const store = makeStore((x) => Math.round(x));
    const mesh = await store.init();

    // author four parts through the UI exactly as a user would
    const authored: Array<{ name: string; seed: number; threshold: number }> =
      [];
    const extreme = (axis: number, sign: number): number => {
      let best = 0;
      for (let i = 0; i < mesh.vertex_count; i++) {
        if (
          sign * mesh.vertices[3 * i + axis] >
          sign * mesh.vertices[3 * best + axis]
        ) {
          best = i;
        }
      }
      return best;
    };
    const plan = [
      { name: "right hand", seed: extreme(0, 1), threshold: 0.05 },
      { name: "left hand", seed: extreme(0, -1), threshold: 0.05 },
      { name: "back", seed: extreme(2, 1), threshold: 0.04 },
      { name: "belly", seed: extreme(2, -1), threshold: 0.04 },
    ];
    const uiCounts = new Map<string, number>();
    for (const { name, seed, threshold } of plan) {
      store.dispatch({ kind: "click", x: seed, y: 0 });
      store.dispatch({ kind: "threshold", meters: threshold });
      await store.settle();
      store.dispatch({ kind: "save", name });
      await store.settle();
      expect(store.state.lastError).toBeNull();
      uiCounts.set(name, store.state.previewMembers.length);
      authored.push({ name, seed, threshold });
    }
    expect(store.state.parts.map((p) => p.name).sort()).toEqual(
      plan.map((p) => p.name).sort(),
    );

    // the parts file the server persisted matches what the UI showed
    const onDisk = JSON.parse(
      readFileSync(join(work, "parts.json"), "utf-8"),
    ) as { parts: Array<{ name: string; members: number[] }> };
    expect(onDisk.parts.map((p) => p.name).sort()).toEqual(
      plan.map((p) => p.name).sort(),
    );
    for (const part of onDisk.parts) {
      expect(part.members.length).toBe(uiCounts.get(part.name));
    }

    // and feeds the pose pipeline untouched
    execFileSync("canonmap", [
      "annotate", "--mesh", join(work, "toy.ply"),
    ]);
    execFileSync("python3", ["-c", MAKE_SCENARIO, join(work, "scenario.json")]);
    execFileSync("canonmap", [
      "simulate",
      "--mesh", join(work, "toy.ply"),
      "--annotations", join(work, "toy.ply.annot.json"),
      "--parts", join(work, "parts.json"),
      "--config", join(work, "scenario.json"),
      "--out", join(work, "scene"),
    ]);
    execFileSync("canonmap", [
      "estimate",
      "--obs", join(work, "scene.obs.json"),
      "--mesh", join(work, "toy.ply"),
      "--annotations", join(work, "toy.ply.annot.json"),
      "--parts", join(work, "parts.json"),
      "--truth", join(work, "scene.truth.json"),
      "--theta0", "1e-8",
      "--out", join(work, "pose.json"),
    ]);
    const pose = JSON.parse(readFileSync(join(work, "pose.json"), "utf-8")) as {
      rot_err_rad: number;
      trans_err_m: number;
      parts: Array<{ name: string; mode: string }>;
    };
    expect(pose.parts.map((p) => p.name).sort()).toEqual(
      plan.map((p) => p.name).sort(),
    );
    expect(pose.rot_err_rad).toBeLessThan(1e-6);
    expect(pose.trans_err_m).toBeLessThan(1e-6);
  }, 120_000);
});
