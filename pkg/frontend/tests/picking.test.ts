import { describe, expect, it } from "vitest";
import { pickVertex, projectToScreen } from "../src/picking.js";

const IDENTITY = [1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1];
const VIEWPORT = { width: 200, height: 100 };

describe("projectToScreen", () => {
  it("maps ndc corners to viewport corners", () => {
    const verts = [-1, 1, 0, 1, -1, 0, 0, 0, 0];
    const p = projectToScreen(verts, IDENTITY, VIEWPORT);
    expect([p[0], p[1]]).toEqual([0, 0]); // top-left
    expect([p[3], p[4]]).toEqual([200, 100]); // bottom-right
    expect([p[6], p[7]]).toEqual([100, 50]); // center
  });

  it("marks points behind the camera by non-positive w", () => {
    // perspective-style matrix with w = -z
    const mvp = [1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, -1, 0, 0, 0, 0];
    const p = projectToScreen([0, 0, -2, 0, 0, 2], mvp, VIEWPORT);
    expect(p[2]).toBeGreaterThan(0); // in front
    expect(p[5]).toBeLessThanOrEqual(0); // behind
  });
});

describe("pickVertex", () => {
  const projected = projectToScreen(
    [-1, 1, 0, 1, -1, 0, 0, 0, 0],
    IDENTITY,
    VIEWPORT,
  );

  it("hits the exact vertex under the cursor", () => {
    expect(pickVertex(100, 50, projected)).toBe(2);
    expect(pickVertex(0, 0, projected)).toBe(0);
  });

  it("returns null outside the radius", () => {
    expect(pickVertex(100, 80, projected)).toBeNull();
    expect(pickVertex(100 + 8.01, 50, projected)).toBeNull();
  });

  it("accepts clicks within the 8 px default radius", () => {
    expect(pickVertex(107, 50, projected)).toBe(2);
  });

  it("prefers the nearer vertex in screen space", () => {
    // two vertices 4 px apart; click closer to the second
    const p = new Float32Array([100, 50, 1, 104, 50, 1]);
    expect(pickVertex(103, 50, p)).toBe(1);
    expect(pickVertex(101, 50, p)).toBe(0);
  });

  it("breaks exact ties toward the lower index", () => {
    const p = new Float32Array([98, 50, 1, 102, 50, 1]);
    expect(pickVertex(100, 50, p)).toBe(0);
  });

  it("never picks vertices behind the camera", () => {
    const p = new Float32Array([100, 50, -1]);
    expect(pickVertex(100, 50, p)).toBeNull();
  });
});
