// Screen-space vertex picking. The selectable unit is the vertex index, so
// picking projects every vertex and takes the nearest within a pixel radius
// instead of raycasting triangles.

export interface Viewport {
  width: number;
  height: number;
}

export const PICK_RADIUS_PX = 8;

/**
 * Project vertices through a column-major model-view-projection matrix
 * (three.js layout). Returns one (sx, sy, w) triple per vertex; w <= 0
 * marks points at or behind the camera plane, which are never pickable.
 */
export function projectToScreen(
  vertices: ArrayLike<number>,
  mvpColumnMajor: ArrayLike<number>,
  viewport: Viewport,
): Float32Array {
  const m = mvpColumnMajor;
  const count = Math.floor(vertices.length / 3);
  const out = new Float32Array(count * 3);
  for (let i = 0; i < count; i++) {
    const x = vertices[3 * i];
    const y = vertices[3 * i + 1];
    const z = vertices[3 * i + 2];
    const cx = m[0] * x + m[4] * y + m[8] * z + m[12];
    const cy = m[1] * x + m[5] * y + m[9] * z + m[13];
    const w = m[3] * x + m[7] * y + m[11] * z + m[15];
    if (w > 0) {
      out[3 * i] = ((cx / w + 1) / 2) * viewport.width;
      out[3 * i + 1] = ((1 - cy / w) / 2) * viewport.height;
    }
    out[3 * i + 2] = w;
  }
  return out;
}

/**
 * Nearest projected vertex within `radiusPx` of the click, or null.
 * Ties in screen distance go to the lower vertex index (strict improvement
 * required), so picks are deterministic.
 */
export function pickVertex(
  screenX: number,
  screenY: number,
  projected: Float32Array,
  radiusPx: number = PICK_RADIUS_PX,
): number | null {
  const r2 = radiusPx * radiusPx;
  let best: number | null = null;
  let bestD2 = Infinity;
  const count = Math.floor(projected.length / 3);
  for (let i = 0; i < count; i++) {
    if (projected[3 * i + 2] <= 0) continue; // behind the camera
    const dx = projected[3 * i] - screenX;
    const dy = projected[3 * i + 1] - screenY;
    const d2 = dx * dx + dy * dy;
    if (d2 <= r2 && d2 < bestD2) {
      best = i;
      bestD2 = d2;
    }
  }
  return best;
}
