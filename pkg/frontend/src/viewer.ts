// three.js rendering: shaded mesh + per-vertex dots, highlight colors for
// the previewed member set, and a projection hook for screen-space picking.

import * as THREE from "three";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";
import { MeshPayload } from "./api.js";
import { projectToScreen, pickVertex, PICK_RADIUS_PX } from "./picking.js";

const BASE_COLOR = new THREE.Color(0x8899aa);
const MEMBER_COLOR = new THREE.Color(0xff9f1c);
const SEED_COLOR = new THREE.Color(0xe71d36);

export class MeshViewer {
  private readonly renderer: THREE.WebGLRenderer;
  private readonly scene = new THREE.Scene();
  private readonly camera: THREE.PerspectiveCamera;
  private readonly controls: OrbitControls;
  private readonly vertexColors: Float32Array;
  private readonly dotGeometry: THREE.BufferGeometry;
  private readonly positions: Float32Array;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    mesh: MeshPayload,
  ) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    this.scene.background = new THREE.Color(0x14161a);

    this.positions = Float32Array.from(mesh.vertices);
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute(
      "position",
      new THREE.BufferAttribute(this.positions, 3),
    );
    geometry.setIndex(mesh.faces);
    geometry.computeVertexNormals();
    const surface = new THREE.Mesh(
      geometry,
      new THREE.MeshStandardMaterial({
        color: 0x3a4a5a,
        flatShading: false,
        polygonOffset: true,
        polygonOffsetFactor: 1,
      }),
    );
    this.scene.add(surface);

    this.vertexColors = new Float32Array(mesh.vertex_count * 3);
    this.dotGeometry = new THREE.BufferGeometry();
    this.dotGeometry.setAttribute(
      "position",
      new THREE.BufferAttribute(this.positions, 3),
    );
    this.dotGeometry.setAttribute(
      "color",
      new THREE.BufferAttribute(this.vertexColors, 3),
    );
    this.paintHighlight([], null);
    const span = new THREE.Vector3(
      mesh.bbox.max[0] - mesh.bbox.min[0],
      mesh.bbox.max[1] - mesh.bbox.min[1],
      mesh.bbox.max[2] - mesh.bbox.min[2],
    );
    const diameter = span.length();
    this.scene.add(
      new THREE.Points(
        this.dotGeometry,
        new THREE.PointsMaterial({
          size: diameter / 90,
          vertexColors: true,
        }),
      ),
    );

    this.scene.add(new THREE.AmbientLight(0xffffff, 0.55));
    const key = new THREE.DirectionalLight(0xffffff, 1.1);
    key.position.set(1, 2, 3);
    this.scene.add(key);

    const center = new THREE.Vector3(
      (mesh.bbox.min[0] + mesh.bbox.max[0]) / 2,
      (mesh.bbox.min[1] + mesh.bbox.max[1]) / 2,
      (mesh.bbox.min[2] + mesh.bbox.max[2]) / 2,
    );
    this.camera = new THREE.PerspectiveCamera(45, 1, diameter / 100, diameter * 20);
    this.camera.position.copy(center).add(new THREE.Vector3(0, 0, diameter * 1.8));
    this.controls = new OrbitControls(this.camera, canvas);
    this.controls.target.copy(center);
    this.controls.update();

    this.resize();
    window.addEventListener("resize", () => this.resize());
    this.renderer.setAnimationLoop(() => {
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
    });
  }

  resize(): void {
    const rect = this.canvas.parentElement?.getBoundingClientRect();
    const width = rect ? rect.width : window.innerWidth;
    const height = rect ? rect.height : window.innerHeight;
    this.renderer.setSize(width, height, false);
    this.camera.aspect = width / height;
    this.camera.updateProjectionMatrix();
  }

  /** Nearest vertex within the pick radius of a canvas-relative point. */
  pick(screenX: number, screenY: number): number | null {
    const mvp = new THREE.Matrix4()
      .multiplyMatrices(
        this.camera.projectionMatrix,
        this.camera.matrixWorldInverse,
      );
    const rect = this.canvas.getBoundingClientRect();
    const projected = projectToScreen(this.positions, mvp.elements, {
      width: rect.width,
      height: rect.height,
    });
    return pickVertex(screenX, screenY, projected, PICK_RADIUS_PX);
  }

  paintHighlight(members: readonly number[], seed: number | null): void {
    const colors = this.vertexColors;
    for (let i = 0; i < colors.length / 3; i++) {
      BASE_COLOR.toArray(colors, 3 * i);
    }
    for (const m of members) {
      MEMBER_COLOR.toArray(colors, 3 * m);
    }
    if (seed !== null) {
      SEED_COLOR.toArray(colors, 3 * seed);
    }
    const attr = this.dotGeometry.getAttribute("color") as THREE.BufferAttribute;
    attr.needsUpdate = true;
  }
}
