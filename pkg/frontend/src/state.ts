// UI state machine. Every interaction is an event; events are recorded so a
// session can be replayed headlessly, which is how the scripted tests drive
// the store. Geodesic groups are never computed here: the preview is always
// whatever the server answered for the latest (seed, threshold), and
// responses to superseded requests are dropped.

import { ApiClient, ApiError, MeshPayload, PartPayload } from "./api.js";

export type UiEvent =
  | { kind: "click"; x: number; y: number }
  | { kind: "threshold"; meters: number }
  | { kind: "save"; name: string }
  | { kind: "remove"; name: string };

export interface ViewerState {
  meshLoaded: boolean;
  vertexCount: number;
  maxThresholdM: number; // slider range: [0, mesh bbox diameter]
  selectedVertex: number | null;
  thresholdM: number;
  previewMembers: number[];
  previewCentroid: number[] | null;
  previewPending: boolean;
  parts: PartPayload[];
  lastError: string | null;
}

export interface StoreOptions {
  /** Screen coords -> vertex index; the viewer plugs projection in here. */
  pick: (x: number, y: number) => number | null;
  debounceMs?: number;
  onChange?: (state: ViewerState) => void;
}

const DEFAULT_DEBOUNCE_MS = 150;

export class SelectionStore {
  readonly state: ViewerState = {
    meshLoaded: false,
    vertexCount: 0,
    maxThresholdM: 0,
    selectedVertex: null,
    thresholdM: 0,
    previewMembers: [],
    previewCentroid: null,
    previewPending: false,
    parts: [],
    lastError: null,
  };

  /** Recorded interaction log; replay() reproduces the same final state. */
  readonly log: UiEvent[] = [];

  private readonly debounceMs: number;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private requestSeq = 0;
  private inflight: Promise<void> | null = null;
  private mutation: Promise<void> | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly opts: StoreOptions,
  ) {
    this.debounceMs = opts.debounceMs ?? DEFAULT_DEBOUNCE_MS;
  }

  async init(): Promise<MeshPayload> {
    const mesh = await this.api.getMesh();
    const span = mesh.bbox.max.map((hi, k) => hi - mesh.bbox.min[k]);
    this.state.meshLoaded = true;
    this.state.vertexCount = mesh.vertex_count;
    this.state.maxThresholdM = Math.hypot(...span);
    this.state.parts = (await this.api.listParts()).parts;
    this.notify();
    return mesh;
  }

  dispatch(event: UiEvent): void {
    this.log.push(event);
    switch (event.kind) {
      case "click": {
        const hit = this.opts.pick(event.x, event.y);
        if (hit !== null && hit !== this.state.selectedVertex) {
          this.state.selectedVertex = hit;
          this.schedulePreview();
        }
        break; // a miss never clears the selection
      }
      case "threshold": {
        this.state.thresholdM = Math.max(0, event.meters);
        if (this.state.selectedVertex !== null) {
          this.schedulePreview();
        }
        break;
      }
      case "save": {
        this.mutation = this.savePart(event.name);
        break;
      }
      case "remove": {
        this.mutation = this.removePart(event.name);
        break;
      }
    }
    this.notify();
  }

  /** Resolve once the debounce timer, preview request, and any pending
   * mutation have all drained. Scripted tests await this between events. */
  async settle(): Promise<void> {
    for (;;) {
      if (this.timer !== null) {
        await new Promise((r) => setTimeout(r, this.debounceMs + 5));
        continue;
      }
      const waiting = this.inflight ?? this.mutation;
      if (waiting === null) return;
      await waiting.catch(() => undefined);
      if (this.inflight === waiting) this.inflight = null;
      if (this.mutation === waiting) this.mutation = null;
    }
  }

  /** Rebuild the final state of a recorded session on a fresh store. */
  static async replay(
    events: readonly UiEvent[],
    api: ApiClient,
    opts: StoreOptions,
  ): Promise<ViewerState> {
    const store = new SelectionStore(api, { ...opts, debounceMs: 0 });
    await store.init();
    for (const event of events) {
      store.dispatch(event);
      await store.settle();
    }
    return store.state;
  }

  private schedulePreview(): void {
    this.state.previewPending = true;
    if (this.timer !== null) {
      clearTimeout(this.timer); // coalesce rapid slider moves
    }
    this.timer = setTimeout(() => {
      this.timer = null;
      this.issuePreview();
    }, this.debounceMs);
  }

  private issuePreview(): void {
    const seed = this.state.selectedVertex;
    if (seed === null) return;
    const token = ++this.requestSeq;
    const threshold = this.state.thresholdM;
    this.inflight = this.api
      .geodesicGroup(seed, threshold)
      .then((group) => {
        if (token !== this.requestSeq) return; // superseded: discard
        this.state.previewMembers = group.members;
        this.state.previewCentroid = group.centroid;
        this.state.previewPending = false;
        this.state.lastError = null;
        this.notify();
      })
      .catch((err) => {
        if (token !== this.requestSeq) return;
        this.state.previewPending = false;
        this.state.lastError = describe(err);
        this.notify();
      });
  }

  private async savePart(name: string): Promise<void> {
    const seed = this.state.selectedVertex;
    if (seed === null || name === "") {
      this.state.lastError = "select a seed vertex and enter a name first";
      this.notify();
      return;
    }
    try {
      await this.api.createPart(name, seed, this.state.thresholdM);
      this.state.parts = (await this.api.listParts()).parts;
      this.state.lastError = null;
    } catch (err) {
      this.state.lastError = describe(err); // e.g. duplicate name: inline, no state change
    }
    this.notify();
  }

  private async removePart(name: string): Promise<void> {
    try {
      await this.api.deletePart(name);
      this.state.parts = (await this.api.listParts()).parts;
      this.state.lastError = null;
    } catch (err) {
      this.state.lastError = describe(err);
    }
    this.notify();
  }

  private notify(): void {
    this.opts.onChange?.(this.state);
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}
