// Typed client for the part-selection backend. All geometry semantics live
// server-side; this file only moves JSON.

export interface MeshPayload {
  vertex_count: number;
  face_count: number;
  vertices: number[]; // flat xyz, row-major
  faces: number[]; // flat vertex-index triples
  checksum: string;
  bbox: { min: number[]; max: number[] };
}

export interface GroupPayload {
  members: number[];
  centroid: number[];
}

export interface PartPayload {
  name: string;
  seed: number;
  threshold_m: number;
  members: number[];
  meta?: unknown;
}

export interface PartsListing {
  mesh_checksum: string;
  parts: PartPayload[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseOrThrow<T>(resp: Response): Promise<T> {
  if (resp.ok) {
    return (await resp.json()) as T;
  }
  let code = `http-${resp.status}`;
  let message = resp.statusText;
  try {
    const body = (await resp.json()) as { error?: string; message?: string };
    if (body.error) code = body.error;
    if (body.message) message = body.message;
  } catch {
    // non-JSON error body: keep the status text
  }
  throw new ApiError(resp.status, code, message);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) =>
      fetch(input, init),
  ) {}

  getMesh(): Promise<MeshPayload> {
    return this.fetchImpl(`${this.baseUrl}/api/mesh`).then((r) =>
      parseOrThrow<MeshPayload>(r),
    );
  }

  geodesicGroup(seed: number, thresholdM: number): Promise<GroupPayload> {
    return this.fetchImpl(`${this.baseUrl}/api/geodesic-group`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ seed, threshold_m: thresholdM }),
    }).then((r) => parseOrThrow<GroupPayload>(r));
  }

  listParts(): Promise<PartsListing> {
    return this.fetchImpl(`${this.baseUrl}/api/parts`).then((r) =>
      parseOrThrow<PartsListing>(r),
    );
  }

  createPart(
    name: string,
    seed: number,
    thresholdM: number,
  ): Promise<PartPayload> {
    return this.fetchImpl(`${this.baseUrl}/api/parts`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ name, seed, threshold_m: thresholdM }),
    }).then((r) => parseOrThrow<PartPayload>(r));
  }

  deletePart(name: string): Promise<void> {
    return this.fetchImpl(
      `${this.baseUrl}/api/parts/${encodeURIComponent(name)}`,
      { method: "DELETE" },
    ).then((r) => parseOrThrow<unknown>(r)) as Promise<void>;
  }
}
