/** Typed client for the thermoforge inference service. */

export interface Meta {
  k_star: number;
  grid: [number, number];
  mode: string;
  stats: { mean: number[]; std: number[]; min: number[]; max: number[] };
  target_field: string | null;
  reference_range: [number, number];
}

export interface ValidityReport {
  figure_count: number;
  area_fraction: number;
  valid: boolean;
  reference_range: [number, number];
  boundary_touching: number;
}

export interface DecodePayload {
  alpha: number[];
  raster: string; // base64 bit-packed, rows padded to bytes
  grid: [number, number];
  validity: ValidityReport;
}

export interface PredictPayload {
  alpha: number[];
  field: string; // base64 float32 LE
  grid: [number, number];
  min: number;
  max: number;
}

export interface SamplesPayload {
  indices: number[];
  codes: number[][];
}

export class ApiClient {
  constructor(public readonly baseUrl: string) {}

  private async get<T>(path: string, signal?: AbortSignal): Promise<T> {
    const resp = await fetch(this.baseUrl + path, { signal });
    if (!resp.ok) {
      throw new Error(`${path}: HTTP ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  private async post<T>(path: string, body: unknown, signal?: AbortSignal): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    if (!resp.ok) {
      throw new Error(`${path}: HTTP ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  meta(signal?: AbortSignal): Promise<Meta> {
    return this.get("/meta", signal);
  }

  samples(n: number, seed = 0, signal?: AbortSignal): Promise<SamplesPayload> {
    return this.get(`/samples?n=${n}&seed=${seed}`, signal);
  }

  decode(alpha: number[], signal?: AbortSignal): Promise<DecodePayload> {
    return this.post("/decode", { alpha }, signal);
  }

  predict(alpha: number[], signal?: AbortSignal): Promise<PredictPayload> {
    return this.post("/predict", { alpha }, signal);
  }
}

export function base64ToBytes(b64: string): Uint8Array {
  const raw = atob(b64);
  const out = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) {
    out[i] = raw.charCodeAt(i);
  }
  return out;
}

export function base64ToFloat32(b64: string): Float32Array {
  const bytes = base64ToBytes(b64);
  return new Float32Array(bytes.buffer, 0, bytes.byteLength / 4);
}

/** Unpack a row-padded MSB-first bit-packed raster to 0/1 per pixel. */
export function unpackRaster(b64: string, rows: number, cols: number): Uint8Array {
  const bytes = base64ToBytes(b64);
  const bytesPerRow = Math.ceil(cols / 8);
  const out = new Uint8Array(rows * cols);
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      const byte = bytes[r * bytesPerRow + (c >> 3)];
      out[r * cols + c] = (byte >> (7 - (c & 7))) & 1;
    }
  }
  return out;
}
