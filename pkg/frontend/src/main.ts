/** DOM wiring for the latent-space explorer.
 *
 * Eight sliders (bounded by the learned coefficient range), pin A/B plus a
 * t-slider for interpolation, live decoded geometry with validity badge,
 * predicted field heatmap on a session-fixed color scale, and a client-side
 * export of the current design. All traffic is debounced and single-flight
 * per endpoint; stale responses are dropped.
 */

import { ApiClient, DecodePayload, Meta, PredictPayload } from "./api.js";
import { debounce, SingleFlight } from "./debounce.js";
import { blit, renderField, renderGeometry } from "./render.js";
import { ExplorerState } from "./state.js";

const SERVICE_URL =
  new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:8777";
const DEBOUNCE_MS = 100; // <= 10 requests/s while dragging

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing #${id}`);
  }
  return node as T;
}

class SessionScale {
  min = Number.POSITIVE_INFINITY;
  max = Number.NEGATIVE_INFINITY;

  update(lo: number, hi: number): void {
    this.min = Math.min(this.min, lo);
    this.max = Math.max(this.max, hi);
  }
}

async function boot(): Promise<void> {
  const api = new ApiClient(SERVICE_URL);
  const banner = el<HTMLDivElement>("banner");
  let meta: Meta;
  try {
    meta = await api.meta();
  } catch (err) {
    banner.textContent = `service unreachable at ${SERVICE_URL}: ${String(err)}`;
    banner.classList.add("show");
    return;
  }

  const state = new ExplorerState(meta);
  const scale = new SessionScale();
  const geomCanvas = el<HTMLCanvasElement>("geometry");
  const fieldCanvas = el<HTMLCanvasElement>("field");
  const badge = el<HTMLSpanElement>("badge");
  const fieldLabel = el<HTMLSpanElement>("field-label");
  fieldLabel.textContent = meta.target_field ?? "field";

  let lastDecode: DecodePayload | null = null;
  let lastPredict: PredictPayload | null = null;

  const showError = (err: unknown) => {
    banner.textContent = `connection lost: ${String(err)}`;
    banner.classList.add("show");
  };
  const clearError = () => banner.classList.remove("show");

  const decodeFlight = new SingleFlight<number[], DecodePayload>(
    (alpha, signal) => api.decode(alpha, signal),
    (_alpha, payload) => {
      clearError();
      lastDecode = payload;
      blit(geomCanvas, renderGeometry(payload), payload.grid[0], payload.grid[1]);
      const v = payload.validity;
      badge.textContent = v.valid
        ? `valid: ${v.figure_count} figures, area ${(v.area_fraction * 100).toFixed(1)}%`
        : `invalid: ${v.figure_count} figures, area ${(v.area_fraction * 100).toFixed(1)}%`;
      badge.className = v.valid ? "badge ok" : "badge bad";
      maybeExport();
    },
    showError,
  );

  const predictFlight = new SingleFlight<number[], PredictPayload>(
    (alpha, signal) => api.predict(alpha, signal),
    (_alpha, payload) => {
      clearError();
      lastPredict = payload;
      scale.update(payload.min, payload.max);
      blit(fieldCanvas, renderField(payload, scale.min, scale.max),
           payload.grid[0], payload.grid[1]);
      maybeExport();
    },
    showError,
  );

  const refresh = debounce((alpha: number[]) => {
    decodeFlight.request(alpha);
    predictFlight.request(alpha);
  }, DEBOUNCE_MS);

  // sliders
  const sliderBox = el<HTMLDivElement>("sliders");
  const sliders: HTMLInputElement[] = [];
  const rebuildSliders = () => {
    sliderBox.innerHTML = "";
    sliders.length = 0;
    const bounds = state.currentBounds();
    for (let i = 0; i < meta.k_star; i++) {
      const row = document.createElement("label");
      row.className = "slider-row";
      const name = document.createElement("span");
      name.textContent = `α${i}`;
      const input = document.createElement("input");
      input.type = "range";
      input.min = String(bounds.lo[i]);
      input.max = String(bounds.hi[i]);
      input.step = String((bounds.hi[i] - bounds.lo[i]) / 400 || 1e-6);
      input.value = String(state.alpha[i]);
      input.addEventListener("input", () => {
        state.setSlider(i, Number(input.value));
        refresh(state.alpha.slice());
      });
      const val = document.createElement("code");
      val.textContent = Number(input.value).toFixed(3);
      input.addEventListener("input", () => (val.textContent = Number(input.value).toFixed(3)));
      row.append(name, input, val);
      sliderBox.append(row);
      sliders.push(input);
    }
  };
  const syncSliders = () => {
    sliders.forEach((s, i) => (s.value = String(state.alpha[i])));
  };
  rebuildSliders();

  el<HTMLInputElement>("explore").addEventListener("change", (ev) => {
    state.setExplore((ev.target as HTMLInputElement).checked);
    rebuildSliders();
    refresh(state.alpha.slice());
  });

  // pins + interpolation
  el<HTMLButtonElement>("pin-a").addEventListener("click", () => {
    state.pinA();
    el<HTMLSpanElement>("pin-a-label").textContent = "A ✓";
  });
  el<HTMLButtonElement>("pin-b").addEventListener("click", () => {
    state.pinB();
    el<HTMLSpanElement>("pin-b-label").textContent = "B ✓";
  });
  const tSlider = el<HTMLInputElement>("t");
  tSlider.addEventListener("input", () => {
    state.setT(Number(tSlider.value));
    const blend = state.interpolated();
    if (blend) {
      state.setAlpha(blend);
      syncSliders();
      refresh(state.alpha.slice());
    }
  });

  // samples
  el<HTMLButtonElement>("load-sample").addEventListener("click", async () => {
    try {
      const seed = Math.floor(Math.random() * 1e6);
      const payload = await api.samples(1, seed);
      state.setAlpha(payload.codes[0]);
      syncSliders();
      refresh(state.alpha.slice());
    } catch (err) {
      showError(err);
    }
  });

  // view switching
  const grid = el<HTMLDivElement>("panels");
  el<HTMLSelectElement>("view").addEventListener("change", (ev) => {
    state.view = (ev.target as HTMLSelectElement).value as ExplorerState["view"];
    grid.dataset.view = state.view;
  });
  grid.dataset.view = state.view;

  // client-side export of {alpha, raster, field}
  const exportBtn = el<HTMLButtonElement>("export");
  const maybeExport = () => {
    exportBtn.disabled = !(lastDecode && lastPredict);
  };
  exportBtn.addEventListener("click", () => {
    if (!lastDecode || !lastPredict) {
      return;
    }
    const blob = new Blob(
      [JSON.stringify({ alpha: state.alpha, decode: lastDecode, predict: lastPredict })],
      { type: "application/json" },
    );
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "thermoforge-design.json";
    a.click();
    URL.revokeObjectURL(a.href);
  });

  refresh(state.alpha.slice());
}

void boot();
