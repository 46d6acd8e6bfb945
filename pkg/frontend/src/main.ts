/** Studio entry point: wires the service client, state, controllers, and the
 * three.js viewport to the DOM.
 */

import { ApiClient } from "./api.js";
import {
  DEBOUNCE_MS,
  GridController,
  ParamController,
  RenderSink,
} from "./controller.js";
import {
  EDITABLE_COEFF_COUNT,
  SLIDER_MAX,
  SLIDER_MIN,
  SLIDER_STEP,
  StudioState,
} from "./state.js";
import { MeshViewer, drawThumbnail } from "./viewer.js";

const SERVICE_URL =
  new URLSearchParams(window.location.search).get("service") ?? "http://127.0.0.1:8000";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const api = new ApiClient(SERVICE_URL);
  const banner = el<HTMLDivElement>("banner");
  const viewer = new MeshViewer(el<HTMLCanvasElement>("viewport"));

  const sink: RenderSink = {
    showMesh: (payload) => viewer.showPayload(payload),
    showError: (message) => {
      banner.textContent = `service error: ${message} (showing last mesh)`;
      banner.hidden = false;
    },
    clearError: () => {
      banner.hidden = true;
    },
  };

  let model;
  let heads;
  try {
    model = await api.getModel();
    heads = await api.getHeads();
  } catch (err) {
    sink.showError(err instanceof Error ? err.message : String(err));
    return;
  }
  el<HTMLSpanElement>("model-info").textContent =
    `${model.n_v} vertices, ${model.d} components`;

  const state = new StudioState(model, EDITABLE_COEFF_COUNT);
  const controller = new ParamController(api, state, sink, heads, DEBOUNCE_MS);
  const grid = new GridController(api);

  // Head selector
  const headSelect = el<HTMLSelectElement>("head-select");
  for (const head of heads) {
    const option = document.createElement("option");
    option.value = head.id;
    option.textContent = head.id;
    headSelect.appendChild(option);
  }
  if (heads.length === 0) {
    sink.showError("service has no head slots loaded");
    return;
  }
  state.headId = heads[0].id;
  headSelect.addEventListener("change", () => {
    state.headId = headSelect.value;
    state.resetCoeffOffsets();
    syncCoeffSliders();
    controller.refreshNow();
  });

  // u1 / u2 sliders
  const bindSlider = (
    sliderId: string,
    labelId: string,
    get: () => number,
    set: (v: number) => void,
  ) => {
    const slider = el<HTMLInputElement>(sliderId);
    const label = el<HTMLSpanElement>(labelId);
    slider.min = String(SLIDER_MIN);
    slider.max = String(SLIDER_MAX);
    slider.step = String(SLIDER_STEP);
    slider.value = String(get());
    label.textContent = get().toFixed(2);
    slider.addEventListener("input", () => {
      set(Number(slider.value));
      label.textContent = get().toFixed(2);
      controller.onParamChange();
    });
    return slider;
  };
  const u1Slider = bindSlider("u1-slider", "u1-value", () => state.u1, (v) => state.setU1(v));
  const u2Slider = bindSlider("u2-slider", "u2-value", () => state.u2, (v) => state.setU2(v));

  // Editable leading coefficients (additive feature beyond the two weights).
  const coeffBox = el<HTMLDivElement>("coeff-sliders");
  const coeffInputs: HTMLInputElement[] = [];
  state.coeffOffsets.forEach((_, i) => {
    const bound = state.coeffBounds[i];
    const row = document.createElement("label");
    row.className = "coeff-row";
    row.textContent = `c${i} `;
    const input = document.createElement("input");
    input.type = "range";
    input.min = String(-bound);
    input.max = String(bound);
    input.step = String(bound / 50 || 0.01);
    input.value = "0";
    input.addEventListener("input", () => {
      state.setCoeffOffset(i, Number(input.value));
      controller.onParamChange();
    });
    row.appendChild(input);
    coeffBox.appendChild(row);
    coeffInputs.push(input);
  });
  const syncCoeffSliders = () => {
    coeffInputs.forEach((input, i) => {
      input.value = String(state.coeffOffsets[i]);
    });
  };
  el<HTMLButtonElement>("reset-coeffs").addEventListener("click", () => {
    state.resetCoeffOffsets();
    syncCoeffSliders();
    controller.onParamChange();
  });

  el<HTMLInputElement>("flat-toggle").addEventListener("change", (e) => {
    viewer.setFlatShading((e.target as HTMLInputElement).checked);
  });

  // 3x3 grid of (u1, u2) combinations; clicking a cell loads its parameters.
  const gridBox = el<HTMLDivElement>("grid");
  el<HTMLButtonElement>("grid-button").addEventListener("click", async () => {
    if (state.headId === null) return;
    gridBox.textContent = "loading...";
    const cells = await grid.render(state.headId);
    gridBox.textContent = "";
    for (const cell of cells) {
      const button = document.createElement("button");
      button.className = "grid-cell";
      const canvas = document.createElement("canvas");
      canvas.width = 96;
      canvas.height = 96;
      if (cell.payload) {
        drawThumbnail(canvas, cell.payload);
      } else {
        canvas.className = "grid-failed";
      }
      const label = document.createElement("div");
      label.textContent = `u1=${cell.u1} u2=${cell.u2}`;
      button.appendChild(canvas);
      button.appendChild(label);
      button.addEventListener("click", () => {
        state.setU1(cell.u1);
        state.setU2(cell.u2);
        u1Slider.value = String(state.u1);
        u2Slider.value = String(state.u2);
        el<HTMLSpanElement>("u1-value").textContent = state.u1.toFixed(2);
        el<HTMLSpanElement>("u2-value").textContent = state.u2.toFixed(2);
        controller.refreshNow();
      });
      gridBox.appendChild(button);
    }
  });

  controller.refreshNow();
}

boot().catch((err) => {
  console.error(err);
  const banner = document.getElementById("banner");
  if (banner) {
    banner.textContent = String(err);
    banner.hidden = false;
  }
});
