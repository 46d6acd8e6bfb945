/** End-to-end tests against a live carimorph service (spawned in
 * global-setup).  These drive the same code paths the browser uses: the
 * ApiClient over real HTTP, the ParamController, and the payload parser.
 */

import { describe, expect, inject, it } from "vitest";

import { ApiClient, ExaggerateRequest } from "../src/api.js";
import { GridController, ParamController, RenderSink } from "../src/controller.js";
import { StudioState } from "../src/state.js";
import { decodeMesh, payloadsEqual } from "../src/wire.js";

const url = inject("serviceUrl");
const api = new ApiClient(url);

function collectSink() {
  const rendered: ArrayBuffer[] = [];
  const errors: string[] = [];
  const sink: RenderSink = {
    showMesh: (payload) => rendered.push(payload),
    showError: (message) => errors.push(message),
    clearError: () => {},
  };
  return { sink, rendered, errors };
}

async function renderedAt(u1: number, u2: number): Promise<ArrayBuffer> {
  const model = await api.getModel();
  const heads = await api.getHeads();
  const state = new StudioState(model);
  state.headId = heads[0].id;
  state.setU1(u1);
  state.setU2(u2);
  const { sink, rendered, errors } = collectSink();
  const controller = new ParamController(api, state, sink, heads, 1);
  controller.refreshNow();
  const deadline = Date.now() + 10000;
  while (rendered.length === 0 && errors.length === 0 && Date.now() < deadline) {
    await new Promise((resolve) => setTimeout(resolve, 20));
  }
  expect(errors).toEqual([]);
  expect(rendered.length).toBe(1);
  return rendered[0];
}

describe("studio against the live service", () => {
  it("reports the model and the preloaded head", async () => {
    const model = await api.getModel();
    expect(model.n_v).toBeGreaterThan(0);
    expect(model.variance_ratios.length).toBeGreaterThan(0);
    const heads = await api.getHeads();
    expect(heads.map((h) => h.id)).toEqual(["alice"]);
    expect(heads[0].cari_coeffs.length).toBe(model.d);
  });

  it("(u1, u2) = (0, 1) renders byte-identically to the stored normal head", async () => {
    const shown = await renderedAt(0, 1);
    const stored = await api.getMesh("alice", "normal");
    expect(payloadsEqual(shown, stored)).toBe(true);
  });

  it("(u1, u2) = (1, 0) renders byte-identically to the stored caricature", async () => {
    const shown = await renderedAt(1, 0);
    const stored = await api.getMesh("alice", "cari");
    expect(payloadsEqual(shown, stored)).toBe(true);
  });

  it("grid covers the 3x3 cross product and exaggeration grows along u1", async () => {
    const grid = new GridController(api);
    const cells = await grid.render("alice");
    expect(cells.length).toBe(9);
    expect(cells.every((c) => c.payload !== null)).toBe(true);
    const combos = new Set(cells.map((c) => `${c.u1},${c.u2}`));
    expect(combos.size).toBe(9);
    for (const u1 of [0.5, 1, 1.5]) {
      for (const u2 of [0.5, 1, 1.5]) {
        expect(combos.has(`${u1},${u2}`)).toBe(true);
      }
    }

    // Feature norms relative to the mean head: the (0, 0) request returns it.
    const meanPayload = await api.exaggerate({ head_id: "alice", u1: 0, u2: 0 });
    const mean = decodeMesh(meanPayload).vertices;
    const norm = (payload: ArrayBuffer) => {
      const v = decodeMesh(payload).vertices;
      let sum = 0;
      for (let i = 0; i < v.length; i++) sum += (v[i] - mean[i]) ** 2;
      return Math.sqrt(sum);
    };
    for (const u2 of [0.5, 1, 1.5]) {
      const row = cells
        .filter((c) => c.u2 === u2)
        .sort((a, b) => a.u1 - b.u1)
        .map((c) => norm(c.payload!));
      expect(row[0]).toBeLessThan(row[1]);
      expect(row[1]).toBeLessThan(row[2]);
    }
  });

  it("rejects malformed requests with a 4xx and surfaces the banner", async () => {
    const model = await api.getModel();
    const heads = await api.getHeads();
    const state = new StudioState(model);
    state.headId = "nobody";
    const { sink, rendered, errors } = collectSink();
    const controller = new ParamController(api, state, sink, heads, 1);
    controller.refreshNow();
    const deadline = Date.now() + 10000;
    while (errors.length === 0 && Date.now() < deadline) {
      await new Promise((resolve) => setTimeout(resolve, 20));
    }
    expect(errors.length).toBe(1);
    expect(rendered.length).toBe(0);
  });

  it("coefficient edits round-trip through /exaggerate", async () => {
    const heads = await api.getHeads();
    const body: ExaggerateRequest = {
      head_id: "alice",
      coeffs: heads[0].cari_coeffs,
      u1: 1,
      u2: 0,
    };
    const viaCoeffs = await api.exaggerate(body);
    const direct = await api.exaggerate({ head_id: "alice", u1: 1, u2: 0 });
    // The code travels to the service and decodes to (approximately) the
    // caricature; exact encode/decode precision is the service's concern,
    // and the quantized fixtures sit slightly off the model span.
    const a = decodeMesh(viaCoeffs).vertices;
    const b = decodeMesh(direct).vertices;
    expect(a.length).toBe(b.length);
    let worst = 0;
    for (let i = 0; i < a.length; i++) worst = Math.max(worst, Math.abs(a[i] - b[i]));
    expect(worst).toBeLessThan(0.01);
  });
});
