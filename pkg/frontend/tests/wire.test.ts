import { describe, expect, it } from "vitest";

import { decodeMesh, payloadsEqual } from "../src/wire.js";
import { buildPayload } from "./helpers.js";

describe("decodeMesh", () => {
  it("round-trips a hand-built payload", () => {
    const vertices = [0, 0, 0, 1, 0, 0, 0.5, 1, 0];
    const faces = [0, 1, 2];
    const payload = buildPayload(vertices, faces);
    const mesh = decodeMesh(payload);
    expect(mesh.nVertices).toBe(3);
    expect(mesh.nFaces).toBe(1);
    expect(Array.from(mesh.vertices)).toEqual(vertices.map(Math.fround));
    expect(Array.from(mesh.indices)).toEqual(faces);
    expect(mesh.bytes).toBe(payload);
  });

  it("rejects truncated payloads", () => {
    const payload = buildPayload([0, 0, 0], []);
    expect(() => decodeMesh(payload.slice(0, payload.byteLength - 2))).toThrow(/size/);
    expect(() => decodeMesh(new ArrayBuffer(3))).toThrow(/short/);
  });

  it("compares payload bytes", () => {
    const a = buildPayload([0, 0, 0], []);
    const b = buildPayload([0, 0, 0], []);
    const c = buildPayload([0, 0, 1], []);
    expect(payloadsEqual(a, b)).toBe(true);
    expect(payloadsEqual(a, c)).toBe(false);
    expect(payloadsEqual(a, a.slice(0, 4))).toBe(false);
  });
});
