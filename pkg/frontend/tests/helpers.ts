/** Shared test helpers: payload builders and a scriptable fake transport. */

import type { Transport } from "../src/api.js";

export function buildPayload(vertices: number[], faces: number[]): ArrayBuffer {
  const nV = vertices.length / 3;
  const nF = faces.length / 3;
  const buffer = new ArrayBuffer(8 + 12 * nV + 12 * nF);
  const view = new DataView(buffer);
  view.setUint32(0, nV, true);
  view.setUint32(4, nF, true);
  new Float32Array(buffer, 8, 3 * nV).set(vertices);
  new Uint32Array(buffer, 8 + 12 * nV, 3 * nF).set(faces);
  return buffer;
}

export interface RecordedRequest {
  url: string;
  body: unknown;
}

/** Transport that records requests and answers from a handler. */
export function fakeTransport(
  handler: (url: string, body: unknown) => ArrayBuffer | Promise<ArrayBuffer>,
): { transport: Transport; requests: RecordedRequest[] } {
  const requests: RecordedRequest[] = [];
  const transport: Transport = async (url, init) => {
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    requests.push({ url, body });
    const payload = await handler(url, body);
    return new Response(payload, {
      status: 200,
      headers: { "Content-Type": "application/octet-stream" },
    });
  };
  return { transport, requests };
}
