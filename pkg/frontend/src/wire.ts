/** Binary mesh payload parsing.
 *
 * Layout (little-endian): u32 vertex count, u32 face count, f32 vertices
 * (x0 y0 z0 x1 ...), u32 face indices.  The raw buffer is kept alongside the
 * typed views so callers can compare payloads byte for byte.
 */

export interface MeshPayload {
  readonly nVertices: number;
  readonly nFaces: number;
  readonly vertices: Float32Array;
  readonly indices: Uint32Array;
  readonly bytes: ArrayBuffer;
}

const HEADER_BYTES = 8;

export function decodeMesh(buffer: ArrayBuffer): MeshPayload {
  if (buffer.byteLength < HEADER_BYTES) {
    throw new Error(`payload too short: ${buffer.byteLength} bytes`);
  }
  const header = new DataView(buffer);
  const nVertices = header.getUint32(0, true);
  const nFaces = header.getUint32(4, true);
  const expected = HEADER_BYTES + 12 * nVertices + 12 * nFaces;
  if (buffer.byteLength !== expected) {
    throw new Error(
      `payload size ${buffer.byteLength} does not match header (${expected} expected)`,
    );
  }
  // Typed-array views assume a little-endian host, which covers every JS
  // engine this runs on; the guard keeps a surprise from passing silently.
  if (!hostIsLittleEndian()) {
    throw new Error("big-endian hosts are not supported");
  }
  const vertices = new Float32Array(buffer, HEADER_BYTES, 3 * nVertices);
  const indices = new Uint32Array(buffer, HEADER_BYTES + 12 * nVertices, 3 * nFaces);
  return { nVertices, nFaces, vertices, indices, bytes: buffer };
}

function hostIsLittleEndian(): boolean {
  return new Uint8Array(new Uint32Array([1]).buffer)[0] === 1;
}

export function payloadsEqual(a: ArrayBuffer, b: ArrayBuffer): boolean {
  if (a.byteLength !== b.byteLength) return false;
  const va = new Uint8Array(a);
  const vb = new Uint8Array(b);
  for (let i = 0; i < va.length; i++) {
    if (va[i] !== vb[i]) return false;
  }
  return true;
}
