/** REST client for the carimorph service.
 *
 * The transport is injectable so tests can count, reorder, or fail requests;
 * production uses fetch.  The client never interprets geometry beyond
 * passing payload bytes along: every displayed mesh is a service response.
 */

export interface ModelInfo {
  n_v: number;
  d: number;
  variance_ratios: number[];
}

export interface HeadInfo {
  id: string;
  cari_coeffs: number[];
}

export interface ExaggerateRequest {
  head_id?: string;
  coeffs?: number[];
  u1: number;
  u2: number;
}

export type Transport = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status?: number,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly transport: Transport = (url, init) => fetch(url, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.transport(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(`network failure: ${String(err)}`);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(detail, response.status);
    }
    return response;
  }

  async getModel(): Promise<ModelInfo> {
    const response = await this.request("/model");
    return (await response.json()) as ModelInfo;
  }

  async getHeads(): Promise<HeadInfo[]> {
    const response = await this.request("/heads");
    const body = (await response.json()) as { heads: HeadInfo[] };
    return body.heads;
  }

  async exaggerate(req: ExaggerateRequest): Promise<ArrayBuffer> {
    const response = await this.request("/exaggerate", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    return response.arrayBuffer();
  }

  async getMesh(headId: string, side: "cari" | "normal" = "cari"): Promise<ArrayBuffer> {
    const response = await this.request(`/mesh/${encodeURIComponent(headId)}?side=${side}`);
    return response.arrayBuffer();
  }
}
