/** Interaction controllers between the studio state and the service.
 *
 * ParamController debounces slider changes (one request per quiet period,
 * capping the rate well under 10 requests per second), keeps at most one
 * exaggeration request in flight, and resolves races by monotone request
 * ids: a response only renders if no newer response has rendered.  Failures
 * surface as a banner message; the last rendered mesh stays on screen.
 *
 * GridController fetches the 3x3 parameter grid (u1, u2 in {0.5, 1, 1.5})
 * with exactly nine requests; failed cells become placeholders.
 */

import { ApiClient, ExaggerateRequest, HeadInfo } from "./api.js";
import { StudioState } from "./state.js";

export interface RenderSink {
  showMesh(payload: ArrayBuffer): void;
  showError(message: string): void;
  clearError(): void;
}

export interface RequestLogEntry {
  id: number;
  body: ExaggerateRequest;
}

export const DEBOUNCE_MS = 100;

export class ParamController {
  readonly log: RequestLogEntry[] = [];
  private nextId = 0;
  private lastRenderedId = -1;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;
  private dirty = false;

  constructor(
    private readonly api: ApiClient,
    private readonly state: StudioState,
    private readonly sink: RenderSink,
    private heads: HeadInfo[],
    private readonly debounceMs: number = DEBOUNCE_MS,
  ) {}

  setHeads(heads: HeadInfo[]): void {
    this.heads = heads;
  }

  /** Note a slider/selection change and schedule a (debounced) request. */
  onParamChange(): void {
    this.dirty = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
    }
    this.timer = setTimeout(() => {
      this.timer = null;
      this.maybeIssue();
    }, this.debounceMs);
  }

  /** Issue immediately (initial load, grid-cell click). */
  refreshNow(): void {
    this.dirty = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.maybeIssue();
  }

  private maybeIssue(): void {
    if (this.inFlight || !this.dirty) {
      return;
    }
    this.dirty = false;
    this.inFlight = true;
    const id = this.nextId++;
    const body = this.state.requestBody(this.heads);
    this.log.push({ id, body });
    this.api
      .exaggerate(body)
      .then((payload) => {
        if (id > this.lastRenderedId) {
          this.lastRenderedId = id;
          this.sink.clearError();
          this.sink.showMesh(payload);
        }
      })
      .catch((err) => {
        this.sink.showError(String(err instanceof Error ? err.message : err));
      })
      .finally(() => {
        this.inFlight = false;
        // A change arrived while this request was in flight; serve it now.
        if (this.dirty && this.timer === null) {
          this.maybeIssue();
        }
      });
  }

  /** Replay support: the bodies issued so far, in order. */
  requestSequence(): ExaggerateRequest[] {
    return this.log.map((entry) => entry.body);
  }
}

export const GRID_VALUES = [0.5, 1.0, 1.5] as const;

export interface GridCell {
  u1: number;
  u2: number;
  payload: ArrayBuffer | null; // null marks a failed (placeholder) cell
}

export class GridController {
  constructor(private readonly api: ApiClient) {}

  /** Fetch all nine (u1, u2) combinations for the head. */
  async render(headId: string): Promise<GridCell[]> {
    const cells: Promise<GridCell>[] = [];
    for (const u2 of GRID_VALUES) {
      for (const u1 of GRID_VALUES) {
        cells.push(
          this.api
            .exaggerate({ head_id: headId, u1, u2 })
            .then((payload): GridCell => ({ u1, u2, payload }))
            .catch((): GridCell => ({ u1, u2, payload: null })),
        );
      }
    }
    return Promise.all(cells);
  }
}
