/** Client-side annotation state for one frame.
 *
 * The working pose always has one row per skeleton keypoint; rows are only
 * mutated through user actions (place, mark-missing, undo) or an accepted
 * warm-start prediction. The cursor follows skeleton order and points at
 * the next untouched keypoint a click will place. `dirty` clears only
 * after the owner confirms a successful PUT via markSaved().
 */

import { PoseRow, clonePose, emptyPose, rowPlaced } from "./model.js";

export type RowSource = "user" | "predicted" | "none";

interface Snapshot {
  rows: PoseRow[];
  sources: RowSource[];
  cursor: number | null;
}

export class AnnotationSession {
  readonly frameId: number;
  private names: string[];
  private rows: PoseRow[];
  private sources: RowSource[];
  private undoStack: Snapshot[] = [];
  private _cursor: number | null;
  private _dirty = false;

  constructor(frameId: number, names: string[], existing?: PoseRow[]) {
    if (existing && existing.length !== names.length) {
      throw new Error(
        `pose has ${existing.length} rows, skeleton has ${names.length}`,
      );
    }
    this.frameId = frameId;
    this.names = [...names];
    this.rows = existing ? clonePose(existing) : emptyPose(names);
    this.sources = this.rows.map((r) => (rowPlaced(r) ? "user" : "none"));
    this._cursor = this.nextUntouched(0);
  }

  get cursor(): number | null {
    return this._cursor;
  }

  get dirty(): boolean {
    return this._dirty;
  }

  get pose(): PoseRow[] {
    return clonePose(this.rows);
  }

  rowSource(index: number): RowSource {
    return this.sources[index];
  }

  keypointName(index: number): string {
    return this.names[index];
  }

  /** First keypoint at or after `from` (cyclic) no action has touched yet. */
  private nextUntouched(from: number): number | null {
    for (let step = 0; step < this.names.length; step++) {
      const i = (from + step) % this.names.length;
      if (this.sources[i] === "none") return i;
    }
    return null;
  }

  private snapshot(): void {
    this.undoStack.push({
      rows: clonePose(this.rows),
      sources: [...this.sources],
      cursor: this._cursor,
    });
  }

  /** Explicitly select which keypoint the next click places. */
  selectKeypoint(index: number): void {
    if (index < 0 || index >= this.names.length) {
      throw new Error(`keypoint index ${index} out of range`);
    }
    this._cursor = index;
  }

  /** Place the cursor keypoint at image coordinates (sub-pixel preserved). */
  placeKeypoint(x: number, y: number): void {
    if (this._cursor === null) return;
    this.snapshot();
    const i = this._cursor;
    this.rows[i] = { name: this.names[i], x, y, score: 1.0 };
    this.sources[i] = "user";
    this._dirty = true;
    this._cursor = this.nextUntouched(i + 1);
  }

  /** Mark the cursor keypoint as not visible in this frame. */
  markMissing(): void {
    if (this._cursor === null) return;
    this.snapshot();
    const i = this._cursor;
    this.rows[i] = { name: this.names[i], x: null, y: null, score: null };
    this.sources[i] = "user";
    this._dirty = true;
    this._cursor = this.nextUntouched(i + 1);
  }

  /** Restore the state before the most recent placement or mark-missing. */
  undo(): boolean {
    const prev = this.undoStack.pop();
    if (!prev) return false;
    this.rows = prev.rows;
    this.sources = prev.sources;
    this._cursor = prev.cursor;
    this._dirty = true;
    return true;
  }

  /** Adopt a model prediction; rows stay flagged until the user touches them. */
  acceptWarmStart(prediction: PoseRow[]): void {
    if (prediction.length !== this.names.length) {
      throw new Error("prediction row count does not match the skeleton");
    }
    this.snapshot();
    this.rows = clonePose(prediction);
    this.sources = this.rows.map((r) => (rowPlaced(r) ? "predicted" : "none"));
    this._dirty = true;
    this._cursor = this.nextUntouched(0);
  }

  /** Payload for PUT /api/frames/{id}/keypoints. */
  toPayload(): PoseRow[] {
    return clonePose(this.rows);
  }

  markSaved(): void {
    this._dirty = false;
  }
}
