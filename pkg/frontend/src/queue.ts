/** Outlier review queue: ordered flagged frame ids plus a position pointer.
 *
 * The queue is never mutated locally; saving an annotation does not remove
 * entries (the server regenerates the list on the next outlier run), so a
 * refresh is just a new fetch + replace.
 */

export class ReviewQueue {
  private ids: number[];
  private pointer = 0;

  constructor(frameIds: number[]) {
    this.ids = [...frameIds];
  }

  get length(): number {
    return this.ids.length;
  }

  get position(): number {
    return this.pointer;
  }

  get exhausted(): boolean {
    return this.pointer >= this.ids.length;
  }

  get current(): number | null {
    return this.exhausted ? null : this.ids[this.pointer];
  }

  /** Frame to review next; advances the pointer. Null when done. */
  next(): number | null {
    if (this.exhausted) return null;
    const id = this.ids[this.pointer];
    this.pointer += 1;
    return id;
  }

  /** Step back one entry (e.g. to re-check the previous frame). */
  prev(): number | null {
    if (this.pointer === 0) return null;
    this.pointer -= 1;
    return this.ids[this.pointer];
  }

  /** Replace contents from a fresh GET /api/outliers. */
  refresh(frameIds: number[]): void {
    this.ids = [...frameIds];
    this.pointer = 0;
  }
}
