import type { EventRecord } from "./types.js";

export const ROLLBACK_MARKER = "RollbackMarker";

export interface TimelineRow {
  record: EventRecord;
  /** true when a later rollback marker masks this record out of replay */
  masked: boolean;
  isMarker: boolean;
}

/**
 * Orders events by seq and applies the server's rollback masking rule:
 * a RollbackMarker removes every earlier-collected record with
 * seq > target_seq from the effective timeline (markers themselves are
 * never effective). Rows are kept for display, only flagged, so the UI
 * can collapse a masked range instead of pretending it never happened.
 *
 * The fold is recomputed from the sorted rows on every change, which makes
 * arrival order irrelevant: any interleaving of the same records converges
 * to the same visible timeline the server would replay.
 */
export class Timeline {
  private rows: TimelineRow[] = [];
  private bySeq = new Map<number, TimelineRow>();

  apply(rec: EventRecord): boolean {
    if (this.bySeq.has(rec.seq)) return false;
    const row: TimelineRow = {
      record: rec,
      masked: false,
      isMarker: rec.kind === ROLLBACK_MARKER,
    };
    this.bySeq.set(rec.seq, row);
    // usually an append; binary search not worth it at dashboard sizes
    const at = this.rows.findIndex((r) => r.record.seq > rec.seq);
    if (at < 0) this.rows.push(row);
    else this.rows.splice(at, 0, row);
    this.remask();
    return true;
  }

  applyAll(recs: Iterable<EventRecord>): void {
    for (const rec of recs) this.apply(rec);
  }

  private remask(): void {
    let visible = new Set<number>();
    for (const row of this.rows) {
      if (row.isMarker) {
        const target = Number(row.record.payload?.target_seq ?? 0);
        visible = new Set([...visible].filter((s) => s <= target));
      } else {
        visible.add(row.record.seq);
      }
    }
    for (const row of this.rows) {
      row.masked = row.isMarker || !visible.has(row.record.seq);
    }
  }

  all(): TimelineRow[] {
    return this.rows.slice();
  }

  /** Effective records, exactly what the server would replay. */
  visible(): EventRecord[] {
    return this.rows.filter((r) => !r.masked).map((r) => r.record);
  }

  visibleSeqs(): number[] {
    return this.visible().map((r) => r.seq);
  }

  headSeq(): number {
    return this.rows.length ? this.rows[this.rows.length - 1].record.seq : 0;
  }

  size(): number {
    return this.rows.length;
  }

  clear(): void {
    this.rows = [];
    this.bySeq = new Map();
  }
}
