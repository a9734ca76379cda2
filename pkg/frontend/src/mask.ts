/**
 * Raster mask painting over the hand illustration.
 *
 * Painting is raster-native (cell on/off, circular brush) so a submitted
 * mask round-trips bit-exactly through the backend: the same `mask_rows`
 * strings come back in the stored trial record.  Strokes only land on hand
 * cells; the strongest-point marker must sit inside the painted area.
 */

import type { HandMapInfo, QualityKeyword } from "./types.js";
import { QUALITY_KEYWORDS } from "./types.js";

export interface MaskValidation {
  ok: boolean;
  error?: string;
}

export class MaskCanvas {
  readonly width: number;
  readonly height: number;
  private cells: Uint8Array;
  private handCells: Uint8Array;
  strongest: [number, number] | null = null;
  quality: QualityKeyword | null = null;

  constructor(private readonly handmap: HandMapInfo) {
    this.height = handmap.rows.length;
    this.width = this.height > 0 ? handmap.rows[0].length : 0;
    this.cells = new Uint8Array(this.width * this.height);
    this.handCells = new Uint8Array(this.width * this.height);
    for (let r = 0; r < this.height; r++) {
      const row = handmap.rows[r];
      for (let c = 0; c < this.width; c++) {
        if (row[c] !== "0") this.handCells[r * this.width + c] = 1;
      }
    }
  }

  private index(row: number, col: number): number {
    return row * this.width + col;
  }

  inBounds(row: number, col: number): boolean {
    return row >= 0 && row < this.height && col >= 0 && col < this.width;
  }

  isHand(row: number, col: number): boolean {
    return this.inBounds(row, col) && this.handCells[this.index(row, col)] === 1;
  }

  isPainted(row: number, col: number): boolean {
    return this.inBounds(row, col) && this.cells[this.index(row, col)] === 1;
  }

  paintedCount(): number {
    let n = 0;
    for (const v of this.cells) n += v;
    return n;
  }

  /** Apply a circular brush stroke; returns how many cells changed. */
  paint(row: number, col: number, radius = 2): number {
    return this.stroke(row, col, radius, 1);
  }

  erase(row: number, col: number, radius = 2): number {
    const changed = this.stroke(row, col, radius, 0);
    if (this.strongest && !this.isPainted(...this.strongest)) {
      this.strongest = null; // marker erased from under itself
    }
    return changed;
  }

  private stroke(row: number, col: number, radius: number, value: 0 | 1): number {
    let changed = 0;
    const r2 = radius * radius;
    for (let dr = -radius; dr <= radius; dr++) {
      for (let dc = -radius; dc <= radius; dc++) {
        if (dr * dr + dc * dc > r2) continue;
        const r = row + dr;
        const c = col + dc;
        if (!this.isHand(r, c)) continue;
        const i = this.index(r, c);
        if (this.cells[i] !== value) {
          this.cells[i] = value;
          changed++;
        }
      }
    }
    return changed;
  }

  clear(): void {
    this.cells.fill(0);
    this.strongest = null;
    this.quality = null;
  }

  /** Mark the strongest point; rejected when outside the painted area. */
  setStrongest(row: number, col: number): MaskValidation {
    if (!this.isPainted(row, col)) {
      return { ok: false, error: "strongest point must lie inside the painted area" };
    }
    this.strongest = [row, col];
    return { ok: true };
  }

  setQuality(quality: string): MaskValidation {
    if (!(QUALITY_KEYWORDS as readonly string[]).includes(quality)) {
      return { ok: false, error: `unknown quality keyword '${quality}'` };
    }
    this.quality = quality as QualityKeyword;
    return { ok: true };
  }

  validate(requireQuality = true): MaskValidation {
    if (this.paintedCount() === 0) {
      return { ok: false, error: "nothing painted yet" };
    }
    if (!this.strongest) {
      return { ok: false, error: "mark the strongest point" };
    }
    if (requireQuality && !this.quality) {
      return { ok: false, error: "pick a quality keyword" };
    }
    return { ok: true };
  }

  toRows(): string[] {
    const rows: string[] = [];
    for (let r = 0; r < this.height; r++) {
      let line = "";
      for (let c = 0; c < this.width; c++) {
        line += this.cells[this.index(r, c)] === 1 ? "1" : "0";
      }
      rows.push(line);
    }
    return rows;
  }

  loadRows(rows: string[], strongest?: [number, number] | null,
           quality?: string | null): void {
    if (rows.length !== this.height) {
      throw new Error(`mask has ${rows.length} rows, map has ${this.height}`);
    }
    for (let r = 0; r < this.height; r++) {
      for (let c = 0; c < this.width; c++) {
        this.cells[this.index(r, c)] = rows[r][c] === "1" ? 1 : 0;
      }
    }
    this.strongest = strongest ?? null;
    this.quality = (quality as QualityKeyword) ?? null;
  }

  equalsRows(rows: string[]): boolean {
    const mine = this.toRows();
    return mine.length === rows.length && mine.every((row, i) => row === rows[i]);
  }
}
