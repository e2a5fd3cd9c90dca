/**
 * Grid rendering and cell-snapped region brushing.
 *
 * The view renders row 0 at the bottom of the y-axis and never mutates the
 * grid it is given; all state changes flow back through callbacks.
 */

import { bucketColor, shadeBucket } from "./colorScale";
import { GridExport, Region } from "./types";

export interface HeatmapCallbacks {
  onCellClick(row: number, day: number): void;
  onRegionSelect(region: Region): void;
}

/** Throws when an export is structurally unusable for rendering. */
export function validateGrid(grid: GridExport): void {
  if (
    !grid ||
    !Number.isInteger(grid.num_rows) ||
    !Number.isInteger(grid.num_days) ||
    grid.num_rows < 1 ||
    grid.num_days < 1
  ) {
    throw new Error("malformed grid export: bad dimensions");
  }
  if (!Array.isArray(grid.cells) || grid.cells.length !== grid.num_rows) {
    throw new Error("malformed grid export: cell matrix shape");
  }
  for (const row of grid.cells) {
    if (!Array.isArray(row) || row.length !== grid.num_days) {
      throw new Error("malformed grid export: cell matrix shape");
    }
  }
  if (!Array.isArray(grid.row_labels) || grid.row_labels.length !== grid.num_rows) {
    throw new Error("malformed grid export: row labels");
  }
}

export function rowLabelText(grid: GridExport, row: number, words = 3): string {
  return grid.row_labels[row]
    .slice(0, words)
    .map(([word]) => word)
    .join(" ");
}

function dateForColumn(grid: GridExport, day: number): string {
  const millis = (grid.epoch_day0 + day) * 86400 * 1000;
  return new Date(millis).toISOString().slice(0, 10);
}

export class HeatmapView {
  private brushAnchor: { row: number; day: number } | null = null;
  private selection: Region | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly callbacks: HeatmapCallbacks,
  ) {}

  get selectedRegion(): Region | null {
    return this.selection;
  }

  /** Replace the rendered grid; throws (keeping the old view) when malformed. */
  render(grid: GridExport): void {
    validateGrid(grid);
    this.brushAnchor = null;
    this.selection = null;
    this.root.textContent = "";

    const table = document.createElement("div");
    table.className = "heatmap";
    for (let row = grid.num_rows - 1; row >= 0; row--) {
      const rowEl = document.createElement("div");
      rowEl.className = "heatmap-row";
      rowEl.dataset.row = String(row);

      const label = document.createElement("span");
      label.className = "row-label";
      label.textContent = rowLabelText(grid, row);
      label.title = grid.row_labels[row]
        .map(([word, score]) => `${word} (${score.toFixed(2)})`)
        .join(", ");
      rowEl.appendChild(label);

      for (let day = 0; day < grid.num_days; day++) {
        const cell = grid.cells[row][day];
        const bucket = shadeBucket(cell.intensity);
        const cellEl = document.createElement("span");
        cellEl.className = "heatmap-cell";
        cellEl.dataset.row = String(row);
        cellEl.dataset.day = String(day);
        cellEl.dataset.shade = String(bucket);
        cellEl.style.backgroundColor = bucketColor(bucket);
        cellEl.title =
          `${dateForColumn(grid, day)}: ${cell.count} docs, ` +
          `intensity ${cell.intensity.toFixed(3)}`;
        this.attachCellEvents(cellEl, row, day);
        rowEl.appendChild(cellEl);
      }
      table.appendChild(rowEl);
    }
    this.root.appendChild(table);
  }

  private attachCellEvents(el: HTMLElement, row: number, day: number): void {
    el.addEventListener("mousedown", (ev) => {
      ev.preventDefault();
      this.brushAnchor = { row, day };
      this.setSelection(this.regionFrom(this.brushAnchor, { row, day }));
    });
    el.addEventListener("mouseover", () => {
      if (this.brushAnchor !== null) {
        this.setSelection(this.regionFrom(this.brushAnchor, { row, day }));
      }
    });
    el.addEventListener("mouseup", () => {
      if (this.brushAnchor === null) {
        return;
      }
      const anchor = this.brushAnchor;
      this.brushAnchor = null;
      const region = this.regionFrom(anchor, { row, day });
      this.setSelection(region);
      if (anchor.row === row && anchor.day === day) {
        this.callbacks.onCellClick(row, day);
      }
      this.callbacks.onRegionSelect(region);
    });
  }

  private regionFrom(
    a: { row: number; day: number },
    b: { row: number; day: number },
  ): Region {
    return {
      row_lo: Math.min(a.row, b.row),
      row_hi: Math.max(a.row, b.row),
      day_lo: Math.min(a.day, b.day),
      day_hi: Math.max(a.day, b.day),
    };
  }

  private setSelection(region: Region): void {
    this.selection = region;
    const cells = this.root.querySelectorAll<HTMLElement>(".heatmap-cell");
    cells.forEach((cell) => {
      const row = Number(cell.dataset.row);
      const day = Number(cell.dataset.day);
      const selected =
        row >= region.row_lo &&
        row <= region.row_hi &&
        day >= region.day_lo &&
        day <= region.day_hi;
      cell.classList.toggle("selected", selected);
    });
  }
}
