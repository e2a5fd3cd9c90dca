/**
 * Single-page annotator app: heatmap overview, cell samples, pair questions,
 * retraining, and feedback status. All statistics come from the server; the
 * client renders and never recomputes them.
 */

import { ApiClient } from "./api";
import { HeatmapView } from "./heatmapView";
import { QuestionFlow } from "./questionFlow";
import { GridExport, Region } from "./types";

export interface AppElements {
  heatmap: HTMLElement;
  question: HTMLElement;
  samples: HTMLElement;
  statusBar: HTMLElement;
  errorBanner: HTMLElement;
  retrainButton: HTMLButtonElement;
  annotatorInput: HTMLInputElement;
}

export class App {
  private readonly heatmapView: HeatmapView;
  private readonly questionFlow: QuestionFlow;
  private currentVersion = -1;
  private retraining = false;

  constructor(
    private readonly els: AppElements,
    private readonly api: ApiClient,
  ) {
    this.heatmapView = new HeatmapView(els.heatmap, {
      onCellClick: (row, day) => void this.showCellSample(row, day),
      onRegionSelect: (region) => void this.startQuestions(region),
    });
    this.questionFlow = new QuestionFlow(
      els.question,
      api,
      () => els.annotatorInput.value || "anonymous",
      {
        onAnswered: () => void this.refreshStatus(),
        onError: (message) => this.showError(message),
      },
    );
    els.retrainButton.addEventListener("click", () => void this.retrain());
  }

  async boot(): Promise<void> {
    await this.refreshHeatmap();
    await this.refreshStatus();
  }

  private showError(message: string): void {
    this.els.errorBanner.textContent = message;
    this.els.errorBanner.classList.remove("hidden");
  }

  private clearError(): void {
    this.els.errorBanner.textContent = "";
    this.els.errorBanner.classList.add("hidden");
  }

  /** Fetch and render the current grid; a malformed response keeps the old view. */
  async refreshHeatmap(): Promise<void> {
    let grid: GridExport;
    try {
      const response = await this.api.heatmap();
      grid = response.grid;
      this.heatmapView.render(grid);
    } catch (err) {
      this.showError(`heatmap unavailable: ${(err as Error).message}`);
      return;
    }
    this.clearError();
    this.currentVersion = grid.model_version;
  }

  async refreshStatus(): Promise<void> {
    try {
      const [status, feedback] = await Promise.all([
        this.api.status(),
        this.api.feedback(),
      ]);
      const parts = [];
      if (status.corpus_loaded) {
        parts.push(`${status.num_documents} documents over ${status.num_days} days`);
        parts.push(`model v${status.model_version}`);
        parts.push(`${status.judgment_count} judgments (${status.triplet_count} triplets)`);
      } else {
        parts.push("no corpus loaded");
      }
      if (feedback.fraction !== null) {
        parts.push(`feedback satisfied: ${(feedback.fraction * 100).toFixed(0)}%`);
      }
      this.els.statusBar.textContent = parts.join(" | ");
    } catch (err) {
      this.showError(`status unavailable: ${(err as Error).message}`);
    }
  }

  private async startQuestions(region: Region): Promise<void> {
    await this.questionFlow.start(region);
  }

  private async showCellSample(row: number, day: number): Promise<void> {
    try {
      const sample = await this.api.cellSample(row, day, 10);
      this.els.samples.textContent = "";
      const heading = document.createElement("h3");
      heading.textContent = `cell (row ${row}, day ${day}): ${sample.doc_ids.length} sampled`;
      this.els.samples.appendChild(heading);
      for (const doc of sample.documents) {
        const item = document.createElement("div");
        item.className = "sample-doc";
        const date = document.createElement("span");
        date.className = "sample-date";
        date.textContent = doc.date.slice(0, 10);
        const text = document.createElement("span");
        text.className = "sample-text";
        text.textContent = ` ${doc.text}`;
        item.appendChild(date);
        item.appendChild(text);
        this.els.samples.appendChild(item);
      }
    } catch (err) {
      this.showError(`cell sample unavailable: ${(err as Error).message}`);
    }
  }

  /**
   * Kick off retraining; the button stays disabled with a spinner until the
   * new model version arrives, then the heatmap refetches exactly once.
   */
  private async retrain(): Promise<void> {
    if (this.retraining) {
      return;
    }
    this.retraining = true;
    this.els.retrainButton.disabled = true;
    this.els.retrainButton.classList.add("spinning");
    try {
      const result = await this.api.retrain();
      if (result.model_version > this.currentVersion) {
        await this.refreshHeatmap();
        await this.refreshStatus();
      }
    } catch (err) {
      this.showError(`retrain failed: ${(err as Error).message}`);
    } finally {
      this.retraining = false;
      this.els.retrainButton.disabled = false;
      this.els.retrainButton.classList.remove("spinning");
    }
  }
}
