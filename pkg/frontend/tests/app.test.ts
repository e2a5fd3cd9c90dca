// @vitest-environment jsdom
import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import goldenGrid from "./fixtures/golden_grid.json";
import { ApiClient } from "../src/api";
import { App, AppElements } from "../src/app";

function makeElements(): AppElements {
  const container = document.createElement("div");
  container.innerHTML = `
    <div id="error-banner" class="hidden"></div>
    <div id="status-bar"></div>
    <input id="annotator" value="tester">
    <button id="retrain" type="button">retrain</button>
    <div id="heatmap"></div>
    <div id="question"></div>
    <div id="samples"></div>
  `;
  document.body.appendChild(container);
  return {
    heatmap: container.querySelector("#heatmap") as HTMLElement,
    question: container.querySelector("#question") as HTMLElement,
    samples: container.querySelector("#samples") as HTMLElement,
    statusBar: container.querySelector("#status-bar") as HTMLElement,
    errorBanner: container.querySelector("#error-banner") as HTMLElement,
    retrainButton: container.querySelector("#retrain") as HTMLButtonElement,
    annotatorInput: container.querySelector("#annotator") as HTMLInputElement,
  };
}

/** Stub server tracking heatmap fetch counts across a retrain. */
class RetrainStub {
  heatmapFetches = 0;
  version = 0;

  install(): void {
    vi.stubGlobal("fetch", (url: string) => this.handle(String(url)));
  }

  private json(body: unknown): Response {
    return new Response(JSON.stringify(body), {
      status: 200,
      headers: { "Content-Type": "application/json" },
    });
  }

  private async handle(url: string): Promise<Response> {
    if (url.includes("/api/heatmap")) {
      this.heatmapFetches += 1;
      return this.json({
        status: "ok",
        grid: { ...(goldenGrid as object), model_version: this.version },
      });
    }
    if (url.includes("/api/status")) {
      return this.json({
        status: "ok", corpus_loaded: true, num_documents: 10, num_days: 8,
        model_version: this.version, judgment_count: 0, triplet_count: 0,
        training: false,
      });
    }
    if (url.includes("/api/feedback")) {
      return this.json({ status: "ok", num_judgments: 0, satisfied: 0, fraction: null });
    }
    if (url.includes("/api/retrain")) {
      this.version += 1;
      return this.json({ status: "ok", model_version: this.version });
    }
    throw new Error(`unexpected url ${url}`);
  }
}

describe("app retrain behavior", () => {
  let stub: RetrainStub;
  let els: AppElements;

  beforeEach(() => {
    stub = new RetrainStub();
    stub.install();
    els = makeElements();
  });

  afterEach(() => {
    vi.unstubAllGlobals();
    document.body.textContent = "";
  });

  it("refetches the heatmap exactly once per completed retrain", async () => {
    const app = new App(els, new ApiClient(""));
    await app.boot();
    expect(stub.heatmapFetches).toBe(1);

    els.retrainButton.click();
    await vi.waitFor(() => {
      expect(stub.heatmapFetches).toBe(2);
    });
    // displayed version strictly increased and no extra refetches happen
    await new Promise((resolve) => setTimeout(resolve, 20));
    expect(stub.heatmapFetches).toBe(2);
    expect(els.statusBar.textContent).toContain("model v1");
    expect(els.retrainButton.disabled).toBe(false);
  });
});
