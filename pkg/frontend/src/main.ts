import { ApiClient } from "./api";
import { App, AppElements } from "./app";

function requireElement<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

window.addEventListener("DOMContentLoaded", () => {
  const params = new URLSearchParams(window.location.search);
  const serverBase = params.get("server") ?? "";
  const els: AppElements = {
    heatmap: requireElement("heatmap"),
    question: requireElement("question"),
    samples: requireElement("samples"),
    statusBar: requireElement("status-bar"),
    errorBanner: requireElement("error-banner"),
    retrainButton: requireElement<HTMLButtonElement>("retrain"),
    annotatorInput: requireElement<HTMLInputElement>("annotator"),
  };
  const app = new App(els, new ApiClient(serverBase));
  void app.boot();
});
