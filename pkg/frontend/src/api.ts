/** Thin typed client over the service wire API. */

import {
  CellSampleResponse,
  FeedbackReport,
  HeatmapResponse,
  JudgmentAck,
  PairLabel,
  QuestionResponse,
  Region,
  RetrainResponse,
  StatusResponse,
} from "./types";

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.baseUrl + path, init);
    const body = await resp.json();
    if (!resp.ok) {
      throw new ApiError(body.error ?? `request failed: ${resp.status}`, resp.status);
    }
    return body as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  status(): Promise<StatusResponse> {
    return this.request<StatusResponse>("/api/status");
  }

  heatmap(m?: number): Promise<HeatmapResponse> {
    const suffix = m === undefined ? "" : `?m=${m}`;
    return this.request<HeatmapResponse>(`/api/heatmap${suffix}`);
  }

  cellSample(row: number, day: number, n: number): Promise<CellSampleResponse> {
    return this.request<CellSampleResponse>(
      `/api/cell_sample?row=${row}&day=${day}&n=${n}`,
    );
  }

  question(region: Region): Promise<QuestionResponse> {
    return this.post<QuestionResponse>("/api/question", region);
  }

  judgment(token: string, label: PairLabel, annotator: string): Promise<JudgmentAck> {
    return this.post<JudgmentAck>("/api/judgment", { token, label, annotator });
  }

  retrain(): Promise<RetrainResponse> {
    return this.post<RetrainResponse>("/api/retrain", {});
  }

  feedback(): Promise<FeedbackReport> {
    return this.request<FeedbackReport>("/api/feedback");
  }
}
