/** Wire types mirrored from the server's JSON responses. */

export interface CellExport {
  count: number;
  intensity: number;
  doc_ids: string[];
}

export interface GridExport {
  num_rows: number;
  num_days: number;
  epoch_day0: number;
  model_version: number;
  row_labels: [string, number][][];
  cells: CellExport[][];
}

export interface HeatmapResponse {
  status: string;
  grid: GridExport;
}

export interface DocumentRendering {
  id: string;
  text: string;
  date: string;
  timestamp: number;
  source: string | null;
}

export interface QuestionResponse {
  status: "ok" | "exhausted";
  token?: string;
  documents?: DocumentRendering[];
  model_version: number;
}

export interface JudgmentAck {
  status: string;
  judgment_count: number;
  triplet_count: number;
}

export interface RetrainResponse {
  status: string;
  model_version: number;
}

export interface CellSampleResponse {
  status: string;
  doc_ids: string[];
  documents: DocumentRendering[];
  model_version: number;
}

export interface FeedbackReport {
  status: string;
  num_judgments: number;
  satisfied: number;
  fraction: number | null;
  model_version?: number;
}

export interface StatusResponse {
  status: string;
  corpus_loaded: boolean;
  num_documents?: number;
  num_days?: number;
  model_version?: number;
  judgment_count?: number;
  triplet_count?: number;
  training?: boolean;
}

export interface Region {
  row_lo: number;
  row_hi: number;
  day_lo: number;
  day_hi: number;
}

export type PairLabel = "same-event" | "different-event";
