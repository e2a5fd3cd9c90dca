/**
 * The pair-question flow: fetch a question for the selected region, show the
 * two documents side by side, and submit exactly one judgment per token.
 *
 * Tokens are single use server-side; this flow additionally guards against
 * double submission client-side, and a failed submission keeps the chosen
 * answer so the annotator can retry without re-deciding.
 */

import { ApiClient, ApiError } from "./api";
import { DocumentRendering, PairLabel, QuestionResponse, Region } from "./types";

export interface QuestionFlowEvents {
  onAnswered?(): void;
  onExhausted?(): void;
  onError?(message: string): void;
}

interface OpenQuestion {
  token: string;
  documents: DocumentRendering[];
}

export class QuestionFlow {
  private open: OpenQuestion | null = null;
  private submitting = false;
  private region: Region | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly annotatorName: () => string,
    private readonly events: QuestionFlowEvents = {},
  ) {}

  get openToken(): string | null {
    return this.open?.token ?? null;
  }

  /** Start (or restart) the flow over a region; at most one open question. */
  async start(region: Region): Promise<void> {
    this.region = region;
    await this.fetchNext();
  }

  private async fetchNext(): Promise<void> {
    if (this.region === null) {
      return;
    }
    let question: QuestionResponse;
    try {
      question = await this.api.question(this.region);
    } catch (err) {
      this.open = null;
      this.renderMessage(`could not fetch a question: ${(err as Error).message}`);
      this.events.onError?.((err as Error).message);
      return;
    }
    if (question.status === "exhausted") {
      this.open = null;
      this.renderMessage("no unasked pairs left in this region");
      this.events.onExhausted?.();
      return;
    }
    this.open = { token: question.token!, documents: question.documents! };
    this.renderQuestion();
  }

  private async submit(label: PairLabel): Promise<void> {
    if (this.open === null || this.submitting) {
      return;
    }
    const { token } = this.open;
    this.submitting = true;
    this.setButtonsEnabled(false);
    try {
      await this.api.judgment(token, label, this.annotatorName());
    } catch (err) {
      this.submitting = false;
      if (err instanceof ApiError && err.status === 400) {
        // token expired server-side: drop it and fetch a fresh pair
        this.open = null;
        await this.fetchNext();
        return;
      }
      // network trouble: keep the question and offer a retry with the answer
      this.renderRetry(label, (err as Error).message);
      return;
    }
    this.submitting = false;
    this.open = null;
    this.events.onAnswered?.();
    await this.fetchNext();
  }

  private async skip(): Promise<void> {
    // no judgment is recorded for a skip; just move on to a new pair
    if (this.submitting) {
      return;
    }
    this.open = null;
    await this.fetchNext();
  }

  private renderQuestion(): void {
    if (this.open === null) {
      return;
    }
    this.root.textContent = "";
    const prompt = document.createElement("p");
    prompt.className = "question-prompt";
    prompt.textContent = "Do these two documents describe the same event?";
    this.root.appendChild(prompt);

    const pair = document.createElement("div");
    pair.className = "question-pair";
    for (const doc of this.open.documents) {
      const card = document.createElement("div");
      card.className = "question-doc";
      const date = document.createElement("div");
      date.className = "question-doc-date";
      date.textContent = doc.date.slice(0, 10);
      const text = document.createElement("div");
      text.className = "question-doc-text";
      text.textContent = doc.text;
      card.appendChild(date);
      card.appendChild(text);
      pair.appendChild(card);
    }
    this.root.appendChild(pair);

    const actions = document.createElement("div");
    actions.className = "question-actions";
    actions.appendChild(
      this.button("same event", "answer-same", () => void this.submit("same-event")),
    );
    actions.appendChild(
      this.button("different events", "answer-different", () =>
        void this.submit("different-event"),
      ),
    );
    actions.appendChild(this.button("skip", "answer-skip", () => void this.skip()));
    this.root.appendChild(actions);
  }

  private renderRetry(label: PairLabel, message: string): void {
    const existing = this.root.querySelector(".question-retry");
    existing?.remove();
    const note = document.createElement("div");
    note.className = "question-retry";
    note.textContent = `submission failed (${message}) `;
    note.appendChild(this.button("retry", "answer-retry", () => void this.submit(label)));
    this.root.appendChild(note);
    this.setButtonsEnabled(true);
  }

  private renderMessage(message: string): void {
    this.root.textContent = "";
    const note = document.createElement("p");
    note.className = "question-notice";
    note.textContent = message;
    this.root.appendChild(note);
  }

  private button(text: string, className: string, onClick: () => void): HTMLButtonElement {
    const el = document.createElement("button");
    el.type = "button";
    el.className = className;
    el.textContent = text;
    el.addEventListener("click", onClick);
    return el;
  }

  private setButtonsEnabled(enabled: boolean): void {
    this.root
      .querySelectorAll<HTMLButtonElement>("button")
      .forEach((el) => (el.disabled = !enabled));
  }
}
