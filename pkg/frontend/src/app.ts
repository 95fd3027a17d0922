/** Single-page labeling interface.
 *
 * Shows eight anonymous layout renderings of one graph in a responsive
 * grid.  The annotator hearts exactly one slot, optionally flags the task
 * as hard, and submits; skipped tasks go back to the server's personal
 * queue.  No algorithm names or ordering hints ever appear in the DOM —
 * slots are identified only by their 1-based position.
 */

import { ApiClient, Task } from "./api.js";

const TUTORIAL_KEY = "gdpref.tutorial.done";
const ANNOTATOR_KEY = "gdpref.annotator";

const TUTORIAL_TEXT = [
  "Welcome! You will be shown eight different drawings of the same graph.",
  "Click the heart under the drawing you find most aesthetically pleasing, then press Submit.",
  'If the decision is difficult, tick "Is this hard?" before submitting.',
  "You may skip a task; skipped graphs will come back later.",
].join(" ");

export interface AppOptions {
  root: HTMLElement;
  annotator?: string;
  baseUrl?: string;
  fetchFn?: typeof fetch;
  storage?: Storage;
  now?: () => number;
  /** Timer repaint interval in ms; 0 disables the interval (tests call tick()). */
  timerIntervalMs?: number;
}

type Screen = "idle" | "task" | "done";

export class LabelApp {
  readonly api: ApiClient;
  private readonly root: HTMLElement;
  private readonly storage: Storage;
  private readonly now: () => number;
  private readonly timerIntervalMs: number;

  annotator: string | null;
  task: Task | null = null;
  selection: number | null = null; // 0-based slot index
  busy = false;
  screen: Screen = "idle";
  private startedAt = 0;
  private timerHandle: ReturnType<typeof setInterval> | null = null;
  private pendingRetry: (() => Promise<void>) | null = null;

  constructor(opts: AppOptions) {
    this.root = opts.root;
    this.storage = opts.storage ?? window.localStorage;
    this.now = opts.now ?? (() => Date.now());
    this.timerIntervalMs = opts.timerIntervalMs ?? 250;
    this.api = new ApiClient(opts.baseUrl ?? "", opts.fetchFn);
    this.annotator = opts.annotator ?? this.storage.getItem(ANNOTATOR_KEY);
  }

  async start(): Promise<void> {
    if (!this.annotator) {
      this.renderSignIn();
      return;
    }
    if (!this.storage.getItem(TUTORIAL_KEY)) {
      this.renderTutorial();
      return;
    }
    await this.loadNext();
  }

  /** Advance the elapsed-time readout; also called by the interval. */
  tick(): void {
    const el = this.root.querySelector<HTMLElement>('[data-testid="timer"]');
    if (el && this.screen === "task") {
      const seconds = Math.floor((this.now() - this.startedAt) / 1000);
      el.textContent = `Elapsed: ${seconds}s`;
    }
  }

  // -- screens ---------------------------------------------------------------

  private renderSignIn(): void {
    this.stopTimer();
    this.root.innerHTML = "";
    const form = document.createElement("form");
    form.setAttribute("data-testid", "signin");
    const label = document.createElement("label");
    label.textContent = "Annotator name: ";
    const input = document.createElement("input");
    input.type = "text";
    input.name = "annotator";
    input.required = true;
    input.setAttribute("data-testid", "annotator-input");
    label.appendChild(input);
    const go = document.createElement("button");
    go.type = "submit";
    go.textContent = "Start labeling";
    form.append(label, go);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const name = input.value.trim();
      if (!name) return;
      this.annotator = name;
      this.storage.setItem(ANNOTATOR_KEY, name);
      void this.start();
    });
    this.root.appendChild(form);
    input.focus();
  }

  private renderTutorial(): void {
    this.stopTimer();
    this.root.innerHTML = "";
    const dialog = document.createElement("section");
    dialog.setAttribute("role", "dialog");
    dialog.setAttribute("aria-label", "tutorial");
    dialog.setAttribute("data-testid", "tutorial");
    const text = document.createElement("p");
    text.textContent = TUTORIAL_TEXT;
    const ok = document.createElement("button");
    ok.type = "button";
    ok.textContent = "Got it";
    ok.setAttribute("data-testid", "tutorial-ok");
    ok.addEventListener("click", () => {
      this.storage.setItem(TUTORIAL_KEY, "1");
      void this.loadNext();
    });
    dialog.append(text, ok);
    this.root.appendChild(dialog);
    ok.focus();
  }

  private renderDone(): void {
    this.stopTimer();
    this.screen = "done";
    this.task = null;
    this.root.innerHTML = "";
    const done = document.createElement("section");
    done.setAttribute("data-testid", "done");
    const p = document.createElement("p");
    p.textContent = "All done — there are no more graphs for you to label. Thank you!";
    done.appendChild(p);
    this.root.appendChild(done);
  }

  private renderTask(task: Task): void {
    this.stopTimer();
    this.task = task;
    this.selection = null;
    this.screen = "task";
    this.pendingRetry = null;
    this.root.innerHTML = "";

    const banner = document.createElement("header");
    banner.setAttribute("data-testid", "banner");
    const progress = document.createElement("span");
    progress.setAttribute("data-testid", "progress");
    progress.textContent = `Labeled so far: ${task.progress.labeled}`;
    const timer = document.createElement("span");
    timer.setAttribute("data-testid", "timer");
    timer.setAttribute("aria-live", "off");
    timer.textContent = "Elapsed: 0s";
    banner.append(progress, " · ", timer);

    const grid = document.createElement("section");
    grid.className = "grid";
    grid.setAttribute("role", "group");
    grid.setAttribute("aria-label", "eight layout choices");
    grid.setAttribute("data-testid", "grid");
    task.images.forEach((b64, index) => {
      const slot = document.createElement("figure");
      slot.className = "slot";
      const img = document.createElement("img");
      img.src = `data:image/png;base64,${b64}`;
      img.alt = `layout option ${index + 1}`;
      const heart = document.createElement("button");
      heart.type = "button";
      heart.className = "heart";
      heart.textContent = "♡"; // outlined heart
      heart.setAttribute("aria-pressed", "false");
      heart.setAttribute("aria-label", `select layout ${index + 1}`);
      heart.setAttribute("data-testid", `heart-${index + 1}`);
      heart.addEventListener("click", () => this.selectSlot(index));
      slot.append(img, heart);
      grid.appendChild(slot);
    });

    const controls = document.createElement("footer");
    controls.setAttribute("data-testid", "controls");
    const hardLabel = document.createElement("label");
    const hard = document.createElement("input");
    hard.type = "checkbox";
    hard.setAttribute("data-testid", "hard");
    hardLabel.append(hard, " Is this hard?");
    const skip = document.createElement("button");
    skip.type = "button";
    skip.textContent = "Skip";
    skip.setAttribute("data-testid", "skip");
    skip.addEventListener("click", () => void this.skip());
    const submit = document.createElement("button");
    submit.type = "button";
    submit.textContent = "Submit";
    submit.disabled = true;
    submit.setAttribute("data-testid", "submit");
    submit.addEventListener("click", () => void this.submit());
    controls.append(hardLabel, skip, submit);

    this.root.append(banner, grid, controls);
    this.startedAt = this.now();
    if (this.timerIntervalMs > 0) {
      this.timerHandle = setInterval(() => this.tick(), this.timerIntervalMs);
    }
  }

  // -- interactions -----------------------------------------------------------

  selectSlot(index: number): void {
    if (this.busy || this.screen !== "task") return;
    this.selection = index;
    this.root.querySelectorAll<HTMLButtonElement>(".heart").forEach((btn, i) => {
      const active = i === index;
      btn.setAttribute("aria-pressed", active ? "true" : "false");
      btn.textContent = active ? "♥" : "♡";
    });
    const submit = this.root.querySelector<HTMLButtonElement>('[data-testid="submit"]');
    if (submit) submit.disabled = false;
  }

  async submit(): Promise<void> {
    if (this.busy || this.screen !== "task" || this.selection === null || !this.task) return;
    const task = this.task;
    const position = this.selection + 1;
    const hard =
      this.root.querySelector<HTMLInputElement>('[data-testid="hard"]')?.checked ?? false;
    const duration = Math.max(0, Math.round(this.now() - this.startedAt));
    await this.mutate(async () => {
      const reply = await this.api.label({
        annotator: this.annotator!,
        graph_id: task.graph_id,
        position,
        duration_ms: duration,
        hard,
        display_token: task.display_token,
      });
      await this.loadNext();
      if (reply.message) this.showPopup(reply.message);
    });
  }

  async skip(): Promise<void> {
    if (this.busy || this.screen !== "task" || !this.task) return;
    const task = this.task;
    await this.mutate(async () => {
      await this.api.skip({
        annotator: this.annotator!,
        graph_id: task.graph_id,
        display_token: task.display_token,
      });
      await this.loadNext();
    });
  }

  async loadNext(): Promise<void> {
    const task = await this.api.next(this.annotator!);
    if (task === null) {
      this.renderDone();
    } else {
      this.renderTask(task);
    }
  }

  /** Run one mutation with controls disabled; on failure show a retry
   * banner and preserve the current selection. */
  private async mutate(action: () => Promise<void>): Promise<void> {
    this.busy = true;
    this.setControlsDisabled(true);
    try {
      await action();
      this.busy = false;
    } catch {
      this.busy = false;
      this.setControlsDisabled(false);
      this.pendingRetry = action;
      this.showRetryBanner();
    }
  }

  retry(): Promise<void> {
    const action = this.pendingRetry;
    this.pendingRetry = null;
    this.root.querySelector('[data-testid="retry-banner"]')?.remove();
    if (!action) return Promise.resolve();
    return this.mutate(action);
  }

  private setControlsDisabled(disabled: boolean): void {
    this.root
      .querySelectorAll<HTMLButtonElement>(
        '[data-testid="skip"], [data-testid="submit"], .heart',
      )
      .forEach((btn) => {
        btn.disabled = disabled;
      });
    const submit = this.root.querySelector<HTMLButtonElement>('[data-testid="submit"]');
    if (!disabled && submit) submit.disabled = this.selection === null;
  }

  private showPopup(message: string): void {
    const popup = document.createElement("div");
    popup.setAttribute("role", "dialog");
    popup.setAttribute("aria-label", "progress");
    popup.setAttribute("data-testid", "popup");
    const text = document.createElement("p");
    text.textContent = message;
    const close = document.createElement("button");
    close.type = "button";
    close.textContent = "Keep going";
    close.setAttribute("data-testid", "popup-close");
    close.addEventListener("click", () => popup.remove());
    popup.append(text, close);
    this.root.appendChild(popup);
    close.focus();
  }

  private showRetryBanner(): void {
    this.root.querySelector('[data-testid="retry-banner"]')?.remove();
    const banner = document.createElement("div");
    banner.setAttribute("role", "alert");
    banner.setAttribute("data-testid", "retry-banner");
    const text = document.createElement("span");
    text.textContent = "Network problem — your selection is preserved. ";
    const button = document.createElement("button");
    button.type = "button";
    button.textContent = "Retry";
    button.setAttribute("data-testid", "retry");
    button.addEventListener("click", () => void this.retry());
    banner.append(text, button);
    this.root.appendChild(banner);
  }

  private stopTimer(): void {
    if (this.timerHandle !== null) {
      clearInterval(this.timerHandle);
      this.timerHandle = null;
    }
  }
}
