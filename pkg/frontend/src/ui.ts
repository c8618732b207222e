// DOM rendering for the operator console. Large high-contrast phase states,
// no audio cues anywhere.

import { ConsoleClient, RequestError } from "./client";
import { enabledCommands } from "./enablement";
import { ALL_COMMANDS, Command } from "./protocol";
import { ConsoleState, applyEvent, applySummary, clearLikertPrompt, initialState } from "./state";

const PHASE_COLORS: Record<string, string> = {
  idle: "#444",
  on_your_marks: "#b71c1c",
  set: "#f9a825",
  fired: "#1b5e20",
  completed: "#1565c0",
  false_start: "#d50000",
  recalled: "#6a1b9a",
};

const LIKERT_QUESTIONS = [
  "ease_recognition_led",
  "ease_recognition_push",
  "easier_to_recognize",
  "easier_to_start",
  "future_potential",
];

export class ConsoleUI {
  private state: ConsoleState = initialState();

  constructor(private root: HTMLElement, private client: ConsoleClient) {
    client.onEvent((event) => {
      this.state = applyEvent(this.state, event);
      this.render();
    });
  }

  private async send(command: Command): Promise<void> {
    try {
      await this.client.issueCommand(command);
      const summary = await this.client.getSummary();
      this.state = applySummary(this.state, summary as never);
    } catch (err) {
      this.toast(err instanceof RequestError ? `${err.kind}: ${err.message}` : String(err));
    }
    this.render();
  }

  private async retry(): Promise<void> {
    try {
      await this.client.markRetry();
    } catch (err) {
      this.toast(err instanceof RequestError ? `${err.kind}: ${err.message}` : String(err));
    }
  }

  private async submitLikert(form: HTMLFormElement): Promise<void> {
    const prompt = this.state.likertPrompt;
    if (!prompt) return;
    const answers: Record<string, number> = {};
    for (const question of LIKERT_QUESTIONS) {
      const input = form.elements.namedItem(question) as HTMLSelectElement | null;
      if (input && input.value !== "") {
        answers[question] = Number(input.value);
      }
    }
    try {
      await this.client.submitLikert(prompt.participantId, prompt.blockIndex, answers);
      this.state = clearLikertPrompt(this.state);
    } catch (err) {
      this.toast(err instanceof RequestError ? `${err.kind}: ${err.message}` : String(err));
    }
    this.render();
  }

  private toast(message: string): void {
    const el = document.createElement("div");
    el.className = "toast";
    el.textContent = message;
    this.root.appendChild(el);
    setTimeout(() => el.remove(), 4000);
  }

  render(): void {
    const s = this.state;
    const enabled = new Set(enabledCommands(s.phase));
    const phaseEl = this.root.querySelector("#phase") as HTMLElement;
    phaseEl.textContent = s.phase.replace(/_/g, " ").toUpperCase();
    phaseEl.style.background = PHASE_COLORS[s.phase] ?? "#444";

    const banner = this.root.querySelector("#false-start-banner") as HTMLElement;
    banner.style.display = s.falseStartBanner ? "block" : "none";

    for (const command of ALL_COMMANDS) {
      const button = this.root.querySelector(`#cmd-${command}`) as HTMLButtonElement;
      button.disabled = !enabled.has(command) || s.sessionClosed;
      button.onclick = () => void this.send(command);
    }
    (this.root.querySelector("#mark-retry") as HTMLButtonElement).onclick = () =>
      void this.retry();

    const rt = this.root.querySelector("#last-rt") as HTMLElement;
    rt.textContent = s.lastRt
      ? `${s.lastRt.rawMs.toFixed(1)} ms raw / ${s.lastRt.compensatedMs.toFixed(1)} ms compensated (${s.lastRt.condition})`
      : "no reaction yet";

    const progress = this.root.querySelector("#progress") as HTMLElement;
    progress.textContent =
      `${s.progress.executed} trials (${s.progress.valid} valid, ` +
      `${s.progress.falseStarts} false starts, ${s.progress.retries} retries), ` +
      `${s.blocksCompleted} blocks done`;

    const table = this.root.querySelector("#stats tbody") as HTMLElement;
    table.innerHTML = "";
    for (const [condition, stats] of Object.entries(s.perCondition)) {
      const row = document.createElement("tr");
      row.innerHTML = `<td>${condition}</td><td>${stats.n}</td><td>${stats.mean.toFixed(1)}</td><td>${stats.sd.toFixed(1)}</td>`;
      table.appendChild(row);
    }

    const feed = this.root.querySelector("#feed") as HTMLElement;
    feed.innerHTML = "";
    for (const item of s.feed.slice(-30).reverse()) {
      const li = document.createElement("li");
      li.textContent = `#${item.seq} ${item.text}`;
      feed.appendChild(li);
    }

    const likert = this.root.querySelector("#likert") as HTMLElement;
    if (s.likertPrompt) {
      likert.style.display = "block";
      (likert.querySelector("#likert-title") as HTMLElement).textContent =
        `Questionnaire after block ${s.likertPrompt.blockIndex} (${s.likertPrompt.participantId})`;
      const form = likert.querySelector("form") as HTMLFormElement;
      form.onsubmit = (e) => {
        e.preventDefault();
        void this.submitLikert(form);
      };
    } else {
      likert.style.display = "none";
    }
  }
}

export async function boot(root: HTMLElement): Promise<void> {
  const url = `ws://${location.host}/ws`;
  const client = new ConsoleClient(url, (u) => new WebSocket(u) as never);
  await client.connect();
  const ui = new ConsoleUI(root, client);
  const connect = root.querySelector("#connect-form") as HTMLFormElement;
  connect.onsubmit = async (e) => {
    e.preventDefault();
    const sessionInput = connect.elements.namedItem("session") as HTMLInputElement;
    await client.subscribe(sessionInput.value.trim(), 0);
    ui.render();
  };
  ui.render();
}
