// WebSocket client: request/response correlation, event subscription and
// gap-free reconnect. Rendering happens on acknowledgment or event only.

import {
  Command,
  EventMessage,
  LIKERT_MAX,
  LIKERT_MIN,
  RequestFrame,
  ResponseFrame,
  ServerFrame,
  isEventFrame,
} from "./protocol";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onopen: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

interface Pending {
  resolve: (frame: ResponseFrame) => void;
  reject: (err: Error) => void;
}

export class RequestError extends Error {
  constructor(public kind: string, message: string) {
    super(message);
  }
}

export class ConsoleClient {
  private socket: SocketLike | null = null;
  private nextId = 1;
  private pending = new Map<number, Pending>();
  private sessionId: string | null = null;
  private lastSeq = 0;
  private eventHandler: ((event: EventMessage) => void) | null = null;

  constructor(private url: string, private factory: SocketFactory) {}

  onEvent(handler: (event: EventMessage) => void): void {
    this.eventHandler = handler;
  }

  get currentSessionId(): string | null {
    return this.sessionId;
  }

  get lastSeenSeq(): number {
    return this.lastSeq;
  }

  connect(): Promise<void> {
    return new Promise((resolve) => {
      const socket = this.factory(this.url);
      this.socket = socket;
      socket.onopen = () => resolve();
      socket.onmessage = (message) => this.handleFrame(JSON.parse(message.data) as ServerFrame);
      socket.onclose = () => {
        for (const pending of this.pending.values()) {
          pending.reject(new RequestError("disconnected", "socket closed"));
        }
        this.pending.clear();
      };
    });
  }

  // Resubscribing from lastSeq + 1 after a drop resumes the stream with no
  // gaps and no duplicates; the reducer ignores anything already applied.
  async reconnect(): Promise<void> {
    await this.connect();
    if (this.sessionId !== null) {
      await this.subscribe(this.sessionId, this.lastSeq + 1);
    }
  }

  private handleFrame(frame: ServerFrame): void {
    if (isEventFrame(frame)) {
      if (frame.event.seq > this.lastSeq) {
        this.lastSeq = frame.event.seq;
      }
      this.eventHandler?.(frame.event);
      return;
    }
    const pending = this.pending.get(frame.id);
    if (pending) {
      this.pending.delete(frame.id);
      pending.resolve(frame);
    }
  }

  private request(kind: RequestFrame["kind"], payload: Record<string, unknown>): Promise<ResponseFrame> {
    const socket = this.socket;
    if (!socket) {
      return Promise.reject(new RequestError("disconnected", "not connected"));
    }
    const id = this.nextId++;
    const frame: RequestFrame = { id, kind, payload };
    return new Promise((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
      socket.send(JSON.stringify(frame));
    });
  }

  private async requestOk(
    kind: RequestFrame["kind"],
    payload: Record<string, unknown>
  ): Promise<Record<string, unknown>> {
    const frame = await this.request(kind, payload);
    if (!frame.ok) {
      throw new RequestError(frame.error?.kind ?? "error", frame.error?.message ?? "request failed");
    }
    return frame.result ?? {};
  }

  async createSession(config: Record<string, unknown>): Promise<string> {
    const result = await this.requestOk("create_session", { config });
    this.sessionId = String(result.session_id);
    this.lastSeq = 0;
    return this.sessionId;
  }

  async subscribe(sessionId: string, fromSeq = 0): Promise<void> {
    this.sessionId = sessionId;
    await this.requestOk("subscribe", { session_id: sessionId, from_seq: fromSeq });
  }

  async issueCommand(command: Command): Promise<Record<string, unknown>> {
    return this.requestOk("command", { session_id: this.sessionId, command });
  }

  async markRetry(recordSeq?: number): Promise<Record<string, unknown>> {
    return this.requestOk("mark_retry", {
      session_id: this.sessionId,
      record_seq: recordSeq ?? null,
    });
  }

  async submitLikert(
    participantId: string,
    blockIndex: number,
    answers: Record<string, number>
  ): Promise<Record<string, unknown>> {
    for (const [question, value] of Object.entries(answers)) {
      if (!Number.isInteger(value) || value < LIKERT_MIN || value > LIKERT_MAX) {
        // blocked client-side before anything reaches the wire
        throw new RequestError(
          "likert_range",
          `${question}: response ${value} outside ${LIKERT_MIN}..${LIKERT_MAX}`
        );
      }
    }
    return this.requestOk("submit_likert", {
      session_id: this.sessionId,
      participant_id: participantId,
      block_index: blockIndex,
      answers,
    });
  }

  async getSummary(): Promise<Record<string, unknown>> {
    return this.requestOk("get_summary", { session_id: this.sessionId });
  }
}
