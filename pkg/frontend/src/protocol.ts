// Wire protocol types for the control service (docs/protocol.md, version 1).

export type Phase =
  | "idle"
  | "on_your_marks"
  | "set"
  | "fired"
  | "completed"
  | "false_start"
  | "recalled";

export type Command = "on_your_marks" | "set" | "start" | "recall" | "reset";

export const ALL_PHASES: Phase[] = [
  "idle",
  "on_your_marks",
  "set",
  "fired",
  "completed",
  "false_start",
  "recalled",
];

export const ALL_COMMANDS: Command[] = ["on_your_marks", "set", "start", "recall", "reset"];

// Mirror of the server's transition graph; a command is sendable only when
// the sequencer would accept it from the current phase.
export const LEGAL_TRANSITIONS: ReadonlyArray<readonly [Phase, Command]> = [
  ["idle", "on_your_marks"],
  ["on_your_marks", "set"],
  ["set", "start"],
  ["on_your_marks", "recall"],
  ["set", "recall"],
  ["fired", "recall"],
  ["completed", "reset"],
  ["false_start", "reset"],
  ["recalled", "reset"],
];

export type EventKind =
  | "phase_changed"
  | "stimulus_fired"
  | "rt_recorded"
  | "false_start"
  | "trial_retry"
  | "block_complete"
  | "session_summary";

export interface EventMessage {
  seq: number;
  kind: EventKind;
  t_ms: number | null;
  payload: Record<string, unknown>;
}

export interface RequestFrame {
  id: number;
  kind:
    | "create_session"
    | "command"
    | "mark_retry"
    | "submit_likert"
    | "get_summary"
    | "subscribe";
  payload: Record<string, unknown>;
}

export interface ErrorInfo {
  kind: string;
  message: string;
}

export interface ResponseFrame {
  id: number;
  ok: boolean;
  result?: Record<string, unknown>;
  error?: ErrorInfo;
}

export interface EventFrame {
  kind: "event";
  session_id: string;
  event: EventMessage;
}

export type ServerFrame = ResponseFrame | EventFrame;

export function isEventFrame(frame: ServerFrame): frame is EventFrame {
  return (frame as EventFrame).kind === "event";
}

export interface ConditionStats {
  n: number;
  mean: number;
  sd: number;
}

export interface SummaryResult {
  study: number;
  closed: boolean;
  planned: number;
  progress: Record<string, number>;
  per_condition: Record<string, ConditionStats>;
  last_rt: { condition: string; rt_raw_ms: number; rt_compensated_ms: number } | null;
}

export const LIKERT_MIN = 1;
export const LIKERT_MAX = 7;
