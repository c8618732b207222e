// Event-sourced console state. The view derives exclusively from server
// events and acknowledged responses; replaying the same events from seq 1
// (or resuming from lastSeq + 1) reconstructs the identical view.

import { ConditionStats, EventMessage, Phase, SummaryResult } from "./protocol";

export interface FeedItem {
  seq: number;
  kind: string;
  text: string;
}

export interface LikertPrompt {
  participantId: string;
  blockIndex: number;
}

export interface ConsoleState {
  phase: Phase;
  lastSeq: number;
  lastRt: { condition: string; rawMs: number; compensatedMs: number } | null;
  falseStartBanner: boolean;
  progress: { executed: number; valid: number; falseStarts: number; retries: number };
  blocksCompleted: number;
  perCondition: Record<string, ConditionStats>;
  likertPrompt: LikertPrompt | null;
  feed: FeedItem[];
  sessionClosed: boolean;
}

export const FEED_LIMIT = 200;

export function initialState(): ConsoleState {
  return {
    phase: "idle",
    lastSeq: 0,
    lastRt: null,
    falseStartBanner: false,
    progress: { executed: 0, valid: 0, falseStarts: 0, retries: 0 },
    blocksCompleted: 0,
    perCondition: {},
    likertPrompt: null,
    feed: [],
    sessionClosed: false,
  };
}

function pushFeed(state: ConsoleState, seq: number, kind: string, text: string): FeedItem[] {
  const feed = [...state.feed, { seq, kind, text }];
  return feed.length > FEED_LIMIT ? feed.slice(feed.length - FEED_LIMIT) : feed;
}

export function applyEvent(state: ConsoleState, event: EventMessage): ConsoleState {
  if (event.seq <= state.lastSeq) {
    return state; // duplicate delivery; the cursor already passed it
  }
  const next: ConsoleState = { ...state, lastSeq: event.seq };
  const p = event.payload as Record<string, any>;
  switch (event.kind) {
    case "phase_changed": {
      const phase = p.phase as Phase;
      next.phase = phase;
      if (phase === "on_your_marks") {
        next.falseStartBanner = false;
      }
      next.feed = pushFeed(state, event.seq, event.kind, `phase: ${phase}`);
      return next;
    }
    case "stimulus_fired":
      next.feed = pushFeed(state, event.seq, event.kind, `stimulus ${p.device_id}`);
      return next;
    case "rt_recorded":
      next.lastRt = {
        condition: String(p.condition),
        rawMs: Number(p.rt_raw_ms),
        compensatedMs: Number(p.rt_compensated_ms),
      };
      next.progress = {
        ...state.progress,
        executed: state.progress.executed + 1,
        valid: state.progress.valid + 1,
      };
      next.feed = pushFeed(
        state,
        event.seq,
        event.kind,
        `RT ${Number(p.rt_raw_ms).toFixed(1)} ms (${p.condition})`
      );
      return next;
    case "false_start":
      next.falseStartBanner = true;
      next.progress = {
        ...state.progress,
        executed: state.progress.executed + 1,
        falseStarts: state.progress.falseStarts + 1,
      };
      next.feed = pushFeed(state, event.seq, event.kind, `FALSE START (${p.condition})`);
      return next;
    case "trial_retry":
      next.progress = { ...state.progress, retries: state.progress.retries + 1 };
      next.feed = pushFeed(
        state,
        event.seq,
        event.kind,
        `retry marked for record ${p.record_seq}`
      );
      return next;
    case "block_complete":
      next.blocksCompleted = state.blocksCompleted + 1;
      if (p.likert_due) {
        next.likertPrompt = {
          participantId: String(p.participant_id),
          blockIndex: Number(p.block_index),
        };
      }
      next.feed = pushFeed(
        state,
        event.seq,
        event.kind,
        `block ${p.block_index} complete (${p.participant_id})`
      );
      return next;
    case "session_summary":
      next.sessionClosed = true;
      if (p.per_condition) {
        next.perCondition = p.per_condition as Record<string, ConditionStats>;
      }
      next.feed = pushFeed(state, event.seq, event.kind, "session complete");
      return next;
    default:
      return next;
  }
}

export function applyEvents(state: ConsoleState, events: EventMessage[]): ConsoleState {
  let current = state;
  for (const event of events) {
    current = applyEvent(current, event);
  }
  return current;
}

// get_summary acknowledgments refresh the stats table; the console never
// computes statistics locally.
export function applySummary(state: ConsoleState, summary: SummaryResult): ConsoleState {
  return {
    ...state,
    perCondition: summary.per_condition,
    sessionClosed: summary.closed,
  };
}

export function clearLikertPrompt(state: ConsoleState): ConsoleState {
  return { ...state, likertPrompt: null };
}
