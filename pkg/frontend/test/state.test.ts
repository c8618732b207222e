import { describe, expect, it } from "vitest";
import { EventMessage } from "../src/protocol";
import { applyEvent, applyEvents, applySummary, initialState } from "../src/state";

let seq = 0;
function event(kind: EventMessage["kind"], payload: Record<string, unknown>, t = 1000): EventMessage {
  seq += 1;
  return { seq, kind, t_ms: t, payload };
}

function sampleSession(): EventMessage[] {
  seq = 0;
  return [
    event("phase_changed", { phase: "on_your_marks" }),
    event("stimulus_fired", { device_id: "led-marks" }),
    event("phase_changed", { phase: "set" }),
    event("stimulus_fired", { device_id: "led-set" }),
    event("phase_changed", { phase: "fired" }),
    event("stimulus_fired", { device_id: "push-2.0-first-joint" }),
    event("rt_recorded", {
      condition: "push-2.0-first-joint",
      rt_raw_ms: 353.7,
      rt_compensated_ms: 345.0,
      record_seq: 1,
    }),
    event("phase_changed", { phase: "completed" }),
    event("block_complete", { participant_id: "P1", block_index: 8, likert_due: true }),
    event("phase_changed", { phase: "idle" }),
  ];
}

describe("event-sourced console state", () => {
  it("tracks phase, RT and progress through one trial", () => {
    const state = applyEvents(initialState(), sampleSession());
    expect(state.phase).toBe("idle");
    expect(state.lastRt).toEqual({
      condition: "push-2.0-first-joint",
      rawMs: 353.7,
      compensatedMs: 345.0,
    });
    expect(state.progress.executed).toBe(1);
    expect(state.progress.valid).toBe(1);
    expect(state.blocksCompleted).toBe(1);
    expect(state.lastSeq).toBe(10);
  });

  it("reconnect from lastSeq restores the identical view", () => {
    const events = sampleSession();
    const full = applyEvents(initialState(), events);
    // disconnect after 4 events, resubscribe from lastSeq + 1
    const before = applyEvents(initialState(), events.slice(0, 4));
    const resumed = applyEvents(before, events.slice(4));
    expect(resumed).toEqual(full);
  });

  it("full replay from seq 1 equals incremental application", () => {
    const events = sampleSession();
    let incremental = initialState();
    for (const e of events) incremental = applyEvent(incremental, e);
    expect(applyEvents(initialState(), events)).toEqual(incremental);
  });

  it("duplicate deliveries are ignored", () => {
    const events = sampleSession();
    const state = applyEvents(initialState(), events);
    const duplicated = applyEvents(state, events.slice(2, 6));
    expect(duplicated).toEqual(state);
  });

  it("likert prompt fires only on likert_due blocks", () => {
    seq = 0;
    const none = applyEvent(
      initialState(),
      event("block_complete", { participant_id: "P1", block_index: 7, likert_due: false })
    );
    expect(none.likertPrompt).toBeNull();
    const due8 = applyEvent(
      none,
      event("block_complete", { participant_id: "P1", block_index: 8, likert_due: true })
    );
    expect(due8.likertPrompt).toEqual({ participantId: "P1", blockIndex: 8 });
    const due16 = applyEvent(
      due8,
      event("block_complete", { participant_id: "P1", block_index: 16, likert_due: true })
    );
    expect(due16.likertPrompt).toEqual({ participantId: "P1", blockIndex: 16 });
  });

  it("false start raises the banner until the next arming", () => {
    seq = 0;
    let state = applyEvent(
      initialState(),
      event("false_start", { condition: "led-start", record_seq: 3 })
    );
    expect(state.falseStartBanner).toBe(true);
    expect(state.progress.falseStarts).toBe(1);
    state = applyEvent(state, event("phase_changed", { phase: "on_your_marks" }));
    expect(state.falseStartBanner).toBe(false);
  });

  it("summary acknowledgments replace the stats table verbatim", () => {
    const state = applySummary(initialState(), {
      study: 2,
      closed: false,
      planned: 960,
      progress: {},
      per_condition: {
        "led-start": { n: 480, mean: 368.0, sd: 55.8 },
        "push-2.0-first-joint": { n: 480, mean: 353.7, sd: 40.7 },
      },
      last_rt: null,
    });
    expect(Object.keys(state.perCondition)).toHaveLength(2);
    expect(state.perCondition["led-start"].mean).toBe(368.0);
  });

  it("session summary event closes the session view", () => {
    seq = 0;
    const state = applyEvent(
      initialState(),
      event("session_summary", { per_condition: { x: { n: 1, mean: 2, sd: 0 } } })
    );
    expect(state.sessionClosed).toBe(true);
    expect(state.perCondition.x.n).toBe(1);
  });

  it("feed is bounded", () => {
    seq = 0;
    let state = initialState();
    for (let i = 0; i < 400; i++) {
      state = applyEvent(state, event("stimulus_fired", { device_id: `d${i}` }));
    }
    expect(state.feed.length).toBeLessThanOrEqual(200);
    expect(state.feed[state.feed.length - 1].seq).toBe(400);
  });
});
