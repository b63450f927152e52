/**
 * Client state machine. Pure reducers, no I/O.
 *
 * Server-authoritative by construction: the avatar's rendered position is
 * read exclusively from the latest snapshot the server delivered. Sending
 * an action never moves anything locally; there is no prediction to roll
 * back. At most one action may be outstanding (un-acked) at a time.
 */

import {
  NetworkDoc,
  ServerFrame,
  Snapshot,
  actionIndexFor,
  neighborTable,
} from "./protocol.js";

export type ConnectionStatus =
  | "connecting"
  | "joined"
  | "spectator"
  | "closed";

export interface ClientState {
  status: ConnectionStatus;
  network: NetworkDoc | null;
  neighbors: Map<number, number[]>;
  agentId: number | null;
  latestSnapshot: Snapshot | null;
  skippedTotal: number;
  pendingAction: number | null;
  phase: string;
  banner: string | null;
  refinedReport: unknown | null;
}

export function initialState(): ClientState {
  return {
    status: "connecting",
    network: null,
    neighbors: new Map(),
    agentId: null,
    latestSnapshot: null,
    skippedTotal: 0,
    pendingAction: null,
    phase: "deductive",
    banner: null,
    refinedReport: null,
  };
}

/** Apply one server frame; returns a new state (inputs untouched). */
export function applyFrame(state: ClientState, frame: ServerFrame): ClientState {
  switch (frame.type) {
    case "joined":
      return {
        ...state,
        status: "joined",
        agentId: frame.agent_id,
        network: frame.network,
        neighbors: neighborTable(frame.network),
        banner: null,
      };
    case "tick": {
      const snapshot = frame.snapshot;
      const stale =
        state.latestSnapshot !== null && snapshot.tick <= state.latestSnapshot.tick;
      return stale
        ? state
        : {
            ...state,
            latestSnapshot: snapshot,
            skippedTotal: state.skippedTotal + frame.skipped,
            phase: snapshot.phase,
          };
    }
    case "ack":
      return { ...state, pendingAction: null };
    case "rejected":
      if (frame.reason === "NoFreeSlot") {
        return {
          ...state,
          status: "spectator",
          pendingAction: null,
          banner: "no free slot: watching as spectator",
        };
      }
      return { ...state, pendingAction: null, banner: `rejected: ${frame.reason}` };
    case "phase":
      return { ...state, phase: frame.phase };
    case "refined":
      return { ...state, refinedReport: frame.report };
  }
}

export function connectionClosed(state: ClientState): ClientState {
  // last snapshot stays frozen on screen; nothing moves without a server
  return { ...state, status: "closed", banner: "connection lost: reconnect to continue" };
}

/** The avatar's position, derived only from the latest server snapshot. */
export function avatarNode(state: ClientState): number | null {
  if (state.agentId === null || state.latestSnapshot === null) {
    return null;
  }
  const marker = state.latestSnapshot.agents.find(
    (a) => a.agent_id === state.agentId,
  );
  return marker ? marker.node_id : null;
}

/** Nodes legal to click right now: the avatar's neighbors plus itself. */
export function clickableNodes(state: ClientState): number[] {
  const here = avatarNode(state);
  if (here === null || state.status !== "joined") {
    return [];
  }
  return [...(state.neighbors.get(here) ?? []), here];
}

export type ClickOutcome =
  | { kind: "send"; action: number; state: ClientState }
  | { kind: "ignored"; reason: string; state: ClientState };

/**
 * Translate a clicked node into an action frame, enforcing the
 * one-outstanding-action rule and adjacency. Never moves the avatar.
 */
export function actionForClick(state: ClientState, clickedNode: number): ClickOutcome {
  if (state.status !== "joined") {
    return { kind: "ignored", reason: "not joined", state };
  }
  if (state.pendingAction !== null) {
    return { kind: "ignored", reason: "action already pending", state };
  }
  const here = avatarNode(state);
  if (here === null) {
    return { kind: "ignored", reason: "no snapshot yet", state };
  }
  const action = actionIndexFor(state.neighbors.get(here) ?? [], here, clickedNode);
  if (action === null) {
    return { kind: "ignored", reason: "not adjacent", state };
  }
  return { kind: "send", action, state: { ...state, pendingAction: action } };
}
