/**
 * Wire types for the session protocol and the action-index rule.
 *
 * The server encodes a move as the index of the target neighbor in the
 * ascending-id neighbor list of the current node; the index right after the
 * last neighbor (== degree) is the stay action. The client recomputes this
 * from network geometry rather than trusting any ordering it receives, and
 * a shared fixture file pins both sides to the same rule.
 */

export interface BuildingDoc {
  id: number;
  kind: "shop" | "office" | "public";
  attractiveness: Record<string, number>;
}

export interface NodeDoc {
  id: number;
  x: number;
  y: number;
  building: BuildingDoc | null;
}

export interface EdgeDoc {
  from: number;
  to: number;
  length: number;
}

export interface NetworkDoc {
  version: number;
  nodes: NodeDoc[];
  edges: EdgeDoc[];
}

export interface CompilationDoc {
  node_of_state: number[];
  action_table: number[][];
}

export interface AgentMarker {
  agent_id: number;
  source: number;
  node_id: number;
  active: boolean;
}

export interface Snapshot {
  tick: number;
  phase: string;
  agents: AgentMarker[];
  events: { kind: string; agent_id: number; node: number | null }[];
}

export interface JoinedFrame {
  type: "joined";
  agent_id: number;
  node_id: number;
  network: NetworkDoc;
  compilation: CompilationDoc;
}

export interface TickFrame {
  type: "tick";
  snapshot: Snapshot;
  skipped: number;
}

export interface AckFrame {
  type: "ack";
}

export interface RejectedFrame {
  type: "rejected";
  reason: string;
}

export interface PhaseFrame {
  type: "phase";
  phase: string;
}

export interface RefinedFrame {
  type: "refined";
  report: unknown;
}

export type ServerFrame =
  | JoinedFrame
  | TickFrame
  | AckFrame
  | RejectedFrame
  | PhaseFrame
  | RefinedFrame;

export type ClientFrame =
  | { type: "join" }
  | { type: "act"; action: number }
  | { type: "leave" };

/** Adjacency derived from edge list: neighbor ids ascending per node. */
export function neighborTable(network: NetworkDoc): Map<number, number[]> {
  const table = new Map<number, number[]>();
  for (const node of network.nodes) {
    table.set(node.id, []);
  }
  for (const edge of network.edges) {
    table.get(edge.from)?.push(edge.to);
    table.get(edge.to)?.push(edge.from);
  }
  for (const neighbors of table.values()) {
    neighbors.sort((a, b) => a - b);
  }
  return table;
}

/**
 * Action index for moving from `node` to `target` given its neighbor list
 * (any order; sorted internally). Clicking the own node means stay, which
 * sits at index `degree`. Returns null for non-adjacent targets.
 */
export function actionIndexFor(
  neighbors: readonly number[],
  node: number,
  target: number,
): number | null {
  const sorted = [...neighbors].sort((a, b) => a - b);
  if (target === node) {
    return sorted.length;
  }
  const index = sorted.indexOf(target);
  return index >= 0 ? index : null;
}

export function parseServerFrame(raw: string): ServerFrame {
  const frame = JSON.parse(raw) as { type?: string };
  if (
    frame.type !== "joined" &&
    frame.type !== "tick" &&
    frame.type !== "ack" &&
    frame.type !== "rejected" &&
    frame.type !== "phase" &&
    frame.type !== "refined"
  ) {
    throw new Error(`unknown server frame type: ${frame.type}`);
  }
  return frame as ServerFrame;
}
