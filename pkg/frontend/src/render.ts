/**
 * Canvas renderer. Draws exactly what the latest snapshot says; the only
 * client-side adornments are the avatar ring and the clickable-neighbor
 * highlights, both derived from that same snapshot.
 */

import { avatarNode, clickableNodes, ClientState } from "./state.js";
import { NetworkDoc } from "./protocol.js";

const BUILDING_COLORS: Record<string, string> = {
  shop: "#e4572e",
  office: "#4b88a2",
  public: "#6a994e",
};

export interface Viewport {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export function fitViewport(
  network: NetworkDoc,
  width: number,
  height: number,
  margin = 24,
): Viewport {
  const xs = network.nodes.map((n) => n.x);
  const ys = network.nodes.map((n) => n.y);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const spanX = Math.max(maxX - minX, 1e-9);
  const spanY = Math.max(maxY - minY, 1e-9);
  const scale = Math.min(
    (width - 2 * margin) / spanX,
    (height - 2 * margin) / spanY,
  );
  return {
    scale,
    offsetX: margin - minX * scale,
    offsetY: margin - minY * scale,
  };
}

export function toScreen(view: Viewport, x: number, y: number): [number, number] {
  return [x * view.scale + view.offsetX, y * view.scale + view.offsetY];
}

/** Nearest network node to a screen position, or null beyond the grab radius. */
export function pickNode(
  network: NetworkDoc,
  view: Viewport,
  px: number,
  py: number,
  radius = 14,
): number | null {
  let best: number | null = null;
  let bestD2 = radius * radius;
  for (const node of network.nodes) {
    const [sx, sy] = toScreen(view, node.x, node.y);
    const d2 = (sx - px) ** 2 + (sy - py) ** 2;
    if (d2 <= bestD2) {
      best = node.id;
      bestD2 = d2;
    }
  }
  return best;
}

export function render(
  ctx: CanvasRenderingContext2D,
  state: ClientState,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#14131a";
  ctx.fillRect(0, 0, width, height);
  if (!state.network) {
    ctx.fillStyle = "#ddd";
    ctx.font = "14px sans-serif";
    ctx.fillText(state.banner ?? "connecting…", 16, 24);
    return;
  }
  const view = fitViewport(state.network, width, height);
  const nodeById = new Map(state.network.nodes.map((n) => [n.id, n]));

  ctx.strokeStyle = "#4a4a55";
  ctx.lineWidth = 1.5;
  for (const edge of state.network.edges) {
    const a = nodeById.get(edge.from);
    const b = nodeById.get(edge.to);
    if (!a || !b) continue;
    const [ax, ay] = toScreen(view, a.x, a.y);
    const [bx, by] = toScreen(view, b.x, b.y);
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }

  const clickable = new Set(clickableNodes(state));
  for (const node of state.network.nodes) {
    const [x, y] = toScreen(view, node.x, node.y);
    if (clickable.has(node.id)) {
      ctx.strokeStyle = "#f4d35e";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.arc(x, y, 9, 0, Math.PI * 2);
      ctx.stroke();
    }
    if (node.building) {
      ctx.fillStyle = BUILDING_COLORS[node.building.kind] ?? "#999";
      ctx.fillRect(x - 5, y - 5, 10, 10);
    } else {
      ctx.fillStyle = "#77767f";
      ctx.beginPath();
      ctx.arc(x, y, 2.5, 0, Math.PI * 2);
      ctx.fill();
    }
  }

  const snapshot = state.latestSnapshot;
  if (snapshot) {
    for (const agent of snapshot.agents) {
      if (!agent.active || agent.agent_id === state.agentId) continue;
      const node = nodeById.get(agent.node_id);
      if (!node) continue;
      const [x, y] = toScreen(view, node.x, node.y);
      ctx.fillStyle = agent.source === 1 ? "#9b5de5" : "#d9d9d9";
      ctx.beginPath();
      ctx.arc(x, y, 3.5, 0, Math.PI * 2);
      ctx.fill();
    }
  }

  const here = avatarNode(state);
  if (here !== null) {
    const node = nodeById.get(here);
    if (node) {
      const [x, y] = toScreen(view, node.x, node.y);
      ctx.fillStyle = "#00f5d4";
      ctx.beginPath();
      ctx.arc(x, y, 6, 0, Math.PI * 2);
      ctx.fill();
      ctx.strokeStyle = "#00f5d4";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.arc(x, y, 11, 0, Math.PI * 2);
      ctx.stroke();
    }
  }

  ctx.fillStyle = "#ddd";
  ctx.font = "13px monospace";
  const tick = snapshot ? snapshot.tick : "-";
  const pending = state.pendingAction !== null ? " | action pending…" : "";
  ctx.fillText(`tick ${tick} | phase ${state.phase}${pending}`, 12, height - 30);
  if (state.banner) {
    ctx.fillStyle = "#f4d35e";
    ctx.fillText(state.banner, 12, height - 12);
  }
  if (state.skippedTotal > 0) {
    ctx.fillStyle = "#888";
    ctx.fillText(`(${state.skippedTotal} snapshots conflated)`, width - 220, height - 12);
  }
}
