/**
 * Entry point: connect to a session, pump frames through the state machine,
 * render on every change, and forward clicks as actions.
 *
 * Configuration is just the server URL, via the `?server=` query parameter
 * (defaults to the serving host, session-1).
 */

import { parseServerFrame } from "./protocol.js";
import { fitViewport, pickNode, render } from "./render.js";
import {
  actionForClick,
  applyFrame,
  connectionClosed,
  initialState,
  type ClientState,
} from "./state.js";

function sessionUrl(): string {
  const params = new URLSearchParams(window.location.search);
  const explicit = params.get("server");
  if (explicit) {
    return explicit;
  }
  const scheme = window.location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${window.location.host}/sessions/session-1/ws`;
}

function start(): void {
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    throw new Error("canvas 2d context unavailable");
  }

  let state: ClientState = initialState();
  const draw = () => render(ctx, state, canvas.width, canvas.height);

  const resize = () => {
    canvas.width = window.innerWidth;
    canvas.height = window.innerHeight;
    draw();
  };
  window.addEventListener("resize", resize);
  resize();

  const socket = new WebSocket(sessionUrl());
  socket.onopen = () => {
    socket.send(JSON.stringify({ type: "join" }));
  };
  socket.onmessage = (event) => {
    state = applyFrame(state, parseServerFrame(String(event.data)));
    draw();
  };
  socket.onclose = () => {
    state = connectionClosed(state);
    draw();
  };
  socket.onerror = () => {
    state = connectionClosed(state);
    draw();
  };

  canvas.addEventListener("click", (event) => {
    if (!state.network) {
      return;
    }
    const view = fitViewport(state.network, canvas.width, canvas.height);
    const node = pickNode(state.network, view, event.offsetX, event.offsetY);
    if (node === null) {
      return;
    }
    const outcome = actionForClick(state, node);
    state = outcome.state;
    if (outcome.kind === "send") {
      socket.send(JSON.stringify({ type: "act", action: outcome.action }));
    }
    draw();
  });
}

start();
