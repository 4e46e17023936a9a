// Entry point: read ?server=ws://...&session=... and wire everything up.

import { DashboardClient } from "./client.js";
import { render, ViewRefs } from "./view.js";

function ref<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

const params = new URLSearchParams(window.location.search);
const server = params.get("server") ?? "ws://127.0.0.1:8765";
const session = params.get("session") ?? "replay";

const refs: ViewRefs = {
  status: ref("status"),
  threshold: ref("threshold"),
  pending: ref("pending"),
  moreButton: ref<HTMLButtonElement>("more"),
  lessButton: ref<HTMLButtonElement>("less"),
  pulse: ref("pulse"),
  traceCanvas: ref<HTMLCanvasElement>("trace"),
  cueFeed: ref("cues"),
  errorFeed: ref("errors"),
  warning: ref("warning"),
};

const client = new DashboardClient({
  url: server,
  session,
  onChange: () => render(client.state, refs, Date.now()),
});

refs.moreButton.addEventListener("click", () => client.sendThreshold("more"));
refs.lessButton.addEventListener("click", () => client.sendThreshold("less"));

client.connect();

// Keep the notification pulse and trace fresh even without messages.
setInterval(() => render(client.state, refs, Date.now()), 250);
