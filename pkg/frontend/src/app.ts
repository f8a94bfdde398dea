// Browser entry point: wire the API client, controller and DOM renderer,
// and start the poll loop (default one tick per second).

import { ApiClient } from "./api.js";
import { ConsoleController } from "./console.js";
import { DomRenderer } from "./render.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? `http://${window.location.hostname}:8469`;

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app element");

const renderer = new DomRenderer(root);
const controller = new ConsoleController(new ApiClient(baseUrl), renderer, {
  pollIntervalMs: Number(params.get("poll") ?? 1000),
});
renderer.attach(controller);
renderer.render(controller.current());
controller.startPolling();
