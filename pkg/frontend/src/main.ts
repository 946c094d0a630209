/** Playground entry point: wires the knob, buttons, trace table, and canvas
 * to the /v1 service. All numbers shown come from service payloads.
 */

import { PhkitClient, ServiceError } from "./api.js";
import { knobToSetpoint } from "./knob.js";
import { renderFrame } from "./render.js";
import { initialView, reduce, type ViewAction, type ViewState } from "./view.js";

const client = new PhkitClient("");
let view: ViewState = initialView;

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

const knob = byId<HTMLInputElement>("knob");
const knobLabel = byId<HTMLSpanElement>("knob-label");
const phLabel = byId<HTMLSpanElement>("ph-label");
const clockLabel = byId<HTMLSpanElement>("clock-label");
const runButton = byId<HTMLButtonElement>("run");
const depositButton = byId<HTMLButtonElement>("deposit");
const stepButton = byId<HTMLButtonElement>("step");
const resetButton = byId<HTMLButtonElement>("reset");
const traceBody = byId<HTMLTableSectionElement>("trace-body");
const errorBox = byId<HTMLDivElement>("error");
const canvas = byId<HTMLCanvasElement>("grid");
const ctx = canvas.getContext("2d")!;

function dispatch(action: ViewAction): void {
  view = reduce(view, action);
  sync();
}

function sync(): void {
  knobLabel.textContent = knobToSetpoint(view.knobFraction).toFixed(2);
  phLabel.textContent = view.displayedPh === null ? "—" : view.displayedPh.toFixed(2);
  clockLabel.textContent = view.clock.toFixed(1);
  runButton.disabled = view.runningSetpoint;
  depositButton.disabled = !view.depositEnabled;
  errorBox.textContent = view.lastError ?? "";
  traceBody.replaceChildren(
    ...view.trace.map((it) => {
      const tr = document.createElement("tr");
      tr.innerHTML =
        `<td>${it.index}</td><td>${it.pump_ratio.toFixed(4)}</td>` +
        `<td>${it.true_ph.toFixed(3)}</td><td>${it.measured_ph.toFixed(3)}</td>`;
      return tr;
    }),
  );
  if (view.frame) renderFrame(ctx, view.frame);
}

function fail(err: unknown): void {
  const message = err instanceof ServiceError ? err.message : String(err);
  dispatch({ type: "error", message });
}

knob.addEventListener("input", () => {
  dispatch({ type: "knob", fraction: Number(knob.value) });
});

runButton.addEventListener("click", async () => {
  dispatch({ type: "run-started" });
  try {
    const result = await client.runSetpoint(
      knobToSetpoint(view.knobFraction),
      0,
      (it) => dispatch({ type: "iteration", iteration: it }),
    );
    dispatch({ type: "result", result });
  } catch (err) {
    fail(err);
  }
});

depositButton.addEventListener("click", async () => {
  try {
    const res = await client.deposit("global");
    dispatch({ type: "deposited", clock: res.clock });
  } catch (err) {
    fail(err);
  }
});

stepButton.addEventListener("click", async () => {
  try {
    await client.step(1.0);
    dispatch({ type: "frame", frame: await client.getFrame() });
  } catch (err) {
    fail(err);
  }
});

resetButton.addEventListener("click", async () => {
  try {
    const res = await client.reset();
    dispatch({ type: "reset", clock: res.clock });
    dispatch({ type: "frame", frame: await client.getFrame() });
  } catch (err) {
    fail(err);
  }
});

async function start(): Promise<void> {
  const scene = await client.getScene();
  canvas.width = scene.width * 40;
  canvas.height = scene.height * 40;
  dispatch({ type: "frame", frame: await client.getFrame() });
  // live stream; reconnect if the server closes it
  for (;;) {
    try {
      await client.streamFrames((frame) => dispatch({ type: "frame", frame }));
    } catch (err) {
      fail(err);
    }
    await new Promise((resolve) => setTimeout(resolve, 1000));
  }
}

start().catch(fail);
