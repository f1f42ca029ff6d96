/**
 * Annotation page: load an image, draw category strokes, propagate through
 * the session service, and inspect/export the result.
 *
 * Layering: the base canvas holds the image, the overlay canvas the
 * propagated labels (unknown pixels transparent), the stroke canvas the
 * vector strokes; pointer input lands on the top canvas.  The server is the
 * only rasterizer — the preview draws vectors, the authoritative raster
 * comes back as labels.png.
 */

import { SessionClient, ApiError } from "./api.js";
import { compositeLabels, labelsFromRgba } from "./overlay.js";
import { cssColor, defaultPalette, parsePalette, Rgb } from "./palette.js";
import { StrokeState } from "./strokes.js";
import { Vertex } from "./schema.js";

const $ = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

const client = new SessionClient("");
let palette: Rgb[] = defaultPalette();

let state: StrokeState | null = null;
let sessionId: string | null = null;
let image: ImageBitmap | null = null;

let inFlight = false;
let overlayStale = false;
let lastLabels: Uint8Array | null = null;

function toast(message: string): void {
  const box = $("toasts");
  const el = document.createElement("div");
  el.className = "toast";
  el.textContent = message;
  box.appendChild(el);
  setTimeout(() => el.remove(), 4000);
}

function setStatus(text: string): void {
  $("status").textContent = text;
}

function refreshControls(): void {
  const strokes = state ? state.count : 0;
  ($("propagate") as HTMLButtonElement).disabled =
    !sessionId || strokes === 0 || inFlight;
  ($("export") as HTMLButtonElement).disabled = !state || strokes === 0;
  ($("undo") as HTMLButtonElement).disabled = !state || !state.canUndo;
  ($("redo") as HTMLButtonElement).disabled = !state || !state.canRedo;
  $("stale").hidden = !overlayStale;
}

// ---------------------------------------------------------------------------
// canvases

function canvases() {
  return {
    base: $("base") as HTMLCanvasElement,
    overlay: $("overlay") as HTMLCanvasElement,
    strokes: $("strokes") as HTMLCanvasElement,
  };
}

function resizeCanvases(width: number, height: number): void {
  for (const canvas of Object.values(canvases())) {
    canvas.width = width;
    canvas.height = height;
  }
}

function drawStrokes(): void {
  if (!state) return;
  const canvas = canvases().strokes;
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.lineCap = "round";
  ctx.lineJoin = "round";
  for (const stroke of state.all()) {
    ctx.strokeStyle = cssColor(palette[stroke.category % palette.length]);
    ctx.fillStyle = ctx.strokeStyle;
    ctx.lineWidth = stroke.brushRadius * 2 + 1;
    const [x0, y0] = stroke.polyline[0];
    if (stroke.polyline.length === 1) {
      ctx.beginPath();
      ctx.arc(x0 + 0.5, y0 + 0.5, stroke.brushRadius + 0.5, 0, Math.PI * 2);
      ctx.fill();
      continue;
    }
    ctx.beginPath();
    ctx.moveTo(x0 + 0.5, y0 + 0.5);
    for (const [x, y] of stroke.polyline.slice(1)) ctx.lineTo(x + 0.5, y + 0.5);
    ctx.stroke();
  }
}

function drawOverlay(): void {
  const canvas = canvases().overlay;
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!lastLabels) return;
  const opacity = Number(($("opacity") as HTMLInputElement).value) / 100;
  const rgba = compositeLabels(lastLabels, palette, opacity);
  ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), canvas.width, canvas.height), 0, 0);
}

// ---------------------------------------------------------------------------
// session setup

async function loadImageFile(file: File): Promise<void> {
  const bytes = await file.arrayBuffer();
  try {
    setStatus("creating session…");
    const info = await client.createSession(bytes);
    sessionId = info.id;
    image = await createImageBitmap(new Blob([bytes]));
    state = new StrokeState(file.name.replace(/\.[^.]+$/, ""), info.width, info.height);
    state.activeCategory = activeCategory();
    lastLabels = null;
    overlayStale = false;
    resizeCanvases(info.width, info.height);
    canvases().base.getContext("2d")!.drawImage(image, 0, 0);
    drawOverlay();
    drawStrokes();
    setStatus(`session ${info.id.slice(0, 8)} — ${info.superpixel_count} superpixels`);
  } catch (err) {
    setStatus("no session");
    toast(err instanceof ApiError ? `upload rejected: ${err.message}` : String(err));
  }
  refreshControls();
}

// ---------------------------------------------------------------------------
// drawing

let activePath: Vertex[] | null = null;

function canvasPoint(e: PointerEvent): Vertex {
  const canvas = canvases().strokes;
  const rect = canvas.getBoundingClientRect();
  return [
    ((e.clientX - rect.left) / rect.width) * canvas.width,
    ((e.clientY - rect.top) / rect.height) * canvas.height,
  ];
}

function activeCategory(): number {
  const el = document.querySelector<HTMLElement>(".swatch.active");
  return el ? Number(el.dataset.category) : 1;
}

function brushRadius(): number {
  return Number(($("radius") as HTMLInputElement).value);
}

function wirePointer(): void {
  const canvas = canvases().strokes;
  canvas.addEventListener("pointerdown", (e) => {
    if (!state) return;
    canvas.setPointerCapture(e.pointerId);
    activePath = [canvasPoint(e)];
  });
  canvas.addEventListener("pointermove", (e) => {
    if (!activePath) return;
    activePath.push(canvasPoint(e));
    previewPath();
  });
  const finish = () => {
    if (!state || !activePath) return;
    state.addStroke(activePath, activeCategory(), brushRadius());
    activePath = null;
    overlayStale = lastLabels !== null;
    drawStrokes();
    refreshControls();
  };
  canvas.addEventListener("pointerup", finish);
  canvas.addEventListener("pointercancel", () => {
    activePath = null;
    drawStrokes();
  });
}

function previewPath(): void {
  if (!activePath || activePath.length < 2) return;
  drawStrokes();
  const ctx = canvases().strokes.getContext("2d")!;
  ctx.strokeStyle = cssColor(palette[activeCategory() % palette.length]);
  ctx.lineWidth = brushRadius() * 2 + 1;
  ctx.lineCap = "round";
  ctx.beginPath();
  ctx.moveTo(activePath[0][0], activePath[0][1]);
  for (const [x, y] of activePath.slice(1)) ctx.lineTo(x, y);
  ctx.stroke();
}

// ---------------------------------------------------------------------------
// propagation

async function propagate(): Promise<void> {
  if (!state || !sessionId || inFlight || state.count === 0) return;
  inFlight = true;
  overlayStale = false;
  refreshControls();
  setStatus("propagating…");
  try {
    await client.putScribbles(sessionId, state.toJson());
    const result = await client.propagate(sessionId, {
      use_pairwise: ($("pairwise") as HTMLInputElement).checked,
      predictor: ($("use-model") as HTMLInputElement).checked ? "model" : "none",
      lambda: Number(($("lambda") as HTMLInputElement).value),
    });
    lastLabels = await fetchLabels(sessionId, result.revision);
    drawOverlay();
    $("energy").textContent = `energy ${result.energy.toFixed(3)}`;
    setStatus("ready");
  } catch (err) {
    setStatus("ready");
    toast(err instanceof ApiError ? `propagate failed: ${err.message}` : String(err));
  } finally {
    inFlight = false;
    refreshControls();
  }
}

async function fetchLabels(id: string, revision: number): Promise<Uint8Array> {
  const img = new Image();
  img.src = client.labelsUrl(id, revision);
  await img.decode();
  const scratch = document.createElement("canvas");
  scratch.width = img.naturalWidth;
  scratch.height = img.naturalHeight;
  const ctx = scratch.getContext("2d", { willReadFrequently: true })!;
  ctx.drawImage(img, 0, 0);
  const rgba = ctx.getImageData(0, 0, scratch.width, scratch.height).data;
  return labelsFromRgba(rgba);
}

// ---------------------------------------------------------------------------
// export

function exportScribbles(): void {
  if (!state || state.count === 0) return;
  const blob = new Blob([state.export()], { type: "application/json" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = `${state.imageRef}_scribbles.json`;
  a.click();
  URL.revokeObjectURL(a.href);
}

// ---------------------------------------------------------------------------
// toolbar

function buildSwatches(): void {
  const box = $("swatches");
  box.innerHTML = "";
  palette.forEach((color, category) => {
    const el = document.createElement("button");
    el.className = "swatch" + (category === 1 ? " active" : "");
    el.dataset.category = String(category);
    el.style.background = cssColor(color);
    el.title = category === 0 ? "background" : `category ${category}`;
    el.addEventListener("click", () => {
      document.querySelectorAll(".swatch").forEach((s) => s.classList.remove("active"));
      el.classList.add("active");
      if (state) state.activeCategory = category;
    });
    box.appendChild(el);
  });
}

async function maybeLoadPalette(): Promise<void> {
  try {
    const r = await fetch("palette.json");
    if (r.ok) palette = parsePalette(await r.json());
  } catch {
    /* default palette stays */
  }
}

export async function boot(): Promise<void> {
  await maybeLoadPalette();
  buildSwatches();
  wirePointer();
  ($("file") as HTMLInputElement).addEventListener("change", (e) => {
    const file = (e.target as HTMLInputElement).files?.[0];
    if (file) void loadImageFile(file);
  });
  $("propagate").addEventListener("click", () => void propagate());
  $("export").addEventListener("click", exportScribbles);
  $("undo").addEventListener("click", () => {
    if (state?.undo()) {
      overlayStale = lastLabels !== null;
      drawStrokes();
      refreshControls();
    }
  });
  $("redo").addEventListener("click", () => {
    if (state?.redo()) {
      overlayStale = lastLabels !== null;
      drawStrokes();
      refreshControls();
    }
  });
  $("opacity").addEventListener("input", drawOverlay);
  refreshControls();
  setStatus("no session — choose an image");
}

if (typeof document !== "undefined") {
  void boot();
}
