/** Single-page exploration client: upload a low-resolution face, paint the
 * semantic layout, steer per-region styles, and walk the render history. */

import { ApiError, Command, CommandResult, ExplorerApi, SessionDescriptor } from "./api";
import { MaskPainter, REGION_COLORS } from "./maskPainter";
import { RenderGallery, StyleConsole, clampT } from "./styleConsole";

const api = new ExplorerApi("");

interface AppState {
  session: SessionDescriptor | null;
  painter: MaskPainter | null;
  consoleModel: StyleConsole | null;
  gallery: RenderGallery;
  baselineUrl: string | null; // browser-interpolated LR preview for compare
  painting: boolean;
}

const state: AppState = {
  session: null,
  painter: null,
  consoleModel: null,
  gallery: new RenderGallery(),
  baselineUrl: null,
  painting: false,
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setBanner(message: string, isError = true): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message;
  banner.className = message ? (isError ? "banner error" : "banner info") : "banner";
}

async function fileToBase64(file: File): Promise<string> {
  const buf = await file.arrayBuffer();
  let binary = "";
  for (const byte of new Uint8Array(buf)) binary += String.fromCharCode(byte);
  return btoa(binary);
}

function drawMask(descriptor: SessionDescriptor): void {
  const canvas = el<HTMLCanvasElement>("mask-canvas");
  const [h, w] = descriptor.hr_size;
  canvas.width = w;
  canvas.height = h;
  const img = new Image();
  img.onload = () => {
    const ctx = canvas.getContext("2d")!;
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(img, 0, 0, w, h);
  };
  img.src = `data:image/png;base64,${descriptor.mask_png}`;
}

function refreshSessionView(descriptor: SessionDescriptor): void {
  state.session = descriptor;
  drawMask(descriptor);
  el<HTMLSpanElement>("session-info").textContent =
    `${descriptor.variant} / ${descriptor.scale}x / renders: ${descriptor.n_renders}`;
  el<HTMLButtonElement>("undo-btn").disabled = descriptor.undo_depth === 0;
  const snapSelects = [el<HTMLSelectElement>("interp-a"), el<HTMLSelectElement>("interp-b")];
  for (const select of snapSelects) {
    const current = select.value;
    select.innerHTML = "";
    const names = ["current", "default", ...descriptor.snapshots.filter((s) => s !== "default")];
    if (descriptor.has_guide_style) names.push("guide");
    for (const name of new Set(names)) {
      const option = document.createElement("option");
      option.value = name;
      option.textContent = name;
      select.appendChild(option);
    }
    if ([...select.options].some((o) => o.value === current)) select.value = current;
  }
}

function buildPalette(descriptor: SessionDescriptor): void {
  const palette = el<HTMLDivElement>("palette");
  palette.innerHTML = "";
  descriptor.region_names.forEach((name, idx) => {
    const [r, g, b] = REGION_COLORS[idx % REGION_COLORS.length];
    const button = document.createElement("button");
    button.className = "region";
    button.title = name;
    button.textContent = name;
    button.style.borderLeftColor = `rgb(${r},${g},${b})`;
    button.onclick = () => {
      state.painter?.setRegion(idx);
      [...palette.children].forEach((c) => c.classList.remove("active"));
      button.classList.add("active");
    };
    palette.appendChild(button);
  });
  (palette.firstChild as HTMLButtonElement | null)?.classList.add("active");
}

function commandSink(command: Command): void {
  void runCommand(command);
}

async function runCommand(command: Command): Promise<CommandResult | null> {
  if (!state.session) return null;
  try {
    const result = await api.sendCommand(state.session.session_id, command);
    setBanner("");
    refreshSessionView(result);
    if (command.type === "render" && result.render_index !== undefined) {
      const url = api.renderUrl(result.session_id, result.render_index);
      state.gallery.add(result.render_index, url, result.inputs_hash ?? "");
      renderGalleryView();
    }
    state.painter?.setOnline(true);
    const flushed = state.painter?.flushQueue() ?? 0;
    if (flushed > 0) setBanner(`replayed ${flushed} queued edits`, false);
    return result;
  } catch (err) {
    if (err instanceof ApiError) {
      setBanner(err.message);
    } else {
      // Network failure: queue mask edits until the service returns.
      state.painter?.setOnline(false);
      setBanner("service unreachable; edits queued");
    }
    return null;
  }
}

function renderGalleryView(): void {
  const gallery = el<HTMLDivElement>("gallery");
  gallery.innerHTML = "";
  for (const entry of state.gallery.all) {
    const card = document.createElement("figure");
    card.className = "render-card";
    const img = document.createElement("img");
    img.src = entry.url;
    img.alt = `render ${entry.index}`;
    const caption = document.createElement("figcaption");
    caption.textContent = `#${entry.index} ${entry.inputsHash.slice(0, 8)}`;
    card.onclick = () => showCompare(entry.index);
    card.appendChild(img);
    card.appendChild(caption);
    gallery.appendChild(card);
  }
}

function showCompare(index: number): void {
  const entry = state.gallery.byIndex(index);
  if (!entry) return;
  el<HTMLImageElement>("compare-render").src = entry.url;
  if (state.baselineUrl) {
    el<HTMLImageElement>("compare-baseline").src = state.baselineUrl;
  }
  el<HTMLSpanElement>("compare-label").textContent =
    `render #${entry.index} vs interpolated baseline`;
}

function makeBaseline(lrDataUrl: string, hrW: number, hrH: number): void {
  // Browser-interpolated upscale of the LR input; a visual reference only.
  const img = new Image();
  img.onload = () => {
    const canvas = document.createElement("canvas");
    canvas.width = hrW;
    canvas.height = hrH;
    const ctx = canvas.getContext("2d")!;
    ctx.imageSmoothingEnabled = true;
    ctx.imageSmoothingQuality = "high";
    ctx.drawImage(img, 0, 0, hrW, hrH);
    state.baselineUrl = canvas.toDataURL("image/png");
  };
  img.src = lrDataUrl;
}

function bindPainterEvents(): void {
  const canvas = el<HTMLCanvasElement>("mask-canvas");
  const overlay = el<HTMLCanvasElement>("overlay-canvas");

  const viewportOf = () => {
    const rect = canvas.getBoundingClientRect();
    const zoom = rect.width / canvas.width;
    return { zoom, offsetX: rect.left, offsetY: rect.top };
  };

  canvas.addEventListener("pointerdown", (ev) => {
    if (!state.painter) return;
    state.painting = true;
    state.painter.setViewport(viewportOf());
    state.painter.strokeStart(ev.clientX, ev.clientY);
  });
  window.addEventListener("pointermove", (ev) => {
    if (!state.painting || !state.painter) return;
    state.painter.strokeMove(ev.clientX, ev.clientY);
    const ctx = overlay.getContext("2d")!;
    const [y, x] = state.painter.toImage(ev.clientX, ev.clientY);
    const [r, g, b] = REGION_COLORS[state.painter.currentRegion % REGION_COLORS.length];
    ctx.fillStyle = `rgba(${r},${g},${b},0.6)`;
    ctx.beginPath();
    ctx.arc(x, y, Number(el<HTMLInputElement>("brush-radius").value), 0, Math.PI * 2);
    ctx.fill();
  });
  window.addEventListener("pointerup", () => {
    if (!state.painting || !state.painter) return;
    state.painting = false;
    overlay.getContext("2d")!.clearRect(0, 0, overlay.width, overlay.height);
    state.painter.strokeEnd();
  });
}

async function createSession(): Promise<void> {
  const lrInput = el<HTMLInputElement>("lr-file");
  const guideInput = el<HTMLInputElement>("guide-file");
  if (!lrInput.files?.length) {
    setBanner("pick a low-resolution image first");
    return;
  }
  try {
    const lr_png = await fileToBase64(lrInput.files[0]);
    const req: { lr_png: string; guide_png?: string } = { lr_png };
    if (guideInput.files?.length) {
      req.guide_png = await fileToBase64(guideInput.files[0]);
    }
    const descriptor = await api.createSession(req);
    state.gallery = new RenderGallery();
    renderGalleryView();
    state.painter = new MaskPainter(
      commandSink,
      descriptor.region_names,
      descriptor.hr_size[0],
      descriptor.hr_size[1],
    );
    state.painter.setRadius(Number(el<HTMLInputElement>("brush-radius").value));
    state.consoleModel = new StyleConsole(commandSink, descriptor.region_names);
    const overlay = el<HTMLCanvasElement>("overlay-canvas");
    overlay.width = descriptor.hr_size[1];
    overlay.height = descriptor.hr_size[0];
    buildPalette(descriptor);
    refreshSessionView(descriptor);
    makeBaseline(
      URL.createObjectURL(lrInput.files[0]),
      descriptor.hr_size[1],
      descriptor.hr_size[0],
    );
    setBanner(`session ${descriptor.session_id.slice(0, 8)} ready`, false);
  } catch (err) {
    setBanner(err instanceof Error ? err.message : String(err));
  }
}

function bindControls(): void {
  el<HTMLButtonElement>("create-btn").onclick = () => void createSession();
  el<HTMLButtonElement>("render-btn").onclick = () => state.consoleModel?.render();
  el<HTMLButtonElement>("undo-btn").onclick = () => state.painter?.undo();
  el<HTMLButtonElement>("grow-btn").onclick = () =>
    state.painter?.grow(Number(el<HTMLInputElement>("morph-radius").value));
  el<HTMLButtonElement>("shrink-btn").onclick = () =>
    state.painter?.shrink(Number(el<HTMLInputElement>("morph-radius").value));
  el<HTMLInputElement>("brush-radius").oninput = (ev) =>
    state.painter?.setRadius(Number((ev.target as HTMLInputElement).value));

  const tSlider = el<HTMLInputElement>("t-slider");
  tSlider.onchange = () => {
    const t = clampT(Number(tSlider.value));
    el<HTMLSpanElement>("t-value").textContent = t.toFixed(2);
    state.consoleModel?.interpolate(
      el<HTMLSelectElement>("interp-a").value,
      el<HTMLSelectElement>("interp-b").value,
      t,
    );
  };
  el<HTMLButtonElement>("jitter-btn").onclick = () =>
    state.consoleModel?.jitter(
      Number(el<HTMLInputElement>("jitter-delta").value),
      Math.floor(Math.random() * 1e9),
    );
  el<HTMLButtonElement>("sample-btn").onclick = () =>
    state.consoleModel?.sampleVariants(4, Math.floor(Math.random() * 1e9));
  el<HTMLButtonElement>("snapshot-btn").onclick = () => {
    const name = el<HTMLInputElement>("snapshot-name").value.trim();
    if (name) state.consoleModel?.snapshot(name);
  };
  el<HTMLButtonElement>("mix-btn").onclick = () => {
    const region = [...el<HTMLDivElement>("palette").children]
      .findIndex((c) => c.classList.contains("active"));
    if (region >= 0) {
      state.consoleModel?.mixRegions([region], el<HTMLSelectElement>("mix-source").value);
    }
  };
}

document.addEventListener("DOMContentLoaded", () => {
  bindControls();
  bindPainterEvents();
  void api
    .listCheckpoints()
    .then((entries) => {
      if (entries.length === 0) setBanner("service has no checkpoints yet");
    })
    .catch(() => setBanner("exploration service unreachable"));
});
