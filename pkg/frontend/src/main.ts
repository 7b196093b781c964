import { StudioClient } from "./client.js";
import { StudioController, type ProjectionView } from "./controller.js";
import { AbPlayer } from "./player.js";
import { SessionState } from "./session.js";
import type { QuerySpecInfo } from "./types.js";

const CLASS_COLORS = [
  "#4c78a8", "#f58518", "#54a24b", "#e45756",
  "#72b7b2", "#b279a2", "#eeca3b", "#9d755d",
];

function colorFor(label: string): string {
  let h = 0;
  for (let i = 0; i < label.length; i++) h = (h * 31 + label.charCodeAt(i)) >>> 0;
  return CLASS_COLORS[h % CLASS_COLORS.length];
}

class CanvasView {
  private scale = 1;
  private ox = 0;
  private oy = 0;

  constructor(private readonly canvas: HTMLCanvasElement) {}

  /** Map data coordinates so all points fit with a margin. */
  fit(view: ProjectionView) {
    const xs = view.points.map((p) => p.x);
    const ys = view.points.map((p) => p.y);
    if (xs.length === 0) return;
    const pad = 40;
    const minX = Math.min(...xs), maxX = Math.max(...xs);
    const minY = Math.min(...ys), maxY = Math.max(...ys);
    const span = Math.max(maxX - minX, maxY - minY, 1e-9);
    this.scale = (Math.min(this.canvas.width, this.canvas.height) - 2 * pad) / span;
    this.ox = this.canvas.width / 2 - this.scale * (minX + maxX) / 2;
    this.oy = this.canvas.height / 2 + this.scale * (minY + maxY) / 2;
  }

  toScreen(x: number, y: number): [number, number] {
    return [this.ox + this.scale * x, this.oy - this.scale * y];
  }

  toData(sx: number, sy: number): [number, number] {
    return [(sx - this.ox) / this.scale, (this.oy - sy) / this.scale];
  }

  dataLength(pixels: number): number {
    return pixels / this.scale;
  }

  draw(view: ProjectionView) {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);

    const e = view.ellipse;
    const [ecx, ecy] = this.toScreen(e.cx, e.cy);
    ctx.beginPath();
    ctx.ellipse(ecx, ecy, e.rx * this.scale, e.ry * this.scale, 0, 0, 2 * Math.PI);
    ctx.fillStyle = "rgba(76, 120, 168, 0.12)";
    ctx.fill();
    ctx.strokeStyle = view.validationError ? "#e45756" : "#4c78a8";
    ctx.lineWidth = 2;
    ctx.stroke();

    for (const p of view.points) {
      const [sx, sy] = this.toScreen(p.x, p.y);
      ctx.beginPath();
      ctx.arc(sx, sy, p.member ? 8 : 5, 0, 2 * Math.PI);
      ctx.fillStyle = colorFor(p.class_label);
      ctx.fill();
      if (p.member) {
        ctx.strokeStyle = "#222";
        ctx.lineWidth = 2.5;
        ctx.stroke();
      }
      ctx.fillStyle = "#444";
      ctx.font = "11px sans-serif";
      ctx.fillText(p.class_label, sx + 10, sy + 4);
    }
  }
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function start() {
  const client = new StudioClient("");
  const session = new SessionState();
  const canvas = el<HTMLCanvasElement>("projection");
  const painter = new CanvasView(canvas);
  const player = new AbPlayer((src) => new Audio(src));

  const clipSelect = el<HTMLSelectElement>("clip-select");
  const querySelect = el<HTMLSelectElement>("query-select");
  const tSlider = el<HTMLInputElement>("t-slider");
  const modeSelect = el<HTMLSelectElement>("mode-select");
  const statusLine = el<HTMLElement>("status");
  const metrics = el<HTMLElement>("metrics");
  const playBtn = el<HTMLButtonElement>("play");
  const stopBtn = el<HTMLButtonElement>("stop");
  const abBtn = el<HTMLButtonElement>("ab-toggle");

  let queries: QuerySpecInfo[] = [];

  const controller = new StudioController(client, session, (view) => {
    statusLine.textContent = view.validationError ?? "";
    const resp = session.lastResponse;
    if (resp) {
      metrics.textContent =
        `SNR ${resp.snr_db.toFixed(1)} dB — members: ` +
        (resp.member_stems.join(", ") || "none");
      player.load(
        client.audioUrl(resp.mixture_audio_url),
        client.audioUrl(resp.audio_url),
      );
      abBtn.textContent = `playing: ${player.current}`;
    }
    painter.fit(view);
    painter.draw(view);
  });

  async function loadClip(clipId: string) {
    queries = await controller.loadClip(clipId);
    querySelect.innerHTML = "";
    for (const q of queries) {
      const opt = document.createElement("option");
      opt.value = String(q.query_index);
      opt.textContent = `query ${q.query_index} (${q.target_indices.length} targets)`;
      querySelect.appendChild(opt);
    }
  }

  const clips = await client.listClips();
  for (const c of clips) {
    const opt = document.createElement("option");
    opt.value = c.clip_id;
    opt.textContent = `${c.clip_id} [${c.split}]`;
    clipSelect.appendChild(opt);
  }
  if (clips.length > 0) await loadClip(clips[0].clip_id);

  clipSelect.addEventListener("change", () => void loadClip(clipSelect.value));
  querySelect.addEventListener("change", () => {
    const q = queries.find((s) => String(s.query_index) === querySelect.value);
    if (q) controller.selectQuery(q);
  });
  tSlider.addEventListener("input", () => {
    session.t = Number(tSlider.value);
    controller.setEllipse(controller.view.ellipse);
  });
  modeSelect.addEventListener("change", () => {
    session.mode = modeSelect.value === "model" ? "model" : "oracle";
    controller.setEllipse(controller.view.ellipse);
  });

  let dragging = false;
  canvas.addEventListener("pointerdown", (ev) => {
    dragging = true;
    canvas.setPointerCapture(ev.pointerId);
  });
  canvas.addEventListener("pointerup", () => (dragging = false));
  canvas.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    const rect = canvas.getBoundingClientRect();
    const [cx, cy] = painter.toData(ev.clientX - rect.left, ev.clientY - rect.top);
    controller.setEllipse({ ...controller.view.ellipse, cx, cy });
  });
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    const factor = ev.deltaY < 0 ? 1.08 : 1 / 1.08;
    const e = controller.view.ellipse;
    controller.setEllipse({ ...e, rx: e.rx * factor, ry: e.ry * factor });
  });

  playBtn.addEventListener("click", () => player.play());
  stopBtn.addEventListener("click", () => player.stop());
  abBtn.addEventListener("click", () => {
    player.toggle();
    abBtn.textContent = `playing: ${player.current}`;
  });
}

void start();
