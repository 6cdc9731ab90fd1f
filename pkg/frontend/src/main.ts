/** Browser annotator: canvas display, keyboard-first annotation flow.
 *
 * Keys: arrows or n/p switch frames, click places the highlighted
 * keypoint, m marks it missing, u undoes, s saves, digits 1-9 select a
 * keypoint, w requests a warm-start prediction, o jumps to the next
 * outlier, f toggles the mirrored display aid, +/- and wheel zoom,
 * shift+drag pans.
 */

import { AnnotatorApi, ApiError } from "./api.js";
import { FrameInfo, SkeletonInfo, rowPlaced, skeletonEdges } from "./model.js";
import { AnnotationSession } from "./session.js";
import { ReviewQueue } from "./queue.js";
import {
  ViewState,
  imageToScreen,
  initialView,
  panBy,
  screenToImage,
  zoomAt,
} from "./view.js";

const api = new AnnotatorApi("");

interface AppState {
  skeleton: SkeletonInfo;
  names: string[];
  edges: Array<[number, number]>;
  frames: FrameInfo[];
  frameIndex: number;
  session: AnnotationSession | null;
  queue: ReviewQueue;
  view: ViewState;
  image: HTMLImageElement | null;
}

let state: AppState;

function el<T extends HTMLElement>(id: string): T {
  const got = document.getElementById(id);
  if (!got) throw new Error(`missing element #${id}`);
  return got as T;
}

function canvas(): HTMLCanvasElement {
  return el<HTMLCanvasElement>("frame-canvas");
}

function status(text: string): void {
  el("status").textContent = text;
}

async function loadFrame(index: number): Promise<void> {
  if (index < 0 || index >= state.frames.length) return;
  if (state.session?.dirty) {
    if (!window.confirm("Discard unsaved changes on this frame?")) return;
  }
  state.frameIndex = index;
  const frame = state.frames[index];
  const rows = await api.getKeypoints(frame.id);
  state.session = new AnnotationSession(frame.id, state.names, rows);
  state.view = initialView(frame.width);

  const img = new Image();
  img.src = api.imageUrl(frame.id) + `?t=${Date.now()}`;
  await img.decode();
  state.image = img;
  fitView();
  render();
  status(
    `frame ${frame.id} (${index + 1}/${state.frames.length})` +
      (frame.outlier ? " [outlier]" : ""),
  );
}

function fitView(): void {
  if (!state.image) return;
  const c = canvas();
  const scale = Math.min(
    c.width / state.image.width,
    c.height / state.image.height,
  );
  state.view = {
    ...initialView(state.image.width),
    scale,
    panX: (c.width - state.image.width * scale) / 2,
    panY: (c.height - state.image.height * scale) / 2,
    mirrored: state.view.mirrored,
  };
}

function render(): void {
  const c = canvas();
  const ctx = c.getContext("2d");
  if (!ctx || !state.image || !state.session) return;
  ctx.fillStyle = "#14161a";
  ctx.fillRect(0, 0, c.width, c.height);

  ctx.save();
  const v = state.view;
  if (v.mirrored) {
    ctx.translate(v.panX + (v.imageWidth - 1) * v.scale, v.panY);
    ctx.scale(-v.scale, v.scale);
  } else {
    ctx.translate(v.panX, v.panY);
    ctx.scale(v.scale, v.scale);
  }
  ctx.imageSmoothingEnabled = v.scale < 4;
  ctx.drawImage(state.image, 0, 0);
  ctx.restore();

  const pose = state.session.pose;
  ctx.lineWidth = 1.5;
  ctx.strokeStyle = "#2f9e44";
  for (const [p, child] of state.edges) {
    if (rowPlaced(pose[p]) && rowPlaced(pose[child])) {
      const a = imageToScreen(v, { x: pose[p].x!, y: pose[p].y! });
      const b = imageToScreen(v, { x: pose[child].x!, y: pose[child].y! });
      ctx.beginPath();
      ctx.moveTo(a.x, a.y);
      ctx.lineTo(b.x, b.y);
      ctx.stroke();
    }
  }
  pose.forEach((row, i) => {
    if (!rowPlaced(row)) return;
    const s = imageToScreen(v, { x: row.x!, y: row.y! });
    const predicted = state.session!.rowSource(i) === "predicted";
    ctx.beginPath();
    ctx.arc(s.x, s.y, 4, 0, Math.PI * 2);
    ctx.fillStyle = predicted ? "#e8590c" : "#fab005";
    ctx.fill();
    if (predicted) {
      ctx.strokeStyle = "#e8590c";
      ctx.setLineDash([3, 3]);
      ctx.beginPath();
      ctx.arc(s.x, s.y, 7, 0, Math.PI * 2);
      ctx.stroke();
      ctx.setLineDash([]);
    }
    ctx.fillStyle = "#f1f3f5";
    ctx.font = "11px sans-serif";
    ctx.fillText(row.name, s.x + 7, s.y - 5);
  });
  renderSidebar();
}

function renderSidebar(): void {
  const list = el<HTMLUListElement>("keypoint-list");
  list.innerHTML = "";
  if (!state.session) return;
  state.session.pose.forEach((row, i) => {
    const item = document.createElement("li");
    const placed = rowPlaced(row);
    const src = state.session!.rowSource(i);
    item.textContent =
      `${i + 1}. ${row.name}` +
      (placed
        ? ` (${row.x!.toFixed(1)}, ${row.y!.toFixed(1)})${src === "predicted" ? " *" : ""}`
        : src === "user"
          ? " — missing"
          : "");
    if (state.session!.cursor === i) item.classList.add("cursor");
    item.onclick = () => {
      state.session!.selectKeypoint(i);
      render();
    };
    list.appendChild(item);
  });
  el("dirty-flag").textContent = state.session.dirty ? "unsaved changes" : "";
  el("queue-state").textContent = state.queue.length
    ? `outliers: ${state.queue.position}/${state.queue.length}`
    : "no outlier queue";
}

async function save(): Promise<void> {
  if (!state.session) return;
  try {
    await api.putKeypoints(state.session.frameId, state.session.toPayload());
    state.session.markSaved();
    state.frames[state.frameIndex].annotated = true;
    status(`saved frame ${state.session.frameId}`);
  } catch (err) {
    status(err instanceof ApiError ? `save failed: ${err.message}` : String(err));
  }
  render();
}

async function warmStart(): Promise<void> {
  if (!state.session) return;
  try {
    const rows = await api.predict(state.session.frameId);
    state.session.acceptWarmStart(rows);
    status("warm-start prediction loaded; correct and save");
  } catch (err) {
    if (err instanceof ApiError && err.code === "no_checkpoint") {
      status("no checkpoint loaded on the server");
    } else {
      status(String(err));
    }
  }
  render();
}

async function nextOutlier(): Promise<void> {
  if (state.queue.exhausted) {
    const fresh = await api.getOutliers();
    state.queue.refresh(fresh.frame_ids);
    if (!state.queue.length) {
      status("no outliers flagged; run the outliers command first");
      return;
    }
  }
  const frameId = state.queue.next();
  if (frameId === null) {
    status("outlier queue finished");
    return;
  }
  const index = state.frames.findIndex((f) => f.id === frameId);
  if (index >= 0) await loadFrame(index);
}

function bindEvents(): void {
  const c = canvas();
  let dragging = false;
  let last = { x: 0, y: 0 };

  c.addEventListener("mousedown", (ev) => {
    if (ev.shiftKey) {
      dragging = true;
      last = { x: ev.offsetX, y: ev.offsetY };
    }
  });
  window.addEventListener("mouseup", () => (dragging = false));
  c.addEventListener("mousemove", (ev) => {
    if (dragging) {
      state.view = panBy(state.view, ev.offsetX - last.x, ev.offsetY - last.y);
      last = { x: ev.offsetX, y: ev.offsetY };
      render();
    }
  });
  c.addEventListener("click", (ev) => {
    if (ev.shiftKey || !state.session || !state.image) return;
    const p = screenToImage(state.view, { x: ev.offsetX, y: ev.offsetY });
    if (
      p.x < 0 || p.y < 0 ||
      p.x > state.image.width - 1 || p.y > state.image.height - 1
    )
      return;
    state.session.placeKeypoint(p.x, p.y);
    render();
  });
  c.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    const factor = ev.deltaY < 0 ? 1.2 : 1 / 1.2;
    state.view = zoomAt(state.view, { x: ev.offsetX, y: ev.offsetY }, factor);
    render();
  });

  window.addEventListener("keydown", (ev) => {
    if (ev.target instanceof HTMLInputElement) return;
    switch (ev.key) {
      case "ArrowRight":
      case "n":
        void loadFrame(state.frameIndex + 1);
        break;
      case "ArrowLeft":
      case "p":
        void loadFrame(state.frameIndex - 1);
        break;
      case "m":
        state.session?.markMissing();
        render();
        break;
      case "u":
        state.session?.undo();
        render();
        break;
      case "s":
        void save();
        break;
      case "w":
        void warmStart();
        break;
      case "o":
        void nextOutlier();
        break;
      case "f":
        state.view = { ...state.view, mirrored: !state.view.mirrored };
        render();
        break;
      case "+":
      case "=":
        state.view = zoomAt(state.view, { x: c.width / 2, y: c.height / 2 }, 1.2);
        render();
        break;
      case "-":
        state.view = zoomAt(state.view, { x: c.width / 2, y: c.height / 2 }, 1 / 1.2);
        render();
        break;
      default:
        if (/^[1-9]$/.test(ev.key) && state.session) {
          const idx = Number(ev.key) - 1;
          if (idx < state.names.length) {
            state.session.selectKeypoint(idx);
            render();
          }
        }
    }
  });

  window.addEventListener("beforeunload", (ev) => {
    if (state.session?.dirty) ev.preventDefault();
  });
}

async function boot(): Promise<void> {
  const skeleton = await api.getSkeleton();
  const frames = await api.listFrames();
  const outliers = await api.getOutliers();
  state = {
    skeleton,
    names: skeleton.keypoints.map((k) => k.name),
    edges: skeletonEdges(skeleton),
    frames,
    frameIndex: 0,
    session: null,
    queue: new ReviewQueue(outliers.frame_ids),
    view: initialView(1),
    image: null,
  };
  if (frames.length) {
    await loadFrame(0);
  } else {
    status("dataset has no frames; run ingest first");
  }
  bindEvents();
}

void boot().catch((err) => status(`failed to start: ${err}`));
