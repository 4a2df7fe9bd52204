import type { SuggestionCard, TracePoint, UiState } from "./state.js";

export function escapeHtml(s: string): string {
  return s
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

/** One suggestion card. The code block is the service's string, whole
 * and unedited; only HTML escaping is applied. */
export function cardHtml(card: SuggestionCard): string {
  const badge = `v ${card.valence.toFixed(2)}  a ${card.arousal.toFixed(2)}`;
  const buttons =
    card.verdict === "pending"
      ? `<button data-accept="${card.id}">accept</button>
         <button data-reject="${card.id}">reject</button>`
      : "";
  return `<article class="card ${card.verdict}" data-id="${card.id}">
  <header><span class="badge">${escapeHtml(badge)}</span>
  <span class="verdict">${card.verdict}</span></header>
  <pre>${escapeHtml(card.code)}</pre>
  ${buttons}
</article>`;
}

/** SVG path for the reward sparkline; empty string when under 2 points. */
export function sparklinePath(
  points: TracePoint[],
  width: number,
  height: number,
): string {
  if (points.length < 2) return "";
  const xs = points.map((p) => p.episode);
  const ys = points.map((p) => p.reward);
  const x0 = Math.min(...xs);
  const x1 = Math.max(...xs);
  const y0 = Math.min(...ys);
  const y1 = Math.max(...ys);
  const spanX = x1 - x0 || 1;
  const spanY = y1 - y0 || 1;
  return points
    .map((p, i) => {
      const px = ((p.episode - x0) / spanX) * width;
      const py = height - ((p.reward - y0) / spanY) * height;
      return `${i === 0 ? "M" : "L"}${px.toFixed(1)},${py.toFixed(1)}`;
    })
    .join(" ");
}

export interface Handlers {
  onPadRelease(x: number, y: number, width: number, height: number): void;
  onSuggest(): void;
  onAccept(id: string): void;
  onReject(id: string): void;
}

export function appHtml(state: UiState): string {
  const banner = state.connected
    ? ""
    : `<div class="banner">disconnected, retrying</div>`;
  const error = state.lastError
    ? `<div class="error">${escapeHtml(state.lastError)}</div>`
    : "";
  const pct = Math.round(state.progress * 100);
  const spark = sparklinePath(state.trace, 220, 48);
  const cards = state.cards.map(cardHtml).reverse().join("\n");
  return `${banner}${error}
<section class="pad-row">
  <canvas id="pad" width="240" height="240"></canvas>
  <div class="pad-side">
    <div class="coords">v ${state.valence.toFixed(2)} / a ${state.arousal.toFixed(2)}</div>
    <button id="suggest-btn">suggest</button>
    <div class="train">
      <progress max="100" value="${pct}"></progress>
      <svg width="220" height="48" class="spark"><path d="${spark}" fill="none"/></svg>
    </div>
  </div>
</section>
<section id="cards">${cards}</section>`;
}

function drawPad(canvas: HTMLCanvasElement, state: UiState): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(0.5, 0.5, width - 1, height - 1);
  ctx.beginPath();
  ctx.moveTo(width / 2, 0);
  ctx.lineTo(width / 2, height);
  ctx.moveTo(0, height / 2);
  ctx.lineTo(width, height / 2);
  ctx.stroke();
  const px = ((state.valence + 1) / 2) * width;
  const py = ((1 - state.arousal) / 2) * height;
  ctx.fillStyle = "#d33";
  ctx.beginPath();
  ctx.arc(px, py, 6, 0, 2 * Math.PI);
  ctx.fill();
}

/** Rebuild the DOM from state and wire the handlers. Rendering is a
 * plain function of state, all session logic stays in the reducer. */
export function renderApp(
  root: HTMLElement,
  state: UiState,
  handlers: Handlers,
): void {
  root.innerHTML = appHtml(state);
  const pad = root.querySelector<HTMLCanvasElement>("#pad");
  if (pad) {
    drawPad(pad, state);
    let dragging = false;
    pad.addEventListener("pointerdown", () => {
      dragging = true;
    });
    pad.addEventListener("pointerup", (ev) => {
      if (!dragging) return;
      dragging = false;
      const rect = pad.getBoundingClientRect();
      handlers.onPadRelease(
        ev.clientX - rect.left,
        ev.clientY - rect.top,
        rect.width,
        rect.height,
      );
    });
  }
  root
    .querySelector("#suggest-btn")
    ?.addEventListener("click", () => handlers.onSuggest());
  root.querySelectorAll<HTMLButtonElement>("[data-accept]").forEach((btn) => {
    btn.addEventListener("click", () => handlers.onAccept(btn.dataset.accept!));
  });
  root.querySelectorAll<HTMLButtonElement>("[data-reject]").forEach((btn) => {
    btn.addEventListener("click", () => handlers.onReject(btn.dataset.reject!));
  });
}
