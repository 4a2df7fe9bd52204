import { SessionClient } from "./client.js";
import { padToCoords } from "./coords.js";
import { initialState, reduce, type UiState } from "./state.js";
import { renderApp } from "./ui.js";

const params = new URLSearchParams(location.search);
const host = params.get("host") ?? location.hostname ?? "127.0.0.1";
const port = params.get("port") ?? "9192";
const scheme = location.protocol === "https:" ? "wss" : "ws";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

let state: UiState = initialState();

const client = new SessionClient({
  url: `${scheme}://${host}:${port}`,
  factory: (url) => new WebSocket(url),
  onEvent: (event) => {
    state = reduce(state, event);
    render();
  },
});

function render(): void {
  renderApp(root!, state, {
    onPadRelease: (x, y, w, h) => {
      const { valence, arousal } = padToCoords(x, y, w, h);
      client.setAffect(valence, arousal);
    },
    onSuggest: () => client.suggest(),
    onAccept: (id) => client.accept(id),
    onReject: (id) => client.reject(id),
  });
}

render();
client.connect();
setInterval(() => client.trainStatus(), 2000);
