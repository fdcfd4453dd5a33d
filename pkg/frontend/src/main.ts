import { ApiClient } from "./api.js";
import { SelectionStore, ViewerState } from "./state.js";
import { MeshViewer } from "./viewer.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const canvas = el<HTMLCanvasElement>("viewport");
  const slider = el<HTMLInputElement>("threshold");
  const sliderLabel = el<HTMLSpanElement>("threshold-label");
  const nameInput = el<HTMLInputElement>("part-name");
  const saveButton = el<HTMLButtonElement>("save");
  const partsList = el<HTMLUListElement>("parts");
  const status = el<HTMLDivElement>("status");

  const api = new ApiClient("");
  let viewer: MeshViewer | null = null;

  const render = (state: ViewerState) => {
    sliderLabel.textContent = `${state.thresholdM.toFixed(3)} m`;
    status.textContent = state.lastError
      ? state.lastError
      : state.selectedVertex === null
        ? "click a vertex to seed a part"
        : `seed ${state.selectedVertex}, ${state.previewMembers.length} ` +
          `vertices${state.previewPending ? " (updating...)" : ""}`;
    status.classList.toggle("error", state.lastError !== null);
    partsList.replaceChildren(
      ...state.parts.map((part) => {
        const item = document.createElement("li");
        const label = document.createElement("span");
        label.textContent =
          `${part.name} (seed ${part.seed}, ` +
          `${part.threshold_m.toFixed(3)} m, ${part.members.length} verts)`;
        const remove = document.createElement("button");
        remove.textContent = "x";
        remove.addEventListener("click", () =>
          store.dispatch({ kind: "remove", name: part.name }),
        );
        item.append(label, remove);
        return item;
      }),
    );
    viewer?.paintHighlight(state.previewMembers, state.selectedVertex);
  };

  const store = new SelectionStore(api, {
    pick: (x, y) => (viewer ? viewer.pick(x, y) : null),
    onChange: render,
  });

  const mesh = await store.init();
  viewer = new MeshViewer(canvas, mesh);
  slider.min = "0";
  slider.max = String(store.state.maxThresholdM);
  slider.step = String(store.state.maxThresholdM / 500);
  slider.value = "0";

  canvas.addEventListener("click", (event) => {
    const rect = canvas.getBoundingClientRect();
    store.dispatch({
      kind: "click",
      x: event.clientX - rect.left,
      y: event.clientY - rect.top,
    });
  });
  slider.addEventListener("input", () =>
    store.dispatch({ kind: "threshold", meters: Number(slider.value) }),
  );
  saveButton.addEventListener("click", () =>
    store.dispatch({ kind: "save", name: nameInput.value.trim() }),
  );

  render(store.state);
}

boot().catch((err) => {
  const status = document.getElementById("status");
  if (status) {
    status.textContent = `failed to start: ${err}`;
    status.classList.add("error");
  }
});
