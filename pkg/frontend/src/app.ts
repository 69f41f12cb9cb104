// Application wiring: sample picker, side-by-side source/result panels,
// graph diagram, edit toolbar and history strip. The server is the single
// source of truth; this module only renders confirmed state.

import { ApiError, Client } from "./api.js";
import { renderBoxOverlays, renderGraph } from "./graphview.js";
import {
  Action, AppState, SubmitGuard, actionEnabled, composeEdit, initialState,
  withConfirmedEdit, withGeneration, withSession,
} from "./state.js";
import type { Vocab } from "./types.js";

const client = new Client("");
const guard = new SubmitGuard();

let state: AppState = initialState();
let vocab: Vocab = { objects: [], predicates: [] };
let hoveredNode: number | null = null;

function $(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node;
}

function setState(next: AppState): void {
  state = next;
  render();
}

function banner(message: string | null): void {
  const box = $("error-banner");
  box.textContent = message ?? "";
  box.classList.toggle("visible", message !== null);
}

async function loadSamples(): Promise<void> {
  const select = $("sample-select") as HTMLSelectElement;
  const { samples } = await client.listSamples("test");
  select.replaceChildren(...samples.map((s) => {
    const opt = document.createElement("option");
    opt.value = s.id;
    opt.textContent = `${s.id} (${s.kind})`;
    return opt;
  }));
}

async function openSession(sampleId: string): Promise<void> {
  try {
    const session = await client.createSession({ sample_id: sampleId });
    banner(null);
    setState(withSession(state, session));
  } catch (err) {
    banner(`could not open session: ${(err as Error).message}`);
    setState(initialState());
  }
}

function populatePicker(select: HTMLSelectElement, names: string[]): void {
  select.replaceChildren(...names.map((name, i) => {
    const opt = document.createElement("option");
    opt.value = `${i}`;
    opt.textContent = name;
    return opt;
  }));
}

function currentAction(): Action {
  return ($("action-select") as HTMLSelectElement).value as Action;
}

function draftContext() {
  const category = Number(($("category-select") as HTMLSelectElement).value);
  const predicate = Number(($("predicate-select") as HTMLSelectElement).value);
  const other = Number(($("other-node") as HTMLInputElement).value);
  const direction = ($("direction-select") as HTMLSelectElement).value as "out" | "in";
  return {
    newCategoryId: Number.isNaN(category) ? undefined : category,
    newPredicateId: Number.isNaN(predicate) ? undefined : predicate,
    addEdges: Number.isNaN(other) ? [] : [{
      predicate_id: predicate, other_node_index: other, direction,
    }],
  };
}

function refreshDraft(): void {
  if (!state.session) {
    return;
  }
  const result = composeEdit(state.session.graph, state.selection, currentAction(),
                             draftContext());
  setState({
    ...state,
    draft: result.draft ?? null,
    draftWarning: result.warning ?? result.error ?? null,
  });
}

async function submitAndView(): Promise<void> {
  const session = state.session;
  const draft = state.draft;
  if (!session || !draft) {
    return;
  }
  await guard.run(async () => {
    try {
      const confirmed = await client.postEdit(session.id, draft);
      let next = withConfirmedEdit(state, confirmed);
      const generated = await client.generate(session.id);
      next = withGeneration(next, generated.image_id);
      banner(null);
      setState(next);
    } catch (err) {
      if (err instanceof ApiError) {
        banner(`edit rejected: ${err.message}`);
      } else {
        banner(`service unreachable: ${(err as Error).message}`);
      }
    }
  });
}

function render(): void {
  const session = state.session;
  const sourcePanel = $("source-panel");
  const resultImg = $("result-image") as HTMLImageElement;
  const sourceImg = $("source-image") as HTMLImageElement;

  if (session && state.sourceImageId) {
    sourceImg.src = client.imageUrl(state.sourceImageId);
    sourcePanel.classList.remove("empty");
  } else {
    sourceImg.removeAttribute("src");
    sourcePanel.classList.add("empty");
  }
  if (state.shownImageId) {
    resultImg.src = client.imageUrl(state.shownImageId);
    resultImg.classList.add("visible");
  } else {
    resultImg.classList.remove("visible");
  }

  const svg = $("graph-svg") as unknown as SVGSVGElement;
  if (session) {
    renderGraph(svg, session.graph, {
      selection: state.selection,
      changedNode: state.changedNode,
      changedEdge: state.changedEdge,
      objectNames: vocab.objects,
      predicateNames: vocab.predicates,
    }, {
      onSelect: (selection) => {
        setState({ ...state, selection });
        refreshDraft();
      },
      onHoverNode: (index) => {
        hoveredNode = index;
        renderBoxOverlays($("source-overlay"), session.graph, hoveredNode, state.selection);
      },
    });
    renderBoxOverlays($("source-overlay"), session.graph, hoveredNode, state.selection);
  } else {
    svg.replaceChildren();
  }

  const action = currentAction();
  ($("submit-btn") as HTMLButtonElement).disabled =
    !state.draft || !actionEnabled(action, state.selection) || guard.pending;
  $("draft-note").textContent = state.draftWarning
    ?? (state.draft ? JSON.stringify(state.draft) : "select a node or edge");

  const strip = $("history-strip");
  strip.replaceChildren(...state.history.map((entry, i) => {
    const chip = document.createElement("button");
    chip.className = "history-chip";
    chip.textContent = `${i + 1}. ${entry.edit.op}`;
    chip.disabled = entry.imageId === null;
    chip.addEventListener("click", () => {
      if (entry.imageId) {
        // cached image: no regeneration round-trip
        setState({ ...state, shownImageId: entry.imageId });
      }
    });
    return chip;
  }));
}

async function boot(): Promise<void> {
  try {
    vocab = await client.vocab();
  } catch (err) {
    banner(`service unreachable: ${(err as Error).message}`);
    return;
  }
  populatePicker($("category-select") as HTMLSelectElement, vocab.objects);
  populatePicker($("predicate-select") as HTMLSelectElement, vocab.predicates);
  await loadSamples();

  $("open-btn").addEventListener("click", () => {
    const id = ($("sample-select") as HTMLSelectElement).value;
    if (id) {
      void openSession(id);
    }
  });
  $("action-select").addEventListener("change", refreshDraft);
  $("category-select").addEventListener("change", refreshDraft);
  $("predicate-select").addEventListener("change", refreshDraft);
  $("other-node").addEventListener("input", refreshDraft);
  $("direction-select").addEventListener("change", refreshDraft);
  $("submit-btn").addEventListener("click", () => void submitAndView());
  render();
}

window.addEventListener("DOMContentLoaded", () => void boot());
