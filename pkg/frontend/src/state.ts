// UI state: a pure projection of the last server-confirmed session plus at
// most one draft edit. Nothing here mutates the graph locally; edits only
// take effect when the server confirms them.

import type { EditOp, SceneGraph, SessionView } from "./types.js";

export type Selection =
  | { kind: "node"; index: number }
  | { kind: "edge"; index: number }
  | null;

export type Action = "remove" | "replace" | "relate" | "add" | "reposition";

export interface DraftContext {
  newCategoryId?: number;
  newPredicateId?: number;
  addEdges?: { predicate_id: number; other_node_index: number; direction: "out" | "in" }[];
}

export interface DraftResult {
  draft?: EditOp;
  warning?: string;
  error?: string;
}

export function actionEnabled(action: Action, selection: Selection): boolean {
  switch (action) {
    case "remove":
    case "replace":
    case "reposition":
      return selection?.kind === "node";
    case "relate":
      return selection?.kind === "edge";
    case "add":
      return true;
  }
}

export function composeEdit(graph: SceneGraph, selection: Selection, action: Action,
                            ctx: DraftContext = {}): DraftResult {
  if (!actionEnabled(action, selection)) {
    return { error: `${action} needs a ${action === "relate" ? "edge" : "node"} selection` };
  }
  switch (action) {
    case "remove":
      return { draft: { op: "remove_node", node_index: (selection as { index: number }).index } };
    case "reposition":
      return { draft: { op: "reposition_node", node_index: (selection as { index: number }).index } };
    case "replace": {
      const index = (selection as { index: number }).index;
      if (ctx.newCategoryId === undefined) {
        return { error: "pick a category" };
      }
      if (graph.nodes[index]?.category === ctx.newCategoryId) {
        return { draft: { op: "replace_category", node_index: index, new_category_id: ctx.newCategoryId },
                 warning: "replacement with the same category is a no-op" };
      }
      return { draft: { op: "replace_category", node_index: index, new_category_id: ctx.newCategoryId } };
    }
    case "relate": {
      const index = (selection as { index: number }).index;
      if (ctx.newPredicateId === undefined) {
        return { error: "pick a predicate" };
      }
      const edge = graph.edges[index];
      if (edge && edge[1] === ctx.newPredicateId) {
        return { draft: { op: "change_predicate", edge_index: index, new_predicate_id: ctx.newPredicateId },
                 warning: "predicate unchanged; boxes will still be re-estimated" };
      }
      return { draft: { op: "change_predicate", edge_index: index, new_predicate_id: ctx.newPredicateId } };
    }
    case "add": {
      if (ctx.newCategoryId === undefined) {
        return { error: "pick a category" };
      }
      const edges = ctx.addEdges ?? [];
      for (const e of edges) {
        if (e.other_node_index < 0 || e.other_node_index >= graph.nodes.length) {
          return { error: `edge references missing node ${e.other_node_index}` };
        }
      }
      return { draft: { op: "add_node", category_id: ctx.newCategoryId, new_edges: edges } };
    }
  }
}

export interface HistoryEntry {
  edit: EditOp;
  imageId: string | null; // cached generation result for this step, if any
}

export interface AppState {
  session: SessionView | null;
  selection: Selection;
  draft: EditOp | null;
  draftWarning: string | null;
  sourceImageId: string | null;
  shownImageId: string | null;
  history: HistoryEntry[];
  changedNode: number | null; // highlight target after a confirmed edit
  changedEdge: number | null;
  busy: boolean;
  error: string | null;
}

export function initialState(): AppState {
  return {
    session: null, selection: null, draft: null, draftWarning: null,
    sourceImageId: null, shownImageId: null, history: [],
    changedNode: null, changedEdge: null, busy: false, error: null,
  };
}

export function withSession(state: AppState, session: SessionView): AppState {
  return {
    ...initialState(),
    session,
    sourceImageId: session.source_image_id ?? state.sourceImageId,
    history: session.history.map((edit) => ({ edit, imageId: null })),
  };
}

function highlightOf(edit: EditOp, graph: SceneGraph): Pick<AppState, "changedNode" | "changedEdge"> {
  switch (edit.op) {
    case "remove_node":
      return { changedNode: null, changedEdge: null };
    case "replace_category":
    case "reposition_node":
      return { changedNode: edit.node_index, changedEdge: null };
    case "change_predicate":
      return { changedNode: null, changedEdge: edit.edge_index };
    case "add_node":
      return { changedNode: graph.nodes.length - 1, changedEdge: null };
  }
}

export function withConfirmedEdit(state: AppState, session: SessionView): AppState {
  const edit = session.history[session.history.length - 1];
  return {
    ...state,
    session,
    selection: null,
    draft: null,
    draftWarning: null,
    history: [...state.history, { edit, imageId: null }],
    ...highlightOf(edit, session.graph),
  };
}

export function withGeneration(state: AppState, imageId: string): AppState {
  const history = state.history.slice();
  if (history.length > 0) {
    history[history.length - 1] = { ...history[history.length - 1], imageId };
  }
  return { ...state, history, shownImageId: imageId };
}

/** Serializes submit actions: while one request is in flight, further
 * submits are ignored instead of queued. */
export class SubmitGuard {
  private inFlight = false;

  async run<T>(task: () => Promise<T>): Promise<T | null> {
    if (this.inFlight) {
      return null;
    }
    this.inFlight = true;
    try {
      return await task();
    } finally {
      this.inFlight = false;
    }
  }

  get pending(): boolean {
    return this.inFlight;
  }
}
