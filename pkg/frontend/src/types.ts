// Wire types shared with the backend. The edit op shapes must serialize to
// exactly the JSON the server's edit endpoint expects.

export interface GraphNode {
  category: number;
  bbox: [number, number, number, number] | null; // (top, left, bottom, right), normalized
  feature: number[] | null;
  attributes: Record<string, string> | null;
  feature_masked?: boolean;
  bbox_masked?: boolean;
}

export type GraphEdge = [number, number, number]; // [subject, predicate, object]

export interface SceneGraph {
  nodes: GraphNode[];
  edges: GraphEdge[];
  image?: string;
}

export interface NewEdgeSpec {
  predicate_id: number;
  other_node_index: number;
  direction: "out" | "in";
}

export type EditOp =
  | { op: "remove_node"; node_index: number }
  | { op: "replace_category"; node_index: number; new_category_id: number }
  | { op: "change_predicate"; edge_index: number; new_predicate_id: number }
  | { op: "add_node"; category_id: number; new_edges: NewEdgeSpec[] }
  | { op: "reposition_node"; node_index: number };

export interface MaskSummary {
  nodes_feature_masked: number[];
  nodes_bbox_masked: number[];
  occlude_regions: [number, number, number, number][];
  fully_generative: boolean;
}

export interface SessionView {
  id: string;
  graph: SceneGraph;
  history: EditOp[];
  mask: MaskSummary;
  seed: number;
  source_image_id?: string;
}

export interface Vocab {
  objects: string[];
  predicates: string[];
}

export interface SampleEntry {
  id: string;
  kind: string;
}

export interface GenerateResult {
  image_id: string;
  cached: boolean;
  seed: number;
}
