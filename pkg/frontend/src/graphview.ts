// Node-link diagram: a small deterministic force layout plus SVG rendering,
// and bounding-box overlays linking diagram nodes to image regions.

import type { SceneGraph } from "./types.js";
import type { Selection } from "./state.js";

export interface Point {
  x: number;
  y: number;
}

export function forceLayout(graph: SceneGraph, width: number, height: number,
                            iterations = 120): Point[] {
  const n = graph.nodes.length;
  if (n === 0) {
    return [];
  }
  // deterministic start: ring order
  const pts: Point[] = graph.nodes.map((_, i) => ({
    x: width / 2 + Math.cos((2 * Math.PI * i) / n) * width * 0.3,
    y: height / 2 + Math.sin((2 * Math.PI * i) / n) * height * 0.3,
  }));
  const springLength = Math.min(width, height) / 2.6;
  for (let it = 0; it < iterations; it++) {
    const step = 0.08 * (1 - it / iterations) + 0.01;
    const force: Point[] = pts.map(() => ({ x: 0, y: 0 }));
    for (let i = 0; i < n; i++) {
      for (let j = i + 1; j < n; j++) {
        let dx = pts[j].x - pts[i].x;
        let dy = pts[j].y - pts[i].y;
        const d2 = Math.max(dx * dx + dy * dy, 1);
        const d = Math.sqrt(d2);
        const repel = (springLength * springLength) / d2 * 14;
        dx /= d;
        dy /= d;
        force[i].x -= dx * repel;
        force[i].y -= dy * repel;
        force[j].x += dx * repel;
        force[j].y += dy * repel;
      }
    }
    for (const [s, , o] of graph.edges) {
      const dx = pts[o].x - pts[s].x;
      const dy = pts[o].y - pts[s].y;
      const d = Math.max(Math.hypot(dx, dy), 1);
      const pull = (d - springLength) * 0.06;
      force[s].x += (dx / d) * pull;
      force[s].y += (dy / d) * pull;
      force[o].x -= (dx / d) * pull;
      force[o].y -= (dy / d) * pull;
    }
    for (let i = 0; i < n; i++) {
      force[i].x += (width / 2 - pts[i].x) * 0.01;
      force[i].y += (height / 2 - pts[i].y) * 0.01;
      pts[i].x = Math.min(width - 28, Math.max(28, pts[i].x + force[i].x * step * 10));
      pts[i].y = Math.min(height - 22, Math.max(22, pts[i].y + force[i].y * step * 10));
    }
  }
  return pts;
}

const SVG_NS = "http://www.w3.org/2000/svg";

export interface GraphViewCallbacks {
  onSelect(selection: Selection): void;
  onHoverNode(index: number | null): void;
}

export interface RenderOptions {
  selection: Selection;
  changedNode: number | null;
  changedEdge: number | null;
  objectNames: string[];
  predicateNames: string[];
}

function el<K extends keyof SVGElementTagNameMap>(tag: K, attrs: Record<string, string>)
    : SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) {
    node.setAttribute(k, v);
  }
  return node;
}

export function renderGraph(svg: SVGSVGElement, graph: SceneGraph,
                            opts: RenderOptions, cb: GraphViewCallbacks): void {
  svg.replaceChildren();
  const width = svg.clientWidth || 460;
  const height = svg.clientHeight || 360;
  const pts = forceLayout(graph, width, height);

  const defs = el("defs", {});
  const marker = el("marker", {
    id: "arrow", viewBox: "0 0 8 8", refX: "7", refY: "4",
    markerWidth: "6", markerHeight: "6", orient: "auto-start-reverse",
  });
  marker.appendChild(el("path", { d: "M0,0 L8,4 L0,8 z", fill: "#8892a6" }));
  defs.appendChild(marker);
  svg.appendChild(defs);

  graph.edges.forEach(([s, p, o], k) => {
    const a = pts[s];
    const b = pts[o];
    const dx = b.x - a.x;
    const dy = b.y - a.y;
    const d = Math.max(Math.hypot(dx, dy), 1);
    const trim = 26;
    const x1 = a.x + (dx / d) * trim;
    const y1 = a.y + (dy / d) * trim;
    const x2 = b.x - (dx / d) * trim;
    const y2 = b.y - (dy / d) * trim;
    const selected = opts.selection?.kind === "edge" && opts.selection.index === k;
    const line = el("line", {
      x1: `${x1}`, y1: `${y1}`, x2: `${x2}`, y2: `${y2}`,
      class: `edge${selected ? " selected" : ""}${opts.changedEdge === k ? " changed" : ""}`,
      "marker-end": "url(#arrow)",
    });
    line.addEventListener("click", (ev) => {
      ev.stopPropagation();
      cb.onSelect({ kind: "edge", index: k });
    });
    svg.appendChild(line);
    const label = el("text", {
      x: `${(x1 + x2) / 2}`, y: `${(y1 + y2) / 2 - 5}`,
      class: `edge-label${selected ? " selected" : ""}`,
    });
    label.textContent = opts.predicateNames[p] ?? `p${p}`;
    label.addEventListener("click", (ev) => {
      ev.stopPropagation();
      cb.onSelect({ kind: "edge", index: k });
    });
    svg.appendChild(label);
  });

  graph.nodes.forEach((node, i) => {
    const selected = opts.selection?.kind === "node" && opts.selection.index === i;
    const g = el("g", {
      class: `node${selected ? " selected" : ""}${opts.changedNode === i ? " changed" : ""}`,
      transform: `translate(${pts[i].x},${pts[i].y})`,
    });
    g.appendChild(el("circle", { r: "22" }));
    const label = el("text", { y: "4", "text-anchor": "middle" });
    const name = opts.objectNames[node.category] ?? `obj ${node.category}`;
    label.textContent = name.length > 14 ? `${name.slice(0, 13)}…` : name;
    g.appendChild(label);
    if (node.feature_masked || node.bbox_masked) {
      const flag = el("text", { y: "-28", "text-anchor": "middle", class: "masked-flag" });
      flag.textContent = node.feature_masked ? "φ✕" : "x✕";
      g.appendChild(flag);
    }
    g.addEventListener("click", (ev) => {
      ev.stopPropagation();
      cb.onSelect({ kind: "node", index: i });
    });
    g.addEventListener("mouseenter", () => cb.onHoverNode(i));
    g.addEventListener("mouseleave", () => cb.onHoverNode(null));
    svg.appendChild(g);
  });

  svg.addEventListener("click", () => cb.onSelect(null), { once: true });
}

export function renderBoxOverlays(container: HTMLElement, graph: SceneGraph,
                                  hovered: number | null, selection: Selection): void {
  container.querySelectorAll(".bbox").forEach((b) => b.remove());
  graph.nodes.forEach((node, i) => {
    if (!node.bbox) {
      return;
    }
    const [t, l, b, r] = node.bbox;
    const div = document.createElement("div");
    div.className = "bbox";
    if (hovered === i || (selection?.kind === "node" && selection.index === i)) {
      div.classList.add("active");
    }
    div.style.top = `${t * 100}%`;
    div.style.left = `${l * 100}%`;
    div.style.height = `${(b - t) * 100}%`;
    div.style.width = `${(r - l) * 100}%`;
    container.appendChild(div);
  });
}
