/**
 * Sankey rendering for the transition graphs the replay endpoint
 * returns. The layout is pure data (testable without a DOM); the
 * renderer turns it into a standalone SVG element.
 *
 * Nodes arrive as {name: "P<x>T<y>", phase, task, count, ends} and links
 * as integer node indices, exactly as served.
 */

import type { SankeyData } from "./api.js";

export interface SankeyOptions {
  width: number;
  height: number;
  nodeWidth: number;
  nodeGap: number;
}

const DEFAULTS: SankeyOptions = {
  width: 720,
  height: 360,
  nodeWidth: 18,
  nodeGap: 10,
};

export interface PlacedNode {
  name: string;
  phase: number;
  task: number;
  count: number;
  ends: number;
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface Ribbon {
  source: number;
  target: number;
  value: number;
  thickness: number;
  path: string;
}

export interface SankeyLayout {
  width: number;
  height: number;
  nodes: PlacedNode[];
  ribbons: Ribbon[];
}

export function layoutSankey(
  data: SankeyData,
  options: Partial<SankeyOptions> = {},
): SankeyLayout {
  const opts = { ...DEFAULTS, ...options };
  if (data.nodes.length === 0) {
    return { width: opts.width, height: opts.height, nodes: [], ribbons: [] };
  }

  const phases = [...new Set(data.nodes.map((n) => n.phase))].sort((a, b) => a - b);
  const columnOf = new Map(phases.map((phase, i) => [phase, i]));
  const columns: number[][] = phases.map(() => []);
  data.nodes.forEach((node, index) => {
    columns[columnOf.get(node.phase)!]!.push(index);
  });
  for (const column of columns) {
    column.sort((a, b) => data.nodes[a]!.task - data.nodes[b]!.task);
  }

  // One participant-count unit maps to the same pixel height everywhere,
  // chosen so the fullest column still fits.
  let scale = Infinity;
  for (const column of columns) {
    const total = column.reduce((sum, i) => sum + data.nodes[i]!.count, 0);
    const gaps = opts.nodeGap * (column.length - 1);
    if (total > 0) {
      scale = Math.min(scale, (opts.height - gaps) / total);
    }
  }
  if (!Number.isFinite(scale)) {
    scale = 1;
  }

  const span =
    phases.length > 1
      ? (opts.width - opts.nodeWidth) / (phases.length - 1)
      : 0;
  const placed: PlacedNode[] = new Array(data.nodes.length);
  for (const [columnIndex, column] of columns.entries()) {
    let y = 0;
    for (const nodeIndex of column) {
      const node = data.nodes[nodeIndex]!;
      placed[nodeIndex] = {
        name: node.name,
        phase: node.phase,
        task: node.task,
        count: node.count,
        ends: node.ends,
        x: columnIndex * span,
        y,
        width: opts.nodeWidth,
        height: Math.max(node.count * scale, 2),
      };
      y += placed[nodeIndex]!.height + opts.nodeGap;
    }
  }

  // Stack each node's link anchors top-down in link order so ribbons
  // leaving or entering a node never overlap.
  const outOffset = new Array(data.nodes.length).fill(0) as number[];
  const inOffset = new Array(data.nodes.length).fill(0) as number[];
  const ordered = [...data.links].sort((a, b) => {
    const sa = placed[a.source]!;
    const sb = placed[b.source]!;
    if (sa.y !== sb.y) return sa.y - sb.y;
    return placed[a.target]!.y - placed[b.target]!.y;
  });
  const ribbons: Ribbon[] = ordered.map((link) => {
    const source = placed[link.source]!;
    const target = placed[link.target]!;
    const thickness = Math.max(link.value * scale, 1);
    const sy = source.y + outOffset[link.source]! + thickness / 2;
    const ty = target.y + inOffset[link.target]! + thickness / 2;
    outOffset[link.source]! += thickness;
    inOffset[link.target]! += thickness;
    const x0 = source.x + source.width;
    const x1 = target.x;
    const bend = (x1 - x0) / 2;
    return {
      source: link.source,
      target: link.target,
      value: link.value,
      thickness,
      path: `M ${x0} ${sy} C ${x0 + bend} ${sy}, ${x1 - bend} ${ty}, ${x1} ${ty}`,
    };
  });

  return { width: opts.width, height: opts.height, nodes: placed, ribbons };
}

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [name, value] of Object.entries(attrs)) {
    node.setAttribute(name, value);
  }
  return node;
}

export function renderSankey(
  data: SankeyData,
  options: Partial<SankeyOptions> = {},
): SVGSVGElement {
  const layout = layoutSankey(data, options);
  const margin = 40;
  const svg = svgEl("svg", {
    viewBox: `${-margin / 2} ${-margin / 2} ${layout.width + margin} ${layout.height + margin}`,
    width: String(layout.width),
    "data-testid": "sankey",
    role: "img",
  }) as SVGSVGElement;

  for (const ribbon of layout.ribbons) {
    const path = svgEl("path", {
      d: ribbon.path,
      fill: "none",
      stroke: "#7aa6c2",
      "stroke-opacity": "0.5",
      "stroke-width": String(ribbon.thickness),
      "data-testid": `link-${ribbon.source}-${ribbon.target}`,
    });
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent =
      `${layout.nodes[ribbon.source]!.name} → ` +
      `${layout.nodes[ribbon.target]!.name}: ${ribbon.value}`;
    path.append(title);
    svg.append(path);
  }

  for (const node of layout.nodes) {
    svg.append(
      svgEl("rect", {
        x: String(node.x),
        y: String(node.y),
        width: String(node.width),
        height: String(node.height),
        fill: "#35506b",
        "data-testid": `node-${node.name}`,
      }),
    );
    const label = svgEl("text", {
      x: String(node.x + node.width + 4),
      y: String(node.y + node.height / 2 + 4),
      "font-size": "12",
    });
    label.textContent = `${node.name} (${node.count}${node.ends ? `, ${node.ends} end` : ""})`;
    svg.append(label);
  }
  return svg;
}
