import { describe, expect, it } from "vitest";

import type { SankeyData } from "../src/api.js";
import { layoutSankey, renderSankey } from "../src/sankey.js";

const DATA: SankeyData = {
  training: "mini",
  nodes: [
    { name: "P1T1", phase: 1, task: 1, count: 3, ends: 0 },
    { name: "P1T2", phase: 1, task: 2, count: 1, ends: 0 },
    { name: "P2T1", phase: 2, task: 1, count: 2, ends: 2 },
    { name: "P2T2", phase: 2, task: 2, count: 2, ends: 2 },
  ],
  links: [
    { source: 0, target: 2, value: 2 },
    { source: 0, target: 3, value: 1 },
    { source: 1, target: 3, value: 1 },
  ],
};

describe("layoutSankey", () => {
  it("places one column per phase, ordered by task", () => {
    const layout = layoutSankey(DATA);
    const [n0, n1, n2, n3] = layout.nodes;
    expect(n0!.x).toBe(0);
    expect(n1!.x).toBe(0);
    expect(n2!.x).toBe(720 - 18);
    expect(n3!.x).toBe(720 - 18);
    // Within a column, lower task index sits higher.
    expect(n0!.y).toBeLessThan(n1!.y);
    expect(n2!.y).toBeLessThan(n3!.y);
  });

  it("scales node heights by participant count with one global scale", () => {
    const layout = layoutSankey(DATA);
    // Both columns total 4 with one 10px gap: scale = (360 - 10) / 4.
    const scale = (360 - 10) / 4;
    expect(layout.nodes[0]!.height).toBeCloseTo(3 * scale);
    expect(layout.nodes[1]!.height).toBeCloseTo(1 * scale);
    expect(layout.nodes[2]!.height).toBeCloseTo(2 * scale);
    expect(layout.nodes[3]!.height).toBeCloseTo(2 * scale);
  });

  it("makes ribbon thickness proportional to link value", () => {
    const layout = layoutSankey(DATA);
    const scale = (360 - 10) / 4;
    for (const ribbon of layout.ribbons) {
      expect(ribbon.thickness).toBeCloseTo(ribbon.value * scale);
    }
  });

  it("stacks ribbons inside their end nodes without overlap", () => {
    const layout = layoutSankey(DATA);
    const outgoing = new Map<number, number>();
    const incoming = new Map<number, number>();
    for (const ribbon of layout.ribbons) {
      outgoing.set(
        ribbon.source,
        (outgoing.get(ribbon.source) ?? 0) + ribbon.thickness,
      );
      incoming.set(
        ribbon.target,
        (incoming.get(ribbon.target) ?? 0) + ribbon.thickness,
      );
    }
    for (const [index, total] of outgoing) {
      expect(total).toBeLessThanOrEqual(layout.nodes[index]!.height + 1e-9);
    }
    for (const [index, total] of incoming) {
      expect(total).toBeLessThanOrEqual(layout.nodes[index]!.height + 1e-9);
    }
  });

  it("anchors every ribbon within its nodes' vertical extent", () => {
    const layout = layoutSankey(DATA);
    for (const ribbon of layout.ribbons) {
      const source = layout.nodes[ribbon.source]!;
      const target = layout.nodes[ribbon.target]!;
      const match = ribbon.path.match(
        /^M (\S+) (\S+) C \S+ \S+, \S+ \S+, (\S+) (\S+)$/,
      );
      expect(match).not.toBeNull();
      const [, x0, sy, x1, ty] = match!.map(Number);
      expect(x0).toBeCloseTo(source.x + source.width);
      expect(x1).toBeCloseTo(target.x);
      expect(sy! - ribbon.thickness / 2).toBeGreaterThanOrEqual(source.y - 1e-9);
      expect(sy! + ribbon.thickness / 2).toBeLessThanOrEqual(
        source.y + source.height + 1e-9,
      );
      expect(ty! - ribbon.thickness / 2).toBeGreaterThanOrEqual(target.y - 1e-9);
      expect(ty! + ribbon.thickness / 2).toBeLessThanOrEqual(
        target.y + target.height + 1e-9,
      );
    }
  });

  it("keeps tiny nodes visible", () => {
    const layout = layoutSankey({
      training: "t",
      nodes: [
        { name: "P1T1", phase: 1, task: 1, count: 1000, ends: 0 },
        { name: "P2T1", phase: 2, task: 1, count: 1, ends: 1 },
        { name: "P2T2", phase: 2, task: 2, count: 999, ends: 999 },
      ],
      links: [
        { source: 0, target: 1, value: 1 },
        { source: 0, target: 2, value: 999 },
      ],
    });
    for (const node of layout.nodes) {
      expect(node.height).toBeGreaterThanOrEqual(2);
    }
    for (const ribbon of layout.ribbons) {
      expect(ribbon.thickness).toBeGreaterThanOrEqual(1);
    }
  });

  it("handles an empty graph and a single column", () => {
    const empty = layoutSankey({ training: "t", nodes: [], links: [] });
    expect(empty.nodes).toEqual([]);
    expect(empty.ribbons).toEqual([]);

    const single = layoutSankey({
      training: "t",
      nodes: [{ name: "P1T1", phase: 1, task: 1, count: 2, ends: 2 }],
      links: [],
    });
    expect(single.nodes[0]!.x).toBe(0);
  });
});

describe("renderSankey", () => {
  it("draws a rect per node and a path per link", () => {
    const svg = renderSankey(DATA);
    expect(svg.getAttribute("data-testid")).toBe("sankey");
    for (const name of ["P1T1", "P1T2", "P2T1", "P2T2"]) {
      expect(svg.querySelector(`[data-testid="node-${name}"]`)).not.toBeNull();
    }
    expect(svg.querySelectorAll("path")).toHaveLength(3);
    const link = svg.querySelector('[data-testid="link-0-2"]');
    expect(link).not.toBeNull();
    const scale = (360 - 10) / 4;
    expect(Number(link!.getAttribute("stroke-width"))).toBeCloseTo(2 * scale);
    expect(link!.querySelector("title")!.textContent).toBe("P1T1 → P2T1: 2");
  });

  it("labels nodes with counts and end totals", () => {
    const svg = renderSankey(DATA);
    const labels = [...svg.querySelectorAll("text")].map((t) => t.textContent);
    expect(labels).toContain("P1T1 (3)");
    expect(labels).toContain("P2T1 (2, 2 end)");
  });
});
