import { describe, expect, it } from "vitest";

import {
  columnLabel,
  fractionLabel,
  secondsLabel,
  stageLabel,
} from "../src/format.js";

describe("fractionLabel", () => {
  it("pairs a proper fraction with its percent rendering", () => {
    expect(fractionLabel("3/4", 0.75)).toBe("3/4 (75%)");
    expect(fractionLabel("1/2", 0.5)).toBe("1/2 (50%)");
  });

  it("rounds the percent to one decimal", () => {
    expect(fractionLabel("1/3", 1 / 3)).toBe("1/3 (33.3%)");
    expect(fractionLabel("2/3", 2 / 3)).toBe("2/3 (66.7%)");
  });

  it("leaves whole numbers alone", () => {
    expect(fractionLabel("1", 1)).toBe("1");
    expect(fractionLabel("0", 0)).toBe("0");
  });
});

describe("stageLabel", () => {
  it("names the lifecycle stages", () => {
    expect(stageLabel("intro")).toBe("Introduction");
    expect(stageLabel("questionnaire")).toBe("Questionnaire");
    expect(stageLabel("finished")).toBe("Finished");
    expect(stageLabel("corrupt")).toBe("Unreadable log");
  });

  it("extracts the phase number from parameterized stages", () => {
    expect(stageLabel("in_phase(3)")).toBe("Phase 3");
    expect(stageLabel("awaiting_decision(2)")).toBe("Deciding phase 2");
  });

  it("passes unknown stages through", () => {
    expect(stageLabel("weird")).toBe("weird");
  });
});

describe("secondsLabel", () => {
  it("renders whole minutes compactly", () => {
    expect(secondsLabel(300)).toBe("5 min");
    expect(secondsLabel(420)).toBe("7 min");
  });

  it("renders leftover seconds as m:ss", () => {
    expect(secondsLabel(330)).toBe("5:30 min");
    expect(secondsLabel(65)).toBe("1:05 min");
  });
});

describe("columnLabel", () => {
  it("maps weight columns to their greek letters", () => {
    expect(columnLabel("alpha")).toContain("α");
    expect(columnLabel("beta")).toContain("β");
    expect(columnLabel("gamma")).toContain("γ");
    expect(columnLabel("delta")).toContain("δ");
    expect(columnLabel("epsilon")).toContain("ε");
  });

  it("passes unknown columns through", () => {
    expect(columnLabel("zeta")).toBe("zeta");
  });
});
