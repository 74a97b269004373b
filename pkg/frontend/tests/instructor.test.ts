import { beforeEach, describe, expect, it } from "vitest";

import { TutorClient } from "../src/api.js";
import { InstructorApp } from "../src/instructor.js";
import { fakeFetch, testId, until } from "./helpers.js";

const AUDIT = {
  session_id: "s1",
  definition_id: "mini",
  stage: "finished",
  metric_vectors: {
    p: [1, 0],
    k: [1, 1],
    a: [1, 0],
    t: [0, 1],
    s: [1, 1],
  },
  assignments: [
    {
      phase: 1,
      task_index: 2,
      performance: "1/2",
      performance_value: 0.5,
      numerator: "3",
      denominator: "6",
      terms: [
        {
          phase: 1,
          column: "alpha",
          weight: "1",
          satisfied: true,
          contribution: "1",
        },
        {
          phase: 1,
          column: "epsilon",
          weight: "1/2",
          satisfied: false,
          contribution: "0",
        },
      ],
    },
    {
      phase: 2,
      task_index: 1,
      performance: "3/4",
      performance_value: 0.75,
      numerator: "9",
      denominator: "12",
      terms: [
        {
          phase: 1,
          column: "alpha",
          weight: "1",
          satisfied: true,
          contribution: "1",
        },
      ],
    },
  ],
  outcomes: [],
  pretraining_answers: { "q-quiz": "beta" },
  questionnaire_answers: [],
  events: [],
};

const TRANSITIONS = {
  training: "mini",
  nodes: [
    { name: "P1T1", phase: 1, task: 1, count: 2, ends: 0 },
    { name: "P2T1", phase: 2, task: 1, count: 2, ends: 2 },
  ],
  links: [{ source: 0, target: 1, value: 2 }],
};

const REPORT = {
  report_id: "0123456789abcdef",
  definition_id: "mini",
  created_at: 0,
  participants: ["s1", "s2"],
  paths: [],
  transitions: TRANSITIONS,
  stats: {
    training: "mini",
    participants: 2,
    completion_ratio: "1/2",
    completion_ratio_value: 0.5,
    modal_end_phase: 2,
    avg_actions: "17/2",
    avg_actions_value: 8.5,
  },
  stats_csv: "training,participants\nmini,2\n",
  variants: [
    {
      variant_index: 0,
      transitions: TRANSITIONS,
      task_index_distribution: { "1": 4 },
    },
  ],
};

class FakeService {
  uploaded: unknown[] = [];
  replayRequests: unknown[] = [];
  definitions = [{ id: "mini", title: "Mini training" }];

  readonly route = (method: string, path: string, body: unknown) => {
    if (path === "/definitions" && method === "GET") {
      return { body: this.definitions };
    }
    if (path === "/definitions" && method === "POST") {
      const id = (body as { id?: string }).id ?? "";
      if (id === "bad") {
        return {
          status: 422,
          body: {
            code: "VALIDATION_FAILED",
            message: "definition invalid",
            details: {
              violations: [
                {
                  code: "DUPLICATE_PHASE_INDEX",
                  location: "phases[1]",
                  message: "phase index repeated",
                  severity: "error",
                },
              ],
            },
          },
        };
      }
      this.uploaded.push(body);
      this.definitions = [...this.definitions, { id, title: id }];
      return {
        status: 201,
        body: {
          id,
          violations: [
            {
              code: "UNREACHABLE_TASK",
              location: "phases[0].tasks[2]",
              message: "never assigned",
              severity: "warning",
            },
          ],
        },
      };
    }
    if (path === "/sessions" && method === "GET") {
      return {
        body: [
          {
            session_id: "s1",
            definition_id: "mini",
            stage: "finished",
            phase: null,
            completed_phases: 2,
            phase_count: 2,
            length: 14,
            last_timestamp: 0,
            questionnaire_submitted: true,
          },
        ],
      };
    }
    if (path === "/sessions/s1/audit" && method === "GET") {
      return { body: AUDIT };
    }
    if (path === "/replay" && method === "POST") {
      this.replayRequests.push(body);
      return { status: 201, body: REPORT };
    }
    return undefined;
  };
}

function makeApp(service: FakeService) {
  const { impl, calls } = fakeFetch(service.route);
  const client = new TutorClient({
    baseUrl: "http://svc:1",
    token: "tok-i",
    fetchImpl: impl,
  });
  const root = document.createElement("div");
  document.body.append(root);
  return { app: new InstructorApp({ client, root }), root, calls };
}

describe("InstructorApp", () => {
  let service: FakeService;

  beforeEach(() => {
    document.body.innerHTML = "";
    service = new FakeService();
  });

  it("lists definitions and sessions on start", async () => {
    const { app, root } = makeApp(service);
    await app.start();
    expect(testId(root, "definitions-list").textContent).toContain(
      "mini: Mini training",
    );
    expect(testId(root, "sessions-list").textContent).toContain(
      "s1 (Finished)",
    );
    expect(root.querySelector('[data-testid="replay-mini"]')).not.toBeNull();
    expect(root.querySelector('[data-testid="audit-s1"]')).not.toBeNull();
  });

  it("rejects malformed JSON before calling the service", async () => {
    const { app, root, calls } = makeApp(service);
    await app.start();
    const before = calls.length;
    testId<HTMLTextAreaElement>(root, "upload-input").value = "{nope";
    testId<HTMLButtonElement>(root, "upload-submit").click();
    await until(
      () => testId(root, "upload-result").textContent !== "",
      "JSON parse error",
    );
    expect(testId(root, "upload-result").textContent).toBe("Not valid JSON.");
    expect(calls.length).toBe(before);
  });

  it("shows upload warnings and refreshes the definition list", async () => {
    const { app, root } = makeApp(service);
    await app.start();
    testId<HTMLTextAreaElement>(root, "upload-input").value = JSON.stringify({
      id: "mini2",
    });
    testId<HTMLButtonElement>(root, "upload-submit").click();
    await until(
      () => root.querySelector('[data-testid="upload-ok"]') !== null,
      "upload confirmation",
    );
    expect(testId(root, "upload-ok").textContent).toBe(
      "Uploaded mini2 with 1 warning(s)",
    );
    expect(
      testId(root, "violation-UNREACHABLE_TASK").textContent,
    ).toBe("warning: UNREACHABLE_TASK at phases[0].tasks[2]: never assigned");
    await until(
      () => testId(root, "definitions-list").textContent!.includes("mini2"),
      "refreshed definition list",
    );
  });

  it("renders rejection envelopes with their violations", async () => {
    const { app, root } = makeApp(service);
    await app.start();
    testId<HTMLTextAreaElement>(root, "upload-input").value = JSON.stringify({
      id: "bad",
    });
    testId<HTMLButtonElement>(root, "upload-submit").click();
    await until(
      () => root.querySelector('[data-testid="upload-rejected"]') !== null,
      "upload rejection",
    );
    expect(testId(root, "upload-rejected").textContent).toBe(
      "VALIDATION_FAILED: definition invalid",
    );
    expect(
      testId(root, "violation-DUPLICATE_PHASE_INDEX").textContent,
    ).toBe("error: DUPLICATE_PHASE_INDEX at phases[1]: phase index repeated");
    expect(service.uploaded).toHaveLength(0);
  });

  it("renders the session audit with exact server fractions", async () => {
    const { app, root } = makeApp(service);
    await app.start();
    testId<HTMLButtonElement>(root, "audit-s1").click();
    await until(
      () => root.querySelector('[data-testid="audit-view"]') !== null,
      "audit view",
    );

    expect(testId(root, "vector-p").textContent).toBe("1 0");
    expect(testId(root, "vector-t").textContent).toBe("0 1");

    // The displayed f(x) is the server's string, character for character.
    expect(testId(root, "audit-performance-1").textContent).toBe("1/2");
    expect(testId(root, "audit-performance-2").textContent).toBe("3/4");

    const first = testId(root, "audit-assignment-1");
    expect(first.querySelector("h3")!.textContent).toBe("Phase 1 → task 2");
    expect(first.textContent).toContain("= 3 / 6 (50%)");
    const rows = first.querySelectorAll('[data-testid="term-row"]');
    expect(rows).toHaveLength(2);
    expect(rows[0]!.classList.contains("missed")).toBe(false);
    expect(rows[1]!.classList.contains("missed")).toBe(true);
    expect(rows[1]!.textContent).toContain("ε");
    expect(rows[1]!.textContent).toContain("no");
  });

  it("renders replay stats, the transition diagram, and variants", async () => {
    const { app, root } = makeApp(service);
    await app.start();
    testId<HTMLButtonElement>(root, "replay-mini").click();
    await until(
      () => root.querySelector('[data-testid="replay-view"]') !== null,
      "replay view",
    );
    expect(service.replayRequests).toEqual([{ definition_id: "mini" }]);
    expect(testId(root, "stat-participants").textContent).toBe("2");
    expect(testId(root, "stat-completion").textContent).toBe("1/2 (50%)");
    expect(testId(root, "stat-avg-actions").textContent).toBe("17/2 (8.5)");

    const svg = root.querySelector('[data-testid="sankey"]');
    expect(svg).not.toBeNull();
    expect(svg!.querySelector('[data-testid="node-P1T1"]')).not.toBeNull();
    expect(svg!.querySelector('[data-testid="node-P2T1"]')).not.toBeNull();
    expect(svg!.querySelector('[data-testid="link-0-1"]')).not.toBeNull();

    expect(testId(root, "variants").textContent).toContain("Variant 0: T1: 4");
  });
});
