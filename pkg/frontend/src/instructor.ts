/**
 * Instructor dashboard: definition upload with validation feedback,
 * session audits with per-decision term breakdowns, and replay reports
 * rendered as cohort statistics plus a Sankey transition diagram.
 *
 * Every figure shown is a server value; exact fraction strings are
 * displayed verbatim next to their percent rendering.
 */

import {
  ApiError,
  type ReplayReport,
  type SessionAudit,
  TutorClient,
} from "./api.js";
import { clear, el } from "./dom.js";
import { columnLabel, fractionLabel, stageLabel } from "./format.js";
import { renderSankey } from "./sankey.js";

export interface InstructorAppConfig {
  client: TutorClient;
  root: HTMLElement;
}

export class InstructorApp {
  private readonly client: TutorClient;
  private readonly root: HTMLElement;
  private lists!: HTMLElement;
  private detail!: HTMLElement;

  constructor(config: InstructorAppConfig) {
    this.client = config.client;
    this.root = config.root;
  }

  async start(): Promise<void> {
    clear(this.root);
    this.root.append(
      el("h1", {}, ["Training dashboard"]),
      this.uploadPanel(),
      (this.lists = el("div", { "data-testid": "lists" }, [])),
      (this.detail = el("div", { "data-testid": "detail" }, [])),
    );
    await this.refreshLists();
  }

  private async guard(action: () => Promise<void>): Promise<void> {
    try {
      await action();
    } catch (error) {
      if (error instanceof ApiError) {
        this.showError(`${error.code}: ${error.message}`);
        return;
      }
      throw error;
    }
  }

  private showError(message: string): void {
    const existing = this.root.querySelector('[data-testid="error"]');
    if (existing) {
      existing.textContent = message;
      return;
    }
    this.root.prepend(
      el("p", { "data-testid": "error", class: "error", role: "alert" }, [message]),
    );
  }

  // -- definition upload -------------------------------------------------------

  private uploadPanel(): HTMLElement {
    const input = el("textarea", {
      "data-testid": "upload-input",
      placeholder: "Paste a training definition (JSON)",
      rows: "8",
    });
    const result = el("div", { "data-testid": "upload-result" }, []);
    const button = el(
      "button",
      { type: "button", "data-testid": "upload-submit" },
      ["Upload definition"],
    );
    button.addEventListener("click", () => {
      void (async () => {
        let document: unknown;
        try {
          document = JSON.parse(input.value);
        } catch {
          clear(result);
          result.append(el("p", { class: "error" }, ["Not valid JSON."]));
          return;
        }
        clear(result);
        try {
          const upload = await this.client.uploadDefinition(document);
          result.append(
            el("p", { "data-testid": "upload-ok" }, [
              `Uploaded ${upload.id}` +
                (upload.violations.length
                  ? ` with ${upload.violations.length} warning(s)`
                  : ""),
            ]),
            this.violationList(upload.violations),
          );
          await this.refreshLists();
        } catch (error) {
          if (!(error instanceof ApiError)) {
            throw error;
          }
          const details = error.details as { violations?: unknown } | undefined;
          const violations = Array.isArray(details?.violations)
            ? (details.violations as {
                code: string;
                location: string;
                message: string;
                severity: string;
              }[])
            : [];
          result.append(
            el("p", { class: "error", "data-testid": "upload-rejected" }, [
              `${error.code}: ${error.message}`,
            ]),
            this.violationList(violations),
          );
        }
      })();
    });
    return el("section", { "data-testid": "upload" }, [
      el("h2", {}, ["Upload a definition"]),
      input,
      button,
      result,
    ]);
  }

  private violationList(
    violations: { code: string; location: string; message: string; severity: string }[],
  ): HTMLElement {
    const list = el("ul", { "data-testid": "violations" }, []);
    for (const violation of violations) {
      list.append(
        el("li", { "data-testid": `violation-${violation.code}` }, [
          `${violation.severity}: ${violation.code} at ${violation.location}: ${violation.message}`,
        ]),
      );
    }
    return list;
  }

  // -- listings ------------------------------------------------------------------

  async refreshLists(): Promise<void> {
    const [definitions, sessions] = await Promise.all([
      this.client.listDefinitions(),
      this.client.listSessions(),
    ]);
    clear(this.lists);

    const definitionList = el("ul", { "data-testid": "definitions-list" }, []);
    for (const definition of definitions) {
      const replay = el(
        "button",
        { type: "button", "data-testid": `replay-${definition.id}` },
        ["Replay cohort"],
      );
      replay.addEventListener("click", () => {
        void this.guard(() => this.showReplay(definition.id));
      });
      definitionList.append(
        el("li", {}, [`${definition.id}: ${definition.title} `, replay]),
      );
    }

    const sessionList = el("ul", { "data-testid": "sessions-list" }, []);
    for (const session of sessions) {
      const audit = el(
        "button",
        { type: "button", "data-testid": `audit-${session.session_id}` },
        ["Audit"],
      );
      audit.addEventListener("click", () => {
        void this.guard(() => this.showAudit(session.session_id));
      });
      sessionList.append(
        el("li", {}, [
          `${session.session_id} (${stageLabel(session.stage)}) `,
          audit,
        ]),
      );
    }

    this.lists.append(
      el("h2", {}, ["Definitions"]),
      definitionList,
      el("h2", {}, ["Sessions"]),
      sessionList,
    );
  }

  // -- session audit ---------------------------------------------------------------

  async showAudit(sessionId: string): Promise<void> {
    const audit = await this.client.getAudit(sessionId);
    clear(this.detail);
    this.detail.append(this.auditView(audit));
  }

  private auditView(audit: SessionAudit): HTMLElement {
    const vectors = el("table", { "data-testid": "metric-vectors" }, []);
    for (const name of ["p", "k", "a", "t", "s"] as const) {
      vectors.append(
        el("tr", {}, [
          el("th", {}, [name]),
          el("td", { "data-testid": `vector-${name}` }, [
            audit.metric_vectors[name].join(" "),
          ]),
        ]),
      );
    }

    const decisions = el("div", { "data-testid": "decisions" }, []);
    for (const assignment of audit.assignments) {
      const terms = el("table", {}, [
        el("tr", {}, [
          el("th", {}, ["evidence phase"]),
          el("th", {}, ["column"]),
          el("th", {}, ["weight"]),
          el("th", {}, ["satisfied"]),
          el("th", {}, ["contribution"]),
        ]),
      ]);
      for (const term of assignment.terms) {
        terms.append(
          el("tr", { "data-testid": "term-row", class: term.satisfied ? "" : "missed" }, [
            el("td", {}, [String(term.phase)]),
            el("td", {}, [columnLabel(term.column)]),
            el("td", {}, [term.weight]),
            el("td", {}, [term.satisfied ? "yes" : "no"]),
            el("td", {}, [term.contribution]),
          ]),
        );
      }
      decisions.append(
        el("section", { "data-testid": `audit-assignment-${assignment.phase}` }, [
          el("h3", {}, [
            `Phase ${assignment.phase} → task ${assignment.task_index}`,
          ]),
          el("p", {}, [
            "f(x) = ",
            el("span", { "data-testid": `audit-performance-${assignment.phase}` }, [
              assignment.performance,
            ]),
            ` = ${assignment.numerator} / ${assignment.denominator}` +
              ` (${Math.round(assignment.performance_value * 1000) / 10}%)`,
          ]),
          terms,
        ]),
      );
    }

    return el("section", { "data-testid": "audit-view" }, [
      el("h2", {}, [`Audit: ${audit.session_id}`]),
      el("p", {}, [`Stage: ${stageLabel(audit.stage)}`]),
      el("h3", {}, ["Evidence vectors"]),
      vectors,
      el("h3", {}, ["Decisions"]),
      decisions,
    ]);
  }

  // -- replay -------------------------------------------------------------------------

  async showReplay(definitionId: string): Promise<void> {
    const report = await this.client.runReplay({ definition_id: definitionId });
    clear(this.detail);
    this.detail.append(this.replayView(report));
  }

  private replayView(report: ReplayReport): HTMLElement {
    const stats = el("table", { "data-testid": "replay-stats" }, [
      el("tr", {}, [
        el("th", {}, ["participants"]),
        el("td", { "data-testid": "stat-participants" }, [
          String(report.stats.participants),
        ]),
      ]),
      el("tr", {}, [
        el("th", {}, ["completion ratio"]),
        el("td", { "data-testid": "stat-completion" }, [
          fractionLabel(
            report.stats.completion_ratio,
            report.stats.completion_ratio_value,
          ),
        ]),
      ]),
      el("tr", {}, [
        el("th", {}, ["modal end phase"]),
        el("td", {}, [String(report.stats.modal_end_phase)]),
      ]),
      el("tr", {}, [
        el("th", {}, ["average actions"]),
        // A count, not a ratio: pair the exact fraction with its decimal.
        el("td", { "data-testid": "stat-avg-actions" }, [
          report.stats.avg_actions.includes("/")
            ? `${report.stats.avg_actions} (${report.stats.avg_actions_value})`
            : report.stats.avg_actions,
        ]),
      ]),
    ]);

    const view = el("section", { "data-testid": "replay-view" }, [
      el("h2", {}, [`Replay ${report.report_id.slice(0, 8)}: ${report.definition_id}`]),
      el("p", {}, [`${report.participants.length} session(s) replayed`]),
      stats,
      el("h3", {}, ["Task transitions"]),
    ]);
    view.append(renderSankey(report.transitions));
    if (report.variants.length) {
      const variants = el("ul", { "data-testid": "variants" }, []);
      for (const variant of report.variants) {
        const distribution = Object.entries(variant.task_index_distribution)
          .map(([task, count]) => `T${task}: ${count}`)
          .join(", ");
        variants.append(
          el("li", {}, [`Variant ${variant.variant_index}: ${distribution}`]),
        );
      }
      view.append(el("h3", {}, ["Weight variants"]), variants);
    }
    return view;
  }
}
