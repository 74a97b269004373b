/**
 * Trainee runner: intro with the pre-training assessment, one screen per
 * phase task, the closing questionnaire, and a summary.
 *
 * All state lives on the server; every screen is rendered from a fresh
 * fetch, so a page refresh resumes the session exactly where it was.
 * The client shows scores the server sent and never computes its own.
 */

import {
  ApiError,
  type AssignmentView,
  type TraineeDefinition,
  TutorClient,
} from "./api.js";
import { clear, el } from "./dom.js";
import { fractionLabel, secondsLabel } from "./format.js";

/** The fixed self-report scale; redacted definitions carry no options
 * for these questions because the scale is not per-question data. */
export const SELF_REPORT_OPTIONS = ["High", "Medium", "Low", "None"] as const;

const REVEAL_WARNING =
  "Revealing the solution cannot be undone: this phase permanently stops " +
  "counting toward your behavioral score, and later tasks will be chosen " +
  "as if the phase had not been solved by you. Continue?";

export interface TraineeAppConfig {
  client: TutorClient;
  sessionId: string;
  root: HTMLElement;
  /** Event timestamps; defaults to Date.now. */
  now?: () => number;
  /** Solution confirmation; defaults to window.confirm. */
  confirmReveal?: (message: string) => boolean;
}

export class TraineeApp {
  private readonly client: TutorClient;
  private readonly sessionId: string;
  private readonly root: HTMLElement;
  private definition: TraineeDefinition | null = null;
  private notice = "";

  constructor(private readonly config: TraineeAppConfig) {
    this.client = config.client;
    this.sessionId = config.sessionId;
    this.root = config.root;
  }

  private now(): number {
    return (this.config.now ?? Date.now)();
  }

  private confirmReveal(): boolean {
    if (this.config.confirmReveal) {
      return this.config.confirmReveal(REVEAL_WARNING);
    }
    return window.confirm(REVEAL_WARNING);
  }

  async start(): Promise<void> {
    const summary = await this.client.getSession(this.sessionId);
    this.definition = await this.client.getDefinition(summary.definition_id);
    await this.route(summary.stage);
  }

  private async route(stage: string): Promise<void> {
    if (stage === "intro") {
      this.renderIntro();
    } else if (stage.startsWith("in_phase")) {
      await this.renderTask();
    } else if (stage === "questionnaire") {
      this.renderQuestionnaire();
    } else {
      await this.renderFinished();
    }
  }

  /** Runs an API action; 4xx/409 conflicts become inline messages. */
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

  private screen(...children: (Node | string)[]): HTMLElement {
    clear(this.root);
    const section = el("section", { class: "screen" }, []);
    if (this.notice) {
      section.append(
        el("p", { "data-testid": "notice", class: "notice" }, [this.notice]),
      );
      this.notice = "";
    }
    section.append(...children);
    this.root.append(section);
    return section;
  }

  // -- intro + assessment ----------------------------------------------------

  private renderIntro(): void {
    const definition = this.definition!;
    const form = el("form", { "data-testid": "assessment-form" }, []);
    for (const question of definition.assessment.questions) {
      const options =
        question.kind === "knowledge-quiz"
          ? question.options ?? []
          : [...SELF_REPORT_OPTIONS];
      const box = el("fieldset", { "data-testid": `question-${question.id}` }, [
        el("legend", {}, [question.wording]),
      ]);
      for (const option of options) {
        const input = el("input", {
          type: "radio",
          name: question.id,
          value: option,
        });
        box.append(el("label", {}, [input, ` ${option}`]));
      }
      form.append(box);
    }
    const submit = el(
      "button",
      { type: "submit", "data-testid": "assessment-submit" },
      ["Start the training"],
    );
    form.append(submit);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const answers: Record<string, string> = {};
      for (const question of definition.assessment.questions) {
        const inputs = form.querySelectorAll<HTMLInputElement>(
          `input[name="${question.id}"]`,
        );
        for (const input of inputs) {
          if (input.checked) {
            answers[question.id] = input.value;
          }
        }
      }
      void this.guard(async () => {
        const response = await this.client.submitAssessment(
          this.sessionId,
          answers,
          this.now(),
        );
        this.notice = this.assignmentNotice(response.assignment);
        await this.renderTask();
      });
    });

    this.screen(
      el("h1", { "data-testid": "intro-title" }, [definition.title]),
      el("p", { "data-testid": "intro-text" }, [definition.intro]),
      el("h2", {}, ["Before you start"]),
      el("p", {}, [
        "Answer what you can; unanswered questions simply count as not known.",
      ]),
      form,
    );
  }

  private assignmentNotice(assignment: AssignmentView): string {
    return (
      `Phase ${assignment.phase}: task ${assignment.task_index} assigned ` +
      `(performance ${fractionLabel(assignment.performance, assignment.performance_value)})`
    );
  }

  // -- task screen -------------------------------------------------------------

  private async renderTask(): Promise<void> {
    const task = await this.client.getTask(this.sessionId);
    const header = el("header", {}, [
      el("h1", { "data-testid": "task-phase" }, [
        `Phase ${task.phase} of ${task.phase_count}: ${task.phase_title}`,
      ]),
      el("p", { "data-testid": "task-index" }, [
        `Task ${task.task_index}` +
          (task.includes_solution_walkthrough ? " (guided walkthrough)" : ""),
      ]),
      el("p", {}, [
        `Expected time: ${secondsLabel(task.expected_completion_seconds)}`,
      ]),
    ]);

    const assignment = el("pre", { "data-testid": "assignment-text" }, [
      task.assignment_text,
    ]);

    const hints = el("div", { "data-testid": "hints" }, []);
    for (const hint of task.hints) {
      if (hint.displayed) {
        hints.append(
          el("div", { "data-testid": `hint-${hint.index}` }, [
            el("strong", {}, [hint.title]),
            el("p", { "data-testid": `hint-${hint.index}-text` }, [hint.text ?? ""]),
          ]),
        );
      } else {
        const button = el(
          "button",
          { type: "button", "data-testid": `hint-${hint.index}-button` },
          [`Show hint: ${hint.title}`],
        );
        button.addEventListener("click", () => {
          button.disabled = true;
          void this.guard(async () => {
            // Hint displays travel the collector path: an idempotent
            // event keyed by the next log sequence number.
            const summary = await this.client.getSession(this.sessionId);
            await this.client.ingestEvents(this.sessionId, [
              {
                sequence_number: summary.length + 1,
                timestamp: this.now(),
                kind: "hint_displayed",
                x: task.phase,
                hint_index: hint.index,
              },
            ]);
            await this.renderTask();
          });
        });
        hints.append(button);
      }
    }

    const solution = el("div", { "data-testid": "solution" }, []);
    if (task.solution_displayed) {
      solution.append(
        el("pre", { "data-testid": "solution-text" }, [task.solution ?? ""]),
      );
    } else {
      const button = el(
        "button",
        { type: "button", "data-testid": "solution-button" },
        ["Reveal solution"],
      );
      button.addEventListener("click", () => {
        if (!this.confirmReveal()) {
          return;
        }
        void this.guard(async () => {
          await this.client.revealSolution(this.sessionId, this.now());
          await this.renderTask();
        });
      });
      solution.append(button);
    }

    const input = el("input", {
      type: "text",
      "data-testid": "answer-input",
      placeholder: "Your answer",
    });
    const feedback = el("p", { "data-testid": "answer-feedback" }, []);
    const form = el("form", { "data-testid": "answer-form" }, [
      input,
      el("button", { type: "submit", "data-testid": "answer-submit" }, ["Submit"]),
      feedback,
    ]);
    if (task.wrong_submissions > 0) {
      feedback.textContent = `${task.wrong_submissions} wrong submission(s) so far`;
    }
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.guard(async () => {
        const response = await this.client.submitAnswer(
          this.sessionId,
          input.value,
          this.now(),
        );
        if (!response.correct) {
          feedback.textContent = `Not correct (wrong submissions: ${response.wrong_submissions})`;
          return;
        }
        if (response.training_complete) {
          this.notice = `Phase ${response.completed_phase} complete - that was the last one.`;
          this.renderQuestionnaire();
          return;
        }
        this.notice = this.assignmentNotice(response.assignment!);
        await this.renderTask();
      });
    });

    this.screen(header, assignment, hints, solution, form);
  }

  // -- questionnaire + summary -------------------------------------------------

  private renderQuestionnaire(): void {
    const definition = this.definition!;
    const areas: HTMLTextAreaElement[] = [];
    const form = el("form", { "data-testid": "questionnaire-form" }, []);
    definition.post_questionnaire.forEach((prompt, i) => {
      const area = el("textarea", { "data-testid": `questionnaire-${i}` });
      areas.push(area);
      form.append(el("label", {}, [prompt, area]));
    });
    form.append(
      el("button", { type: "submit", "data-testid": "questionnaire-submit" }, [
        "Finish",
      ]),
    );
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.guard(async () => {
        await this.client.submitQuestionnaire(
          this.sessionId,
          areas.map((a) => a.value),
          this.now(),
        );
        await this.renderFinished();
      });
    });
    this.screen(el("h1", {}, ["Almost done"]), form);
  }

  private async renderFinished(): Promise<void> {
    const summary = await this.client.getSession(this.sessionId);
    this.screen(
      el("h1", { "data-testid": "finished" }, ["Training complete"]),
      el("p", {}, [
        `You worked through ${summary.completed_phases} of ` +
          `${summary.phase_count} phases. Thanks for the feedback!`,
      ]),
    );
  }
}
