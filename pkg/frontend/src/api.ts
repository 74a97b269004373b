/**
 * Typed client for the tutor service HTTP API.
 *
 * The client is plumbing only: every number it hands to the UI was
 * computed on the server. Fractions arrive as exact strings paired with
 * a float rendering (`performance` / `performance_value`); the client
 * never recomputes scores or task choices.
 */

export interface ClientConfig {
  baseUrl: string;
  token: string;
  /** Injectable for tests; defaults to the global fetch. */
  fetchImpl?: typeof fetch;
  /** Injectable backoff sleep for retries; defaults to setTimeout. */
  sleep?: (ms: number) => Promise<void>;
}

export interface ErrorEnvelope {
  code: string;
  message: string;
  details?: unknown;
}

/** A non-2xx response, carrying the service's error envelope. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly details: unknown;

  constructor(status: number, envelope: ErrorEnvelope) {
    super(envelope.message);
    this.name = "ApiError";
    this.status = status;
    this.code = envelope.code;
    this.details = envelope.details;
  }
}

export interface Violation {
  code: string;
  location: string;
  message: string;
  severity: string;
}

export interface UploadResult {
  id: string;
  violations: Violation[];
}

export interface DefinitionQuestion {
  id: string;
  wording: string;
  kind: "knowledge-quiz" | "self-report";
  /** Present for knowledge-quiz questions only. */
  options?: string[];
}

export interface DefinitionPhase {
  index: number;
  title: string;
  expected_completion_seconds: number;
  task_count: number;
}

/** A definition as the trainee role sees it: no answers, no weights. */
export interface TraineeDefinition {
  id: string;
  title: string;
  intro: string;
  assessment: { questions: DefinitionQuestion[] };
  phases: DefinitionPhase[];
  post_questionnaire: string[];
}

export interface SessionSummary {
  session_id: string;
  definition_id: string;
  stage: string;
  phase: number | null;
  completed_phases: number;
  phase_count: number;
  length: number;
  last_timestamp: number;
  questionnaire_submitted: boolean;
  task_index?: number;
}

export interface AssignmentView {
  phase: number;
  task_index: number;
  performance: string;
  performance_value: number;
  numerator: string;
  denominator: string;
}

export interface TermView {
  phase: number;
  column: "alpha" | "beta" | "gamma" | "delta" | "epsilon";
  weight: string;
  satisfied: boolean;
  contribution: string;
}

export interface AuditAssignment extends AssignmentView {
  terms: TermView[];
}

export interface HintView {
  index: number;
  title: string;
  displayed: boolean;
  /** Present once displayed. */
  text?: string;
}

export interface TaskView {
  session_id: string;
  stage: string;
  phase: number;
  phase_title: string;
  phase_count: number;
  task_index: number;
  assignment_text: string;
  includes_solution_walkthrough: boolean;
  expected_completion_seconds: number;
  entered_at: number;
  wrong_submissions: number;
  hints: HintView[];
  solution_displayed: boolean;
  /** Present only after an explicit reveal. */
  solution?: string;
}

export interface AssessmentResponse {
  assignment: AssignmentView;
  stage: string;
}

export interface AnswerResponse {
  correct: boolean;
  stage: string;
  wrong_submissions?: number;
  completed_phase?: number;
  training_complete?: boolean;
  assignment?: AssignmentView;
}

export interface SolutionResponse {
  phase: number;
  solution: string;
  stage: string;
}

export interface MetricVectorsView {
  p: number[];
  k: number[];
  a: number[];
  t: number[];
  s: number[];
}

export interface SessionAudit {
  session_id: string;
  definition_id: string;
  stage: string;
  metric_vectors: MetricVectorsView;
  assignments: AuditAssignment[];
  outcomes: Record<string, unknown>[];
  pretraining_answers: Record<string, string>;
  questionnaire_answers: string[];
  events: Record<string, unknown>[];
}

/** One collector event; redelivery with the same sequence number and
 * content is a server-side no-op, so sending these is retry-safe. */
export interface CollectorEvent {
  session_id?: string;
  sequence_number: number;
  timestamp: number;
  kind: "command_executed" | "hint_displayed" | "solution_displayed";
  [field: string]: unknown;
}

export interface IngestResponse {
  applied: number;
  length: number;
  stage: string;
}

export interface SankeyNode {
  name: string;
  phase: number;
  task: number;
  count: number;
  ends: number;
}

export interface SankeyLink {
  source: number;
  target: number;
  value: number;
}

export interface SankeyData {
  training: string;
  nodes: SankeyNode[];
  links: SankeyLink[];
}

export interface StatsView {
  training: string;
  participants: number;
  completion_ratio: string;
  completion_ratio_value: number;
  modal_end_phase: number;
  avg_actions: string;
  avg_actions_value: number;
}

export interface PathStepView {
  phase: number;
  task: number;
  performance: string;
  performance_value: number;
}

export interface PathView {
  participant_id: string;
  source: string;
  assigned_tasks: PathStepView[];
}

export interface VariantResult {
  variant_index: number;
  transitions: SankeyData;
  task_index_distribution: Record<string, number>;
}

export interface ReplayReport {
  report_id: string;
  definition_id: string;
  created_at: number;
  participants: string[];
  paths: PathView[];
  transitions: SankeyData;
  stats: StatsView;
  stats_csv: string;
  variants: VariantResult[];
}

export interface ReplayRequest {
  definition_id: string;
  session_ids?: string[];
  answers?: Record<string, Record<string, string>>;
  weight_variants?: unknown[];
}

const defaultSleep = (ms: number) =>
  new Promise<void>((resolve) => setTimeout(resolve, ms));

export class TutorClient {
  private readonly baseUrl: string;
  private readonly token: string;
  private readonly fetchImpl: typeof fetch;
  private readonly sleep: (ms: number) => Promise<void>;

  constructor(config: ClientConfig) {
    this.baseUrl = config.baseUrl.replace(/\/+$/, "");
    this.token = config.token;
    this.fetchImpl = config.fetchImpl ?? fetch;
    this.sleep = config.sleep ?? defaultSleep;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = {
      method,
      headers: {
        Authorization: `Bearer ${this.token}`,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      ...(body !== undefined ? { body: JSON.stringify(body) } : {}),
    };
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let envelope: ErrorEnvelope;
      try {
        envelope = (await response.json()) as ErrorEnvelope;
      } catch {
        envelope = { code: `HTTP_${response.status}`, message: response.statusText };
      }
      throw new ApiError(response.status, envelope);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  uploadDefinition(document: unknown): Promise<UploadResult> {
    return this.request("POST", "/definitions", document);
  }

  listDefinitions(): Promise<{ id: string; title: string }[]> {
    return this.request("GET", "/definitions");
  }

  /** Instructors get the full document; trainees the redacted view. */
  getDefinition(definitionId: string): Promise<TraineeDefinition> {
    return this.request("GET", `/definitions/${encodeURIComponent(definitionId)}`);
  }

  createSession(request: {
    definition_id: string;
    session_id?: string;
    timestamp?: number;
  }): Promise<SessionSummary> {
    return this.request("POST", "/sessions", request);
  }

  listSessions(): Promise<SessionSummary[]> {
    return this.request("GET", "/sessions");
  }

  getSession(sessionId: string): Promise<SessionSummary> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}`);
  }

  submitAssessment(
    sessionId: string,
    answers: Record<string, string>,
    timestamp?: number,
  ): Promise<AssessmentResponse> {
    return this.request(
      "POST",
      `/sessions/${encodeURIComponent(sessionId)}/assessment`,
      { answers, ...(timestamp !== undefined ? { timestamp } : {}) },
    );
  }

  getTask(sessionId: string): Promise<TaskView> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/task`);
  }

  submitAnswer(
    sessionId: string,
    text: string,
    timestamp?: number,
  ): Promise<AnswerResponse> {
    return this.request(
      "POST",
      `/sessions/${encodeURIComponent(sessionId)}/answer`,
      { text, ...(timestamp !== undefined ? { timestamp } : {}) },
    );
  }

  revealSolution(sessionId: string, timestamp?: number): Promise<SolutionResponse> {
    return this.request(
      "POST",
      `/sessions/${encodeURIComponent(sessionId)}/solution`,
      timestamp !== undefined ? { timestamp } : {},
    );
  }

  /**
   * Deliver collector events, retrying on network failure.
   *
   * Safe to retry because the server treats redelivery of an applied
   * sequence number with identical content as a no-op; only transport
   * errors are retried, a rejected batch (4xx/5xx) is final.
   */
  async ingestEvents(
    sessionId: string,
    events: CollectorEvent[],
    attempts = 3,
  ): Promise<IngestResponse> {
    let lastError: unknown;
    for (let attempt = 0; attempt < attempts; attempt += 1) {
      if (attempt > 0) {
        await this.sleep(250 * 2 ** (attempt - 1));
      }
      try {
        return await this.request<IngestResponse>(
          "POST",
          `/sessions/${encodeURIComponent(sessionId)}/events`,
          { events },
        );
      } catch (error) {
        if (error instanceof ApiError) {
          throw error;
        }
        lastError = error;
      }
    }
    throw lastError;
  }

  submitQuestionnaire(
    sessionId: string,
    answers: string[],
    timestamp?: number,
  ): Promise<{ stage: string }> {
    return this.request(
      "POST",
      `/sessions/${encodeURIComponent(sessionId)}/questionnaire`,
      { answers, ...(timestamp !== undefined ? { timestamp } : {}) },
    );
  }

  getAudit(sessionId: string): Promise<SessionAudit> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/audit`);
  }

  runReplay(request: ReplayRequest): Promise<ReplayReport> {
    return this.request("POST", "/replay", request);
  }

  getReport(reportId: string): Promise<ReplayReport> {
    return this.request("GET", `/replay/${encodeURIComponent(reportId)}`);
  }
}
