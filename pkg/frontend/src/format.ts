/**
 * Display helpers for server-computed values. Everything here is
 * presentation: the exact fraction string and its float rendering both
 * come from the service, the helpers only arrange them for humans.
 */

/** "3/4" + 0.75 -> "3/4 (75%)"; integers render without a percent twin. */
export function fractionLabel(fraction: string, value: number): string {
  if (!fraction.includes("/")) {
    return fraction;
  }
  const percent = Math.round(value * 1000) / 10;
  return `${fraction} (${percent}%)`;
}

/** Server stage labels ("in_phase(2)") to human wording. */
export function stageLabel(stage: string): string {
  const inPhase = stage.match(/^in_phase\((\d+)\)$/);
  if (inPhase) {
    return `Phase ${inPhase[1]}`;
  }
  const awaiting = stage.match(/^awaiting_decision\((\d+)\)$/);
  if (awaiting) {
    return `Deciding phase ${awaiting[1]}`;
  }
  switch (stage) {
    case "intro":
      return "Introduction";
    case "questionnaire":
      return "Questionnaire";
    case "finished":
      return "Finished";
    case "corrupt":
      return "Unreadable log";
    default:
      return stage;
  }
}

/** Expected-time hint: whole minutes when even, otherwise m:ss. */
export function secondsLabel(seconds: number): string {
  const minutes = Math.floor(seconds / 60);
  const rest = seconds % 60;
  if (rest === 0) {
    return `${minutes} min`;
  }
  return `${minutes}:${String(rest).padStart(2, "0")} min`;
}

/** Greek column letters for weight-term tables. */
export function columnLabel(column: string): string {
  const letters: Record<string, string> = {
    alpha: "α (assessment)",
    beta: "β (commands)",
    gamma: "γ (answer)",
    delta: "δ (time)",
    epsilon: "ε (no solution)",
  };
  return letters[column] ?? column;
}
