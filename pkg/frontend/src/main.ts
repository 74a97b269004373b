/**
 * Entry point: reads the host-injected configuration and mounts the
 * surface it names. The hosting page provides the service base URL and
 * the bearer token; nothing is hardcoded into the bundle.
 */

import { TutorClient } from "./api.js";
import { clear, el } from "./dom.js";
import { InstructorApp } from "./instructor.js";
import { TraineeApp } from "./trainee.js";

export interface BootConfig {
  baseUrl: string;
  token: string;
  role: "trainee" | "instructor";
  /** Required for the trainee surface. */
  sessionId?: string;
}

declare global {
  interface Window {
    TUTOR_CONFIG?: BootConfig;
  }
}

export async function boot(root: HTMLElement, config: BootConfig): Promise<void> {
  const client = new TutorClient({ baseUrl: config.baseUrl, token: config.token });
  if (config.role === "instructor") {
    await new InstructorApp({ client, root }).start();
    return;
  }
  if (!config.sessionId) {
    throw new Error("trainee surface needs a sessionId");
  }
  await new TraineeApp({ client, root, sessionId: config.sessionId }).start();
}

// Self-boot when loaded in a configured page; library use imports boot().
const root = typeof document !== "undefined" ? document.getElementById("app") : null;
if (root && window.TUTOR_CONFIG) {
  boot(root, window.TUTOR_CONFIG).catch((error: unknown) => {
    // A misconfigured page (bad URL, wrong token) must say so, not go blank.
    clear(root);
    root.append(
      el("p", { "data-testid": "boot-error", class: "error", role: "alert" }, [
        `Could not load: ${error instanceof Error ? error.message : String(error)}`,
      ]),
    );
  });
}
