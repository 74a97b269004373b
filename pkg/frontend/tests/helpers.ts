/** Shared test utilities: a scripted fetch and DOM polling. */

import { expect } from "vitest";

export interface CannedResponse {
  status?: number;
  body: unknown;
}

export type RouteHandler = (
  method: string,
  path: string,
  body: unknown,
) => CannedResponse | undefined;

/** A fetch implementation backed by a route function; records calls. */
export function fakeFetch(handler: RouteHandler) {
  const calls: { method: string; path: string; body: unknown }[] = [];
  const impl = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = new URL(String(input));
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    calls.push({ method, path: url.pathname, body });
    const canned = handler(method, url.pathname, body);
    if (!canned) {
      throw new Error(`unhandled route ${method} ${url.pathname}`);
    }
    return new Response(JSON.stringify(canned.body), {
      status: canned.status ?? 200,
      headers: { "Content-Type": "application/json" },
    });
  }) as typeof fetch;
  return { impl, calls };
}

/** Polls until the predicate holds; fails the test on timeout. */
export async function until(
  predicate: () => boolean,
  what = "condition",
  timeoutMs = 5000,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (predicate()) {
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
  expect.fail(`timed out waiting for ${what}`);
}

/** Typed querySelector that fails loudly. */
export function q<T extends Element = HTMLElement>(
  root: ParentNode,
  selector: string,
): T {
  const node = root.querySelector(selector);
  if (!node) {
    throw new Error(`no element matches ${selector}`);
  }
  return node as T;
}

export function testId<T extends Element = HTMLElement>(
  root: ParentNode,
  id: string,
): T {
  return q<T>(root, `[data-testid="${id}"]`);
}
