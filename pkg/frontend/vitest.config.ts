import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    include: ["tests/**/*.test.ts"],
    // The e2e suite boots the Python service and walks a full training.
    testTimeout: 30_000,
    hookTimeout: 30_000,
  },
});
