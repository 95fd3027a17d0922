import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    environmentOptions: {
      // The integration suite talks to a locally spawned label service;
      // happy-dom enforces the same-origin policy, so the document origin
      // must match the service origin.  Unit tests use injected fetch
      // stubs and are unaffected.
      happyDOM: { url: "http://127.0.0.1:8931" },
    },
    include: ["tests/**/*.test.ts"],
    testTimeout: 120_000,
    hookTimeout: 60_000,
  },
});
