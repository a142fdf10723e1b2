import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["test/**/*.test.ts"],
    // the session test boots the real Python service and trains a scene
    testTimeout: 180_000,
    hookTimeout: 120_000,
  },
});
