import { defineConfig } from "vitest/config";

export default defineConfig({
    test: {
        include: ["test/**/*.test.ts"],
        // Training tests are compute-bound; run files one at a time and give
        // the slow ones room.
        pool: "forks",
        fileParallelism: false,
        testTimeout: 1_500_000,
        hookTimeout: 1_500_000,
    },
});
