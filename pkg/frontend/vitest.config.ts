import { defineConfig } from "vitest/config";

export default defineConfig({
	test: {
		// e2e talks to a real single-core server; generous timeouts
		testTimeout: 180_000,
		hookTimeout: 2_700_000,
	},
});
