import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    // Conversions move ~59 MB of full-geometry weights; give them room.
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
