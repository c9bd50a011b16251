import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { clamp, debounce, paramNames, serverFromQuery, SessionState } from "../src/state.js";
import { fakeMeta } from "./helpers.js";

describe("clamp", () => {
	it("passes through in-range values", () => {
		expect(clamp(0.3, 0, 1)).toBe(0.3);
	});

	it("clamps both ends", () => {
		expect(clamp(-2, 0, 1)).toBe(0);
		expect(clamp(7, 0, 1)).toBe(1);
	});

	it("maps non-finite input to the lower bound", () => {
		expect(clamp(NaN, 0, 1)).toBe(0);
		expect(clamp(Infinity, 0, 1)).toBe(1);
	});
});

describe("SessionState", () => {
	it("starts at box midpoints within bounds", () => {
		const s = new SessionState("http://x", fakeMeta());
		expect(s.psi.eta).toBe(0.5);
		expect(s.psi.c1).toBeCloseTo(10.05);
	});

	it("clamps slider edits including keyboard out-of-range entry", () => {
		const s = new SessionState("http://x", fakeMeta());
		s.setComponent("eta", 1.7);
		expect(s.psi.eta).toBe(1);
		s.setComponent("eta", -0.4);
		expect(s.psi.eta).toBe(0);
		s.setComponent("c1", NaN);
		expect(s.psi.c1).toBe(0.1);
	});

	it("ignores unknown components", () => {
		const s = new SessionState("http://x", fakeMeta());
		s.setComponent("nope", 3);
		expect(s.psi.nope).toBeUndefined();
	});

	it("pinned snapshot is immutable until replaced", () => {
		const s = new SessionState("http://x", fakeMeta());
		s.setComponent("eta", 0.2);
		s.pin();
		s.setComponent("eta", 0.9);
		expect(s.pinned!.eta).toBe(0.2);
		expect(s.psi.eta).toBe(0.9);
		s.pin();
		expect(s.pinned!.eta).toBe(0.9);
		s.unpin();
		expect(s.pinned).toBeNull();
	});

	it("pin captures the seed so identical psi renders identical clouds", () => {
		const s = new SessionState("http://x", fakeMeta(), 7);
		s.pin();
		s.reroll();
		expect(s.pinnedSeed).toBe(7);
		expect(s.seed).not.toBe(7);
	});

	it("reroll changes the seed deterministically", () => {
		const a = new SessionState("http://x", fakeMeta(), 1);
		const b = new SessionState("http://x", fakeMeta(), 1);
		a.reroll();
		b.reroll();
		expect(a.seed).toBe(b.seed);
		expect(a.seed).toBeGreaterThan(0);
	});

	it("notifies listeners on every mutation", () => {
		const s = new SessionState("http://x", fakeMeta());
		let n = 0;
		s.onChange(() => n++);
		s.setComponent("eta", 0.1);
		s.pin();
		s.reroll();
		s.setCriterion("elpd_y");
		expect(n).toBe(4);
	});

	it("footer carries checksum, psi and seed", () => {
		const s = new SessionState("http://x", fakeMeta(), 3);
		s.setComponent("eta", 0.25);
		const f = s.footer("deadbeef");
		expect(f).toContain("deadbeef");
		expect(f).toContain("eta=0.250");
		expect(f).toContain("seed 3");
	});
});

describe("debounce", () => {
	beforeEach(() => {
		vi.useFakeTimers();
	});
	afterEach(() => {
		vi.useRealTimers();
	});

	it("collapses a burst into one trailing call with the latest args", () => {
		const calls: number[] = [];
		const f = debounce((v: number) => calls.push(v), 150);
		f(1);
		vi.advanceTimersByTime(100);
		f(2);
		vi.advanceTimersByTime(100);
		f(3);
		vi.advanceTimersByTime(150);
		expect(calls).toEqual([3]);
	});

	it("fires again for a later burst", () => {
		const calls: number[] = [];
		const f = debounce((v: number) => calls.push(v), 150);
		f(1);
		vi.advanceTimersByTime(200);
		f(2);
		vi.advanceTimersByTime(200);
		expect(calls).toEqual([1, 2]);
	});

	it("cancel drops the pending call", () => {
		const calls: number[] = [];
		const f = debounce((v: number) => calls.push(v), 150);
		f(1);
		f.cancel();
		vi.advanceTimersByTime(500);
		expect(calls).toEqual([]);
	});
});

describe("helpers", () => {
	it("paramNames flattens blocks in order", () => {
		expect(paramNames(fakeMeta())).toEqual(["theta1", "theta2", "delta_a", "delta_b"]);
	});

	it("serverFromQuery reads ?server= with fallback", () => {
		expect(serverFromQuery("?server=http://api:9000", "http://same")).toBe("http://api:9000");
		expect(serverFromQuery("", "http://same")).toBe("http://same");
		expect(serverFromQuery("?other=1", "http://same")).toBe("http://same");
	});
});
