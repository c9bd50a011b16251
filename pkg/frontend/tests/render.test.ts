import { describe, expect, it } from "vitest";

import {
	column,
	histogram,
	nearestSweepIndex,
	scatterPixels,
	sharedExtent,
	sweepGrid,
	sweepLayout,
} from "../src/render.js";

describe("column", () => {
	it("extracts by name", () => {
		expect(column([[1, 2], [3, 4]], ["a", "b"], "b")).toEqual([2, 4]);
	});
	it("throws on unknown name", () => {
		expect(() => column([[1]], ["a"], "z")).toThrow();
	});
});

describe("sharedExtent", () => {
	it("covers both clouds so overlays share axes", () => {
		const e = sharedExtent([0, 1], [0, 1], [5, 6], [-2, 0]);
		expect(e.xMin).toBeLessThanOrEqual(0);
		expect(e.xMax).toBeGreaterThanOrEqual(6);
		expect(e.yMin).toBeLessThanOrEqual(-2);
		expect(e.yMax).toBeGreaterThanOrEqual(1);
	});
	it("degenerate cloud still gets a nonzero span", () => {
		const e = sharedExtent([2, 2], [3, 3]);
		expect(e.xMax).toBeGreaterThan(e.xMin);
		expect(e.yMax).toBeGreaterThan(e.yMin);
	});
});

describe("scatterPixels", () => {
	it("maps extent corners to canvas corners with y flipped", () => {
		const e = { xMin: 0, xMax: 1, yMin: 0, yMax: 1 };
		const px = scatterPixels([0, 1], [0, 1], e, 100, 200);
		expect(px[0]).toEqual([0, 200]);
		expect(px[1]).toEqual([100, 0]);
	});
});

describe("histogram", () => {
	it("counts into the right bins", () => {
		expect(histogram([0.05, 0.15, 0.17, 0.95], 10, 0, 1)).toEqual([1, 2, 0, 0, 0, 0, 0, 0, 0, 1]);
	});
	it("drops out-of-range values and puts hi in the last bin", () => {
		expect(histogram([-1, 2, 1.0], 4, 0, 1)).toEqual([0, 0, 0, 1]);
	});
	it("rejects bad specs", () => {
		expect(() => histogram([], 0, 0, 1)).toThrow();
		expect(() => histogram([], 4, 1, 1)).toThrow();
	});
});

describe("sweepLayout", () => {
	it("single point renders a single marker", () => {
		const l = sweepLayout([0.5], [2.0], 0.5, 100, 50);
		expect(l.polyline.length).toBe(1);
		expect(l.marker).not.toBeNull();
	});
	it("marker sits on the interpolated polyline", () => {
		const l = sweepLayout([0, 1], [0, 10], 0.5, 100, 100);
		expect(l.marker![0]).toBeCloseTo(50);
		expect(l.marker![1]).toBeCloseTo(50);
	});
	it("marker is null when current psi is outside the grid", () => {
		const l = sweepLayout([0.2, 0.8], [1, 2], 0.9, 100, 100);
		expect(l.marker).toBeNull();
	});
	it("rejects mismatched arrays", () => {
		expect(() => sweepLayout([1], [], 0, 10, 10)).toThrow();
	});
});

describe("nearestSweepIndex", () => {
	it("finds the hovered point", () => {
		expect(nearestSweepIndex([0, 0.5, 1], 52, 100)).toBe(1);
		expect(nearestSweepIndex([0, 0.5, 1], 99, 100)).toBe(2);
	});
});

describe("sweepGrid", () => {
	it("spans the bounds inclusively", () => {
		const g = sweepGrid(0, 1, 5);
		expect(g).toEqual([0, 0.25, 0.5, 0.75, 1]);
	});
	it("never exceeds the upper bound despite float drift", () => {
		const g = sweepGrid(0.1, 0.9999999, 7);
		expect(Math.max(...g)).toBeLessThanOrEqual(0.9999999);
	});
	it("single point lands mid-box", () => {
		expect(sweepGrid(0, 2, 1)).toEqual([1]);
	});
});
