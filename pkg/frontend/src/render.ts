// Pure layout helpers for the canvas views. Everything here is plain math on
// arrays so it can be unit tested without a DOM.

export interface Extent {
	xMin: number;
	xMax: number;
	yMin: number;
	yMax: number;
}

export function column(rows: number[][], columns: string[], name: string): number[] {
	const j = columns.indexOf(name);
	if (j < 0) throw new Error(`no column '${name}'`);
	return rows.map((r) => r[j]);
}

/** Joint extent of one or two point clouds with a 5% margin, so a pinned
 *  overlay shares axes with the live cloud. */
export function sharedExtent(x: number[], y: number[], x2?: number[], y2?: number[]): Extent {
	const xs = x2 ? x.concat(x2) : x;
	const ys = y2 ? y.concat(y2) : y;
	let xMin = Math.min(...xs);
	let xMax = Math.max(...xs);
	let yMin = Math.min(...ys);
	let yMax = Math.max(...ys);
	const mx = 0.05 * (xMax - xMin || 1);
	const my = 0.05 * (yMax - yMin || 1);
	return { xMin: xMin - mx, xMax: xMax + mx, yMin: yMin - my, yMax: yMax + my };
}

export function toPixel(v: number, lo: number, hi: number, size: number, flip = false): number {
	const t = (v - lo) / (hi - lo);
	return flip ? (1 - t) * size : t * size;
}

export function scatterPixels(x: number[], y: number[], e: Extent, w: number, h: number): Array<[number, number]> {
	const out: Array<[number, number]> = [];
	for (let i = 0; i < x.length; i++) {
		out.push([toPixel(x[i], e.xMin, e.xMax, w), toPixel(y[i], e.yMin, e.yMax, h, true)]);
	}
	return out;
}

/** Fixed-range histogram; values outside [lo, hi] are dropped. */
export function histogram(values: number[], bins: number, lo: number, hi: number): number[] {
	if (bins < 1 || !(hi > lo)) throw new Error("bad histogram spec");
	const counts = new Array<number>(bins).fill(0);
	const w = (hi - lo) / bins;
	for (const v of values) {
		if (v < lo || v > hi) continue;
		const k = Math.min(bins - 1, Math.floor((v - lo) / w));
		counts[k] += 1;
	}
	return counts;
}

export interface SweepLayout {
	polyline: Array<[number, number]>;
	marker: [number, number] | null;
}

/** Criterion-vs-component line with the current psi position marked. */
export function sweepLayout(values: number[], losses: number[], current: number, w: number, h: number): SweepLayout {
	if (values.length !== losses.length || values.length === 0) {
		throw new Error("sweep arrays must be equal length and non-empty");
	}
	const lo = Math.min(...values);
	const hi = Math.max(...values);
	const lLo = Math.min(...losses);
	const lHi = Math.max(...losses);
	const span = hi - lo || 1;
	const lSpan = lHi - lLo || 1;
	const polyline: Array<[number, number]> = values.map((v, i) => [
		((v - lo) / span) * w,
		(1 - (losses[i] - lLo) / lSpan) * h,
	]);
	let marker: [number, number] | null = null;
	if (current >= lo && current <= hi) {
		// marker y interpolates between the neighbouring grid losses
		let j = 0;
		while (j < values.length - 1 && values[j + 1] < current) j++;
		const a = values[j];
		const b = values[Math.min(j + 1, values.length - 1)];
		const t = b === a ? 0 : (current - a) / (b - a);
		const loss = losses[j] + t * (losses[Math.min(j + 1, losses.length - 1)] - losses[j]);
		marker = [((current - lo) / span) * w, (1 - (loss - lLo) / lSpan) * h];
	}
	return { polyline, marker };
}

/** Index of the sweep point nearest a hover x-position, for the tooltip. */
export function nearestSweepIndex(values: number[], px: number, w: number): number {
	const lo = Math.min(...values);
	const hi = Math.max(...values);
	const span = hi - lo || 1;
	let best = 0;
	let bestDist = Infinity;
	for (let i = 0; i < values.length; i++) {
		const x = ((values[i] - lo) / span) * w;
		const d = Math.abs(x - px);
		if (d < bestDist) {
			bestDist = d;
			best = i;
		}
	}
	return best;
}

/** Evenly spaced sweep grid inside the component's bounds. */
export function sweepGrid(lower: number, upper: number, n: number): number[] {
	if (n < 1) throw new Error("need at least one grid point");
	if (n === 1) return [0.5 * (lower + upper)];
	const out: number[] = [];
	for (let i = 0; i < n; i++) {
		out.push(lower + ((upper - lower) * i) / (n - 1));
	}
	// guard against float drift past the upper bound
	out[out.length - 1] = upper;
	return out;
}
