import { Meta, Psi, PsiBound } from "./types.js";

export function clamp(value: number, lower: number, upper: number): number {
	if (Number.isNaN(value)) return lower;
	return Math.min(upper, Math.max(lower, value));
}

/** Trailing-edge debounce. Repeated calls within `ms` collapse into a single
 *  invocation with the latest arguments. */
export function debounce<A extends unknown[]>(fn: (...args: A) => void, ms: number): ((...args: A) => void) & { cancel: () => void } {
	let timer: ReturnType<typeof setTimeout> | null = null;
	const wrapped = (...args: A) => {
		if (timer !== null) clearTimeout(timer);
		timer = setTimeout(() => {
			timer = null;
			fn(...args);
		}, ms);
	};
	wrapped.cancel = () => {
		if (timer !== null) clearTimeout(timer);
		timer = null;
	};
	return wrapped;
}

export type Listener = (s: SessionState) => void;

/** All mutable client state for one explorer session.
 *
 *  Invariants: psi components always sit inside the server-declared bounds
 *  (setters clamp), and a pinned snapshot never changes until it is replaced
 *  or cleared. */
export class SessionState {
	readonly server: string;
	readonly bounds: PsiBound[];
	psi: Psi;
	pinned: Psi | null = null;
	pinnedSeed: number | null = null;
	scatterPair: [string, string];
	seed: number;
	criterion: string;
	private listeners: Listener[] = [];

	constructor(server: string, meta: Meta, seed = 1) {
		this.server = server;
		this.bounds = meta.psi;
		this.psi = {};
		for (const b of meta.psi) {
			this.psi[b.name] = clamp(0.5 * (b.lower + b.upper), b.lower, b.upper);
		}
		const names = paramNames(meta);
		this.scatterPair = [names[0], names[Math.min(1, names.length - 1)]];
		this.seed = seed;
		this.criterion = meta.criteria[0];
	}

	onChange(fn: Listener): void {
		this.listeners.push(fn);
	}

	private emit(): void {
		for (const fn of this.listeners) fn(this);
	}

	/** Clamps into bounds; unknown components are ignored so a stale slider
	 *  can never inject an invalid request downstream. */
	setComponent(name: string, value: number): void {
		const b = this.bounds.find((x) => x.name === name);
		if (!b) return;
		this.psi[name] = clamp(value, b.lower, b.upper);
		this.emit();
	}

	setCriterion(kind: string): void {
		this.criterion = kind;
		this.emit();
	}

	setScatterPair(x: string, y: string): void {
		this.scatterPair = [x, y];
		this.emit();
	}

	pin(): void {
		this.pinned = { ...this.psi };
		this.pinnedSeed = this.seed;
		this.emit();
	}

	unpin(): void {
		this.pinned = null;
		this.pinnedSeed = null;
		this.emit();
	}

	/** New sampling seed for all views; the default stays fixed per session so
	 *  visuals are stable while dragging. */
	reroll(): void {
		this.seed = (this.seed * 1103515245 + 12345) % 2147483647;
		if (this.seed <= 0) this.seed += 2147483646;
		this.emit();
	}

	footer(checksum: string): string {
		const parts = this.bounds.map((b) => `${b.name}=${this.psi[b.name].toFixed(3)}`);
		return `checkpoint ${checksum} | ${parts.join(" ")} | seed ${this.seed}`;
	}
}

export function paramNames(meta: Meta): string[] {
	const out: string[] = [];
	for (const block of Object.keys(meta.params)) {
		out.push(...meta.params[block]);
	}
	return out;
}

/** Server base URL from the page query string, with a same-origin default. */
export function serverFromQuery(search: string, fallback: string): string {
	const m = new URLSearchParams(search);
	const s = m.get("server");
	return s !== null && s.length > 0 ? s : fallback;
}
