import { CriterionResponse, Meta, Psi, SampleResponse, SweepResponse } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Thrown before any network traffic when a request would violate the
 *  server's declared psi bounds. The UI clamps first, so hitting this
 *  indicates a programming error rather than user input. */
export class OutOfBoundsError extends Error {
	constructor(component: string, value: number, lower: number, upper: number) {
		super(`psi component '${component}'=${value} outside [${lower}, ${upper}]`);
		this.name = "OutOfBoundsError";
	}
}

function checkPsi(meta: Meta, psi: Psi): void {
	for (const b of meta.psi) {
		const v = psi[b.name];
		if (v === undefined || !Number.isFinite(v)) {
			throw new OutOfBoundsError(b.name, v ?? NaN, b.lower, b.upper);
		}
		if (v < b.lower || v > b.upper) {
			throw new OutOfBoundsError(b.name, v, b.lower, b.upper);
		}
	}
	for (const name of Object.keys(psi)) {
		if (!meta.psi.some((b) => b.name === name)) {
			throw new OutOfBoundsError(name, psi[name], NaN, NaN);
		}
	}
}

/** Client for the serve endpoints. Every psi-carrying request is validated
 *  against /meta bounds before it leaves the browser, and each endpoint keeps
 *  at most one request in flight: a newer call aborts the older one. */
export class ApiClient {
	readonly server: string;
	readonly meta: Meta;
	private fetchImpl: FetchLike;
	private inflight: { [endpoint: string]: AbortController } = {};

	private constructor(server: string, meta: Meta, fetchImpl: FetchLike) {
		this.server = server.replace(/\/+$/, "");
		this.meta = meta;
		this.fetchImpl = fetchImpl;
	}

	static async connect(server: string, fetchImpl?: FetchLike): Promise<ApiClient> {
		const f = fetchImpl ?? ((url, init) => fetch(url, init));
		const base = server.replace(/\/+$/, "");
		const resp = await f(`${base}/meta`);
		if (!resp.ok) {
			throw new Error(`GET /meta failed: ${resp.status}`);
		}
		return new ApiClient(base, (await resp.json()) as Meta, f);
	}

	private async post<T>(endpoint: string, body: object, slot?: string): Promise<T> {
		const key = slot ?? endpoint;
		const prev = this.inflight[key];
		if (prev) prev.abort();
		const ctl = new AbortController();
		this.inflight[key] = ctl;
		try {
			const resp = await this.fetchImpl(`${this.server}${endpoint}`, {
				method: "POST",
				headers: { "Content-Type": "application/json" },
				body: JSON.stringify(body),
				signal: ctl.signal,
			});
			if (!resp.ok) {
				const detail = await resp.text();
				throw new Error(`POST ${endpoint} failed: ${resp.status} ${detail}`);
			}
			return (await resp.json()) as T;
		} finally {
			if (this.inflight[key] === ctl) delete this.inflight[key];
		}
	}

	/** `slot` separates cancellation groups; the pinned-comparison cloud uses
	 *  its own slot so it never aborts the live sample request. */
	sample(psi: Psi, n: number, seed: number, slot?: string): Promise<SampleResponse> {
		checkPsi(this.meta, psi);
		return this.post("/sample", { psi, n, seed }, slot);
	}

	criterion(psi: Psi, kind: string, nMc: number, seed: number): Promise<CriterionResponse> {
		checkPsi(this.meta, psi);
		return this.post("/criterion", { psi, criterion: kind, n_mc: nMc, seed });
	}

	sweep(component: string, values: number[], psi: Psi, kind: string, nMc: number, seed: number): Promise<SweepResponse> {
		checkPsi(this.meta, psi);
		const b = this.meta.psi.find((x) => x.name === component);
		if (!b) throw new Error(`unknown sweep component '${component}'`);
		for (const v of values) {
			if (!Number.isFinite(v) || v < b.lower || v > b.upper) {
				throw new OutOfBoundsError(component, v, b.lower, b.upper);
			}
		}
		return this.post("/sweep", { component, values, psi, criterion: kind, n_mc: nMc, seed });
	}
}
