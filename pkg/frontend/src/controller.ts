import { ApiClient } from "./api.js";
import { debounce, SessionState } from "./state.js";
import { CriterionResponse, Psi, SampleResponse, SweepResponse } from "./types.js";

export interface Views {
	showSamples(current: SampleResponse, pinned: SampleResponse | null): void;
	showCriterion(value: number, stderr: number): void;
	showSweep(resp: SweepResponse, current: number): void;
	showError(message: string): void;
	showFooter(text: string): void;
}

export const SAMPLE_N = 1500;
export const CRITERION_MC = 128;

/** Glue between SessionState and the server: slider edits fan out into
 *  debounced sample/criterion refreshes; failures leave the last good view in
 *  place and surface a toast. */
export class Controller {
	private refreshSoon: () => void;
	private generation = 0;

	constructor(
		private client: ApiClient,
		private state: SessionState,
		private views: Views,
		debounceMs = 150,
	) {
		this.refreshSoon = debounce(() => void this.refresh(), debounceMs);
		state.onChange(() => {
			this.views.showFooter(state.footer(client.meta.checksum));
			this.refreshSoon();
		});
	}

	/** Immediate refresh; stale responses are dropped by generation count so a
	 *  slow request can never overwrite a newer view. */
	async refresh(): Promise<void> {
		const gen = ++this.generation;
		const psi: Psi = { ...this.state.psi };
		let samplePromise: Promise<SampleResponse>;
		let critPromise: Promise<CriterionResponse>;
		let pinnedPromise: Promise<SampleResponse | null>;
		try {
			samplePromise = this.client.sample(psi, SAMPLE_N, this.state.seed);
			critPromise = this.client.criterion(psi, this.state.criterion, CRITERION_MC, this.state.seed);
			pinnedPromise = this.state.pinned === null
				? Promise.resolve(null)
				: this.fetchPinned(this.state.pinned, this.state.pinnedSeed ?? this.state.seed);
		} catch (err) {
			// bounds violation raised before any request left; nothing in flight
			this.views.showError(err instanceof Error ? err.message : String(err));
			return;
		}
		// settle all three so a failure in one never leaves another unobserved
		const [cur, crit, pinned] = await Promise.allSettled([samplePromise, critPromise, pinnedPromise]);
		if (gen !== this.generation) return;
		const failure = [cur, crit, pinned].find(
			(r): r is PromiseRejectedResult =>
				r.status === "rejected" && !(r.reason instanceof DOMException && r.reason.name === "AbortError"),
		);
		if (failure) {
			this.views.showError(
				failure.reason instanceof Error ? failure.reason.message : String(failure.reason),
			);
			return;
		}
		if (cur.status === "fulfilled" && pinned.status === "fulfilled") {
			this.views.showSamples(cur.value, pinned.value);
		}
		if (crit.status === "fulfilled") {
			this.views.showCriterion(crit.value.value, crit.value.stderr);
		}
	}

	private fetchPinned(psi: Psi, seed: number): Promise<SampleResponse> {
		return this.client.sample(psi, SAMPLE_N, seed, "/sample-pinned");
	}

	async runSweep(component: string, grid: number[]): Promise<void> {
		try {
			const resp = await this.client.sweep(
				component, grid, { ...this.state.psi }, this.state.criterion, CRITERION_MC, this.state.seed,
			);
			this.views.showSweep(resp, this.state.psi[component]);
		} catch (err) {
			if (err instanceof DOMException && err.name === "AbortError") return;
			this.views.showError(err instanceof Error ? err.message : String(err));
		}
	}
}
