import { Meta } from "../src/types.js";

export function fakeMeta(): Meta {
	return {
		model: "hpv",
		kind: "block_flow",
		psi: [
			{ name: "eta", lower: 0, upper: 1 },
			{ name: "c1", lower: 0.1, upper: 20 },
			{ name: "c2", lower: 0.1, upper: 20 },
		],
		params: { theta: ["theta1", "theta2"], delta: ["delta_a", "delta_b"] },
		criteria: ["elbo", "elpd_y", "elpd_z"],
		limits: { max_sample_rows: 10000, max_sweep_points: 200, max_mc: 4096 },
		checkpoint: {},
		checksum: "abcd1234",
	};
}

export interface RecordedRequest {
	url: string;
	body: any;
}

/** fetch stub that records every request body and answers with canned JSON. */
export function recordingFetch(meta: Meta, log: RecordedRequest[]) {
	return async (url: string, init?: RequestInit): Promise<Response> => {
		if (url.endsWith("/meta")) {
			return new Response(JSON.stringify(meta), { status: 200 });
		}
		const body = init?.body ? JSON.parse(init.body as string) : null;
		log.push({ url, body });
		if (url.endsWith("/sample")) {
			const rows = Array.from({ length: body.n }, (_, i) => [i * 0.01, 1 + i * 0.01, 0.5, 0.5]);
			return new Response(
				JSON.stringify({ columns: ["theta1", "theta2", "delta_a", "delta_b"], rows, log_q: rows.map(() => -1) }),
				{ status: 200 },
			);
		}
		if (url.endsWith("/criterion")) {
			return new Response(JSON.stringify({ criterion: body.criterion, value: -3.2, stderr: 0.05 }), { status: 200 });
		}
		if (url.endsWith("/sweep")) {
			const points = body.values.map((v: number) => ({ value: v, loss: (v - 0.4) * (v - 0.4) }));
			return new Response(JSON.stringify({ component: body.component, criterion: body.criterion, points }), { status: 200 });
		}
		return new Response("not found", { status: 404 });
	};
}
