// Wire types for the vmplab JSON endpoints.

export interface PsiBound {
	name: string;
	lower: number;
	upper: number;
}

export interface Meta {
	model: string;
	kind: string;
	psi: PsiBound[];
	params: { [block: string]: string[] };
	criteria: string[];
	limits: { max_sample_rows: number; max_sweep_points: number; max_mc: number };
	checkpoint: { [k: string]: unknown };
	checksum: string;
}

export interface SampleResponse {
	columns: string[];
	rows: number[][];
	log_q: number[];
}

export interface CriterionResponse {
	criterion: string;
	value: number;
	stderr: number;
}

export interface SweepPoint {
	value: number;
	loss: number;
}

export interface SweepResponse {
	component: string;
	criterion: string;
	points: SweepPoint[];
}

export type Psi = { [component: string]: number };
