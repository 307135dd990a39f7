/* tslint:disable */
/* eslint-disable */

/**
 * Rows of `(t, Re α(t), Im α(t), ν, J(ν))`, `n` rows.
 */
export function kernel(big_gamma: number, gamma: number, big_omega: number, t_max: number, n: number): Float64Array;

/**
 * Late-window (second half) Wolf exponent of `q1` for each `tau`.
 */
export function lyapunov_vs_tau(taus: Float64Array, t_max: number): Float64Array;

/**
 * Trajectory for symmetric mirrors from the default initial state.
 * Column-major: `COLUMNS.len()` blocks of equal length, in CSV column
 * order (`t, q1, q2, p1, p2, n, ReF1, ImF1, ..., ImF5`).
 */
export function simulate(tau: number, big_omega: number, kappa: number, g: number, t_max: number, dt_out: number): Float64Array;

export function trajectory_width(): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly kernel: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly lyapunov_vs_tau: (a: number, b: number, c: number) => [number, number, number, number];
    readonly simulate: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly trajectory_width: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
