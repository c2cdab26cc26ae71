/* tslint:disable */
/* eslint-disable */

export class Curve {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly bandwidths: Float64Array;
    readonly centers: Float64Array;
    readonly mean: Float64Array;
    readonly sd: Float64Array;
}

export class Expert {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly mu_hat: number;
    readonly mu_tilde: number;
    readonly n_local: number;
    readonly sd: Float64Array;
}

export function grid(n: number): Float64Array;

export function local_expert(xs: Float64Array, ys: Float64Array, center: number, bandwidth: number, grid_size: number): Expert;

export function multiscale(xs: Float64Array, ys: Float64Array, delta: number, grid_size: number, seed: bigint): Curve;

export function signal_curve(wiggle: number, grid_size: number): Float64Array;

/**
 * Simulated data, `x` values followed by `y` values.
 */
export function simulate(n: number, wiggle: number, noise_sd: number, seed: bigint): Float64Array;

export function single_scale(xs: Float64Array, ys: Float64Array, bandwidth: number, grid_size: number, seed: bigint): Curve;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_curve_free: (a: number, b: number) => void;
    readonly __wbg_expert_free: (a: number, b: number) => void;
    readonly curve_bandwidths: (a: number) => [number, number];
    readonly curve_centers: (a: number) => [number, number];
    readonly curve_mean: (a: number) => [number, number];
    readonly curve_sd: (a: number) => [number, number];
    readonly expert_mu_hat: (a: number) => number;
    readonly expert_mu_tilde: (a: number) => number;
    readonly expert_n_local: (a: number) => number;
    readonly expert_sd: (a: number) => [number, number];
    readonly grid: (a: number) => [number, number];
    readonly local_expert: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly multiscale: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
    readonly signal_curve: (a: number, b: number) => [number, number];
    readonly simulate: (a: number, b: number, c: number, d: bigint) => [number, number];
    readonly single_scale: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
