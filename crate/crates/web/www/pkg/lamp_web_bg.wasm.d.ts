/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_curve_free: (a: number, b: number) => void;
export const __wbg_expert_free: (a: number, b: number) => void;
export const curve_bandwidths: (a: number) => [number, number];
export const curve_centers: (a: number) => [number, number];
export const curve_mean: (a: number) => [number, number];
export const curve_sd: (a: number) => [number, number];
export const expert_mu_hat: (a: number) => number;
export const expert_mu_tilde: (a: number) => number;
export const expert_n_local: (a: number) => number;
export const expert_sd: (a: number) => [number, number];
export const grid: (a: number) => [number, number];
export const local_expert: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const multiscale: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
export const signal_curve: (a: number, b: number) => [number, number];
export const simulate: (a: number, b: number, c: number, d: bigint) => [number, number];
export const single_scale: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
