/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const __wbg_reduction_free: (a: number, b: number) => void;
export const demo_fomGyres: (a: number) => number;
export const demo_fomSeconds: (a: number) => number;
export const demo_maxNq: (a: number) => number;
export const demo_meanPsi: (a: number) => [number, number];
export const demo_nPsi: (a: number) => number;
export const demo_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const demo_nx: (a: number) => number;
export const demo_ny: (a: number) => number;
export const demo_reduce: (a: number, b: number, c: number) => [number, number, number];
export const demo_spectrum: (a: number) => [number, number];
export const reduction_epsilon: (a: number) => number;
export const reduction_gyres: (a: number) => number;
export const reduction_psi: (a: number) => [number, number];
export const reduction_seconds: (a: number) => number;
export const __externref_table_alloc: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
