/* tslint:disable */
/* eslint-disable */

/**
 * Handle owned by the page.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Time-averaged full-order stream function.
     */
    meanPsi(): Float64Array;
    /**
     * Run the full-order model. Blocks the calling thread.
     */
    constructor(nx: number, ny: number, dt: number, t_end: number, stride: number);
    reduce(n_q: number, alpha: number): Reduction;
    /**
     * Cumulative vorticity eigenvalue fractions.
     */
    spectrum(): Float64Array;
    readonly fomGyres: number;
    readonly fomSeconds: number;
    readonly maxNq: number;
    readonly nPsi: number;
    readonly nx: number;
    readonly ny: number;
}

/**
 * Result of [`Session::reduce`].
 */
export class Reduction {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Mean stream function, row-major from the south-west cell.
     */
    psi(): Float64Array;
    readonly epsilon: number;
    readonly gyres: number;
    readonly seconds: number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly __wbg_reduction_free: (a: number, b: number) => void;
    readonly demo_fomGyres: (a: number) => number;
    readonly demo_fomSeconds: (a: number) => number;
    readonly demo_maxNq: (a: number) => number;
    readonly demo_meanPsi: (a: number) => [number, number];
    readonly demo_nPsi: (a: number) => number;
    readonly demo_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly demo_nx: (a: number) => number;
    readonly demo_ny: (a: number) => number;
    readonly demo_reduce: (a: number, b: number, c: number) => [number, number, number];
    readonly demo_spectrum: (a: number) => [number, number];
    readonly reduction_epsilon: (a: number) => number;
    readonly reduction_gyres: (a: number) => number;
    readonly reduction_psi: (a: number) => [number, number];
    readonly reduction_seconds: (a: number) => number;
    readonly __externref_table_alloc: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
