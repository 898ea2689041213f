/* tslint:disable */
/* eslint-disable */

export class Trace {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Column by name, `undefined` when absent.
     */
    column(name: string): Float64Array | undefined;
    /**
     * Why the run stopped early, if it did.
     */
    error(): string | undefined;
    is_empty(): boolean;
    len(): number;
    names(): string[];
    summary(): string;
}

/**
 * iP loop on `ẏ = F + α·u` started one unit off the reference. After the
 * estimator window fills, `|Δy|` should decay as `e^(−K_P t)`.
 */
export function decay_demo(kp: number, disturbance: number, alpha: number, window_periods: number): Trace;

/**
 * Open-loop `y^(ν) = F(t) + α·u(t)` over 10 s with a known input; the
 * estimator sees only `y` (plus optional noise) and `α·u`.
 */
export function estimator_demo(order: number, window_periods: number, noise_std: number, seed: number): Trace;

/**
 * The two-input example with adjustable mismatch, poles and estimator window.
 */
export function simulate_example(initial_scaling: number, perturbed_u2: boolean, feedback: boolean, pole1: number, pole2: number, window_periods: number, noise_std: number, seed: number): Trace;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_trace_free: (a: number, b: number) => void;
    readonly decay_demo: (a: number, b: number, c: number, d: number) => number;
    readonly estimator_demo: (a: number, b: number, c: number, d: number) => number;
    readonly simulate_example: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => number;
    readonly trace_column: (a: number, b: number, c: number) => [number, number];
    readonly trace_error: (a: number) => [number, number];
    readonly trace_is_empty: (a: number) => number;
    readonly trace_len: (a: number) => number;
    readonly trace_names: (a: number) => [number, number];
    readonly trace_summary: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_drop_slice: (a: number, b: number) => void;
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
