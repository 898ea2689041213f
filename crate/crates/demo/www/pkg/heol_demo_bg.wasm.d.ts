/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_trace_free: (a: number, b: number) => void;
export const decay_demo: (a: number, b: number, c: number, d: number) => number;
export const estimator_demo: (a: number, b: number, c: number, d: number) => number;
export const simulate_example: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => number;
export const trace_column: (a: number, b: number, c: number) => [number, number];
export const trace_error: (a: number) => [number, number];
export const trace_is_empty: (a: number) => number;
export const trace_len: (a: number) => number;
export const trace_names: (a: number) => [number, number];
export const trace_summary: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_start: () => void;
