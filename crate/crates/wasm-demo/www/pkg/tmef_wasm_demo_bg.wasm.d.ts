/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const efficiency_table: () => [number, number];
export const info_curve: (a: number, b: number, c: number, d: number) => [number, number];
export const simulate_and_estimate: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
