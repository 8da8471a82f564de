/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_output_free: (a: number, b: number) => void;
export const bloch_wigner: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const output_left: (a: number) => [number, number];
export const output_right: (a: number) => [number, number];
export const output_summary: (a: number) => [number, number];
export const reconstruction: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const twa: (a: number, b: number, c: number, d: number, e: bigint, f: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
