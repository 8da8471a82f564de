/* tslint:disable */
/* eslint-disable */

/**
 * Panels handed to the page.
 */
export class Output {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly left: string;
    readonly right: string;
    readonly summary: string;
}

export function bloch_wigner(kind: string, atoms: number, cycles: number, points: number): Output;

export function reconstruction(kind: string, a: number, b: number, order: number): Output;

export function twa(family: string, atoms: number, trajectories: number, seed: bigint, scale: number): Output;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_output_free: (a: number, b: number) => void;
    readonly bloch_wigner: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly output_left: (a: number) => [number, number];
    readonly output_right: (a: number) => [number, number];
    readonly output_summary: (a: number) => [number, number];
    readonly reconstruction: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly twa: (a: number, b: number, c: number, d: number, e: bigint, f: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
