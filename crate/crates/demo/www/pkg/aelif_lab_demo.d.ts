/* tslint:disable */
/* eslint-disable */

/**
 * Tokenizes and encodes `prompt`, then applies one AELIF draw.
 * `mode` is `none`, `mask` or `noise_conv`.
 */
export function augment_sequence(prompt: string, mode: string, p: number, mu: number, sigma: number, seed: bigint): string;

/**
 * Trains a baseline model for `category` for `steps` SGD steps, then sweeps
 * inference-time noise_conv over p = 0, 0.1, …, 0.9.
 */
export function noise_sweep(category: string, steps: number, sigma: number, seeds: number, seed: bigint): string;

/**
 * `count` typo'd variants of `template` ("a photo of sks <item>").
 */
export function typo_set(template: string, count: number, max_edits: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly augment_sequence: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number];
    readonly noise_sweep: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number];
    readonly typo_set: (a: number, b: number, c: number, d: number, e: bigint) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
