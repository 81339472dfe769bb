/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const augment_sequence: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number];
export const noise_sweep: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number];
export const typo_set: (a: number, b: number, c: number, d: number, e: bigint) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
