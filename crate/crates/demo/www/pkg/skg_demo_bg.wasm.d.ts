/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_keydemo_free: (a: number, b: number) => void;
export const capacity_curves: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const channel_view: (a: number, b: number, c: bigint) => [number, number, number, number];
export const dof: (a: number) => [number, number, number];
export const keydemo_bit_error_rate: (a: number) => number;
export const keydemo_code_length: (a: number) => number;
export const keydemo_iterations: (a: number) => number;
export const keydemo_key_a: (a: number) => [number, number];
export const keydemo_key_b: (a: number) => [number, number];
export const keydemo_key_length: (a: number) => number;
export const keydemo_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const keydemo_public_bits: (a: number) => number;
export const keydemo_run: (a: number, b: bigint) => [number, number, number];
export const keydemo_symbol_errors: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
