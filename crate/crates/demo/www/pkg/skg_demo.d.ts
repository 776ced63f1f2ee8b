/* tslint:disable */
/* eslint-disable */

/**
 * A code built once and reused across sessions.
 */
export class KeyDemo {
    free(): void;
    [Symbol.dispose](): void;
    bit_error_rate(): number;
    code_length(): number;
    iterations(): number;
    key_a(): string;
    key_b(): string;
    key_length(): number;
    /**
     * `levels` is 2 or 4, `rate` is key bits per data symbol.
     */
    constructor(delay_spread_ns: number, snr_db: number, rate: number, levels: number, blocks: number, soft: boolean);
    public_bits(): number;
    run(seed: bigint): boolean;
    symbol_errors(): number;
}

/**
 * Rows of `[snr_db, csi, csi_flat, rssi]` in bits per coherence interval, flattened.
 */
export function capacity_curves(delay_spread_ns: number, snr_lo: number, snr_hi: number, step: number): Float64Array;

/**
 * One channel draw seen by both ends. Layout: `|H_A|`, `|H_B|` over the M tones,
 * then `|h_A|`, `|h_B|` over the L bins, then the tone correlation `|r(k)|` for k = 0..M.
 */
export function channel_view(delay_spread_ns: number, snr_db: number, seed: bigint): Float64Array;

/**
 * Delay bins `L` retained for a delay spread.
 */
export function dof(delay_spread_ns: number): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_keydemo_free: (a: number, b: number) => void;
    readonly capacity_curves: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly channel_view: (a: number, b: number, c: bigint) => [number, number, number, number];
    readonly dof: (a: number) => [number, number, number];
    readonly keydemo_bit_error_rate: (a: number) => number;
    readonly keydemo_code_length: (a: number) => number;
    readonly keydemo_iterations: (a: number) => number;
    readonly keydemo_key_a: (a: number) => [number, number];
    readonly keydemo_key_b: (a: number) => [number, number];
    readonly keydemo_key_length: (a: number) => number;
    readonly keydemo_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly keydemo_public_bits: (a: number) => number;
    readonly keydemo_run: (a: number, b: bigint) => [number, number, number];
    readonly keydemo_symbol_errors: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
