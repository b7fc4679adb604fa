/* tslint:disable */
/* eslint-disable */

/**
 * The lab room seen from a camera on a circle around the lamp, with one
 * estimation position under it.
 */
export class RoomDemo {
    free(): void;
    [Symbol.dispose](): void;
    initialized(): number;
    constructor(anchor_count: number);
    /**
     * Renders a frame with the given light and camera angle and makes its
     * sphere sample the current observation.
     */
    observe(kelvin: number, intensity: number, orbit_deg: number): void;
    packet_bytes(): number;
    /**
     * Equirectangular RGBA image of the SH estimate, black before any
     * observation.
     */
    sh_panorama(width: number, height: number): Uint8Array;
    /**
     * Equirectangular RGBA image of the current observation; unobserved
     * anchors are dark grey.
     */
    sphere_panorama(width: number, height: number): Uint8Array;
    /**
     * Pools the change between the current observation and a new one;
     * returns `[max pooled difference, 1 if it triggers else 0]`.
     */
    trigger(kelvin: number, intensity: number, orbit_deg: number, theta: number, window: number): Float64Array;
}

/**
 * Fraction of `points` random directions (cube of side 10 m) whose grid
 * lookup differs from the exact nearest anchor.
 */
export function mismatch_rate(anchor_count: number, width: number, height: number, points: number, seed: number): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_roomdemo_free: (a: number, b: number) => void;
    readonly mismatch_rate: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly roomdemo_initialized: (a: number) => number;
    readonly roomdemo_new: (a: number) => [number, number, number];
    readonly roomdemo_observe: (a: number, b: number, c: number, d: number) => [number, number];
    readonly roomdemo_packet_bytes: (a: number) => number;
    readonly roomdemo_sh_panorama: (a: number, b: number, c: number) => [number, number];
    readonly roomdemo_sphere_panorama: (a: number, b: number, c: number) => [number, number];
    readonly roomdemo_trigger: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
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
