/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_roomdemo_free: (a: number, b: number) => void;
export const mismatch_rate: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const roomdemo_initialized: (a: number) => number;
export const roomdemo_new: (a: number) => [number, number, number];
export const roomdemo_observe: (a: number, b: number, c: number, d: number) => [number, number];
export const roomdemo_packet_bytes: (a: number) => number;
export const roomdemo_sh_panorama: (a: number, b: number, c: number) => [number, number];
export const roomdemo_sphere_panorama: (a: number, b: number, c: number) => [number, number];
export const roomdemo_trigger: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
