/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const adversarial_curve: (a: number, b: number) => [number, number, number, number];
export const solve_random: (a: number, b: number, c: number) => [number, number, number, number];
export const transform_demo: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
