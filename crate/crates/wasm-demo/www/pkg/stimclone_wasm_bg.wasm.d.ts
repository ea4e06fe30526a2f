/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const fidelityCurves: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const optimalCloner: (a: number, b: number) => [number, number, number, number];
export const postselectedCloner: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
