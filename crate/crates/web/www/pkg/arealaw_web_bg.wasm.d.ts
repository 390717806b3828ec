/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_boundvalues_free: (a: number, b: number) => void;
export const __wbg_expandersummary_free: (a: number, b: number) => void;
export const __wbg_get_boundvalues_entropy_offset: (a: number) => number;
export const __wbg_get_boundvalues_renyi_threshold: (a: number) => number;
export const __wbg_get_boundvalues_s_max: (a: number) => number;
export const __wbg_get_expandersummary_deviation: (a: number) => number;
export const __wbg_get_expandersummary_entropy: (a: number) => number;
export const __wbg_get_expandersummary_regime_ok: (a: number) => number;
export const __wbg_profile_free: (a: number, b: number) => void;
export const __wbg_set_boundvalues_entropy_offset: (a: number, b: number) => void;
export const __wbg_set_boundvalues_renyi_threshold: (a: number, b: number) => void;
export const __wbg_set_boundvalues_s_max: (a: number, b: number) => void;
export const __wbg_set_expandersummary_deviation: (a: number, b: number) => void;
export const __wbg_set_expandersummary_entropy: (a: number, b: number) => void;
export const __wbg_set_expandersummary_regime_ok: (a: number, b: number) => void;
export const bound_values: (a: number, b: number, c: number) => [number, number, number];
export const expander_site: (a: number, b: number, c: bigint, d: number) => [number, number, number];
export const profile_entropies: (a: number) => [number, number];
export const profile_gap: (a: number) => number;
export const tfim_profile: (a: number, b: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
