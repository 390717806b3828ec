/* tslint:disable */
/* eslint-disable */

export class BoundValues {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    entropy_offset: number;
    renyi_threshold: number;
    s_max: number;
}

export class ExpanderSummary {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    deviation: number;
    entropy: number;
    regime_ok: boolean;
}

export class Profile {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Entropy at cuts `1..N`, in nats.
     */
    readonly entropies: Float64Array;
    readonly gap: number;
}

/**
 * Closed-form entropy ceiling, the smallest convergent Rényi order and the
 * bootstrap offset for a decay length `ξ'` and local dimension `D`.
 */
export function bound_values(xi_prime: number, local_dim: number, c0: number): BoundValues;

/**
 * Single-site reduced density matrix of an expander ring state of `n`
 * sites, measured against the maximally mixed state.
 */
export function expander_site(k: number, d: number, seed: bigint, n: number): ExpanderSummary;

/**
 * Ground-state entropy profile of the transverse-field Ising chain.
 */
export function tfim_profile(n: number, h: number): Profile;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_boundvalues_free: (a: number, b: number) => void;
    readonly __wbg_expandersummary_free: (a: number, b: number) => void;
    readonly __wbg_get_boundvalues_entropy_offset: (a: number) => number;
    readonly __wbg_get_boundvalues_renyi_threshold: (a: number) => number;
    readonly __wbg_get_boundvalues_s_max: (a: number) => number;
    readonly __wbg_get_expandersummary_deviation: (a: number) => number;
    readonly __wbg_get_expandersummary_entropy: (a: number) => number;
    readonly __wbg_get_expandersummary_regime_ok: (a: number) => number;
    readonly __wbg_profile_free: (a: number, b: number) => void;
    readonly __wbg_set_boundvalues_entropy_offset: (a: number, b: number) => void;
    readonly __wbg_set_boundvalues_renyi_threshold: (a: number, b: number) => void;
    readonly __wbg_set_boundvalues_s_max: (a: number, b: number) => void;
    readonly __wbg_set_expandersummary_deviation: (a: number, b: number) => void;
    readonly __wbg_set_expandersummary_entropy: (a: number, b: number) => void;
    readonly __wbg_set_expandersummary_regime_ok: (a: number, b: number) => void;
    readonly bound_values: (a: number, b: number, c: number) => [number, number, number];
    readonly expander_site: (a: number, b: number, c: bigint, d: number) => [number, number, number];
    readonly profile_entropies: (a: number) => [number, number];
    readonly profile_gap: (a: number) => number;
    readonly tfim_profile: (a: number, b: number) => [number, number, number];
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
