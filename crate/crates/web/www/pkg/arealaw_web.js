/* @ts-self-types="./arealaw_web.d.ts" */

export class BoundValues {
    static __wrap(ptr) {
        const obj = Object.create(BoundValues.prototype);
        obj.__wbg_ptr = ptr;
        BoundValuesFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        BoundValuesFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_boundvalues_free(ptr, 0);
    }
    /**
     * @returns {number}
     */
    get entropy_offset() {
        const ret = wasm.__wbg_get_boundvalues_entropy_offset(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get renyi_threshold() {
        const ret = wasm.__wbg_get_boundvalues_renyi_threshold(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get s_max() {
        const ret = wasm.__wbg_get_boundvalues_s_max(this.__wbg_ptr);
        return ret;
    }
    /**
     * @param {number} arg0
     */
    set entropy_offset(arg0) {
        wasm.__wbg_set_boundvalues_entropy_offset(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set renyi_threshold(arg0) {
        wasm.__wbg_set_boundvalues_renyi_threshold(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set s_max(arg0) {
        wasm.__wbg_set_boundvalues_s_max(this.__wbg_ptr, arg0);
    }
}
if (Symbol.dispose) BoundValues.prototype[Symbol.dispose] = BoundValues.prototype.free;

export class ExpanderSummary {
    static __wrap(ptr) {
        const obj = Object.create(ExpanderSummary.prototype);
        obj.__wbg_ptr = ptr;
        ExpanderSummaryFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        ExpanderSummaryFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_expandersummary_free(ptr, 0);
    }
    /**
     * @returns {number}
     */
    get deviation() {
        const ret = wasm.__wbg_get_expandersummary_deviation(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get entropy() {
        const ret = wasm.__wbg_get_expandersummary_entropy(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {boolean}
     */
    get regime_ok() {
        const ret = wasm.__wbg_get_expandersummary_regime_ok(this.__wbg_ptr);
        return ret !== 0;
    }
    /**
     * @param {number} arg0
     */
    set deviation(arg0) {
        wasm.__wbg_set_expandersummary_deviation(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set entropy(arg0) {
        wasm.__wbg_set_expandersummary_entropy(this.__wbg_ptr, arg0);
    }
    /**
     * @param {boolean} arg0
     */
    set regime_ok(arg0) {
        wasm.__wbg_set_expandersummary_regime_ok(this.__wbg_ptr, arg0);
    }
}
if (Symbol.dispose) ExpanderSummary.prototype[Symbol.dispose] = ExpanderSummary.prototype.free;

export class Profile {
    static __wrap(ptr) {
        const obj = Object.create(Profile.prototype);
        obj.__wbg_ptr = ptr;
        ProfileFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        ProfileFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_profile_free(ptr, 0);
    }
    /**
     * Entropy at cuts `1..N`, in nats.
     * @returns {Float64Array}
     */
    get entropies() {
        const ret = wasm.profile_entropies(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * @returns {number}
     */
    get gap() {
        const ret = wasm.profile_gap(this.__wbg_ptr);
        return ret;
    }
}
if (Symbol.dispose) Profile.prototype[Symbol.dispose] = Profile.prototype.free;

/**
 * Closed-form entropy ceiling, the smallest convergent Rényi order and the
 * bootstrap offset for a decay length `ξ'` and local dimension `D`.
 * @param {number} xi_prime
 * @param {number} local_dim
 * @param {number} c0
 * @returns {BoundValues}
 */
export function bound_values(xi_prime, local_dim, c0) {
    const ret = wasm.bound_values(xi_prime, local_dim, c0);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return BoundValues.__wrap(ret[0]);
}

/**
 * Single-site reduced density matrix of an expander ring state of `n`
 * sites, measured against the maximally mixed state.
 * @param {number} k
 * @param {number} d
 * @param {bigint} seed
 * @param {number} n
 * @returns {ExpanderSummary}
 */
export function expander_site(k, d, seed, n) {
    const ret = wasm.expander_site(k, d, seed, n);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return ExpanderSummary.__wrap(ret[0]);
}

/**
 * Ground-state entropy profile of the transverse-field Ising chain.
 * @param {number} n
 * @param {number} h
 * @returns {Profile}
 */
export function tfim_profile(n, h) {
    const ret = wasm.tfim_profile(n, h);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return Profile.__wrap(ret[0]);
}
function __wbg_get_imports() {
    const import0 = {
        __proto__: null,
        __wbg_Error_30c8987f7c2ed4e2: function(arg0, arg1) {
            const ret = Error(getStringFromWasm0(arg0, arg1));
            return ret;
        },
        __wbg___wbindgen_throw_41e9ee4f547fc59a: function(arg0, arg1) {
            throw new Error(getStringFromWasm0(arg0, arg1));
        },
        __wbindgen_init_externref_table: function() {
            const table = wasm.__wbindgen_externrefs;
            const offset = table.grow(4);
            table.set(0, undefined);
            table.set(offset + 0, undefined);
            table.set(offset + 1, null);
            table.set(offset + 2, true);
            table.set(offset + 3, false);
        },
    };
    return {
        __proto__: null,
        "./arealaw_web_bg.js": import0,
    };
}

const BoundValuesFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_boundvalues_free(ptr, 1));
const ExpanderSummaryFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_expandersummary_free(ptr, 1));
const ProfileFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_profile_free(ptr, 1));

function getArrayF64FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getFloat64ArrayMemory0().subarray(ptr / 8, ptr / 8 + len);
}

let cachedFloat64ArrayMemory0 = null;
function getFloat64ArrayMemory0() {
    if (cachedFloat64ArrayMemory0 === null || cachedFloat64ArrayMemory0.byteLength === 0) {
        cachedFloat64ArrayMemory0 = new Float64Array(wasm.memory.buffer);
    }
    return cachedFloat64ArrayMemory0;
}

function getStringFromWasm0(ptr, len) {
    return decodeText(ptr >>> 0, len);
}

let cachedUint8ArrayMemory0 = null;
function getUint8ArrayMemory0() {
    if (cachedUint8ArrayMemory0 === null || cachedUint8ArrayMemory0.byteLength === 0) {
        cachedUint8ArrayMemory0 = new Uint8Array(wasm.memory.buffer);
    }
    return cachedUint8ArrayMemory0;
}

function takeFromExternrefTable0(idx) {
    const value = wasm.__wbindgen_externrefs.get(idx);
    wasm.__externref_table_dealloc(idx);
    return value;
}

let cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
cachedTextDecoder.decode();
const MAX_SAFARI_DECODE_BYTES = 2146435072;
let numBytesDecoded = 0;
function decodeText(ptr, len) {
    numBytesDecoded += len;
    if (numBytesDecoded >= MAX_SAFARI_DECODE_BYTES) {
        cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
        cachedTextDecoder.decode();
        numBytesDecoded = len;
    }
    return cachedTextDecoder.decode(getUint8ArrayMemory0().subarray(ptr, ptr + len));
}

let wasmModule, wasmInstance, wasm;
function __wbg_finalize_init(instance, module) {
    wasmInstance = instance;
    wasm = instance.exports;
    wasmModule = module;
    cachedFloat64ArrayMemory0 = null;
    cachedUint8ArrayMemory0 = null;
    wasm.__wbindgen_start();
    return wasm;
}

async function __wbg_load(module, imports) {
    if (typeof Response === 'function' && module instanceof Response) {
        if (!module.ok) {
            throw new Error(`failed to fetch Wasm: ${module.status} ${module.statusText} fetching '${module.url}'`);
        }

        if (typeof WebAssembly.instantiateStreaming === 'function') {
            try {
                return await WebAssembly.instantiateStreaming(module, imports);
            } catch (e) {
                const validResponse = expectedResponseType(module.type);

                if (validResponse && module.headers.get('Content-Type') !== 'application/wasm') {
                    console.warn("`WebAssembly.instantiateStreaming` failed because your server does not serve Wasm with `application/wasm` MIME type. Falling back to `WebAssembly.instantiate` which is slower. Original error:\n", e);

                } else { throw e; }
            }
        }

        const bytes = await module.arrayBuffer();
        return await WebAssembly.instantiate(bytes, imports);
    } else {
        const instance = await WebAssembly.instantiate(module, imports);

        if (instance instanceof WebAssembly.Instance) {
            return { instance, module };
        } else {
            return instance;
        }
    }

    function expectedResponseType(type) {
        switch (type) {
            case 'basic': case 'cors': case 'default': return true;
        }
        return false;
    }
}

function initSync(module) {
    if (wasm !== undefined) return wasm;


    if (module !== undefined) {
        if (Object.getPrototypeOf(module) === Object.prototype) {
            ({module} = module)
        } else {
            console.warn('using deprecated parameters for `initSync()`; pass a single object instead')
        }
    }

    const imports = __wbg_get_imports();
    if (!(module instanceof WebAssembly.Module)) {
        module = new WebAssembly.Module(module);
    }
    const instance = new WebAssembly.Instance(module, imports);
    return __wbg_finalize_init(instance, module);
}

async function __wbg_init(module_or_path) {
    if (wasm !== undefined) return wasm;


    if (module_or_path !== undefined) {
        if (Object.getPrototypeOf(module_or_path) === Object.prototype) {
            ({module_or_path} = module_or_path)
        } else {
            console.warn('using deprecated parameters for the initialization function; pass a single object instead')
        }
    }

    if (module_or_path === undefined) {
        module_or_path = new URL('arealaw_web_bg.wasm', import.meta.url);
    }
    const imports = __wbg_get_imports();

    if (typeof module_or_path === 'string' || (typeof Request === 'function' && module_or_path instanceof Request) || (typeof URL === 'function' && module_or_path instanceof URL)) {
        module_or_path = fetch(module_or_path);
    }

    const { instance, module } = await __wbg_load(await module_or_path, imports);

    return __wbg_finalize_init(instance, module);
}

export { initSync, __wbg_init as default };
