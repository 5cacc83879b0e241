//! C ABI over the ORAM simulators.
//!
//! Instances are opaque handles created from a plain config struct; every
//! function returns a status code and the last error message is retrievable
//! per thread. Payloads cross the boundary as raw byte buffers of exactly
//! `ceil(block_bits / 8)` bytes. The generated header lives at
//! `include/soram.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use soram::harness::{check_table2, Instance};
use soram::params::{derive_params_t1, derive_params_t2, TreeParams};
use soram::payload::BlockPayload;
use soram::space::{closed_form_report, SpaceMode};
use soram::store::{PhysicalStore, TraceMode};
use soram::succinct::Op;
use soram::tables::TableMode;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoramStatus {
    Ok = 0,
    ErrInvalidArgument = 1,
    ErrIntegrity = 2,
    ErrBufferTooSmall = 3,
    ErrPanic = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoramConstruction {
    Path = 0,
    SuccinctOne = 1,
    SuccinctTwo = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoramTableMode {
    Memory = 0,
    Outsourced = 1,
}

/// Instance configuration. Zero means "use the default/derived value" for
/// `z`, `height`, `leaf_cap` and `f`; explicit `height` and `leaf_cap` must
/// be given together and then take precedence over the `f`/`g`/`eps`
/// derivation.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SoramConfig {
    pub construction: SoramConstruction,
    pub n_blocks: u64,
    pub block_bits: u32,
    pub z: u32,
    pub height: u32,
    pub leaf_cap: u32,
    pub f: u64,
    pub g: f64,
    pub eps: f64,
    pub table_mode: SoramTableMode,
    pub seed: u64,
}

/// Opaque handle: one simulated server plus one ORAM instance on it.
pub struct SoramInstance {
    store: PhysicalStore,
    inst: Instance,
    params: TreeParams,
    initialized: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: SoramStatus, msg: &str) -> SoramStatus {
    set_error(msg);
    status
}

fn guarded(f: impl FnOnce() -> SoramStatus) -> SoramStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(SoramStatus::ErrPanic, "internal panic"),
    }
}

/// Message describing the most recent error on this thread. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn soram_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn resolve_params(cfg: &SoramConfig) -> Result<TreeParams, String> {
    let explicit = cfg.height != 0 || cfg.leaf_cap != 0;
    match cfg.construction {
        SoramConstruction::Path => {
            let z = if cfg.z == 0 { 5 } else { cfg.z };
            let height = (cfg.height != 0).then_some(cfg.height);
            TreeParams::path_oram(cfg.n_blocks, cfg.block_bits, z, height)
                .map(|d| d.params)
                .map_err(|e| e.to_string())
        }
        SoramConstruction::SuccinctOne => {
            if explicit {
                if cfg.height == 0 || cfg.leaf_cap == 0 {
                    return Err("height and leaf_cap must both be set".into());
                }
                let z = if cfg.z == 0 { 3 } else { cfg.z };
                TreeParams::manual(
                    soram::params::Construction::SuccinctOne,
                    cfg.n_blocks,
                    cfg.block_bits,
                    z,
                    cfg.height,
                    cfg.leaf_cap,
                )
                .map(|d| d.params)
                .map_err(|e| e.to_string())
            } else {
                if cfg.f == 0 {
                    return Err("f must be set when height/leaf_cap are not".into());
                }
                let mut p = derive_params_t1(cfg.n_blocks, cfg.block_bits, cfg.f, cfg.g)
                    .map(|d| d.params)
                    .map_err(|e| e.to_string())?;
                if cfg.z != 0 {
                    p.bucket_cap = cfg.z;
                }
                Ok(p)
            }
        }
        SoramConstruction::SuccinctTwo => {
            if explicit {
                if cfg.height == 0 || cfg.leaf_cap == 0 {
                    return Err("height and leaf_cap must both be set".into());
                }
                let z = if cfg.z == 0 { 4 } else { cfg.z };
                TreeParams::manual(
                    soram::params::Construction::SuccinctTwo,
                    cfg.n_blocks,
                    cfg.block_bits,
                    z,
                    cfg.height,
                    cfg.leaf_cap,
                )
                .map(|d| d.params)
                .map_err(|e| e.to_string())
            } else {
                if cfg.f == 0 {
                    return Err("f must be set when height/leaf_cap are not".into());
                }
                let mut p = derive_params_t2(cfg.n_blocks, cfg.block_bits, cfg.f, cfg.eps)
                    .map(|d| d.params)
                    .map_err(|e| e.to_string())?;
                if cfg.z != 0 {
                    p.bucket_cap = cfg.z;
                }
                Ok(p)
            }
        }
    }
}

/// Creates an instance. On success `*out` owns the handle; free it with
/// `soram_instance_destroy`.
///
/// # Safety
/// `cfg` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn soram_instance_create(
    cfg: *const SoramConfig,
    out: *mut *mut SoramInstance,
) -> SoramStatus {
    guarded(|| {
        if cfg.is_null() || out.is_null() {
            return fail(SoramStatus::ErrInvalidArgument, "null pointer");
        }
        let cfg = unsafe { &*cfg };
        let params = match resolve_params(cfg) {
            Ok(p) => p,
            Err(e) => return fail(SoramStatus::ErrInvalidArgument, &e),
        };
        let table_mode = match cfg.table_mode {
            SoramTableMode::Memory => TableMode::InMemory,
            SoramTableMode::Outsourced => TableMode::Outsourced,
        };
        let mut store =
            PhysicalStore::with_trace_mode(params.block_bits, TraceMode::CountersOnly);
        match Instance::build(&mut store, params, table_mode, cfg.seed) {
            Ok(inst) => {
                let handle = Box::new(SoramInstance {
                    store,
                    inst,
                    params,
                    initialized: false,
                });
                unsafe { *out = Box::into_raw(handle) };
                SoramStatus::Ok
            }
            Err(e) => fail(SoramStatus::ErrInvalidArgument, &e.to_string()),
        }
    })
}

/// # Safety
/// `inst` must come from `soram_instance_create` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn soram_instance_destroy(inst: *mut SoramInstance) {
    if !inst.is_null() {
        drop(unsafe { Box::from_raw(inst) });
    }
}

/// Loads every block with a default payload stamping its address.
///
/// # Safety
/// `inst` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn soram_instance_init_default(inst: *mut SoramInstance) -> SoramStatus {
    guarded(|| {
        let Some(h) = (unsafe { inst.as_mut() }) else {
            return fail(SoramStatus::ErrInvalidArgument, "null handle");
        };
        let payloads: Vec<BlockPayload> = (0..h.params.n_blocks)
            .map(|a| BlockPayload::from_u64(h.params.block_bits, a))
            .collect();
        match h.inst.init(&mut h.store, &payloads) {
            Ok(()) => {
                h.initialized = true;
                h.store.reset_accounting();
                SoramStatus::Ok
            }
            Err(e) => fail(SoramStatus::ErrIntegrity, &e.to_string()),
        }
    })
}

/// Loads all blocks from `payloads`: `n_blocks * block_bytes` contiguous
/// bytes, one block after another.
///
/// # Safety
/// `inst` must be a valid handle; `payloads` must point to `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn soram_instance_init_from_bytes(
    inst: *mut SoramInstance,
    payloads: *const u8,
    len: usize,
) -> SoramStatus {
    guarded(|| {
        let Some(h) = (unsafe { inst.as_mut() }) else {
            return fail(SoramStatus::ErrInvalidArgument, "null handle");
        };
        if payloads.is_null() {
            return fail(SoramStatus::ErrInvalidArgument, "null payloads");
        }
        let bb = h.params.block_bytes();
        let want = h.params.n_blocks as usize * bb;
        if len != want {
            return fail(
                SoramStatus::ErrInvalidArgument,
                &format!("payload buffer is {len} bytes, expected {want}"),
            );
        }
        let bytes = unsafe { std::slice::from_raw_parts(payloads, len) };
        let blocks: Vec<BlockPayload> = bytes
            .chunks_exact(bb)
            .map(|c| BlockPayload::from_bytes(h.params.block_bits, c.to_vec()))
            .collect();
        match h.inst.init(&mut h.store, &blocks) {
            Ok(()) => {
                h.initialized = true;
                h.store.reset_accounting();
                SoramStatus::Ok
            }
            Err(e) => fail(SoramStatus::ErrIntegrity, &e.to_string()),
        }
    })
}

/// One logical access. For writes, `val` supplies the new block; the
/// pre-update value is copied to `out` when it is non-null. Both buffers are
/// `ceil(block_bits/8)` bytes.
///
/// # Safety
/// `inst` must be a valid initialized handle; buffers must match the block
/// size when non-null.
#[no_mangle]
pub unsafe extern "C" fn soram_access(
    inst: *mut SoramInstance,
    addr: u64,
    is_write: i32,
    val: *const u8,
    out: *mut u8,
) -> SoramStatus {
    guarded(|| {
        let Some(h) = (unsafe { inst.as_mut() }) else {
            return fail(SoramStatus::ErrInvalidArgument, "null handle");
        };
        if !h.initialized {
            return fail(
                SoramStatus::ErrInvalidArgument,
                "instance not initialized",
            );
        }
        let bb = h.params.block_bytes();
        let (op, payload) = if is_write != 0 {
            if val.is_null() {
                return fail(SoramStatus::ErrInvalidArgument, "null write payload");
            }
            let bytes = unsafe { std::slice::from_raw_parts(val, bb) };
            (
                Op::Write,
                Some(BlockPayload::from_bytes(h.params.block_bits, bytes.to_vec())),
            )
        } else {
            (Op::Read, None)
        };
        match h.inst.access(&mut h.store, addr, op, payload.as_ref()) {
            Ok(old) => {
                if !out.is_null() {
                    unsafe {
                        std::ptr::copy_nonoverlapping(old.as_bytes().as_ptr(), out, bb);
                    }
                }
                SoramStatus::Ok
            }
            Err(soram::OramError::AddressOutOfRange { .. }) => fail(
                SoramStatus::ErrInvalidArgument,
                &format!("address {addr} out of range"),
            ),
            Err(e) => fail(SoramStatus::ErrIntegrity, &e.to_string()),
        }
    })
}

/// Current stash occupancy in blocks.
///
/// # Safety
/// `inst` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn soram_stash_size(
    inst: *const SoramInstance,
    out: *mut u64,
) -> SoramStatus {
    guarded(|| {
        let (Some(h), false) = (unsafe { inst.as_ref() }, out.is_null()) else {
            return fail(SoramStatus::ErrInvalidArgument, "null pointer");
        };
        unsafe { *out = h.inst.stash_size() as u64 };
        SoramStatus::Ok
    })
}

/// Physical transfer counters since initialization: total reads, total
/// writes and the data-block transfers against the top tree (the bandwidth
/// figure). Null outputs are skipped.
///
/// # Safety
/// `inst` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn soram_counters(
    inst: *const SoramInstance,
    reads: *mut u64,
    writes: *mut u64,
    top_data: *mut u64,
) -> SoramStatus {
    guarded(|| {
        let Some(h) = (unsafe { inst.as_ref() }) else {
            return fail(SoramStatus::ErrInvalidArgument, "null handle");
        };
        let c = h.store.counters();
        unsafe {
            if !reads.is_null() {
                *reads = c.reads;
            }
            if !writes.is_null() {
                *writes = c.writes;
            }
            if !top_data.is_null() {
                *top_data = c.top_data();
            }
        }
        SoramStatus::Ok
    })
}

/// Data-block transfers per logical access for the handle's parameters
/// (closed form, constant per configuration).
///
/// # Safety
/// `inst` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn soram_bandwidth_blocks(
    inst: *const SoramInstance,
    out: *mut u64,
) -> SoramStatus {
    guarded(|| {
        let (Some(h), false) = (unsafe { inst.as_ref() }, out.is_null()) else {
            return fail(SoramStatus::ErrInvalidArgument, "null pointer");
        };
        unsafe { *out = h.params.bandwidth_blocks() };
        SoramStatus::Ok
    })
}

fn write_json(json: &str, buf: *mut c_char, buf_len: usize, written: *mut usize) -> SoramStatus {
    let bytes = json.as_bytes();
    let needed = bytes.len() + 1;
    if !written.is_null() {
        unsafe { *written = needed };
    }
    if buf.is_null() || buf_len < needed {
        return fail(
            SoramStatus::ErrBufferTooSmall,
            &format!("need {needed} bytes"),
        );
    }
    unsafe {
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
        *buf.add(bytes.len()) = 0;
    }
    SoramStatus::Ok
}

/// Space report for the handle's parameters as a JSON document.
/// `mode` 0 reports the comparison-table figure (data tree only), 1 the
/// full accounting with metadata and outsourced tables. On
/// `SORAM_ERR_BUFFER_TOO_SMALL`, `*written` holds the required size.
///
/// # Safety
/// Pointers must be valid; `buf` must hold `buf_len` bytes when non-null.
#[no_mangle]
pub unsafe extern "C" fn soram_space_report_json(
    inst: *const SoramInstance,
    mode: i32,
    buf: *mut c_char,
    buf_len: usize,
    written: *mut usize,
) -> SoramStatus {
    guarded(|| {
        let Some(h) = (unsafe { inst.as_ref() }) else {
            return fail(SoramStatus::ErrInvalidArgument, "null handle");
        };
        let mode = if mode == 0 {
            SpaceMode::Table2
        } else {
            SpaceMode::Full
        };
        let report = closed_form_report(&h.params, mode);
        write_json(&serde_json_string(&report), buf, buf_len, written)
    })
}

/// The closed-form comparison-table reproduction as a JSON array.
///
/// # Safety
/// `buf` must hold `buf_len` bytes when non-null; `written` may be null.
#[no_mangle]
pub unsafe extern "C" fn soram_table2_json(
    n_blocks: u64,
    block_bits: u32,
    buf: *mut c_char,
    buf_len: usize,
    written: *mut usize,
) -> SoramStatus {
    guarded(|| {
        if n_blocks < 2 || block_bits == 0 {
            return fail(SoramStatus::ErrInvalidArgument, "bad table shape");
        }
        let checks = check_table2(n_blocks, block_bits);
        write_json(&serde_json_string(&checks), buf, buf_len, written)
    })
}

fn serde_json_string<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_else(|_| "null".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_cfg() -> SoramConfig {
        SoramConfig {
            construction: SoramConstruction::SuccinctOne,
            n_blocks: 1 << 10,
            block_bits: 256,
            z: 0,
            height: 0,
            leaf_cap: 0,
            f: 16,
            g: 2.0,
            eps: 1.0,
            table_mode: SoramTableMode::Memory,
            seed: 7,
        }
    }

    #[test]
    fn create_access_destroy_roundtrip() {
        unsafe {
            let mut handle: *mut SoramInstance = std::ptr::null_mut();
            assert_eq!(
                soram_instance_create(&default_cfg(), &mut handle),
                SoramStatus::Ok
            );
            assert_eq!(soram_instance_init_default(handle), SoramStatus::Ok);

            let bb = 256 / 8;
            let val = vec![0xaau8; bb];
            let mut out = vec![0u8; bb];
            assert_eq!(
                soram_access(handle, 5, 1, val.as_ptr(), out.as_mut_ptr()),
                SoramStatus::Ok
            );
            assert_eq!(u64::from_le_bytes(out[..8].try_into().unwrap()), 5);
            assert_eq!(
                soram_access(handle, 5, 0, std::ptr::null(), out.as_mut_ptr()),
                SoramStatus::Ok
            );
            assert_eq!(out, val);

            let mut stash = u64::MAX;
            assert_eq!(soram_stash_size(handle, &mut stash), SoramStatus::Ok);
            let mut bw = 0u64;
            assert_eq!(soram_bandwidth_blocks(handle, &mut bw), SoramStatus::Ok);
            assert!(bw > 0);
            soram_instance_destroy(handle);
        }
    }

    #[test]
    fn errors_carry_messages() {
        unsafe {
            let mut handle: *mut SoramInstance = std::ptr::null_mut();
            let mut cfg = default_cfg();
            cfg.f = 0; // no derivation inputs
            assert_eq!(
                soram_instance_create(&cfg, &mut handle),
                SoramStatus::ErrInvalidArgument
            );
            let msg = std::ffi::CStr::from_ptr(soram_last_error_message());
            assert!(!msg.to_bytes().is_empty());

            assert_eq!(
                soram_instance_create(&default_cfg(), &mut handle),
                SoramStatus::Ok
            );
            assert_eq!(soram_instance_init_default(handle), SoramStatus::Ok);
            assert_eq!(
                soram_access(handle, u64::MAX, 0, std::ptr::null(), std::ptr::null_mut()),
                SoramStatus::ErrInvalidArgument
            );
            soram_instance_destroy(handle);
        }
    }

    #[test]
    fn json_buffers_negotiate_size() {
        unsafe {
            let mut needed = 0usize;
            assert_eq!(
                soram_table2_json(1 << 20, 1 << 10, std::ptr::null_mut(), 0, &mut needed),
                SoramStatus::ErrBufferTooSmall
            );
            assert!(needed > 2);
            let mut buf = vec![0i8; needed];
            assert_eq!(
                soram_table2_json(1 << 20, 1 << 10, buf.as_mut_ptr(), needed, &mut needed),
                SoramStatus::Ok
            );
            let text = std::ffi::CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
            assert!(text.starts_with('['));
            assert!(text.contains("bandwidth_match"));
        }
    }
}
