//! C ABI for the enhancement engine: opaque handles, status codes, and a
//! thread-local last-error message. The header is generated into
//! `include/depse.h` by the build script.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use depse::config::RunConfig;
use depse::sampler::enhance;
use depse::signal::{istft, stft, ComplexSpectrogram, Waveform};

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg.into());
}

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepseStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    RuntimeError = 4,
}

/// Opaque enhancement engine built from a JSON run configuration.
pub struct DepseEnhancer {
    config: RunConfig,
}

/// Version string of the library; static storage, do not free.
#[no_mangle]
pub extern "C" fn depse_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the thread-local last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the untruncated length.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes, or be NULL with
/// `len == 0` to query the required size.
#[no_mangle]
pub unsafe extern "C" fn depse_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Build an enhancer from a JSON run configuration (same schema as the CLI).
/// Returns NULL on error; see `depse_last_error`.
///
/// # Safety
/// `config_json` must be a valid NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn depse_enhancer_new(config_json: *const c_char) -> *mut DepseEnhancer {
    if config_json.is_null() {
        set_error("config_json is NULL");
        return std::ptr::null_mut();
    }
    let text = match CStr::from_ptr(config_json).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("config_json is not valid UTF-8");
            return std::ptr::null_mut();
        }
    };
    match RunConfig::from_json(text) {
        Ok(config) => Box::into_raw(Box::new(DepseEnhancer { config })),
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Release an enhancer obtained from `depse_enhancer_new`.
///
/// # Safety
/// `handle` must be NULL or a pointer previously returned by
/// `depse_enhancer_new` that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn depse_enhancer_free(handle: *mut DepseEnhancer) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Enhance a mono 16 kHz waveform. `output` receives exactly `len` samples.
/// `seed` makes the run reproducible.
///
/// # Safety
/// `input` and `output` must point to `len` readable/writable doubles and
/// `handle` must be a live enhancer.
#[no_mangle]
pub unsafe extern "C" fn depse_enhance_waveform(
    handle: *const DepseEnhancer,
    input: *const f64,
    len: usize,
    seed: u64,
    output: *mut f64,
) -> DepseStatus {
    if handle.is_null() || input.is_null() || output.is_null() {
        set_error("NULL argument");
        return DepseStatus::NullArgument;
    }
    let enhancer = &*handle;
    let samples = std::slice::from_raw_parts(input, len).to_vec();
    let result = catch_unwind(AssertUnwindSafe(|| enhance_impl(enhancer, samples, seed)));
    match result {
        Ok(Ok(out)) => {
            std::ptr::copy_nonoverlapping(out.as_ptr(), output, len.min(out.len()));
            DepseStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("panic inside the enhancement engine");
            DepseStatus::RuntimeError
        }
    }
}

fn enhance_impl(
    enhancer: &DepseEnhancer,
    samples: Vec<f64>,
    seed: u64,
) -> Result<Vec<f64>, DepseStatus> {
    use rand::SeedableRng;
    let config = &enhancer.config;
    let wave = Waveform::new(samples).map_err(|e| {
        set_error(e.to_string());
        DepseStatus::InvalidArgument
    })?;
    let params = config.stft_params();
    let schedule = config.schedule().map_err(|e| {
        set_error(e.to_string());
        DepseStatus::ConfigError
    })?;
    let sampler_cfg = config.sampler_config().map_err(|e| {
        set_error(e.to_string());
        DepseStatus::ConfigError
    })?;
    let run = || -> depse::Result<Vec<f64>> {
        let spec = stft(&wave, &params)?;
        let mut bins = spec.bins;
        if let Some(beta) = config.stft.compression {
            bins = depse::signal::compress(&bins, beta);
        }
        let score = config.score_model(bins.dim())?;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let mut out_bins = enhance(
            &bins,
            &schedule,
            &sampler_cfg,
            score.as_ref(),
            &config.noise_spec(),
            &mut rng,
        )?;
        if let Some(beta) = config.stft.compression {
            out_bins = depse::signal::decompress(&out_bins, beta);
        }
        let out = istft(
            &ComplexSpectrogram {
                bins: out_bins,
                params,
            },
            wave.len(),
        )?;
        Ok(out.samples)
    };
    run().map_err(|e| {
        set_error(e.to_string());
        DepseStatus::RuntimeError
    })
}

/// Scale-invariant SDR between two equal-length waveforms, in dB.
///
/// # Safety
/// `reference` and `estimate` must point to `len` readable doubles and
/// `out_db` must be writable.
#[no_mangle]
pub unsafe extern "C" fn depse_si_sdr(
    reference: *const f64,
    estimate: *const f64,
    len: usize,
    out_db: *mut f64,
) -> DepseStatus {
    if reference.is_null() || estimate.is_null() || out_db.is_null() {
        set_error("NULL argument");
        return DepseStatus::NullArgument;
    }
    let r = std::slice::from_raw_parts(reference, len);
    let e = std::slice::from_raw_parts(estimate, len);
    let make = |v: &[f64]| Waveform::new(v.to_vec());
    match (make(r), make(e)) {
        (Ok(rw), Ok(ew)) => match depse::metrics::si_sdr(&rw, &ew) {
            Ok(db) => {
                *out_db = db;
                DepseStatus::Ok
            }
            Err(err) => {
                set_error(err.to_string());
                DepseStatus::InvalidArgument
            }
        },
        _ => {
            set_error("non-finite samples");
            DepseStatus::InvalidArgument
        }
    }
}
