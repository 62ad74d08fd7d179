//! C ABI over the STFT, consistency projection, gradient-surgery weights,
//! segmental SNR and WAV reading.
//!
//! Every function returns an [`ScpStatus`]; on failure a message is kept per
//! thread and can be fetched with [`scp_last_error`]. Objects are opaque
//! handles released with their `_free` function. No function unwinds across
//! the boundary.

use scpgan::data::{self, DataError};
use scpgan::dsp::{self, Complex64, DspError, Spectrogram, StftParams, StftPlan, Waveform, Window};
use scpgan::metrics::{self, SsnrParams};
use scpgan::surgery::{self, Branch, GradVector, ScWeights};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    LengthMismatch = 3,
    Io = 4,
    Format = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScpWindow {
    /// Hann analysis, rectangular synthesis.
    Hann = 0,
    SqrtHann = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScpBranch {
    AcuteAcute = 0,
    AcuteObtuse = 1,
    ObtuseAcute = 2,
    ObtuseObtuse = 3,
    TwoPartAcute = 4,
    TwoPartObtuse = 5,
}

/// Part weights of a corrected discriminator direction. `w_n` is only
/// meaningful when `has_w_n` is nonzero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScpWeights {
    pub w_c: f64,
    pub w_e: f64,
    pub w_n: f64,
    pub has_w_n: u8,
    pub degenerate: u8,
    pub branch: ScpBranch,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScpSsnrParams {
    pub frame_len: usize,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
    pub silence_floor: f64,
}

/// Opaque STFT configuration with its FFT plans.
pub struct ScpStftPlan {
    plan: StftPlan,
}

/// Opaque decoded mono waveform.
pub struct ScpWave {
    wave: Waveform,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(ScpStatus, String);

impl From<DspError> for Failure {
    fn from(e: DspError) -> Self {
        let status = match e {
            DspError::ShapeMismatch { .. } | DspError::ParamMismatch => ScpStatus::LengthMismatch,
            _ => ScpStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        let status = match e {
            DataError::Io(_) => ScpStatus::Io,
            DataError::BadHeader(_) | DataError::UnsupportedFormat(_) | DataError::Truncated => ScpStatus::Format,
            _ => ScpStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<surgery::SurgeryError> for Failure {
    fn from(e: surgery::SurgeryError) -> Self {
        Failure(ScpStatus::InvalidArgument, e.to_string())
    }
}

impl From<metrics::MetricsError> for Failure {
    fn from(e: metrics::MetricsError) -> Self {
        Failure(ScpStatus::InvalidArgument, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(ScpStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ScpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ScpStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ScpStatus::Internal
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(ScpStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or point to `len` writable values.
unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// # Safety
/// `p` must be null or a handle returned by this library and not yet freed.
unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    non_null(p, what)?;
    Ok(&*p)
}

/// Message of the last failed call on this thread, or null after a
/// successful one. Valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn scp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

// ------------------------------------------------------------------ STFT

/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to free
/// with [`scp_stft_plan_free`].
#[no_mangle]
pub unsafe extern "C" fn scp_stft_plan_new(
    fft_size: usize,
    hop: usize,
    window: ScpWindow,
    center_pad: u8,
    out: *mut *mut ScpStftPlan,
) -> ScpStatus {
    guard(|| {
        non_null(out, "out")?;
        let window = match window {
            ScpWindow::Hann => Window::Hann,
            ScpWindow::SqrtHann => Window::SqrtHann,
        };
        let params = StftParams::new(fft_size, hop, window, center_pad != 0)?;
        let plan = StftPlan::new(params)?;
        *out = Box::into_raw(Box::new(ScpStftPlan { plan }));
        Ok(())
    })
}

/// # Safety
/// `plan` must be null or a live handle from [`scp_stft_plan_new`].
#[no_mangle]
pub unsafe extern "C" fn scp_stft_plan_free(plan: *mut ScpStftPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Frequency bins per frame, `fft_size / 2 + 1`.
///
/// # Safety
/// `plan` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scp_stft_bins(plan: *const ScpStftPlan, out: *mut usize) -> ScpStatus {
    guard(|| {
        let p = handle(plan, "plan")?;
        non_null(out, "out")?;
        *out = p.plan.params().n_bins();
        Ok(())
    })
}

/// Frame count for a signal of `len` samples.
///
/// # Safety
/// `plan` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scp_stft_frames(plan: *const ScpStftPlan, len: usize, out: *mut usize) -> ScpStatus {
    guard(|| {
        let p = handle(plan, "plan")?;
        non_null(out, "out")?;
        *out = p.plan.n_frames(len)?;
        Ok(())
    })
}

/// Analyses `signal` into frame-major real and imaginary planes of
/// `frames × bins` values each.
///
/// # Safety
/// `signal` must hold `len` values; `re` and `im` must hold `out_len`.
#[no_mangle]
pub unsafe extern "C" fn scp_stft(
    plan: *const ScpStftPlan,
    signal: *const f64,
    len: usize,
    re: *mut f64,
    im: *mut f64,
    out_len: usize,
) -> ScpStatus {
    guard(|| {
        let p = handle(plan, "plan")?;
        let x = slice(signal, len, "signal")?;
        let spec = dsp::stft_with(&p.plan, x)?;
        write_planes(spec.bins(), re, im, out_len)
    })
}

unsafe fn write_planes(bins: &[Complex64], re: *mut f64, im: *mut f64, out_len: usize) -> Result<(), Failure> {
    if out_len != bins.len() {
        return Err(Failure(
            ScpStatus::LengthMismatch,
            format!("output holds {out_len} bins, spectrogram has {}", bins.len()),
        ));
    }
    let re = slice_mut(re, out_len, "re")?;
    let im = slice_mut(im, out_len, "im")?;
    for ((r, i), b) in re.iter_mut().zip(im.iter_mut()).zip(bins) {
        *r = b.re;
        *i = b.im;
    }
    Ok(())
}

unsafe fn read_spec(
    p: &ScpStftPlan,
    re: *const f64,
    im: *const f64,
    n: usize,
    origin_len: usize,
) -> Result<Spectrogram, Failure> {
    let re = slice(re, n, "re")?;
    let im = slice(im, n, "im")?;
    let bins = re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect();
    Ok(Spectrogram::from_bins(bins, *p.plan.params(), origin_len)?)
}

/// Synthesises `out_len` samples from planes of `n` bins each. `n` must
/// equal the frame count for `out_len` times the bin count.
///
/// # Safety
/// `re` and `im` must hold `n` values; `out` must hold `out_len`.
#[no_mangle]
pub unsafe extern "C" fn scp_istft(
    plan: *const ScpStftPlan,
    re: *const f64,
    im: *const f64,
    n: usize,
    out: *mut f64,
    out_len: usize,
) -> ScpStatus {
    guard(|| {
        let p = handle(plan, "plan")?;
        let spec = read_spec(p, re, im, n, out_len)?;
        let y = dsp::istft_with(&p.plan, &spec, out_len)?;
        slice_mut(out, out_len, "out")?.copy_from_slice(&y);
        Ok(())
    })
}

/// Nearest consistent spectrogram: STFT of the iSTFT of the input, for a
/// signal of `origin_len` samples.
///
/// # Safety
/// All four planes must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn scp_consistency_project(
    plan: *const ScpStftPlan,
    re: *const f64,
    im: *const f64,
    n: usize,
    origin_len: usize,
    re_out: *mut f64,
    im_out: *mut f64,
) -> ScpStatus {
    guard(|| {
        let p = handle(plan, "plan")?;
        let spec = read_spec(p, re, im, n, origin_len)?;
        let projected = dsp::consistency_project_with(&p.plan, &spec)?;
        write_planes(projected.bins(), re_out, im_out, n)
    })
}

// --------------------------------------------------------------- surgery

fn to_c(w: ScWeights) -> ScpWeights {
    ScpWeights {
        w_c: w.w_c,
        w_e: w.w_e,
        w_n: w.w_n.unwrap_or(0.0),
        has_w_n: w.w_n.is_some() as u8,
        degenerate: w.degenerate as u8,
        branch: match w.branch {
            Branch::AcuteAcute => ScpBranch::AcuteAcute,
            Branch::AcuteObtuse => ScpBranch::AcuteObtuse,
            Branch::ObtuseAcute => ScpBranch::ObtuseAcute,
            Branch::ObtuseObtuse => ScpBranch::ObtuseObtuse,
            Branch::TwoPartAcute => ScpBranch::TwoPartAcute,
            Branch::TwoPartObtuse => ScpBranch::TwoPartObtuse,
        },
    }
}

unsafe fn grad(p: *const f64, dim: usize, what: &str) -> Result<GradVector, Failure> {
    if dim == 0 {
        return Err(invalid("gradient dimension is 0"));
    }
    Ok(GradVector::new(slice(p, dim, what)?.to_vec())?)
}

/// Two-part weights for the clean and enhanced loss gradients.
///
/// # Safety
/// `gc` and `ge` must hold `dim` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn scp_sc2_weights(
    gc: *const f64,
    ge: *const f64,
    dim: usize,
    out: *mut ScpWeights,
) -> ScpStatus {
    guard(|| {
        non_null(out, "out")?;
        let w = surgery::sc2_weights(&grad(gc, dim, "gc")?, &grad(ge, dim, "ge")?)?;
        *out = to_c(w);
        Ok(())
    })
}

/// Three-part weights including the noisy loss gradient.
///
/// # Safety
/// `gc`, `ge` and `gn` must hold `dim` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn scp_sc3_weights(
    gc: *const f64,
    ge: *const f64,
    gn: *const f64,
    dim: usize,
    out: *mut ScpWeights,
) -> ScpStatus {
    guard(|| {
        non_null(out, "out")?;
        let w = surgery::sc3_weights(&grad(gc, dim, "gc")?, &grad(ge, dim, "ge")?, &grad(gn, dim, "gn")?)?;
        *out = to_c(w);
        Ok(())
    })
}

// --------------------------------------------------------------- metrics

#[no_mangle]
pub extern "C" fn scp_ssnr_params_default() -> ScpSsnrParams {
    let p = SsnrParams::default();
    ScpSsnrParams {
        frame_len: p.frame_len,
        clamp_lo: p.clamp_lo,
        clamp_hi: p.clamp_hi,
        silence_floor: p.silence_floor,
    }
}

/// Segmental SNR in dB of `enhanced` against `clean`.
///
/// # Safety
/// Both signals must hold `len` values; `params` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn scp_ssnr(
    enhanced: *const f64,
    clean: *const f64,
    len: usize,
    sample_rate: u32,
    params: *const ScpSsnrParams,
    out: *mut f64,
) -> ScpStatus {
    guard(|| {
        let p = *handle(params, "params")?;
        non_null(out, "out")?;
        let p = SsnrParams {
            frame_len: p.frame_len,
            clamp_lo: p.clamp_lo,
            clamp_hi: p.clamp_hi,
            silence_floor: p.silence_floor,
        };
        let e = Waveform::new(slice(enhanced, len, "enhanced")?.to_vec(), sample_rate)?;
        let c = Waveform::new(slice(clean, len, "clean")?.to_vec(), sample_rate)?;
        *out = metrics::ssnr(&e, &c, &p)?;
        Ok(())
    })
}

// ------------------------------------------------------------------- WAV

/// Reads a mono 16-bit PCM WAV file.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be valid. On
/// success the handle is freed with [`scp_wave_free`].
#[no_mangle]
pub unsafe extern "C" fn scp_wav_read(path: *const c_char, out: *mut *mut ScpWave) -> ScpStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        let path = CStr::from_ptr(path).to_str().map_err(|_| invalid("path is not UTF-8"))?;
        let wave = data::read_wav(Path::new(path))?;
        *out = Box::into_raw(Box::new(ScpWave { wave }));
        Ok(())
    })
}

/// # Safety
/// `wave` must be null or a live handle from [`scp_wav_read`].
#[no_mangle]
pub unsafe extern "C" fn scp_wave_free(wave: *mut ScpWave) {
    if !wave.is_null() {
        drop(Box::from_raw(wave));
    }
}

/// Sample count, or 0 for a null handle.
///
/// # Safety
/// `wave` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scp_wave_len(wave: *const ScpWave) -> usize {
    wave.as_ref().map_or(0, |w| w.wave.len())
}

/// # Safety
/// `wave` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scp_wave_sample_rate(wave: *const ScpWave) -> u32 {
    wave.as_ref().map_or(0, |w| w.wave.sample_rate())
}

/// Borrowed samples in [-1, 1), valid while the handle lives.
///
/// # Safety
/// `wave` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scp_wave_samples(wave: *const ScpWave) -> *const f64 {
    wave.as_ref().map_or(ptr::null(), |w| w.wave.samples().as_ptr())
}
