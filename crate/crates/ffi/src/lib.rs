//! C ABI over `airy-core`.
//!
//! Every function returns an [`AiryStatus`]. Objects cross the boundary as
//! opaque heap handles that the caller releases with the matching `_free`
//! function. On failure the message is kept per thread and can be fetched
//! with [`airy_last_error_message`]. Panics never unwind into C; they are
//! reported as `AIRY_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use airy_core::bench::{self, BenchConfig, ElementResult};
use airy_core::counting::{self, ChannelParams, PairStatistics, SourceParams};
use airy_core::field::{read_field, write_field};
use airy_core::metrology;
use airy_core::modes::{self, AiryParams};
use airy_core::propagation::{self, BlockSide, Propagator};
use airy_core::{ComplexField2D, Error, Grid};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AiryStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Format = 5,
    GuardBand = 6,
    Numerical = 7,
    OutOfRange = 8,
    Panic = 9,
}

/// Free-space propagation method.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AiryPropagator {
    AngularSpectrum = 0,
    Fresnel = 1,
}

/// Which side of the edge an opaque block covers.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AiryBlockSide {
    Left = 0,
    Right = 1,
}

/// Pair-number statistics of the source.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AiryPairStatistics {
    Poisson = 0,
    Thermal = 1,
}

/// Source and detector parameters of a counting run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AiryCountingParams {
    /// Mean pairs per gate.
    pub mu: f64,
    pub rep_rate_hz: f64,
    pub gate_width_s: f64,
    pub n_gates: u64,
    pub statistics: AiryPairStatistics,
    pub eta_s: f64,
    pub eta_i: f64,
    pub dark_s_cps: f64,
    pub dark_i_cps: f64,
}

/// Outcome of a simulated counting run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AiryCarResult {
    pub car: f64,
    pub sigma: f64,
    pub center: u64,
    pub mean_accidentals: f64,
    pub clicks_s: u64,
    pub clicks_i: u64,
}

/// Opaque sampled complex field.
pub struct AiryField(ComplexField2D);

/// Opaque parsed bench.
pub struct AiryBench(BenchConfig);

/// Opaque list of tap results from a bench run.
pub struct AiryBenchRun(Vec<ElementResult>);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> AiryStatus {
    match e {
        Error::Validation { .. } => AiryStatus::InvalidArgument,
        Error::Parse { .. } => AiryStatus::Parse,
        Error::BadMagic { .. } | Error::UnsupportedVersion { .. } | Error::Truncated { .. } => AiryStatus::Format,
        Error::Element { source, .. } => status_of(source),
        Error::GuardBand { .. } => AiryStatus::GuardBand,
        Error::Numerical(_) => AiryStatus::Numerical,
        Error::Io { .. } => AiryStatus::Io,
    }
}

struct Fail(AiryStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

type FfiResult = Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> AiryStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            AiryStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            AiryStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(AiryStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(AiryStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> FfiResult {
    let slot = as_mut(out, "out")?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_str(s: &str, buf: *mut c_char, len: usize) -> usize {
    let bytes = s.as_bytes();
    if !buf.is_null() && len > 0 {
        let n = bytes.len().min(len - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
        *buf.add(n) = 0;
    }
    bytes.len() + 1
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// NUL-terminated) and returns the buffer size the full message needs.
/// An empty message means the last call succeeded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn airy_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| copy_str(&e.borrow(), buf, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn airy_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

// ------------------------------------------------------------------ fields

/// Allocates a zero field on an `nx`×`ny` grid with pitches `dx`, `dy` (m).
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn airy_field_new(
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    wavelength: f64,
    out: *mut *mut AiryField,
) -> AiryStatus {
    guard(|| put(out, AiryField(ComplexField2D::new(nx, ny, dx, dy, wavelength)?)))
}

/// # Safety
/// `field` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn airy_field_free(field: *mut AiryField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// # Safety
/// `field` must be a live handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn airy_field_clone(field: *const AiryField, out: *mut *mut AiryField) -> AiryStatus {
    guard(|| {
        let f = as_ref(field, "field")?;
        put(out, AiryField(f.0.clone()))
    })
}

/// Reads a field file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn airy_field_read(path: *const c_char, out: *mut *mut AiryField) -> AiryStatus {
    guard(|| {
        let p = as_str(path, "path")?;
        put(out, AiryField(read_field(p)?))
    })
}

/// # Safety
/// `field` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn airy_field_write(field: *const AiryField, path: *const c_char) -> AiryStatus {
    guard(|| {
        let f = as_ref(field, "field")?;
        write_field(&f.0, as_str(path, "path")?)?;
        Ok(())
    })
}

/// Grid size, pitches and wavelength. Any output pointer may be null.
///
/// # Safety
/// `field` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn airy_field_grid(
    field: *const AiryField,
    nx: *mut usize,
    ny: *mut usize,
    dx: *mut f64,
    dy: *mut f64,
    wavelength: *mut f64,
) -> AiryStatus {
    guard(|| {
        let g = *as_ref(field, "field")?.0.grid();
        if let Some(p) = nx.as_mut() {
            *p = g.nx;
        }
        if let Some(p) = ny.as_mut() {
            *p = g.ny;
        }
        if let Some(p) = dx.as_mut() {
            *p = g.dx;
        }
        if let Some(p) = dy.as_mut() {
            *p = g.dy;
        }
        if let Some(p) = wavelength.as_mut() {
            *p = g.wavelength;
        }
        Ok(())
    })
}

/// Total power `Σ|E|²·dx·dy`.
///
/// # Safety
/// `field` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn airy_field_power(field: *const AiryField, out: *mut f64) -> AiryStatus {
    guard(|| {
        let f = as_ref(field, "field")?;
        *as_mut(out, "out")? = f.0.total_power();
        Ok(())
    })
}

/// Copies samples out as interleaved (re, im) pairs in row-major order.
/// `len` counts doubles and must be at least `2·nx·ny`.
///
/// # Safety
/// `field` must be a live handle and `buf` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn airy_field_get_data(field: *const AiryField, buf: *mut f64, len: usize) -> AiryStatus {
    guard(|| {
        let f = as_ref(field, "field")?;
        let data = f.0.data();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < 2 * data.len() {
            return Err(Fail(
                AiryStatus::OutOfRange,
                format!("buffer holds {len} doubles, need {}", 2 * data.len()),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, 2 * data.len());
        for (k, c) in data.iter().enumerate() {
            out[2 * k] = c.re;
            out[2 * k + 1] = c.im;
        }
        Ok(())
    })
}

/// Overwrites samples from interleaved (re, im) pairs; `len` must equal
/// `2·nx·ny`.
///
/// # Safety
/// `field` must be a live handle and `buf` point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn airy_field_set_data(field: *mut AiryField, buf: *const f64, len: usize) -> AiryStatus {
    guard(|| {
        let f = as_mut(field, "field")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let data = f.0.data_mut();
        if len != 2 * data.len() {
            return Err(Fail(
                AiryStatus::OutOfRange,
                format!("got {len} doubles, field needs {}", 2 * data.len()),
            ));
        }
        let src = std::slice::from_raw_parts(buf, len);
        for (k, c) in data.iter_mut().enumerate() {
            c.re = src[2 * k];
            c.im = src[2 * k + 1];
        }
        Ok(())
    })
}

/// Propagates the field by `z` metres in place.
///
/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn airy_field_propagate(field: *mut AiryField, z: f64, method: AiryPropagator) -> AiryStatus {
    guard(|| {
        let f = as_mut(field, "field")?;
        let m = match method {
            AiryPropagator::AngularSpectrum => Propagator::AngularSpectrum,
            AiryPropagator::Fresnel => Propagator::Fresnel,
        };
        f.0 = propagation::propagate_with(&f.0, z, m)?;
        Ok(())
    })
}

/// Applies a thin lens of focal length `focal` in place.
///
/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn airy_field_apply_lens(field: *mut AiryField, focal: f64) -> AiryStatus {
    guard(|| {
        let f = as_mut(field, "field")?;
        f.0 = propagation::apply_lens(&f.0, focal)?;
        Ok(())
    })
}

/// Zeroes the field on one side of the vertical line `x = edge` in place.
///
/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn airy_field_apply_block(field: *mut AiryField, edge: f64, side: AiryBlockSide) -> AiryStatus {
    guard(|| {
        let f = as_mut(field, "field")?;
        let s = match side {
            AiryBlockSide::Left => BlockSide::Left,
            AiryBlockSide::Right => BlockSide::Right,
        };
        f.0 = propagation::apply_block(&f.0, edge, s);
        Ok(())
    })
}

// ------------------------------------------------------------------ modes

fn square_grid(n: usize, pitch: f64, wavelength: f64) -> Result<Grid, Fail> {
    Ok(Grid::square(n, pitch, wavelength)?)
}

/// Centered collimated Gaussian of amplitude waist `w0` on an `n`×`n` grid.
///
/// # Safety
/// `out` must be a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn airy_gaussian_mode(
    n: usize,
    pitch: f64,
    wavelength: f64,
    w0: f64,
    out: *mut *mut AiryField,
) -> AiryStatus {
    guard(|| {
        let g = square_grid(n, pitch, wavelength)?;
        put(out, AiryField(modes::gaussian_mode(w0, g)?))
    })
}

/// Finite-energy 2D Airy mode with scale `x0` on both axes and truncation `a`.
///
/// # Safety
/// `out` must be a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn airy_airy_mode(
    n: usize,
    pitch: f64,
    wavelength: f64,
    x0: f64,
    a: f64,
    out: *mut *mut AiryField,
) -> AiryStatus {
    guard(|| {
        let g = square_grid(n, pitch, wavelength)?;
        put(out, AiryField(modes::airy_mode(&AiryParams::symmetric(x0, a)?, g)?))
    })
}

/// Fundamental fiber mode (Gaussian of the given mode-field diameter).
///
/// # Safety
/// `out` must be a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn airy_fiber_mode(
    n: usize,
    pitch: f64,
    wavelength: f64,
    mfd: f64,
    out: *mut *mut AiryField,
) -> AiryStatus {
    guard(|| {
        let g = square_grid(n, pitch, wavelength)?;
        put(out, AiryField(modes::fiber_mode(mfd, g)?))
    })
}

/// Power coupling `|⟨field, mode⟩|² / (‖field‖²‖mode‖²)`.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn airy_coupling_efficiency(
    field: *const AiryField,
    mode: *const AiryField,
    out: *mut f64,
) -> AiryStatus {
    guard(|| {
        let f = as_ref(field, "field")?;
        let m = as_ref(mode, "mode")?;
        *as_mut(out, "out")? = metrology::coupling_efficiency(&f.0, &m.0)?;
        Ok(())
    })
}

// ------------------------------------------------------------------ bench

/// Parses a bench description from text.
///
/// # Safety
/// `doc` must be a NUL-terminated string and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn airy_bench_parse(doc: *const c_char, out: *mut *mut AiryBench) -> AiryStatus {
    guard(|| put(out, AiryBench(bench::parse_bench(as_str(doc, "doc")?)?)))
}

/// Loads a bench file; relative mask paths resolve against its directory.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn airy_bench_load(path: *const c_char, out: *mut *mut AiryBench) -> AiryStatus {
    guard(|| {
        let p = std::path::Path::new(as_str(path, "path")?);
        put(out, AiryBench(airy_core::scenario::load_bench_file(p)?))
    })
}

/// # Safety
/// `bench` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn airy_bench_free(bench: *mut AiryBench) {
    if !bench.is_null() {
        drop(Box::from_raw(bench));
    }
}

/// Runs the bench and returns every tap.
///
/// # Safety
/// `bench` must be a live handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn airy_bench_run(bench: *const AiryBench, out: *mut *mut AiryBenchRun) -> AiryStatus {
    guard(|| {
        let b = as_ref(bench, "bench")?;
        put(out, AiryBenchRun(bench::run_bench(&b.0)?))
    })
}

/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn airy_bench_run_free(run: *mut AiryBenchRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of taps in a run.
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn airy_bench_run_len(run: *const AiryBenchRun, out: *mut usize) -> AiryStatus {
    guard(|| {
        *as_mut(out, "out")? = as_ref(run, "run")?.0.len();
        Ok(())
    })
}

fn tap(run: &AiryBenchRun, index: usize) -> Result<&ElementResult, Fail> {
    run.0.get(index).ok_or_else(|| {
        Fail(
            AiryStatus::OutOfRange,
            format!("tap {index} out of range (run has {})", run.0.len()),
        )
    })
}

/// Copies tap `index`'s label into `buf`; `needed` (may be null) receives
/// the buffer size the full label requires.
///
/// # Safety
/// `run` must be a live handle; `buf` null or `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn airy_bench_run_label(
    run: *const AiryBenchRun,
    index: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> AiryStatus {
    guard(|| {
        let t = tap(as_ref(run, "run")?, index)?;
        let n = copy_str(&t.label, buf, len);
        if let Some(p) = needed.as_mut() {
            *p = n;
        }
        Ok(())
    })
}

/// Cumulative propagation distance at tap `index`.
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn airy_bench_run_z(run: *const AiryBenchRun, index: usize, out: *mut f64) -> AiryStatus {
    guard(|| {
        *as_mut(out, "out")? = tap(as_ref(run, "run")?, index)?.z;
        Ok(())
    })
}

/// Copies the field at tap `index` into a new handle.
///
/// # Safety
/// `run` must be a live handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn airy_bench_run_field(
    run: *const AiryBenchRun,
    index: usize,
    out: *mut *mut AiryField,
) -> AiryStatus {
    guard(|| {
        let t = tap(as_ref(run, "run")?, index)?;
        put(out, AiryField(t.field.clone()))
    })
}

// ------------------------------------------------------------------ counting

fn counting_params(p: &AiryCountingParams) -> Result<(SourceParams, ChannelParams), Fail> {
    let mut src = SourceParams::new(p.mu, p.rep_rate_hz, p.gate_width_s, p.n_gates)?;
    src.statistics = match p.statistics {
        AiryPairStatistics::Poisson => PairStatistics::Poisson,
        AiryPairStatistics::Thermal => PairStatistics::Thermal,
    };
    let ch = ChannelParams::new(p.eta_s, p.eta_i, p.dark_s_cps, p.dark_i_cps)?;
    Ok((src, ch))
}

/// Closed-form coincidence-to-accidentals ratio.
///
/// # Safety
/// `params` must point to a valid struct and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn airy_analytic_car(params: *const AiryCountingParams, out: *mut f64) -> AiryStatus {
    guard(|| {
        let (src, ch) = counting_params(as_ref(params, "params")?)?;
        *as_mut(out, "out")? = counting::analytic_car(&src, &ch)?;
        Ok(())
    })
}

/// Monte Carlo counting run: click streams, coincidence histogram over
/// `±span` gates and CAR. Deterministic for a given `seed`.
///
/// # Safety
/// `params` must point to a valid struct and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn airy_simulate_car(
    params: *const AiryCountingParams,
    seed: u64,
    span: u64,
    out: *mut AiryCarResult,
) -> AiryStatus {
    guard(|| {
        let (src, ch) = counting_params(as_ref(params, "params")?)?;
        let out = as_mut(out, "out")?;
        let (s, i) = counting::simulate_counts(&src, &ch, seed)?;
        let h = counting::coincidence_histogram(&s, &i, 0, span, 1.0 / src.rep_rate)?;
        let (car, sigma) = counting::car_from_histogram(&h)?;
        let acc = h.accidental_bins();
        *out = AiryCarResult {
            car,
            sigma,
            center: h.center(),
            mean_accidentals: acc.iter().sum::<u64>() as f64 / acc.len() as f64,
            clicks_s: s.count(),
            clicks_i: i.count(),
        };
        Ok(())
    })
}
