//! C interface to the fluxladder engine.
//!
//! Handles are opaque (`FlxSolver *`), every call returns an [`FlxStatus`],
//! and the message of the last failure on the calling thread is available
//! from [`flx_last_error`]. Panics never cross the boundary.
//!
//! Array outputs follow one convention: pass a buffer and its length; the
//! number of elements needed is always written to `*needed` (if non-null),
//! and `FLX_STATUS_BUFFER_TOO_SMALL` is returned when `len` is short.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use fluxladder::free::{free_currents, steady_correlations};
use fluxladder::observables::{ObservableOperators, ObservableReport};
use fluxladder::solver::{solve_steady, Method, SolverConfig};
use fluxladder::spectra::sector_spectrum;
use fluxladder::{BlockLiouvillian, DriveSpec, Error, LadderSpec};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlxStatus {
    Ok = 0,
    InvalidArgument = 1,
    Capacity = 2,
    Convergence = 3,
    Consistency = 4,
    Instability = 5,
    LinearAlgebra = 6,
    Io = 7,
    NullPointer = 8,
    NotSolved = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlxMethod {
    Auto = 0,
    DirectDense = 1,
    IterativeLinear = 2,
    TimeEvolution = 3,
}

/// Ladder geometry; energies in units of the leg hopping.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct FlxLadder {
    pub rungs: usize,
    pub k_over_j: f64,
    pub phi: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct FlxDrive {
    pub gamma_over_j: f64,
    pub nbar1: f64,
    pub nbar_l: f64,
}

/// Opaque solver state.
pub struct FlxSolver {
    spec: LadderSpec,
    drive: DriveSpec,
    config: SolverConfig,
    report: Option<ObservableReport>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

static VERSION: &[u8] = concat!("fluxladder ", env!("CARGO_PKG_VERSION"), "\0").as_bytes();

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> FlxStatus {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) | Error::Json(_) => FlxStatus::InvalidArgument,
        Error::Capacity(_) => FlxStatus::Capacity,
        Error::Convergence { .. } => FlxStatus::Convergence,
        Error::Consistency(_) => FlxStatus::Consistency,
        Error::Instability(_) | Error::Stiffness { .. } => FlxStatus::Instability,
        Error::LinearAlgebra(_) => FlxStatus::LinearAlgebra,
        Error::Io(_) | Error::Csv(_) => FlxStatus::Io,
    }
}

/// Runs `f`, mapping errors and panics to a status and recording the message.
fn guard(f: impl FnOnce() -> Result<(), FlxStatus>) -> FlxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FlxStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            FlxStatus::Panic
        }
    }
}

fn fail(e: Error) -> FlxStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn null(what: &str) -> FlxStatus {
    set_error(&format!("{what} is a null pointer"));
    FlxStatus::NullPointer
}

fn build(ladder: &FlxLadder, drive: &FlxDrive) -> Result<(LadderSpec, DriveSpec), FlxStatus> {
    let spec = LadderSpec::new(ladder.rungs, 1.0, ladder.k_over_j, ladder.phi).map_err(fail)?;
    let drive = DriveSpec::new(drive.gamma_over_j, drive.nbar1, drive.nbar_l).map_err(fail)?;
    Ok((spec, drive))
}

/// Copies `src` into `(out, len)` following the buffer convention.
unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize, needed: *mut usize) -> Result<(), FlxStatus> {
    if !needed.is_null() {
        *needed = src.len();
    }
    if len < src.len() {
        set_error(&format!("buffer holds {len} values, {} needed", src.len()));
        return Err(FlxStatus::BufferTooSmall);
    }
    if src.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("out"));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

unsafe fn solver_ref<'a>(h: *const FlxSolver) -> Result<&'a FlxSolver, FlxStatus> {
    h.as_ref().ok_or_else(|| null("solver"))
}

unsafe fn solver_mut<'a>(h: *mut FlxSolver) -> Result<&'a mut FlxSolver, FlxStatus> {
    h.as_mut().ok_or_else(|| null("solver"))
}

fn solved(s: &FlxSolver) -> Result<&ObservableReport, FlxStatus> {
    s.report.as_ref().ok_or_else(|| {
        set_error("no steady state yet; call flx_solver_solve first");
        FlxStatus::NotSolved
    })
}

/// Engine version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn flx_version() -> *const c_char {
    VERSION.as_ptr().cast()
}

/// Message of the last failed call on this thread (empty if none). Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn flx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a solver with default settings (auto method, tolerance 1e-10).
///
/// # Safety
/// `ladder` and `drive` must point to valid structs, `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn flx_solver_new(
    ladder: *const FlxLadder,
    drive: *const FlxDrive,
    out: *mut *mut FlxSolver,
) -> FlxStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = std::ptr::null_mut();
        let ladder = ladder.as_ref().ok_or_else(|| null("ladder"))?;
        let drive = drive.as_ref().ok_or_else(|| null("drive"))?;
        let (spec, drive) = build(ladder, drive)?;
        *out = Box::into_raw(Box::new(FlxSolver { spec, drive, config: SolverConfig::default(), report: None }));
        Ok(())
    })
}

/// Releases a solver; null is ignored.
///
/// # Safety
/// `h` must come from [`flx_solver_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn flx_solver_free(h: *mut FlxSolver) {
    if !h.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(h))));
    }
}

/// `method` is one of the `FlxMethod` values.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn flx_solver_set_method(h: *mut FlxSolver, method: u32) -> FlxStatus {
    guard(|| {
        let s = solver_mut(h)?;
        s.config.method = match method {
            m if m == FlxMethod::Auto as u32 => Method::Auto,
            m if m == FlxMethod::DirectDense as u32 => Method::DirectDense,
            m if m == FlxMethod::IterativeLinear as u32 => Method::IterativeLinear,
            m if m == FlxMethod::TimeEvolution as u32 => Method::TimeEvolution,
            other => {
                set_error(&format!("unknown method {other}"));
                return Err(FlxStatus::InvalidArgument);
            }
        };
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn flx_solver_set_tolerance(h: *mut FlxSolver, tolerance: f64) -> FlxStatus {
    guard(|| {
        let s = solver_mut(h)?;
        let cfg = s.config.clone().with_tolerance(tolerance);
        cfg.validate().map_err(fail)?;
        s.config = cfg;
        Ok(())
    })
}

/// Computes the steady state and its observables.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn flx_solver_solve(h: *mut FlxSolver) -> FlxStatus {
    guard(|| {
        let s = solver_mut(h)?;
        s.report = None;
        let lop = BlockLiouvillian::new(s.spec, s.drive).map_err(fail)?;
        let steady = solve_steady(&lop, &s.config).map_err(fail)?;
        let ops = ObservableOperators::new(&s.spec).map_err(fail)?;
        let mut report = ops.report(&steady.rho, &s.drive, s.config.tolerance).map_err(fail)?;
        report.solver = Some(steady.diagnostics);
        s.report = Some(report);
        Ok(())
    })
}

/// Total and chiral current of the last solve.
///
/// # Safety
/// `h` must be a live handle; outputs may be null to skip them.
#[no_mangle]
pub unsafe extern "C" fn flx_solver_currents(h: *const FlxSolver, total: *mut f64, chiral: *mut f64) -> FlxStatus {
    guard(|| {
        let r = solved(solver_ref(h)?)?;
        if let Some(t) = total.as_mut() {
            *t = r.total_current;
        }
        if let Some(c) = chiral.as_mut() {
            *c = r.chiral_current;
        }
        Ok(())
    })
}

/// Residual `Σ_N ||L(ρ)^N||₁` of the last solve.
///
/// # Safety
/// `h` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn flx_solver_residual(h: *const FlxSolver, out: *mut f64) -> FlxStatus {
    guard(|| {
        let r = solved(solver_ref(h)?)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = r.solver.as_ref().map_or(f64::NAN, |d| d.residual);
        Ok(())
    })
}

/// Densities `⟨n_{j,p}⟩` in flat order `2(j-1) + (p-1)`; `2L` values.
///
/// # Safety
/// `h` live; `out` holds `len` doubles; `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn flx_solver_densities(
    h: *const FlxSolver,
    out: *mut f64,
    len: usize,
    needed: *mut usize,
) -> FlxStatus {
    guard(|| {
        let r = solved(solver_ref(h)?)?;
        let flat: Vec<f64> = r.densities.iter().flatten().copied().collect();
        copy_out(&flat, out, len, needed)
    })
}

/// Sector currents `J_N`, `N = 0..=2L`, at the centre bond.
///
/// # Safety
/// As [`flx_solver_densities`].
#[no_mangle]
pub unsafe extern "C" fn flx_solver_sector_currents(
    h: *const FlxSolver,
    out: *mut f64,
    len: usize,
    needed: *mut usize,
) -> FlxStatus {
    guard(|| copy_out(&solved(solver_ref(h)?)?.sector_currents, out, len, needed))
}

/// Block weights `tr ρ^N`, `N = 0..=2L`.
///
/// # Safety
/// As [`flx_solver_densities`].
#[no_mangle]
pub unsafe extern "C" fn flx_solver_block_weights(
    h: *const FlxSolver,
    out: *mut f64,
    len: usize,
    needed: *mut usize,
) -> FlxStatus {
    guard(|| copy_out(&solved(solver_ref(h)?)?.block_weights, out, len, needed))
}

/// Full report as NUL-terminated JSON. `*needed` receives the size
/// including the terminator.
///
/// # Safety
/// `h` live; `out` holds `len` bytes; `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn flx_solver_report_json(
    h: *const FlxSolver,
    out: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> FlxStatus {
    guard(|| {
        let json = solved(solver_ref(h)?)?.to_json().map_err(fail)?;
        let bytes = json.as_bytes();
        if !needed.is_null() {
            *needed = bytes.len() + 1;
        }
        if len < bytes.len() + 1 {
            set_error(&format!("buffer holds {len} bytes, {} needed", bytes.len() + 1));
            return Err(FlxStatus::BufferTooSmall);
        }
        if out.is_null() {
            return Err(null("out"));
        }
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), out.cast::<u8>(), bytes.len());
        *out.add(bytes.len()) = 0;
        Ok(())
    })
}

/// Ascending eigenvalues (units of J) of the sector Hamiltonian `H_N`.
///
/// # Safety
/// `ladder` valid; `out` holds `len` doubles; `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn flx_sector_spectrum(
    ladder: *const FlxLadder,
    particles: usize,
    out: *mut f64,
    len: usize,
    needed: *mut usize,
) -> FlxStatus {
    guard(|| {
        let l = ladder.as_ref().ok_or_else(|| null("ladder"))?;
        let spec = LadderSpec::new(l.rungs, 1.0, l.k_over_j, l.phi).map_err(fail)?;
        let s = sector_spectrum(&spec, particles).map_err(fail)?;
        copy_out(&s.energies, out, len, needed)
    })
}

/// Total and chiral current of the free-boson reference.
///
/// # Safety
/// `ladder`, `drive` valid; outputs may be null to skip them.
#[no_mangle]
pub unsafe extern "C" fn flx_free_currents(
    ladder: *const FlxLadder,
    drive: *const FlxDrive,
    total: *mut f64,
    chiral: *mut f64,
) -> FlxStatus {
    guard(|| {
        let l = ladder.as_ref().ok_or_else(|| null("ladder"))?;
        let d = drive.as_ref().ok_or_else(|| null("drive"))?;
        let (spec, drive) = build(l, d)?;
        let c = steady_correlations(&spec, &drive).map_err(fail)?;
        let j = free_currents(&c, &spec).map_err(fail)?;
        if let Some(t) = total.as_mut() {
            *t = j.total_current;
        }
        if let Some(c) = chiral.as_mut() {
            *c = j.chiral_current;
        }
        Ok(())
    })
}
