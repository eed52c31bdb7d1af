//! C ABI over the rate-energy solvers.
//!
//! Every entry point returns an [`IfcStatus`] and writes results through out
//! pointers, which are left untouched on failure. The message of the most
//! recent failure on the calling thread is available from
//! [`ifc_last_error`]. Handles are opaque and must be released with their
//! matching `_free` function. Panics are caught at the boundary and reported
//! as [`IfcStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ifc_swipt::beamformers::StrategyId;
use ifc_swipt::boundary::{self, BoundarySolver, Branch, REBoundary, REPoint};
use ifc_swipt::linalg::{c64, CMatrix};
use ifc_swipt::scheduler::{self, ModeTag};
use ifc_swipt::{ChannelSet, Error};

/// Bytes needed for a channel digest: 64 hex digits and a terminating NUL.
pub const IFC_DIGEST_LEN: usize = 65;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IfcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    RankDeficient = 3,
    Singular = 4,
    DegenerateChannel = 5,
    Infeasible = 6,
    DualInfeasible = 7,
    Validation = 8,
    Parse = 9,
    Io = 10,
    Solver = 11,
    BufferTooSmall = 12,
    OutOfRange = 13,
    Panic = 99,
}

/// Transmit strategy for the first (energy-serving) transmitter. Passed as
/// `uint32_t` so that out-of-range values are rejected rather than undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IfcStrategy {
    Meb = 0,
    Mlb = 1,
    Sler = 2,
    Slnr = 3,
    MebRank2 = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IfcBranch {
    Wf = 0,
    Dual = 1,
    NoTx = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IfcMode {
    IdId = 0,
    EhEh = 1,
    Eh1Id2 = 2,
    Id1Eh2 = 3,
}

/// One rate-energy operating point. `lambda` and `mu` are NaN when the
/// branch has no multiplier.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IfcPoint {
    pub e_bar: f64,
    pub rate_bits: f64,
    pub energy: f64,
    pub p1: f64,
    pub lambda: f64,
    pub mu: f64,
    pub iterations: u64,
    pub branch: IfcBranch,
    pub clamped: bool,
}

/// Opaque channel realization.
pub struct IfcChannelSet(ChannelSet);

/// Opaque swept boundary.
pub struct IfcBoundary(REBoundary);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("NUL bytes replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

struct Failure(IfcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn status_of(e: &Error) -> IfcStatus {
    match e {
        Error::InvalidInput(_) => IfcStatus::InvalidInput,
        Error::RankDeficient { .. } => IfcStatus::RankDeficient,
        Error::Singular { .. } => IfcStatus::Singular,
        Error::DegenerateChannel => IfcStatus::DegenerateChannel,
        Error::Infeasible { .. } => IfcStatus::Infeasible,
        Error::DualInfeasible => IfcStatus::DualInfeasible,
        Error::Validation(_) => IfcStatus::Validation,
        Error::Parse { .. } => IfcStatus::Parse,
        Error::Io { .. } => IfcStatus::Io,
        Error::Solver { .. } => IfcStatus::Solver,
    }
}

fn null(what: &str) -> Failure {
    Failure(IfcStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> IfcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => IfcStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            IfcStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(Path::new)
        .map_err(|_| Failure(IfcStatus::InvalidInput, "path is not valid UTF-8".into()))
}

unsafe fn alpha_arg(alpha: *const f64) -> Result<[[f64; 2]; 2], Failure> {
    if alpha.is_null() {
        return Err(null("alpha"));
    }
    let a = std::slice::from_raw_parts(alpha, 4);
    Ok([[a[0], a[1]], [a[2], a[3]]])
}

fn strategy_arg(code: u32) -> Result<StrategyId, Failure> {
    Ok(match code {
        0 => StrategyId::Meb,
        1 => StrategyId::Mlb,
        2 => StrategyId::Sler,
        3 => StrategyId::Slnr,
        4 => StrategyId::MebRank2,
        _ => {
            return Err(Failure(
                IfcStatus::InvalidInput,
                format!("unknown strategy code {code}"),
            ))
        }
    })
}

fn point_out(p: &REPoint) -> IfcPoint {
    IfcPoint {
        e_bar: p.e_bar,
        rate_bits: p.rate,
        energy: p.energy,
        p1: p.p1,
        lambda: p.lambda.unwrap_or(f64::NAN),
        mu: p.mu.unwrap_or(f64::NAN),
        iterations: p.iterations as u64,
        branch: match p.branch {
            Branch::Wf => IfcBranch::Wf,
            Branch::Dual => IfcBranch::Dual,
            Branch::NoTx => IfcBranch::NoTx,
        },
        clamped: p.clamped,
    }
}

fn into_handle<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ifc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn ifc_status_name(status: IfcStatus) -> *const c_char {
    let name: &'static str = match status {
        IfcStatus::Ok => "ok\0",
        IfcStatus::NullPointer => "null pointer\0",
        IfcStatus::InvalidInput => "invalid input\0",
        IfcStatus::RankDeficient => "rank deficient\0",
        IfcStatus::Singular => "singular\0",
        IfcStatus::DegenerateChannel => "degenerate channel\0",
        IfcStatus::Infeasible => "infeasible\0",
        IfcStatus::DualInfeasible => "dual infeasible\0",
        IfcStatus::Validation => "validation failed\0",
        IfcStatus::Parse => "parse error\0",
        IfcStatus::Io => "i/o error\0",
        IfcStatus::Solver => "solver failed\0",
        IfcStatus::BufferTooSmall => "buffer too small\0",
        IfcStatus::OutOfRange => "index out of range\0",
        IfcStatus::Panic => "internal panic\0",
    };
    name.as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ifc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Draws a seeded channel realization. `alpha` points to four coefficients
/// in row-major order: a11, a12, a21, a22.
///
/// # Safety
/// `alpha` must point to four readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ifc_channel_draw(
    m_t: usize,
    m_r: usize,
    alpha: *const f64,
    seed: u64,
    out: *mut *mut IfcChannelSet,
) -> IfcStatus {
    guard(|| {
        let alpha = alpha_arg(alpha)?;
        let cs = ChannelSet::draw(m_t, m_r, alpha, seed)?;
        write(out, into_handle(IfcChannelSet(cs)), "out")
    })
}

/// Builds a channel set from explicit matrices. `data` holds H11, H12, H21,
/// H22 in that order, each `m_r x m_t` row-major with interleaved real and
/// imaginary parts, so `len` must equal `8 * m_r * m_t`. The Frobenius
/// normalization against `alpha` is validated.
///
/// # Safety
/// `data` must point to `len` readable doubles, `alpha` to four, and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ifc_channel_from_links(
    m_t: usize,
    m_r: usize,
    data: *const f64,
    len: usize,
    alpha: *const f64,
    out: *mut *mut IfcChannelSet,
) -> IfcStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let block = 2 * m_r * m_t;
        if m_t == 0 || m_r == 0 || len != 4 * block {
            return Err(Failure(
                IfcStatus::InvalidInput,
                format!("expected {} doubles for {m_r}x{m_t} links, got {len}", 4 * block),
            ));
        }
        let alpha = alpha_arg(alpha)?;
        let values = std::slice::from_raw_parts(data, len);
        let link = |k: usize| {
            let v = &values[k * block..(k + 1) * block];
            CMatrix::from_fn(m_r, m_t, |r, c| {
                let at = 2 * (r * m_t + c);
                c64::new(v[at], v[at + 1])
            })
        };
        let cs = ChannelSet::from_links([[link(0), link(1)], [link(2), link(3)]], alpha, None)?;
        write(out, into_handle(IfcChannelSet(cs)), "out")
    })
}

/// Loads a channel set from its JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ifc_channel_load(path: *const c_char, out: *mut *mut IfcChannelSet) -> IfcStatus {
    guard(|| {
        let cs = ChannelSet::load(path_arg(path)?)?;
        write(out, into_handle(IfcChannelSet(cs)), "out")
    })
}

/// Saves a channel set as JSON.
///
/// # Safety
/// `cs` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ifc_channel_save(cs: *const IfcChannelSet, path: *const c_char) -> IfcStatus {
    guard(|| {
        let cs = deref(cs, "channel set")?;
        Ok(cs.0.save(path_arg(path)?)?)
    })
}

/// Antenna counts of a channel set.
///
/// # Safety
/// `cs` must be a live handle; `m_t` and `m_r` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ifc_channel_dims(cs: *const IfcChannelSet, m_t: *mut usize, m_r: *mut usize) -> IfcStatus {
    guard(|| {
        let cs = deref(cs, "channel set")?;
        if m_t.is_null() || m_r.is_null() {
            return Err(null("dimension output"));
        }
        m_t.write(cs.0.m_t());
        m_r.write(cs.0.m_r());
        Ok(())
    })
}

/// Writes the SHA-256 digest of the channel matrices as lowercase hex plus
/// NUL. `len` must be at least `IFC_DIGEST_LEN`.
///
/// # Safety
/// `cs` must be a live handle and `buf` must have `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ifc_channel_digest(cs: *const IfcChannelSet, buf: *mut c_char, len: usize) -> IfcStatus {
    guard(|| {
        let cs = deref(cs, "channel set")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let digest = cs.0.digest();
        if len < digest.len() + 1 {
            return Err(Failure(
                IfcStatus::BufferTooSmall,
                format!("digest needs {} bytes, buffer has {len}", digest.len() + 1),
            ));
        }
        ptr::copy_nonoverlapping(digest.as_ptr().cast::<c_char>(), buf, digest.len());
        buf.add(digest.len()).write(0);
        Ok(())
    })
}

/// Releases a channel set. NULL is ignored.
///
/// # Safety
/// `cs` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ifc_channel_free(cs: *mut IfcChannelSet) {
    if !cs.is_null() {
        drop(Box::from_raw(cs));
    }
}

/// Largest energy the strategy can deliver to the first receiver at `power`.
///
/// # Safety
/// `cs` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ifc_emax(cs: *const IfcChannelSet, strategy: u32, power: f64, out: *mut f64) -> IfcStatus {
    guard(|| {
        let cs = deref(cs, "channel set")?;
        let e = boundary::emax(&cs.0, strategy_arg(strategy)?, power)?;
        write(out, e, "out")
    })
}

/// Solves a single boundary point for the energy target `e_bar`.
///
/// # Safety
/// `cs` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ifc_point(
    cs: *const IfcChannelSet,
    strategy: u32,
    power: f64,
    e_bar: f64,
    out: *mut IfcPoint,
) -> IfcStatus {
    guard(|| {
        let cs = deref(cs, "channel set")?;
        let p = BoundarySolver::new(&cs.0, strategy_arg(strategy)?, power)?.point(e_bar)?;
        write(out, point_out(&p), "out")
    })
}

/// Sweeps `n` targets spaced uniformly on `[0, E_max]` of the strategy.
///
/// # Safety
/// `cs` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ifc_sweep(
    cs: *const IfcChannelSet,
    strategy: u32,
    power: f64,
    n: usize,
    out: *mut *mut IfcBoundary,
) -> IfcStatus {
    guard(|| {
        let cs = deref(cs, "channel set")?;
        let solver = BoundarySolver::new(&cs.0, strategy_arg(strategy)?, power)?;
        let grid = boundary::uniform_grid(solver.emax()?, n);
        write(out, into_handle(IfcBoundary(solver.sweep(&grid)?)), "out")
    })
}

/// Sweeps an explicit ascending grid of `n` targets.
///
/// # Safety
/// `cs` must be a live handle, `grid` must point to `n` readable doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ifc_sweep_grid(
    cs: *const IfcChannelSet,
    strategy: u32,
    power: f64,
    grid: *const f64,
    n: usize,
    out: *mut *mut IfcBoundary,
) -> IfcStatus {
    guard(|| {
        let cs = deref(cs, "channel set")?;
        if grid.is_null() && n > 0 {
            return Err(null("grid"));
        }
        let grid = if n == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(grid, n)
        };
        let b = boundary::re_sweep(&cs.0, strategy_arg(strategy)?, grid, power)?;
        write(out, into_handle(IfcBoundary(b)), "out")
    })
}

/// Number of solved points in a boundary.
///
/// # Safety
/// `b` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ifc_boundary_len(b: *const IfcBoundary) -> usize {
    b.as_ref().map_or(0, |b| b.0.points.len())
}

/// Number of grid targets the solver could not produce.
///
/// # Safety
/// `b` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ifc_boundary_gap_count(b: *const IfcBoundary) -> usize {
    b.as_ref().map_or(0, |b| b.0.gaps.len())
}

/// Point `index` of a boundary, ascending in `e_bar`.
///
/// # Safety
/// `b` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ifc_boundary_point(b: *const IfcBoundary, index: usize, out: *mut IfcPoint) -> IfcStatus {
    guard(|| {
        let b = deref(b, "boundary")?;
        let p =
            b.0.points
                .get(index)
                .ok_or_else(|| Failure(IfcStatus::OutOfRange, format!("point {index} of {}", b.0.points.len())))?;
        write(out, point_out(p), "out")
    })
}

/// Energy target of gap `index`.
///
/// # Safety
/// `b` must be a live handle and `e_bar` writable.
#[no_mangle]
pub unsafe extern "C" fn ifc_boundary_gap(b: *const IfcBoundary, index: usize, e_bar: *mut f64) -> IfcStatus {
    guard(|| {
        let b = deref(b, "boundary")?;
        let g =
            b.0.gaps
                .get(index)
                .ok_or_else(|| Failure(IfcStatus::OutOfRange, format!("gap {index} of {}", b.0.gaps.len())))?;
        write(e_bar, g.e_bar, "e_bar")
    })
}

/// Trapezoidal area under the rate-energy curve, gaps counted as zero rate.
///
/// # Safety
/// `b` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ifc_boundary_area(b: *const IfcBoundary, out: *mut f64) -> IfcStatus {
    guard(|| {
        let b = deref(b, "boundary")?;
        write(out, b.0.area(), "out")
    })
}

/// Releases a boundary. NULL is ignored.
///
/// # Safety
/// `b` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ifc_boundary_free(b: *mut IfcBoundary) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// Chooses which receiver harvests for the energy target `e_bar`.
///
/// # Safety
/// `cs` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ifc_select_mode(
    cs: *const IfcChannelSet,
    e_bar: f64,
    power: f64,
    out: *mut IfcMode,
) -> IfcStatus {
    guard(|| {
        let cs = deref(cs, "channel set")?;
        let mode = match scheduler::select_mode(&cs.0, e_bar, power)? {
            ModeTag::IdId => IfcMode::IdId,
            ModeTag::EhEh => IfcMode::EhEh,
            ModeTag::Eh1Id2 => IfcMode::Eh1Id2,
            ModeTag::Id1Eh2 => IfcMode::Id1Eh2,
        };
        write(out, mode, "out")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draw(m: usize, seed: u64) -> *mut IfcChannelSet {
        let alpha = [1.0, 0.8, 0.8, 1.0];
        let mut cs = ptr::null_mut();
        assert_eq!(
            unsafe { ifc_channel_draw(m, m, alpha.as_ptr(), seed, &mut cs) },
            IfcStatus::Ok
        );
        cs
    }

    #[test]
    fn status_names_are_nul_terminated() {
        for status in [IfcStatus::Ok, IfcStatus::Panic, IfcStatus::OutOfRange] {
            let name = unsafe { CStr::from_ptr(ifc_status_name(status)) };
            assert!(!name.to_bytes().is_empty());
        }
    }

    #[test]
    fn null_out_pointer_is_reported() {
        let cs = draw(2, 1);
        let status = unsafe { ifc_emax(cs, 0, 50.0, ptr::null_mut()) };
        assert_eq!(status, IfcStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(ifc_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "out is null");
        unsafe { ifc_channel_free(cs) };
    }

    #[test]
    fn unknown_strategy_is_invalid_input() {
        let cs = draw(2, 1);
        let mut e = -1.0;
        assert_eq!(unsafe { ifc_emax(cs, 17, 50.0, &mut e) }, IfcStatus::InvalidInput);
        assert_eq!(e, -1.0);
        unsafe { ifc_channel_free(cs) };
    }

    #[test]
    fn point_matches_core_solver() {
        let cs = draw(3, 4);
        let mut p = std::mem::MaybeUninit::<IfcPoint>::uninit();
        assert_eq!(unsafe { ifc_point(cs, 2, 50.0, 40.0, p.as_mut_ptr()) }, IfcStatus::Ok);
        let p = unsafe { p.assume_init() };
        let core = ChannelSet::draw(3, 3, [[1.0, 0.8], [0.8, 1.0]], 4).unwrap();
        let want = boundary::re_boundary_point(&core, StrategyId::Sler, 40.0, 50.0, 20).unwrap();
        assert_eq!(p.rate_bits, want.rate);
        assert_eq!(p.energy, want.energy);
        assert_eq!(p.lambda.is_nan(), want.lambda.is_none());
        unsafe { ifc_channel_free(cs) };
    }
}
