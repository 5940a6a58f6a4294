//! C ABI for llm-assign.
//!
//! Handles are opaque. Each handle returned through an out-pointer belongs to
//! the caller and must be released with the matching `*_free` function.
//! Fallible calls return an [`LaStatus`]; [`la_last_error`] describes the
//! most recent failure on the calling thread.
//!
//! Matrices are passed row-major as `n * m` doubles (row = query, column = LLM).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use llm_assign::metrics::{igd, Provenance, ReferenceFront};
use llm_assign::nsga2::{nsga2, GaConfig};
use llm_assign::optimizer::{optimize, SearchConfig};
use llm_assign::{CostMatrix, Error, Matrix, ObjectivePoint, PredictionMatrix, SolutionArchive};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    InstanceTooLarge = 4,
    IndexOutOfRange = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// A cost matrix paired with a prediction matrix of the same shape.
pub struct LaProblem {
    costs: CostMatrix,
    predictions: PredictionMatrix,
}

/// Mutually non-dominated solutions, ordered by ascending cost.
pub struct LaArchive {
    archive: SolutionArchive,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (LaStatus, String);

fn record(message: Option<String>) {
    let c = message.map(|m| CString::new(m.replace('\0', " ")).expect("nul bytes removed"));
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn from_error(e: Error) -> Failure {
    let status = match e {
        Error::Shape(_) => LaStatus::ShapeMismatch,
        Error::InstanceTooLarge { .. } => LaStatus::InstanceTooLarge,
        _ => LaStatus::InvalidArgument,
    };
    (status, e.to_string())
}

fn null(name: &str) -> Failure {
    (LaStatus::NullPointer, format!("`{name}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            record(None);
            LaStatus::Ok
        }
        Ok(Err((status, message))) => {
            record(Some(message));
            status
        }
        Err(_) => {
            record(Some("internal panic".into()));
            LaStatus::Panic
        }
    }
}

unsafe fn read_matrix(data: *const f64, n: usize, m: usize, name: &str) -> Result<Matrix, Failure> {
    if data.is_null() {
        return Err(null(name));
    }
    let len = n
        .checked_mul(m)
        .ok_or_else(|| (LaStatus::InvalidArgument, format!("{n} x {m} overflows")))?;
    let values = slice::from_raw_parts(data, len).to_vec();
    Matrix::from_vec(n, m, values).map_err(from_error)
}

unsafe fn read_points(
    data: *const f64,
    count: usize,
    name: &str,
) -> Result<Vec<ObjectivePoint>, Failure> {
    Ok(read_matrix(data, count, 2, name)?
        .to_rows()
        .into_iter()
        .map(|r| ObjectivePoint::new(r[0], r[1]))
        .collect())
}

unsafe fn emit<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Builds a problem from `n` queries and `m` LLMs. Costs must be finite and
/// non-negative; predictions must lie in `[0, 1]`.
///
/// # Safety
/// `costs` and `predictions` must point to `n * m` readable doubles and `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn la_problem_new(
    n: usize,
    m: usize,
    costs: *const f64,
    predictions: *const f64,
    out: *mut *mut LaProblem,
) -> LaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let costs = CostMatrix::new(read_matrix(costs, n, m, "costs")?).map_err(from_error)?;
        let predictions = PredictionMatrix::new(read_matrix(predictions, n, m, "predictions")?)
            .map_err(from_error)?;
        emit(out, LaProblem { costs, predictions });
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from [`la_problem_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn la_problem_free(problem: *mut LaProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Runs the destruction/reconstruction search.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn la_optimize(
    problem: *const LaProblem,
    grid_n: usize,
    max_iterations: usize,
    out: *mut *mut LaArchive,
) -> LaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let config = SearchConfig {
            grid_n,
            max_iterations,
            ..SearchConfig::default()
        };
        let archive = optimize(&p.predictions, &p.costs, &config).map_err(from_error)?;
        emit(out, LaArchive { archive });
        Ok(())
    })
}

/// Runs the NSGA-II baseline with default crossover and mutation rates.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn la_nsga2(
    problem: *const LaProblem,
    population_size: usize,
    generations: usize,
    seed: u64,
    out: *mut *mut LaArchive,
) -> LaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let config = GaConfig {
            population_size,
            generations,
            seed,
            ..GaConfig::default()
        };
        let archive = nsga2(&p.predictions, &p.costs, &config).map_err(from_error)?;
        emit(out, LaArchive { archive });
        Ok(())
    })
}

/// Number of solutions; 0 for a null handle.
///
/// # Safety
/// `archive` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn la_archive_len(archive: *const LaArchive) -> usize {
    archive.as_ref().map_or(0, |a| a.archive.len())
}

/// Cost and predicted accuracy of solution `index`.
///
/// # Safety
/// `archive` must be a live handle; `cost` and `accuracy` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn la_archive_objectives(
    archive: *const LaArchive,
    index: usize,
    cost: *mut f64,
    accuracy: *mut f64,
) -> LaStatus {
    guard(|| {
        let a = archive.as_ref().ok_or_else(|| null("archive"))?;
        if cost.is_null() || accuracy.is_null() {
            return Err(null("cost/accuracy"));
        }
        let s = a
            .archive
            .members()
            .get(index)
            .ok_or_else(|| out_of_range(index, a))?;
        *cost = s.cost();
        *accuracy = s.accuracy();
        Ok(())
    })
}

fn out_of_range(index: usize, a: &LaArchive) -> Failure {
    (
        LaStatus::IndexOutOfRange,
        format!(
            "index {index} out of range for {} solutions",
            a.archive.len()
        ),
    )
}

/// Copies the LLM index of every query in solution `index` into `buffer`,
/// which must hold at least `n` entries.
///
/// # Safety
/// `archive` must be a live handle and `buffer` must point to `capacity`
/// writable entries.
#[no_mangle]
pub unsafe extern "C" fn la_archive_assignment(
    archive: *const LaArchive,
    index: usize,
    buffer: *mut usize,
    capacity: usize,
) -> LaStatus {
    guard(|| {
        let a = archive.as_ref().ok_or_else(|| null("archive"))?;
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        let s = a
            .archive
            .members()
            .get(index)
            .ok_or_else(|| out_of_range(index, a))?;
        let asg = s.assignment();
        if capacity < asg.len() {
            return Err((
                LaStatus::BufferTooSmall,
                format!(
                    "assignment needs {} entries, buffer holds {capacity}",
                    asg.len()
                ),
            ));
        }
        slice::from_raw_parts_mut(buffer, asg.len()).copy_from_slice(asg);
        Ok(())
    })
}

/// # Safety
/// `archive` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn la_archive_free(archive: *mut LaArchive) {
    if !archive.is_null() {
        drop(Box::from_raw(archive));
    }
}

/// Inverted generational distance of `obtained` against `reference`, both
/// given as `(cost, accuracy)` pairs.
///
/// # Safety
/// The point arrays must hold `2 * count` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn la_igd(
    obtained: *const f64,
    obtained_count: usize,
    reference: *const f64,
    reference_count: usize,
    out: *mut f64,
) -> LaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let got = read_points(obtained, obtained_count, "obtained")?;
        let front = ReferenceFront::new(
            &read_points(reference, reference_count, "reference")?,
            Provenance::Incremental,
        );
        *out = igd(&got, &front).map_err(from_error)?;
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null after a success.
/// The string stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn la_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn la_status_name(status: LaStatus) -> *const c_char {
    let name: &'static CStr = match status {
        LaStatus::Ok => c"ok",
        LaStatus::NullPointer => c"null pointer",
        LaStatus::InvalidArgument => c"invalid argument",
        LaStatus::ShapeMismatch => c"shape mismatch",
        LaStatus::InstanceTooLarge => c"instance too large",
        LaStatus::IndexOutOfRange => c"index out of range",
        LaStatus::BufferTooSmall => c"buffer too small",
        LaStatus::Panic => c"internal panic",
    };
    name.as_ptr()
}
