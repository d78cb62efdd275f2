//! C ABI for the biofilm-fv solver.
//!
//! Objects are opaque heap handles created by `bfv_*_new`-style functions
//! and released with the matching `bfv_*_free`. Every fallible call returns
//! a [`BfvStatus`]; on failure `bfv_last_error_message` describes the error
//! of the most recent failing call on the current thread.
//!
//! Species values are passed cell-major: `u[cell * n_species + species]`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use biofilm_fv::diagnostics::discrete_entropy;
use biofilm_fv::mesh::{build_interval_mesh, build_rectangle_mesh, load_triangle_mesh, read_triangle_file};
use biofilm_fv::mesh::{BoundaryPredicate, DirichletSide, Mesh};
use biofilm_fv::model::{model_case1, model_case2, ModelFunctions};
use biofilm_fv::scheme::{advance, BoundaryData, NewtonConfig, State};
use biofilm_fv::Error;

/// Status codes; the library error codes match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfvStatus {
    Ok = 0,
    /// Invalid configuration, parameters or data.
    Config = 2,
    /// Newton or time stepping failure.
    Solver = 3,
    /// Inadmissible or malformed mesh.
    Mesh = 4,
    /// A required pointer argument was null.
    NullPointer = 10,
    /// A string argument was not valid UTF-8 or an output buffer was too small.
    InvalidArgument = 11,
    /// An unexpected internal panic was caught at the boundary.
    Panic = 99,
}

pub struct BfvMesh(Mesh);

pub struct BfvModel(ModelFunctions);

pub struct BfvSolver {
    mesh: Mesh,
    model: ModelFunctions,
    bdata: BoundaryData,
    state: State,
    newton: NewtonConfig,
}

/// Time stepping and Newton settings.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BfvNewtonOptions {
    pub tol: f64,
    pub max_iters: u32,
    pub dt_min: f64,
    pub dt_max: f64,
    pub dt_init: f64,
    pub adaptive: bool,
}

impl From<BfvNewtonOptions> for NewtonConfig {
    fn from(o: BfvNewtonOptions) -> Self {
        NewtonConfig {
            tol: o.tol,
            max_iters: o.max_iters as usize,
            dt_min: o.dt_min,
            dt_max: o.dt_max,
            dt_init: o.dt_init,
            adaptive: o.adaptive,
            ..NewtonConfig::default()
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(err: &Error) -> BfvStatus {
    match err.exit_code() {
        3 => BfvStatus::Solver,
        4 => BfvStatus::Mesh,
        _ => BfvStatus::Config,
    }
}

struct Failure(BfvStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn guard(f: impl FnOnce() -> Outcome) -> BfvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            BfvStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            BfvStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(BfvStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(|| null(name))
}

unsafe fn deref_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    unsafe { p.as_mut() }.ok_or_else(|| null(name))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure(BfvStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Outcome {
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

unsafe fn copy_out(values: &[f64], out: *mut f64, len: usize) -> Outcome {
    if out.is_null() {
        return Err(null("out"));
    }
    if len < values.len() {
        return Err(Failure(
            BfvStatus::InvalidArgument,
            format!("output buffer holds {len} values, {} needed", values.len()),
        ));
    }
    unsafe { ptr::copy_nonoverlapping(values.as_ptr(), out, values.len()) };
    Ok(())
}

/// Message of the last failing call on this thread; empty after a success.
/// The pointer stays valid until the next call into the library on this
/// thread.
#[no_mangle]
pub extern "C" fn bfv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bfv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Uniform mesh of `(0, 1)`. `dirichlet_side`: 0 left, 1 right, 2 both.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn bfv_mesh_interval(n_cells: usize, dirichlet_side: u32, out: *mut *mut BfvMesh) -> BfvStatus {
    guard(|| {
        let side = match dirichlet_side {
            0 => DirichletSide::Left,
            1 => DirichletSide::Right,
            2 => DirichletSide::Both,
            other => {
                return Err(Failure(
                    BfvStatus::InvalidArgument,
                    format!("dirichlet_side must be 0, 1 or 2, got {other}"),
                ))
            }
        };
        unsafe { store(out, BfvMesh(build_interval_mesh(n_cells, side)?)) }
    })
}

/// Uniform `nx × ny` rectangle mesh of the unit square; boundary edges whose
/// midpoint satisfies `dirichlet` (e.g. `"y == 1"`) carry the Dirichlet datum.
///
/// # Safety
/// `dirichlet` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bfv_mesh_rectangle(
    nx: usize,
    ny: usize,
    dirichlet: *const c_char,
    out: *mut *mut BfvMesh,
) -> BfvStatus {
    guard(|| {
        let pred = BoundaryPredicate::parse(unsafe { str_arg(dirichlet, "dirichlet") }?)?;
        unsafe { store(out, BfvMesh(build_rectangle_mesh(nx, ny, &pred)?)) }
    })
}

/// Triangle mesh from `n_nodes` points (`xy[2 * k]`, `xy[2 * k + 1]`) and
/// `n_triangles` vertex triples. Fails with `Mesh` for obtuse or right
/// triangles.
///
/// # Safety
/// `xy` must hold `2 * n_nodes` values, `triangles` `3 * n_triangles`
/// indices; `dirichlet` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bfv_mesh_triangles(
    xy: *const f64,
    n_nodes: usize,
    triangles: *const u32,
    n_triangles: usize,
    dirichlet: *const c_char,
    out: *mut *mut BfvMesh,
) -> BfvStatus {
    guard(|| {
        let xy = unsafe { slice_arg(xy, 2 * n_nodes, "xy") }?;
        let tri = unsafe { slice_arg(triangles, 3 * n_triangles, "triangles") }?;
        let pred = BoundaryPredicate::parse(unsafe { str_arg(dirichlet, "dirichlet") }?)?;
        let nodes: Vec<[f64; 2]> = xy.chunks(2).map(|c| [c[0], c[1]]).collect();
        let tris: Vec<[usize; 3]> = tri.chunks(3).map(|c| [c[0] as usize, c[1] as usize, c[2] as usize]).collect();
        unsafe { store(out, BfvMesh(load_triangle_mesh(&nodes, &tris, &pred)?)) }
    })
}

/// Triangle mesh from a file, refined `refinements` times.
///
/// # Safety
/// `path` and `dirichlet` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bfv_mesh_read(
    path: *const c_char,
    refinements: u32,
    dirichlet: *const c_char,
    out: *mut *mut BfvMesh,
) -> BfvStatus {
    guard(|| {
        let path = unsafe { str_arg(path, "path") }?;
        let pred = BoundaryPredicate::parse(unsafe { str_arg(dirichlet, "dirichlet") }?)?;
        let mut data = read_triangle_file(Path::new(path))?;
        for _ in 0..refinements {
            data = data.refine();
        }
        unsafe { store(out, BfvMesh(data.to_mesh(&pred)?)) }
    })
}

/// Number of cells, or 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bfv_mesh_n_cells(mesh: *const BfvMesh) -> usize {
    unsafe { mesh.as_ref() }.map_or(0, |m| m.0.n_cells())
}

/// Regularity constant ξ of the mesh, or NaN for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bfv_mesh_xi(mesh: *const BfvMesh) -> f64 {
    unsafe { mesh.as_ref() }.map_or(f64::NAN, |m| m.0.regularity_xi())
}

/// Cell centers as `x, y` pairs; `len` must be at least `2 * n_cells`.
///
/// # Safety
/// `mesh` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn bfv_mesh_cell_centers(mesh: *const BfvMesh, out: *mut f64, len: usize) -> BfvStatus {
    guard(|| {
        let mesh = unsafe { deref(mesh, "mesh") }?;
        let centers: Vec<f64> = mesh.0.cells().iter().flat_map(|c| c.center).collect();
        unsafe { copy_out(&centers, out, len) }
    })
}

/// # Safety
/// `mesh` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bfv_mesh_free(mesh: *mut BfvMesh) {
    if !mesh.is_null() {
        drop(unsafe { Box::from_raw(mesh) });
    }
}

/// Built-in model: `which = 1` for `p = exp(-1/(1-x))`, `a = b = 2`;
/// `which = 2` for `p = 1 - x`, `a = b = 1`. One diffusivity per species.
///
/// # Safety
/// `alphas` must hold `n_species` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bfv_model_builtin(
    which: u32,
    alphas: *const f64,
    n_species: usize,
    out: *mut *mut BfvModel,
) -> BfvStatus {
    guard(|| {
        let alphas = unsafe { slice_arg(alphas, n_species, "alphas") }?.to_vec();
        let model = match which {
            1 => model_case1(),
            2 => model_case2(),
            other => {
                return Err(Failure(
                    BfvStatus::InvalidArgument,
                    format!("unknown built-in model {other} (expected 1 or 2)"),
                ))
            }
        };
        unsafe { store(out, BfvModel(model.with_alphas(alphas)?)) }
    })
}

/// Evaluates `g(M) = q(M)/p(M)`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bfv_model_g(model: *const BfvModel, m: f64, out: *mut f64) -> BfvStatus {
    guard(|| {
        let model = unsafe { deref(model, "model") }?;
        let out = unsafe { deref_mut(out, "out") }?;
        *out = model.0.checked_g(m)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bfv_model_free(model: *mut BfvModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Default Newton settings: tol 1e-10, 50 iterations, adaptive steps in
/// `[1e-8, 1e-2]` starting at 1e-5.
#[no_mangle]
pub extern "C" fn bfv_newton_options_default() -> BfvNewtonOptions {
    let d = NewtonConfig::default();
    BfvNewtonOptions {
        tol: d.tol,
        max_iters: d.max_iters as u32,
        dt_min: d.dt_min,
        dt_max: d.dt_max,
        dt_init: d.dt_init,
        adaptive: d.adaptive,
    }
}

/// Solver for one mesh and model. Copies the mesh and model, so both
/// handles may be freed afterwards. `u_d` holds the Dirichlet datum,
/// `initial` the cell-major initial values (`n_cells * n_species`).
///
/// # Safety
/// Handles must be live, the arrays must have the stated lengths and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn bfv_solver_new(
    mesh: *const BfvMesh,
    model: *const BfvModel,
    u_d: *const f64,
    initial: *const f64,
    options: BfvNewtonOptions,
    out: *mut *mut BfvSolver,
) -> BfvStatus {
    guard(|| {
        let mesh = unsafe { deref(mesh, "mesh") }?;
        let model = unsafe { deref(model, "model") }?;
        let n = model.0.n_species();
        let u_d = unsafe { slice_arg(u_d, n, "u_d") }?.to_vec();
        let initial = unsafe { slice_arg(initial, n * mesh.0.n_cells(), "initial") }?.to_vec();
        let newton = NewtonConfig::from(options);
        newton.validate()?;
        let state = State::new(0.0, initial, n)?;
        if state.min_u() < 0.0 || state.max_biomass() >= 1.0 {
            return Err(Error::Data("initial values must satisfy u >= 0 and M < 1".into()).into());
        }
        let solver = BfvSolver {
            mesh: mesh.0.clone(),
            model: model.0.clone(),
            bdata: BoundaryData::new(u_d)?,
            state,
            newton,
        };
        unsafe { store(out, solver) }
    })
}

/// Advances the solution to `t_end`. On failure the state is unchanged.
///
/// # Safety
/// `solver` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bfv_solver_advance(solver: *mut BfvSolver, t_end: f64) -> BfvStatus {
    guard(|| {
        let s = unsafe { deref_mut(solver, "solver") }?;
        if t_end.is_nan() || t_end < s.state.time {
            return Err(Failure(
                BfvStatus::InvalidArgument,
                format!("t_end {t_end} lies before the current time {}", s.state.time),
            ));
        }
        let next = advance(s.state.clone(), t_end, &s.mesh, &s.model, &s.bdata, &s.newton, &mut |_, _| {})?;
        s.state = next;
        Ok(())
    })
}

/// Current time, or NaN for a null handle.
///
/// # Safety
/// `solver` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bfv_solver_time(solver: *const BfvSolver) -> f64 {
    unsafe { solver.as_ref() }.map_or(f64::NAN, |s| s.state.time)
}

/// Copies the cell-major state into `out` (`len >= n_cells * n_species`).
///
/// # Safety
/// `solver` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn bfv_solver_state(solver: *const BfvSolver, out: *mut f64, len: usize) -> BfvStatus {
    guard(|| {
        let s = unsafe { deref(solver, "solver") }?;
        unsafe { copy_out(&s.state.u, out, len) }
    })
}

/// Discrete relative entropy of the current state.
///
/// # Safety
/// `solver` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bfv_solver_entropy(solver: *const BfvSolver, out: *mut f64) -> BfvStatus {
    guard(|| {
        let s = unsafe { deref(solver, "solver") }?;
        let out = unsafe { deref_mut(out, "out") }?;
        *out = discrete_entropy(&s.state, &s.mesh, &s.model, &s.bdata)?;
        Ok(())
    })
}

/// # Safety
/// `solver` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bfv_solver_free(solver: *mut BfvSolver) {
    if !solver.is_null() {
        drop(unsafe { Box::from_raw(solver) });
    }
}
