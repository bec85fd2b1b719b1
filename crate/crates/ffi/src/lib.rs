//! C ABI over `surface-ot`.
//!
//! Meshes and geodesic results are opaque heap handles released with their
//! `_free` function. Every fallible call returns a [`SotStatus`]; on failure
//! a message is kept per thread and read with [`sot_last_error_message`].
//! Panics are caught at the boundary and reported as `SOT_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use surface_ot::geodesic::GeodesicResult;
use surface_ot::mesh::normalize_density;
use surface_ot::{solve_geodesic, DensityField, Error, MeshOperators, SolverConfig, TriangleMesh};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SotStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    InvalidMesh = 5,
    InvalidDensity = 6,
    Solver = 7,
    NotConverged = 8,
    Panic = 9,
}

/// Solver settings. `initial_penalty <= 0` selects the default.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SotConfig {
    pub time_steps: usize,
    pub initial_penalty: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub alpha: f64,
    pub penalty_adapt: bool,
}

impl From<&SotConfig> for SolverConfig {
    fn from(c: &SotConfig) -> Self {
        SolverConfig {
            time_steps: c.time_steps,
            initial_penalty: (c.initial_penalty > 0.0).then_some(c.initial_penalty),
            tol: c.tol,
            max_iters: c.max_iters,
            alpha: c.alpha,
            penalty_adapt: c.penalty_adapt,
            ..SolverConfig::default()
        }
    }
}

/// A triangle mesh with its operators.
pub struct SotMesh {
    mesh: TriangleMesh,
    ops: MeshOperators,
}

/// A solved geodesic.
pub struct SotGeodesic {
    result: GeodesicResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> SotStatus {
    match err {
        Error::Io { .. } => SotStatus::Io,
        Error::Parse { .. } | Error::Json(_) => SotStatus::Parse,
        Error::NonTriangularFace { .. }
        | Error::IndexOutOfRange { .. }
        | Error::RepeatedVertex { .. }
        | Error::ZeroAreaFace { .. }
        | Error::NonManifoldEdge { .. }
        | Error::NonOrientable
        | Error::IsolatedVertex(_)
        | Error::Disconnected => SotStatus::InvalidMesh,
        Error::InvalidDensity(_) | Error::SizeMismatch { .. } => SotStatus::InvalidDensity,
        Error::InvalidConfig(_) | Error::Infeasible(_) => SotStatus::InvalidArgument,
        _ => SotStatus::Solver,
    }
}

fn guard(f: impl FnOnce() -> Result<SotStatus, (SotStatus, String)>) -> SotStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err((status, msg))) => {
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
            SotStatus::Panic
        }
    }
}

fn fail(err: Error) -> (SotStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(name: &str) -> (SotStatus, String) {
    (SotStatus::NullPointer, format!("{name} is null"))
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], (SotStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn sot_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library defaults (31 time steps, tolerance 1e-4, 5000 iterations).
#[no_mangle]
pub extern "C" fn sot_config_default() -> SotConfig {
    let d = SolverConfig::default();
    SotConfig {
        time_steps: d.time_steps,
        initial_penalty: 0.0,
        tol: d.tol,
        max_iters: d.max_iters,
        alpha: d.alpha,
        penalty_adapt: d.penalty_adapt,
    }
}

/// Loads an OFF or OBJ file (format from the extension).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sot_mesh_load(path: *const c_char, out: *mut *mut SotMesh) -> SotStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (SotStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let mesh = TriangleMesh::load_auto(path).map_err(fail)?;
        let ops = MeshOperators::new(&mesh);
        *out = Box::into_raw(Box::new(SotMesh { mesh, ops }));
        Ok(SotStatus::Ok)
    })
}

/// Builds a mesh from `3 * num_vertices` coordinates and `3 * num_faces`
/// zero-based indices.
///
/// # Safety
/// The arrays must hold the stated number of values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sot_mesh_from_arrays(
    vertices: *const f64,
    num_vertices: usize,
    faces: *const u32,
    num_faces: usize,
    out: *mut *mut SotMesh,
) -> SotStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let v = slice(vertices, 3 * num_vertices, "vertices")?;
        let f = slice(faces, 3 * num_faces, "faces")?;
        let vertices = v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let faces = f.chunks_exact(3).map(|c| [c[0] as usize, c[1] as usize, c[2] as usize]).collect();
        let mesh = TriangleMesh::new(vertices, faces).map_err(fail)?;
        let ops = MeshOperators::new(&mesh);
        *out = Box::into_raw(Box::new(SotMesh { mesh, ops }));
        Ok(SotStatus::Ok)
    })
}

/// # Safety
/// `mesh` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sot_mesh_free(mesh: *mut SotMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Vertex count, 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sot_mesh_num_vertices(mesh: *const SotMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.num_vertices())
}

/// Copies the barycentric vertex areas into `out` (length `len`).
///
/// # Safety
/// `mesh` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sot_mesh_vertex_areas(mesh: *const SotMesh, out: *mut f64, len: usize) -> SotStatus {
    guard(|| {
        let m = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        let areas = m.mesh.vertex_areas();
        if out.is_null() {
            return Err(null("out"));
        }
        if len != areas.len() {
            return Err(fail(Error::SizeMismatch { expected: areas.len(), got: len }));
        }
        ptr::copy_nonoverlapping(areas.as_ptr(), out, len);
        Ok(SotStatus::Ok)
    })
}

/// Scales nonnegative per-vertex values to unit mass, in place.
///
/// # Safety
/// `mesh` must be a live handle and `values` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sot_normalize_density(mesh: *const SotMesh, values: *mut f64, len: usize) -> SotStatus {
    guard(|| {
        let m = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        if values.is_null() {
            return Err(null("values"));
        }
        let v = std::slice::from_raw_parts_mut(values, len);
        if len != m.mesh.num_vertices() {
            return Err(fail(Error::SizeMismatch { expected: m.mesh.num_vertices(), got: len }));
        }
        let d = normalize_density(&m.mesh, v).map_err(fail)?;
        v.copy_from_slice(d.values());
        Ok(SotStatus::Ok)
    })
}

unsafe fn run_geodesic(
    mesh: *const SotMesh,
    mu0: *const f64,
    mu1: *const f64,
    len: usize,
    config: *const SotConfig,
) -> Result<GeodesicResult, (SotStatus, String)> {
    let m = mesh.as_ref().ok_or_else(|| null("mesh"))?;
    let cfg = config.as_ref().map_or_else(SolverConfig::default, SolverConfig::from);
    let a = slice(mu0, len, "mu0")?;
    let b = slice(mu1, len, "mu1")?;
    let a = DensityField::from_values_unchecked(a.to_vec());
    let b = DensityField::from_values_unchecked(b.to_vec());
    solve_geodesic(&m.mesh, &m.ops, &a, &b, &cfg).map_err(fail)
}

/// Solves the geodesic between two densities of length `len`. A null
/// `config` uses the defaults. Returns `SOT_STATUS_OK` even when the
/// iteration limit was hit; query [`sot_geodesic_converged`].
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sot_geodesic_solve(
    mesh: *const SotMesh,
    mu0: *const f64,
    mu1: *const f64,
    len: usize,
    config: *const SotConfig,
    out: *mut *mut SotGeodesic,
) -> SotStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let result = run_geodesic(mesh, mu0, mu1, len, config)?;
        *out = Box::into_raw(Box::new(SotGeodesic { result }));
        Ok(SotStatus::Ok)
    })
}

/// Distance only. Writes the value and returns `SOT_STATUS_NOT_CONVERGED`
/// if the tolerance was not reached.
///
/// # Safety
/// As for [`sot_geodesic_solve`]; `distance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sot_distance(
    mesh: *const SotMesh,
    mu0: *const f64,
    mu1: *const f64,
    len: usize,
    config: *const SotConfig,
    distance: *mut f64,
) -> SotStatus {
    guard(|| {
        if distance.is_null() {
            return Err(null("distance"));
        }
        let result = run_geodesic(mesh, mu0, mu1, len, config)?;
        *distance = result.distance;
        if result.converged {
            Ok(SotStatus::Ok)
        } else {
            Err((SotStatus::NotConverged, format!("no convergence after {} iterations", result.iterations)))
        }
    })
}

/// # Safety
/// `g` must be null or a handle from [`sot_geodesic_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sot_geodesic_free(g: *mut SotGeodesic) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// NaN for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sot_geodesic_distance(g: *const SotGeodesic) -> f64 {
    g.as_ref().map_or(f64::NAN, |g| g.result.distance)
}

/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sot_geodesic_converged(g: *const SotGeodesic) -> bool {
    g.as_ref().is_some_and(|g| g.result.converged)
}

/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sot_geodesic_iterations(g: *const SotGeodesic) -> usize {
    g.as_ref().map_or(0, |g| g.result.iterations)
}

/// Number of density frames (the centered time steps).
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sot_geodesic_num_frames(g: *const SotGeodesic) -> usize {
    g.as_ref().map_or(0, |g| g.result.mu_curve.len())
}

/// Copies frame `k` into `out` (length `len`, the vertex count).
///
/// # Safety
/// `g` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sot_geodesic_frame(g: *const SotGeodesic, k: usize, out: *mut f64, len: usize) -> SotStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("geodesic"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let frame = g
            .result
            .mu_curve
            .get(k)
            .ok_or_else(|| (SotStatus::InvalidArgument, format!("frame {k} out of range")))?;
        if len != frame.len() {
            return Err(fail(Error::SizeMismatch { expected: frame.len(), got: len }));
        }
        ptr::copy_nonoverlapping(frame.as_ptr(), out, len);
        Ok(SotStatus::Ok)
    })
}
