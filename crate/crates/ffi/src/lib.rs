//! C ABI over `glmct`.
//!
//! Every function returns a [`GlmctStatus`]. On failure a description is
//! available from [`glmct_last_error_message`] on the same thread. Handles are
//! opaque and must be released with the matching `*_free` function. Output
//! values are written through pointer arguments only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use glmct::geomgraph::{AcquisitionGeometry, BeamKind, GeometryGraph};
use glmct::ndcore::{read_checkpoint, Parameters, Tensor};
use glmct::netmodules::{complexity_estimate, count_params, NetworkKind, NetworkSpec, SinogramNet};
use glmct::traineval::{psnr, ssim};
use glmct::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlmctStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Geometry = 3,
    Graph = 4,
    Shape = 5,
    Numeric = 6,
    Io = 7,
    Format = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Beam kind codes accepted by [`glmct_geometry_new_circular`].
pub const GLMCT_BEAM_PARALLEL: u32 = 0;
pub const GLMCT_BEAM_FAN: u32 = 1;

/// Network kind codes.
pub const GLMCT_NET_GLM: u32 = 0;
pub const GLMCT_NET_CNN: u32 = 1;

pub struct GlmctGeometry {
    inner: AcquisitionGeometry,
}

pub struct GlmctGraph {
    inner: GeometryGraph,
}

pub struct GlmctNetwork {
    inner: SinogramNet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> GlmctStatus {
    match e {
        Error::Geometry(_) => GlmctStatus::Geometry,
        Error::Graph(_) => GlmctStatus::Graph,
        Error::Shape(_) => GlmctStatus::Shape,
        Error::Eigen(_) | Error::NonFinite(_) | Error::Diverged { .. } => GlmctStatus::Numeric,
        Error::InvalidArgument(_) | Error::Config(_) => GlmctStatus::InvalidArgument,
        Error::Format { .. } => GlmctStatus::Format,
        Error::Io(_) => GlmctStatus::Io,
    }
}

struct Fail(GlmctStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(GlmctStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GlmctStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            GlmctStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GlmctStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn beam_kind(code: u32) -> Result<BeamKind, Fail> {
    match code {
        GLMCT_BEAM_PARALLEL => Ok(BeamKind::Parallel),
        GLMCT_BEAM_FAN => Ok(BeamKind::Fan),
        other => Err(Fail(GlmctStatus::InvalidArgument, format!("unknown beam kind {other}"))),
    }
}

fn net_kind(code: u32) -> Result<NetworkKind, Fail> {
    match code {
        GLMCT_NET_GLM => Ok(NetworkKind::Glm),
        GLMCT_NET_CNN => Ok(NetworkKind::Cnn),
        other => Err(Fail(GlmctStatus::InvalidArgument, format!("unknown network kind {other}"))),
    }
}

/// Message describing the last failure on this thread, or NULL. The
/// pointer stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn glmct_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn glmct_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Uniform full rotation. `orbit_radius` is ignored for parallel beam.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn glmct_geometry_new_circular(
    n_views: usize,
    detector_pixels: usize,
    beam: u32,
    orbit_radius: f64,
    detector_spacing: f64,
    out: *mut *mut GlmctGeometry,
) -> GlmctStatus {
    guard(|| {
        let beam = beam_kind(beam)?;
        let radius = if beam == BeamKind::Parallel { f64::INFINITY } else { orbit_radius };
        let g = AcquisitionGeometry::circular(n_views, detector_pixels, beam, radius, detector_spacing)?;
        write_out(out, Box::into_raw(Box::new(GlmctGeometry { inner: g })), "out")
    })
}

/// Keeps every `factor`-th view.
///
/// # Safety
/// `geometry` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn glmct_geometry_subsample(
    geometry: *const GlmctGeometry,
    factor: usize,
    out: *mut *mut GlmctGeometry,
) -> GlmctStatus {
    guard(|| {
        let g = deref(geometry, "geometry")?.inner.subsample(factor)?;
        write_out(out, Box::into_raw(Box::new(GlmctGeometry { inner: g })), "out")
    })
}

/// # Safety
/// `geometry` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn glmct_geometry_n_views(geometry: *const GlmctGeometry, out: *mut usize) -> GlmctStatus {
    guard(|| write_out(out, deref(geometry, "geometry")?.inner.n_views(), "out"))
}

/// Writes 1 for a uniformly sampled full rotation, else 0.
///
/// # Safety
/// `geometry` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn glmct_geometry_full_rotation(geometry: *const GlmctGeometry, out: *mut u8) -> GlmctStatus {
    guard(|| write_out(out, deref(geometry, "geometry")?.inner.full_rotation() as u8, "out"))
}

/// Copies the source angles (radians) into `angles`, which must hold at
/// least `capacity` values.
///
/// # Safety
/// `geometry` must be a live handle; `angles` must point to `capacity`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn glmct_geometry_angles(
    geometry: *const GlmctGeometry,
    angles: *mut f64,
    capacity: usize,
) -> GlmctStatus {
    guard(|| {
        let a = deref(geometry, "geometry")?.inner.angles();
        if angles.is_null() {
            return Err(null("angles"));
        }
        if capacity < a.len() {
            return Err(Fail(
                GlmctStatus::BufferTooSmall,
                format!("need {} angles, capacity {capacity}", a.len()),
            ));
        }
        ptr::copy_nonoverlapping(a.as_ptr(), angles, a.len());
        Ok(())
    })
}

/// # Safety
/// `geometry` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn glmct_geometry_free(geometry: *mut GlmctGeometry) {
    if !geometry.is_null() {
        drop(Box::from_raw(geometry));
    }
}

/// Builds the neighbour graph of an acquisition geometry.
///
/// # Safety
/// `geometry` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn glmct_graph_from_geometry(
    geometry: *const GlmctGeometry,
    out: *mut *mut GlmctGraph,
) -> GlmctStatus {
    guard(|| {
        let g = GeometryGraph::from_geometry(&deref(geometry, "geometry")?.inner)?;
        write_out(out, Box::into_raw(Box::new(GlmctGraph { inner: g })), "out")
    })
}

/// # Safety
/// `graph` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn glmct_graph_node_count(graph: *const GlmctGraph, out: *mut usize) -> GlmctStatus {
    guard(|| write_out(out, deref(graph, "graph")?.inner.node_count(), "out"))
}

/// # Safety
/// `graph` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn glmct_graph_edge_count(graph: *const GlmctGraph, out: *mut usize) -> GlmctStatus {
    guard(|| write_out(out, deref(graph, "graph")?.inner.edges().len(), "out"))
}

/// # Safety
/// `graph` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn glmct_graph_is_cyclic(graph: *const GlmctGraph, out: *mut u8) -> GlmctStatus {
    guard(|| write_out(out, deref(graph, "graph")?.inner.cyclic() as u8, "out"))
}

/// Copies the edge list (`i < j`, sorted) into three parallel arrays of at
/// least `capacity` entries.
///
/// # Safety
/// `graph` must be a live handle; each array must hold `capacity` writable
/// elements.
#[no_mangle]
pub unsafe extern "C" fn glmct_graph_edges(
    graph: *const GlmctGraph,
    i: *mut usize,
    j: *mut usize,
    weight: *mut f64,
    capacity: usize,
) -> GlmctStatus {
    guard(|| {
        let edges = deref(graph, "graph")?.inner.edges();
        if i.is_null() || j.is_null() || weight.is_null() {
            return Err(null("edge output array"));
        }
        if capacity < edges.len() {
            return Err(Fail(
                GlmctStatus::BufferTooSmall,
                format!("need {} edges, capacity {capacity}", edges.len()),
            ));
        }
        for (k, e) in edges.iter().enumerate() {
            i.add(k).write(e.i);
            j.add(k).write(e.j);
            weight.add(k).write(e.weight);
        }
        Ok(())
    })
}

/// # Safety
/// `graph` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn glmct_graph_free(graph: *mut GlmctGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

fn spec(kind: u32, channels: usize, kernel_size: usize, modules: usize) -> Result<NetworkSpec, Fail> {
    let spec = NetworkSpec {
        kind: net_kind(kind)?,
        channels,
        kernel_size,
        modules,
    };
    spec.validate()?;
    Ok(spec)
}

/// Trainable parameters of a sinogram network.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glmct_count_params(
    kind: u32,
    channels: usize,
    kernel_size: usize,
    modules: usize,
    out: *mut u64,
) -> GlmctStatus {
    guard(|| write_out(out, count_params(&spec(kind, channels, kernel_size, modules)?), "out"))
}

/// Multiply-accumulate count of one module on an `n x p` sinogram.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glmct_complexity_estimate(
    kind: u32,
    n: u64,
    p: u64,
    s: u64,
    c_in: u64,
    c_out: u64,
    out: *mut u64,
) -> GlmctStatus {
    guard(|| write_out(out, complexity_estimate(net_kind(kind)?, n, p, s, c_in, c_out), "out"))
}

/// Randomly initialised network with kernel size 7 and 3 modules.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glmct_network_new(
    kind: u32,
    channels: usize,
    seed: u64,
    out: *mut *mut GlmctNetwork,
) -> GlmctStatus {
    guard(|| {
        let net = SinogramNet::init(spec(kind, channels, 7, 3)?, seed)?;
        write_out(out, Box::into_raw(Box::new(GlmctNetwork { inner: net })), "out")
    })
}

/// Loads weights from a checkpoint written by the `train` command (the
/// sinogram network part) or one holding the network alone.
///
/// # Safety
/// `network` must be a live handle; `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn glmct_network_load(network: *mut GlmctNetwork, path: *const c_char) -> GlmctStatus {
    guard(|| {
        let net = &mut network.as_mut().ok_or_else(|| null("network"))?.inner;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(GlmctStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let records: Vec<(String, Tensor)> = read_checkpoint(Path::new(path))?
            .into_iter()
            .filter_map(|(name, t)| match name.strip_prefix("net.") {
                Some(rest) => Some((rest.to_string(), t)),
                None if name.starts_with("gamma.") => None,
                None => Some((name, t)),
            })
            .collect();
        net.load_named(&records)?;
        Ok(())
    })
}

/// # Safety
/// `network` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn glmct_network_param_count(network: *const GlmctNetwork, out: *mut usize) -> GlmctStatus {
    guard(|| write_out(out, deref(network, "network")?.inner.param_count(), "out"))
}

/// Applies the network to a row-major `n_views x pixels` sinogram. `graph`
/// is required for GLM networks and ignored (may be NULL) for CNNs.
/// `output` receives `n_views * pixels` values.
///
/// # Safety
/// Handles must be live; `input` and `output` must each point to
/// `n_views * pixels` doubles.
#[no_mangle]
pub unsafe extern "C" fn glmct_network_forward(
    network: *const GlmctNetwork,
    graph: *const GlmctGraph,
    input: *const f64,
    n_views: usize,
    pixels: usize,
    output: *mut f64,
) -> GlmctStatus {
    guard(|| {
        let net = &deref(network, "network")?.inner;
        if input.is_null() || output.is_null() {
            return Err(null("sinogram buffer"));
        }
        let len = n_views
            .checked_mul(pixels)
            .filter(|&l| l > 0)
            .ok_or_else(|| Fail(GlmctStatus::Shape, "empty or oversized sinogram".into()))?;
        let data = std::slice::from_raw_parts(input, len).to_vec();
        let y = Tensor::from_vec(&[1, n_views, pixels], data)?;
        let graph = graph.as_ref().map(|g| &g.inner);
        let mp = net.aggregator(graph)?;
        let out = net.forward(mp.as_ref(), &y)?;
        ptr::copy_nonoverlapping(out.data().as_ptr(), output, len);
        Ok(())
    })
}

/// # Safety
/// `network` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn glmct_network_free(network: *mut GlmctNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

unsafe fn image(p: *const f64, h: usize, w: usize) -> Result<Tensor, Fail> {
    if p.is_null() {
        return Err(null("image"));
    }
    let len = h.checked_mul(w).filter(|&l| l > 0).ok_or_else(|| Fail(GlmctStatus::Shape, "empty image".into()))?;
    Ok(Tensor::from_vec(&[h, w], std::slice::from_raw_parts(p, len).to_vec())?)
}

/// PSNR in dB of two row-major `h x w` images; `+inf` when identical.
///
/// # Safety
/// `a` and `b` must point to `h * w` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glmct_psnr(a: *const f64, b: *const f64, h: usize, w: usize, peak: f64, out: *mut f64) -> GlmctStatus {
    guard(|| write_out(out, psnr(&image(a, h, w)?, &image(b, h, w)?, peak)?, "out"))
}

/// SSIM of two row-major `h x w` images after 8-bit min-max normalisation.
///
/// # Safety
/// `a` and `b` must point to `h * w` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glmct_ssim(a: *const f64, b: *const f64, h: usize, w: usize, out: *mut f64) -> GlmctStatus {
    guard(|| write_out(out, ssim(&image(a, h, w)?, &image(b, h, w)?)?, "out"))
}
