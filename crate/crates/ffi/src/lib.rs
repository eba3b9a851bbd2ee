//! C ABI over `covertrain`.
//!
//! Every function returns a [`CtStatus`]. On failure the message is available
//! from [`ct_last_error`] on the same thread until the next failing call.
//! Handles are opaque; free each one with its matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use covertrain::cover::ConcaveFn;
use covertrain::data::{self, Dataset, Format, SynthConfig};
use covertrain::error::{Error, ErrorKind};
use covertrain::eval::bag_accuracy;
use covertrain::graph::InstanceRef;
use covertrain::loss::LossKind;
use covertrain::lsvm::{decision, Model, TrainConfig};
use covertrain::optim::OptConfig;
use covertrain::pipeline::{self, CoverSettings, Discovery, InitMode, Method};
use covertrain::smooth::{self, Omega, SmoothConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtStatus {
    Ok = 0,
    Usage = 1,
    Data = 2,
    Numerical = 3,
    NullPointer = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtFormat {
    DenseCsv = 0,
    SparseBag = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtConcave {
    Identity = 0,
    Sqrt = 1,
    Log1p = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtOmega {
    Euclidean = 0,
    Entropy = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtLoss {
    Hinge = 0,
    SquaredHinge = 1,
    Logistic = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtMethod {
    Svm = 0,
    Lsvm = 1,
    Slsvm = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtInit {
    Cover = 0,
    Bagavg = 1,
    Negmine = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtCoverOptions {
    pub k: usize,
    pub t: u32,
    pub alpha: f64,
    pub g: CtConcave,
    pub n_clusters: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtSynthOptions {
    pub n_pos: usize,
    pub n_neg: usize,
    pub bag_size: usize,
    pub dim: usize,
    pub signal_sep: f64,
    pub clutter_sep: f64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtTrainOptions {
    pub method: CtMethod,
    pub init: CtInit,
    pub cover: CtCoverOptions,
    pub c: f64,
    /// Loss of the latent SVM and the initial classifier.
    pub loss: CtLoss,
    pub use_bias: bool,
    pub max_outer: usize,
    pub outer_tol: f64,
    pub mu: f64,
    /// 0 evaluates every instance.
    pub n_top: usize,
    pub omega: CtOmega,
    /// Must be smooth.
    pub smooth_loss: CtLoss,
    pub memory: usize,
    pub grad_tol: f64,
    pub max_iters: usize,
}

pub struct CtDataset(Dataset);
pub struct CtModel(Model);
pub struct CtCover(Discovery);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

enum Fail {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

type Res<T = ()> = Result<T, Fail>;

fn guard(f: impl FnOnce() -> Res) -> CtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CtStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CtStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            match e.kind() {
                ErrorKind::Usage => CtStatus::Usage,
                ErrorKind::Data => CtStatus::Data,
                ErrorKind::Numerical => CtStatus::Numerical,
            }
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CtStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Res<&'a T> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn put<T>(out: *mut T, what: &'static str, value: T) -> Res {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn path(p: *const c_char) -> Res<PathBuf> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::InvalidArgument("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Res<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &'static str) -> Res<&'a mut [f64]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(p))));
    }
}

impl From<CtConcave> for ConcaveFn {
    fn from(g: CtConcave) -> Self {
        match g {
            CtConcave::Identity => ConcaveFn::Identity,
            CtConcave::Sqrt => ConcaveFn::Sqrt,
            CtConcave::Log1p => ConcaveFn::Log1p,
        }
    }
}

impl From<CtOmega> for Omega {
    fn from(o: CtOmega) -> Self {
        match o {
            CtOmega::Euclidean => Omega::Euclidean,
            CtOmega::Entropy => Omega::Entropy,
        }
    }
}

impl From<CtLoss> for LossKind {
    fn from(l: CtLoss) -> Self {
        match l {
            CtLoss::Hinge => LossKind::Hinge,
            CtLoss::SquaredHinge => LossKind::SquaredHinge,
            CtLoss::Logistic => LossKind::Logistic,
        }
    }
}

impl From<CtCoverOptions> for CoverSettings {
    fn from(o: CtCoverOptions) -> Self {
        CoverSettings {
            k: o.k,
            t: o.t,
            alpha: o.alpha,
            g: o.g.into(),
            n_clusters: o.n_clusters,
        }
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ct_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn ct_cover_options_default() -> CtCoverOptions {
    let d = CoverSettings::default();
    CtCoverOptions {
        k: d.k,
        t: d.t,
        alpha: d.alpha,
        g: CtConcave::Identity,
        n_clusters: d.n_clusters,
    }
}

#[no_mangle]
pub extern "C" fn ct_synth_options_default() -> CtSynthOptions {
    let d = SynthConfig::default();
    CtSynthOptions {
        n_pos: d.n_pos,
        n_neg: d.n_neg,
        bag_size: d.bag_size,
        dim: d.dim,
        signal_sep: d.signal_sep,
        clutter_sep: d.clutter_sep,
        seed: d.seed,
    }
}

#[no_mangle]
pub extern "C" fn ct_train_options_default() -> CtTrainOptions {
    let t = TrainConfig::default();
    let s = SmoothConfig::default();
    CtTrainOptions {
        method: CtMethod::Slsvm,
        init: CtInit::Cover,
        cover: ct_cover_options_default(),
        c: t.c,
        loss: CtLoss::Hinge,
        use_bias: t.use_bias,
        max_outer: t.max_outer,
        outer_tol: t.outer_tol,
        mu: s.mu,
        n_top: s.n_top,
        omega: CtOmega::Euclidean,
        smooth_loss: CtLoss::SquaredHinge,
        memory: t.inner.memory,
        grad_tol: t.inner.grad_tol,
        max_iters: t.inner.max_iters,
    }
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ct_dataset_load(path_: *const c_char, format: CtFormat, out: *mut *mut CtDataset) -> CtStatus {
    guard(|| {
        let format = match format {
            CtFormat::DenseCsv => Format::DenseCsv,
            CtFormat::SparseBag => Format::SparseBag,
        };
        let ds = data::load_dataset(path(path_)?, format)?;
        put(out, "out", boxed(CtDataset(ds)))
    })
}

/// # Safety
/// `opts` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ct_dataset_synth(opts: *const CtSynthOptions, out: *mut *mut CtDataset) -> CtStatus {
    guard(|| {
        let o = get(opts, "opts")?;
        let cfg = SynthConfig {
            n_pos: o.n_pos,
            n_neg: o.n_neg,
            bag_size: o.bag_size,
            dim: o.dim,
            signal_sep: o.signal_sep,
            clutter_sep: o.clutter_sep,
            seed: o.seed,
        };
        let (ds, _) = data::synth_generate(&cfg)?;
        put(out, "out", boxed(CtDataset(ds)))
    })
}

/// Writes a new standardized copy of `ds` to `out`.
///
/// # Safety
/// `ds` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ct_dataset_standardize(ds: *const CtDataset, out: *mut *mut CtDataset) -> CtStatus {
    guard(|| {
        let std = data::standardize(&get(ds, "ds")?.0)?;
        put(out, "out", boxed(CtDataset(std)))
    })
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ct_dataset_free(ds: *mut CtDataset) {
    free(ds)
}

/// Dimension, bag count and instance count. Any output may be null.
///
/// # Safety
/// `ds` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_dataset_shape(
    ds: *const CtDataset,
    dim: *mut usize,
    n_bags: *mut usize,
    n_instances: *mut usize,
) -> CtStatus {
    guard(|| {
        let ds = &get(ds, "ds")?.0;
        for (p, v) in [(dim, ds.dim), (n_bags, ds.bags.len()), (n_instances, ds.n_instances())] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// Builds the neighbor graph, runs the greedy cover and extracts clusters.
///
/// # Safety
/// `ds` must be a live handle, `opts` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ct_cover_run(
    ds: *const CtDataset,
    opts: *const CtCoverOptions,
    out: *mut *mut CtCover,
) -> CtStatus {
    guard(|| {
        let settings: CoverSettings = (*get(opts, "opts")?).into();
        let found = pipeline::discover(&get(ds, "ds")?.0, &settings)?;
        put(out, "out", boxed(CtCover(found)))
    })
}

/// # Safety
/// `cover` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ct_cover_free(cover: *mut CtCover) {
    free(cover)
}

/// Final and total objective values.
///
/// # Safety
/// `cover` must be a live handle; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn ct_cover_objective(cover: *const CtCover, f_final: *mut f64, f_total: *mut f64) -> CtStatus {
    guard(|| {
        let r = &get(cover, "cover")?.0.result;
        put(f_final, "f_final", r.f_final)?;
        put(f_total, "f_total", r.f_total)
    })
}

/// # Safety
/// `cover` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ct_cover_n_selected(cover: *const CtCover, out: *mut usize) -> CtStatus {
    guard(|| put(out, "out", get(cover, "cover")?.0.result.selected_refs.len()))
}

/// The `i`-th selected instance in selection order.
///
/// # Safety
/// `cover` must be a live handle; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn ct_cover_selected(
    cover: *const CtCover,
    i: usize,
    bag_id: *mut u64,
    instance_id: *mut usize,
) -> CtStatus {
    guard(|| {
        let refs = &get(cover, "cover")?.0.result.selected_refs;
        write_ref(refs, i, bag_id, instance_id)
    })
}

/// # Safety
/// `cover` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ct_cover_n_positives(cover: *const CtCover, out: *mut usize) -> CtStatus {
    guard(|| put(out, "out", get(cover, "cover")?.0.positives().len()))
}

/// The `i`-th extracted positive, ascending by (bag id, instance id).
///
/// # Safety
/// `cover` must be a live handle; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn ct_cover_positive(
    cover: *const CtCover,
    i: usize,
    bag_id: *mut u64,
    instance_id: *mut usize,
) -> CtStatus {
    guard(|| {
        let refs = get(cover, "cover")?.0.positives();
        write_ref(&refs, i, bag_id, instance_id)
    })
}

unsafe fn write_ref(refs: &[InstanceRef], i: usize, bag_id: *mut u64, instance_id: *mut usize) -> Res {
    let r = refs
        .get(i)
        .ok_or_else(|| Error::InvalidArgument(format!("index {i} out of range ({} entries)", refs.len())))?;
    put(bag_id, "bag_id", r.bag_id)?;
    put(instance_id, "instance_id", r.instance_id)
}

/// Euclidean projection of `v` onto the probability simplex.
///
/// # Safety
/// `v` and `out` must each hold `len` doubles; they may alias.
#[no_mangle]
pub unsafe extern "C" fn ct_project_simplex(v: *const f64, len: usize, out: *mut f64) -> CtStatus {
    guard(|| {
        let u = smooth::project_simplex(slice(v, len, "v")?)?;
        slice_mut(out, len, "out")?.copy_from_slice(&u);
        Ok(())
    })
}

/// Smoothed maximum of `scores`. `weights` may be null; otherwise it receives
/// the `len` maximizing weights.
///
/// # Safety
/// `scores` must hold `len` doubles, `value` be writable and `weights` null
/// or writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ct_smoothed_max(
    scores: *const f64,
    len: usize,
    mu: f64,
    omega: CtOmega,
    value: *mut f64,
    weights: *mut f64,
) -> CtStatus {
    guard(|| {
        let sm = smooth::smoothed_max_with(slice(scores, len, "scores")?, mu, omega.into())?;
        put(value, "value", sm.value)?;
        if !weights.is_null() {
            slice_mut(weights, len, "weights")?.copy_from_slice(&sm.dense(len));
        }
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live handle, `opts` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ct_train(ds: *const CtDataset, opts: *const CtTrainOptions, out: *mut *mut CtModel) -> CtStatus {
    guard(|| {
        let ds = &get(ds, "ds")?.0;
        let o = get(opts, "opts")?;
        let inner = OptConfig {
            memory: o.memory,
            grad_tol: o.grad_tol,
            max_iters: o.max_iters,
            ..OptConfig::default()
        };
        let tcfg = TrainConfig {
            c: o.c,
            loss: o.loss.into(),
            use_bias: o.use_bias,
            max_outer: o.max_outer,
            outer_tol: o.outer_tol,
            inner,
        };
        let scfg = SmoothConfig {
            mu: o.mu,
            n_top: o.n_top,
            omega: o.omega.into(),
            loss: o.smooth_loss.into(),
            c: o.c,
        };
        let method = match o.method {
            CtMethod::Svm => Method::Svm,
            CtMethod::Lsvm => Method::Lsvm,
            CtMethod::Slsvm => Method::Slsvm,
        };
        let init = match o.init {
            CtInit::Cover => InitMode::Cover(o.cover.into()),
            CtInit::Bagavg => InitMode::Bagavg,
            CtInit::Negmine => InitMode::Negmine,
        };
        let trained = pipeline::train(ds, method, &init, &tcfg, &scfg)?;
        put(out, "out", boxed(CtModel(trained.model)))
    })
}

/// Bag label (+1 or -1), best instance id and its score for bag index `bag`.
/// Any output may be null.
///
/// # Safety
/// `model` and `ds` must be live handles; non-null outputs writable.
#[no_mangle]
pub unsafe extern "C" fn ct_model_decision(
    model: *const CtModel,
    ds: *const CtDataset,
    bag: usize,
    label: *mut i32,
    argmax: *mut usize,
    score: *mut f64,
) -> CtStatus {
    guard(|| {
        let ds = &get(ds, "ds")?.0;
        let b = ds
            .bags
            .get(bag)
            .ok_or_else(|| Error::InvalidArgument(format!("bag index {bag} out of range ({} bags)", ds.bags.len())))?;
        let d = decision(&get(model, "model")?.0, b)?;
        if !label.is_null() {
            label.write(d.label.sign() as i32);
        }
        if !argmax.is_null() {
            argmax.write(d.argmax);
        }
        if !score.is_null() {
            score.write(d.score);
        }
        Ok(())
    })
}

/// Bag-level accuracy in percent.
///
/// # Safety
/// `model` and `ds` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ct_model_accuracy(model: *const CtModel, ds: *const CtDataset, out: *mut f64) -> CtStatus {
    guard(|| put(out, "out", bag_accuracy(&get(model, "model")?.0, &get(ds, "ds")?.0)?))
}

/// Feature dimension and whether the model has a bias term.
///
/// # Safety
/// `model` must be a live handle; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn ct_model_shape(model: *const CtModel, dim: *mut usize, has_bias: *mut bool) -> CtStatus {
    guard(|| {
        let m = &get(model, "model")?.0;
        put(dim, "dim", m.dim())?;
        put(has_bias, "has_bias", m.use_bias())
    })
}

/// Copies `w` followed by the bias (when present) into `out`, which must hold
/// `len` doubles with `len` equal to dim plus one if biased.
///
/// # Safety
/// `model` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ct_model_params(model: *const CtModel, out: *mut f64, len: usize) -> CtStatus {
    guard(|| {
        let p = get(model, "model")?.0.params();
        if p.len() != len {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                found: len,
            }
            .into());
        }
        slice_mut(out, len, "out")?.copy_from_slice(&p);
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ct_model_save(model: *const CtModel, path_: *const c_char) -> CtStatus {
    guard(|| Ok(get(model, "model")?.0.save(path(path_)?)?))
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ct_model_load(path_: *const c_char, out: *mut *mut CtModel) -> CtStatus {
    guard(|| {
        let m = Model::load(path(path_)?)?;
        put(out, "out", boxed(CtModel(m)))
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ct_model_free(model: *mut CtModel) {
    free(model)
}
