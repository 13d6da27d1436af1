//! C ABI over `lfx-core`.
//!
//! Objects cross the boundary as opaque heap handles that the caller frees
//! with the matching `*_free`. Every fallible call returns an [`LfxStatus`];
//! on failure a message is available from [`lfx_last_error`] on the same
//! thread until the next failing call. Panics are caught and reported as
//! `LFX_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use lfx_core::features::{write_tensor, Tensor};
use lfx_core::io::{load_disparity, load_image, save_image, BitDepth};
use lfx_core::labelfill::dilate_fill;
use lfx_core::metrics::{psnr, ssim};
use lfx_core::sdr::sdr_render;
use lfx_core::{DisparityMap, Error, Grid, Image, LabelMap, Mask};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LfxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    MissingFile = 3,
    UnsupportedFormat = 4,
    DimensionMismatch = 5,
    NonFiniteValues = 6,
    EmptyMask = 7,
    Io = 8,
    Internal = 9,
}

/// Owned image (1 or 3 channels, row-major, channel-last, `f64`).
pub struct LfxImage {
    inner: Image,
}

/// Owned disparity map.
pub struct LfxDisparity {
    inner: DisparityMap,
}

/// Owned validity mask.
pub struct LfxMask {
    inner: Mask,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> LfxStatus {
    match err {
        Error::MissingFile(_) | Error::MissingView(_) => LfxStatus::MissingFile,
        Error::UnsupportedFormat(_) | Error::CorruptHeader(_) | Error::Json(_) => LfxStatus::UnsupportedFormat,
        Error::DimensionMismatch { .. } | Error::ImageSmallerThanWindow { .. } | Error::PatchTooLarge { .. } => {
            LfxStatus::DimensionMismatch
        }
        Error::NonFiniteValues(_) => LfxStatus::NonFiniteValues,
        Error::EmptyMask => LfxStatus::EmptyMask,
        Error::Io(_) => LfxStatus::Io,
        _ => LfxStatus::InvalidArgument,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LfxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LfxStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            LfxStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            LfxStatus::Internal
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::InvalidArgument("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn checked_len(parts: &[usize]) -> Result<usize, Fail> {
    parts
        .iter()
        .try_fold(1usize, |acc, &p| acc.checked_mul(p))
        .ok_or_else(|| Fail::Core(Error::InvalidArgument("size overflow".into())))
}

/// Message of the last failure on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lfx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lfx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `width * height * channels` values from `data`.
///
/// # Safety
/// `data` must point to that many readable `double`s; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfx_image_new(
    width: usize,
    height: usize,
    channels: usize,
    data: *const f64,
    out: *mut *mut LfxImage,
) -> LfxStatus {
    guard(|| {
        let n = checked_len(&[width, height, channels])?;
        let src = borrow(data, "data")?;
        let values = slice::from_raw_parts(src, n).to_vec();
        put(out, LfxImage {
            inner: Image::new(width, height, channels, values)?,
        })
    })
}

/// Loads an 8/16-bit gray or RGB PNG scaled to `[0, 1]`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfx_image_load(path: *const c_char, out: *mut *mut LfxImage) -> LfxStatus {
    guard(|| {
        let p = path_arg(path)?;
        put(out, LfxImage { inner: load_image(p)? })
    })
}

/// Saves as PNG, 16-bit if `sixteen_bit`, clamping to `[0, 1]`.
///
/// # Safety
/// `image` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lfx_image_save(image: *const LfxImage, path: *const c_char, sixteen_bit: bool) -> LfxStatus {
    guard(|| {
        let img = borrow(image, "image")?;
        let depth = if sixteen_bit { BitDepth::Sixteen } else { BitDepth::Eight };
        Ok(save_image(&img.inner, path_arg(path)?, depth)?)
    })
}

/// Writes the image as an `LFT1` tensor of shape (height, width, channels).
///
/// # Safety
/// `image` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lfx_image_write_tensor(image: *const LfxImage, path: *const c_char) -> LfxStatus {
    guard(|| {
        let img = borrow(image, "image")?;
        Ok(write_tensor(&Tensor::from_image(&img.inner), path_arg(path)?)?)
    })
}

/// # Safety
/// `image` must be a live handle or NULL (then 0 is returned).
#[no_mangle]
pub unsafe extern "C" fn lfx_image_width(image: *const LfxImage) -> usize {
    image.as_ref().map_or(0, |i| i.inner.width())
}

/// # Safety
/// `image` must be a live handle or NULL (then 0 is returned).
#[no_mangle]
pub unsafe extern "C" fn lfx_image_height(image: *const LfxImage) -> usize {
    image.as_ref().map_or(0, |i| i.inner.height())
}

/// # Safety
/// `image` must be a live handle or NULL (then 0 is returned).
#[no_mangle]
pub unsafe extern "C" fn lfx_image_channels(image: *const LfxImage) -> usize {
    image.as_ref().map_or(0, |i| i.inner.channels())
}

/// Copies pixel data into `dst`; `len` must equal width * height * channels.
///
/// # Safety
/// `image` must be a live handle; `dst` must hold `len` writable `double`s.
#[no_mangle]
pub unsafe extern "C" fn lfx_image_copy_data(image: *const LfxImage, dst: *mut f64, len: usize) -> LfxStatus {
    guard(|| {
        let img = borrow(image, "image")?;
        if dst.is_null() {
            return Err(Fail::Null("dst"));
        }
        let data = img.inner.data();
        if len != data.len() {
            return Err(Error::InvalidArgument(format!("buffer holds {len} values, image has {}", data.len())).into());
        }
        slice::from_raw_parts_mut(dst, len).copy_from_slice(data);
        Ok(())
    })
}

/// # Safety
/// `image` must come from this library and not be used afterwards. NULL is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn lfx_image_free(image: *mut LfxImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Copies `width * height` values from `data`.
///
/// # Safety
/// `data` must point to that many readable `double`s; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfx_disparity_new(
    width: usize,
    height: usize,
    data: *const f64,
    out: *mut *mut LfxDisparity,
) -> LfxStatus {
    guard(|| {
        let n = checked_len(&[width, height])?;
        let src = borrow(data, "data")?;
        let grid = Grid::new(width, height, slice::from_raw_parts(src, n).to_vec())?;
        grid.ensure_finite()?;
        put(out, LfxDisparity { inner: grid })
    })
}

/// Loads a single-channel PFM disparity map.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfx_disparity_load(path: *const c_char, out: *mut *mut LfxDisparity) -> LfxStatus {
    guard(|| {
        let p = path_arg(path)?;
        put(out, LfxDisparity {
            inner: load_disparity(p)?,
        })
    })
}

/// # Safety
/// `disparity` must come from this library and not be used afterwards.
/// NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn lfx_disparity_free(disparity: *mut LfxDisparity) {
    if !disparity.is_null() {
        drop(Box::from_raw(disparity));
    }
}

/// Number of set pixels.
///
/// # Safety
/// `mask` must be a live handle or NULL (then 0 is returned).
#[no_mangle]
pub unsafe extern "C" fn lfx_mask_count(mask: *const LfxMask) -> usize {
    mask.as_ref().map_or(0, |m| m.inner.count_set())
}

/// Copies the mask as 0/1 bytes; `len` must equal width * height.
///
/// # Safety
/// `mask` must be a live handle; `dst` must hold `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lfx_mask_copy(mask: *const LfxMask, dst: *mut u8, len: usize) -> LfxStatus {
    guard(|| {
        let m = borrow(mask, "mask")?;
        if dst.is_null() {
            return Err(Fail::Null("dst"));
        }
        if len != m.inner.len() {
            return Err(Error::InvalidArgument(format!("buffer holds {len} bytes, mask has {}", m.inner.len())).into());
        }
        let out = slice::from_raw_parts_mut(dst, len);
        for (o, &b) in out.iter_mut().zip(m.inner.data()) {
            *o = u8::from(b);
        }
        Ok(())
    })
}

/// # Safety
/// `mask` must come from this library and not be used afterwards. NULL is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn lfx_mask_free(mask: *mut LfxMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// Layered render of `image` moved by `shift` views, using `layers`
/// disparity layers. Both outputs are new handles.
///
/// # Safety
/// Handles must be live; `out_image` and `out_mask` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lfx_sdr_render(
    image: *const LfxImage,
    disparity: *const LfxDisparity,
    shift: f64,
    layers: usize,
    out_image: *mut *mut LfxImage,
    out_mask: *mut *mut LfxMask,
) -> LfxStatus {
    guard(|| {
        let img = borrow(image, "image")?;
        let disp = borrow(disparity, "disparity")?;
        if out_image.is_null() || out_mask.is_null() {
            return Err(Fail::Null("out"));
        }
        let (rendered, mask) = sdr_render(&img.inner, &disp.inner, shift, layers)?;
        put(out_image, LfxImage { inner: rendered })?;
        put(out_mask, LfxMask { inner: mask })
    })
}

/// PSNR in dB (capped at 99), restricted to `mask` unless it is NULL.
///
/// # Safety
/// `a` and `b` must be live handles, `mask` live or NULL, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lfx_psnr(a: *const LfxImage, b: *const LfxImage, mask: *const LfxMask, out: *mut f64) -> LfxStatus {
    guard(|| {
        let (a, b) = (borrow(a, "a")?, borrow(b, "b")?);
        let m = mask.as_ref().map(|m| &m.inner);
        let v = psnr(&a.inner, &b.inner, m)?;
        *out.as_mut().ok_or(Fail::Null("out"))? = v;
        Ok(())
    })
}

/// Mean SSIM of the channel-mean grey images.
///
/// # Safety
/// `a` and `b` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lfx_ssim(a: *const LfxImage, b: *const LfxImage, out: *mut f64) -> LfxStatus {
    guard(|| {
        let (a, b) = (borrow(a, "a")?, borrow(b, "b")?);
        let v = ssim(&a.inner, &b.inner)?;
        *out.as_mut().ok_or(Fail::Null("out"))? = v;
        Ok(())
    })
}

/// Max-label dilation of a `width * height` label map (0 = ambiguous) into
/// `out`. `converged` (may be NULL) reports whether no zeros remain.
///
/// # Safety
/// `labels` must hold `width * height` readable values and `out` as many
/// writable ones.
#[no_mangle]
pub unsafe extern "C" fn lfx_dilate_fill(
    labels: *const u16,
    width: usize,
    height: usize,
    layer_count: usize,
    window: usize,
    max_iters: usize,
    out: *mut u16,
    converged: *mut bool,
) -> LfxStatus {
    guard(|| {
        let n = checked_len(&[width, height])?;
        let src = borrow(labels, "labels")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let grid = Grid::new(width, height, slice::from_raw_parts(src, n).to_vec())?;
        let result = dilate_fill(&LabelMap::new(grid, layer_count)?, window, max_iters)?;
        slice::from_raw_parts_mut(out, n).copy_from_slice(result.labels.labels().data());
        if let Some(c) = converged.as_mut() {
            *c = result.converged;
        }
        Ok(())
    })
}
