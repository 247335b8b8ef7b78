//! 8-bit binary PGM (P5) and PPM (P6) images as tensors.
//!
//! A grayscale image becomes an `H x W` tensor and a color image `H x W x 3`,
//! entry `(row, col, channel)`, with bytes scaled to `[0, 1]`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use image::codecs::pnm::{PnmDecoder, PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ColorType, DynamicImage, ExtendedColorType, ImageEncoder};
use tensor_ring::DenseTensor;

use crate::error::{HarnessError, Result};

/// Whether `path` has a `.pgm` or `.ppm` extension.
pub fn is_image_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("pgm" | "ppm")
    )
}

pub fn load_image(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let mut file = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 2];
    file.read_exact(&mut magic)
        .map_err(|_| HarnessError::Format("file too short for a PNM header".into()))?;
    if &magic != b"P5" && &magic != b"P6" {
        return Err(HarnessError::Format(format!(
            "unsupported image format {:?}; only binary P5/P6 are read",
            String::from_utf8_lossy(&magic)
        )));
    }
    file.seek(SeekFrom::Start(0))?;
    let decoded = DynamicImage::from_decoder(PnmDecoder::new(file)?)?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    match decoded {
        DynamicImage::ImageLuma8(img) => {
            let raw = img.into_raw();
            let mut data = vec![0.0; h * w];
            for r in 0..h {
                for c in 0..w {
                    data[r + c * h] = f64::from(raw[c + r * w]) / 255.0;
                }
            }
            Ok(DenseTensor::from_dims(vec![h, w], data)?)
        }
        DynamicImage::ImageRgb8(img) => {
            let raw = img.into_raw();
            let mut data = vec![0.0; h * w * 3];
            for r in 0..h {
                for c in 0..w {
                    for ch in 0..3 {
                        data[r + c * h + ch * h * w] = f64::from(raw[ch + 3 * (c + r * w)]) / 255.0;
                    }
                }
            }
            Ok(DenseTensor::from_dims(vec![h, w, 3], data)?)
        }
        other => Err(HarnessError::Format(format!(
            "unsupported pixel type {:?}; only 8-bit images are read",
            other.color()
        ))),
    }
}

fn quantize(v: f64) -> u8 {
    // NaN maps to 0.
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes `H x W` as P5 or `H x W x 3` as P6, clamping to `[0, 1]` first.
pub fn write_image(w: &mut impl Write, t: &DenseTensor) -> Result<()> {
    let dims = t.dims();
    let (h, wd, channels) = match dims {
        [h, w] => (*h, *w, 1),
        [h, w, 3] => (*h, *w, 3),
        _ => {
            return Err(HarnessError::InvalidArgument(format!(
                "an image tensor must be H x W or H x W x 3, got {dims:?}"
            )))
        }
    };
    let data = t.data();
    let mut raw = vec![0u8; h * wd * channels];
    for r in 0..h {
        for c in 0..wd {
            for ch in 0..channels {
                raw[ch + channels * (c + r * wd)] = quantize(data[r + c * h + ch * h * wd]);
            }
        }
    }
    let (subtype, color) = if channels == 1 {
        (PnmSubtype::Graymap(SampleEncoding::Binary), ColorType::L8)
    } else {
        (PnmSubtype::Pixmap(SampleEncoding::Binary), ColorType::Rgb8)
    };
    let to_u32 = |v: usize| {
        u32::try_from(v).map_err(|_| HarnessError::InvalidArgument("image too large".into()))
    };
    PnmEncoder::new(&mut *w).with_subtype(subtype).write_image(
        &raw,
        to_u32(wd)?,
        to_u32(h)?,
        ExtendedColorType::from(color),
    )?;
    Ok(())
}

pub fn save_image(t: &DenseTensor, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_image(&mut w, t)?;
    w.flush()?;
    Ok(())
}
