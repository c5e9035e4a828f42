//! Binary PGM (P5) and 8-bit PNG reading and writing.
//!
//! Files are identified by their magic bytes on load and by extension on
//! save. RGB(A) and palette PNGs are reduced to luminance with Rec.601
//! weights; a warning is logged when that happens.

use std::fs;
use std::io::{BufWriter, Cursor, Write};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::image::{quantize, GrayImage};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "pgm" => Ok(ImageFormat::Pgm),
            "png" => Ok(ImageFormat::Png),
            _ => Err(Error::UnknownExtension(ext)),
        }
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Writes `img` in the format selected by the file extension.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = ImageFormat::from_path(path)?;
    let bytes = encode(img, format)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.len() >= 2 && bytes[0] == b'P' && bytes[1].is_ascii_digit() {
        Err(Error::UnsupportedFormat(format!(
            "netpbm variant P{} (only binary P5 is supported)",
            bytes[1] as char
        )))
    } else {
        Err(Error::UnsupportedFormat("not a PGM or PNG file".into()))
    }
}

pub fn encode(img: &GrayImage, format: ImageFormat) -> Result<Vec<u8>> {
    match format {
        ImageFormat::Pgm => Ok(encode_pgm(img)),
        ImageFormat::Png => encode_png(img),
    }
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.pixels());
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
        skip_whitespace_and_comments(bytes, &mut pos);
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Decode(format!("PGM header: missing {name}")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap_or_default();
        fields[i] = text
            .parse()
            .map_err(|_| Error::Decode(format!("PGM header: {name} {text:?} out of range")))?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Decode("PGM header: missing separator before raster".into()));
    }
    pos += 1;

    let [width, height, maxval] = fields;
    if maxval > 255 {
        return Err(Error::UnsupportedBitDepth(16));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    let (width, height) = (width as usize, height as usize);
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::Decode("PGM dimensions overflow".into()))?;
    let raster = &bytes[pos..];
    if raster.len() < count {
        return Err(Error::Decode(format!(
            "PGM raster truncated: expected {count} bytes, found {}",
            raster.len()
        )));
    }
    GrayImage::new(width, height, raster[..count].to_vec())
}

fn skip_whitespace_and_comments(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b'#' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            b if b.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
}

pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(
            BufWriter::new(&mut out),
            img.width() as u32,
            img.height() as u32,
        );
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Encode(e.to_string()))?;
        writer
            .write_image_data(img.pixels())
            .map_err(|e| Error::Encode(e.to_string()))?;
        writer.finish().map_err(|e| Error::Encode(e.to_string()))?;
    }
    out.flush().ok();
    Ok(out)
}

pub fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Decode(e.to_string()))?;
    let depth = reader.info().bit_depth;
    if depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedBitDepth(depth as u8));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Decode("PNG too large".into()))?;
    let mut buf = vec![0; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Decode(e.to_string()))?;
    let (width, height) = (frame.width as usize, frame.height as usize);
    let channels = frame.color_type.samples();
    let pixels: Vec<u8> = match frame.color_type {
        png::ColorType::Grayscale => buf_rows(&buf, &frame).flatten().copied().collect(),
        png::ColorType::GrayscaleAlpha => {
            warn!("PNG has an alpha channel; it is discarded");
            buf_rows(&buf, &frame)
                .flat_map(|row| row.chunks_exact(2).map(|px| px[0]))
                .collect()
        }
        png::ColorType::Rgb | png::ColorType::Rgba | png::ColorType::Indexed => {
            warn!(
                "PNG is {:?}; converting to grayscale with Rec.601 luminance",
                reader.info().color_type
            );
            buf_rows(&buf, &frame)
                .flat_map(|row| row.chunks_exact(channels).map(|px| rec601(px[0], px[1], px[2])))
                .collect()
        }
    };
    GrayImage::new(width, height, pixels)
}

fn buf_rows<'a>(buf: &'a [u8], frame: &png::OutputInfo) -> impl Iterator<Item = &'a [u8]> {
    let row_bytes = frame.width as usize * frame.color_type.samples();
    buf.chunks(frame.line_size)
        .take(frame.height as usize)
        .map(move |line| &line[..row_bytes])
}

/// Rec.601 luma, rounded half away from zero.
pub fn rec601(r: u8, g: u8, b: u8) -> u8 {
    quantize(0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
}
