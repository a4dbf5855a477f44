//! Binary PGM (P5) and PPM (P6) with maxval 255.

use std::fs;
use std::path::{Path, PathBuf};

use super::image::RasterImage;
use crate::error::{Error, Result};

pub fn decode(bytes: &[u8]) -> Result<RasterImage> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::TruncatedFile {
                expected: pos as u64 + 1,
                actual: bytes.len() as u64,
            });
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        _ => {
            return Err(Error::BadMagic {
                found: magic.into_bytes(),
            })
        }
    };
    let mut number = |what: &str| -> Result<usize> {
        let t = token()?;
        t.parse()
            .map_err(|_| Error::schema(None, None, format!("invalid {what} '{t}' in PNM header")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(Error::schema(None, None, format!("only maxval 255 is supported, got {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let start = pos + 1;
    let len = width * height * channels;
    let available = bytes.len().saturating_sub(start);
    if available < len {
        return Err(Error::TruncatedFile {
            expected: (start + len) as u64,
            actual: bytes.len() as u64,
        });
    }
    RasterImage::new(width, height, channels, bytes[start..start + len].to_vec())
}

pub fn encode(img: &RasterImage) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

pub fn read_image(path: &Path) -> Result<RasterImage> {
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_image(img: &RasterImage, path: &Path) -> Result<()> {
    fs::write(path, encode(img)).map_err(|e| Error::io(path, e))
}

/// All `.pgm`/`.ppm` files in `dir`, sorted by file name.
pub fn image_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("pgm" | "ppm")) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

pub fn read_image_dir(dir: &Path) -> Result<Vec<RasterImage>> {
    let paths = image_paths(dir)?;
    if paths.is_empty() {
        return Err(Error::EmptyInput(format!("no .pgm/.ppm images in {}", dir.display())));
    }
    paths.iter().map(|p| read_image(p)).collect()
}
