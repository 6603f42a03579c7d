//! Binary PGM (P5) and PPM (P6) codec, 8-bit only.

use std::fs;
use std::path::Path;

use pawprint_core::raster::RasterError;
use pawprint_core::{Channels, RasterImage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    TruncatedPixelData { expected: usize, found: usize },
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u64),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64, PnmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PnmError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PnmError::MalformedHeader(format!("{what} out of range")))
    }
}

pub fn read_pnm(bytes: &[u8]) -> Result<RasterImage, PnmError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => Channels::Gray,
        Some(b"P6") => Channels::Rgb,
        _ => return Err(PnmError::MalformedHeader("expected magic P5 or P6".into())),
    };
    let mut header = Header { bytes, pos: 2 };
    if !header
        .bytes
        .get(2)
        .is_some_and(|b| b.is_ascii_whitespace() || *b == b'#')
    {
        return Err(PnmError::MalformedHeader("no separator after magic".into()));
    }
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PnmError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(PnmError::UnsupportedMaxval(maxval));
    }
    // Exactly one whitespace byte separates maxval from the raster.
    match bytes.get(header.pos) {
        Some(b) if b.is_ascii_whitespace() => header.pos += 1,
        _ => {
            return Err(PnmError::MalformedHeader(
                "no separator after maxval".into(),
            ))
        }
    }
    let expected = usize::try_from(width)
        .ok()
        .zip(usize::try_from(height).ok())
        .and_then(|(w, h)| w.checked_mul(h)?.checked_mul(channels.count()))
        .ok_or_else(|| PnmError::MalformedHeader("dimensions overflow".into()))?;
    let payload = &bytes[header.pos..];
    if payload.len() < expected {
        return Err(PnmError::TruncatedPixelData {
            expected,
            found: payload.len(),
        });
    }
    Ok(RasterImage::new(
        width as usize,
        height as usize,
        channels,
        payload[..expected].to_vec(),
    )?)
}

pub fn write_pnm(image: &RasterImage) -> Vec<u8> {
    let magic = match image.channels() {
        Channels::Gray => "P5",
        Channels::Rgb => "P6",
    };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

/// Extension matching the image's channel layout.
pub fn extension(image: &RasterImage) -> &'static str {
    match image.channels() {
        Channels::Gray => "pgm",
        Channels::Rgb => "ppm",
    }
}

#[derive(Debug, Error)]
pub enum ImageFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Decode { path: String, source: PnmError },
}

pub fn load(path: &Path) -> Result<RasterImage, ImageFileError> {
    let bytes = fs::read(path).map_err(|source| ImageFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_pnm(&bytes).map_err(|source| ImageFileError::Decode {
        path: path.display().to_string(),
        source,
    })
}

pub fn save(path: &Path, image: &RasterImage) -> Result<(), ImageFileError> {
    fs::write(path, write_pnm(image)).map_err(|source| ImageFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn file(header: &str, payload: &[u8]) -> Vec<u8> {
        let mut v = header.as_bytes().to_vec();
        v.extend_from_slice(payload);
        v
    }

    #[test]
    fn smallest_gray_file() {
        let img = read_pnm(&file("P5\n2 1\n255\n", &[0, 255])).unwrap();
        assert_eq!(
            (img.width(), img.height(), img.channels()),
            (2, 1, Channels::Gray)
        );
        assert_eq!(img.pixels(), &[0, 255]);
    }

    #[test]
    fn single_rgb_pixel() {
        let img = read_pnm(&file("P6 1 1 255\n", &[10, 20, 30])).unwrap();
        assert_eq!(img.channels(), Channels::Rgb);
        assert_eq!(img.pixels(), &[10, 20, 30]);
    }

    #[test]
    fn comments_in_header() {
        let img = read_pnm(&file("P5\n# made by hand\n2 # width\n1\n255\n", &[7, 8])).unwrap();
        assert_eq!(img.pixels(), &[7, 8]);
    }

    #[test]
    fn payload_byte_that_looks_like_whitespace() {
        let img = read_pnm(&file("P5\n2 1\n255\n", b"\n ")).unwrap();
        assert_eq!(img.pixels(), b"\n ");
    }

    #[test]
    fn rejections() {
        assert!(matches!(
            read_pnm(&file("P5\n3 2\n255\n", &[0; 5])),
            Err(PnmError::TruncatedPixelData {
                expected: 6,
                found: 5
            })
        ));
        assert!(matches!(
            read_pnm(&file("P5\n1 1\n65535\n", &[0, 0])),
            Err(PnmError::UnsupportedMaxval(65535))
        ));
        for bad in [
            "P2\n1 1\n255\n",
            "P5\n1\n",
            "P5\nx 1\n255\n",
            "P5\n0 1\n255\n",
            "P51 1 255\n",
        ] {
            assert!(
                matches!(
                    read_pnm(&file(bad, &[0])),
                    Err(PnmError::MalformedHeader(_))
                ),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn written_sizes() {
        let rgb = RasterImage::filled(1, 1, Channels::Rgb, 0).unwrap();
        let bytes = write_pnm(&rgb);
        assert_eq!(bytes, b"P6\n1 1\n255\n\0\0\0");

        let gray = RasterImage::filled(250, 250, Channels::Gray, 9).unwrap();
        let bytes = write_pnm(&gray);
        let header = b"P5\n250 250\n255\n";
        assert_eq!(bytes.len() - header.len(), 250 * 250);
        assert!(bytes.starts_with(header));
    }

    fn image() -> impl Strategy<Value = RasterImage> {
        (1usize..9, 1usize..9, prop::bool::ANY).prop_flat_map(|(w, h, rgb)| {
            let channels = if rgb { Channels::Rgb } else { Channels::Gray };
            prop::collection::vec(any::<u8>(), w * h * channels.count())
                .prop_map(move |px| RasterImage::new(w, h, channels, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn round_trip(img in image()) {
            prop_assert_eq!(read_pnm(&write_pnm(&img)).unwrap(), img);
        }
    }
}
