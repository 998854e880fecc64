//! Bit-exact raster codecs.
//!
//! Binary PPM (P6) and PGM (P5) with maxval 255 are the interchange formats
//! the golden tests pin down: `encode_ppm` quantizes with `round(v * 255)` and
//! emits deterministic bytes, `decode_ppm` maps samples back as `v / 255`
//! exactly. PNG (8-bit grayscale or RGB) is accepted on input for convenience
//! and goes through the same `v / 255` mapping.

use crate::error::{Error, Result};
use crate::image::{AttentionMap, Image};

/// Token reader over a PPM/PGM header: skips whitespace and `#` comments.
struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        HeaderReader { bytes, pos: 0 }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => return,
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::PpmParse("truncated header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::PpmParse(format!("{what} is not a decimal integer")))
    }

    /// Consumes the single whitespace byte separating maxval from the payload.
    fn payload(mut self) -> Result<&'a [u8]> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(&self.bytes[self.pos..])
            }
            _ => Err(Error::PpmParse("missing whitespace before pixel payload".into())),
        }
    }
}

/// Decodes binary P6 PPM (3 channels) or P5 PGM (1 channel) with maxval 255.
/// Samples map to `v / 255` exactly.
pub fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    let mut rd = HeaderReader::new(bytes);
    let magic = rd.token()?;
    let channels = match magic {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(Error::PpmParse(format!(
                "unsupported magic {:?}, expected P5 or P6",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = rd.number("width")?;
    let height = rd.number("height")?;
    let maxval = rd.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::PpmParse("zero image dimension".into()));
    }
    if maxval != 255 {
        return Err(Error::PpmParse(format!("unsupported maxval {maxval}, only 255")));
    }
    let payload = rd.payload()?;
    let expected = width * height * channels;
    if payload.len() < expected {
        return Err(Error::PpmParse(format!(
            "truncated payload: {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let data: Vec<f64> = payload[..expected].iter().map(|&b| b as f64 / 255.0).collect();
    Image::new(height, width, channels, data)
}

/// Encodes one or three channel images as P5/P6 with maxval 255; the
/// quantizer is `round(v * 255)` and output bytes are deterministic.
pub fn encode_ppm(img: &Image) -> Result<Vec<u8>> {
    let magic = match img.channels() {
        1 => "P5",
        3 => "P6",
        c => {
            return Err(Error::UnsupportedFormat(format!(
                "ppm output needs 1 or 3 channels, image has {c}"
            )))
        }
    };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| (v * 255.0).round() as u8));
    Ok(out)
}

/// Decodes an attention map from P5 PGM, values `v / 255`.
pub fn decode_attention_pgm(bytes: &[u8]) -> Result<AttentionMap> {
    let img = decode_ppm(bytes)?;
    if img.channels() != 1 {
        return Err(Error::UnsupportedFormat(
            "attention maps must be single-channel PGM".into(),
        ));
    }
    let (h, w) = (img.height(), img.width());
    AttentionMap::new(h, w, img.into_data())
}

/// Decodes an 8-bit grayscale or RGB PNG.
pub fn decode_png(bytes: &[u8]) -> Result<Image> {
    let dynimg = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::UnsupportedFormat(format!("png decode failed: {e}")))?;
    match dynimg {
        image::DynamicImage::ImageLuma8(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            let data = buf.into_raw().iter().map(|&b| b as f64 / 255.0).collect();
            Image::new(h, w, 1, data)
        }
        image::DynamicImage::ImageRgb8(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            let data = buf.into_raw().iter().map(|&b| b as f64 / 255.0).collect();
            Image::new(h, w, 3, data)
        }
        _ => Err(Error::UnsupportedFormat(
            "only 8-bit grayscale or RGB PNG is accepted".into(),
        )),
    }
}

/// Sniffs the magic bytes and dispatches to the PPM/PGM or PNG decoder.
pub fn decode_auto(bytes: &[u8]) -> Result<Image> {
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        decode_png(bytes)
    } else {
        Err(Error::UnsupportedFormat(
            "unrecognized image format, expected binary PPM/PGM or PNG".into(),
        ))
    }
}
