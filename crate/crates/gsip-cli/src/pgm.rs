//! Binary PGM (P5, maxval 255) reader and writer.
//!
//! Loading maps bytes to samples `byte / 255`; saving quantizes with
//! `round(sample * 255)` clamped to `[0, 255]`, so byte payloads survive a
//! load/save roundtrip exactly.

use anyhow::{bail, Context, Result};
use gsip::ImagePlane;
use std::path::Path;

fn is_pgm_whitespace(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

/// Parse one ASCII integer token, skipping whitespace and `#` comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        while *pos < bytes.len() && is_pgm_whitespace(bytes[*pos]) {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        bail!("malformed PGM header at byte {start}: expected an integer");
    }
    let token = std::str::from_utf8(&bytes[start..*pos]).expect("digits are ascii");
    token
        .parse::<usize>()
        .with_context(|| format!("bad integer in PGM header at byte {start}"))
}

pub fn decode_pgm(bytes: &[u8]) -> Result<ImagePlane> {
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        bail!("malformed PGM header at byte 0: not a binary P5 file");
    }
    let mut pos = 2usize;
    let width = next_token(bytes, &mut pos)?;
    let height = next_token(bytes, &mut pos)?;
    let maxval = next_token(bytes, &mut pos)?;
    if maxval != 255 {
        bail!("unsupported PGM maxval {maxval} (want 255)");
    }
    if pos >= bytes.len() || !is_pgm_whitespace(bytes[pos]) {
        bail!("malformed PGM header at byte {pos}: expected whitespace before payload");
    }
    pos += 1;
    let need = width
        .checked_mul(height)
        .context("PGM dimensions overflow")?;
    let have = bytes.len() - pos;
    if have < need {
        bail!(
            "truncated PGM payload at byte {}: need {need} bytes, have {have}",
            pos + have
        );
    }
    let samples = bytes[pos..pos + need]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    ImagePlane::gray(width, height, samples).map_err(Into::into)
}

pub fn encode_pgm(img: &ImagePlane) -> Result<Vec<u8>> {
    if img.channels() != 1 {
        bail!("PGM output needs a grayscale plane");
    }
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(
        img.samples()
            .iter()
            .map(|&s| (s * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    Ok(out)
}

pub fn load_pgm(path: &Path) -> Result<ImagePlane> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode_pgm(&bytes).with_context(|| format!("parsing {}", path.display()))
}

pub fn save_pgm(img: &ImagePlane, path: &Path) -> Result<()> {
    let bytes = encode_pgm(img)?;
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
