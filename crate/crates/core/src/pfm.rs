//! Portable float map (PFM) encoding.
//!
//! Files are written little-endian (scale `-1.0`) with rows stored bottom to
//! top as the format prescribes. Both byte orders are accepted on read.
//! In memory, data is row-major from the top row.

use std::io::{BufRead, Cursor, Read};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PfmImage {
    pub width: u32,
    pub height: u32,
    /// 3 for `PF` (RGB), 1 for `Pf` (grayscale).
    pub channels: usize,
    pub data: Vec<f32>,
}

pub fn encode(img: &PfmImage) -> Result<Vec<u8>> {
    let magic = match img.channels {
        3 => "PF",
        1 => "Pf",
        n => return Err(Error::Pfm(format!("unsupported channel count {n}"))),
    };
    let row = img.width as usize * img.channels;
    if img.data.len() != row * img.height as usize {
        return Err(Error::Pfm(format!(
            "{} samples for {}x{}x{}",
            img.data.len(),
            img.width,
            img.height,
            img.channels
        )));
    }
    let header = format!("{magic}\n{} {}\n-1.0\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.data.len() * 4);
    out.extend_from_slice(header.as_bytes());
    if row > 0 {
        for line in img.data.chunks_exact(row).rev() {
            for v in line {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn header_line<R: BufRead>(r: &mut R) -> Result<String> {
    let mut line = String::new();
    r.read_line(&mut line)
        .map_err(|e| Error::Pfm(format!("reading header: {e}")))?;
    if !line.ends_with('\n') {
        return Err(Error::Pfm("truncated header".into()));
    }
    Ok(line.trim().to_string())
}

pub fn decode(bytes: &[u8]) -> Result<PfmImage> {
    let mut r = Cursor::new(bytes);
    let channels = match header_line(&mut r)?.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(Error::Pfm(format!("bad magic {other:?}"))),
    };
    let dims = header_line(&mut r)?;
    let mut parts = dims.split_whitespace().map(str::parse::<u32>);
    let (width, height) = match (parts.next(), parts.next(), parts.next()) {
        (Some(Ok(w)), Some(Ok(h)), None) => (w, h),
        _ => return Err(Error::Pfm(format!("bad dimensions line {dims:?}"))),
    };
    let scale: f32 = header_line(&mut r)?
        .parse()
        .map_err(|_| Error::Pfm("bad scale line".into()))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Pfm(format!("bad scale {scale}")));
    }
    let little = scale < 0.0;
    let row = width as usize * channels;
    let n = row * height as usize;
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)
        .map_err(|e| Error::Pfm(format!("reading body: {e}")))?;
    if raw.len() != n * 4 {
        return Err(Error::Pfm(format!(
            "expected {} bytes of samples, found {}",
            n * 4,
            raw.len()
        )));
    }
    let samples: Vec<f32> = raw
        .chunks_exact(4)
        .map(|b| {
            let b = [b[0], b[1], b[2], b[3]];
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    let mut data = Vec::with_capacity(n);
    if row > 0 {
        for line in samples.chunks_exact(row).rev() {
            data.extend_from_slice(line);
        }
    }
    Ok(PfmImage {
        width,
        height,
        channels,
        data,
    })
}
