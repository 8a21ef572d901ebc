//! Binary netpbm images: 8-bit PGM (P5) for frames, PPM (P6) as decoder output.

use std::fs;
use std::path::Path;

use super::CorpusError;

/// Rec. 601 luma of an RGB triple, rounded to the nearest intensity.
pub fn luma_601(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round().clamp(0.0, 255.0) as u8
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    data_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, String> {
    if bytes.len() < 2 {
        return Err("file too short".into());
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and '#' comments
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err("expected a number in header".into());
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| "header number out of range".to_string())?;
    }
    // exactly one whitespace byte before the raster
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        _ => return Err("missing separator before raster".into()),
    }
    Ok(Header {
        magic,
        width: fields[0],
        height: fields[1],
        maxval: fields[2],
        data_offset: pos,
    })
}

fn read_netpbm(path: &Path) -> Result<(Header, Vec<u8>), CorpusError> {
    let bytes = fs::read(path).map_err(|e| CorpusError::io(path, e))?;
    let malformed = |reason: String| CorpusError::MalformedFrame {
        path: path.to_path_buf(),
        reason,
    };
    let header = parse_header(&bytes).map_err(malformed)?;
    if header.maxval == 0 || header.maxval > 255 {
        return Err(malformed(format!("unsupported maxval {}", header.maxval)));
    }
    if header.width == 0 || header.height == 0 {
        return Err(malformed("zero-sized image".into()));
    }
    let channels = match &header.magic {
        b"P5" => 1,
        b"P6" => 3,
        m => return Err(malformed(format!("unsupported magic {:?}", String::from_utf8_lossy(m)))),
    };
    let need = header.width * header.height * channels;
    let raster = &bytes[header.data_offset..];
    if raster.len() < need {
        return Err(malformed(format!("raster has {} bytes, expected {need}", raster.len())));
    }
    let mut data = raster[..need].to_vec();
    if header.maxval != 255 {
        let max = header.maxval as u32;
        for v in &mut data {
            *v = ((u32::from(*v).min(max) * 255 + max / 2) / max) as u8;
        }
    }
    Ok((header, data))
}

/// Read a frame image. PPM input is converted to luma with Rec. 601 weights.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>), CorpusError> {
    let (header, data) = read_netpbm(path)?;
    let pixels = if &header.magic == b"P6" {
        data.chunks_exact(3).map(|c| luma_601(c[0], c[1], c[2])).collect()
    } else {
        data
    };
    Ok((header.width, header.height, pixels))
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<(), CorpusError> {
    assert_eq!(pixels.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    fs::write(path, out).map_err(|e| CorpusError::io(path, e))
}
