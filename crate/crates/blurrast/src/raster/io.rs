//! Image output: 8-bit RGBA PNG (rgb gamma-encoded with x^(1/2.2), straight
//! alpha) and the raw float "RFI" format used for bit-exact golden tests.
//!
//! RFI layout: 16-byte header (magic "RFI1", u32 width, u32 height,
//! u32 channels, little-endian) followed by row-major f32 little-endian
//! samples, channel-interleaved.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::BlurFrame;

pub const RFI_MAGIC: &[u8; 4] = b"RFI1";

pub fn write_rfi(path: &Path, width: usize, height: usize, channels: usize, data: &[f32]) -> Result<()> {
    if data.len() != width * height * channels {
        return Err(Error::DimensionMismatch {
            expected: (width * height * channels, channels),
            got: (data.len(), channels),
        });
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(RFI_MAGIC)?;
    out.write_all(&(width as u32).to_le_bytes())?;
    out.write_all(&(height as u32).to_le_bytes())?;
    out.write_all(&(channels as u32).to_le_bytes())?;
    for v in data {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_rfi(path: &Path) -> Result<(usize, usize, usize, Vec<f32>)> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut header = [0u8; 16];
    file.read_exact(&mut header)?;
    if &header[0..4] != RFI_MAGIC {
        return Err(Error::Parse { line: 0, msg: "not an RFI file (bad magic)".into() });
    }
    let width = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let channels = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let n = width * height * channels;
    let mut bytes = vec![0u8; n * 4];
    file.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok((width, height, channels, data))
}

impl BlurFrame {
    /// Interleaved RGBA f32 buffer (the RFI payload).
    pub fn to_rgba_f32(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.width * self.height * 4);
        for i in 0..self.width * self.height {
            out.push(self.rgb[i][0] as f32);
            out.push(self.rgb[i][1] as f32);
            out.push(self.rgb[i][2] as f32);
            out.push(self.alpha[i] as f32);
        }
        out
    }

    pub fn write_rfi(&self, path: &Path) -> Result<()> {
        write_rfi(path, self.width, self.height, 4, &self.to_rgba_f32())
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let mut img = image::RgbaImage::new(self.width as u32, self.height as u32);
        for (i, px) in img.pixels_mut().enumerate() {
            let enc = |x: f64| (x.clamp(0.0, 1.0).powf(1.0 / 2.2) * 255.0).round() as u8;
            px.0 = [
                enc(self.rgb[i][0]),
                enc(self.rgb[i][1]),
                enc(self.rgb[i][2]),
                (self.alpha[i].clamp(0.0, 1.0) * 255.0).round() as u8,
            ];
        }
        img.save(path).map_err(|e| Error::Image(e.to_string()))
    }
}

/// Load RGBA target images for the optimizer: RFI verbatim, PNG decoded and
/// linearized with x^2.2 on the color channels.
pub fn load_rgba(path: &Path) -> Result<BlurFrame> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if ext.eq_ignore_ascii_case("rfi") {
        let (w, h, c, data) = read_rfi(path)?;
        if c != 4 {
            return Err(Error::Parse { line: 0, msg: format!("expected 4 channels, got {c}") });
        }
        let mut rgb = vec![[0.0f64; 3]; w * h];
        let mut alpha = vec![0.0f64; w * h];
        for i in 0..w * h {
            rgb[i] = [data[i * 4] as f64, data[i * 4 + 1] as f64, data[i * 4 + 2] as f64];
            alpha[i] = data[i * 4 + 3] as f64;
        }
        Ok(BlurFrame { width: w, height: h, rgb, alpha, n_segments: 0, samples_per_segment: 0 })
    } else {
        let img = image::open(path).map_err(|e| Error::Image(e.to_string()))?.to_rgba8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut rgb = vec![[0.0f64; 3]; w * h];
        let mut alpha = vec![0.0f64; w * h];
        for (i, px) in img.pixels().enumerate() {
            let dec = |x: u8| (x as f64 / 255.0).powf(2.2);
            rgb[i] = [dec(px.0[0]), dec(px.0[1]), dec(px.0[2])];
            alpha[i] = px.0[3] as f64 / 255.0;
        }
        Ok(BlurFrame { width: w, height: h, rgb, alpha, n_segments: 0, samples_per_segment: 0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rfi_roundtrip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.rfi");
        let data: Vec<f32> = (0..3 * 2 * 4).map(|i| (i as f32).sin()).collect();
        write_rfi(&path, 3, 2, 4, &data).unwrap();
        let (w, h, c, back) = read_rfi(&path).unwrap();
        assert_eq!((w, h, c), (3, 2, 4));
        assert_eq!(back.iter().map(|f| f.to_bits()).collect::<Vec<_>>(),
                   data.iter().map(|f| f.to_bits()).collect::<Vec<_>>());
        // header is exactly 16 bytes + payload
        let len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(len as usize, 16 + data.len() * 4);
    }

    #[test]
    fn rfi_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.rfi");
        std::fs::write(&path, b"NOPE0000000000000000").unwrap();
        assert!(read_rfi(&path).is_err());
    }
}
