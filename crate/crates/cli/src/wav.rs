//! Minimal RIFF/WAVE writer: mono, 32-bit IEEE float (format code 3).
//! Non-PCM streams carry a `fact` chunk with the sample count.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<(), String> {
    let file = File::create(path).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    let mut w = BufWriter::new(file);
    let data_len = 4 * samples.len() as u32;
    // "WAVE" + fmt(8+16) + fact(8+4) + data header(8) = 48 bytes.
    let riff_len = 48 + data_len;
    let mut emit = || -> std::io::Result<()> {
        w.write_all(b"RIFF")?;
        w.write_all(&riff_len.to_le_bytes())?;
        w.write_all(b"WAVE")?;
        w.write_all(b"fmt ")?;
        w.write_all(&16u32.to_le_bytes())?;
        w.write_all(&3u16.to_le_bytes())?; // IEEE float
        w.write_all(&1u16.to_le_bytes())?; // mono
        w.write_all(&sample_rate.to_le_bytes())?;
        w.write_all(&(4 * sample_rate).to_le_bytes())?; // byte rate
        w.write_all(&4u16.to_le_bytes())?; // block align
        w.write_all(&32u16.to_le_bytes())?; // bits per sample
        w.write_all(b"fact")?;
        w.write_all(&4u32.to_le_bytes())?;
        w.write_all(&(samples.len() as u32).to_le_bytes())?;
        w.write_all(b"data")?;
        w.write_all(&data_len.to_le_bytes())?;
        for &s in samples {
            w.write_all(&(s as f32).to_le_bytes())?;
        }
        w.flush()
    };
    emit().map_err(|e| format!("cannot write {}: {e}", path.display()))
}
