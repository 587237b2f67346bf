//! On-disk formats: raw float32 model volumes with sidecar text headers,
//! iteration logs and diagnostic CSVs.

use crate::error::{Error, Result};
use crate::inversion::IterationRecord;
use crate::scalar::Real;
use crate::vol::Vol;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

/// Sidecar header describing a raw volume file.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeHeader {
    pub n: [usize; 3],
    /// Per-axis spacings; a single entry means uniform.
    pub d: [Vec<f64>; 3],
    pub units: String,
}

fn header_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".hdr");
    PathBuf::from(os)
}

/// Write a volume as little-endian float32, x-fastest, with its header.
pub fn write_volume<T: Real>(path: &Path, vol: &Vol<T>, header: &VolumeHeader) -> Result<()> {
    let (n1, n2, n3) = vol.dims();
    if [n1, n2, n3] != header.n {
        return Err(Error::File("header dims do not match volume".into()));
    }
    let mut bytes = Vec::with_capacity(vol.len() * 4);
    for &v in &vol.data {
        bytes.extend_from_slice(&(v.f64() as f32).to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&bytes)?;

    let mut h = String::new();
    h.push_str(&format!("n1 {}\nn2 {}\nn3 {}\n", n1, n2, n3));
    for (axis, d) in header.d.iter().enumerate() {
        h.push_str(&format!("d{} ", axis + 1));
        let parts: Vec<String> = d.iter().map(|v| format!("{v:e}")).collect();
        h.push_str(&parts.join(" "));
        h.push('\n');
    }
    h.push_str(&format!("units {}\n", header.units));
    h.push_str("dtype float32-le\norder x-fastest\n");
    std::fs::write(header_path(path), h)?;
    Ok(())
}

/// Read a raw float32 volume and its sidecar header.
pub fn read_volume<T: Real>(path: &Path) -> Result<(Vol<T>, VolumeHeader)> {
    let htext = std::fs::read_to_string(header_path(path))
        .map_err(|e| Error::File(format!("cannot read header for {path:?}: {e}")))?;
    let mut n = [0usize; 3];
    let mut d: [Vec<f64>; 3] = [vec![], vec![], vec![]];
    let mut units = String::from("unknown");
    for line in htext.lines() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("n1") => n[0] = parse_usize(tok.next(), path)?,
            Some("n2") => n[1] = parse_usize(tok.next(), path)?,
            Some("n3") => n[2] = parse_usize(tok.next(), path)?,
            Some("d1") => d[0] = parse_f64s(tok, path)?,
            Some("d2") => d[1] = parse_f64s(tok, path)?,
            Some("d3") => d[2] = parse_f64s(tok, path)?,
            Some("units") => units = tok.next().unwrap_or("unknown").to_string(),
            _ => {}
        }
    }
    if n.iter().any(|&x| x == 0) {
        return Err(Error::File(format!("header for {path:?} missing dims")));
    }
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::File(format!("cannot open {path:?}: {e}")))?
        .read_to_end(&mut bytes)?;
    let count = n[0] * n[1] * n[2];
    if bytes.len() != count * 4 {
        return Err(Error::File(format!(
            "{path:?}: expected {} float32 values, file holds {} bytes",
            count,
            bytes.len()
        )));
    }
    let mut data = Vec::with_capacity(count);
    for chunk in bytes.chunks_exact(4) {
        data.push(T::of(f32::from_le_bytes(chunk.try_into().unwrap()) as f64));
    }
    Ok((
        Vol::from_vec(n[0], n[1], n[2], data),
        VolumeHeader { n, d, units },
    ))
}

fn parse_usize(tok: Option<&str>, path: &Path) -> Result<usize> {
    tok.and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::File(format!("bad header integer in {path:?}")))
}

fn parse_f64s(tok: std::str::SplitWhitespace<'_>, path: &Path) -> Result<Vec<f64>> {
    tok.map(|s| {
        s.parse()
            .map_err(|_| Error::File(format!("bad header number in {path:?}")))
    })
    .collect()
}

/// Write a complex volume as interleaved little-endian float64 pairs with a
/// sidecar header.
pub fn write_complex_volume<T: Real>(
    path: &Path,
    vol: &crate::vol::Vol<crate::scalar::Cplx<T>>,
    header: &VolumeHeader,
) -> Result<()> {
    let (n1, n2, n3) = vol.dims();
    if [n1, n2, n3] != header.n {
        return Err(Error::File("header dims do not match volume".into()));
    }
    let mut bytes = Vec::with_capacity(vol.len() * 16);
    for v in &vol.data {
        bytes.extend_from_slice(&v.re.f64().to_le_bytes());
        bytes.extend_from_slice(&v.im.f64().to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&bytes)?;
    let mut h = String::new();
    h.push_str(&format!("n1 {}\nn2 {}\nn3 {}\n", n1, n2, n3));
    for (axis, d) in header.d.iter().enumerate() {
        h.push_str(&format!("d{} ", axis + 1));
        let parts: Vec<String> = d.iter().map(|v| format!("{v:e}")).collect();
        h.push_str(&parts.join(" "));
        h.push('\n');
    }
    h.push_str(&format!("units {}\n", header.units));
    h.push_str("dtype complex128-le\norder x-fastest\n");
    std::fs::write(header_path(path), h)?;
    Ok(())
}

/// Deterministic per-iteration log (wall time deliberately excluded).
pub fn write_iteration_log<T: Real>(path: &Path, records: &[IterationRecord<T>]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "iteration,phi_d,phi_m,normalized,beta,alpha,restart")?;
    for r in records {
        writeln!(
            f,
            "{},{:e},{:e},{:e},{:e},{:e},{}",
            r.iteration,
            r.phi_d.f64(),
            r.phi_m.f64(),
            r.normalized.f64(),
            r.beta.f64(),
            r.alpha.f64(),
            u8::from(r.restart)
        )?;
    }
    Ok(())
}

/// Significant misfit per (source, receiver) with receiver coordinates.
pub fn write_significant_misfit<T: Real>(
    path: &Path,
    rows: &[(u32, u32, [T; 3], T)],
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "src_id,rcv_id,x,y,z,significant_misfit")?;
    for (src, rcv, pos, value) in rows {
        writeln!(
            f,
            "{src},{rcv},{:e},{:e},{:e},{:e}",
            pos[0].f64(),
            pos[1].f64(),
            pos[2].f64(),
            value.f64()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let mut vol: Vol<f64> = Vol::zeros(3, 2, 2);
        for (i, v) in vol.data.iter_mut().enumerate() {
            *v = i as f64 * 0.5 - 1.0;
        }
        let header = VolumeHeader {
            n: [3, 2, 2],
            d: [vec![100.0], vec![100.0], vec![25.0, 26.0]],
            units: "ohm-m".into(),
        };
        write_volume(&path, &vol, &header).unwrap();
        let (back, h2) = read_volume::<f64>(&path).unwrap();
        assert_eq!(h2.n, header.n);
        assert_eq!(h2.units, "ohm-m");
        assert_eq!(h2.d[2], vec![25.0, 26.0]);
        for (a, b) in vol.data.iter().zip(&back.data) {
            assert!((a - b).abs() < 1e-7); // float32 storage
        }
    }
}
