//! Trajectory output: long-format CSV and a compact binary snapshot stream.

use std::io::{Read, Write};
use std::path::Path;

use super::field::{FieldKind, PdeField};
use super::PdeError;

const MAGIC: &[u8; 4] = b"SHPF";
const VERSION: u32 = 1;

/// Writes `t,x,value` rows for every snapshot.
pub fn write_trajectory_csv(path: &Path, snapshots: &[PdeField]) -> Result<(), PdeError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "x", "value"])?;
    for s in snapshots {
        for (i, v) in s.values.iter().enumerate() {
            w.write_record([s.t.to_string(), s.x(i).to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Little-endian record: magic, version, kind, grid size, t, offset, values.
pub fn write_snapshot(out: &mut impl Write, field: &PdeField) -> Result<(), PdeError> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&[field.kind.code(), 0, 0, 0])?;
    out.write_all(&(field.len() as u64).to_le_bytes())?;
    out.write_all(&field.t.to_le_bytes())?;
    out.write_all(&field.offset.to_le_bytes())?;
    for v in &field.values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads one snapshot, or `None` at a clean end of stream.
pub fn read_snapshot(input: &mut impl Read) -> Result<Option<PdeField>, PdeError> {
    let mut magic = [0u8; 4];
    match input.read_exact(&mut magic) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    if &magic != MAGIC {
        return Err(PdeError::Format("bad snapshot magic".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(PdeError::Format(format!(
            "unsupported snapshot version {version}"
        )));
    }
    input.read_exact(&mut b4)?;
    let kind = FieldKind::from_code(b4[0])
        .ok_or_else(|| PdeError::Format(format!("unknown field kind {}", b4[0])))?;
    input.read_exact(&mut b8)?;
    let g = u64::from_le_bytes(b8) as usize;
    if g > (1 << 28) {
        return Err(PdeError::Format(format!("implausible grid size {g}")));
    }
    input.read_exact(&mut b8)?;
    let t = f64::from_le_bytes(b8);
    input.read_exact(&mut b8)?;
    let offset = f64::from_le_bytes(b8);
    let mut values = Vec::with_capacity(g);
    for _ in 0..g {
        input.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    PdeField::with_offset(kind, values, t, offset).map(Some)
}

pub fn save_snapshots(path: &Path, snapshots: &[PdeField]) -> Result<(), PdeError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in snapshots {
        write_snapshot(&mut f, s)?;
    }
    f.flush()?;
    Ok(())
}

pub fn load_snapshots(path: &Path) -> Result<Vec<PdeField>, PdeError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    while let Some(s) = read_snapshot(&mut f)? {
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let a = PdeField::sample(FieldKind::Height, 40, |x| x.sin()).unwrap();
        let mut b = PdeField::sample(FieldKind::ThirdDeriv, 48, |x| x.cos() - 0.1).unwrap();
        b.t = 0.25;
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &a).unwrap();
        write_snapshot(&mut buf, &b).unwrap();
        let mut r = buf.as_slice();
        assert_eq!(read_snapshot(&mut r).unwrap().unwrap(), a);
        assert_eq!(read_snapshot(&mut r).unwrap().unwrap(), b);
        assert!(read_snapshot(&mut r).unwrap().is_none());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_snapshot(&mut bad.as_slice()).is_err());
    }
}
