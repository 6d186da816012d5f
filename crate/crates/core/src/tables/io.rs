//! Little-endian binary format for a table and its rewrite rules.
//!
//! Layout: magic `TSYN`, u32 version, u8 gate set, u8 max T, u64 entry count, then per
//! entry 8 f64 (row-major re/im pairs), u16 word length and the gate ids. After the
//! entries come a u64 rule count and each rule as two length-prefixed gate-id words.
//! The file ends with an FNV-1a checksum of everything before it.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use super::{fnv1a, CanonicalMatrix, RewriteTable, TableError, UniqueTable, FNV_OFFSET};
use crate::unitary::{distance, GateId, GateSequence, Unitary2};

const MAGIC: &[u8; 4] = b"TSYN";
pub const FORMAT_VERSION: u32 = 1;
const GATESET_CLIFFORD_T: u8 = 0;

pub fn table_to_bytes(table: &UniqueTable, rewrites: &RewriteTable) -> Vec<u8> {
    let mut out = Vec::with_capacity(table.len() * 90 + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(GATESET_CLIFFORD_T);
    out.push(table.max_t());
    out.extend_from_slice(&(table.len() as u64).to_le_bytes());
    for (m, e) in table.matrices().iter().zip(table.entries()) {
        for z in m.0 {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        write_word(&mut out, e.sequence.gates());
    }
    out.extend_from_slice(&(rewrites.len() as u64).to_le_bytes());
    for (k, v) in rewrites.iter() {
        write_word(&mut out, k);
        write_word(&mut out, v);
    }
    let sum = fnv1a(FNV_OFFSET, &out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

fn write_word(out: &mut Vec<u8>, word: &[GateId]) {
    out.extend_from_slice(&(word.len() as u16).to_le_bytes());
    out.extend(word.iter().map(|&g| g as u8));
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TableError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| TableError::Corrupt("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], TableError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, TableError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, TableError> {
        self.array().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32, TableError> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64, TableError> {
        self.array().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64, TableError> {
        self.array().map(f64::from_le_bytes)
    }

    fn word(&mut self) -> Result<Vec<GateId>, TableError> {
        let n = self.u16()? as usize;
        self.take(n)?
            .iter()
            .map(|&b| GateId::from_u8(b).map_err(|e| TableError::Corrupt(e.to_string())))
            .collect()
    }
}

pub fn table_from_bytes(bytes: &[u8]) -> Result<(UniqueTable, RewriteTable), TableError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(TableError::Corrupt("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(TableError::UnsupportedVersion(version));
    }
    if bytes.len() < 8 + 18 {
        return Err(TableError::Corrupt("truncated".into()));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(trailer.try_into().expect("8 bytes"));
    if fnv1a(FNV_OFFSET, body) != stored {
        return Err(TableError::Corrupt("checksum mismatch".into()));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let gateset = r.u8()?;
    if gateset != GATESET_CLIFFORD_T {
        return Err(TableError::Corrupt(format!("unknown gate set {gateset}")));
    }
    let max_t = r.u8()?;
    let count = r.u64()?;
    if count > (body.len() / 66) as u64 {
        return Err(TableError::Corrupt("entry count exceeds file size".into()));
    }
    let mut table = UniqueTable::empty(max_t);
    let mut last_t = 0;
    for i in 0..count {
        let mut m = [Complex64::new(0.0, 0.0); 4];
        for z in &mut m {
            *z = Complex64::new(r.f64()?, r.f64()?);
        }
        let seq = GateSequence(r.word()?);
        let t = seq.t_count();
        if t < last_t || t > max_t as usize {
            return Err(TableError::Corrupt(format!("entry {i} out of T order")));
        }
        last_t = t;
        table.push(CanonicalMatrix(Unitary2(m)), seq);
    }
    table.finish_offsets();
    let n_rules = r.u64()?;
    let mut rewrites = RewriteTable::new();
    for _ in 0..n_rules {
        let k = r.word()?;
        let v = r.word()?;
        if !rewrites.insert(&k, &v) {
            return Err(TableError::Corrupt("rewrite rule does not reduce cost".into()));
        }
    }
    if r.pos != body.len() {
        return Err(TableError::Corrupt("trailing bytes".into()));
    }
    Ok((table, rewrites))
}

pub fn save_table(path: &Path, table: &UniqueTable, rewrites: &RewriteTable) -> Result<(), TableError> {
    fs::write(path, table_to_bytes(table, rewrites))?;
    Ok(())
}

pub fn load_table(path: &Path) -> Result<(UniqueTable, RewriteTable), TableError> {
    table_from_bytes(&fs::read(path)?)
}

/// Checks that every stored matrix matches its word and that the counting law holds.
pub fn verify_table(table: &UniqueTable) -> Result<(), String> {
    for (i, (m, e)) in table.matrices().iter().zip(table.entries()).enumerate() {
        let d = distance(m, &e.sequence.matrix());
        if d > 1e-6 {
            return Err(format!("entry {i} ({}) disagrees with its matrix by {d:.3e}", e.sequence));
        }
    }
    for t in 0..=table.max_t() {
        let expect = super::count_with_t_count(t as u32);
        let got = table.count_with_t(t) as u64;
        if got != expect {
            return Err(format!("{got} entries with T count {t}, expected {expect}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::{enumerate_table, EnumerationOptions};

    fn small() -> (UniqueTable, RewriteTable) {
        enumerate_table(3, EnumerationOptions::default()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (t, r) = small();
        let bytes = table_to_bytes(&t, &r);
        let (t2, r2) = table_from_bytes(&bytes).unwrap();
        assert_eq!(t, t2);
        assert_eq!(r, r2);
        assert_eq!(table_to_bytes(&t2, &r2), bytes);
        assert!(verify_table(&t2).is_ok());
        assert_eq!(t2.find(t.matrix(100)), Some(100));
    }

    #[test]
    fn detects_corruption() {
        let (t, r) = small();
        let bytes = table_to_bytes(&t, &r);
        let mut flipped = bytes.clone();
        flipped[200] ^= 1;
        assert!(matches!(table_from_bytes(&flipped), Err(TableError::Corrupt(_))));
        assert!(matches!(table_from_bytes(&bytes[..bytes.len() - 3]), Err(TableError::Corrupt(_))));
        assert!(matches!(table_from_bytes(&bytes[..10]), Err(TableError::Corrupt(_))));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(table_from_bytes(&magic), Err(TableError::Corrupt(_))));
        let mut version = bytes;
        version[4] = 9;
        assert!(matches!(table_from_bytes(&version), Err(TableError::UnsupportedVersion(9))));
    }

    #[test]
    fn file_round_trip() {
        let (t, r) = small();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t3.tsyn");
        save_table(&path, &t, &r).unwrap();
        let (t2, _) = load_table(&path).unwrap();
        assert_eq!(t, t2);
        assert!(matches!(load_table(&dir.path().join("missing")), Err(TableError::Io(_))));
    }
}
