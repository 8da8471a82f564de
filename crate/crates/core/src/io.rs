//! Delimited text tables and versioned little-endian binary caches.

use std::io::{Read, Write};
use std::path::Path;

use faer::Mat;

use crate::atom::{AtomicSpectrum, GridSpec};
use crate::linalg::{SymTridiagonal, C64};
use crate::modes::HarmonicMode;
use crate::propagation::{DynamicalMatrixSeries, Mat2, SpectralDipole};
use crate::spin::CollectiveState;
use crate::{Error, Result};

/// Cache files start with these bytes.
pub const MAGIC: [u8; 4] = *b"HHGC";
/// Binary layout version; readers reject anything else.
pub const FORMAT_VERSION: (u16, u16, u16) = (1, 0, 0);

/// Column names with units, for `#` header lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TextTable {
    pub comments: Vec<String>,
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<f64>>,
}

/// Fixed 17-significant-digit rendering; parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl TextTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = (S, S)>) -> Self {
        TextTable {
            comments: Vec::new(),
            columns: columns.into_iter().map(|(a, b)| (a.into(), b.into())).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(mut self, c: impl Into<String>) -> Self {
        self.comments.push(c.into());
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.comments {
            s.push_str("# ");
            s.push_str(c);
            s.push('\n');
        }
        s.push_str("# ");
        let cols: Vec<String> =
            self.columns.iter().map(|(n, u)| if u.is_empty() { n.clone() } else { format!("{n} [{u}]") }).collect();
        s.push_str(&cols.join("\t"));
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| fmt_f64(*x)).collect();
            s.push_str(&cells.join("\t"));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    /// Parses what [`TextTable::render`] writes. The last `#` line is read as the column header.
    pub fn parse(text: &str) -> Result<Self> {
        let mut comments: Vec<String> = Vec::new();
        let mut rows = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            if let Some(c) = line.strip_prefix('#') {
                if !rows.is_empty() {
                    return Err(Error::Format(format!("line {}: header after data", ln + 1)));
                }
                comments.push(c.trim_start().to_string());
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split('\t')
                .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Format(format!("line {}: {e}", ln + 1))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        let header = comments.pop().ok_or_else(|| Error::Format("missing column header".into()))?;
        let columns: Vec<(String, String)> = header
            .split('\t')
            .map(|c| match c.rsplit_once(" [") {
                Some((n, u)) => (n.to_string(), u.trim_end_matches(']').to_string()),
                None => (c.to_string(), String::new()),
            })
            .collect();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != columns.len()) {
            return Err(Error::Format(format!("row {i} has {} cells, header has {}", r.len(), columns.len())));
        }
        Ok(TextTable { comments, columns, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|(n, _)| n == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Little-endian encoder for cache payloads.
#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn with_header(kind: &str) -> Self {
        let mut e = Encoder::default();
        e.buf.extend_from_slice(&MAGIC);
        for v in [FORMAT_VERSION.0, FORMAT_VERSION.1, FORMAT_VERSION.2] {
            e.buf.extend_from_slice(&v.to_le_bytes());
        }
        e.str(kind);
        e
    }

    pub fn u64(&mut self, x: u64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    pub fn f64(&mut self, x: f64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    pub fn c64(&mut self, z: C64) {
        self.f64(z.re);
        self.f64(z.im);
    }

    pub fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|x| self.f64(*x));
    }

    pub fn c64s(&mut self, v: &[C64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|z| self.c64(*z));
    }

    pub fn mat2(&mut self, m: &Mat2) {
        for r in m {
            for z in r {
                self.c64(*z);
            }
        }
    }

    fn mat(&mut self, m: &Mat<C64>) {
        self.u64(m.nrows() as u64);
        self.u64(m.ncols() as u64);
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                self.c64(m[(i, j)]);
            }
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    /// Checks magic, version and payload kind.
    pub fn open(buf: &'a [u8], kind: &str) -> Result<Self> {
        if buf.len() < 10 || buf[..4] != MAGIC {
            return Err(Error::Format("not a cache file (bad magic)".into()));
        }
        let mut d = Decoder { buf, pos: 4 };
        let mut ver = [0u16; 3];
        for v in &mut ver {
            *v = u16::from_le_bytes(d.take(2)?.try_into().unwrap());
        }
        let want = [FORMAT_VERSION.0, FORMAT_VERSION.1, FORMAT_VERSION.2];
        if ver != want {
            return Err(Error::Format(format!(
                "cache format {}.{}.{} does not match reader {}.{}.{}",
                ver[0], ver[1], ver[2], want[0], want[1], want[2]
            )));
        }
        let k = d.str()?;
        if k != kind {
            return Err(Error::Format(format!("cache holds {k:?}, expected {kind:?}")));
        }
        Ok(d)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format("truncated cache file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Reads a count, checking that that many items of at least `elem` bytes remain.
    pub fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.saturating_mul(elem) > self.buf.len() - self.pos {
            return Err(Error::Format("length field exceeds the file".into()));
        }
        Ok(n)
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn c64(&mut self) -> Result<C64> {
        Ok(C64::new(self.f64()?, self.f64()?))
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.len(1)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn c64s(&mut self) -> Result<Vec<C64>> {
        let n = self.len(16)?;
        (0..n).map(|_| self.c64()).collect()
    }

    pub fn mat2(&mut self) -> Result<Mat2> {
        let mut m = [[C64::new(0.0, 0.0); 2]; 2];
        for r in &mut m {
            for z in r {
                *z = self.c64()?;
            }
        }
        Ok(m)
    }

    fn mat(&mut self) -> Result<Mat<C64>> {
        let r = self.u64()? as usize;
        let c = self.len(16)?;
        if r.saturating_mul(c).saturating_mul(16) > self.buf.len() - self.pos {
            return Err(Error::Format("matrix exceeds the file".into()));
        }
        let mut m = Mat::zeros(r, c);
        for j in 0..c {
            for i in 0..r {
                m[(i, j)] = self.c64()?;
            }
        }
        Ok(m)
    }

    pub fn done(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!("{} trailing bytes in cache file", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

/// Types stored in binary caches.
pub trait Cacheable: Sized {
    const KIND: &'static str;
    fn encode(&self, e: &mut Encoder);
    fn decode(d: &mut Decoder<'_>) -> Result<Self>;

    fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::with_header(Self::KIND);
        self.encode(&mut e);
        e.finish()
    }

    fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut d = Decoder::open(buf, Self::KIND)?;
        let v = Self::decode(&mut d)?;
        d.done()?;
        Ok(v)
    }
}

impl Cacheable for AtomicSpectrum {
    const KIND: &'static str = "atomic-spectrum";
    fn encode(&self, e: &mut Encoder) {
        e.f64(self.grid.l);
        e.f64(self.grid.dx);
        e.f64(self.grid.x0);
        e.c64s(&self.energies);
        e.mat(&self.states);
        e.mat(&self.dipole);
        match &self.tridiagonal {
            Some(t) => {
                e.u64(1);
                e.c64s(&t.diag);
                e.f64(t.off);
            }
            None => e.u64(0),
        }
    }
    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        let grid = GridSpec { l: d.f64()?, dx: d.f64()?, x0: d.f64()? };
        let energies = d.c64s()?;
        let states = d.mat()?;
        let dipole = d.mat()?;
        let tridiagonal = match d.u64()? {
            0 => None,
            1 => Some(SymTridiagonal { diag: d.c64s()?, off: d.f64()? }),
            t => return Err(Error::Format(format!("bad tridiagonal tag {t}"))),
        };
        Ok(AtomicSpectrum { grid, energies, states, dipole, tridiagonal })
    }
}

impl Cacheable for DynamicalMatrixSeries {
    const KIND: &'static str = "dynamical-matrix";
    fn encode(&self, e: &mut Encoder) {
        e.f64s(&self.times);
        e.u64(self.values.len() as u64);
        self.values.iter().for_each(|m| e.mat2(m));
    }
    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        let times = d.f64s()?;
        let n = d.len(64)?;
        let values = (0..n).map(|_| d.mat2()).collect::<Result<Vec<_>>>()?;
        if values.len() != times.len() {
            return Err(Error::Format("series times and values differ in length".into()));
        }
        Ok(DynamicalMatrixSeries { times, values })
    }
}

impl Cacheable for SpectralDipole {
    const KIND: &'static str = "spectral-dipole";
    fn encode(&self, e: &mut Encoder) {
        e.f64s(&self.frequencies);
        e.u64(self.values.len() as u64);
        self.values.iter().for_each(|m| e.mat2(m));
    }
    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        let frequencies = d.f64s()?;
        let n = d.len(64)?;
        let values = (0..n).map(|_| d.mat2()).collect::<Result<Vec<_>>>()?;
        Ok(SpectralDipole { frequencies, values })
    }
}

impl Cacheable for Vec<HarmonicMode> {
    const KIND: &'static str = "harmonic-modes";
    fn encode(&self, e: &mut Encoder) {
        e.u64(self.len() as u64);
        for m in self {
            e.u64(m.n as u64);
            e.mat2(&m.dn);
        }
    }
    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        let n = d.len(72)?;
        (0..n).map(|_| Ok(HarmonicMode { n: d.u64()? as u32, dn: d.mat2()? })).collect()
    }
}

impl Cacheable for CollectiveState {
    const KIND: &'static str = "collective-state";
    fn encode(&self, e: &mut Encoder) {
        match self {
            CollectiveState::Pure(v) => {
                e.u64(0);
                e.c64s(v);
            }
            CollectiveState::Mixed(p) => {
                e.u64(1);
                e.f64s(p);
            }
        }
    }
    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        match d.u64()? {
            0 => Ok(CollectiveState::Pure(d.c64s()?)),
            1 => Ok(CollectiveState::Mixed(d.f64s()?)),
            t => Err(Error::Format(format!("bad state tag {t}"))),
        }
    }
}

pub fn save<T: Cacheable>(value: &T, path: &Path) -> Result<()> {
    // Write then rename, so concurrent readers never see a partial file.
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&value.to_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load<T: Cacheable>(path: &Path) -> Result<T> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    T::from_bytes(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, f64::MAX] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut bytes = CollectiveState::ground(3).to_bytes();
        bytes[4] ^= 1;
        assert!(matches!(CollectiveState::from_bytes(&bytes), Err(Error::Format(_))));
    }
}
