//! Noise calibration from velocity snapshots by empirical orthogonal
//! functions, and the SGMF binary field format.
//!
//! SGMF layout, all little-endian: magic `SGMF`, u32 version (1), u32 nx,
//! u32 ny, u32 kind code, f64 lx, f64 ly, then `nx * ny * components` f64
//! values. Multi-component fields are stored as consecutive component
//! planes, each plane row-major with `y` as the outer index.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::field::{vector_inner_product, Field, FieldError, FieldKind, Grid2D, VectorField};

pub const SGMF_MAGIC: [u8; 4] = *b"SGMF";
pub const SGMF_VERSION: u32 = 1;
pub const SGMF_HEADER_LEN: usize = 4 + 4 * 4 + 2 * 8;
/// Extension used when scanning snapshot directories.
pub const SGMF_EXTENSION: &str = "sgmf";

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("bad magic {found:?}, expected \"SGMF\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported SGMF version {found}, expected {SGMF_VERSION}")]
    VersionMismatch { found: u32 },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },
    #[error("dimension overflow: {nx} x {ny} x {components} values do not fit in memory")]
    DimensionOverflow { nx: u32, ny: u32, components: usize },
    #[error("unknown field kind code {0}")]
    UnknownKind(u32),
    #[error("{extra} trailing bytes after payload")]
    TrailingBytes { extra: u64 },
    #[error("invalid field data: {0}")]
    InvalidField(#[from] FieldError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("need at least 2 snapshots, got {0}")]
    TooFewSnapshots(usize),
    #[error("requested {requested} modes but at most {max} are available")]
    TooManyModes { requested: usize, max: usize },
    #[error("snapshot {index} is a {kind:?} field, expected a vector field")]
    NotVector { index: usize, kind: FieldKind },
    #[error("singular value decomposition did not converge")]
    SvdFailed,
}

impl CalibrationError {
    /// Stable machine-readable code, one per failure class.
    pub fn code(&self) -> &'static str {
        match self {
            CalibrationError::BadMagic { .. } => "bad_magic",
            CalibrationError::VersionMismatch { .. } => "version_mismatch",
            CalibrationError::TruncatedPayload { .. } => "truncated_payload",
            CalibrationError::DimensionOverflow { .. } => "dimension_overflow",
            CalibrationError::UnknownKind(_) => "unknown_kind",
            CalibrationError::TrailingBytes { .. } => "trailing_bytes",
            CalibrationError::InvalidField(_) => "invalid_field",
            CalibrationError::Io { .. } => "io",
            CalibrationError::TooFewSnapshots(_) => "too_few_snapshots",
            CalibrationError::TooManyModes { .. } => "too_many_modes",
            CalibrationError::NotVector { .. } => "not_vector",
            CalibrationError::SvdFailed => "svd_failed",
        }
    }
}

pub type Result<T> = std::result::Result<T, CalibrationError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CalibrationError + '_ {
    move |source| CalibrationError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Serializes a field to SGMF bytes.
pub fn encode_field(f: &Field) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(SGMF_HEADER_LEN + 8 * f.values().len());
    out.extend_from_slice(&SGMF_MAGIC);
    out.extend_from_slice(&SGMF_VERSION.to_le_bytes());
    for v in [g.nx as u32, g.ny as u32, f.kind().code()] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&g.lx.to_le_bytes());
    out.extend_from_slice(&g.ly.to_le_bytes());
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().expect("4 bytes"))
}

fn f64_at(b: &[u8], off: usize) -> f64 {
    f64::from_le_bytes(b[off..off + 8].try_into().expect("8 bytes"))
}

/// Parses SGMF bytes. Nothing is returned unless the whole payload is valid.
pub fn decode_field(bytes: &[u8]) -> Result<Field> {
    let found = bytes.len() as u64;
    if bytes.len() < 4 {
        return Err(CalibrationError::TruncatedPayload {
            expected: SGMF_HEADER_LEN as u64,
            found,
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != SGMF_MAGIC {
        return Err(CalibrationError::BadMagic { found: magic });
    }
    if bytes.len() < 8 {
        return Err(CalibrationError::TruncatedPayload {
            expected: SGMF_HEADER_LEN as u64,
            found,
        });
    }
    let version = u32_at(bytes, 4);
    if version != SGMF_VERSION {
        return Err(CalibrationError::VersionMismatch { found: version });
    }
    if bytes.len() < SGMF_HEADER_LEN {
        return Err(CalibrationError::TruncatedPayload {
            expected: SGMF_HEADER_LEN as u64,
            found,
        });
    }
    let (nx, ny, code) = (u32_at(bytes, 8), u32_at(bytes, 12), u32_at(bytes, 16));
    let kind = FieldKind::from_code(code).ok_or(CalibrationError::UnknownKind(code))?;
    let components = kind.components();
    let overflow = CalibrationError::DimensionOverflow { nx, ny, components };
    let count = (nx as u64)
        .checked_mul(ny as u64)
        .and_then(|n| n.checked_mul(components as u64))
        .filter(|&n| usize::try_from(n).is_ok())
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(SGMF_HEADER_LEN as u64));
    let payload = count.ok_or(overflow)?;
    if found < payload {
        return Err(CalibrationError::TruncatedPayload {
            expected: payload,
            found,
        });
    }
    if found > payload {
        return Err(CalibrationError::TrailingBytes {
            extra: found - payload,
        });
    }
    let grid = Grid2D::new(nx as usize, ny as usize, f64_at(bytes, 20), f64_at(bytes, 28))?;
    let data = bytes[SGMF_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Field::new(kind, grid, data)?)
}

pub fn save_field(f: &Field, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_field(f)).map_err(io_err(path))
}

pub fn save_vector_field(v: &VectorField, path: impl AsRef<Path>) -> Result<()> {
    save_field(&v.to_field(), path)
}

pub fn load_field(path: impl AsRef<Path>) -> Result<Field> {
    let path = path.as_ref();
    decode_field(&std::fs::read(path).map_err(io_err(path))?)
}

pub fn load_vector_field(path: impl AsRef<Path>) -> Result<VectorField> {
    let f = load_field(path)?;
    if f.kind() != FieldKind::Vector {
        return Err(CalibrationError::NotVector {
            index: 0,
            kind: f.kind(),
        });
    }
    Ok(VectorField::from_field(&f)?)
}

/// `*.sgmf` files in `dir`, sorted lexicographically by file name.
pub fn list_snapshot_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == SGMF_EXTENSION) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Velocity snapshots on one grid.
#[derive(Debug, Clone)]
pub struct SnapshotEnsemble {
    grid: Grid2D,
    snapshots: Vec<VectorField>,
    pub source: String,
    pub times: Vec<f64>,
}

impl SnapshotEnsemble {
    /// Times default to the snapshot index.
    pub fn new(snapshots: Vec<VectorField>, source: impl Into<String>) -> Result<Self> {
        if snapshots.len() < 2 {
            return Err(CalibrationError::TooFewSnapshots(snapshots.len()));
        }
        let grid = *snapshots[0].grid();
        for s in &snapshots {
            grid.same_as(s.grid())?;
            if let Some(k) = s.x.iter().chain(&s.y).position(|v| !v.is_finite()) {
                return Err(FieldError::NonFinite(k).into());
            }
        }
        let times = (0..snapshots.len()).map(|i| i as f64).collect();
        Ok(Self {
            grid,
            snapshots,
            source: source.into(),
            times,
        })
    }

    pub fn with_times(mut self, times: Vec<f64>) -> Result<Self> {
        if times.len() != self.snapshots.len() {
            return Err(FieldError::BadLength {
                expected: self.snapshots.len(),
                found: times.len(),
            }
            .into());
        }
        self.times = times;
        Ok(self)
    }

    /// Loads every `*.sgmf` file in `dir` in lexicographic order.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let files = list_snapshot_files(dir)?;
        let mut snaps = Vec::with_capacity(files.len());
        for (index, p) in files.iter().enumerate() {
            let f = load_field(p)?;
            if f.kind() != FieldKind::Vector {
                return Err(CalibrationError::NotVector {
                    index,
                    kind: f.kind(),
                });
            }
            snaps.push(VectorField::from_field(&f)?);
        }
        Self::new(snaps, dir.display().to_string())
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn snapshots(&self) -> &[VectorField] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Degrees of freedom per snapshot.
    pub fn dof(&self) -> usize {
        2 * self.grid.len()
    }

    /// Largest admissible mode count, `min(n - 1, dof)`.
    pub fn max_modes(&self) -> usize {
        (self.len() - 1).min(self.dof())
    }

    pub fn mean(&self) -> VectorField {
        let inv = 1.0 / self.len() as f64;
        let mut m = VectorField::zeros(self.grid);
        for s in &self.snapshots {
            for (a, b) in m.x.iter_mut().zip(&s.x).chain(m.y.iter_mut().zip(&s.y)) {
                *a += b;
            }
        }
        m.scaled(inv)
    }
}

#[derive(Debug, Clone)]
pub struct EofResult {
    /// Orthonormal under the quadrature pairing.
    pub modes: Vec<VectorField>,
    /// Nonincreasing singular values of the area-weighted fluctuation matrix.
    pub singular_values: Vec<f64>,
    pub mean_field: VectorField,
    /// Sum of squared singular values over all modes, including the ones
    /// not returned.
    pub total_variance: f64,
}

impl EofResult {
    /// Fraction of total fluctuation variance captured by each mode.
    pub fn captured_variance(&self) -> Vec<f64> {
        if self.total_variance == 0.0 {
            return vec![0.0; self.singular_values.len()];
        }
        self.singular_values
            .iter()
            .map(|s| s * s / self.total_variance)
            .collect()
    }

    /// Quadrature-pairing coefficients of `v - mean` on each mode.
    pub fn project(&self, v: &VectorField) -> Result<Vec<f64>> {
        let mut fl = v.clone();
        fl.axpy(-1.0, &self.mean_field)?;
        self.modes
            .iter()
            .map(|m| Ok(vector_inner_product(m, &fl)?))
            .collect()
    }

    /// `mean + sum_k c_k xi_k`.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<VectorField> {
        let mut out = self.mean_field.clone();
        for (m, c) in self.modes.iter().zip(coeffs) {
            out.axpy(*c, m)?;
        }
        Ok(out)
    }
}

/// Flips the mode so its first component of non-negligible magnitude is
/// positive.
fn fix_sign(col: &mut [f64]) {
    let max = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return;
    }
    if let Some(v) = col.iter().find(|v| v.abs() > 1e-8 * max) {
        if *v < 0.0 {
            col.iter_mut().for_each(|c| *c = -*c);
        }
    }
}

/// Top-`k` EOFs of the ensemble fluctuations under the area-weighted
/// pairing. Identical snapshots give zero singular values, not an error.
pub fn compute_eof(ens: &SnapshotEnsemble, k: usize) -> Result<EofResult> {
    let max = ens.max_modes();
    if k > max {
        return Err(CalibrationError::TooManyModes { requested: k, max });
    }
    let mean = ens.mean();
    let g = *ens.grid();
    let w = g.cell_area().sqrt();
    let (dof, n) = (ens.dof(), ens.len());
    let mut x = DMatrix::<f64>::zeros(dof, n);
    for (j, s) in ens.snapshots().iter().enumerate() {
        let mut col = x.column_mut(j);
        let vals = s.x.iter().zip(&mean.x).chain(s.y.iter().zip(&mean.y));
        for (r, (a, b)) in vals.enumerate() {
            col[r] = w * (a - b);
        }
    }
    let total_variance = x.iter().map(|v| v * v).sum();
    let svd = x
        .try_svd(true, false, f64::EPSILON, 0)
        .ok_or(CalibrationError::SvdFailed)?;
    let u = svd.u.as_ref().ok_or(CalibrationError::SvdFailed)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));

    let mut modes = Vec::with_capacity(k);
    let mut singular_values = Vec::with_capacity(k);
    for &c in order.iter().take(k) {
        let mut col: Vec<f64> = u.column(c).iter().map(|v| v / w).collect();
        fix_sign(&mut col);
        let y = col.split_off(g.len());
        modes.push(VectorField::new(g, col, y)?);
        singular_values.push(svd.singular_values[c]);
    }
    Ok(EofResult {
        modes,
        singular_values,
        mean_field: mean,
        total_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid2D {
        Grid2D::new(8, 10, 2.0, 3.0).unwrap()
    }

    #[test]
    fn header_layout_is_fixed() {
        let f = Field::constant(FieldKind::OneForm, grid(), 1.5);
        let b = encode_field(&f);
        assert_eq!(&b[..4], b"SGMF");
        assert_eq!(u32_at(&b, 4), 1);
        assert_eq!((u32_at(&b, 8), u32_at(&b, 12), u32_at(&b, 16)), (8, 10, 2));
        assert_eq!((f64_at(&b, 20), f64_at(&b, 28)), (2.0, 3.0));
        assert_eq!(b.len(), SGMF_HEADER_LEN + 8 * 160);
    }

    #[test]
    fn byte_count_overflow_is_distinct_from_truncation() {
        let mut b = encode_field(&Field::zeros(FieldKind::Scalar, grid()));
        b[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        b[12..16].copy_from_slice(&u32::MAX.to_le_bytes());
        assert_eq!(decode_field(&b).unwrap_err().code(), "dimension_overflow");
        b[8..12].copy_from_slice(&1024u32.to_le_bytes());
        b[12..16].copy_from_slice(&1024u32.to_le_bytes());
        assert_eq!(decode_field(&b).unwrap_err().code(), "truncated_payload");
    }

    #[test]
    fn sign_convention_makes_first_component_positive() {
        let mut v = vec![0.0, -1e-20, -0.5, 0.3];
        fix_sign(&mut v);
        assert_eq!(v, vec![-0.0, 1e-20, 0.5, -0.3]);
    }
}
