//! Match features between a hypothesis vector `t` and a reference vector `r`.
//!
//! The feature vector is the concatenation `[t ; r ; t*r ; |t-r|]` (products
//! and differences component-wise), so a `d`-dimensional embedding yields
//! `4d` features. Vectors are read as `f32` or `f64`; all arithmetic is `f64`.

use std::io::{self, Read, Write};
use std::ops::Deref;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

/// Standard deviations below this are replaced by 1.
pub const SCALE_FLOOR: f64 = 1e-12;

const STANDARDIZER_MAGIC: &[u8; 4] = b"STD1";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("embedding vectors must be non-empty")]
    Empty,
    #[error("need at least 2 feature vectors to fit a standardizer, got {0}")]
    TooFew(usize),
    #[error("bad standardizer file: {0}")]
    Format(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Builds `[t ; r ; t*r ; |t-r|]`.
pub fn match_features<T: Copy + Into<f64>>(t: &[T], r: &[T]) -> Result<FeatureVector> {
    if t.len() != r.len() {
        return Err(FeatureError::LengthMismatch {
            left: t.len(),
            right: r.len(),
        });
    }
    if t.is_empty() {
        return Err(FeatureError::Empty);
    }
    let d = t.len();
    let mut out = vec![0.0; 4 * d];
    let (head, tail) = out.split_at_mut(2 * d);
    let (t_block, r_block) = head.split_at_mut(d);
    let (prod_block, diff_block) = tail.split_at_mut(d);
    for i in 0..d {
        let (a, b): (f64, f64) = (t[i].into(), r[i].into());
        t_block[i] = a;
        r_block[i] = b;
        prod_block[i] = a * b;
        diff_block[i] = (a - b).abs();
    }
    Ok(FeatureVector(out))
}

/// Index map relating features of concatenated embeddings to per-source features.
///
/// For sources of dimensions `dims`, let `combined` be the features of the
/// concatenated vectors and `split` the concatenation of each source's own
/// feature block. Then `combined[k] == split[perm[k]]` for every `k`.
pub fn block_permutation(dims: &[usize]) -> Vec<usize> {
    let total: usize = dims.iter().sum();
    let mut perm = Vec::with_capacity(4 * total);
    for block in 0..4 {
        let mut src_offset = 0;
        for &d in dims {
            let start = 4 * src_offset + block * d;
            perm.extend(start..start + d);
            src_offset += d;
        }
    }
    perm
}

/// Per-dimension centering and scaling fitted on training features.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    /// Mean 0, scale 1: applying it is the identity.
    pub fn identity(len: usize) -> Self {
        Self {
            mean: vec![0.0; len],
            scale: vec![1.0; len],
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn apply(&self, f: &[f64]) -> Result<FeatureVector> {
        self.check_len(f.len())?;
        Ok(FeatureVector(
            f.iter()
                .zip(self.mean.iter().zip(&self.scale))
                .map(|(x, (m, s))| (x - m) / s)
                .collect(),
        ))
    }

    /// Undoes [`Standardizer::apply`]: `f * scale + mean`.
    pub fn invert(&self, f: &[f64]) -> Result<FeatureVector> {
        self.check_len(f.len())?;
        Ok(FeatureVector(
            f.iter()
                .zip(self.mean.iter().zip(&self.scale))
                .map(|(x, (m, s))| x * s + m)
                .collect(),
        ))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.mean.len() {
            return Err(FeatureError::LengthMismatch {
                left: self.mean.len(),
                right: len,
            });
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(STANDARDIZER_MAGIC)?;
        out.write_u32::<LittleEndian>(self.mean.len() as u32)?;
        for &m in &self.mean {
            out.write_f64::<LittleEndian>(m)?;
        }
        for &s in &self.scale {
            out.write_f64::<LittleEndian>(s)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let fmt_err = |m: &str| FeatureError::Format(m.to_owned());
        let mut magic = [0u8; 4];
        input
            .read_exact(&mut magic)
            .map_err(|_| fmt_err("missing magic"))?;
        if &magic != STANDARDIZER_MAGIC {
            return Err(fmt_err("bad magic, expected STD1"));
        }
        let len = input
            .read_u32::<LittleEndian>()
            .map_err(|_| fmt_err("missing length"))? as usize;
        let mut read_block = || {
            (0..len)
                .map(|_| input.read_f64::<LittleEndian>())
                .collect::<io::Result<Vec<f64>>>()
                .map_err(|_| fmt_err("truncated"))
        };
        let mean = read_block()?;
        let scale = read_block()?;
        if scale.iter().any(|&s| !(s >= SCALE_FLOOR)) {
            return Err(fmt_err("scale below floor"));
        }
        Ok(Self { mean, scale })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| FeatureError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        self.write_to(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| FeatureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_from(io::BufReader::new(file))
    }
}

/// Fits per-dimension mean and population standard deviation (divisor `n`).
pub fn fit_standardizer<F: AsRef<[f64]>>(features: &[F]) -> Result<Standardizer> {
    if features.len() < 2 {
        return Err(FeatureError::TooFew(features.len()));
    }
    let len = features[0].as_ref().len();
    for f in features {
        if f.as_ref().len() != len {
            return Err(FeatureError::LengthMismatch {
                left: len,
                right: f.as_ref().len(),
            });
        }
    }
    let n = features.len() as f64;
    let mut mean = vec![0.0; len];
    for f in features {
        for (m, x) in mean.iter_mut().zip(f.as_ref()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; len];
    for f in features {
        for ((v, x), m) in var.iter_mut().zip(f.as_ref()).zip(&mean) {
            let dev = x - m;
            *v += dev * dev;
        }
    }
    let scale = var
        .into_iter()
        .map(|v| {
            let sd = (v / n).sqrt();
            if sd < SCALE_FLOOR {
                1.0
            } else {
                sd
            }
        })
        .collect();
    Ok(Standardizer { mean, scale })
}

pub fn apply_standardizer(s: &Standardizer, f: &[f64]) -> Result<FeatureVector> {
    s.apply(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_pcg::Pcg64;

    #[test]
    fn small_example() {
        let f = match_features(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(f.values(), &[1.0, 2.0, 3.0, 4.0, 3.0, 8.0, 2.0, 2.0]);
    }

    #[test]
    fn identical_inputs() {
        let f = match_features(&[5.0, -1.0], &[5.0, -1.0]).unwrap();
        assert_eq!(&f[4..6], &[25.0, 1.0]);
        assert_eq!(&f[6..8], &[0.0, 0.0]);
    }

    #[test]
    fn skipthought_length() {
        let mut rng = Pcg64::seed_from_u64(1);
        let t: Vec<f32> = (0..4800).map(|_| rng.random::<f32>()).collect();
        let r: Vec<f32> = (0..4800).map(|_| rng.random::<f32>()).collect();
        assert_eq!(match_features(&t, &r).unwrap().len(), 19200);
    }

    #[test]
    fn mismatched_lengths() {
        assert!(match_features(&[1.0], &[1.0, 2.0]).is_err());
        assert!(matches!(
            match_features::<f64>(&[], &[]),
            Err(FeatureError::Empty)
        ));
    }

    #[test]
    fn standardizer_hand_values() {
        let s = fit_standardizer(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(s.mean(), &[1.0, 1.0]);
        assert_eq!(s.scale(), &[1.0, 1.0]);

        let s = fit_standardizer(&[vec![3.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(s.scale(), &[1.0, 2.0]);

        assert!(matches!(
            fit_standardizer(&[vec![1.0]]),
            Err(FeatureError::TooFew(1))
        ));
        assert!(fit_standardizer(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    /// Straightforward moment computation, kept separate from the fitting code.
    fn moments(column: &[f64]) -> (f64, f64) {
        let n = column.len() as f64;
        let mut sum = 0.0;
        for x in column {
            sum += x;
        }
        let mean = sum / n;
        let mut ss = 0.0;
        for x in column {
            ss += (x - mean) * (x - mean);
        }
        (mean, (ss / n).sqrt())
    }

    #[test]
    fn standardized_moments() {
        let mut rng = Pcg64::seed_from_u64(7);
        let data: Vec<Vec<f64>> = (0..100)
            .map(|_| {
                (0..12)
                    .map(|j| rng.random_range(-5.0..5.0) * (j as f64 + 1.0) + j as f64 * 3.0)
                    .collect()
            })
            .collect();
        let s = fit_standardizer(&data).unwrap();
        let z: Vec<FeatureVector> = data.iter().map(|f| s.apply(f).unwrap()).collect();
        for j in 0..12 {
            let col: Vec<f64> = z.iter().map(|f| f[j]).collect();
            let (m, sd) = moments(&col);
            assert!(m.abs() < 1e-12, "mean {m}");
            assert!((sd - 1.0).abs() < 1e-12, "sd {sd}");
        }
    }

    #[test]
    fn apply_edge_cases() {
        let s = fit_standardizer(&[vec![1.0, 5.0, 2.0], vec![3.0, 5.0, -2.0]]).unwrap();
        assert_eq!(s.scale()[1], 1.0);
        assert!(s.apply(s.mean()).unwrap().iter().all(|&v| v == 0.0));
        let id = Standardizer::identity(3);
        assert_eq!(id.apply(&[1.5, -2.0, 7.0]).unwrap().values(), &[1.5, -2.0, 7.0]);
        assert!(s.apply(&[1.0]).is_err());
    }

    #[test]
    fn standardizer_file_round_trip() {
        let s = fit_standardizer(&[vec![0.1, 0.0, 9.0], vec![0.7, 0.0, -3.0]]).unwrap();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert_eq!(Standardizer::read_from(&buf[..]).unwrap(), s);
        assert!(Standardizer::read_from(&buf[..buf.len() - 3]).is_err());
    }

    #[test]
    fn permutation_two_sources() {
        // dims (1, 2): combined = [t1 t2a t2b | r1 r2a r2b | p.. | d..]
        // split = [t1 r1 p1 d1 | t2a t2b r2a r2b p2a p2b d2a d2b]
        assert_eq!(
            block_permutation(&[1, 2]),
            vec![0, 4, 5, 1, 6, 7, 2, 8, 9, 3, 10, 11]
        );
        assert_eq!(block_permutation(&[3]), (0..12).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn block_structure_and_symmetry(
            pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..40)
        ) {
            let (t, r): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let d = t.len();
            let f = match_features(&t, &r).unwrap();
            prop_assert_eq!(f.len(), 4 * d);
            for i in 0..d {
                prop_assert_eq!(f[i], t[i]);
                prop_assert_eq!(f[d + i], r[i]);
                prop_assert_eq!(f[2 * d + i], t[i] * r[i]);
                prop_assert_eq!(f[3 * d + i], (t[i] - r[i]).abs());
                prop_assert!(f[3 * d + i] >= 0.0);
            }
            let g = match_features(&r, &t).unwrap();
            prop_assert_eq!(&g[..d], &f[d..2 * d]);
            prop_assert_eq!(&g[d..2 * d], &f[..d]);
            prop_assert_eq!(&g[2 * d..], &f[2 * d..]);
        }

        #[test]
        fn invert_recovers_input(
            rows in proptest::collection::vec(proptest::collection::vec(-1e4f64..1e4, 5), 2..20),
            probe in proptest::collection::vec(-1e4f64..1e4, 5),
        ) {
            let s = fit_standardizer(&rows).unwrap();
            let back = s.invert(&s.apply(&probe).unwrap()).unwrap();
            for ((a, b), m) in back.iter().zip(&probe).zip(s.mean()) {
                prop_assert!((a - b).abs() <= 1e-12 * (b.abs() + m.abs()).max(1.0));
            }
        }
    }
}
