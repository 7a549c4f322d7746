//! `SVR1` model files.
//!
//! ```text
//! b"SVR1" | u32 dim | u32 n_sv | f64 C | f64 epsilon | f64 gamma | f64 bias
//!         | n_sv x (f64 beta | dim x f64)
//! ```
//!
//! Little-endian, no padding. Save followed by load is bitwise lossless.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Hyperparams, Result, SvrError, SvrModel};

pub const MODEL_MAGIC: &[u8; 4] = b"SVR1";

impl SvrModel {
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(MODEL_MAGIC)?;
        out.write_u32::<LittleEndian>(self.dim as u32)?;
        out.write_u32::<LittleEndian>(self.support_vectors.len() as u32)?;
        for v in [self.params.c, self.params.epsilon, self.params.gamma, self.bias] {
            out.write_f64::<LittleEndian>(v)?;
        }
        for (sv, &beta) in self.support_vectors.iter().zip(&self.dual_coefs) {
            out.write_f64::<LittleEndian>(beta)?;
            for &v in sv {
                out.write_f64::<LittleEndian>(v)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let fmt_err = |m: String| SvrError::Format(m);
        let mut magic = [0u8; 4];
        input
            .read_exact(&mut magic)
            .map_err(|_| fmt_err("missing magic".into()))?;
        if &magic != MODEL_MAGIC {
            return Err(fmt_err(format!("bad magic {magic:?}, expected \"SVR1\"")));
        }
        let mut u32_field = |name: &str| {
            input
                .read_u32::<LittleEndian>()
                .map(|v| v as usize)
                .map_err(|_| fmt_err(format!("truncated before {name}")))
        };
        let dim = u32_field("dim")?;
        let n_sv = u32_field("n_sv")?;
        let mut f64_field = |name: &str| {
            input
                .read_f64::<LittleEndian>()
                .map_err(|_| fmt_err(format!("truncated before {name}")))
        };
        let c = f64_field("C")?;
        let epsilon = f64_field("epsilon")?;
        let gamma = f64_field("gamma")?;
        let bias = f64_field("bias")?;
        let params = Hyperparams::new(c, epsilon, gamma)?;

        let mut support_vectors = Vec::with_capacity(n_sv.min(1 << 16));
        let mut dual_coefs = Vec::with_capacity(n_sv.min(1 << 16));
        for i in 0..n_sv {
            let beta = f64_field(&format!("support vector {i}"))?;
            let sv = (0..dim)
                .map(|_| f64_field(&format!("support vector {i}")))
                .collect::<Result<Vec<f64>>>()?;
            dual_coefs.push(beta);
            support_vectors.push(sv);
        }
        let mut rest = [0u8; 1];
        if input.read(&mut rest).unwrap_or(0) != 0 {
            return Err(fmt_err("trailing bytes after last support vector".into()));
        }
        Ok(SvrModel {
            dim,
            support_vectors,
            dual_coefs,
            bias,
            params,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| SvrError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        self.write_to(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| SvrError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_from(BufReader::new(file))
    }
}
