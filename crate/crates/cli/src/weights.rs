//! `CCSW` weight files.
//!
//! All integers are little-endian.
//!
//! ```text
//! magic        4 bytes  "CCSW"
//! version      u32      1
//! flags        u32      bit 0: some payload was narrowed to binary32
//! config       12 x u32 tokens, depth, hidden, ratio, patch, groups,
//!                       image_height, image_width, token_mlp_dim,
//!                       num_classes, token_mixer code, norm code
//! array count  u32
//! per array:
//!   name_len u32, name (UTF-8), rank u32, dims (rank x u32),
//!   width u8 (4 or 8), payload (product(dims) x width bytes, IEEE-754)
//! ```

use std::fs;
use std::path::Path;

use ccs_core::model::{MixerConfig, ModelParams, NormKind, TokenMixerKind};
use ccs_core::numerics::Tensor;

use crate::error::{CliError, CliResult};

pub const MAGIC: [u8; 4] = *b"CCSW";
pub const FORMAT_VERSION: u32 = 1;
pub const FLAG_LOSSY: u32 = 1;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum WeightError {
    #[error("bad magic: not a CCSW weight file")]
    BadMagic,
    #[error("unsupported format version {found} (expected {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("truncated file: needed {needed} bytes at offset {offset}, {available} left")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("malformed weight file: {0}")]
    Malformed(String),
}

/// Element width of a stored array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Width {
    F32,
    F64,
}

impl Width {
    pub fn bytes(self) -> u8 {
        match self {
            Width::F32 => 4,
            Width::F64 => 8,
        }
    }

    pub fn from_bytes(b: u8) -> Option<Self> {
        match b {
            4 => Some(Width::F32),
            8 => Some(Width::F64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightFile {
    pub version: u32,
    pub lossy: bool,
    pub config: MixerConfig,
    pub params: ModelParams<f64>,
}

fn config_fields(c: &MixerConfig) -> [u32; 12] {
    let f = |v: usize| v as u32;
    [
        f(c.tokens),
        f(c.depth),
        f(c.hidden),
        f(c.ratio),
        f(c.patch),
        f(c.groups),
        f(c.image_height),
        f(c.image_width),
        f(c.token_mlp_dim),
        f(c.num_classes),
        c.token_mixer.code(),
        c.norm.code(),
    ]
}

pub fn encode(config: &MixerConfig, params: &ModelParams<f64>, width: Width) -> Result<Vec<u8>, WeightError> {
    params
        .check_config(config)
        .map_err(|e| WeightError::Malformed(e.to_string()))?;
    let fields = config_fields(config);
    if fields.iter().zip([
        config.tokens,
        config.depth,
        config.hidden,
        config.ratio,
        config.patch,
        config.groups,
        config.image_height,
        config.image_width,
        config.token_mlp_dim,
        config.num_classes,
    ])
    .any(|(&f, v)| f as usize != v)
    {
        return Err(WeightError::Malformed("config field exceeds u32".into()));
    }

    let arrays = params.arrays();
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let flags = if width == Width::F32 { FLAG_LOSSY } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    for f in fields {
        out.extend_from_slice(&f.to_le_bytes());
    }
    out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
    for (name, t) in arrays {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.push(width.bytes());
        match width {
            Width::F64 => t.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            Width::F32 => t
                .data()
                .iter()
                .for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, needed: usize) -> Result<&'a [u8], WeightError> {
        let available = self.bytes.len() - self.pos;
        if needed > available {
            return Err(WeightError::Truncated {
                offset: self.pos,
                needed,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + needed];
        self.pos += needed;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, WeightError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u8(&mut self) -> Result<u8, WeightError> {
        Ok(self.take(1)?[0])
    }
}

pub fn decode(bytes: &[u8]) -> Result<WeightFile, WeightError> {
    let head = &bytes[..bytes.len().min(4)];
    if head != &MAGIC[..head.len()] {
        return Err(WeightError::BadMagic);
    }
    let mut r = Reader { bytes, pos: 0 };
    r.take(4)?;
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(WeightError::UnsupportedVersion { found: version });
    }
    let flags = r.u32()?;
    if flags & !FLAG_LOSSY != 0 {
        return Err(WeightError::Malformed(format!("unknown flag bits {flags:#x}")));
    }
    let mut f = [0usize; 12];
    for v in &mut f {
        *v = r.u32()? as usize;
    }
    let token_mixer = TokenMixerKind::from_code(f[10] as u32)
        .ok_or_else(|| WeightError::Malformed(format!("token mixer code {}", f[10])))?;
    let norm =
        NormKind::from_code(f[11] as u32).ok_or_else(|| WeightError::Malformed(format!("norm code {}", f[11])))?;
    let config = MixerConfig {
        tokens: f[0],
        depth: f[1],
        hidden: f[2],
        ratio: f[3],
        patch: f[4],
        groups: f[5],
        image_height: f[6],
        image_width: f[7],
        token_mlp_dim: f[8],
        num_classes: f[9],
        token_mixer,
        norm,
    };
    config.validate().map_err(|e| WeightError::Malformed(e.to_string()))?;

    let count = r.u32()? as usize;
    let mut arrays = Vec::new();
    let mut narrowed = false;
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| WeightError::Malformed("array name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(WeightError::Malformed(format!("{name}: rank {rank}")));
        }
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| WeightError::Malformed(format!("{name}: shape overflows")))?;
        let width = r.u8()?;
        let width = Width::from_bytes(width)
            .ok_or_else(|| WeightError::Malformed(format!("{name}: element width {width}")))?;
        let raw = r.take(
            len.checked_mul(width.bytes() as usize)
                .ok_or_else(|| WeightError::Malformed(format!("{name}: payload size overflows")))?,
        )?;
        let data: Vec<f64> = match width {
            Width::F64 => raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
            Width::F32 => {
                narrowed = true;
                raw.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                    .collect()
            }
        };
        let tensor = Tensor::new(shape, data).map_err(|e| WeightError::Malformed(e.to_string()))?;
        arrays.push((name, tensor));
    }
    if r.pos != bytes.len() {
        return Err(WeightError::Malformed(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let lossy = flags & FLAG_LOSSY != 0;
    if narrowed && !lossy {
        return Err(WeightError::Malformed("binary32 payload without the lossy flag".into()));
    }
    let params = ModelParams::from_arrays(&config, arrays).map_err(|e| WeightError::Malformed(e.to_string()))?;
    Ok(WeightFile {
        version,
        lossy,
        config,
        params,
    })
}

pub fn save_weights(path: &Path, config: &MixerConfig, params: &ModelParams<f64>, width: Width) -> CliResult<()> {
    let bytes = encode(config, params, width).map_err(|source| CliError::Weights {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn load_weights(path: &Path) -> CliResult<WeightFile> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|source| CliError::Weights {
        path: path.to_path_buf(),
        source,
    })
}
