//! Seed-deterministic i.i.d. streams.
//!
//! Every value is a pure function of `(spec, seed, stream, index)`: the
//! generator is ChaCha8 keyed by `seed`, with the 64-bit ChaCha stream id
//! selecting an independent substream and the block counter supplying the
//! index. Value `i` consumes keystream words `2i` and `2i + 1`; the top 53
//! bits of that `u64` give `u` in `[0, 1)`. This mapping is fixed; golden
//! files under `tests/golden/` pin it.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Declarative description of an i.i.d. real stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionSpec {
    Constant(f64),
    /// Uniform on `[lo, hi)`.
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// `10^u` with `u` uniform on `[exp_lo, exp_hi)`.
    LogUniform {
        exp_lo: f64,
        exp_hi: f64,
    },
    /// `offset + scale * xi` with `xi` uniform on `[0, 1)`.
    AffineOfUniform {
        offset: f64,
        scale: f64,
    },
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        match *self {
            DistributionSpec::Constant(c) if !c.is_finite() => bad(format!("const({c})")),
            DistributionSpec::Uniform { lo, hi }
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() =>
            {
                bad(format!("uniform({lo},{hi}) needs finite lo < hi"))
            }
            DistributionSpec::LogUniform { exp_lo, exp_hi }
                if !(exp_lo < exp_hi) || !exp_lo.is_finite() || !exp_hi.is_finite() =>
            {
                bad(format!(
                    "loguniform({exp_lo},{exp_hi}) needs finite lo < hi"
                ))
            }
            DistributionSpec::AffineOfUniform { offset, scale }
                if !offset.is_finite() || !scale.is_finite() =>
            {
                bad(format!("affine({offset},{scale})"))
            }
            _ => Ok(()),
        }
    }

    /// Maps a unit uniform `u` in `[0, 1)` to a sample.
    #[inline]
    pub fn transform(&self, u: f64) -> f64 {
        match *self {
            DistributionSpec::Constant(c) => c,
            DistributionSpec::Uniform { lo, hi } => lo + (hi - lo) * u,
            DistributionSpec::LogUniform { exp_lo, exp_hi } => {
                10f64.powf(exp_lo + (exp_hi - exp_lo) * u)
            }
            DistributionSpec::AffineOfUniform { offset, scale } => offset + scale * u,
        }
    }

    /// Closed interval containing every sample.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            DistributionSpec::Constant(c) => (c, c),
            DistributionSpec::Uniform { lo, hi } => (lo, hi),
            DistributionSpec::LogUniform { exp_lo, exp_hi } => {
                (10f64.powf(exp_lo), 10f64.powf(exp_hi))
            }
            DistributionSpec::AffineOfUniform { offset, scale } => {
                let end = offset + scale;
                (offset.min(end), offset.max(end))
            }
        }
    }

    /// The equivalent uniform interval, for the kinds that are uniform.
    pub(crate) fn as_uniform(&self) -> Option<(f64, f64)> {
        match *self {
            DistributionSpec::Uniform { lo, hi } => Some((lo, hi)),
            DistributionSpec::AffineOfUniform { scale, .. } if scale != 0.0 => Some(self.support()),
            _ => None,
        }
    }

    /// The distribution of `a * X`, sample for sample: `scaled(a).transform(u)`
    /// equals `a * transform(u)` up to rounding.
    pub fn scaled(&self, a: f64) -> Result<DistributionSpec> {
        if !a.is_finite() {
            return Err(Error::InvalidDistribution(format!("scale factor {a}")));
        }
        if a == 0.0 {
            return Ok(DistributionSpec::Constant(0.0));
        }
        Ok(match *self {
            DistributionSpec::Constant(c) => DistributionSpec::Constant(a * c),
            DistributionSpec::Uniform { lo, hi } if a > 0.0 => DistributionSpec::Uniform {
                lo: a * lo,
                hi: a * hi,
            },
            DistributionSpec::Uniform { lo, hi } => DistributionSpec::AffineOfUniform {
                offset: a * lo,
                scale: a * (hi - lo),
            },
            DistributionSpec::LogUniform { exp_lo, exp_hi } if a > 0.0 => {
                let s = a.log10();
                DistributionSpec::LogUniform {
                    exp_lo: exp_lo + s,
                    exp_hi: exp_hi + s,
                }
            }
            DistributionSpec::LogUniform { .. } => {
                return Err(Error::InvalidDistribution(format!(
                    "{self} cannot be scaled by a negative factor"
                )))
            }
            DistributionSpec::AffineOfUniform { offset, scale } => {
                DistributionSpec::AffineOfUniform {
                    offset: a * offset,
                    scale: a * scale,
                }
            }
        })
    }

    /// Whether the distribution is symmetric about zero.
    pub fn is_symmetric_about_zero(&self) -> bool {
        match *self {
            DistributionSpec::Constant(c) => c == 0.0,
            _ => match self.as_uniform() {
                Some((lo, hi)) => lo == -hi,
                None => false,
            },
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DistributionSpec::Constant(c) => write!(f, "const({c})"),
            DistributionSpec::Uniform { lo, hi } => write!(f, "uniform({lo},{hi})"),
            DistributionSpec::LogUniform { exp_lo, exp_hi } => {
                write!(f, "loguniform({exp_lo},{exp_hi})")
            }
            DistributionSpec::AffineOfUniform { offset, scale } => {
                write!(f, "affine({offset},{scale})")
            }
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let err = || Error::Parse(format!("bad distribution `{s}`"));
        let open = s.find('(').ok_or_else(err)?;
        if !s.ends_with(')') {
            return Err(err());
        }
        let name = s[..open].trim().to_ascii_lowercase();
        let args: Vec<f64> = s[open + 1..s.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| err()))
            .collect::<Result<_>>()?;
        let spec = match (name.as_str(), args.as_slice()) {
            ("const" | "constant", [c]) => DistributionSpec::Constant(*c),
            ("uniform", [lo, hi]) => DistributionSpec::Uniform { lo: *lo, hi: *hi },
            ("loguniform", [lo, hi]) => DistributionSpec::LogUniform {
                exp_lo: *lo,
                exp_hi: *hi,
            },
            ("affine", [o, s]) => DistributionSpec::AffineOfUniform {
                offset: *o,
                scale: *s,
            },
            _ => return Err(err()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Closed-form raw moments `E[X^p]` for each requested power.
pub fn moments(spec: &DistributionSpec, powers: &[i32]) -> Result<Vec<f64>> {
    spec.validate()?;
    powers.iter().map(|&p| moment(spec, p)).collect()
}

fn moment(spec: &DistributionSpec, p: i32) -> Result<f64> {
    if p == 0 {
        return Ok(1.0);
    }
    let diverges = || Error::NotImplemented(format!("E[X^{p}] diverges for {spec}"));
    match *spec {
        DistributionSpec::Constant(c) => {
            if c == 0.0 && p < 0 {
                Err(diverges())
            } else {
                Ok(c.powi(p))
            }
        }
        DistributionSpec::LogUniform { exp_lo, exp_hi } => {
            let pf = p as f64;
            let ln10 = std::f64::consts::LN_10;
            Ok((10f64.powf(pf * exp_hi) - 10f64.powf(pf * exp_lo))
                / (pf * ln10 * (exp_hi - exp_lo)))
        }
        DistributionSpec::AffineOfUniform { offset, scale: 0.0 } => {
            moment(&DistributionSpec::Constant(offset), p)
        }
        _ => {
            let (lo, hi) = spec.as_uniform().expect("uniform kinds");
            if p < 0 && lo <= 0.0 && hi >= 0.0 {
                return Err(diverges());
            }
            if p == -1 {
                Ok((hi.abs().ln() - lo.abs().ln()) / (hi - lo))
            } else {
                let q = p + 1;
                Ok((hi.powi(q) - lo.powi(q)) / (q as f64 * (hi - lo)))
            }
        }
    }
}

#[inline]
fn unit_from_bits(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A distribution bound to a seed and substream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamHandle {
    pub spec: DistributionSpec,
    pub seed: u64,
    pub stream: u64,
}

impl StreamHandle {
    pub fn new(spec: DistributionSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            seed,
            stream: 0,
        })
    }

    /// Same seed, independent substream.
    pub fn substream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_spec(mut self, spec: DistributionSpec) -> Self {
        self.spec = spec;
        self
    }

    fn rng_at(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(2 * index as u128);
        rng
    }

    /// Underlying unit uniform at `index`.
    pub fn unit(&self, index: u64) -> f64 {
        unit_from_bits(self.rng_at(index).next_u64())
    }

    /// Value at `index`; identical on every call.
    pub fn sample(&self, index: u64) -> f64 {
        self.spec.transform(self.unit(index))
    }

    /// Sequential iterator starting at index 0.
    pub fn iter(&self) -> StreamIter {
        self.iter_from(0)
    }

    pub fn iter_from(&self, index: u64) -> StreamIter {
        StreamIter {
            rng: self.rng_at(index),
            spec: self.spec,
        }
    }

    pub fn values(&self, n: usize) -> Vec<f64> {
        self.iter().take(n).collect()
    }

    /// Same values as [`values`](Self::values), generated in parallel chunks.
    pub fn values_par(&self, n: usize) -> Vec<f64> {
        const CHUNK: usize = 1 << 14;
        let mut out = vec![0.0; n];
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                let mut it = self.iter_from((c * CHUNK) as u64);
                for v in chunk.iter_mut() {
                    *v = it.next().expect("infinite stream");
                }
            });
        out
    }
}

/// Infinite sequential reader of a [`StreamHandle`].
#[derive(Debug, Clone)]
pub struct StreamIter {
    rng: ChaCha8Rng,
    spec: DistributionSpec,
}

impl Iterator for StreamIter {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        Some(self.spec.transform(unit_from_bits(self.rng.next_u64())))
    }
}
