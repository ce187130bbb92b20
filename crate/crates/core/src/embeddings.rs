//! Token embedding providers: a text file of vectors, or seeded hashing.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    File,
    Hashed,
}

/// Maps tokens to `dim`-dimensional vectors. File-backed tables fall back
/// to hashed vectors of the same dimension for unknown tokens.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    seed: u64,
    kind: ProviderKind,
    vectors: HashMap<String, Vec<f64>>,
}

/// Unit-norm Gaussian vector derived only from `(token, dim, seed)`.
pub fn hashed_vector(token: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((dim as u64).to_le_bytes());
    h.update(token.as_bytes());
    let digest: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(digest);
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

impl EmbeddingTable {
    pub fn hashed(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            seed,
            kind: ProviderKind::Hashed,
            vectors: HashMap::new(),
        })
    }

    /// Parses whitespace-separated `token v1 ... vd` lines.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let values = fields
                .map(|f| match f.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::MalformedFile {
                        line: line_no,
                        msg: format!("bad component {f:?}"),
                    }),
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.is_empty() {
                return Err(Error::MalformedFile {
                    line: line_no,
                    msg: format!("token {token:?} has no vector"),
                });
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::InconsistentDimension {
                        line: line_no,
                        expected: d,
                        got: values.len(),
                    })
                }
                _ => {}
            }
            vectors.insert(token.to_owned(), values);
        }
        let dim = dim.ok_or(Error::MalformedFile {
            line: 0,
            msg: "no vectors".into(),
        })?;
        Ok(Self {
            dim,
            seed: 0,
            kind: ProviderKind::File,
            vectors,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }

    /// `hashed:<dim>:<seed>`, `hashed` (default dim, seed 0), or a file path.
    pub fn from_spec(spec: &str) -> Result<Self> {
        if spec == "hashed" {
            return Self::hashed(DEFAULT_DIM, 0);
        }
        if let Some(rest) = spec.strip_prefix("hashed:") {
            let bad = || Error::InvalidArgument(format!("expected hashed:<dim>:<seed>, got {spec:?}"));
            let (d, s) = rest.split_once(':').ok_or_else(bad)?;
            let dim = d.parse().map_err(|_| bad())?;
            let seed = s.parse().map_err(|_| bad())?;
            return Self::hashed(dim, seed);
        }
        Self::load(spec)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> ProviderKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    pub fn vector(&self, token: &str) -> Vec<f64> {
        match self.vectors.get(token) {
            Some(v) => v.clone(),
            None => hashed_vector(token, self.dim, self.seed),
        }
    }

    /// One row per token.
    pub fn embed<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<Vec<f64>> {
        tokens.iter().map(|t| self.vector(t.as_ref())).collect()
    }

    /// Mean of the token vectors.
    pub fn centroid<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for t in tokens {
            for (acc, x) in c.iter_mut().zip(self.vector(t.as_ref())) {
                *acc += x;
            }
        }
        let n = tokens.len().max(1) as f64;
        c.iter_mut().for_each(|x| *x /= n);
        c
    }
}
