//! Two-user interference-channel realizations.
//!
//! Each link `H_ij` (transmitter `j` to receiver `i`) is an `M_r x M_t`
//! matrix of i.i.d. circularly-symmetric complex Gaussian entries (variance
//! 1/2 per component), rescaled so that `|H_ij|_F^2 = alpha_ij * M` with
//! `M = max(M_t, M_r)`. For square arrays this is the usual `alpha_ij * M`
//! normalization; the asymmetric rule is an extension.
//!
//! Randomness comes from ChaCha20 seeded with the experiment seed. Link `ij`
//! draws from its own stream, `stream = 2 (i - 1) + (j - 1)`, so any single
//! link can be regenerated on its own. A rank-deficient draw is redrawn from
//! the same stream (at most 16 attempts).

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, c, c64, CMatrix};

const MAX_REDRAWS: usize = 16;
const RANK_RATIO: f64 = 1e-9;
const NORM_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `links[i][j]` is `H_{i+1, j+1}`.
    links: [[CMatrix; 2]; 2],
    alpha: [[f64; 2]; 2],
    m_t: usize,
    m_r: usize,
    seed: Option<u64>,
}

/// Matrix with i.i.d. CN(0, 1) entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        c(a * s, b * s)
    })
}

fn full_rank(h: &CMatrix) -> bool {
    match linalg::svd(h) {
        Ok(d) => d.sigma.last().copied().unwrap_or(0.0) > RANK_RATIO * d.sigma[0],
        Err(_) => false,
    }
}

fn check_alpha(alpha: &[[f64; 2]; 2]) -> Result<()> {
    for (i, row) in alpha.iter().enumerate() {
        for (j, &a) in row.iter().enumerate() {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::invalid(format!("alpha_{}{} = {a} outside (0, 1]", i + 1, j + 1)));
            }
        }
    }
    Ok(())
}

impl ChannelSet {
    /// Draws a normalized channel set. Same arguments give bit-identical output.
    pub fn draw(m_t: usize, m_r: usize, alpha: [[f64; 2]; 2], seed: u64) -> Result<Self> {
        if m_t == 0 || m_r == 0 {
            return Err(Error::invalid("antenna counts must be at least 1"));
        }
        check_alpha(&alpha)?;
        let m = m_t.max(m_r) as f64;

        let mut links: [[CMatrix; 2]; 2] = Default::default();
        for i in 0..2 {
            for j in 0..2 {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                rng.set_stream((2 * i + j) as u64);
                let mut drawn = None;
                for _ in 0..MAX_REDRAWS {
                    let raw = gaussian_matrix(&mut rng, m_r, m_t);
                    if full_rank(&raw) {
                        drawn = Some(raw);
                        break;
                    }
                }
                let raw = drawn.ok_or_else(|| {
                    Error::Validation(format!("H{}{} rank deficient after {MAX_REDRAWS} draws", i + 1, j + 1))
                })?;
                let scale = (alpha[i][j] * m).sqrt() / linalg::frobenius_sq(&raw).sqrt();
                links[i][j] = raw.scale(scale);
            }
        }
        Ok(Self {
            links,
            alpha,
            m_t,
            m_r,
            seed: Some(seed),
        })
    }

    /// Assembles a channel set from explicit matrices, validating the
    /// normalization and rank invariants.
    pub fn from_links(links: [[CMatrix; 2]; 2], alpha: [[f64; 2]; 2], seed: Option<u64>) -> Result<Self> {
        let (m_r, m_t) = links[0][0].shape();
        let cs = Self {
            links,
            alpha,
            m_t,
            m_r,
            seed,
        };
        cs.validate()?;
        Ok(cs)
    }

    /// Builds a channel set without the normalization check. Intended for
    /// hand-made test channels (e.g. zero cross links).
    pub fn unnormalized(links: [[CMatrix; 2]; 2]) -> Self {
        let (m_r, m_t) = links[0][0].shape();
        assert!(
            links.iter().flatten().all(|h| h.shape() == (m_r, m_t)),
            "all links must share one shape"
        );
        let alpha = [[1.0; 2]; 2];
        Self {
            links,
            alpha,
            m_t,
            m_r,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(&self.alpha)?;
        let m = self.m_t.max(self.m_r) as f64;
        for i in 0..2 {
            for j in 0..2 {
                let h = &self.links[i][j];
                let name = format!("H{}{}", i + 1, j + 1);
                if h.shape() != (self.m_r, self.m_t) {
                    return Err(Error::Validation(format!(
                        "{name} has shape {:?}, expected {}x{}",
                        h.shape(),
                        self.m_r,
                        self.m_t
                    )));
                }
                if !linalg::is_finite(h) {
                    return Err(Error::Validation(format!("{name} has non-finite entries")));
                }
                let target = self.alpha[i][j] * m;
                let fro = linalg::frobenius_sq(h);
                if (fro - target).abs() > NORM_RTOL * target {
                    return Err(Error::Validation(format!(
                        "{name}: |H|_F^2 = {fro} but alpha*M = {target}"
                    )));
                }
                if !full_rank(h) {
                    return Err(Error::Validation(format!("{name} is numerically rank deficient")));
                }
            }
        }
        Ok(())
    }

    /// `H_ij` with 1-based receiver `i` and transmitter `j`.
    pub fn h(&self, i: usize, j: usize) -> &CMatrix {
        assert!((1..=2).contains(&i) && (1..=2).contains(&j), "link index out of range");
        &self.links[i - 1][j - 1]
    }

    pub fn h11(&self) -> &CMatrix {
        &self.links[0][0]
    }
    pub fn h12(&self) -> &CMatrix {
        &self.links[0][1]
    }
    pub fn h21(&self) -> &CMatrix {
        &self.links[1][0]
    }
    pub fn h22(&self) -> &CMatrix {
        &self.links[1][1]
    }

    pub fn m_t(&self) -> usize {
        self.m_t
    }
    pub fn m_r(&self) -> usize {
        self.m_r
    }
    pub fn alpha(&self) -> [[f64; 2]; 2] {
        self.alpha
    }
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `[H_1j; H_2j]`, a `2 M_r x M_t` matrix.
    pub fn stacked(&self, j: usize) -> CMatrix {
        linalg::vstack(&[self.h(1, j), self.h(2, j)])
    }

    /// The same realization with users relabelled (1 <-> 2), so that solvers
    /// written for (EH1, ID2) serve (ID1, EH2).
    pub fn swapped(&self) -> Self {
        let l = &self.links;
        let a = self.alpha;
        Self {
            links: [[l[1][1].clone(), l[1][0].clone()], [l[0][1].clone(), l[0][0].clone()]],
            alpha: [[a[1][1], a[1][0]], [a[0][1], a[0][0]]],
            m_t: self.m_t,
            m_r: self.m_r,
            seed: self.seed,
        }
    }

    /// SHA-256 of the canonical file encoding, hex.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// Canonical JSON text: compact, floats printed with 17 significant digits.
    pub fn to_json(&self) -> String {
        let file = ChannelFile::from(self);
        let mut buf = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, SignificantDigits);
        file.serialize(&mut ser).expect("in-memory serialization");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let file: ChannelFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        file.into_channel_set(origin)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

/// On-disk channel schema.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub m_t: usize,
    pub m_r: usize,
    pub alpha: [[f64; 2]; 2],
    pub matrices: LinkMatrices,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Row-major `[re, im]` pairs per link.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkMatrices {
    pub h11: Vec<[f64; 2]>,
    pub h12: Vec<[f64; 2]>,
    pub h21: Vec<[f64; 2]>,
    pub h22: Vec<[f64; 2]>,
}

fn to_pairs(h: &CMatrix) -> Vec<[f64; 2]> {
    let (rows, cols) = h.shape();
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push([h[(i, j)].re, h[(i, j)].im]);
        }
    }
    out
}

impl From<&ChannelSet> for ChannelFile {
    fn from(cs: &ChannelSet) -> Self {
        ChannelFile {
            m_t: cs.m_t,
            m_r: cs.m_r,
            alpha: cs.alpha,
            matrices: LinkMatrices {
                h11: to_pairs(cs.h11()),
                h12: to_pairs(cs.h12()),
                h21: to_pairs(cs.h21()),
                h22: to_pairs(cs.h22()),
            },
            seed: cs.seed,
        }
    }
}

impl ChannelFile {
    fn into_channel_set(self, origin: &Path) -> Result<ChannelSet> {
        let (rows, cols) = (self.m_r, self.m_t);
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            message,
        };
        if rows == 0 || cols == 0 {
            return Err(parse_err("m_t and m_r must be positive".into()));
        }
        let build = |name: &str, pairs: &[[f64; 2]]| -> Result<CMatrix> {
            if pairs.len() != rows * cols {
                return Err(parse_err(format!(
                    "{name}: expected {} entries for {rows}x{cols}, found {}",
                    rows * cols,
                    pairs.len()
                )));
            }
            Ok(CMatrix::from_fn(rows, cols, |i, j| {
                let [a, b] = pairs[i * cols + j];
                c64::new(a, b)
            }))
        };
        let m = &self.matrices;
        let links = [
            [build("h11", &m.h11)?, build("h12", &m.h12)?],
            [build("h21", &m.h21)?, build("h22", &m.h22)?],
        ];
        ChannelSet::from_links(links, self.alpha, self.seed)
    }
}

/// Compact JSON with every float written as `{:.16e}` (17 significant digits).
struct SignificantDigits;

impl serde_json::ser::Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        let mut s = String::with_capacity(24);
        write!(s, "{value:.16e}").expect("write to String");
        writer.write_all(s.as_bytes())
    }
}
