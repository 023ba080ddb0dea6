//! Finite block-fading channel ensembles.
//!
//! Expectations over the fading state become probability-weighted sums over
//! the `N` states of a [`ChannelSet`]. Channel rows are circularly-symmetric
//! complex Gaussian, `h_k ~ CN(0, c_k I)`.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, C64};
use crate::math;

/// Channel gains `||h||^2` at or below this are treated as zero.
pub const GAIN_FLOOR: f64 = 1e-14;

/// Downlink channel of one fading state: row `k` is user `k`'s `1 x M` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    users: usize,
    antennas: usize,
    entries: Vec<C64>,
}

impl ChannelMatrix {
    pub fn new(users: usize, antennas: usize, entries: Vec<C64>) -> Result<Self> {
        if users == 0 || antennas == 0 {
            return Err(Error::Dimension("channel needs K >= 1 and M >= 1"));
        }
        if entries.len() != users * antennas {
            return Err(Error::Dimension("entry count does not match K x M"));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("channel entries must be finite"));
        }
        Ok(Self {
            users,
            antennas,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let antennas = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != antennas) {
            return Err(Error::Dimension("ragged channel rows"));
        }
        Self::new(rows.len(), antennas, rows.concat())
    }

    /// Real-valued rows, convenient for tests and examples.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn row(&self, k: usize) -> &[C64] {
        &self.entries[k * self.antennas..(k + 1) * self.antennas]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[C64]> {
        self.entries.chunks_exact(self.antennas)
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    /// `||h_k||^2`
    pub fn gain(&self, k: usize) -> f64 {
        norm_sqr(self.row(k))
    }

    /// Keep only the listed users, in the given order.
    pub fn select_users(&self, users: &[usize]) -> Self {
        let entries = users.iter().flat_map(|&k| self.row(k).iter().copied()).collect();
        Self {
            users: users.len(),
            antennas: self.antennas,
            entries,
        }
    }
}

/// A finite ensemble of fading states with their probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    states: Vec<ChannelMatrix>,
    probabilities: Vec<f64>,
    seed: u64,
}

impl ChannelSet {
    /// `probabilities = None` means uniform.
    pub fn new(
        states: Vec<ChannelMatrix>,
        probabilities: Option<Vec<f64>>,
        seed: u64,
    ) -> Result<Self> {
        let first = states
            .first()
            .ok_or(Error::Dimension("channel set needs at least one state"))?;
        let (k, m) = (first.users, first.antennas);
        if states.iter().any(|s| s.users != k || s.antennas != m) {
            return Err(Error::Dimension("all fading states must share K and M"));
        }
        let n = states.len();
        let probabilities = match probabilities {
            None => vec![1.0 / n as f64; n],
            Some(p) => {
                if p.len() != n {
                    return Err(Error::Dimension("one probability per state"));
                }
                if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                    return Err(Error::InvalidParameter("probabilities must be nonnegative"));
                }
                let total: f64 = p.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter("probabilities must sum to 1"));
                }
                p
            }
        };
        Ok(Self {
            states,
            probabilities,
            seed,
        })
    }

    pub fn single(state: ChannelMatrix) -> Self {
        Self {
            states: vec![state],
            probabilities: vec![1.0],
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn users(&self) -> usize {
        self.states[0].users
    }

    pub fn antennas(&self) -> usize {
        self.states[0].antennas
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn states(&self) -> &[ChannelMatrix] {
        &self.states
    }

    pub fn state(&self, n: usize) -> &ChannelMatrix {
        &self.states[n]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.probabilities.iter().all(|&p| p == u)
    }

    /// `(probability, state)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, &ChannelMatrix)> {
        self.probabilities.iter().copied().zip(self.states.iter())
    }

    /// `E_n[f(H(n))]`
    pub fn expect<F: FnMut(&ChannelMatrix) -> f64>(&self, mut f: F) -> f64 {
        self.iter().map(|(p, h)| p * f(h)).sum()
    }

    pub fn select_users(&self, users: &[usize]) -> Self {
        Self {
            states: self.states.iter().map(|s| s.select_users(users)).collect(),
            probabilities: self.probabilities.clone(),
            seed: self.seed,
        }
    }
}

/// Parameters of an i.i.d. Rayleigh ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingSpec {
    pub users: usize,
    pub antennas: usize,
    /// Per-user covariance scale `c_k`.
    pub variances: Vec<f64>,
    pub states: usize,
    pub seed: u64,
}

impl FadingSpec {
    /// Unit-variance channels for every user.
    pub fn symmetric(users: usize, antennas: usize, states: usize, seed: u64) -> Self {
        Self {
            users,
            antennas,
            variances: vec![1.0; users],
            states,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.antennas == 0 || self.states == 0 {
            return Err(Error::Dimension("fading spec needs K, M, N >= 1"));
        }
        if self.variances.len() != self.users {
            return Err(Error::Dimension("one variance per user"));
        }
        if self.variances.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidParameter("variances must be positive"));
        }
        Ok(())
    }
}

/// Per-(state, user) random stream. ChaCha streams make every row
/// reproducible independently of generation order.
fn row_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_row(rng: &mut ChaCha8Rng, antennas: usize, variance: f64, out: &mut Vec<C64>) {
    let sd = math::sqrt(variance / 2.0);
    for _ in 0..antennas {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        out.push(C64::new(sd * re, sd * im));
    }
}

pub fn generate(spec: &FadingSpec) -> Result<ChannelSet> {
    spec.validate()?;
    let (k, m) = (spec.users, spec.antennas);
    let mut states = Vec::with_capacity(spec.states);
    for n in 0..spec.states {
        let mut entries = Vec::with_capacity(k * m);
        for (user, &c) in spec.variances.iter().enumerate() {
            let mut rng = row_rng(spec.seed, (n * k + user) as u64);
            draw_row(&mut rng, m, c, &mut entries);
        }
        states.push(ChannelMatrix::new(k, m, entries)?);
    }
    ChannelSet::new(states, None, spec.seed)
}

/// Monte-Carlo estimate of `rho = E[1/||h||^2]` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

fn summarize(values: impl Iterator<Item = f64>) -> RhoEstimate {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for x in values {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    RhoEstimate {
        mean,
        std_error: math::sqrt(var / n.max(1) as f64),
        samples: n,
    }
}

/// Estimate `rho` pooled over users (the mean of the per-user `rho_k`).
///
/// For Gaussian rows `||h||^2 / c` is Gamma(M, 1), whose reciprocal has a
/// finite mean only when `M >= 2`.
pub fn estimate_rho(spec: &FadingSpec, samples: usize) -> Result<RhoEstimate> {
    spec.validate()?;
    if spec.antennas < 2 {
        return Err(Error::Divergent {
            antennas: spec.antennas,
        });
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample"));
    }
    let mut values = Vec::with_capacity(samples * spec.users);
    let mut row = Vec::with_capacity(spec.antennas);
    for (user, &c) in spec.variances.iter().enumerate() {
        // Streams with the top bit set never collide with `generate`.
        let mut rng = row_rng(spec.seed, (1u64 << 63) | user as u64);
        for _ in 0..samples {
            row.clear();
            draw_row(&mut rng, spec.antennas, c, &mut row);
            values.push(1.0 / norm_sqr(&row));
        }
    }
    Ok(summarize(values.into_iter()))
}

/// `rho` of the ensemble itself, pooled over users and weighted by the
/// state probabilities. Zero rows give an infinite estimate.
pub fn empirical_rho(channels: &ChannelSet) -> RhoEstimate {
    let k = channels.users() as f64;
    let mean = channels.expect(|h| (0..h.users()).map(|u| 1.0 / h.gain(u)).sum::<f64>() / k);
    let pooled = summarize(
        channels
            .states()
            .iter()
            .flat_map(|h| (0..h.users()).map(move |u| 1.0 / h.gain(u))),
    );
    RhoEstimate { mean, ..pooled }
}
