//! Two-mode birth–death model of the inverted gain medium.
//!
//! Each polarization mode evolves independently: a photon is emitted into a
//! mode holding `n` photons at rate `A (n + 1)` (stimulated `A n` plus
//! spontaneous `A`) and absorbed at rate `B n`. The input light sits in mode
//! V; mode H starts in vacuum.
//!
//! [`evolve_master`] propagates the probability distribution of each mode on
//! a truncated Fock space and forms the joint table; [`sample_trajectories`]
//! draws exact event-time realizations of the same process.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Geometric, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloning::{AmplifierParams, CloneProcess, ConditionalCloneResult};
use crate::error::{Error, Result};

/// Largest tail mass [`evolve_master`] accepts.
pub const TAIL_TOLERANCE: f64 = 1e-10;
/// Tail mass targeted by the default truncation rule.
pub const DEFAULT_TAIL_TARGET: f64 = 1e-12;
/// Upper bound on `Λ h` for one uniformization step; keeps `e^{-Λh}` far
/// from underflow.
const MAX_STEP_EXPONENT: f64 = 32.0;
/// Trajectories per Monte Carlo chunk. Chunk `i` draws from ChaCha8 stream
/// `i` of the user seed, so results do not depend on the thread count.
pub const TRAJECTORY_CHUNK: usize = 1 << 16;

/// Photon statistics of the light entering mode V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InputState {
    Fock(u32),
    Poissonian(f64),
    Thermal(f64),
}

impl InputState {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InputState::Fock(_) => Ok(()),
            InputState::Poissonian(m) | InputState::Thermal(m) => {
                if m.is_finite() && m >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "input mean must be >= 0, got {m}"
                    )))
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            InputState::Fock(n) => n as f64,
            InputState::Poissonian(m) | InputState::Thermal(m) => m,
        }
    }

    /// Photon-number distribution on `0..=n_max`; mass above `n_max` is dropped.
    pub fn probabilities(&self, n_max: usize) -> Vec<f64> {
        let mut p = vec![0.0; n_max + 1];
        match *self {
            InputState::Fock(n) => {
                if let Some(slot) = p.get_mut(n as usize) {
                    *slot = 1.0;
                }
            }
            InputState::Poissonian(m) => {
                let mut term = (-m).exp();
                for (n, slot) in p.iter_mut().enumerate() {
                    *slot = term;
                    term *= m / (n as f64 + 1.0);
                }
            }
            InputState::Thermal(m) => {
                let ratio = m / (m + 1.0);
                let mut term = 1.0 / (m + 1.0);
                for slot in p.iter_mut() {
                    *slot = term;
                    term *= ratio;
                }
            }
        }
        p
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match *self {
            InputState::Fock(n) => n,
            InputState::Poissonian(m) if m > 0.0 => {
                Poisson::new(m).expect("validated mean").sample(rng) as u32
            }
            InputState::Thermal(m) if m > 0.0 => Geometric::new(1.0 / (1.0 + m))
                .expect("validated mean")
                .sample(rng) as u32,
            _ => 0,
        }
    }
}

/// Joint probability table over `(n_V, n_H)`, `0 <= n_V, n_H <= n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPhotonDistribution {
    input: InputState,
    n_max: usize,
    /// Row-major, `grid[n_v * (n_max + 1) + n_h]`.
    grid: Vec<f64>,
    marginal_v: Vec<f64>,
    marginal_h: Vec<f64>,
    tail_mass: f64,
}

impl JointPhotonDistribution {
    pub fn input(&self) -> InputState {
        self.input
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Probability lost to the truncation, `1 - Σ grid`.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn get(&self, n_v: usize, n_h: usize) -> f64 {
        if n_v > self.n_max || n_h > self.n_max {
            return 0.0;
        }
        self.grid[n_v * (self.n_max + 1) + n_h]
    }

    pub fn marginal_v(&self) -> &[f64] {
        &self.marginal_v
    }

    pub fn marginal_h(&self) -> &[f64] {
        &self.marginal_h
    }

    pub fn total(&self) -> f64 {
        self.grid.iter().sum()
    }

    pub fn mean_v(&self) -> f64 {
        weighted_mean(&self.marginal_v) * self.marginal_h.iter().sum::<f64>()
    }

    pub fn mean_h(&self) -> f64 {
        weighted_mean(&self.marginal_h) * self.marginal_v.iter().sum::<f64>()
    }

    /// `(n_v, n_h, probability)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let w = self.n_max + 1;
        self.grid
            .iter()
            .enumerate()
            .map(move |(i, &p)| (i / w, i % w, p))
    }

    /// Writes the table as CSV with header `n_v,n_h,probability`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n_v,n_h,probability")?;
        for (v, h, p) in self.iter() {
            writeln!(out, "{v},{h},{p}")?;
        }
        Ok(())
    }
}

fn weighted_mean(p: &[f64]) -> f64 {
    p.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
}

/// Truncation and step-count overrides for [`evolve_master_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MasterOptions {
    pub n_max: Option<usize>,
    /// Number of fixed uniformization steps; by default the smallest count
    /// with `Λ h <= 32`.
    pub steps: Option<usize>,
    /// Defaults to [`TAIL_TOLERANCE`].
    pub tolerance: Option<f64>,
}

/// Smallest `n_max` for which a thermal distribution with the larger of the
/// two output means leaves less than [`DEFAULT_TAIL_TARGET`] above it.
///
/// Without absorption a thermal input stays thermal, and Fock or Poissonian
/// inputs of the same mean have lighter tails, so this bounds every case the
/// kernel handles at `Q = 1`.
pub fn default_n_max(input: &InputState, params: &AmplifierParams) -> usize {
    let spont = params.spontaneous_term();
    let mean = (params.gain() * input.mean() + spont)
        .max(spont)
        .max(input.mean());
    let floor = match input {
        InputState::Fock(n) => *n as usize + 8,
        _ => 8,
    };
    if mean <= 0.0 {
        return floor;
    }
    let ratio = mean / (mean + 1.0);
    let n = (DEFAULT_TAIL_TARGET.ln() / ratio.ln()).ceil() as usize;
    n.max(floor)
}

/// Evolves the input through the amplifier and returns the joint
/// photon-number distribution of the two output modes.
///
/// With `n_max = None` the truncation follows [`default_n_max`]. If the tail
/// mass exceeds [`TAIL_TOLERANCE`] the truncation is doubled once before a
/// [`Error::Truncation`] is returned.
pub fn evolve_master(
    input: InputState,
    params: &AmplifierParams,
    n_max: Option<usize>,
) -> Result<JointPhotonDistribution> {
    evolve_master_with(
        input,
        params,
        &MasterOptions {
            n_max,
            ..MasterOptions::default()
        },
    )
}

pub fn evolve_master_with(
    input: InputState,
    params: &AmplifierParams,
    options: &MasterOptions,
) -> Result<JointPhotonDistribution> {
    input.validate()?;
    let tolerance = options.tolerance.unwrap_or(TAIL_TOLERANCE);
    let n_max = options
        .n_max
        .unwrap_or_else(|| default_n_max(&input, params));
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    let first = evolve_truncated(input, params, n_max, options.steps);
    if first.tail_mass < tolerance {
        return Ok(first);
    }
    let second = evolve_truncated(input, params, 2 * n_max, options.steps);
    if second.tail_mass < tolerance {
        return Ok(second);
    }
    Err(Error::Truncation {
        n_max: second.n_max,
        tail_mass: second.tail_mass,
        tolerance,
    })
}

fn evolve_truncated(
    input: InputState,
    params: &AmplifierParams,
    n_max: usize,
    steps: Option<usize>,
) -> JointPhotonDistribution {
    let propagator = ModePropagator::new(params, n_max, steps);
    let marginal_v = propagator.propagate(input.probabilities(n_max));
    let marginal_h = propagator.propagate(InputState::Fock(0).probabilities(n_max));

    let mut grid = Vec::with_capacity((n_max + 1) * (n_max + 1));
    for pv in &marginal_v {
        grid.extend(marginal_h.iter().map(|ph| pv * ph));
    }
    let kept = marginal_v.iter().sum::<f64>() * marginal_h.iter().sum::<f64>();
    JointPhotonDistribution {
        input,
        n_max,
        grid,
        marginal_v,
        marginal_h,
        tail_mass: (1.0 - kept).max(0.0),
    }
}

/// Fixed-step uniformization of one mode's truncated generator.
///
/// With `Λ` the largest exit rate, `P = I + L/Λ` is substochastic with
/// non-negative entries and one step of length `h` is
/// `exp(L h) = Σ_k Poisson(k; Λh) P^k`, a sum of non-negative terms. Flux
/// out of `n_max` is discarded and shows up as tail mass.
struct ModePropagator {
    n_max: usize,
    emission: f64,
    absorption: f64,
    uniform_rate: f64,
    steps: usize,
    poisson_weights: Vec<f64>,
}

impl ModePropagator {
    fn new(params: &AmplifierParams, n_max: usize, steps: Option<usize>) -> Self {
        let emission = params.emission_rate();
        let absorption = params.absorption_rate();
        let uniform_rate = emission * (n_max as f64 + 1.0) + absorption * n_max as f64;
        let exponent = uniform_rate * params.duration();
        let steps = steps
            .unwrap_or_else(|| (exponent / MAX_STEP_EXPONENT).ceil() as usize)
            .max(1);
        let lambda_h = exponent / steps as f64;

        let mut poisson_weights = Vec::new();
        let mut w = (-lambda_h).exp();
        let mut acc = 0.0;
        let mut k = 0usize;
        while k < 10_000 {
            poisson_weights.push(w);
            acc += w;
            // past the mode the terms only shrink
            if 1.0 - acc < 1e-17 || (k as f64 > lambda_h && w < 1e-300) {
                break;
            }
            k += 1;
            w *= lambda_h / k as f64;
        }
        Self {
            n_max,
            emission,
            absorption,
            uniform_rate,
            steps,
            poisson_weights,
        }
    }

    fn apply_uniformized(&self, p: &[f64], out: &mut [f64]) {
        let lam = self.uniform_rate;
        for n in 0..=self.n_max {
            let nf = n as f64;
            let exit = self.emission * (nf + 1.0) + self.absorption * nf;
            let mut v = p[n] * (1.0 - exit / lam);
            if n > 0 {
                v += self.emission * nf / lam * p[n - 1];
            }
            if n < self.n_max {
                v += self.absorption * (nf + 1.0) / lam * p[n + 1];
            }
            out[n] = v;
        }
    }

    fn propagate(&self, mut p: Vec<f64>) -> Vec<f64> {
        if self.uniform_rate == 0.0 {
            return p;
        }
        let len = self.n_max + 1;
        let mut term = vec![0.0; len];
        let mut next = vec![0.0; len];
        let mut acc = vec![0.0; len];
        for _ in 0..self.steps {
            term.copy_from_slice(&p);
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (k, w) in self.poisson_weights.iter().enumerate() {
                if k > 0 {
                    self.apply_uniformized(&term, &mut next);
                    std::mem::swap(&mut term, &mut next);
                }
                for (a, t) in acc.iter_mut().zip(&term) {
                    *a += w * t;
                }
            }
            std::mem::swap(&mut p, &mut acc);
        }
        p
    }
}

/// Result of conditioning on exactly `M` output photons from a Fock(`N`)
/// input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostSelection {
    /// Outcome weights over `n_V = N + k`, `0 <= k <= M - N`, and the
    /// resulting fidelity `(N + k_bar)/M`.
    pub clone: ConditionalCloneResult,
    /// `P(M|N) = Σ_k p_M(k|N)`.
    pub probability: f64,
    /// Mass of `M`-photon outcomes with `n_V < N`, reachable only through
    /// absorption and outside the `k >= 0` outcome set.
    pub depleted_probability: f64,
}

/// Conditions a Fock-input distribution on `n_V + n_H = m_total`.
pub fn postselect_total(
    dist: &JointPhotonDistribution,
    n_in: u32,
    m_total: u32,
) -> Result<PostSelection> {
    let process = CloneProcess::new(n_in, m_total)?;
    if dist.input != InputState::Fock(n_in) {
        return Err(Error::InvalidArgument(format!(
            "post-selection needs a Fock({n_in}) input, distribution came from {:?}",
            dist.input
        )));
    }
    if m_total as usize > dist.n_max {
        return Err(Error::InvalidArgument(format!(
            "M = {m_total} exceeds n_max = {}",
            dist.n_max
        )));
    }
    let (n, m) = (n_in as usize, m_total as usize);
    let weights: Vec<f64> = (0..=m - n).map(|k| dist.get(n + k, m - n - k)).collect();
    let depleted_probability = (0..n).map(|v| dist.get(v, m - v)).sum();
    let probability: f64 = weights.iter().sum();
    if probability.is_nan() || probability < 1e-300 {
        return Err(Error::EmptySelection {
            m_total,
            probability,
        });
    }
    Ok(PostSelection {
        clone: ConditionalCloneResult::from_unnormalized(process, &weights)?,
        probability,
        depleted_probability,
    })
}

/// `P(M|N)`, the probability of the `N -> M` process.
pub fn process_probability(dist: &JointPhotonDistribution, n_in: u32, m_total: u32) -> Result<f64> {
    if dist.input != InputState::Fock(n_in) {
        return Err(Error::InvalidArgument(format!(
            "process probability needs a Fock({n_in}) input"
        )));
    }
    let (n, m) = (n_in as usize, m_total as usize);
    if m < n {
        return Ok(0.0);
    }
    Ok((n..=m).map(|v| dist.get(v, m - v)).sum())
}

/// Terminal photon numbers of independent Monte Carlo realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBatch {
    pub samples: Vec<(u32, u32)>,
    pub seed: u64,
    pub count: usize,
}

/// Mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl TrajectoryBatch {
    fn estimate(&self, f: impl Fn(&(u32, u32)) -> f64) -> Estimate {
        let n = self.samples.len() as f64;
        let mean = self.samples.iter().map(&f).sum::<f64>() / n;
        let var = if self.samples.len() > 1 {
            self.samples
                .iter()
                .map(|s| (f(s) - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            stderr: (var / n).sqrt(),
        }
    }

    pub fn mean_v(&self) -> Estimate {
        self.estimate(|s| s.0 as f64)
    }

    pub fn mean_h(&self) -> Estimate {
        self.estimate(|s| s.1 as f64)
    }

    /// Empirical post-selection on `n_V + n_H = M` with `n_V >= N`.
    pub fn postselect(&self, n_in: u32, m_total: u32) -> Result<PostSelection> {
        let process = CloneProcess::new(n_in, m_total)?;
        let mut counts = vec![0.0; process.added() as usize + 1];
        let mut depleted = 0usize;
        for &(v, h) in &self.samples {
            if v + h != m_total {
                continue;
            }
            if v >= n_in {
                counts[(v - n_in) as usize] += 1.0;
            } else {
                depleted += 1;
            }
        }
        let selected: f64 = counts.iter().sum();
        if selected == 0.0 {
            return Err(Error::EmptySelection {
                m_total,
                probability: 0.0,
            });
        }
        let total = self.samples.len() as f64;
        Ok(PostSelection {
            clone: ConditionalCloneResult::from_unnormalized(process, &counts)?,
            probability: selected / total,
            depleted_probability: depleted as f64 / total,
        })
    }
}

/// Exact event-time (Gillespie) simulation of `count` trajectories.
///
/// The batch is cut into chunks of [`TRAJECTORY_CHUNK`]; chunk `i` uses
/// ChaCha8 stream `i` seeded from `seed`. Chunks run in parallel and are
/// concatenated in order, so the output depends only on `(seed, count)`.
pub fn sample_trajectories(
    input: InputState,
    params: &AmplifierParams,
    count: usize,
    seed: u64,
) -> Result<TrajectoryBatch> {
    input.validate()?;
    if count == 0 {
        return Err(Error::InvalidArgument(
            "trajectory count must be >= 1".into(),
        ));
    }
    let chunks = count.div_ceil(TRAJECTORY_CHUNK);
    let samples = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let len = TRAJECTORY_CHUNK.min(count - chunk * TRAJECTORY_CHUNK);
            (0..len)
                .map(|_| run_trajectory(&input, params, &mut rng))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat();
    Ok(TrajectoryBatch {
        samples,
        seed,
        count,
    })
}

fn run_trajectory<R: Rng + ?Sized>(
    input: &InputState,
    params: &AmplifierParams,
    rng: &mut R,
) -> (u32, u32) {
    let a = params.emission_rate();
    let b = params.absorption_rate();
    let mut v = input.sample(rng);
    let mut h = 0u32;
    let mut t = 0.0;
    loop {
        let (vf, hf) = (v as f64, h as f64);
        let rates = [a * (vf + 1.0), b * vf, a * (hf + 1.0), b * hf];
        let total: f64 = rates.iter().sum();
        if total <= 0.0 {
            break;
        }
        let wait: f64 = Exp1.sample(rng);
        t += wait / total;
        if t > params.duration() {
            break;
        }
        let mut pick = rng.random::<f64>() * total;
        let mut event = rates.len() - 1;
        for (i, r) in rates.iter().enumerate() {
            if pick < *r {
                event = i;
                break;
            }
            pick -= r;
        }
        match event {
            0 => v += 1,
            1 => v -= 1,
            2 => h += 1,
            _ => h -= 1,
        }
    }
    (v, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloning::{mean_outputs, optimal_fidelity};

    fn amp(g: f64, q: f64) -> AmplifierParams {
        AmplifierParams::from_gain_merit(g, q).unwrap()
    }

    /// Closed-form Q = 1 output for a Fock(N) input: negative binomial in
    /// mode V, geometric in mode H, with `p = 1/G`.
    fn negative_binomial(n: u32, k: usize, g: f64) -> f64 {
        let p = 1.0 / g;
        let mut c = 1.0;
        for j in 0..k {
            c *= (n as f64 + j as f64 + 1.0) / (j as f64 + 1.0);
        }
        c * p.powi(n as i32 + 1) * (1.0 - p).powi(k as i32)
    }

    #[test]
    fn matches_closed_form_without_absorption() {
        let g = 4.0 / 3.0;
        let dist = evolve_master(InputState::Fock(2), &amp(g, 1.0), None).unwrap();
        for k in 0..20 {
            let exact = negative_binomial(2, k, g);
            assert!((dist.marginal_v()[2 + k] - exact).abs() < 1e-13, "k = {k}");
            let exact_h = negative_binomial(0, k, g);
            assert!((dist.marginal_h()[k] - exact_h).abs() < 1e-13);
        }
        assert!(dist.marginal_v()[0] == 0.0 && dist.marginal_v()[1] == 0.0);
    }

    #[test]
    fn worked_example_means() {
        let dist = evolve_master(InputState::Fock(1), &amp(4.0 / 3.0, 1.0), Some(30)).unwrap();
        assert!((dist.mean_v() - 5.0 / 3.0).abs() < 1e-9);
        assert!((dist.mean_h() - 1.0 / 3.0).abs() < 1e-9);
        assert!(dist.tail_mass() < TAIL_TOLERANCE);
    }

    #[test]
    fn thermal_means_match_mean_field() {
        let params = amp(1.2686, 0.8);
        let dist = evolve_master(InputState::Thermal(1.0), &params, None).unwrap();
        let expect = mean_outputs(&params, 1.0).unwrap();
        assert!(((dist.mean_v() - expect.mu_v) / expect.mu_v).abs() < 1e-9);
        assert!(((dist.mean_h() - expect.mu_h) / expect.mu_h).abs() < 1e-9);
        assert!((dist.mean_v() - 1.6043).abs() < 1e-3);
    }

    #[test]
    fn vacuum_input_is_mode_symmetric() {
        for params in [amp(1.7, 0.6), AmplifierParams::balanced(0.4).unwrap()] {
            let dist = evolve_master(InputState::Fock(0), &params, None).unwrap();
            for v in 0..=dist.n_max() {
                for h in 0..=dist.n_max() {
                    assert_eq!(dist.get(v, h), dist.get(h, v));
                }
            }
        }
    }

    #[test]
    fn step_doubling_does_not_move_means() {
        let params = amp(2.0, 0.6);
        let input = InputState::Poissonian(2.0);
        let base = evolve_master(input, &params, None).unwrap();
        let n_max = base.n_max();
        let steps = ModePropagator::new(&params, n_max, None).steps;
        let doubled = evolve_master_with(
            input,
            &params,
            &MasterOptions {
                n_max: Some(n_max),
                steps: Some(2 * steps),
                ..MasterOptions::default()
            },
        )
        .unwrap();
        assert!((base.mean_v() - doubled.mean_v()).abs() < 1e-11);
        assert!((base.mean_h() - doubled.mean_h()).abs() < 1e-11);
    }

    #[test]
    fn truncation_is_raised_once_then_errors() {
        let params = amp(3.0, 1.0);
        let ok = evolve_master_with(
            InputState::Fock(0),
            &params,
            &MasterOptions {
                n_max: Some(40),
                tolerance: Some(1e-6),
                ..MasterOptions::default()
            },
        )
        .unwrap();
        assert_eq!(ok.n_max(), 40);
        let raised = evolve_master(InputState::Fock(0), &params, Some(40)).unwrap();
        assert_eq!(raised.n_max(), 80);
        let err = evolve_master(InputState::Fock(0), &params, Some(5)).unwrap_err();
        assert!(matches!(err, Error::Truncation { n_max: 10, .. }));
    }

    #[test]
    fn postselection_recovers_optimal_cloner() {
        let dist = evolve_master(InputState::Fock(1), &amp(1.5, 1.0), None).unwrap();
        let sel = postselect_total(&dist, 1, 2).unwrap();
        assert!((sel.clone.weights[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((sel.clone.fidelity - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(sel.depleted_probability, 0.0);

        let same = postselect_total(&dist, 1, 1).unwrap();
        assert_eq!(same.clone.weights, vec![1.0]);
        assert_eq!(same.clone.fidelity, 1.0);

        let dist = evolve_master(InputState::Fock(2), &amp(2.0, 1.0), None).unwrap();
        let sel = postselect_total(&dist, 2, 4).unwrap();
        assert!((sel.clone.fidelity - 0.875).abs() < 1e-12);
    }

    #[test]
    fn postselection_errors() {
        let dist = evolve_master(InputState::Thermal(1.0), &amp(1.5, 1.0), None).unwrap();
        assert!(postselect_total(&dist, 1, 2).is_err());
        let dist = evolve_master(InputState::Fock(1), &AmplifierParams::identity(), None).unwrap();
        assert!(matches!(
            postselect_total(&dist, 1, 3),
            Err(Error::EmptySelection { m_total: 3, .. })
        ));
        assert!(postselect_total(&dist, 2, 1).is_err());
    }

    #[test]
    fn process_probability_is_complete() {
        let dist = evolve_master(InputState::Fock(1), &amp(4.0 / 3.0, 1.0), None).unwrap();
        let total: f64 = (0..=dist.n_max() as u32)
            .map(|m| process_probability(&dist, 1, m).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
        // C(3,1) p^3 (1-p) with p = 3/4
        let p12 = process_probability(&dist, 1, 2).unwrap();
        assert!((p12 - 81.0 / 256.0).abs() < 1e-12);

        let weak = evolve_master(InputState::Fock(1), &amp(1.0 + 1e-6, 1.0), None).unwrap();
        assert!((process_probability(&weak, 1, 1).unwrap() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn absorption_degrades_conditional_fidelity() {
        let mut last = f64::INFINITY;
        for q in [1.0, 0.9, 0.8, 0.6] {
            let dist = evolve_master(InputState::Fock(2), &amp(1.5, q), None).unwrap();
            let f = postselect_total(&dist, 2, 4).unwrap().clone.fidelity;
            assert!(f <= last + 1e-12, "Q = {q}: {f} > {last}");
            last = f;
        }
        assert!(last < optimal_fidelity(CloneProcess::new(2, 4).unwrap()));
    }

    #[test]
    fn trajectories_are_deterministic_and_chunked() {
        let params = amp(1.5, 0.8);
        let a = sample_trajectories(InputState::Thermal(0.5), &params, 70_000, 7).unwrap();
        let b = sample_trajectories(InputState::Thermal(0.5), &params, 70_000, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples.len(), 70_000);
        // the first chunk does not depend on how many chunks follow
        let short = sample_trajectories(InputState::Thermal(0.5), &params, 1000, 7).unwrap();
        assert_eq!(&a.samples[..1000], &short.samples[..]);
        let other = sample_trajectories(InputState::Thermal(0.5), &params, 1000, 8).unwrap();
        assert_ne!(short.samples, other.samples);
    }

    #[test]
    fn no_interaction_leaves_vacuum() {
        let params = AmplifierParams::from_rates(1e-15, 0.0, 1.0).unwrap();
        let batch = sample_trajectories(InputState::Fock(0), &params, 10_000, 1).unwrap();
        assert!(batch.samples.iter().all(|&s| s == (0, 0)));
        assert!(sample_trajectories(InputState::Fock(0), &params, 0, 1).is_err());
    }

    #[test]
    fn monte_carlo_means_agree_with_master_equation() {
        let params = amp(1.8, 0.7);
        let input = InputState::Poissonian(1.5);
        let dist = evolve_master(input, &params, None).unwrap();
        let batch = sample_trajectories(input, &params, 100_000, 2024).unwrap();
        let (v, h) = (batch.mean_v(), batch.mean_h());
        assert!((v.mean - dist.mean_v()).abs() < 5.0 * v.stderr);
        assert!((h.mean - dist.mean_h()).abs() < 5.0 * h.stderr);
    }

    #[test]
    fn csv_layout() {
        let dist =
            evolve_master(InputState::Fock(0), &AmplifierParams::identity(), Some(1)).unwrap();
        let mut buf = Vec::new();
        dist.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "n_v,n_h,probability\n0,0,1\n0,1,0\n1,0,0\n1,1,0\n"
        );
    }
}
