//! Closed-form cloning fidelities.
//!
//! Two levels are covered. For a Fock input of `N` photons post-selected on
//! `M` output photons, stimulated emission weights the outcome "`N + k`
//! photons in the input mode" by the binomial factor `(N+k)! / (N! k!)`, and
//! the resulting fidelity is the optimal `N -> M` universal cloning fidelity
//! `(MN + M + N) / (M (N + 2))`. For mean intensities, the amplifier is
//! described by a gain `G` and a merit figure `Q`, with
//! `mu_V = G mu_in + (G - 1)/Q` and `mu_H = (G - 1)/Q`.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `N -> M` photon-number process: `n_in` photons in the input
/// polarization mode, `m_out` photons in total at the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CloneProcess {
    n_in: u32,
    m_out: u32,
}

impl CloneProcess {
    pub fn new(n_in: u32, m_out: u32) -> Result<Self> {
        if m_out < n_in || m_out == 0 {
            return Err(Error::InvalidProcess { n_in, m_out });
        }
        Ok(Self { n_in, m_out })
    }

    pub fn n_in(&self) -> u32 {
        self.n_in
    }

    pub fn m_out(&self) -> u32 {
        self.m_out
    }

    /// Number of photons added by the amplifier, `M - N`.
    pub fn added(&self) -> u32 {
        self.m_out - self.n_in
    }
}

/// Post-selected outcome distribution of a clone process.
///
/// `weights[k]` is the conditional probability that `N + k` of the `M`
/// output photons are in the input mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalCloneResult {
    pub process: CloneProcess,
    pub weights: Vec<f64>,
    pub k_bar: f64,
    pub fidelity: f64,
}

impl ConditionalCloneResult {
    /// Normalizes `weights` and derives `k_bar` and the fidelity.
    pub(crate) fn from_unnormalized(process: CloneProcess, weights: &[f64]) -> Result<Self> {
        if weights.len() != process.added() as usize + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} weights for {} -> {}, got {}",
                process.added() + 1,
                process.n_in,
                process.m_out,
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "weights must be finite and non-negative, got {w}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("weights are all zero".into()));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let k_bar = weights
            .iter()
            .enumerate()
            .map(|(k, w)| k as f64 * w)
            .sum::<f64>();
        let fidelity = (process.n_in as f64 + k_bar) / process.m_out as f64;
        Ok(Self {
            process,
            weights,
            k_bar,
            fidelity,
        })
    }
}

/// Optimal `N -> M` fidelity as an exact reduced fraction.
pub fn optimal_fidelity_ratio(process: CloneProcess) -> Ratio<u128> {
    let n = process.n_in as u128;
    let m = process.m_out as u128;
    Ratio::new(m * n + m + n, m * (n + 2))
}

/// Optimal universal cloning fidelity `(MN + M + N) / (M (N + 2))`.
pub fn optimal_fidelity(process: CloneProcess) -> f64 {
    let r = optimal_fidelity_ratio(process);
    *r.numer() as f64 / *r.denom() as f64
}

/// Conditional outcome weights for an absorption-free stimulated-emission
/// amplifier: `w[k] ∝ C(N + k, k)` for `k = 0..=M-N`.
pub fn stimulated_weights(process: CloneProcess) -> ConditionalCloneResult {
    let n = process.n_in as f64;
    let len = process.added() as usize + 1;
    let mut weights = Vec::with_capacity(len);
    let mut w = 1.0_f64;
    for k in 0..len {
        if w > 1e250 {
            // keep the ratios, drop the scale
            weights.iter_mut().for_each(|x: &mut f64| *x *= 1e-250);
            w *= 1e-250;
        }
        weights.push(w);
        w *= (n + k as f64 + 1.0) / (k as f64 + 1.0);
    }
    ConditionalCloneResult::from_unnormalized(process, &weights)
        .expect("binomial weights are positive and sized to the process")
}

/// Fidelity `(N + k_bar) / M` of an arbitrary (unnormalized) outcome
/// distribution over `k = 0..=M-N`.
pub fn fidelity_from_distribution(process: CloneProcess, weights: &[f64]) -> Result<f64> {
    ConditionalCloneResult::from_unnormalized(process, weights).map(|r| r.fidelity)
}

/// Microscopic description of the amplifier: per-mode emission rate `A`
/// (birth rate `A (n + 1)`), absorption rate `B` (death rate `B n`) and
/// interaction time `tau`.
///
/// Macroscopically `G = exp((A - B) tau)` and `Q = (A - B) / A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplifierParams {
    emission_rate: f64,
    absorption_rate: f64,
    duration: f64,
}

impl AmplifierParams {
    /// Maps `(G, Q)` onto rates with `tau = 1`, `A = ln(G)/Q`, `B = A (1 - Q)`.
    ///
    /// `G = 1` gives the identity amplifier regardless of `Q`.
    pub fn from_gain_merit(gain: f64, merit: f64) -> Result<Self> {
        if !(gain.is_finite() && gain >= 1.0) {
            return Err(Error::InvalidParams(format!(
                "gain must be >= 1, got {gain}"
            )));
        }
        if !(merit > 0.0 && merit <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "merit must lie in (0, 1], got {merit}"
            )));
        }
        let a = gain.ln() / merit;
        Ok(Self {
            emission_rate: a,
            absorption_rate: a * (1.0 - merit),
            duration: 1.0,
        })
    }

    pub fn from_rates(emission_rate: f64, absorption_rate: f64, duration: f64) -> Result<Self> {
        let finite =
            emission_rate.is_finite() && absorption_rate.is_finite() && duration.is_finite();
        if !finite || emission_rate <= 0.0 || absorption_rate < 0.0 || duration <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "need A > 0, B >= 0, tau > 0; got A = {emission_rate}, B = {absorption_rate}, tau = {duration}"
            )));
        }
        if absorption_rate > emission_rate {
            return Err(Error::InvalidParams(format!(
                "absorption {absorption_rate} exceeds emission {emission_rate} (gain < 1)"
            )));
        }
        Ok(Self {
            emission_rate,
            absorption_rate,
            duration,
        })
    }

    /// The `G = 1, Q = 0` family: emission exactly balanced by absorption,
    /// every added photon spontaneous. `spontaneous` is the mean number of
    /// photons added per mode, `A tau`.
    pub fn balanced(spontaneous: f64) -> Result<Self> {
        if !(spontaneous.is_finite() && spontaneous >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "spontaneous output must be >= 0, got {spontaneous}"
            )));
        }
        Ok(Self {
            emission_rate: spontaneous,
            absorption_rate: spontaneous,
            duration: 1.0,
        })
    }

    pub fn identity() -> Self {
        Self {
            emission_rate: 0.0,
            absorption_rate: 0.0,
            duration: 1.0,
        }
    }

    pub fn emission_rate(&self) -> f64 {
        self.emission_rate
    }

    pub fn absorption_rate(&self) -> f64 {
        self.absorption_rate
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn gain(&self) -> f64 {
        ((self.emission_rate - self.absorption_rate) * self.duration).exp()
    }

    /// `Q = (A - B)/A`; the identity amplifier has no absorption, so `Q = 1`.
    pub fn merit(&self) -> f64 {
        if self.emission_rate == 0.0 {
            1.0
        } else {
            (self.emission_rate - self.absorption_rate) / self.emission_rate
        }
    }

    /// Mean photons added per mode by spontaneous emission, `(G - 1)/Q`.
    ///
    /// Evaluated as `A tau (e^x - 1)/x` with `x = (A - B) tau`, which stays
    /// finite on the balanced family where it tends to `A tau`.
    pub fn spontaneous_term(&self) -> f64 {
        let x = (self.emission_rate - self.absorption_rate) * self.duration;
        let a_tau = self.emission_rate * self.duration;
        if x == 0.0 {
            a_tau
        } else {
            a_tau * x.exp_m1() / x
        }
    }
}

/// Mean photons per mode at the amplifier input and in each output
/// polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanIntensities {
    pub mu_in: f64,
    pub mu_v: f64,
    pub mu_h: f64,
}

impl MeanIntensities {
    pub fn mu_out(&self) -> f64 {
        self.mu_v + self.mu_h
    }

    pub fn fidelity(&self) -> Result<f64> {
        mean_fidelity(self.mu_v, self.mu_h)
    }
}

/// Output intensities of the amplifier for an input of `mu_in` photons per
/// mode polarized along V.
pub fn mean_outputs(params: &AmplifierParams, mu_in: f64) -> Result<MeanIntensities> {
    if !(mu_in.is_finite() && mu_in >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mu_in must be >= 0, got {mu_in}"
        )));
    }
    let spont = params.spontaneous_term();
    Ok(MeanIntensities {
        mu_in,
        mu_v: params.gain() * mu_in + spont,
        mu_h: spont,
    })
}

/// Gain implied by `Q` and the measured mean photon numbers,
/// `G = (Q mu_out + 2)/(Q mu_in + 2)`.
pub fn gain_from_mus(merit: f64, mu_in: f64, mu_out: f64) -> Result<f64> {
    if !(merit > 0.0 && merit <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "merit must lie in (0, 1], got {merit}"
        )));
    }
    if !(mu_in.is_finite() && mu_in >= 0.0 && mu_out.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "mu_in must be finite and >= 0, got {mu_in}"
        )));
    }
    if mu_out < mu_in {
        return Err(Error::InvalidArgument(format!(
            "mu_out {mu_out} < mu_in {mu_in} implies a gain below 1"
        )));
    }
    Ok((merit * mu_out + 2.0) / (merit * mu_in + 2.0))
}

/// Fraction of output photons found in the input polarization,
/// `mu_V / (mu_V + mu_H)`.
pub fn mean_fidelity(mu_v: f64, mu_h: f64) -> Result<f64> {
    if !(mu_v >= 0.0 && mu_h >= 0.0) || !(mu_v.is_finite() && mu_h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "intensities must be finite and >= 0, got ({mu_v}, {mu_h})"
        )));
    }
    if mu_v + mu_h == 0.0 {
        return Err(Error::InvalidArgument("no output light".into()));
    }
    Ok(mu_v / (mu_v + mu_h))
}

/// Mean fidelity predicted from `Q` and the mean photon numbers:
/// `(Q mu_out mu_in + mu_out + mu_in) / (Q mu_out mu_in + 2 mu_out)`.
///
/// `Q = 0` is evaluated by direct substitution, `(mu_in + mu_out)/(2 mu_out)`.
pub fn mean_fidelity_model(merit: f64, mu_in: f64, mu_out: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&merit) {
        return Err(Error::InvalidArgument(format!(
            "merit must lie in [0, 1], got {merit}"
        )));
    }
    if !(mu_in.is_finite() && mu_in >= 0.0 && mu_out.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "mu_in must be finite and >= 0, got {mu_in}"
        )));
    }
    if mu_out <= 0.0 {
        return Err(Error::InvalidArgument("mu_out must be > 0".into()));
    }
    if mu_out < mu_in {
        return Err(Error::InvalidArgument(format!(
            "mu_out {mu_out} < mu_in {mu_in}"
        )));
    }
    Ok(fidelity_model(merit, mu_in, mu_out))
}

/// Unchecked form used by the fitters, where noisy data may have
/// `mu_out < mu_in`.
pub(crate) fn fidelity_model(merit: f64, mu_in: f64, mu_out: f64) -> f64 {
    let cross = merit * mu_out * mu_in;
    (cross + mu_out + mu_in) / (cross + 2.0 * mu_out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u32, m: u32) -> CloneProcess {
        CloneProcess::new(n, m).unwrap()
    }

    #[test]
    fn optimal_fidelity_examples() {
        assert_eq!(optimal_fidelity_ratio(p(1, 2)), Ratio::new(5, 6));
        assert_eq!(optimal_fidelity(p(1, 2)), 5.0 / 6.0);
        assert_eq!(optimal_fidelity(p(3, 3)), 1.0);
        assert_eq!(optimal_fidelity(p(2, 4)), 0.875);
        assert_eq!(optimal_fidelity(p(3, 6)), 0.9);
    }

    #[test]
    fn rejects_bad_processes() {
        assert!(matches!(
            CloneProcess::new(3, 2),
            Err(Error::InvalidProcess { n_in: 3, m_out: 2 })
        ));
        assert!(CloneProcess::new(0, 0).is_err());
        assert!(CloneProcess::new(0, 1).is_ok());
    }

    #[test]
    fn stimulated_weights_examples() {
        let r = stimulated_weights(p(1, 2));
        assert!((r.weights[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.weights[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.fidelity - 5.0 / 6.0).abs() < 1e-15);

        let r = stimulated_weights(p(0, 1));
        assert_eq!(r.weights, vec![0.5, 0.5]);
        assert_eq!(r.fidelity, 0.5);

        let r = stimulated_weights(p(2, 4));
        for (w, e) in r.weights.iter().zip([0.1, 0.3, 0.6]) {
            assert!((w - e).abs() < 1e-15);
        }
        assert!((r.k_bar - 1.5).abs() < 1e-15);
        assert!((r.fidelity - 0.875).abs() < 1e-15);
    }

    #[test]
    fn vacuum_input_is_half_for_any_m() {
        for m in 1..50 {
            assert!((stimulated_weights(p(0, m)).fidelity - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn stimulated_weights_survive_huge_binomials() {
        let r = stimulated_weights(p(5, 3000));
        assert!(r.weights.iter().all(|w| w.is_finite()));
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((r.fidelity - optimal_fidelity(r.process)).abs() < 1e-10);
    }

    #[test]
    fn fidelity_from_distribution_examples() {
        assert!(
            (fidelity_from_distribution(p(1, 2), &[1.0, 2.0]).unwrap() - 5.0 / 6.0).abs() < 1e-15
        );
        assert_eq!(
            fidelity_from_distribution(p(1, 2), &[1.0, 0.0]).unwrap(),
            0.5
        );
        assert_eq!(
            fidelity_from_distribution(p(1, 2), &[0.0, 1.0]).unwrap(),
            1.0
        );
        assert!(fidelity_from_distribution(p(1, 2), &[0.0, 0.0]).is_err());
        assert!(fidelity_from_distribution(p(1, 2), &[-1.0, 2.0]).is_err());
        assert!(fidelity_from_distribution(p(1, 2), &[1.0]).is_err());
    }

    #[test]
    fn mean_outputs_examples() {
        let id = AmplifierParams::from_gain_merit(1.0, 0.3).unwrap();
        let out = mean_outputs(&id, 0.7).unwrap();
        assert!((out.mu_v - 0.7).abs() < 1e-15);
        assert_eq!(out.mu_h, 0.0);

        let amp = AmplifierParams::from_gain_merit(1.2686, 0.8).unwrap();
        let out = mean_outputs(&amp, 1.0).unwrap();
        assert!((out.mu_v - 1.60435).abs() < 1e-12);
        assert!((out.mu_h - 0.33575).abs() < 1e-12);
        assert!((out.mu_out() - 1.9401).abs() < 1e-12);

        let amp = AmplifierParams::from_gain_merit(4.0 / 3.0, 1.0).unwrap();
        let out = mean_outputs(&amp, 1.0).unwrap();
        assert!((out.mu_v - 5.0 / 3.0).abs() < 1e-14);
        assert!((out.mu_h - 1.0 / 3.0).abs() < 1e-14);
        assert!((out.mu_out() - 2.0).abs() < 1e-14);

        assert!(mean_outputs(&amp, -0.1).is_err());
    }

    #[test]
    fn gain_from_mus_examples() {
        let g = gain_from_mus(0.8, 1.0, 1.94).unwrap();
        assert!((g - 3.552 / 2.8).abs() < 1e-15);
        assert!((g - 1.2686).abs() < 1e-4);
        assert!((gain_from_mus(1.0, 1.0, 2.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(gain_from_mus(0.37, 2.5, 2.5).unwrap(), 1.0);
        assert!(gain_from_mus(0.8, 2.0, 1.0).is_err());
        assert!(gain_from_mus(0.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn mean_fidelity_examples() {
        let f = mean_fidelity(1.6043, 0.3357).unwrap();
        assert!((f - 1.6043 / 1.94).abs() < 1e-15);
        assert!((f - 0.8270).abs() < 1e-4);
        assert_eq!(mean_fidelity(2.5, 0.0).unwrap(), 1.0);
        assert_eq!(mean_fidelity(0.4, 0.4).unwrap(), 0.5);
        assert!(mean_fidelity(0.0, 0.0).is_err());
        assert!(mean_fidelity(-1.0, 2.0).is_err());
    }

    #[test]
    fn mean_fidelity_model_examples() {
        assert!((mean_fidelity_model(1.0, 1.0, 2.0).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        let f = mean_fidelity_model(0.8, 1.0, 1.94).unwrap();
        assert!((f - 4.492 / 5.432).abs() < 1e-15);
        assert!((f - 0.8270).abs() < 1e-4);
        for q in [0.0, 0.3, 1.0] {
            assert_eq!(mean_fidelity_model(q, 0.0, 1.7).unwrap(), 0.5);
        }
        assert!(mean_fidelity_model(0.5, 0.0, 0.0).is_err());
        assert!(mean_fidelity_model(1.5, 1.0, 2.0).is_err());
    }

    #[test]
    fn q_zero_limit_is_direct_substitution() {
        let (mi, mo) = (0.6, 2.9);
        let f = mean_fidelity_model(0.0, mi, mo).unwrap();
        assert_eq!(f, (mi + mo) / (2.0 * mo));
        let near = mean_fidelity_model(1e-9, mi, mo).unwrap();
        assert!((near - f).abs() < 1e-8);
    }

    #[test]
    fn params_round_trip() {
        let amp = AmplifierParams::from_gain_merit(2.0, 0.6).unwrap();
        assert!((amp.gain() - 2.0).abs() < 1e-14);
        assert!((amp.merit() - 0.6).abs() < 1e-14);
        assert!((amp.spontaneous_term() - 1.0 / 0.6).abs() < 1e-13);

        let micro = AmplifierParams::from_rates(2.0, 0.5, 0.4).unwrap();
        assert!((micro.merit() - 0.75).abs() < 1e-15);
        assert!((micro.gain() - (0.6f64).exp()).abs() < 1e-15);

        let bal = AmplifierParams::balanced(0.25).unwrap();
        assert_eq!(bal.gain(), 1.0);
        assert_eq!(bal.merit(), 0.0);
        assert_eq!(bal.spontaneous_term(), 0.25);

        assert_eq!(
            AmplifierParams::from_rates(1.0, 0.0, 1.0).unwrap().merit(),
            1.0
        );
        assert!(AmplifierParams::from_gain_merit(0.9, 0.5).is_err());
        assert!(AmplifierParams::from_gain_merit(1.5, 0.0).is_err());
        assert!(AmplifierParams::from_gain_merit(1.5, 1.1).is_err());
        assert!(AmplifierParams::from_rates(1.0, 2.0, 1.0).is_err());
        assert!(AmplifierParams::from_rates(0.0, 0.0, 1.0).is_err());
    }
}
