//! Measurement ingestion, `(G, Q)` estimation and fidelity curves.
//!
//! Records are mean photon numbers per mode: `mu_in` at the amplifier input
//! and `mu_V`, `mu_H` in the two output polarizations. Two estimators are
//! provided:
//!
//! * [`fit_linear_means`] regresses `mu_V` on `mu_in` (slope `G`, intercept
//!   `(G-1)/Q`) and pools the intercept with the mean of `mu_H`;
//! * [`fit_fidelity_curve`] fixes `G` and fits `Q` to the measured fidelity
//!   `mu_V / mu_out` through the mean-fidelity model.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloning::{fidelity_model, mean_outputs, AmplifierParams};
use crate::error::{Error, Result};
use crate::optimize::golden_section;
use crate::units::{apply_loss_db, extinction_floor, power_to_photons, CalibrationConfig};

pub const PHOTONS_HEADER: &str = "mu_in,mu_v,mu_h";
pub const RAW_HEADER: &str = "p_in_watts,p_v_watts,p_h_watts";

/// Golden-section bracket width for the merit fit.
pub const MERIT_TOLERANCE: f64 = 1e-7;

/// One operating point, in photons per mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub mu_in: f64,
    pub mu_v: f64,
    pub mu_h: f64,
}

impl MeasurementRecord {
    pub fn new(mu_in: f64, mu_v: f64, mu_h: f64) -> Result<Self> {
        let all = [mu_in, mu_v, mu_h];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "photon numbers must be finite and >= 0, got ({mu_in}, {mu_v}, {mu_h})"
            )));
        }
        if mu_v + mu_h <= 0.0 {
            return Err(Error::InvalidArgument("record has no output light".into()));
        }
        Ok(Self { mu_in, mu_v, mu_h })
    }

    pub fn mu_out(&self) -> f64 {
        self.mu_v + self.mu_h
    }

    pub fn fidelity(&self) -> f64 {
        self.mu_v / self.mu_out()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    RawWatts,
    Photons,
}

/// Parses a records CSV. Raw powers are converted to photons per mode: the
/// input path loss is applied to the source reference power and the output
/// path loss is removed from both polarization readings.
pub fn parse_records(
    text: &str,
    units: Units,
    calibration: Option<&CalibrationConfig>,
) -> Result<Vec<MeasurementRecord>> {
    let (header, cal) = match units {
        Units::Photons => (PHOTONS_HEADER, None),
        Units::RawWatts => (
            RAW_HEADER,
            Some(calibration.ok_or(Error::MissingCalibration)?),
        ),
    };
    let mode = cal.map(|c| c.mode()).transpose()?;

    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, h)) if h.replace(' ', "") == header => {}
        Some((line, h)) => {
            return Err(Error::Parse {
                line,
                message: format!("expected header `{header}`, found `{h}`"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file".into(),
            })
        }
    }

    let mut records = Vec::new();
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let mut values = [0.0; 3];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("not a number: `{field}`"),
            })?;
            if !slot.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("not finite: `{field}`"),
                });
            }
            if *slot < 0.0 {
                let what = if units == Units::RawWatts {
                    "power"
                } else {
                    "photon number"
                };
                return Err(Error::Parse {
                    line,
                    message: format!("negative {what}: {field}"),
                });
            }
        }
        let [a, v, h] = values;
        let record = match (cal, mode) {
            (Some(cal), Some(mode)) => MeasurementRecord {
                mu_in: power_to_photons(apply_loss_db(a, cal.input_path_loss_db), &mode)?,
                mu_v: power_to_photons(apply_loss_db(v, -cal.output_path_loss_db), &mode)?,
                mu_h: power_to_photons(apply_loss_db(h, -cal.output_path_loss_db), &mode)?,
            },
            _ => MeasurementRecord {
                mu_in: a,
                mu_v: v,
                mu_h: h,
            },
        };
        if record.mu_out() <= 0.0 {
            return Err(Error::Parse {
                line,
                message: "no output light (mu_v + mu_h = 0)".into(),
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn ingest(
    path: impl AsRef<Path>,
    calibration: Option<&CalibrationConfig>,
    units: Units,
) -> Result<Vec<MeasurementRecord>> {
    parse_records(&std::fs::read_to_string(path)?, units, calibration)
}

/// Writes records in the photons-mode CSV schema.
pub fn write_records_csv<W: Write>(
    records: &[MeasurementRecord],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{PHOTONS_HEADER}")?;
    for r in records {
        writeln!(out, "{},{},{}", r.mu_in, r.mu_v, r.mu_h)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    LinearMeans,
    FidelityCurve,
}

/// Fidelity at one input level for the worst (`Q = 0`), fitted and optimal
/// (`Q = 1`) cloners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub mu_in: f64,
    pub f_q0: f64,
    pub f_qfit: Option<f64>,
    pub f_q1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: FitMethod,
    #[serde(rename = "gain")]
    pub gain_estimate: f64,
    pub gain_stderr: f64,
    /// `None` when the data carry no spontaneous emission to scale by.
    #[serde(rename = "merit")]
    pub merit_estimate: Option<f64>,
    pub merit_stderr: Option<f64>,
    /// Photons per mode for [`FitMethod::LinearMeans`], fidelity units for
    /// [`FitMethod::FidelityCurve`].
    pub residual_rms: f64,
    /// Set when an estimate fell outside `G >= 1`, `0 <= Q <= 1` and was clamped.
    pub clamped: bool,
    pub raw_gain: f64,
    pub raw_merit: Option<f64>,
    pub curve: Vec<CurvePoint>,
}

impl FitReport {
    /// Fitted-curve fidelity at the curve point closest to `mu_in`.
    pub fn fidelity_at(&self, mu_in: f64) -> Option<f64> {
        self.curve
            .iter()
            .min_by(|a, b| (a.mu_in - mu_in).abs().total_cmp(&(b.mu_in - mu_in).abs()))
            .and_then(|p| p.f_qfit)
    }
}

fn check_design(records: &[MeasurementRecord]) -> Result<()> {
    if records.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 records, got {}",
            records.len()
        )));
    }
    let first = records[0].mu_in;
    if records.iter().all(|r| r.mu_in == first) {
        return Err(Error::DegenerateFit(
            "all records share the same mu_in".into(),
        ));
    }
    Ok(())
}

fn curve_grid(records: &[MeasurementRecord]) -> Vec<f64> {
    let mut grid: Vec<f64> = records.iter().map(|r| r.mu_in).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Fits `G` and `Q` from the mean photon numbers.
pub fn fit_linear_means(records: &[MeasurementRecord]) -> Result<FitReport> {
    check_design(records)?;
    let n = records.len() as f64;
    let x_bar = records.iter().map(|r| r.mu_in).sum::<f64>() / n;
    let y_bar = records.iter().map(|r| r.mu_v).sum::<f64>() / n;
    let sxx: f64 = records.iter().map(|r| (r.mu_in - x_bar).powi(2)).sum();
    let sxy: f64 = records
        .iter()
        .map(|r| (r.mu_in - x_bar) * (r.mu_v - y_bar))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let ssr: f64 = records
        .iter()
        .map(|r| (r.mu_v - slope * r.mu_in - intercept).powi(2))
        .sum();
    let s2 = ssr / (n - 2.0);
    let slope_se = (s2 / sxx).sqrt();
    let intercept_se = (s2 * (1.0 / n + x_bar * x_bar / sxx)).sqrt();

    let h_mean = records.iter().map(|r| r.mu_h).sum::<f64>() / n;
    let h_var = records
        .iter()
        .map(|r| (r.mu_h - h_mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    let h_se = (h_var / n).sqrt();

    // both estimate the spontaneous term (G-1)/Q
    let (spont, spont_se) = pool(intercept, intercept_se, h_mean, h_se);

    let raw_gain = slope;
    let gain = raw_gain.max(1.0);
    let mut clamped = raw_gain < 1.0;
    let all_h_zero = records.iter().all(|r| r.mu_h == 0.0);
    let (raw_merit, merit, merit_stderr) = if all_h_zero || spont <= 0.0 {
        (None, None, None)
    } else {
        let q = (raw_gain - 1.0) / spont;
        let se = ((slope_se / spont).powi(2)
            + ((raw_gain - 1.0) * spont_se / (spont * spont)).powi(2))
        .sqrt();
        let q_clamped = q.clamp(0.0, 1.0);
        clamped |= q_clamped != q;
        (Some(q), Some(q_clamped), Some(se))
    };

    let model_spont = if all_h_zero { 0.0 } else { spont };
    let sq: f64 = records
        .iter()
        .map(|r| (r.mu_v - gain * r.mu_in - model_spont).powi(2) + (r.mu_h - model_spont).powi(2))
        .sum();
    let residual_rms = (sq / (2.0 * n)).sqrt();

    let curve = report_curve(records, gain, merit)?;
    Ok(FitReport {
        method: FitMethod::LinearMeans,
        gain_estimate: gain,
        gain_stderr: slope_se,
        merit_estimate: merit,
        merit_stderr,
        residual_rms,
        clamped,
        raw_gain,
        raw_merit,
        curve,
    })
}

/// Inverse-variance average; a zero-variance estimate wins outright.
fn pool(a: f64, a_se: f64, b: f64, b_se: f64) -> (f64, f64) {
    match (a_se > 0.0, b_se > 0.0) {
        (true, true) => {
            let (wa, wb) = (a_se.powi(-2), b_se.powi(-2));
            ((wa * a + wb * b) / (wa + wb), (wa + wb).sqrt().recip())
        }
        (false, true) => (a, 0.0),
        (true, false) => (b, 0.0),
        (false, false) => (0.5 * (a + b), 0.0),
    }
}

/// Fits `Q` in `[0, 1]` to the per-record fidelities at fixed `gain`.
///
/// `gain` is taken as exact; its standard error is reported as zero.
pub fn fit_fidelity_curve(records: &[MeasurementRecord], gain: f64) -> Result<FitReport> {
    check_design(records)?;
    if !(gain.is_finite() && gain > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gain must be positive, got {gain}"
        )));
    }
    let sse = |q: f64| -> f64 {
        records
            .iter()
            .map(|r| (fidelity_model(q, r.mu_in, r.mu_out()) - r.fidelity()).powi(2))
            .sum()
    };
    let best = golden_section(sse, 0.0, 1.0, MERIT_TOLERANCE);
    let q = best.x;
    let n = records.len() as f64;

    // dF/dQ = a (c - b) / (Q a + c)^2 with a = mu_out mu_in, b = mu_out + mu_in, c = 2 mu_out
    let jac2: f64 = records
        .iter()
        .map(|r| {
            let (mi, mo) = (r.mu_in, r.mu_out());
            let a = mo * mi;
            (a * (mo - mi) / (q * a + 2.0 * mo).powi(2)).powi(2)
        })
        .sum();
    let merit_stderr = if jac2 > 0.0 {
        (best.value / (n - 1.0) / jac2).sqrt()
    } else {
        0.0
    };

    let gain_clamped = gain.max(1.0);
    let curve = report_curve(records, gain_clamped, Some(q))?;
    Ok(FitReport {
        method: FitMethod::FidelityCurve,
        gain_estimate: gain_clamped,
        gain_stderr: 0.0,
        merit_estimate: Some(q),
        merit_stderr: Some(merit_stderr),
        residual_rms: (best.value / n).sqrt(),
        clamped: gain < 1.0,
        raw_gain: gain,
        raw_merit: Some(q),
        curve,
    })
}

/// Curve at the records' input levels. Output levels come from the fitted
/// model when it is finite; a vanishing merit falls back to the measured
/// output (averaged over repeated input levels).
fn report_curve(
    records: &[MeasurementRecord],
    gain: f64,
    merit: Option<f64>,
) -> Result<Vec<CurvePoint>> {
    match merit {
        Some(q) if q > 0.0 => bracketing_curves(q, gain, &curve_grid(records)),
        _ => {
            let points = curve_grid(records)
                .into_iter()
                .map(|mu_in| {
                    let same: Vec<f64> = records
                        .iter()
                        .filter(|r| r.mu_in == mu_in)
                        .map(|r| r.mu_out())
                        .collect();
                    let mu_out = same.iter().sum::<f64>() / same.len() as f64;
                    let mut p = curve_point(merit.unwrap_or(0.0), mu_in, mu_out);
                    if merit.is_none() {
                        p.f_qfit = None;
                    }
                    p
                })
                .collect();
            Ok(points)
        }
    }
}

fn curve_point(q_fit: f64, mu_in: f64, mu_out: f64) -> CurvePoint {
    CurvePoint {
        mu_in,
        f_q0: fidelity_model(0.0, mu_in, mu_out),
        f_qfit: Some(fidelity_model(q_fit, mu_in, mu_out)),
        f_q1: fidelity_model(1.0, mu_in, mu_out),
    }
}

/// Fidelity curves for `Q = 0`, `Q = q_fit` and `Q = 1`, all evaluated at
/// the output level `mu_out` that the fitted amplifier `(gain, q_fit)`
/// produces at each input level. Rows are sorted by `mu_in`.
pub fn bracketing_curves(q_fit: f64, gain: f64, mu_in_grid: &[f64]) -> Result<Vec<CurvePoint>> {
    let params = AmplifierParams::from_gain_merit(gain, q_fit)?;
    if let Some(bad) = mu_in_grid.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "curve grid must be strictly positive, got {bad}"
        )));
    }
    let mut grid = mu_in_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.into_iter()
        .map(|mu_in| {
            let out = mean_outputs(&params, mu_in)?;
            Ok(curve_point(q_fit, mu_in, out.mu_out()))
        })
        .collect()
}

/// Parameters of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub true_gain: f64,
    pub true_merit: f64,
    pub mu_in_grid: Vec<f64>,
    /// Standard deviation of the multiplicative noise on each output channel.
    pub relative_noise: f64,
    /// Preparation polarizer extinction; `None` for a perfect polarizer.
    pub extinction_db: Option<f64>,
    pub seed: u64,
}

impl SyntheticSpec {
    /// The operating point of the fiber-amplifier experiment: `G = 1.2686`,
    /// `Q = 0.8` (so 1.94 output photons per mode at one input photon), 1 %
    /// noise on an 11-point grid over `[0.1, 5]`.
    pub fn fiber_replica(seed: u64) -> Self {
        Self {
            true_gain: 1.2686,
            true_merit: 0.8,
            mu_in_grid: vec![0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0],
            relative_noise: 0.01,
            extinction_db: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        AmplifierParams::from_gain_merit(self.true_gain, self.true_merit)?;
        if self.mu_in_grid.is_empty() {
            return Err(Error::InvalidArgument("mu_in grid is empty".into()));
        }
        if let Some(bad) = self
            .mu_in_grid
            .iter()
            .find(|m| !(m.is_finite() && **m > 0.0))
        {
            return Err(Error::InvalidArgument(format!(
                "mu_in grid must be strictly positive, got {bad}"
            )));
        }
        if !(self.relative_noise.is_finite() && self.relative_noise >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "relative noise must be >= 0, got {}",
                self.relative_noise
            )));
        }
        if let Some(db) = self.extinction_db {
            extinction_floor(db)?;
        }
        Ok(())
    }
}

/// Generates records from the mean-output model plus polarizer leakage into
/// `mu_H` and multiplicative Gaussian noise, clamped at zero.
pub fn synthesize(spec: &SyntheticSpec) -> Result<Vec<MeasurementRecord>> {
    spec.validate()?;
    let params = AmplifierParams::from_gain_merit(spec.true_gain, spec.true_merit)?;
    let leak = match spec.extinction_db {
        Some(db) => extinction_floor(db)?,
        None => 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    spec.mu_in_grid
        .iter()
        .map(|&mu_in| {
            let out = mean_outputs(&params, mu_in)?;
            let zv: f64 = StandardNormal.sample(&mut rng);
            let zh: f64 = StandardNormal.sample(&mut rng);
            Ok(MeasurementRecord {
                mu_in,
                mu_v: (out.mu_v * (1.0 + spec.relative_noise * zv)).max(0.0),
                mu_h: ((out.mu_h + leak * mu_in) * (1.0 + spec.relative_noise * zh)).max(0.0),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(g: f64, q: f64, grid: &[f64]) -> Vec<MeasurementRecord> {
        synthesize(&SyntheticSpec {
            true_gain: g,
            true_merit: q,
            mu_in_grid: grid.to_vec(),
            relative_noise: 0.0,
            extinction_db: None,
            seed: 0,
        })
        .unwrap()
    }

    const GRID: [f64; 5] = [0.2, 0.5, 1.0, 2.0, 5.0];

    #[test]
    fn ingest_photon_rows() {
        let recs =
            parse_records("mu_in,mu_v,mu_h\n1.0,1.6043,0.3357\n", Units::Photons, None).unwrap();
        assert_eq!(
            recs,
            vec![MeasurementRecord::new(1.0, 1.6043, 0.3357).unwrap()]
        );
    }

    #[test]
    fn ingest_raw_without_losses_matches_conversion() {
        let cal = CalibrationConfig::lossless();
        let mode = cal.mode().unwrap();
        let p = mode.power_per_photon();
        let text = format!(
            "p_in_watts,p_v_watts,p_h_watts\n{},{},{}\n",
            p,
            1.5 * p,
            0.25 * p
        );
        let recs = parse_records(&text, Units::RawWatts, Some(&cal)).unwrap();
        assert!((recs[0].mu_in - 1.0).abs() < 1e-12);
        assert!((recs[0].mu_v - 1.5).abs() < 1e-12);
        assert!((recs[0].mu_h - 0.25).abs() < 1e-12);
    }

    #[test]
    fn output_loss_cancels_in_fidelity() {
        let text = "p_in_watts,p_v_watts,p_h_watts\n1e-8,2.1e-8,4e-9\n3e-8,5.2e-8,4.3e-9\n";
        let base =
            parse_records(text, Units::RawWatts, Some(&CalibrationConfig::lossless())).unwrap();
        let lossy_cal = CalibrationConfig {
            output_path_loss_db: 3.0,
            ..CalibrationConfig::lossless()
        };
        let lossy = parse_records(text, Units::RawWatts, Some(&lossy_cal)).unwrap();
        for (a, b) in base.iter().zip(&lossy) {
            assert!((a.fidelity() - b.fidelity()).abs() < 1e-15);
            assert!((b.mu_v / a.mu_v - 10f64.powf(0.3)).abs() < 1e-12);
        }
    }

    #[test]
    fn ingest_errors_carry_line_numbers() {
        let err = parse_records(
            "mu_in,mu_v,mu_h\n1,2,0.3\n\n1,-2,0.3\n",
            Units::Photons,
            None,
        )
        .unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 4,
                message: "negative photon number: -2".into()
            }
        );
        let err = parse_records("mu_in,mu_v,mu_h\n1,x,0.3\n", Units::Photons, None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_records("a,b,c\n", Units::Photons, None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_records("mu_in,mu_v,mu_h\n1,2\n", Units::Photons, None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert_eq!(
            parse_records(RAW_HEADER, Units::RawWatts, None).unwrap_err(),
            Error::MissingCalibration
        );
    }

    #[test]
    fn linear_fit_recovers_noiseless_parameters() {
        let recs = noiseless(1.2686, 0.8, &GRID);
        let fit = fit_linear_means(&recs).unwrap();
        assert!((fit.gain_estimate - 1.2686).abs() < 1e-10);
        assert!((fit.merit_estimate.unwrap() - 0.8).abs() < 1e-10);
        assert!(!fit.clamped);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn linear_fit_intercept_is_spontaneous_term() {
        let recs = noiseless(4.0 / 3.0, 1.0, &GRID);
        let fit = fit_linear_means(&recs).unwrap();
        assert!((fit.raw_gain - 4.0 / 3.0).abs() < 1e-12);
        // Q = (G-1)/s, so s = 1/3 exactly when Q = 1
        let s = (fit.raw_gain - 1.0) / fit.raw_merit.unwrap();
        assert!((s - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn no_orthogonal_light_reports_gain_only() {
        let recs: Vec<_> = GRID
            .iter()
            .map(|&m| MeasurementRecord::new(m, 1.1 * m, 0.0).unwrap())
            .collect();
        let fit = fit_linear_means(&recs).unwrap();
        assert!((fit.gain_estimate - 1.1).abs() < 1e-12);
        assert_eq!(fit.merit_estimate, None);
        assert!(fit.curve.iter().all(|p| p.f_qfit.is_none()));
    }

    #[test]
    fn degenerate_designs() {
        let same: Vec<_> = (0..4)
            .map(|_| MeasurementRecord::new(1.0, 1.6, 0.3).unwrap())
            .collect();
        assert!(matches!(
            fit_linear_means(&same),
            Err(Error::DegenerateFit(_))
        ));
        assert!(matches!(
            fit_fidelity_curve(&same, 1.3),
            Err(Error::DegenerateFit(_))
        ));
        assert!(matches!(
            fit_linear_means(&same[..2]),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn nonphysical_estimates_are_clamped_and_flagged() {
        // mu_V falls with mu_in: slope below 1
        let recs: Vec<_> = GRID
            .iter()
            .map(|&m| MeasurementRecord::new(m, 0.9 * m + 0.1, 0.1).unwrap())
            .collect();
        let fit = fit_linear_means(&recs).unwrap();
        assert!(fit.clamped);
        assert_eq!(fit.gain_estimate, 1.0);
        assert!(fit.raw_gain < 1.0);
        assert_eq!(fit.merit_estimate, Some(0.0));

        // too little orthogonal light for the gain: Q > 1
        let recs: Vec<_> = GRID
            .iter()
            .map(|&m| MeasurementRecord::new(m, 1.5 * m + 0.2, 0.2).unwrap())
            .collect();
        let fit = fit_linear_means(&recs).unwrap();
        assert!(fit.clamped);
        assert!(fit.raw_merit.unwrap() > 1.0);
        assert_eq!(fit.merit_estimate, Some(1.0));
    }

    #[test]
    fn fidelity_fit_recovers_noiseless_merit() {
        let recs = noiseless(1.2686, 0.8, &GRID);
        let fit = fit_fidelity_curve(&recs, 1.2686).unwrap();
        assert!((fit.merit_estimate.unwrap() - 0.8).abs() < 1e-6);
        let recs = noiseless(1.5, 1.0, &GRID);
        let fit = fit_fidelity_curve(&recs, 1.5).unwrap();
        assert_eq!(fit.merit_estimate, Some(1.0));
    }

    #[test]
    fn bracketing_examples() {
        let curve = bracketing_curves(1.0, 4.0 / 3.0, &[1.0]).unwrap();
        assert!((curve[0].f_q1 - 5.0 / 6.0).abs() < 1e-14);

        let curve = bracketing_curves(0.8, 1.2686, &[5.0, 1.0, 1e-12]).unwrap();
        assert_eq!(curve[0].mu_in, 1e-12);
        for f in [curve[0].f_q0, curve[0].f_qfit.unwrap(), curve[0].f_q1] {
            assert!((f - 0.5).abs() < 1e-11);
        }
        assert!((curve[1].f_qfit.unwrap() - 0.827).abs() < 5e-4);
        for p in &curve {
            assert!(p.f_q0 <= p.f_qfit.unwrap() && p.f_qfit.unwrap() <= p.f_q1);
        }
        assert!(bracketing_curves(0.8, 1.2, &[0.0]).is_err());
    }

    #[test]
    fn synthesis_examples() {
        let recs = noiseless(1.2686, 0.8, &[1.0]);
        let exact =
            mean_outputs(&AmplifierParams::from_gain_merit(1.2686, 0.8).unwrap(), 1.0).unwrap();
        assert_eq!((recs[0].mu_v, recs[0].mu_h), (exact.mu_v, exact.mu_h));

        let pump_off = synthesize(&SyntheticSpec {
            true_gain: 1.0,
            true_merit: 1.0,
            mu_in_grid: vec![0.5, 1.0, 4.0],
            relative_noise: 0.0,
            extinction_db: Some(21.0),
            seed: 3,
        })
        .unwrap();
        for r in &pump_off {
            assert!((r.mu_h / r.mu_in - 0.007_943).abs() < 1e-6);
        }

        let a = synthesize(&SyntheticSpec::fiber_replica(11)).unwrap();
        let b = synthesize(&SyntheticSpec::fiber_replica(11)).unwrap();
        let c = synthesize(&SyntheticSpec::fiber_replica(12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn records_csv_round_trip() {
        let recs = synthesize(&SyntheticSpec::fiber_replica(5)).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&recs, &mut buf).unwrap();
        let back = parse_records(std::str::from_utf8(&buf).unwrap(), Units::Photons, None).unwrap();
        assert_eq!(back, recs);
    }
}
