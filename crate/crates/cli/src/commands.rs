use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use stimclone::pipeline::{parse_records, write_records_csv};
use stimclone::units::constants;
use stimclone::*;

use crate::format::{emit, sig6, table};
use crate::svg::{PlotSpec, Series, Style};
use crate::{ConvertArgs, FitArgs, Globals, MethodArg, SimulateArgs, SynthArgs, UnitsArg};

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn print(text: &str) -> Result<()> {
    emit(None, text.as_bytes()).map_err(Error::from)
}

pub fn fidelity(g: &Globals, n: u32, m: u32) -> Result<()> {
    let process = CloneProcess::new(n, m)?;
    let ratio = optimal_fidelity_ratio(process);
    let f = optimal_fidelity(process);
    let result = stimulated_weights(process);
    if g.json {
        return print(&to_json(&json!({
            "n": n,
            "m": m,
            "optimal_fidelity": f,
            "fraction": format!("{}/{}", ratio.numer(), ratio.denom()),
            "weights": result.weights,
            "k_bar": result.k_bar,
            "fidelity": result.fidelity,
        })));
    }
    let mut out = table(&[
        ("process", format!("{n} -> {m}")),
        (
            "optimal_fidelity",
            format!("{} ({}/{})", sig6(f), ratio.numer(), ratio.denom()),
        ),
        ("k_bar", sig6(result.k_bar)),
    ]);
    out.push_str("k  weight\n");
    for (k, w) in result.weights.iter().enumerate() {
        out.push_str(&format!("{k}  {}\n", sig6(*w)));
    }
    print(&out)
}

fn input_state(args: &SimulateArgs) -> InputState {
    match (args.fock, args.poisson, args.thermal) {
        (Some(n), _, _) => InputState::Fock(n),
        (_, Some(m), _) => InputState::Poissonian(m),
        (_, _, Some(m)) => InputState::Thermal(m),
        _ => unreachable!("clap requires one input"),
    }
}

fn amplifier(args: &SimulateArgs) -> Result<AmplifierParams> {
    match (args.spontaneous, args.g) {
        (Some(s), _) => AmplifierParams::balanced(s),
        (None, Some(g)) => AmplifierParams::from_gain_merit(g, args.q),
        _ => unreachable!("clap requires an amplifier"),
    }
}

fn describe(input: &InputState) -> String {
    match input {
        InputState::Fock(n) => format!("fock({n})"),
        InputState::Poissonian(m) => format!("poisson({m})"),
        InputState::Thermal(m) => format!("thermal({m})"),
    }
}

pub fn simulate(g: &Globals, args: &SimulateArgs) -> Result<()> {
    let input = input_state(args);
    let params = amplifier(args)?;
    if args.postselect.is_some() && !matches!(input, InputState::Fock(_)) {
        return Err(Error::InvalidArgument(
            "--postselect needs a --fock input".into(),
        ));
    }
    let dist = evolve_master(input, &params, args.n_max)?;
    if let Some(path) = &g.output {
        let mut buf = Vec::new();
        dist.write_csv(&mut buf)?;
        emit(Some(path), &buf)?;
    }
    let model = mean_outputs(&params, input.mean())?;

    let mut summary = serde_json::Map::new();
    summary.insert("input".into(), json!(describe(&input)));
    summary.insert("gain".into(), json!(params.gain()));
    summary.insert("merit".into(), json!(params.merit()));
    summary.insert("n_max".into(), json!(dist.n_max()));
    summary.insert("tail_mass".into(), json!(dist.tail_mass()));
    summary.insert("mean_v".into(), json!(dist.mean_v()));
    summary.insert("mean_h".into(), json!(dist.mean_h()));
    summary.insert("model_mean_v".into(), json!(model.mu_v));
    summary.insert("model_mean_h".into(), json!(model.mu_h));

    let mut rows: Vec<(&str, String)> = vec![
        ("input", describe(&input)),
        ("gain", sig6(params.gain())),
        ("merit", sig6(params.merit())),
        ("n_max", dist.n_max().to_string()),
        ("tail_mass", sig6(dist.tail_mass())),
        ("mean_v", sig6(dist.mean_v())),
        ("mean_h", sig6(dist.mean_h())),
        ("model_mean_v", sig6(model.mu_v)),
        ("model_mean_h", sig6(model.mu_h)),
    ];

    let n_in = match input {
        InputState::Fock(n) => n,
        _ => 0,
    };
    if let Some(m) = args.postselect {
        let sel = postselect_total(&dist, n_in, m)?;
        let optimal = optimal_fidelity(sel.clone.process);
        summary.insert("postselect".into(), json!(m));
        summary.insert("process_probability".into(), json!(sel.probability));
        summary.insert(
            "depleted_probability".into(),
            json!(sel.depleted_probability),
        );
        summary.insert("weights".into(), json!(sel.clone.weights));
        summary.insert("fidelity".into(), json!(sel.clone.fidelity));
        summary.insert("optimal_fidelity".into(), json!(optimal));
        rows.push(("postselect", m.to_string()));
        rows.push(("process_probability", sig6(sel.probability)));
        rows.push(("fidelity", sig6(sel.clone.fidelity)));
        rows.push(("optimal_fidelity", sig6(optimal)));
    }

    if let Some(count) = args.trajectories {
        let batch = sample_trajectories(input, &params, count, g.seed)?;
        let (v, h) = (batch.mean_v(), batch.mean_h());
        summary.insert("trajectories".into(), json!(count));
        summary.insert("seed".into(), json!(g.seed));
        summary.insert("mc_mean_v".into(), json!(v));
        summary.insert("mc_mean_h".into(), json!(h));
        rows.push(("trajectories", count.to_string()));
        rows.push(("seed", g.seed.to_string()));
        rows.push((
            "mc_mean_v",
            format!("{} +- {}", sig6(v.mean), sig6(v.stderr)),
        ));
        rows.push((
            "mc_mean_h",
            format!("{} +- {}", sig6(h.mean), sig6(h.stderr)),
        ));
        if let Some(m) = args.postselect {
            match batch.postselect(n_in, m) {
                Ok(sel) => {
                    summary.insert("mc_process_probability".into(), json!(sel.probability));
                    summary.insert("mc_fidelity".into(), json!(sel.clone.fidelity));
                    rows.push(("mc_process_probability", sig6(sel.probability)));
                    rows.push(("mc_fidelity", sig6(sel.clone.fidelity)));
                }
                Err(Error::EmptySelection { .. }) => {
                    summary.insert("mc_fidelity".into(), serde_json::Value::Null);
                    rows.push(("mc_fidelity", "no samples".into()));
                }
                Err(e) => return Err(e),
            }
        }
    }

    if g.json {
        print(&to_json(&summary))
    } else {
        print(&table(&rows))
    }
}

#[derive(Serialize)]
struct AlternateFit {
    method: FitMethod,
    gain: f64,
    merit: Option<f64>,
    merit_stderr: Option<f64>,
    residual_rms: f64,
    clamped: bool,
}

impl From<&FitReport> for AlternateFit {
    fn from(r: &FitReport) -> Self {
        Self {
            method: r.method,
            gain: r.gain_estimate,
            merit: r.merit_estimate,
            merit_stderr: r.merit_stderr,
            residual_rms: r.residual_rms,
            clamped: r.clamped,
        }
    }
}

#[derive(Serialize)]
struct Metadata {
    planck_j_s: f64,
    speed_of_light_m_s: f64,
    tau_c_convention: &'static str,
    seed: u64,
    units: Units,
    records: usize,
}

#[derive(Serialize)]
struct Report<'a> {
    #[serde(flatten)]
    fit: &'a FitReport,
    alternate: AlternateFit,
    metadata: Metadata,
}

pub fn fit(g: &Globals, args: &FitArgs) -> Result<()> {
    let units = match args.units {
        UnitsArg::Photons => Units::Photons,
        UnitsArg::Raw => Units::RawWatts,
    };
    let calibration = args
        .calibration
        .as_ref()
        .map(CalibrationConfig::load)
        .transpose()?;
    let text = std::fs::read_to_string(&args.data)?;
    let records = parse_records(&text, units, calibration.as_ref())?;

    let linear = fit_linear_means(&records)?;
    let mut curve_fit = fit_fidelity_curve(&records, linear.gain_estimate)?;
    curve_fit.gain_stderr = linear.gain_stderr;
    let (primary, alternate) = match args.method {
        MethodArg::Linear => (&linear, &curve_fit),
        MethodArg::Fidelity => (&curve_fit, &linear),
    };

    let report = Report {
        fit: primary,
        alternate: alternate.into(),
        metadata: Metadata {
            planck_j_s: constants::PLANCK,
            speed_of_light_m_s: constants::SPEED_OF_LIGHT,
            tau_c_convention: constants::TAU_C_CONVENTION,
            seed: g.seed,
            units,
            records: records.len(),
        },
    };
    emit(g.output.as_deref(), to_json(&report).as_bytes())?;

    if let Some(prefix) = &args.plot {
        plot_fit(prefix, &records, primary)?;
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn plot_fit(prefix: &Path, records: &[MeasurementRecord], fit: &FitReport) -> Result<()> {
    let lo = records.iter().map(|r| r.mu_in).fold(f64::MAX, f64::min);
    let hi = records.iter().map(|r| r.mu_in).fold(f64::MIN, f64::max);
    let params = fit
        .merit_estimate
        .filter(|q| *q > 0.0)
        .and_then(|q| AmplifierParams::from_gain_merit(fit.gain_estimate, q).ok());

    let curve = match (params, fit.merit_estimate) {
        (Some(_), Some(q)) if lo > 0.0 => {
            bracketing_curves(q, fit.gain_estimate, &linspace(lo, hi, 200))?
        }
        _ => fit.curve.clone(),
    };
    let pick = |f: fn(&CurvePoint) -> Option<f64>| -> Vec<(f64, f64)> {
        curve
            .iter()
            .filter_map(|p| f(p).map(|y| (p.mu_in, y)))
            .collect()
    };
    let mut series = vec![
        Series {
            name: "data".into(),
            points: records.iter().map(|r| (r.mu_in, r.fidelity())).collect(),
            style: Style::Markers,
            color: "black",
        },
        Series {
            name: "Q = 1 (optimal cloner)".into(),
            points: pick(|p| Some(p.f_q1)),
            style: Style::Dotted,
            color: "#1f77b4",
        },
    ];
    let fitted = pick(|p| p.f_qfit);
    if let (false, Some(q)) = (fitted.is_empty(), fit.merit_estimate) {
        series.push(Series {
            name: format!("Q = {} (fit)", sig6(q)),
            points: fitted,
            style: Style::Solid,
            color: "#d62728",
        });
    }
    series.push(Series {
        name: "Q = 0 (no cloning)".into(),
        points: pick(|p| Some(p.f_q0)),
        style: Style::Dotted,
        color: "#7f7f7f",
    });
    PlotSpec {
        title: "Cloning fidelity".into(),
        x_label: "mean input photons per mode".into(),
        y_label: "fidelity".into(),
        series,
        output: with_suffix(prefix, "_fidelity.svg"),
    }
    .write()?;

    let line: Vec<(f64, f64)> = match params {
        Some(p) => linspace(lo.max(0.0), hi, 50)
            .into_iter()
            .map(|m| mean_outputs(&p, m).map(|o| (m, o.mu_out())))
            .collect::<Result<_>>()?,
        None => ols_line(records, lo, hi),
    };
    PlotSpec {
        title: "Output vs input".into(),
        x_label: "mean input photons per mode".into(),
        y_label: "mean output photons per mode".into(),
        series: vec![
            Series {
                name: "data".into(),
                points: records.iter().map(|r| (r.mu_in, r.mu_out())).collect(),
                style: Style::Markers,
                color: "black",
            },
            Series {
                name: "linear fit".into(),
                points: line,
                style: Style::Solid,
                color: "#d62728",
            },
        ],
        output: with_suffix(prefix, "_inset.svg"),
    }
    .write()?;
    Ok(())
}

fn ols_line(records: &[MeasurementRecord], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let n = records.len() as f64;
    let xb = records.iter().map(|r| r.mu_in).sum::<f64>() / n;
    let yb = records.iter().map(|r| r.mu_out()).sum::<f64>() / n;
    let sxx: f64 = records.iter().map(|r| (r.mu_in - xb).powi(2)).sum();
    let sxy: f64 = records
        .iter()
        .map(|r| (r.mu_in - xb) * (r.mu_out() - yb))
        .sum();
    let slope = sxy / sxx;
    vec![(lo, yb + slope * (lo - xb)), (hi, yb + slope * (hi - xb))]
}

pub fn convert(g: &Globals, args: &ConvertArgs) -> Result<()> {
    let mode = OpticalMode::from_nm(args.lambda_nm, args.dlambda_nm)?;
    let (watts, mu) = match (args.watts, args.mu) {
        (Some(w), _) => (w, power_to_photons(w, &mode)?),
        (None, Some(mu)) => (photons_to_power(mu, &mode)?, mu),
        _ => unreachable!("clap requires one quantity"),
    };
    if g.json {
        return print(&to_json(&json!({
            "watts": watts,
            "mu": mu,
            "wavelength_nm": args.lambda_nm,
            "bandwidth_hz": mode.bandwidth_hz(),
            "watts_per_photon_per_mode": mode.power_per_photon(),
            "tau_c_convention": constants::TAU_C_CONVENTION,
        })));
    }
    print(&table(&[
        ("mu", sig6(mu)),
        ("watts", sig6(watts)),
        ("watts_per_photon_per_mode", sig6(mode.power_per_photon())),
    ]))
}

pub fn synth(g: &Globals, args: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        true_gain: args.gain,
        true_merit: args.merit,
        mu_in_grid: args.grid.clone(),
        relative_noise: args.noise,
        extinction_db: args.extinction_db,
        seed: g.seed,
    };
    let records = synthesize(&spec)?;
    let mut csv = Vec::new();
    write_records_csv(&records, &mut csv)?;
    emit(g.output.as_deref(), &csv)?;

    let echo = if g.json {
        to_json(&spec)
    } else {
        table(&[
            ("gain", format!("{}", spec.true_gain)),
            ("merit", format!("{}", spec.true_merit)),
            ("points", spec.mu_in_grid.len().to_string()),
            ("noise", format!("{}", spec.relative_noise)),
            (
                "extinction_db",
                spec.extinction_db.map_or("none".into(), |d| d.to_string()),
            ),
            ("seed", spec.seed.to_string()),
        ])
    };
    // keep stdout clean when it carries the CSV
    if g.output.is_some() {
        print(&echo)
    } else {
        eprint!("{echo}");
        Ok(())
    }
}
