//! Executes an experiment and writes its artifacts.
//!
//! Every run writes `config.json` (the resolved config), the data files,
//! optional SVG plots, `summary.json` and `runtimes.json`. Wall-clock times
//! live only in `runtimes.json`, so everything else is bit-identical for a
//! fixed config and seed.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;
use std::time::Instant;

use polyspec::analysis::{find_peak, linewidth_fit, local_maxima, outer_half_width, parabolic_hwhm};
use polyspec::estimator::{estimate_s2, estimate_s3, estimate_s4, EstimatedSpectrum};
use polyspec::model::{LiouvillianModel, MeasurementSpec, ModelSpec};
use polyspec::polyspectra::{frozen_reference, subtract_background, Part, PolySpectrum, SpectralEngine};
use polyspec::sme::{spawn_ensemble, write_binary, write_csv};
use serde_json::{json, Map, Value};

use crate::config::{
    Background, EstimateAction, ExperimentConfig, Format, SimulateAction, SpectraAction, ZenoAction,
};
use crate::plot::{heatmap, line_plot, Series};
use crate::CliError;

/// Local maxima below this fraction of the spectrum's range are ignored.
const PEAK_PROMINENCE: f64 = 1e-3;
/// Same for estimated spectra, whose bin-to-bin scatter makes many small maxima.
const ESTIMATE_PEAK_PROMINENCE: f64 = 0.1;
const MAX_REPORTED_PEAKS: usize = 12;

struct Run<'a> {
    dir: &'a Path,
    format: Format,
    plots: bool,
    files: Vec<String>,
    runtimes: Map<String, Value>,
}

impl Run<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.runtimes.insert(stage.to_string(), json!(start.elapsed().as_secs_f64()));
        out
    }

    fn engine(&mut self, label: &str, model: &LiouvillianModel) -> Result<SpectralEngine, CliError> {
        Ok(self.time(&format!("{label}: spectral decomposition"), || SpectralEngine::new(model))?)
    }
}

/// Runs `cfg`, writing into `dir`; returns the number of files written.
pub fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<usize, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))?;
    let mut r = Run {
        dir,
        format: cfg.output.format,
        plots: cfg.output.plots,
        files: Vec::new(),
        runtimes: Map::new(),
    };
    r.write("config.json", &(serde_json::to_string_pretty(cfg).expect("config serializes") + "\n"))?;
    let start = Instant::now();
    let label = cfg.label();
    let spec = cfg.model.resolve()?;
    let results = match &cfg.action {
        crate::config::Action::Spectra(a) => {
            let models = spectra(&mut r, &label, &spec, a)?;
            json!({ "models": [models] })
        }
        crate::config::Action::Compare(c) => {
            let a = c.spectra();
            let mut models = vec![spectra(&mut r, &label, &spec, &a)?];
            for other in &c.with {
                models.push(spectra(&mut r, &other.label, &other.model.resolve()?, &a)?);
            }
            json!({ "models": models })
        }
        crate::config::Action::ZenoSweep(z) => zeno(&mut r, &label, &spec, z)?,
        crate::config::Action::Simulate(s) => simulate(&mut r, &label, &spec, s, cfg.seed)?,
        crate::config::Action::Estimate(e) => estimate(&mut r, &label, &spec, e, cfg.seed)?,
    };
    r.runtimes.insert("total".into(), json!(start.elapsed().as_secs_f64()));
    let mut files = r.files.clone();
    files.extend(["summary.json".to_string(), "runtimes.json".to_string()]);
    files.sort();
    let summary = json!({
        "name": cfg.name,
        "note": cfg.note,
        "action": cfg.action.name(),
        "seed": cfg.seed,
        "results": results,
        "files": files,
    });
    r.write("summary.json", &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"))?;
    let runtimes = Value::Object(std::mem::take(&mut r.runtimes));
    r.write("runtimes.json", &(serde_json::to_string_pretty(&runtimes).expect("runtimes serialize") + "\n"))?;
    Ok(r.files.len())
}

fn model_info(label: &str, model: &LiouvillianModel, engine: Option<&SpectralEngine>) -> Value {
    let mut info = json!({
        "label": label,
        "dim": model.dim(),
        "beta2": model.beta2(),
        "fingerprint": model.fingerprint(),
    });
    if let Some(e) = engine {
        info["mean_output"] = json!(e.mean_output());
        info["near_pole_fallbacks"] = json!(e.fallback_count());
        info["decoupling_defect"] = json!(e.decomposition().decoupling_defect());
    }
    info
}

fn ghz(omega: &[f64]) -> Vec<f64> {
    omega.iter().map(|w| w / TAU).collect()
}

/// Peaks, their HWHM by a local parabolic fit, floor and (on grids starting
/// at zero) the half-width of the zero-centered component.
fn analyze_1d(s: &PolySpectrum, prominence: f64) -> Value {
    let re = s.real();
    let baseline = if s.includes_noise_floor { s.noise_floor } else { 0.0 };
    let mut peaks = local_maxima(&s.omega1, &re, prominence);
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value));
    peaks.truncate(MAX_REPORTED_PEAKS);
    peaks.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    let peaks: Vec<Value> = peaks
        .iter()
        .map(|p| {
            let mut v = json!({ "f_ghz": p.omega / TAU, "value": p.value });
            match parabolic_hwhm(&s.omega1, &re, p.index, baseline) {
                Ok(fit) => {
                    v["fit_f_ghz"] = json!(fit.omega / TAU);
                    v["hwhm_ghz"] = json!(fit.hwhm / TAU);
                    v["hwhm_rad_per_ns"] = json!(fit.hwhm);
                }
                Err(e) => v["hwhm_error"] = json!(e.to_string()),
            }
            v
        })
        .collect();
    let mut out = json!({ "peaks": peaks });
    if let Some(top) = find_peak(&s.omega1, &re) {
        out["maximum"] = json!({ "f_ghz": top.omega / TAU, "value": top.value });
    }
    if s.includes_noise_floor {
        out["floor"] = json!({ "expected": s.noise_floor, "at_grid_edge": re[re.len() - 1] });
    }
    if s.omega1.first() == Some(&0.0) {
        let above: Vec<f64> = re.iter().map(|v| v - baseline).collect();
        if let Some(w) = outer_half_width(&s.omega1, &above, 0, above[0] / 2.0) {
            out["zero_centered_half_width_ghz"] = json!(w / TAU);
        }
    }
    out
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn analyze_2d(s: &PolySpectrum) -> Value {
    json!({
        "median": median(s.real()),
        "median_abs": median(s.values.iter().map(|v| v.norm()).collect()),
        "max_abs": s.values.iter().map(|v| v.norm()).fold(0.0, f64::max),
        "imaginary_ratio": s.imaginary_ratio(),
    })
}

/// Writes data (and a plot) for `s` under `stem` and returns its analysis.
fn emit(r: &mut Run, stem: &str, title: &str, s: &PolySpectrum, est: Option<&EstimatedSpectrum>) -> Result<Value, CliError> {
    let mut files = Vec::new();
    match r.format {
        Format::Json => {
            let text = match est {
                Some(e) => serde_json::to_string_pretty(e).expect("spectrum serializes"),
                None => s.to_json()?,
            };
            files.push(format!("{stem}.json"));
            r.write(&files[0], &text)?;
        }
        Format::Csv if !s.is_2d() => {
            files.push(format!("{stem}.csv"));
            r.write(&files[0], &s.to_csv_1d(est.map(|e| e.errors_re.as_slice())))?;
        }
        Format::Csv => {
            for (part, tag) in [(Part::Re, "re"), (Part::Im, "im")] {
                let name = format!("{stem}_{tag}.csv");
                r.write(&name, &s.to_csv_matrix(part))?;
                files.push(name);
            }
            if let Some(e) = est {
                let name = format!("{stem}_err_re.csv");
                r.write(&name, &s.matrix_csv(|k| e.errors_re[k]))?;
                files.push(name);
            }
        }
    }
    if r.plots {
        let svg = if s.is_2d() {
            let scale = median(s.values.iter().map(|v| v.re.abs()).collect());
            heatmap(
                &format!("{title} (asinh color scale)"),
                "f1 (GHz)",
                "f2 (GHz)",
                &ghz(&s.omega1),
                &ghz(&s.omega2),
                &s.real(),
                scale,
            )
        } else {
            let x = ghz(&s.omega1);
            let y = s.real();
            line_plot(title, "f (GHz)", &format!("S{}", s.order), &[Series { label: title, x: &x, y: &y }])
        };
        let name = format!("{stem}.svg");
        r.write(&name, &svg)?;
        files.push(name);
    }
    let prominence = if est.is_some() { ESTIMATE_PEAK_PROMINENCE } else { PEAK_PROMINENCE };
    let mut out = if s.is_2d() { analyze_2d(s) } else { analyze_1d(s, prominence) };
    out["order"] = json!(s.order);
    out["files"] = json!(files);
    Ok(out)
}

fn order_spectrum(engine: &SpectralEngine, order: u8, grid: &[f64], grid2: &[f64]) -> PolySpectrum {
    match order {
        2 => engine.s2(grid),
        3 => engine.s3(grid2, grid2),
        _ => engine.s4(grid2, grid2),
    }
}

fn reference_for(spec: &ModelSpec, background: Background) -> Result<Option<(ModelSpec, Value)>, CliError> {
    if !matches!(spec.measurement, MeasurementSpec::RandomTime { .. }) {
        return Ok(None);
    }
    Ok(match background {
        Background::None => None,
        Background::Uncoupled => spec.uncoupled().map(|s| (s, json!({ "kind": "uncoupled" }))),
        Background::Frozen => {
            let (s, value) = frozen_reference(spec)?;
            Some((s, json!({ "kind": "frozen", "coupling_value": value })))
        }
    })
}

fn spectra(r: &mut Run, label: &str, spec: &ModelSpec, a: &SpectraAction) -> Result<Value, CliError> {
    let model = spec.build()?;
    let engine = r.engine(label, &model)?;
    let grid = a.grid.omegas();
    let grid2 = a.grid2.as_ref().map(|g| g.omegas()).unwrap_or_default();
    let reference = reference_for(spec, a.background)?;
    let ref_engine = match &reference {
        Some((s, _)) => Some(r.engine(&format!("{label} background"), &s.build()?)?),
        None => None,
    };
    let mut out = Vec::new();
    for &order in &a.orders {
        let s = r.time(&format!("{label}: S{order}"), || order_spectrum(&engine, order, &grid, &grid2));
        let mut entry = emit(r, &format!("{label}_s{order}"), &format!("{label} S{order}"), &s, None)?;
        if let Some(re) = &ref_engine {
            let b = order_spectrum(re, order, &grid, &grid2);
            let d = subtract_background(&s, &b)?;
            entry["background_removed"] = emit(
                r,
                &format!("{label}_s{order}_minus_background"),
                &format!("{label} S{order} minus background"),
                &d,
                None,
            )?;
        }
        out.push(entry);
    }
    let mut info = model_info(label, &model, Some(&engine));
    if let Some((_, bg)) = reference {
        info["background"] = bg;
    }
    info["spectra"] = json!(out);
    Ok(info)
}

fn with_gamma_p(spec: &ModelSpec, rate: f64) -> ModelSpec {
    let mut s = spec.clone();
    if let MeasurementSpec::RandomTime { gamma_p, .. } = &mut s.measurement {
        *gamma_p = rate;
    }
    s
}

fn zeno(r: &mut Run, label: &str, spec: &ModelSpec, z: &ZenoAction) -> Result<Value, CliError> {
    let grid = z.grid.omegas();
    let f = ghz(&grid);
    let mut rows = Vec::new();
    let mut curves: Vec<(String, Vec<f64>)> = Vec::new();
    let mut widths = Vec::new();
    for &rate in &z.gamma_p {
        let tag = format!("{label}_gp{rate}");
        let s = with_gamma_p(spec, rate);
        let model = s.build()?;
        let engine = r.engine(&tag, &model)?;
        let raw = r.time(&format!("{tag}: S2"), || engine.s2(&grid));
        let mut row = emit(r, &format!("{tag}_s2"), &format!("S2, gamma_p = {rate}"), &raw, None)?;
        let shown = match reference_for(&s, z.background)? {
            Some((bs, bg)) => {
                let b = SpectralEngine::new(&bs.build()?)?.s2(&grid);
                let d = subtract_background(&raw, &b)?;
                row["background"] = bg;
                row["background_removed"] = emit(
                    r,
                    &format!("{tag}_s2_minus_background"),
                    &format!("S2 minus background, gamma_p = {rate}"),
                    &d,
                    None,
                )?;
                d
            }
            None => raw.without_noise_floor(),
        };
        let values = shown.real();
        let peak = find_peak(&grid, &values).ok_or_else(|| CliError::config("action.grid", "empty grid"))?;
        row["gamma_p"] = json!(rate);
        row["peak_f_ghz"] = json!(peak.omega / TAU);
        row["peak_at_zero"] = json!(peak.index == 0 && grid[0] == 0.0);
        if z.fit_linewidth {
            let fit = parabolic_hwhm(&grid, &values, peak.index, 0.0)?;
            row["fit_hwhm_rad_per_ns"] = json!(fit.hwhm);
            widths.push(fit.hwhm);
        }
        let top = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        curves.push((format!("gamma_p = {rate}"), values.iter().map(|v| v / top).collect()));
        rows.push(row);
    }
    let peaks: Vec<f64> = rows.iter().map(|r| r["peak_f_ghz"].as_f64().unwrap_or(f64::NAN)).collect();
    let mut out = json!({
        "model": model_info(label, &spec.build()?, None),
        "rates": rows,
        "peak_frequency_nonincreasing": peaks.windows(2).all(|p| p[1] <= p[0]),
    });
    if z.fit_linewidth {
        let fit = linewidth_fit(&z.gamma_p, &widths)?;
        out["linewidth_fit"] = json!({ "slope": fit.slope, "r_squared": fit.r_squared, "hwhm_rad_per_ns": widths });
    }
    if r.plots {
        let series: Vec<Series> = curves
            .iter()
            .map(|(name, y)| Series { label: name, x: &f, y })
            .collect();
        let svg = line_plot("S2 across sampling rates (each normalized)", "f (GHz)", "S2 / max", &series);
        r.write(&format!("{label}_sweep.svg"), &svg)?;
    }
    Ok(out)
}

fn trace_stats(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var)
}

fn check_sim(model: &LiouvillianModel, cfg: &polyspec::sme::SimConfig) -> Result<(), CliError> {
    cfg.check_stability(model)
        .map_err(|e| CliError::config("action.sim.dt", &e.to_string()))
}

fn simulate(r: &mut Run, label: &str, spec: &ModelSpec, s: &SimulateAction, seed: u64) -> Result<Value, CliError> {
    let model = spec.build()?;
    let cfg = s.sim.to_config(seed);
    check_sim(&model, &cfg)?;
    let runs = r.time("simulation", || spawn_ensemble(&model, &cfg, s.trajectories))?;
    let mut rows = Vec::new();
    for (k, t) in runs.iter().enumerate() {
        let base = format!("{label}_traj{k}");
        let files = match r.format {
            Format::Csv => {
                let name = format!("{base}.csv");
                write_csv(t, &r.dir.join(&name))?;
                vec![name]
            }
            Format::Json => {
                let side = write_binary(t, &r.dir.join(&base))?;
                let mut names = vec![format!("{base}.f64"), format!("{base}.json")];
                names.extend(side.observables.values().cloned());
                names
            }
        };
        r.files.extend(files.iter().cloned());
        let (mean, var) = trace_stats(&t.samples);
        rows.push(json!({
            "stream": t.stream,
            "samples": t.len(),
            "dt": t.dt,
            "mean": mean,
            "variance": var,
            "min_eigenvalue": t.min_eigenvalue,
            "files": files,
        }));
    }
    if r.plots {
        if let Some(t) = runs.first() {
            let n = t.len().min(4000);
            let x: Vec<f64> = (0..n).map(|k| k as f64 * t.dt).collect();
            let svg = line_plot("detector output, trajectory 0", "t (ns)", "z", &[Series { label: "z", x: &x, y: &t.samples[..n] }]);
            r.write(&format!("{label}_traj0.svg"), &svg)?;
        }
    }
    Ok(json!({
        "model": model_info(label, &model, None),
        "white_level": model.beta2() / (4.0 * cfg.dt * cfg.record_stride as f64),
        "trajectories": rows,
    }))
}

/// Fraction of grid points where `|estimate - analytic| <= k sigma` in both
/// parts, up to roundoff relative to the largest analytic value (the
/// imaginary error bar of S2 is exactly zero).
fn agreement(est: &EstimatedSpectrum, analytic: &PolySpectrum, k: f64) -> f64 {
    let slack = 1e-9 * analytic.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let inside = est
        .spectrum
        .values
        .iter()
        .zip(&analytic.values)
        .zip(est.errors_re.iter().zip(&est.errors_im))
        .filter(|((e, a), (sr, si))| {
            (e.re - a.re).abs() <= k * **sr + slack && (e.im - a.im).abs() <= k * **si + slack
        })
        .count();
    inside as f64 / est.spectrum.values.len() as f64
}

fn estimate(r: &mut Run, label: &str, spec: &ModelSpec, e: &EstimateAction, seed: u64) -> Result<Value, CliError> {
    let model = spec.build()?;
    let cfg = e.sim.to_config(seed);
    check_sim(&model, &cfg)?;
    let runs = r.time("simulation", || spawn_ensemble(&model, &cfg, e.trajectories))?;
    let traces: Vec<&[f64]> = runs.iter().map(|t| t.samples.as_slice()).collect();
    let record = runs[0].dt;
    let mut est_cfg = e.estimator.clone();
    est_cfg.beta2.get_or_insert(model.beta2());
    let engine = if e.compare_analytic {
        Some(r.engine(label, &model)?)
    } else {
        None
    };
    let mut out = Vec::new();
    for &order in &e.orders {
        let est = r.time(&format!("estimate S{order}"), || match order {
            2 => estimate_s2(&traces, record, &est_cfg),
            3 => estimate_s3(&traces, record, &est_cfg),
            _ => estimate_s4(&traces, record, &est_cfg),
        })?;
        let s = &est.spectrum;
        let mut entry = emit(r, &format!("{label}_est_s{order}"), &format!("estimated S{order}"), s, Some(&est))?;
        entry["segments"] = json!(est.segments);
        if order > 2 {
            entry["within_3_sigma_of_zero"] = json!(est.fraction_within(3.0));
        }
        if let Some(engine) = &engine {
            let analytic = order_spectrum(engine, order, &s.omega1, &s.omega2);
            entry["analytic"] = emit(r, &format!("{label}_s{order}_analytic"), &format!("analytic S{order}"), &analytic, None)?;
            entry["within_3_sigma_of_analytic"] = json!(agreement(&est, &analytic, 3.0));
            if order == 2 {
                entry["peak_band_ratio"] = json!(peak_band_ratio(s, &analytic));
            }
        }
        out.push(entry);
    }
    Ok(json!({
        "model": model_info(label, &model, engine.as_ref()),
        "trajectories": e.trajectories,
        "record_dt": record,
        "estimates": out,
    }))
}

/// Estimate over analytic, both averaged over the analytic peak's
/// `+-HWHM/2` band (at least the peak bin and its neighbours).
fn peak_band_ratio(est: &PolySpectrum, analytic: &PolySpectrum) -> Option<f64> {
    let a = analytic.real();
    let w = &analytic.omega1;
    let peak = find_peak(w, &a)?;
    let step = w.get(1).zip(w.first()).map(|(b, a)| b - a).unwrap_or(0.0);
    let half = parabolic_hwhm(w, &a, peak.index, analytic.noise_floor)
        .map(|f| 0.5 * f.hwhm)
        .unwrap_or(step)
        .max(step);
    let band: Vec<usize> = (0..w.len()).filter(|&i| (w[i] - peak.omega).abs() <= half + 1e-12).collect();
    let e = est.real();
    let avg = |v: &[f64]| band.iter().map(|&i| v[i]).sum::<f64>() / band.len() as f64;
    Some(avg(&e) / avg(&a))
}
