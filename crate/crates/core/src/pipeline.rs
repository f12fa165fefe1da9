//! End-to-end recipes: data collection, tuning, closed-loop validation and
//! comparison. Artifacts are CSV files and `key=value` reports written under
//! one output directory; every artifact carries the full configuration and
//! seed it was produced with.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::circuit::{equilibrium, CircuitParameters, V_OUT};
use crate::control::{closed_loop, ConverterLoop};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, MetricsConfig, PerformanceReport};
use crate::plant::{
    apply_noise, integrate, DutySource, Plant, PlantMode, Schedule, SimulationPlan,
};
use crate::report::KeyValueReport;
use crate::series::TimeSeries;
use crate::signals::{chirp, ChirpSpec, Identity, ReferenceModel};
use crate::tuning::{
    find_ultimate_gain, vrft_fit, vrft_fit_aw, zn_gains, ControllerGains, OscillationCriteria,
    TrainingSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipe {
    CollectOl,
    TuneZn,
    TuneVrft,
    TuneVrftAw,
    Validate,
    Compare,
    Fig4Check,
}

impl Recipe {
    pub const ALL: [Recipe; 7] = [
        Recipe::CollectOl,
        Recipe::TuneZn,
        Recipe::TuneVrft,
        Recipe::TuneVrftAw,
        Recipe::Validate,
        Recipe::Compare,
        Recipe::Fig4Check,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::CollectOl => "collect-ol",
            Recipe::TuneZn => "tune-zn",
            Recipe::TuneVrft => "tune-vrft",
            Recipe::TuneVrftAw => "tune-vrft-aw",
            Recipe::Validate => "validate",
            Recipe::Compare => "compare",
            Recipe::Fig4Check => "fig4-check",
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown recipe `{s}`")))
    }
}

/// Controller labels used in file names and reports.
pub const CONTROLLERS: [&str; 3] = ["zn", "vrft", "vrft_aw"];

/// Experiment knobs with their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// Reference model bandwidth as a fraction of the switching frequency.
    pub bandwidth_ratio: f64,
    pub training_duration: f64,
    pub chirp_offset: f64,
    pub chirp_amplitude: f64,
    pub aw_chirp_offset: f64,
    pub aw_chirp_amplitude: f64,
    pub noise_amplitude: f64,
    pub noise_realizations: usize,
    pub n_aw: usize,
    pub zn_grid: (f64, f64, f64),
    pub zn_duration: f64,
    pub v_ref: f64,
    pub validation_duration: f64,
    /// Integrator steps between recorded closed-loop samples.
    pub validation_stride: usize,
    pub fig4_duties: Vec<f64>,
    pub fig4_duration: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            bandwidth_ratio: 100.0,
            training_duration: 0.05,
            chirp_offset: 0.5,
            chirp_amplitude: 0.1,
            aw_chirp_offset: 0.15,
            aw_chirp_amplitude: 0.1,
            noise_amplitude: 0.5,
            noise_realizations: 10,
            n_aw: 1,
            zn_grid: (0.005, 0.2, 0.005),
            zn_duration: 0.04,
            v_ref: 10.0,
            validation_duration: 0.01,
            validation_stride: 10,
            fig4_duties: vec![0.2, 0.5, 0.8],
            fig4_duration: 0.02,
        }
    }
}

impl Settings {
    fn describe(&self) -> Vec<(String, String)> {
        let g = self.zn_grid;
        vec![
            ("bandwidth_ratio".into(), self.bandwidth_ratio.to_string()),
            (
                "training_duration".into(),
                self.training_duration.to_string(),
            ),
            ("chirp_offset".into(), self.chirp_offset.to_string()),
            ("chirp_amplitude".into(), self.chirp_amplitude.to_string()),
            ("aw_chirp_offset".into(), self.aw_chirp_offset.to_string()),
            (
                "aw_chirp_amplitude".into(),
                self.aw_chirp_amplitude.to_string(),
            ),
            ("noise_amplitude".into(), self.noise_amplitude.to_string()),
            (
                "noise_realizations".into(),
                self.noise_realizations.to_string(),
            ),
            ("n_aw".into(), self.n_aw.to_string()),
            ("zn_grid".into(), format!("{}:{}:{}", g.0, g.1, g.2)),
            ("zn_duration".into(), self.zn_duration.to_string()),
            ("v_ref".into(), self.v_ref.to_string()),
            (
                "validation_duration".into(),
                self.validation_duration.to_string(),
            ),
            (
                "validation_stride".into(),
                self.validation_stride.to_string(),
            ),
            (
                "fig4_duties".into(),
                self.fig4_duties
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join(";"),
            ),
            ("fig4_duration".into(), self.fig4_duration.to_string()),
        ]
    }

    pub fn gain_grid(&self) -> Vec<f64> {
        let (lo, hi, step) = self.zn_grid;
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| lo + step * k as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub params: CircuitParameters<f64>,
    pub mode: PlantMode,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Overrides the horizon of the recipe's main simulation.
    pub duration: Option<f64>,
    pub settings: Settings,
}

impl PipelineConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            params: CircuitParameters::default(),
            mode: PlantMode::Switched,
            seed: 0,
            out_dir: out_dir.into(),
            duration: None,
            settings: Settings::default(),
        }
    }

    fn plant(&self) -> Result<Plant<f64>> {
        Plant::new(self.params)
    }

    fn reference_model(&self) -> Result<ReferenceModel<f64>> {
        ReferenceModel::from_switching(
            self.params.t_s,
            self.settings.bandwidth_ratio,
            self.params.t_samp,
        )
    }

    /// Provenance lines embedded in every artifact.
    fn provenance(&self, recipe: Recipe) -> Vec<String> {
        let mut lines = vec![
            format!("recipe={recipe}"),
            format!("seed={}", self.seed),
            format!("mode={}", self.mode),
        ];
        if let Some(d) = self.duration {
            lines.push(format!("duration={d}"));
        }
        lines.extend(
            self.params
                .entries()
                .into_iter()
                .map(|(k, v)| format!("{k}={v:e}")),
        );
        lines.extend(
            self.settings
                .describe()
                .into_iter()
                .map(|(k, v)| format!("{k}={v}")),
        );
        lines
    }

    fn report(&self, recipe: Recipe) -> KeyValueReport {
        let mut r = KeyValueReport::new();
        for line in self.provenance(recipe) {
            let (k, v) = line.split_once('=').unwrap();
            r.push(k, v);
        }
        r
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Files written by one recipe plus its summary report.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactSet {
    pub recipe: Recipe,
    pub files: Vec<PathBuf>,
    pub summary: KeyValueReport,
}

pub const OL_VRFT: &str = "ol_vrft.csv";
pub const OL_VRFT_AW: &str = "ol_vrft_aw.csv";

pub fn gains_file(controller: &str) -> String {
    format!("gains_{controller}.txt")
}

fn producer(controller: &str) -> Recipe {
    match controller {
        "zn" => Recipe::TuneZn,
        "vrft" => Recipe::TuneVrft,
        _ => Recipe::TuneVrftAw,
    }
}

fn require(path: &Path, recipe: Recipe) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Dependency {
            recipe: recipe.name().into(),
            path: path.to_path_buf(),
        })
    }
}

pub fn run_pipeline(recipe: Recipe, cfg: &PipelineConfig) -> Result<ArtifactSet> {
    cfg.params.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    match recipe {
        Recipe::CollectOl => collect_ol(cfg),
        Recipe::TuneZn => tune_zn(cfg),
        Recipe::TuneVrft => tune_vrft(cfg, false),
        Recipe::TuneVrftAw => tune_vrft(cfg, true),
        Recipe::Validate => validate(cfg, Recipe::Validate, false),
        Recipe::Compare => validate(cfg, Recipe::Compare, true),
        Recipe::Fig4Check => fig4_check(cfg),
    }
}

/// Open-loop chirp experiment: the clean measured output plus
/// `noise_realizations` noisy copies `y_0`, `y_1`, ...
pub fn training_experiment(cfg: &PipelineConfig, anti_windup: bool) -> Result<TimeSeries<f64>> {
    let s = &cfg.settings;
    let p = &cfg.params;
    let plant = cfg.plant()?;
    let model = cfg.reference_model()?;
    let f_c = 1.0 / model.tau;
    let (offset, amplitude) = if anti_windup {
        (s.aw_chirp_offset, s.aw_chirp_amplitude)
    } else {
        (s.chirp_offset, s.chirp_amplitude)
    };
    let duration = cfg.duration.unwrap_or(s.training_duration);
    let spec = ChirpSpec {
        f_start: f_c / 2.0,
        f_end: 2.0 * f_c,
        duration,
        amplitude,
        offset,
    };
    let d = chirp(&spec, p.t_samp)?;
    let duties = d.channel("d")?.to_vec();
    let mut plan = SimulationPlan::new(&plant, duration, cfg.mode, DutySource::Series(duties));
    plan.open_loop_saturation = Some((0.1, 0.9));
    let sim = integrate(&plant, &plan)?;

    let n = d.len();
    let mut ts = TimeSeries::new(0.0, p.t_samp)?;
    for name in ["d", "d_sat", "u_d"] {
        ts.push_channel(name, sim.channel(name)?[..n].to_vec())?;
    }
    let clean = sim.channel("V_meas")?[..n].to_vec();
    ts.push_channel("y_clean", clean.clone())?;
    let base = TimeSeries::with_channel(0.0, p.t_samp, "y", clean)?;
    for k in 0..s.noise_realizations {
        let noisy = apply_noise(
            &base,
            "y",
            s.noise_amplitude,
            cfg.seed.wrapping_add(k as u64),
        )?;
        ts.push_channel(&format!("y_{k}"), noisy.channel("y")?.to_vec())?;
    }
    Ok(ts)
}

fn collect_ol(cfg: &PipelineConfig) -> Result<ArtifactSet> {
    let comments = cfg.provenance(Recipe::CollectOl);
    let mut files = Vec::new();
    let mut summary = cfg.report(Recipe::CollectOl);
    for (name, aw) in [(OL_VRFT, false), (OL_VRFT_AW, true)] {
        let ts = training_experiment(cfg, aw)?;
        let path = cfg.path(name);
        ts.save_csv(&path, &comments)?;
        let u = ts.channel("u_d")?;
        summary.push(&format!("{name}.samples"), ts.len()).push(
            &format!("{name}.saturated_samples"),
            u.iter().filter(|v| **v != 0.0).count(),
        );
        files.push(path);
    }
    let rep = cfg.path("collect-ol.txt");
    summary.save(&rep)?;
    files.push(rep);
    Ok(ArtifactSet {
        recipe: Recipe::CollectOl,
        files,
        summary,
    })
}

/// Oscillation thresholds for the converter. In switched mode, swings below
/// one duty LSB worth of output (`v_in · dt_pwm / t_s`) are quantization limit
/// cycles rather than loop instability.
pub fn zn_criteria(cfg: &PipelineConfig) -> OscillationCriteria {
    let p = &cfg.params;
    let absolute_floor = match cfg.mode {
        PlantMode::Switched => p.v_in_nominal * p.dt_pwm / p.t_s,
        PlantMode::Averaged => 0.0,
    };
    OscillationCriteria {
        absolute_floor,
        ..OscillationCriteria::default()
    }
}

fn tune_zn(cfg: &PipelineConfig) -> Result<ArtifactSet> {
    let s = &cfg.settings;
    let plant = cfg.plant()?;
    let duration = cfg.duration.unwrap_or(s.zn_duration);
    let plan = SimulationPlan::new(&plant, duration, cfg.mode, DutySource::InTheLoop);
    let handle = ConverterLoop::new(plant, plan);
    let grid = s.gain_grid();
    let res = find_ultimate_gain(&handle, &grid, s.v_ref, &zn_criteria(cfg));
    let trace = match &res {
        Ok(r) => r.gain_trace.clone(),
        Err(Error::SearchFailure { trace }) => trace.clone(),
        Err(_) => Vec::new(),
    };
    let mut tr = TimeSeries::new(0.0, 1.0)?;
    tr.push_channel("gain", trace.iter().map(|p| p.gain).collect())?;
    tr.push_channel(
        "sustained",
        trace
            .iter()
            .map(|p| f64::from(u8::from(p.sustained)))
            .collect(),
    )?;
    tr.push_channel(
        "amplitude_ratio",
        trace.iter().map(|p| p.amplitude_ratio).collect(),
    )?;
    tr.push_channel("period", trace.iter().map(|p| p.period).collect())?;
    let comments = cfg.provenance(Recipe::TuneZn);
    let trace_path = cfg.path("zn_trace.csv");
    if !trace.is_empty() {
        tr.save_csv(&trace_path, &comments)?;
    }
    let res = res?;
    let gains = zn_gains(res.ku, res.tu, cfg.params.t_samp)?;
    let mut summary = cfg.report(Recipe::TuneZn);
    summary
        .push_real("ku", res.ku)
        .push_real("tu", res.tu)
        .push("grid_points_tried", res.gain_trace.len())
        .push_gains(&gains);
    let rep = cfg.path(&gains_file("zn"));
    summary.save(&rep)?;
    Ok(ArtifactSet {
        recipe: Recipe::TuneZn,
        files: vec![trace_path, rep],
        summary,
    })
}

/// Per-realization fits on a collected experiment; returns the mean gains and
/// the individual fits.
pub fn fit_experiment(
    cfg: &PipelineConfig,
    ts: &TimeSeries<f64>,
    anti_windup: bool,
) -> Result<(ControllerGains<f64>, Vec<crate::tuning::FitReport<f64>>)> {
    let model = cfg.reference_model()?;
    let t_samp = cfg.params.t_samp;
    let d = ts.channel("d")?;
    let u_d = ts.channel("u_d")?;
    let mut fits = Vec::new();
    for k in 0.. {
        let name = format!("y_{k}");
        if !ts.has_channel(&name) {
            break;
        }
        let y = ts.channel(&name)?;
        let fit = if anti_windup {
            let set = TrainingSet::from_open_loop(y, d, Some(u_d), &model, &Identity)?;
            vrft_fit_aw(
                &set.d,
                &set.e,
                set.u_d.as_deref().unwrap(),
                cfg.settings.n_aw,
                t_samp,
            )?
        } else {
            let set = TrainingSet::from_open_loop(y, d, None, &model, &Identity)?;
            vrft_fit(&set.d, &set.e, t_samp)?
        };
        fits.push(fit);
    }
    if fits.is_empty() {
        return Err(Error::Domain(
            "training data holds no output realization".into(),
        ));
    }
    let n = fits.len() as f64;
    let mean = |f: &dyn Fn(&ControllerGains<f64>) -> f64| {
        fits.iter().map(|r| f(&r.gains)).sum::<f64>() / n
    };
    let kp = mean(&|g| g.kp);
    let ki = mean(&|g| g.ki);
    let gains = if anti_windup {
        let kaw = mean(&|g| g.kaw.unwrap_or(0.0));
        ControllerGains::pi_aw(kp, ki, kaw, cfg.settings.n_aw, t_samp)
    } else {
        ControllerGains::pi(kp, ki, t_samp)
    };
    Ok((gains, fits))
}

fn tune_vrft(cfg: &PipelineConfig, anti_windup: bool) -> Result<ArtifactSet> {
    let (recipe, input, label) = if anti_windup {
        (Recipe::TuneVrftAw, OL_VRFT_AW, "vrft_aw")
    } else {
        (Recipe::TuneVrft, OL_VRFT, "vrft")
    };
    let path = cfg.path(input);
    require(&path, Recipe::CollectOl)?;
    let ts = TimeSeries::load_csv(&path)?;
    let (gains, fits) = fit_experiment(cfg, &ts, anti_windup)?;
    let mut summary = cfg.report(recipe);
    summary
        .push("input", input)
        .push("realizations", fits.len());
    for (k, f) in fits.iter().enumerate() {
        let theta = f
            .theta
            .iter()
            .map(|v| format!("{v:.17e}"))
            .collect::<Vec<_>>()
            .join(";");
        summary
            .push(&format!("fit_{k}.theta"), theta)
            .push_real(&format!("fit_{k}.residual_rms"), f.residual_rms)
            .push_real(&format!("fit_{k}.condition_number"), f.condition_number)
            .push(&format!("fit_{k}.samples"), f.samples);
    }
    summary.push_gains(&gains);
    let rep = cfg.path(&gains_file(label));
    summary.save(&rep)?;
    Ok(ArtifactSet {
        recipe,
        files: vec![rep],
        summary,
    })
}

/// Loads the gains written by a tuning recipe.
pub fn load_gains(cfg: &PipelineConfig, controller: &str) -> Result<ControllerGains<f64>> {
    let path = cfg.path(&gains_file(controller));
    require(&path, producer(controller))?;
    KeyValueReport::load(&path)?.gains()
}

/// Closed-loop step to `v_ref` from cold start and its metrics.
pub fn validation_run(
    cfg: &PipelineConfig,
    gains: &ControllerGains<f64>,
    name: &str,
) -> Result<(TimeSeries<f64>, PerformanceReport<f64>)> {
    let s = &cfg.settings;
    let plant = cfg.plant()?;
    let duration = cfg.duration.unwrap_or(s.validation_duration);
    let mut plan = SimulationPlan::new(&plant, duration, cfg.mode, DutySource::InTheLoop);
    plan.record_stride = Some(s.validation_stride);
    let ts = closed_loop(&plant, &plan, gains, &Schedule::constant(s.v_ref))?;
    let mut mc = MetricsConfig::named(name);
    mc.saturation = Some((gains.sat_lo, gains.sat_hi));
    let rep = compute_metrics(&ts, s.v_ref, None, &mc)?;
    Ok((ts, rep))
}

fn push_metrics(r: &mut KeyValueReport, p: &PerformanceReport<f64>) {
    let prefix = &p.controller_name;
    r.push_real(&format!("{prefix}.undershoot_pct"), p.undershoot_pct);
    match p.settling_time_5pct {
        Some(t) => r.push_real(&format!("{prefix}.settling_time_5pct"), t),
        None => r.push(&format!("{prefix}.settling_time_5pct"), "not_settled"),
    };
    r.push_real(
        &format!("{prefix}.steady_state_error"),
        p.steady_state_error,
    )
    .push_real(
        &format!("{prefix}.saturation_duration"),
        p.saturation_duration,
    );
}

fn validate(cfg: &PipelineConfig, recipe: Recipe, all: bool) -> Result<ArtifactSet> {
    let mut selected = Vec::new();
    for c in CONTROLLERS {
        match load_gains(cfg, c) {
            Ok(g) => selected.push((c, g)),
            Err(e @ Error::Dependency { .. }) if all => return Err(e),
            Err(Error::Dependency { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if selected.is_empty() {
        return Err(Error::Dependency {
            recipe: Recipe::TuneVrft.name().into(),
            path: cfg.path(&gains_file("vrft")),
        });
    }
    let runs: Vec<Result<(TimeSeries<f64>, PerformanceReport<f64>)>> = std::thread::scope(|s| {
        let handles: Vec<_> = selected
            .iter()
            .map(|(name, g)| s.spawn(move || validation_run(cfg, g, name)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("validation thread panicked"))
            .collect()
    });

    let comments = cfg.provenance(recipe);
    let mut summary = cfg.report(recipe);
    let mut files = Vec::new();
    let mut table = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for ((name, g), run) in selected.iter().zip(runs) {
        let (ts, rep) = run?;
        let mut lines = comments.clone();
        let mut gr = KeyValueReport::new();
        gr.push_gains(g);
        lines.extend(gr.entries.iter().map(|(k, v)| format!("gains.{k}={v}")));
        let path = cfg.path(&format!("cl_{name}.csv"));
        ts.save_csv(&path, &lines)?;
        files.push(path);
        push_metrics(&mut summary, &rep);
        table
            .0
            .push(CONTROLLERS.iter().position(|c| c == name).unwrap() as f64);
        table.1.push(rep.undershoot_pct);
        table
            .2
            .push(rep.settling_time_5pct.map_or(f64::NAN, |t| t * 1e3));
        table.3.push(rep.steady_state_error);
        table.4.push(rep.saturation_duration * 1e3);
    }
    if recipe == Recipe::Compare {
        let mut t = TimeSeries::new(0.0, 1.0)?;
        t.push_channel("controller", table.0)?;
        t.push_channel("undershoot_pct", table.1)?;
        t.push_channel("settling_ms", table.2)?;
        t.push_channel("steady_state_error", table.3)?;
        t.push_channel("saturation_ms", table.4)?;
        let mut lines = comments;
        lines.push(format!("controller index: {}", CONTROLLERS.join(",")));
        let path = cfg.path("comparison.csv");
        t.save_csv(&path, &lines)?;
        files.push(path);
    }
    let rep = cfg.path(&format!("{recipe}.txt"));
    summary.save(&rep)?;
    files.push(rep);
    Ok(ArtifactSet {
        recipe,
        files,
        summary,
    })
}

/// Steady-state period-mean output of the switched plant against the
/// averaged equilibrium at a constant duty. Returns (equilibrium, switched mean, trace).
pub fn switched_vs_averaged(cfg: &PipelineConfig, d: f64) -> Result<(f64, f64, TimeSeries<f64>)> {
    let plant = cfg.plant()?;
    let eq = equilibrium(&plant.model, d, &plant.nominal_input())?[V_OUT];
    let duration = cfg.duration.unwrap_or(cfg.settings.fig4_duration);
    let mut plan = SimulationPlan::new(
        &plant,
        duration,
        PlantMode::Switched,
        DutySource::Constant(d),
    );
    plan.record_stride = Some(10);
    let ts = integrate(&plant, &plan)?;
    let avg = ts.channel("V_out_avg")?;
    let mean = *avg.last().unwrap();
    Ok((eq, mean, ts))
}

fn fig4_check(cfg: &PipelineConfig) -> Result<ArtifactSet> {
    let duties = cfg.settings.fig4_duties.clone();
    let results: Vec<Result<(f64, f64, TimeSeries<f64>)>> = std::thread::scope(|s| {
        let handles: Vec<_> = duties
            .iter()
            .map(|&d| s.spawn(move || switched_vs_averaged(cfg, d)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fig4 thread panicked"))
            .collect()
    });
    let comments = cfg.provenance(Recipe::Fig4Check);
    let mut summary = cfg.report(Recipe::Fig4Check);
    let mut files = Vec::new();
    let mut worst: f64 = 0.0;
    for (d, r) in duties.iter().zip(results) {
        let (eq, mean, ts) = r?;
        let rel = (mean - eq).abs() / eq.abs();
        worst = worst.max(rel);
        summary
            .push_real(&format!("d{d}.averaged_equilibrium"), eq)
            .push_real(&format!("d{d}.switched_mean"), mean)
            .push_real(&format!("d{d}.relative_discrepancy"), rel);
        let path = cfg.path(&format!("fig4_d{d}.csv"));
        let mut out = TimeSeries::new(ts.t0(), ts.dt())?;
        for name in ["V_out", "V_out_avg", "I_L1", "I_L2"] {
            out.push_channel(name, ts.channel(name)?.to_vec())?;
        }
        out.push_channel("V_out_averaged_eq", vec![eq; ts.len()])?;
        out.save_csv(&path, &comments)?;
        files.push(path);
    }
    summary
        .push_real("max_relative_discrepancy", worst)
        .push("within_2pct", worst < 0.02);
    let rep = cfg.path("fig4-check.txt");
    summary.save(&rep)?;
    files.push(rep);
    Ok(ArtifactSet {
        recipe: Recipe::Fig4Check,
        files,
        summary,
    })
}
