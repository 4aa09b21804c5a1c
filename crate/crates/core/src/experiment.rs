//! End-to-end experiments writing plain-text artifacts into an output directory.
//!
//! Every file is written whole through a temporary sibling and a rename, so a
//! reader never sees a partial file. Nothing written depends on wall-clock time,
//! so identical configs produce identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate, Calibration, CalibrationSetup};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::{EnergyReport, TimingSummary};
use crate::network::{chain_spikes, latency};
use crate::patterns::{builtin_symbol, make_library_with, SymbolGrid, TrainingLibrary, GRID_SIDE};
use crate::readout::{calibrate_weak_coupling, clock_drive, MultiSpanNetwork, TrainedChannel};
use crate::span::{evaluate, train, SpanNetwork, TrainedSpan, TrainingRecord, Verdict};
use crate::units::{to_ps, PS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Calibrate,
    Sweep,
    Train,
    Eval,
    Multispan,
    Export,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Calibrate => "calibrate",
            Experiment::Sweep => "sweep",
            Experiment::Train => "train",
            Experiment::Eval => "eval",
            Experiment::Multispan => "multispan",
            Experiment::Export => "export",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "calibrate" => Experiment::Calibrate,
            "sweep" => Experiment::Sweep,
            "train" => Experiment::Train,
            "eval" => Experiment::Eval,
            "multispan" | "classify" => Experiment::Multispan,
            "export" => Experiment::Export,
            other => return Err(Error::Config(format!("unknown experiment {other:?}"))),
        })
    }
}

/// Write `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Collects written artifact paths.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            written: Vec::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let p = self.path(name);
        write_atomic(&p, contents)?;
        self.written.push(p.clone());
        Ok(p)
    }
}

#[derive(Serialize, Deserialize)]
struct CalibrationFile {
    setup: CalibrationSetup,
    result: Calibration,
}

const CALIBRATION_FILE: &str = "calibration.toml";

/// Reuse `calibration.toml` from the output directory when it was produced
/// by the same setup; otherwise calibrate and store it.
pub fn load_or_calibrate(cfg: &RunConfig, out: &mut Artifacts) -> Result<Calibration> {
    let setup = cfg.calibration_setup();
    let path = out.path(CALIBRATION_FILE);
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(f) = toml::from_str::<CalibrationFile>(&text) {
            if f.setup == setup {
                return Ok(f.result);
            }
        }
    }
    let cal = calibrate(&setup)?;
    let text = toml::to_string(&CalibrationFile { setup, result: cal })
        .map_err(|e| Error::parse(CALIBRATION_FILE, e.to_string()))?;
    out.write(CALIBRATION_FILE, &text)?;
    out.write("calibration_report.txt", &cal.report())?;
    Ok(cal)
}

pub fn symbol(label: &str) -> Result<SymbolGrid> {
    builtin_symbol(label).ok_or_else(|| Error::Config(format!("unknown symbol {label:?}")))
}

pub fn library_for(cfg: &RunConfig, label: &str) -> Result<TrainingLibrary> {
    let l = &cfg.library;
    Ok(make_library_with(
        &symbol(label)?,
        l.size,
        l.max_flips,
        cfg.seed,
        l.base_time_ps * PS,
        l.shift_per_pixel_ps * PS,
    )?
    .with_missing_shift(l.missing_shift_per_pixel_ps * PS))
}

pub fn span_network(cfg: &RunConfig, cal: Calibration) -> SpanNetwork {
    SpanNetwork::new(cal, &cfg.sim_config(), cfg.simulation.horizon_ps * PS)
}

/// Both calibration chains (κ₀ and the strong coupling) plus the report.
pub fn run_calibrate(cfg: &RunConfig, out: &mut Artifacts) -> Result<Calibration> {
    let cal = load_or_calibrate(cfg, out)?;
    out.write("calibration_report.txt", &cal.report())?;
    let sim = cal.sim_config(&cfg.sim_config());
    let labels = vec!["driven".to_string(), "response".to_string()];
    let t = cal.targets;
    for (name, kappa) in [("chain_k0", t.kappa_0), ("chain_strong", t.strong_factor * t.kappa_0)] {
        let r = chain_spikes(&cal.params, kappa, &cal.stimulus, &sim)?;
        out.write(&format!("{name}_traces.txt"), &r.to_columnar(Some(&labels)))?;
    }
    Ok(cal)
}

/// Chain latency at `points` couplings spread over `[κ_cutoff, 2κ₀]`.
pub fn latency_sweep(cfg: &RunConfig, cal: &Calibration, points: usize) -> Result<Vec<(f64, f64)>> {
    let sim = cal.sim_config(&cfg.sim_config()).with_t_end(cfg.calibration.horizon_ps * PS);
    let (lo, hi) = (cal.kappa_cutoff, 2.0 * cal.targets.kappa_0);
    (0..points)
        .map(|i| {
            let k = lo + (hi - lo) * i as f64 / (points.max(2) - 1) as f64;
            Ok((k, latency(&cal.params, k, &cal.stimulus, &sim)?))
        })
        .collect()
}

pub fn run_sweep(cfg: &RunConfig, out: &mut Artifacts) -> Result<Vec<(f64, f64)>> {
    let cal = load_or_calibrate(cfg, out)?;
    let pts = latency_sweep(cfg, &cal, 10)?;
    let mut s = String::from("kappa latency_ps\n");
    for (k, l) in &pts {
        writeln!(s, "{k:.9e} {:.4}", to_ps(*l)).unwrap();
    }
    out.write("sweep_latency.txt", &s)?;
    Ok(pts)
}

/// 5×5 weight grid, one row per line.
pub fn weight_map(weights: &[f64]) -> String {
    let mut s = String::new();
    for row in weights.chunks(GRID_SIDE) {
        let cells: Vec<String> = row.iter().map(|w| format!("{w:.6e}")).collect();
        writeln!(s, "{}", cells.join(" ")).unwrap();
    }
    s
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub library: TrainingLibrary,
    pub trained: TrainedSpan,
    pub record: TrainingRecord,
    pub energy: EnergyReport,
    pub timing: TimingSummary,
}

/// Train one SPAN on `label` and write its record, weights and weight maps.
pub fn train_symbol(
    cfg: &RunConfig,
    cal: Calibration,
    label: &str,
    out: &mut Artifacts,
) -> Result<TrainOutcome> {
    let library = library_for(cfg, label)?;
    let tc = cfg.trainer_config();
    let net = span_network(cfg, cal);
    let (weights, record) = train(&net, &library, &tc, cfg.seed)?;
    let trained = TrainedSpan {
        label: label.to_string(),
        seed: cfg.seed,
        trainer: tc,
        weights,
    };
    let energy = EnergyReport::from_counts(
        record.total_synaptic_ops(),
        tc.epochs as f64 * library.len() as f64 * tc.horizon,
        cfg.energy_per_op(),
    );
    let timing = TimingSummary {
        inference_latency: None,
        epochs: tc.epochs,
        library_size: library.len(),
        horizon: tc.horizon,
        epochs_to_converge: record.first_epoch_within(tc.window),
    };

    out.write(&format!("library_{label}.toml"), &library.to_text())?;
    out.write(&format!("training_{label}.txt"), &record.to_columnar())?;
    out.write(&format!("weights_{label}.toml"), &trained.to_text())?;
    let mut maps = String::new();
    let snapshots = [
        ("initial".to_string(), Some(&record.initial_weights)),
        ("epoch 10".to_string(), record.epochs.get(9).map(|e| &e.weights)),
        ("final".to_string(), record.epochs.last().map(|e| &e.weights)),
    ];
    for (name, w) in snapshots {
        if let Some(w) = w {
            writeln!(maps, "# {name}").unwrap();
            maps.push_str(&weight_map(w));
            maps.push('\n');
        }
    }
    out.write(&format!("weightmap_{label}.txt"), &maps)?;
    out.write(&format!("energy_train_{label}.txt"), &energy.to_text())?;
    out.write(&format!("timing_train_{label}.txt"), &timing.to_text())?;
    Ok(TrainOutcome {
        library,
        trained,
        record,
        energy,
        timing,
    })
}

/// Weights for `label`: read from `weights_<label>.toml` when it matches the
/// config, otherwise trained now.
pub fn trained_weights(
    cfg: &RunConfig,
    cal: Calibration,
    label: &str,
    out: &mut Artifacts,
) -> Result<TrainedSpan> {
    let want = TrainedSpan {
        label: label.to_string(),
        seed: cfg.seed,
        trainer: cfg.trainer_config(),
        weights: Vec::new(),
    };
    if let Ok(text) = std::fs::read_to_string(out.path(&format!("weights_{label}.toml"))) {
        if let Ok(have) = TrainedSpan::from_text(&text) {
            if have.label == want.label && have.seed == want.seed && have.trainer == want.trainer {
                return Ok(have);
            }
        }
    }
    Ok(train_symbol(cfg, cal, label, out)?.trained)
}

#[derive(Debug, Clone)]
pub struct EvalRow {
    pub label: String,
    pub hamming: usize,
    pub target: f64,
    pub verdict: Verdict,
}

/// Present every library symbol to the trained SPAN and judge it against the
/// base target window.
pub fn evaluate_library(
    net: &SpanNetwork,
    weights: &[f64],
    library: &TrainingLibrary,
    window: f64,
) -> Result<Vec<EvalRow>> {
    library
        .entries()
        .iter()
        .map(|e| {
            Ok(EvalRow {
                label: e.grid.label.clone(),
                hamming: e.grid.hamming(&library.correct),
                target: e.target,
                verdict: evaluate(net, weights, &e.grid, library.base_time, window)?,
            })
        })
        .collect()
}

pub fn eval_table(rows: &[EvalRow]) -> String {
    let mut s = String::from("label hamming target_ps spike_ps verdict\n");
    for r in rows {
        let t = r
            .verdict
            .spike_time()
            .map(|t| format!("{:.3}", to_ps(t)))
            .unwrap_or_else(|| "nan".into());
        writeln!(s, "{} {} {:.1} {} {}", r.label, r.hamming, to_ps(r.target), t, r.verdict.name()).unwrap();
    }
    s
}

pub fn run_eval(cfg: &RunConfig, label: &str, out: &mut Artifacts) -> Result<Vec<EvalRow>> {
    let cal = load_or_calibrate(cfg, out)?;
    let trained = trained_weights(cfg, cal, label, out)?;
    let library = library_for(cfg, label)?;
    let net = span_network(cfg, cal);
    let rows = evaluate_library(&net, &trained.weights, &library, cfg.trainer_config().window)?;
    out.write(&format!("eval_{label}.txt"), &eval_table(&rows))?;
    Ok(rows)
}

/// Clock-gated readout over the configured readout symbols.
pub fn build_multispan(cfg: &RunConfig, cal: Calibration, out: &mut Artifacts) -> Result<MultiSpanNetwork> {
    let mut spans = Vec::new();
    for label in &cfg.readout.symbols {
        let t = trained_weights(cfg, cal, label, out)?;
        spans.push(TrainedChannel {
            label: label.clone(),
            weights: t.weights,
        });
    }
    let base = cfg.sim_config();
    let kappa_weak = calibrate_weak_coupling(&cal, &base, cfg.readout.coincidence_tolerance_ps * PS)?;
    let target = cfg.library.base_time_ps * PS;
    let clock = clock_drive(&cal, &base, target)?;
    MultiSpanNetwork::new(
        cal,
        base.with_t_end(cfg.readout.horizon_ps * PS),
        spans,
        clock,
        kappa_weak,
        target,
    )
}

#[derive(Debug, Clone)]
pub struct ClassifyRow {
    pub input: String,
    pub span_times: Vec<Option<f64>>,
    pub clock_time: Option<f64>,
    pub output_spikes: Vec<usize>,
    /// `Err` text when more than one output fired.
    pub decision: std::result::Result<Option<String>, String>,
    /// First output spike, measured from the input stimulus.
    pub latency: Option<f64>,
    pub synaptic_ops: u64,
}

pub fn run_multispan(cfg: &RunConfig, out: &mut Artifacts) -> Result<(MultiSpanNetwork, Vec<ClassifyRow>)> {
    let cal = load_or_calibrate(cfg, out)?;
    let net = build_multispan(cfg, cal, out)?;
    out.write("multispan.toml", &net.to_text())?;

    let mut inputs: Vec<SymbolGrid> = Vec::new();
    for label in &cfg.readout.symbols {
        inputs.push(symbol(label)?);
    }
    // One maximally corrupted variant per channel.
    for label in &cfg.readout.symbols {
        let lib = library_for(cfg, label)?;
        if let Some(v) = lib
            .entries()
            .into_iter()
            .skip(1)
            .max_by_key(|e| e.grid.hamming(&lib.correct))
        {
            inputs.push(v.grid);
        }
    }

    let mut selection: Vec<(usize, String)> = Vec::new();
    for (s, ch) in net.spans.iter().enumerate() {
        selection.push((net.span_index(s), format!("span_{}", ch.label)));
    }
    selection.push((net.clock_index(), "clock".into()));
    for (s, ch) in net.spans.iter().enumerate() {
        selection.push((net.output_index(s), format!("out_{}", ch.label)));
    }

    let mut rows = Vec::new();
    for input in &inputs {
        let run = net.run(input)?;
        let latency = (0..net.output_count())
            .filter_map(|s| run.result.first_spike(net.output_index(s)))
            .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.min(t))));
        out.write(&format!("classify_{}_traces.txt", input.label), &run.result.columns(&selection))?;
        rows.push(ClassifyRow {
            input: input.label.clone(),
            decision: net.decide(&run).map_err(|e| e.to_string()),
            span_times: run.span_times.clone(),
            clock_time: run.clock_time,
            output_spikes: run.output_spikes.clone(),
            latency,
            synaptic_ops: run.result.synaptic_op_count,
        });
    }

    let mut table = String::from("input decision latency_ps clock_ps");
    for ch in &net.spans {
        write!(table, " span_{}_ps out_{}_spikes", ch.label, ch.label).unwrap();
    }
    table.push('\n');
    let fmt_t = |t: Option<f64>| t.map(|t| format!("{:.3}", to_ps(t))).unwrap_or_else(|| "nan".into());
    for r in &rows {
        let d = match &r.decision {
            Ok(Some(l)) => l.clone(),
            Ok(None) => "none".into(),
            Err(_) => "ambiguous".into(),
        };
        write!(table, "{} {} {} {}", r.input, d, fmt_t(r.latency), fmt_t(r.clock_time)).unwrap();
        for (t, n) in r.span_times.iter().zip(&r.output_spikes) {
            write!(table, " {} {}", fmt_t(*t), n).unwrap();
        }
        table.push('\n');
    }
    out.write("classification.txt", &table)?;

    let ops = rows.iter().map(|r| r.synaptic_ops).sum();
    let energy = EnergyReport::from_counts(ops, rows.len() as f64 * net.sim.t_end, cfg.energy_per_op());
    out.write("energy_multispan.txt", &energy.to_text())?;
    let inference = rows
        .iter()
        .filter(|r| matches!(&r.decision, Ok(Some(l)) if *l == r.input))
        .filter_map(|r| r.latency)
        .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t))));
    let timing = TimingSummary {
        inference_latency: inference,
        epochs: cfg.trainer.epochs,
        library_size: cfg.library.size,
        horizon: cfg.simulation.horizon_ps * PS,
        epochs_to_converge: None,
    };
    out.write("timing_multispan.txt", &timing.to_text())?;
    Ok((net, rows))
}

/// Glyph fixture, the configured library and the resolved config.
pub fn run_export(cfg: &RunConfig, label: &str, out: &mut Artifacts) -> Result<()> {
    let mut glyphs = String::new();
    for g in crate::patterns::builtin_symbols() {
        writeln!(glyphs, ":{}\n{}", g.label, g).unwrap();
    }
    out.write("symbols.txt", &glyphs)?;
    out.write(&format!("library_{label}.toml"), &library_for(cfg, label)?.to_text())?;
    out.write("config_resolved.toml", &cfg.to_toml())?;
    Ok(())
}

pub fn run_experiment(kind: Experiment, cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    cfg.validate()?;
    let label = cfg.library.symbol.clone();
    match kind {
        Experiment::Calibrate => run_calibrate(cfg, out).map(drop),
        Experiment::Sweep => run_sweep(cfg, out).map(drop),
        Experiment::Train => {
            let cal = load_or_calibrate(cfg, out)?;
            train_symbol(cfg, cal, &label, out).map(drop)
        }
        Experiment::Eval => run_eval(cfg, &label, out).map(drop),
        Experiment::Multispan => run_multispan(cfg, out).map(drop),
        Experiment::Export => run_export(cfg, &label, out),
    }
}
