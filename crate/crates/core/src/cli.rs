//! Command-line front end.
//!
//! Config files are JSON with unit-suffixed keys (`c_j_fF`, `e_j_max_GHz`,
//! `g_MHz`, …); everything is converted to SI at this boundary. Outputs are
//! CSV preceded by `#` header lines recording the command, the config hash,
//! the constants release and the resolved parameters.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::circuit::{self, CircuitParams};
use crate::constants;
use crate::design::{self, DesignPoint, DesignReport, DesignTopology};
use crate::error::{Error, Result};
use crate::fitting::{self, FitConfig, FitParams, Param, PeakData};
use crate::foster::{self, Topology};
use crate::hamiltonian::{self, HamiltonianParams, ModelConfig, ParamSource, Tier};
use crate::spectroscopy::{self, Branch, FluxAxis, FluxMapping};

const MODULE: &str = "cli";
const CSV_SCHEMA: &str = "cqed-csv/1";

const FF: f64 = 1e-15;
const NH: f64 = 1e-9;
const MHZ: f64 = 1e6;
const GHZ: f64 = 1e9;

#[derive(Debug, Parser)]
#[command(name = "cqed", version, about = "Transmon / high-impedance resonator coupling toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV; written atomically. Standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override a config key, e.g. `--set g_MHz=450` or `--set fit.tolerance=1e-12`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form circuit quantities and the coupling-inversion chain.
    Params {
        #[command(flatten)]
        common: Common,
    },
    /// Foster modes of the resonator line.
    Foster {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        modes: Option<usize>,
    },
    /// Coupled spectrum at one flux point.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tier: Option<String>,
        #[arg(long)]
        modes: Option<usize>,
    },
    /// Transition branches over a flux range.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// START:STOP:N in units of the flux quantum.
        #[arg(long, default_value = "0.30:0.45:601")]
        flux: String,
        #[arg(long)]
        tier: Option<String>,
        #[arg(long)]
        modes: Option<usize>,
        /// Also write synthetic peak data (lower/upper branches) for `fit`.
        #[arg(long)]
        peaks_out: Option<PathBuf>,
        /// Gaussian noise on synthetic peak positions, MHz.
        #[arg(long, default_value_t = 0.0)]
        noise_mhz: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit Hamiltonian parameters to peak positions.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        peaks: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Normalized coupling and required impedance of a capacitance choice.
    Design {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Params { common }
            | Command::Foster { common, .. }
            | Command::Spectrum { common, .. }
            | Command::Sweep { common, .. }
            | Command::Fit { common, .. }
            | Command::Design { common } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Params { .. } => "params",
            Command::Foster { .. } => "foster",
            Command::Spectrum { .. } => "spectrum",
            Command::Sweep { .. } => "sweep",
            Command::Fit { .. } => "fit",
            Command::Design { .. } => "design",
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub free_params: Option<Vec<String>>,
    pub tolerance: Option<f64>,
    pub max_evaluations: Option<usize>,
    pub restarts: Option<usize>,
    /// Keys as in the top level (`e_c_MHz`, `g_MHz`, `flux_offset`, …); values [lo, hi].
    pub bounds: Option<BTreeMap<String, [f64; 2]>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(rename = "c_j_fF")]
    pub c_j_ff: Vec<f64>,
    #[serde(rename = "c_c_fF")]
    pub c_c_ff: Vec<f64>,
    #[serde(rename = "c_r_fF")]
    pub c_r_ff: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    #[serde(rename = "target_f_GHz")]
    pub target_f_ghz: Option<f64>,
    pub topology: Option<String>,
    pub scan: Option<ScanSection>,
}

/// The JSON configuration file, unit-suffixed keys.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// "hamiltonian" or "circuit"; inferred when absent.
    pub source: Option<String>,
    #[serde(rename = "c_j_fF")]
    pub c_j_ff: Option<f64>,
    #[serde(rename = "c_c_fF")]
    pub c_c_ff: Option<f64>,
    #[serde(rename = "c_r_fF")]
    pub c_r_ff: Option<f64>,
    #[serde(rename = "l_r_nH")]
    pub l_r_nh: Option<f64>,
    #[serde(rename = "e_j_max_GHz")]
    pub e_j_max_ghz: Option<f64>,
    #[serde(rename = "e_c_MHz")]
    pub e_c_mhz: Option<f64>,
    #[serde(rename = "f_r_GHz")]
    pub f_r_ghz: Option<f64>,
    #[serde(rename = "g_MHz")]
    pub g_mhz: Option<f64>,
    /// Qubit frequency used in the coupling inversion; defaults to f_r.
    #[serde(rename = "f_a_GHz")]
    pub f_a_ghz: Option<f64>,
    pub flux: Option<f64>,
    pub flux_offset: Option<f64>,
    pub flux_period: Option<f64>,
    pub tier: Option<String>,
    pub k_levels: Option<usize>,
    pub n_ph: Option<usize>,
    pub n_modes: Option<usize>,
    pub n_cut: Option<usize>,
    pub rwa: Option<bool>,
    pub topology: Option<String>,
    pub series_threshold: Option<f64>,
    pub dim_cap: Option<usize>,
    pub fit: Option<FitSection>,
    pub design: Option<DesignSection>,
}

fn missing(field: &'static str) -> Error {
    Error::Domain {
        module: MODULE,
        field,
        reason: "required by this command but missing from the config".into(),
    }
}

impl RunConfig {
    fn has_hamiltonian(&self) -> bool {
        self.e_c_mhz.is_some() && self.f_r_ghz.is_some() && self.g_mhz.is_some() && self.e_j_max_ghz.is_some()
    }

    pub fn circuit(&self) -> Result<CircuitParams> {
        CircuitParams::new(
            self.c_j_ff.ok_or_else(|| missing("c_j_fF"))? * FF,
            self.c_c_ff.ok_or_else(|| missing("c_c_fF"))? * FF,
            self.c_r_ff.ok_or_else(|| missing("c_r_fF"))? * FF,
            self.l_r_nh.ok_or_else(|| missing("l_r_nH"))? * NH,
            self.e_j_max_ghz.ok_or_else(|| missing("e_j_max_GHz"))? * GHZ,
            self.flux.unwrap_or(0.0),
        )
    }

    pub fn hamiltonian(&self) -> Result<HamiltonianParams> {
        let h = HamiltonianParams {
            e_c: self.e_c_mhz.ok_or_else(|| missing("e_c_MHz"))? * MHZ,
            e_j_max: self.e_j_max_ghz.ok_or_else(|| missing("e_j_max_GHz"))? * GHZ,
            f_r: self.f_r_ghz.ok_or_else(|| missing("f_r_GHz"))? * GHZ,
            g: self.g_mhz.ok_or_else(|| missing("g_MHz"))? * MHZ,
            flux: self.flux.unwrap_or(0.0),
        };
        h.validate()?;
        Ok(h)
    }

    pub fn mapping(&self) -> FluxMapping {
        FluxMapping {
            offset: self.flux_offset.unwrap_or(0.0),
            period: self.flux_period.unwrap_or(1.0),
        }
    }

    pub fn topology(&self) -> Result<Topology> {
        self.topology.as_deref().map_or(Ok(Topology::HalfWave), str::parse)
    }

    /// Model configuration; `tier` and `modes` are command-line overrides.
    pub fn model(&self, tier: Option<&str>, modes: Option<usize>) -> Result<ModelConfig> {
        let tier: Tier = tier.or(self.tier.as_deref()).unwrap_or("exact_single").parse()?;
        let source = match self.source.as_deref() {
            Some("hamiltonian") => ParamSource::Hamiltonian(self.hamiltonian()?),
            Some("circuit") => ParamSource::Circuit(self.circuit()?),
            Some(other) => {
                return Err(Error::domain(MODULE, "source", format!("unknown source {other:?}")));
            }
            None if tier != Tier::ExactMultimode && self.has_hamiltonian() => {
                ParamSource::Hamiltonian(self.hamiltonian()?)
            }
            None => ParamSource::Circuit(self.circuit()?),
        };
        let mut cfg = ModelConfig::new(tier, source);
        if let Some(k) = self.k_levels {
            cfg.k_levels = k;
        }
        if let Some(n) = self.n_ph {
            cfg.n_ph = n;
        }
        if let Some(n) = modes.or(self.n_modes) {
            cfg.n_modes = n;
        }
        cfg.n_cut = self.n_cut.or(cfg.n_cut);
        if let Some(r) = self.rwa {
            cfg.rwa = r;
        }
        if let Some(c) = self.dim_cap {
            cfg.dim_cap = c;
        }
        if let Some(t) = self.series_threshold {
            cfg.series_threshold = t;
        }
        cfg.topology = self.topology()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Loads the config (or an empty one), applies `--set` overrides, and returns
/// the parsed config together with its canonical JSON text.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<(RunConfig, String)> {
    let mut value: Value = match path {
        Some(p) => serde_json::from_str(&read_input(p)?)?,
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("override {o:?} is not KEY=VALUE")))?;
        let v: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut slot = &mut value;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = slot
                .as_object_mut()
                .ok_or_else(|| Error::Usage(format!("override {key:?}: {part:?} is not inside an object")))?;
            if i + 1 == parts.len() {
                obj.insert(part.to_string(), v.clone());
                break;
            }
            slot = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
        }
    }
    let cfg: RunConfig = serde_json::from_value(value)?;
    let mut resolved = serde_json::to_value(&cfg)?;
    strip_nulls(&mut resolved);
    let canonical = serde_json::to_string(&resolved)?;
    Ok((cfg, canonical))
}

fn read_input(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))
}

fn strip_nulls(v: &mut Value) {
    if let Value::Object(map) = v {
        map.retain(|_, x| !x.is_null());
        map.values_mut().for_each(strip_nulls);
    }
}

fn parse_flux_range(s: &str) -> Result<FluxAxis> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Usage(format!("--flux expects START:STOP:N, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    FluxAxis::linspace(start, stop, n)
}

fn e(v: f64) -> String {
    format!("{v:.12e}")
}

/// Product of a command: CSV body plus a human-readable summary.
struct Output {
    csv: String,
    summary: String,
    exit_code: i32,
}

fn header(command_line: &str, canonical: &str) -> String {
    let hash = hex::encode(Sha256::digest(canonical.as_bytes()));
    format!(
        "# cqed {} schema={CSV_SCHEMA}\n# command: {command_line}\n# config_sha256: {hash}\n# constants: {}\n# params: {canonical}\n",
        env!("CARGO_PKG_VERSION"),
        constants::describe(),
    )
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn cmd_params(cfg: &RunConfig) -> Result<Output> {
    let p = cfg.circuit()?;
    let d = circuit::derive(&p)?;
    let g_bar = circuit::normalized_coupling(p.c_j, p.c_c, p.c_r)?;
    let (z_r, z_0) = circuit::impedance_chain(p.c_r, p.l_r)?;
    let mut rows: Vec<(&str, f64, &str)> = vec![
        ("c_star_sq", d.c_star_sq, "F^2"),
        ("c_j_eff", d.c_j_eff, "F"),
        ("c_r_eff", d.c_r_eff, "F"),
        ("e_c", d.e_c, "Hz"),
        ("e_j", d.e_j, "Hz"),
        ("f_a", d.omega_a, "Hz"),
        ("f_r", d.omega_r, "Hz"),
        ("l_j", d.l_j, "H"),
        ("z_r_eff", d.z_r_eff, "ohm"),
        ("z_a_eff", d.z_a_eff, "ohm"),
        ("g", d.g, "Hz"),
        ("g_impedance_form", d.g_impedance_form, "Hz"),
        ("g_bar", g_bar, "1"),
        ("z_r", z_r, "ohm"),
        ("z_0", z_0, "ohm"),
    ];
    let mut summary = String::new();
    if let (Some(f_r), Some(g)) = (cfg.f_r_ghz, cfg.g_mhz) {
        let (f_r, g) = (f_r * GHZ, g * MHZ);
        let f_a = cfg.f_a_ghz.map_or(f_r, |f| f * GHZ);
        let x = fitting::extract_circuit(f_r, g, p.c_j, p.c_c, f_a)?;
        rows.extend([
            ("extracted_c_r", x.c_r, "F"),
            ("extracted_l_r", x.l_r, "H"),
            ("extracted_z_r", x.z_r, "ohm"),
            ("extracted_z_0", x.z_0, "ohm"),
        ]);
        writeln!(
            summary,
            "extraction from f_r={:.4} GHz, g={:.1} MHz, f_a={:.4} GHz: C_r={:.2} fF, L_r={:.3} nH, Z_r={:.1} ohm, Z_0={:.1} ohm",
            f_r / GHZ,
            g / MHZ,
            f_a / GHZ,
            x.c_r / FF,
            x.l_r / NH,
            x.z_r,
            x.z_0
        )
        .ok();
    }
    let mut csv = String::from("quantity,value,unit\n");
    for (q, v, u) in &rows {
        writeln!(csv, "{q},{},{u}", e(*v)).ok();
        writeln!(summary, "{q:>18} = {v:.6e} {u}").ok();
    }
    if d.outside_transmon_regime {
        summary.push_str("warning: E_J/E_c below the Transmon regime\n");
    }
    if d.e_j_negative_branch {
        summary.push_str("warning: flux lies on the negative cos(pi phi) branch; |E_J| used\n");
    }
    Ok(Output {
        csv,
        summary,
        exit_code: 0,
    })
}

fn cmd_foster(cfg: &RunConfig, modes: Option<usize>) -> Result<Output> {
    let p = cfg.circuit()?;
    let line = foster::line_from_lc(p.c_r, p.l_r, cfg.topology()?)?;
    let ladder = foster::decompose(&line, modes.or(cfg.n_modes).unwrap_or(3))?;
    let mut csv = String::from("harmonic,f_hz,z_ohm,c_f,l_h\n");
    for m in &ladder.modes {
        writeln!(csv, "{},{},{},{},{}", m.harmonic, e(m.f), e(m.z), e(m.c), e(m.l)).ok();
    }
    let threshold = cfg.series_threshold.unwrap_or(foster::DEFAULT_SERIES_THRESHOLD);
    let mut summary = format!(
        "line: Z_0={:.2} ohm, f_1={:.4} GHz, {}\n",
        line.z_0,
        line.f_1 / GHZ,
        line.topology
    );
    match ladder.series_c {
        Some(s) => writeln!(
            summary,
            "series capacitance {:.2} fF ({} next to C_c={:.2} fF at threshold {threshold})",
            s / FF,
            if ladder.series_negligible(p.c_c, threshold) { "negligible" } else { "kept" },
            p.c_c / FF
        )
        .ok(),
        None => writeln!(summary, "no series capacitance").ok(),
    };
    Ok(Output {
        csv,
        summary,
        exit_code: 0,
    })
}

fn cmd_spectrum(cfg: &RunConfig, tier: Option<&str>, modes: Option<usize>) -> Result<Output> {
    let model = cfg.model(tier, modes)?;
    let s = hamiltonian::diagonalize(&model)?;
    let mut csv = String::from("index,frequency_hz,label,weight\n");
    for (i, (f, (l, w))) in s.eigenfrequencies.iter().zip(s.labels.iter().zip(&s.label_weights)).enumerate() {
        writeln!(csv, "{i},{},\"{l}\",{}", e(*f), e(*w)).ok();
    }
    let bp = spectroscopy::branch_point(&s);
    let mut summary = format!(
        "tier {} at flux {}: dimension {}, E_c={:.2} MHz, E_J={:.4} GHz\n",
        model.tier,
        model.flux(),
        s.basis.dimension(),
        s.model.e_c / MHZ,
        s.model.e_j / GHZ
    );
    for b in Branch::ALL {
        writeln!(summary, "{b:>6}: {:.6} GHz", bp.get(b) / GHZ).ok();
    }
    if !s.model.cpb_converged {
        summary.push_str("warning: charge basis not converged; raise n_cut\n");
    }
    Ok(Output {
        csv,
        summary,
        exit_code: 0,
    })
}

struct SweepArgs<'a> {
    flux: &'a str,
    tier: Option<&'a str>,
    modes: Option<usize>,
    peaks_out: Option<&'a Path>,
    noise_mhz: f64,
    seed: u64,
}

fn cmd_sweep(cfg: &RunConfig, a: &SweepArgs<'_>, head: &str) -> Result<Output> {
    let model = cfg.model(a.tier, a.modes)?;
    let axis = parse_flux_range(a.flux)?;
    let spec = spectroscopy::flux_sweep(&model, &axis)?;
    let mut csv = String::from("flux,branch,frequency_hz\n");
    for i in 0..axis.len() {
        for (b, v) in &spec.branches {
            writeln!(csv, "{},{b},{}", e(axis.flux(i)), e(v[i])).ok();
        }
    }
    let mut summary = String::new();
    match spectroscopy::avoided_crossing(&spec) {
        Ok(x) => writeln!(
            summary,
            "avoided crossing: center {:.4} GHz, splitting {:.1} MHz, flux {:.5}",
            x.center / GHZ,
            x.splitting / MHZ,
            x.flux
        )
        .ok(),
        Err(err) => writeln!(summary, "avoided crossing: {err}").ok(),
    };
    for (i, msg) in &spec.failures {
        writeln!(summary, "point {i} failed: {msg}").ok();
    }
    if let Some(path) = a.peaks_out {
        if !(a.noise_mhz >= 0.0) {
            return Err(Error::domain(MODULE, "noise_mhz", "must be >= 0"));
        }
        let h = hamiltonian::effective_hamiltonian_params(&model)?;
        let truth = FitParams::from_hamiltonian(&h, FluxMapping::IDENTITY);
        // Peaks come from the single-mode model that `fit` uses.
        let mut single = ModelConfig::new(Tier::ExactSingle, ParamSource::Hamiltonian(h));
        single.k_levels = model.k_levels;
        single.n_cut = model.n_cut;
        single.rwa = model.rwa;
        let peaks = fitting::synthesize_peaks(
            &truth,
            &single,
            &axis.values,
            &[Branch::Lower, Branch::Upper],
            a.noise_mhz * MHZ,
            a.seed,
        )?;
        let mut body = Vec::new();
        peaks.write_csv(&mut body)?;
        let text = format!("{head}{}", String::from_utf8(body).expect("utf-8 csv"));
        write_atomic(path, &text)?;
        writeln!(summary, "wrote {} synthetic peaks to {}", peaks.points.len(), path.display()).ok();
    }
    Ok(Output {
        csv,
        summary,
        exit_code: 0,
    })
}

fn fit_param_key(p: Param) -> (&'static str, f64) {
    match p {
        Param::EC => ("e_c_MHz", MHZ),
        Param::EJMax => ("e_j_max_GHz", GHZ),
        Param::FR => ("f_r_GHz", GHZ),
        Param::G => ("g_MHz", MHZ),
        Param::FluxOffset => ("flux_offset", 1.0),
        Param::FluxPeriod => ("flux_period", 1.0),
    }
}

fn cmd_fit(cfg: &RunConfig, peaks: &Path, seed: u64) -> Result<Output> {
    let data = PeakData::read_csv(read_input(peaks)?.as_bytes())?;
    let initial = FitParams::from_hamiltonian(&cfg.hamiltonian()?, cfg.mapping());
    let mut fc = FitConfig::new(initial);
    fc.seed = seed;
    let section = cfg.fit.clone().unwrap_or_default();
    if let Some(names) = &section.free_params {
        fc.free_params = names.iter().map(|n| n.parse()).collect::<Result<_>>()?;
    }
    if let Some(t) = section.tolerance {
        fc.tolerance = t;
    }
    if let Some(m) = section.max_evaluations {
        fc.max_evaluations = m;
    }
    if let Some(r) = section.restarts {
        fc.restarts = r;
    }
    for (key, [lo, hi]) in section.bounds.unwrap_or_default() {
        let p = Param::ALL
            .into_iter()
            .find(|&p| fit_param_key(p).0 == key)
            .ok_or_else(|| Error::domain(MODULE, "fit.bounds", format!("unknown key {key:?}")))?;
        let scale = fit_param_key(p).1;
        fc.bounds.insert(p, (lo * scale, hi * scale));
    }
    if let (Some(c_j), Some(c_c)) = (cfg.c_j_ff, cfg.c_c_ff) {
        fc.capacitances = Some((c_j * FF, c_c * FF));
    }
    fc.f_a_at_resonance = cfg.f_a_ghz.map(|f| f * GHZ);

    let model = cfg.model(Some("exact_single"), None)?;
    let model = ModelConfig {
        source: ParamSource::Hamiltonian(initial.hamiltonian()),
        ..model
    };
    let r = fitting::fit(&data, &fc, &model)?;

    let mut csv = String::from("parameter,value,unit\n");
    for p in Param::ALL {
        let unit = if matches!(p, Param::FluxOffset | Param::FluxPeriod) { "sweep" } else { "Hz" };
        writeln!(csv, "{},{},{unit}", p.name(), e(r.params.get(p))).ok();
    }
    if let Some(c) = &r.derived_circuit {
        for (n, v, u) in [("c_r", c.c_r, "F"), ("l_r", c.l_r, "H"), ("z_r", c.z_r, "ohm"), ("z_0", c.z_0, "ohm")] {
            writeln!(csv, "{n},{},{u}", e(v)).ok();
        }
    }
    writeln!(csv, "residual_rms,{},Hz", e(r.residual_rms)).ok();

    let mut summary = format!(
        "fit {} after {} evaluations; residual rms {:.3} MHz over {} points\n",
        if r.report.converged { "converged" } else { "did NOT converge" },
        r.report.evaluations,
        r.residual_rms / MHZ,
        data.points.len()
    );
    for &p in &fc.free_params {
        let (key, scale) = fit_param_key(p);
        writeln!(summary, "{key:>12} = {:.6}", r.params.get(p) / scale).ok();
    }
    if let Some(c) = &r.derived_circuit {
        writeln!(
            summary,
            "circuit: C_r={:.2} fF, L_r={:.3} nH, Z_r={:.1} ohm, Z_0={:.1} ohm",
            c.c_r / FF,
            c.l_r / NH,
            c.z_r,
            c.z_0
        )
        .ok();
    }
    for w in &r.report.warnings {
        writeln!(summary, "warning: {w}").ok();
    }
    Ok(Output {
        csv,
        summary,
        exit_code: if r.report.converged { 0 } else { Error::NotConverged { evaluations: 0 }.exit_code() },
    })
}

fn design_row(rank: usize, r: &DesignReport) -> String {
    format!(
        "{rank},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        e(r.point.c_j),
        e(r.point.c_c),
        e(r.point.c_r),
        e(r.point.target_f),
        r.point.topology,
        e(r.g_bar),
        e(r.g),
        e(r.required_impedance),
        r.regime,
        e(r.bound_margin),
        e(r.e_j_over_e_c),
        r.outside_transmon_regime
    )
}

fn cmd_design(cfg: &RunConfig) -> Result<Output> {
    let section = cfg.design.clone().unwrap_or_default();
    let target_f = section
        .target_f_ghz
        .or(cfg.f_r_ghz)
        .ok_or_else(|| missing("design.target_f_GHz"))?
        * GHZ;
    let topology: DesignTopology = match section.topology.as_deref().or(cfg.topology.as_deref()) {
        Some(t) => t.parse()?,
        None => DesignTopology::Lumped,
    };
    let reports = match &section.scan {
        Some(scan) => {
            let ff = |v: &[f64]| v.iter().map(|x| x * FF).collect::<Vec<_>>();
            design::scan_coupling(&ff(&scan.c_j_ff), &ff(&scan.c_c_ff), &ff(&scan.c_r_ff), target_f, topology)?
        }
        None => vec![design::evaluate(&DesignPoint {
            c_j: cfg.c_j_ff.ok_or_else(|| missing("c_j_fF"))? * FF,
            c_c: cfg.c_c_ff.ok_or_else(|| missing("c_c_fF"))? * FF,
            c_r: cfg.c_r_ff.ok_or_else(|| missing("c_r_fF"))? * FF,
            target_f,
            topology,
        })?],
    };
    let mut csv = String::from(
        "rank,c_j_f,c_c_f,c_r_f,target_f_hz,topology,g_bar,g_hz,required_impedance_ohm,regime,bound_margin,e_j_over_e_c,outside_transmon_regime\n",
    );
    let mut summary = String::new();
    for (i, r) in reports.iter().enumerate() {
        csv.push_str(&design_row(i + 1, r));
    }
    for r in reports.iter().take(10) {
        writeln!(
            summary,
            "C_J={:.1} fF C_c={:.1} fF C_r={:.1} fF: g_bar={:.4} ({}), g={:.1} MHz, {} impedance {:.0} ohm, bound margin {:.3}{}",
            r.point.c_j / FF,
            r.point.c_c / FF,
            r.point.c_r / FF,
            r.g_bar,
            r.regime,
            r.g / MHZ,
            r.point.topology,
            r.required_impedance,
            r.bound_margin,
            if r.outside_transmon_regime { " [outside Transmon regime]" } else { "" }
        )
        .ok();
        for c in &r.comparisons {
            writeln!(
                summary,
                "    {}: computed {:.4} vs quoted {} ({:+.1}%)",
                c.quantity,
                c.computed,
                c.quoted,
                100.0 * c.relative_difference
            )
            .ok();
        }
    }
    Ok(Output {
        csv,
        summary,
        exit_code: 0,
    })
}

fn execute(cli: &Cli, command_line: &str) -> Result<i32> {
    let common = cli.command.common();
    let (cfg, canonical) = load_config(common.config.as_deref(), &common.overrides)?;
    let head = header(command_line, &canonical);
    let out = match &cli.command {
        Command::Params { .. } => cmd_params(&cfg)?,
        Command::Foster { modes, .. } => cmd_foster(&cfg, *modes)?,
        Command::Spectrum { tier, modes, .. } => cmd_spectrum(&cfg, tier.as_deref(), *modes)?,
        Command::Sweep {
            flux,
            tier,
            modes,
            peaks_out,
            noise_mhz,
            seed,
            ..
        } => cmd_sweep(
            &cfg,
            &SweepArgs {
                flux,
                tier: tier.as_deref(),
                modes: *modes,
                peaks_out: peaks_out.as_deref(),
                noise_mhz: *noise_mhz,
                seed: *seed,
            },
            &head,
        )?,
        Command::Fit { peaks, seed, .. } => cmd_fit(&cfg, peaks, *seed)?,
        Command::Design { .. } => cmd_design(&cfg)?,
    };
    let text = format!("{head}{}", out.csv);
    match &common.out {
        Some(path) => {
            write_atomic(path, &text)?;
            print!("{}", out.summary);
        }
        None => {
            print!("{text}");
            eprint!("{}", out.summary);
        }
    }
    Ok(out.exit_code)
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            err.print().ok();
            return code;
        }
    };
    let command_line = std::iter::once(cli.command.name().to_string())
        .chain(argv.iter().skip(2).map(|a| a.to_string_lossy().into_owned()))
        .collect::<Vec<_>>()
        .join(" ");
    match execute(&cli, &command_line) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
