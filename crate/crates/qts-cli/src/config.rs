//! Declarative run configuration: strict TOML in, a fully resolved and
//! validated execution plan out. Unknown keys, mixed unit modes, and range
//! violations are all rejected up front; the resolved plan (defaults
//! included) is echoed into every output header so a result file is
//! self-describing.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use qts::{BathParams, ModelSpec};

use crate::error::{CliError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Built-in parameter sets; `preset(name)` returns the TOML text, which goes
/// through the ordinary parse-and-validate path.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "fig3" => Some(PRESET_FIG3),
        "fig4" => Some(PRESET_FIG4),
        "smoke" => Some(PRESET_SMOKE),
        _ => None,
    }
}

const PRESET_FIG3: &str = r#"
[model]
n = 7
j = 2.0
delta = 2.0

[probe]
j_p = 2.0
delta_p = 0.01

[bath]
w_mk = 10.0
t_mk = 12.0

[experiment]
k = 4
seed = 1

[output]
normalize = true
"#;

const PRESET_FIG4: &str = r#"
[model]
n = 16
j = 2.0
delta = 2.0

[probe]
j_p = 2.0
delta_p = 0.01

[bath]
w_mk = 10.0
t_mk = 12.0

[experiment]
k = 10
seed = 1

[output]
normalize = true
"#;

const PRESET_SMOKE: &str = r#"
# Single qubit, tunneling well below the linewidth: each kink position
# shows one merged resonance and the two columns have equal height.
[model]
n = 1
biases = [0.0]
tunnelings = [0.01]
couplings = []

[probe]
j_p = 2.0
delta_p = 0.01

[bath]
w_mk = 10.0
t_mk = 12.0

[experiment]
k = 2
seed = 1
"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Sweep,
    Evolve,
    Validate,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Sweep => "sweep",
            Command::Evolve => "evolve",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
#[clap(rename_all = "lowercase")]
pub enum OutFormat {
    Table,
    Tree,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub probe: ProbeSection,
    pub bath: BathSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n: usize,
    pub j: Option<f64>,
    pub delta: Option<f64>,
    pub biases: Option<Vec<f64>>,
    pub tunnelings: Option<Vec<f64>>,
    pub couplings: Option<Vec<(usize, usize, f64)>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub j_p: f64,
    #[serde(default = "default_delta_p")]
    pub delta_p: f64,
    pub grid: Option<GridSection>,
}

fn default_delta_p() -> f64 {
    0.01
}

/// Bias grid on the column-aligned relative axis, GHz.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub w_mk: Option<f64>,
    pub t_mk: Option<f64>,
    pub w_ghz: Option<f64>,
    pub epsilon_p_ghz: Option<f64>,
    pub t_ghz: Option<f64>,
    pub eta: Option<f64>,
    pub omega_c_ghz: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Informational; when present it must match the invoked subcommand.
    pub command: Option<String>,
    pub l: Option<Vec<usize>>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    /// Fixed raw probe bias for evolve; omitted = ground-state resonance.
    pub epsilon_ghz: Option<f64>,
    pub t_max_ns: Option<f64>,
    pub time_steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    pub format: Option<String>,
    #[serde(default)]
    pub normalize: bool,
}

/// Command-line overrides; these win over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutFormat>,
}

/// Everything a command needs, validated, with the resolved header line
/// prebuilt.
pub struct Plan {
    pub command: Command,
    pub model: ModelSpec,
    /// (J, Δ) when the model came from the kink-chain shorthand; enables the
    /// kink-basis oracle comparison in sweep output.
    pub chain: Option<(f64, f64)>,
    pub bath: BathParams,
    pub j_p: f64,
    pub delta_p: f64,
    pub grid: Option<Vec<f64>>,
    pub l_list: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    pub epsilon_ghz: Option<f64>,
    pub t_max_ns: Option<f64>,
    pub time_steps: usize,
    pub out_dir: PathBuf,
    pub format: OutFormat,
    pub normalize: bool,
    /// One-line JSON with every resolved setting; echoed into file headers.
    pub resolved: String,
}

#[derive(Serialize)]
struct Resolved<'a> {
    version: &'a str,
    command: &'a str,
    model: ResolvedModel<'a>,
    probe: ResolvedProbe,
    bath: ResolvedBath,
    experiment: ResolvedExperiment<'a>,
    output: ResolvedOutput<'a>,
}

#[derive(Serialize)]
struct ResolvedModel<'a> {
    n: usize,
    form: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    j: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    biases: &'a [f64],
    tunnelings: &'a [f64],
    couplings: &'a [(usize, usize, f64)],
}

#[derive(Serialize)]
struct ResolvedProbe {
    j_p: f64,
    delta_p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridSection>,
}

#[derive(Serialize)]
struct ResolvedBath {
    mode: &'static str,
    w_ghz: f64,
    epsilon_p_ghz: f64,
    t_ghz: f64,
    eta: f64,
    omega_c_ghz: f64,
}

#[derive(Serialize)]
struct ResolvedExperiment<'a> {
    l: &'a [usize],
    k: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_max_ns: Option<f64>,
    time_steps: usize,
}

#[derive(Serialize)]
struct ResolvedOutput<'a> {
    dir: &'a str,
    format: OutFormat,
    normalize: bool,
}

pub fn parse(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| CliError::Validation(format!("config parse: {e}")))
}

impl RunConfig {
    pub fn plan(&self, command: Command, ov: &Overrides) -> Result<Plan> {
        let mut bad: Vec<String> = Vec::new();

        let (model, chain) = self.build_model(&mut bad);
        let bath = self.build_bath(&mut bad);

        if !(self.probe.j_p > 0.0) || !self.probe.j_p.is_finite() {
            bad.push(format!("probe.j_p must be positive, got {}", self.probe.j_p));
        }
        if !(self.probe.delta_p >= 0.0) || !self.probe.delta_p.is_finite() {
            bad.push(format!(
                "probe.delta_p must be nonnegative, got {}",
                self.probe.delta_p
            ));
        }

        let grid = self.build_grid(command, bath.as_ref(), &mut bad);

        let exp = &self.experiment;
        if let Some(cmd) = &exp.command {
            if !matches!(cmd.as_str(), "spectrum" | "sweep" | "evolve") {
                bad.push(format!("experiment.command '{cmd}' is not a run command"));
            } else if command != Command::Validate && cmd != command.as_str() {
                bad.push(format!(
                    "experiment.command '{cmd}' does not match the invoked '{}'",
                    command.as_str()
                ));
            }
        }
        let n = self.model.n;
        let l_list: Vec<usize> = match &exp.l {
            Some(list) => {
                for &l in list {
                    if l < 1 || l > n + 1 {
                        bad.push(format!("experiment.l entry {l} outside 1..={}", n + 1));
                    }
                }
                list.clone()
            }
            None => match command {
                Command::Evolve => vec![1],
                _ => (1..=n + 1).collect(),
            },
        };
        if command == Command::Evolve && l_list.len() != 1 {
            bad.push(format!(
                "evolve needs exactly one kink position, got {} entries",
                l_list.len()
            ));
        }
        let k = exp.k.unwrap_or(4);
        if k < 1 {
            bad.push("experiment.k must be at least 1".into());
        }
        let seed = ov.seed.or(exp.seed).unwrap_or(1);
        if let Some(t) = exp.t_max_ns {
            if !(t > 0.0) || !t.is_finite() {
                bad.push(format!("experiment.t_max_ns must be positive, got {t}"));
            }
        }
        let time_steps = exp.time_steps.unwrap_or(200);
        if time_steps < 2 {
            bad.push(format!(
                "experiment.time_steps must be at least 2, got {time_steps}"
            ));
        }
        if exp.epsilon_ghz.is_some() && !matches!(command, Command::Evolve | Command::Validate) {
            bad.push("experiment.epsilon_ghz only applies to evolve".into());
        }

        let format = match ov.format {
            Some(f) => f,
            None => match self.output.format.as_deref() {
                None | Some("table") => OutFormat::Table,
                Some("tree") => OutFormat::Tree,
                Some(other) => {
                    bad.push(format!(
                        "output.format '{other}' is not one of table, tree"
                    ));
                    OutFormat::Table
                }
            },
        };
        let out_dir = ov
            .out
            .clone()
            .or_else(|| self.output.dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));

        if !bad.is_empty() {
            return Err(CliError::Validation(bad.join("; ")));
        }
        let model = model.expect("validated");
        let bath = bath.expect("validated");

        let grid_echo = self.probe.grid;
        let dir_echo = out_dir.to_string_lossy().into_owned();
        let resolved = Resolved {
            version: VERSION,
            command: command.as_str(),
            model: ResolvedModel {
                n,
                form: if chain.is_some() { "chain" } else { "explicit" },
                j: chain.map(|c| c.0),
                delta: chain.map(|c| c.1),
                biases: model.biases(),
                tunnelings: model.tunneling(),
                couplings: model.couplings(),
            },
            probe: ResolvedProbe {
                j_p: self.probe.j_p,
                delta_p: self.probe.delta_p,
                grid: grid_echo,
            },
            bath: ResolvedBath {
                mode: if bath.is_fdt_mode() { "fdt-mk" } else { "explicit-ghz" },
                w_ghz: bath.w(),
                epsilon_p_ghz: bath.epsilon_p(),
                t_ghz: bath.temperature(),
                eta: bath.eta(),
                omega_c_ghz: bath.omega_c(),
            },
            experiment: ResolvedExperiment {
                l: &l_list,
                k,
                seed,
                epsilon_ghz: exp.epsilon_ghz,
                t_max_ns: exp.t_max_ns,
                time_steps,
            },
            output: ResolvedOutput {
                dir: &dir_echo,
                format,
                normalize: self.output.normalize,
            },
        };
        let resolved =
            serde_json::to_string(&resolved).expect("resolved config always serializes");

        Ok(Plan {
            command,
            model,
            chain,
            bath,
            j_p: self.probe.j_p,
            delta_p: self.probe.delta_p,
            grid,
            l_list,
            k,
            seed,
            epsilon_ghz: exp.epsilon_ghz,
            t_max_ns: exp.t_max_ns,
            time_steps,
            out_dir,
            format,
            normalize: self.output.normalize,
            resolved,
        })
    }

    fn build_model(&self, bad: &mut Vec<String>) -> (Option<ModelSpec>, Option<(f64, f64)>) {
        let m = &self.model;
        let chain_form = m.j.is_some() || m.delta.is_some();
        let explicit_form =
            m.biases.is_some() || m.tunnelings.is_some() || m.couplings.is_some();
        if chain_form && explicit_form {
            bad.push("model mixes the chain shorthand (j, delta) with explicit fields".into());
            return (None, None);
        }
        if chain_form {
            let (Some(j), Some(delta)) = (m.j, m.delta) else {
                bad.push("model chain shorthand needs both j and delta".into());
                return (None, None);
            };
            return match ModelSpec::kink_chain(m.n, j, delta) {
                Ok(spec) => (Some(spec), Some((j, delta))),
                Err(e) => {
                    bad.push(format!("model: {e}"));
                    (None, None)
                }
            };
        }
        let (Some(biases), Some(tunnelings)) = (&m.biases, &m.tunnelings) else {
            bad.push("model needs either (j, delta) or (biases, tunnelings)".into());
            return (None, None);
        };
        let couplings = m.couplings.clone().unwrap_or_default();
        match ModelSpec::new(m.n, biases.clone(), tunnelings.clone(), couplings) {
            Ok(spec) => (Some(spec), None),
            Err(e) => {
                bad.push(format!("model: {e}"));
                (None, None)
            }
        }
    }

    fn build_bath(&self, bad: &mut Vec<String>) -> Option<BathParams> {
        let b = &self.bath;
        let mk = b.w_mk.is_some() || b.t_mk.is_some();
        let ghz = b.w_ghz.is_some() || b.epsilon_p_ghz.is_some() || b.t_ghz.is_some();
        if mk && ghz {
            bad.push(
                "bath mixes millikelvin FDT mode (w_mk, t_mk) with explicit GHz mode \
                 (w_ghz, epsilon_p_ghz, t_ghz)"
                    .into(),
            );
            return None;
        }
        let base = if mk {
            let (Some(w), Some(t)) = (b.w_mk, b.t_mk) else {
                bad.push("bath FDT mode needs both w_mk and t_mk".into());
                return None;
            };
            BathParams::fdt_from_mk(w, t)
        } else {
            let (Some(w), Some(ep), Some(t)) = (b.w_ghz, b.epsilon_p_ghz, b.t_ghz) else {
                bad.push(
                    "bath explicit mode needs w_ghz, epsilon_p_ghz and t_ghz (or use w_mk, t_mk)"
                        .into(),
                );
                return None;
            };
            BathParams::explicit(w, ep, t)
        };
        let base = match base {
            Ok(b) => b,
            Err(e) => {
                bad.push(format!("bath: {e}"));
                return None;
            }
        };
        let eta = b.eta.unwrap_or(0.0);
        if eta == 0.0 && b.omega_c_ghz.is_none() {
            return Some(base);
        }
        let omega_c = b.omega_c_ghz.unwrap_or(base.omega_c());
        match base.with_ohmic(eta, omega_c) {
            Ok(full) => Some(full),
            Err(e) => {
                bad.push(format!("bath: {e}"));
                None
            }
        }
    }

    fn build_grid(
        &self,
        command: Command,
        bath: Option<&BathParams>,
        bad: &mut Vec<String>,
    ) -> Option<Vec<f64>> {
        let g = self.probe.grid?;
        if !(g.step > 0.0) || !g.step.is_finite() {
            bad.push(format!("probe.grid.step must be positive, got {}", g.step));
            return None;
        }
        if !(g.stop > g.start) {
            bad.push(format!(
                "probe.grid.stop {} must exceed start {}",
                g.stop, g.start
            ));
            return None;
        }
        if matches!(command, Command::Sweep | Command::Validate) {
            if let Some(bath) = bath {
                let max = bath.w() / 4.0;
                if g.step > max * (1.0 + 1e-12) {
                    bad.push(format!(
                        "probe.grid.step {} GHz exceeds W/4 = {max} GHz needed for peak \
                         extraction",
                        g.step
                    ));
                    return None;
                }
            }
        }
        // small forward nudge so stop = start + m·step lands on m+1 points
        let count = ((g.stop - g.start) / g.step + 1e-9).floor() as usize + 1;
        if count < 2 {
            bad.push("probe.grid must contain at least two points".into());
            return None;
        }
        Some((0..count).map(|i| g.start + g.step * i as f64).collect())
    }
}
