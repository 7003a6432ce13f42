//! Run configuration: a TOML document with `[model]`, `[run]` and `[krylov]`
//! sections.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use floquet_core::{KrylovSettings, LadderConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Evolve,
    SymmetryCheck,
    VanvleckVerify,
    Sweep,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Evolve => "evolve",
            Mode::SymmetryCheck => "symmetry-check",
            Mode::VanvleckVerify => "vanvleck-verify",
            Mode::Sweep => "sweep",
        })
    }
}

/// Initial state, written as `neel`, `random-product(SEED)`,
/// `d0-eigenstate(INDEX)` or `basis(BITS)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitialState {
    Neel,
    RandomProduct(u64),
    D0Eigenstate(usize),
    Basis(String),
}

impl InitialState {
    pub fn seed(&self) -> Option<u64> {
        match self {
            InitialState::RandomProduct(seed) => Some(*seed),
            _ => None,
        }
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialState::Neel => write!(f, "neel"),
            InitialState::RandomProduct(seed) => write!(f, "random-product({seed})"),
            InitialState::D0Eigenstate(index) => write!(f, "d0-eigenstate({index})"),
            InitialState::Basis(bits) => write!(f, "basis({bits})"),
        }
    }
}

impl FromStr for InitialState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "neel" {
            return Ok(InitialState::Neel);
        }
        let (name, arg) = s
            .strip_suffix(')')
            .and_then(|body| body.split_once('('))
            .ok_or_else(|| format!("unrecognized initial state {s:?}"))?;
        let arg = arg.trim();
        match name.trim() {
            "random-product" => arg
                .parse()
                .map(InitialState::RandomProduct)
                .map_err(|_| format!("random-product seed must be a non-negative integer, got {arg:?}")),
            "d0-eigenstate" => arg
                .parse()
                .map(InitialState::D0Eigenstate)
                .map_err(|_| format!("d0-eigenstate index must be a non-negative integer, got {arg:?}")),
            "basis" if !arg.is_empty() && arg.chars().all(|c| c == '0' || c == '1') => {
                Ok(InitialState::Basis(arg.to_string()))
            }
            "basis" => Err(format!("basis bit string may only contain 0 and 1, got {arg:?}")),
            other => Err(format!("unrecognized initial state {other:?}")),
        }
    }
}

impl TryFrom<String> for InitialState {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<InitialState> for String {
    fn from(s: InitialState) -> String {
        s.to_string()
    }
}

/// Series on which the prethermal plateau is detected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlateauSeries {
    Entropy,
    EnergyDensity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauSettings {
    pub series: PlateauSeries,
    /// Window length in periods.
    pub window: usize,
    /// Largest |slope| per period accepted as flat.
    pub slope_tol: f64,
}

impl Default for PlateauSettings {
    fn default() -> Self {
        PlateauSettings {
            series: PlateauSeries::Entropy,
            window: 600,
            slope_tol: 2e-5,
        }
    }
}

/// A fully validated experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub mode: Mode,
    pub config: LadderConfig,
    pub n_periods: usize,
    pub initial_state: InitialState,
    pub output_path: PathBuf,
    /// Sampling offsets as fractions of the period.
    pub sample_offsets: Vec<f64>,
    /// Highest van Vleck order for `vanvleck-verify`.
    pub order: usize,
    /// `(lambda_a, lambda_b)` points for `sweep`.
    pub lambda_grid: Vec<(f64, f64)>,
    pub plateau: PlateauSettings,
    /// Entanglement entropy is evaluated every this many periods.
    pub entropy_stride: usize,
    pub memory_budget_mb: f64,
    pub krylov: KrylovSettings,
}

/// Quantities derived from the model section, echoed into reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub period: f64,
    pub j_prime: f64,
    pub j1: f64,
    pub n_spins: usize,
    pub omega_tilde: f64,
    pub j_over_omega: f64,
}

impl RunSpec {
    pub fn derived(&self) -> Derived {
        let c = &self.config;
        Derived {
            period: c.period(),
            j_prime: c.j_prime(),
            j1: c.j1(),
            n_spins: c.n_spins(),
            omega_tilde: c.omega / (2.0 * c.j_prime()),
            j_over_omega: c.j / c.omega,
        }
    }

    /// Bytes needed by one trajectory: the state plus the Krylov basis.
    pub fn memory_estimate_mb(&self) -> f64 {
        let amps = (1u64 << self.config.n_spins()) as f64;
        amps * 16.0 * (self.krylov.max_subspace as f64 + 4.0) / (1024.0 * 1024.0)
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct ModelSection {
    #[serde(rename = "L")]
    l: Option<usize>,
    omega: Option<f64>,
    j_over_omega: Option<f64>,
    tau: Option<f64>,
    j: Option<f64>,
    g_x: Option<f64>,
    g_y: Option<f64>,
    g_z: Option<f64>,
    g_zz: Option<f64>,
    lambda_a: Option<f64>,
    lambda_b: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct RunSection {
    mode: Option<Mode>,
    n_periods: Option<usize>,
    initial_state: Option<InitialState>,
    output: Option<PathBuf>,
    sample_offsets: Option<Vec<f64>>,
    order: Option<usize>,
    lambda_grid: Option<Vec<[f64; 2]>>,
    plateau_series: Option<PlateauSeries>,
    plateau_window: Option<usize>,
    plateau_slope_tol: Option<f64>,
    entropy_stride: Option<usize>,
    memory_budget_mb: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct KrylovSection {
    max_subspace: Option<usize>,
    tolerance: Option<f64>,
    max_substep: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Document {
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    krylov: KrylovSection,
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_MEMORY_BUDGET_MB: f64 = 2048.0;

fn invalid(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

fn check_offsets_for_mode(mode: Mode, offsets: &[f64]) -> Result<(), CliError> {
    if matches!(mode, Mode::Evolve | Mode::Sweep) && !(offsets.contains(&0.0) && offsets.contains(&0.5)) {
        return Err(invalid("run.sample_offsets", "evolve and sweep need the offsets 0 and 0.5"));
    }
    Ok(())
}

impl RunSpec {
    /// Switches the mode, as a subcommand does, and rechecks what depends on it.
    pub fn with_mode(mut self, mode: Mode) -> Result<Self, CliError> {
        check_offsets_for_mode(mode, &self.sample_offsets)?;
        self.mode = mode;
        Ok(self)
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunSpec, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| invalid("", e.to_string()))?;
    let mut unknown = Vec::new();
    let mut record = |path: serde_ignored::Path| unknown.push(path.to_string());
    let ignoring = serde_ignored::Deserializer::new(de, &mut record);
    let doc: Document = serde_path_to_error::deserialize(ignoring).map_err(|e| {
        let path = e.path().to_string();
        invalid(&path, e.into_inner().message().to_string())
    })?;
    if let Some(path) = unknown.first() {
        return Err(invalid(path, "unknown key"));
    }
    build_spec(doc)
}

fn build_spec(doc: Document) -> Result<RunSpec, CliError> {
    let m = doc.model;
    let l = m.l.ok_or_else(|| invalid("model.L", "missing required key"))?;
    let mut config = LadderConfig::reference(l, 1.0);
    config.j = m.j.unwrap_or(config.j);
    config.omega = match (m.omega, m.j_over_omega) {
        (Some(_), Some(_)) => {
            return Err(invalid("model.j_over_omega", "give either omega or j_over_omega, not both"))
        }
        (Some(omega), None) => omega,
        (None, Some(ratio)) if ratio > 0.0 && ratio.is_finite() => config.j / ratio,
        (None, Some(ratio)) => {
            return Err(invalid("model.j_over_omega", format!("must be positive and finite, got {ratio}")))
        }
        (None, None) => return Err(invalid("model.omega", "missing required key (or give j_over_omega)")),
    };
    config.tau = m.tau.unwrap_or(config.tau);
    config.g_x = m.g_x.unwrap_or(config.g_x);
    config.g_y = m.g_y.unwrap_or(config.g_y);
    config.g_z = m.g_z.unwrap_or(config.g_z);
    config.g_zz = m.g_zz.unwrap_or(config.g_zz);
    config.lambda_a = m.lambda_a.unwrap_or(config.lambda_a);
    config.lambda_b = m.lambda_b.unwrap_or(config.lambda_b);
    if let Err(floquet_core::Error::InvalidConfig { field, message }) = config.validate() {
        return Err(invalid(&format!("model.{field}"), message));
    }

    let r = doc.run;
    let mode = r.mode.unwrap_or(Mode::Evolve);
    let n_periods = r.n_periods.unwrap_or(100);
    if n_periods == 0 {
        return Err(invalid("run.n_periods", "must be at least 1"));
    }
    let sample_offsets = r.sample_offsets.unwrap_or_else(|| vec![0.0, 0.5]);
    if sample_offsets.iter().any(|o| !(0.0..1.0).contains(o)) {
        return Err(invalid("run.sample_offsets", "offsets are fractions of the period in [0, 1)"));
    }
    if sample_offsets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("run.sample_offsets", "offsets must be strictly increasing"));
    }
    check_offsets_for_mode(mode, &sample_offsets)?;
    let order = r.order.unwrap_or(2);
    if order > 2 {
        return Err(invalid("run.order", format!("must be 0, 1 or 2, got {order}")));
    }
    let lambda_grid: Vec<(f64, f64)> = r
        .lambda_grid
        .unwrap_or_default()
        .into_iter()
        .map(|[a, b]| (a, b))
        .collect();
    if lambda_grid.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(invalid("run.lambda_grid", "entries must be finite"));
    }
    let defaults = PlateauSettings::default();
    let plateau = PlateauSettings {
        series: r.plateau_series.unwrap_or(defaults.series),
        window: r.plateau_window.unwrap_or(defaults.window),
        slope_tol: r.plateau_slope_tol.unwrap_or(defaults.slope_tol),
    };
    if plateau.window < 2 {
        return Err(invalid("run.plateau_window", "must be at least 2"));
    }
    if !(plateau.slope_tol > 0.0) {
        return Err(invalid("run.plateau_slope_tol", "must be positive"));
    }
    let entropy_stride = r.entropy_stride.unwrap_or(1);
    if entropy_stride == 0 {
        return Err(invalid("run.entropy_stride", "must be at least 1"));
    }
    let memory_budget_mb = r.memory_budget_mb.unwrap_or(DEFAULT_MEMORY_BUDGET_MB);

    let k = doc.krylov;
    let kd = KrylovSettings::default();
    let krylov = KrylovSettings {
        max_subspace: k.max_subspace.unwrap_or(kd.max_subspace),
        tolerance: k.tolerance.unwrap_or(kd.tolerance),
        max_substep: k.max_substep.unwrap_or(kd.max_substep),
    };
    if let Err(e) = krylov.validate() {
        return Err(invalid("krylov", e.to_string()));
    }

    let spec = RunSpec {
        mode,
        config,
        n_periods,
        initial_state: r.initial_state.unwrap_or(InitialState::RandomProduct(DEFAULT_SEED)),
        output_path: r.output.unwrap_or_else(|| PathBuf::from("out")),
        sample_offsets,
        order,
        lambda_grid,
        plateau,
        entropy_stride,
        memory_budget_mb,
        krylov,
    };
    if spec.memory_estimate_mb() > spec.memory_budget_mb {
        return Err(invalid(
            "run.memory_budget_mb",
            format!(
                "L = {} needs about {:.0} MB, above the budget of {:.0} MB",
                l,
                spec.memory_estimate_mb(),
                spec.memory_budget_mb
            ),
        ));
    }
    Ok(spec)
}

/// Parses a grid such as `1,1;0.8,1.2` into `(lambda_a, lambda_b)` pairs.
pub fn parse_lambda_grid(text: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let bad = |m: String| invalid("--lambda-grid", m);
    text.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|pair| {
            let parts: Vec<&str> = pair.split(',').map(str::trim).collect();
            let [a, b] = parts.as_slice() else {
                return Err(bad(format!("expected `a,b`, got `{pair}`")));
            };
            let num = |x: &str| x.parse::<f64>().ok().filter(|v| v.is_finite());
            match (num(a), num(b)) {
                (Some(a), Some(b)) => Ok((a, b)),
                _ => Err(bad(format!("`{pair}` is not a pair of numbers"))),
            }
        })
        .collect()
}

/// Writes `spec` back as a document; every value is explicit.
pub fn emit_config(spec: &RunSpec) -> String {
    let c = &spec.config;
    let doc = Document {
        model: ModelSection {
            l: Some(c.l),
            omega: Some(c.omega),
            j_over_omega: None,
            tau: Some(c.tau),
            j: Some(c.j),
            g_x: Some(c.g_x),
            g_y: Some(c.g_y),
            g_z: Some(c.g_z),
            g_zz: Some(c.g_zz),
            lambda_a: Some(c.lambda_a),
            lambda_b: Some(c.lambda_b),
        },
        run: RunSection {
            mode: Some(spec.mode),
            n_periods: Some(spec.n_periods),
            initial_state: Some(spec.initial_state.clone()),
            output: Some(spec.output_path.clone()),
            sample_offsets: Some(spec.sample_offsets.clone()),
            order: Some(spec.order),
            lambda_grid: Some(spec.lambda_grid.iter().map(|&(a, b)| [a, b]).collect()),
            plateau_series: Some(spec.plateau.series),
            plateau_window: Some(spec.plateau.window),
            plateau_slope_tol: Some(spec.plateau.slope_tol),
            entropy_stride: Some(spec.entropy_stride),
            memory_budget_mb: Some(spec.memory_budget_mb),
        },
        krylov: KrylovSection {
            max_subspace: Some(spec.krylov.max_subspace),
            tolerance: Some(spec.krylov.tolerance),
            max_substep: Some(spec.krylov.max_substep),
        },
    };
    toml::to_string(&doc).expect("config document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
L = 6
omega = 25.132741228718345
tau = 0.25
j = 1.0
g_x = 0.45225
g_y = 0.45225
g_z = 0.7
g_zz = 1.3
"#;

    fn config_error_path(text: &str) -> String {
        match parse_config(text) {
            Err(CliError::Config { path, .. }) => path,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_document() {
        let spec = parse_config(MINIMAL).unwrap();
        let d = spec.derived();
        assert!((d.period - 2.0 * std::f64::consts::PI / spec.config.omega).abs() < 1e-15);
        assert_eq!(d.j_prime, 4.0);
        assert_eq!(d.n_spins, 12);
        assert_eq!(spec.mode, Mode::Evolve);
        assert_eq!(spec.initial_state, InitialState::RandomProduct(DEFAULT_SEED));
        assert_eq!(spec.sample_offsets, vec![0.0, 0.5]);
    }

    #[test]
    fn odd_length_names_l() {
        let err = parse_config(&MINIMAL.replace("L = 6", "L = 5")).unwrap_err();
        let CliError::Config { path, message } = err else { panic!() };
        assert_eq!(path, "model.L");
        assert!(message.contains("even"), "{message}");
    }

    #[test]
    fn unknown_and_mistyped_keys_carry_paths() {
        assert_eq!(config_error_path(&format!("{MINIMAL}colour = 3\n")), "model.colour");
        assert_eq!(config_error_path(&format!("{MINIMAL}[run]\nperiods = 3\n")), "run.periods");
        assert_eq!(config_error_path(&format!("{MINIMAL}[extra]\nx = 1\n")), "extra");
        assert_eq!(config_error_path(&MINIMAL.replace("tau = 0.25", "tau = \"quarter\"")), "model.tau");
        assert_eq!(config_error_path(&format!("{MINIMAL}[run]\nn_periods = -4\n")), "run.n_periods");
        assert_eq!(config_error_path("[model]\nomega = 3.0\n"), "model.L");
    }

    #[test]
    fn frequency_ratio_key() {
        let text = "[model]\nL = 4\nj_over_omega = 0.025\n";
        let spec = parse_config(text).unwrap();
        assert!((spec.config.omega - 40.0).abs() < 1e-12);
        assert_eq!(config_error_path("[model]\nL = 4\nomega = 3.0\nj_over_omega = 0.1\n"), "model.j_over_omega");
    }

    #[test]
    fn round_trip() {
        let text = format!(
            "{MINIMAL}lambda_a = 0.8\nlambda_b = 1.2\n[run]\nmode = \"sweep\"\ninitial_state = \"basis(010011001100)\"\nlambda_grid = [[1.0, 1.0], [0.5, 1.0]]\n[krylov]\ntolerance = 1e-11\n"
        );
        let spec = parse_config(&text).unwrap();
        let again = parse_config(&emit_config(&spec)).unwrap();
        assert_eq!(spec, again);
        assert_eq!(emit_config(&again), emit_config(&spec));
    }

    #[test]
    fn initial_state_syntax() {
        for s in ["neel", "random-product(7)", "d0-eigenstate(3)", "basis(0110)"] {
            assert_eq!(s.parse::<InitialState>().unwrap().to_string(), s);
        }
        for s in ["random-product", "random-product(-1)", "basis(012)", "ground", "basis()"] {
            assert!(s.parse::<InitialState>().is_err(), "{s}");
        }
        assert_eq!(config_error_path(&format!("{MINIMAL}[run]\ninitial_state = \"ground\"\n")), "run.initial_state");
    }

    #[test]
    fn offsets_and_budget() {
        assert_eq!(config_error_path(&format!("{MINIMAL}[run]\nsample_offsets = [0.0, 0.25]\n")), "run.sample_offsets");
        assert_eq!(config_error_path(&format!("{MINIMAL}[run]\nsample_offsets = [0.5, 0.0]\n")), "run.sample_offsets");
        assert_eq!(config_error_path(&format!("{MINIMAL}[run]\nmemory_budget_mb = 1.0\n")), "run.memory_budget_mb");
        let spec = parse_config(&format!("{MINIMAL}[run]\nmode = \"symmetry-check\"\nsample_offsets = [0.25]\n")).unwrap();
        assert_eq!(spec.sample_offsets, vec![0.25]);
    }
}
