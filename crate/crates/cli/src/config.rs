use clap::{Args, ValueEnum};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    None,
    Select,
    Project,
    Both,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Mode as ValueEnum>::from_str(s, true)
    }
}

/// Options shared by every subcommand. Anything left unset falls back to the
/// config file, then to the command's default.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Plain-text file of `key = value` lines mirroring these flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Kernel family: mq, imq, iq, ga or phsN.
    #[arg(long, global = true)]
    pub kernel: Option<String>,
    /// Shape parameter times the node spacing.
    #[arg(long = "eps-s", global = true)]
    pub eps_s: Option<f64>,
    /// Polynomial degree; ref-sweep defaults to no polynomial tail.
    #[arg(long, global = true)]
    pub poly: Option<usize>,
    /// Interior nodes per stencil (default 15/20/30 for P <= 2, 3, >= 4).
    #[arg(long, global = true)]
    pub mi: Option<usize>,
    /// Boundary-node selection threshold.
    #[arg(long, global = true)]
    pub dmin: Option<f64>,
    /// Node spacing; domain commands otherwise derive it from --n-interior.
    #[arg(long, global = true)]
    pub spacing: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Target number of interior nodes on the test domain.
    #[arg(long = "n-interior", global = true)]
    pub n_interior: Option<usize>,
    /// Number of alpha samples in ref-sweep.
    #[arg(long = "n-alpha", global = true)]
    pub n_alpha: Option<usize>,
    /// Lattice resolution for Lebesgue constants in ref-sweep (0 skips them).
    #[arg(long = "lebesgue-res", global = true)]
    pub lebesgue_res: Option<usize>,
    /// HHD iterations per run.
    #[arg(long, global = true)]
    pub iters: Option<usize>,
    /// vmap arrangement: hex3, hex5, hex12 or hex15.
    #[arg(long, global = true)]
    pub arrangement: Option<String>,
    /// vmap grid points per side.
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    /// Comma-separated sweep values.
    #[arg(long = "eps-grid", global = true, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
    #[arg(long = "dmin-grid", global = true, value_delimiter = ',')]
    pub dmin_grid: Option<Vec<f64>>,
    #[arg(long = "poly-grid", global = true, value_delimiter = ',')]
    pub poly_grid: Option<Vec<usize>>,
    /// Gradient step of appendixc, in units of s^2.
    #[arg(long, global = true)]
    pub step: Option<f64>,
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
    /// Permit eps s below 0.2. Results there are limited by double-precision
    /// cancellation; no extended precision is used.
    #[arg(long = "allow-small-eps", global = true)]
    pub allow_small_eps: bool,
    /// Replace singular stencils by interior-only ones instead of failing.
    #[arg(long = "skip-singular", global = true)]
    pub skip_singular: bool,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

const KEYS: &[&str] = &[
    "kernel",
    "eps_s",
    "poly",
    "mi",
    "dmin",
    "spacing",
    "mode",
    "out",
    "seed",
    "n_interior",
    "n_alpha",
    "lebesgue_res",
    "iters",
    "arrangement",
    "resolution",
    "eps_grid",
    "dmin_grid",
    "poly_grid",
    "step",
    "max_iter",
    "allow_small_eps",
    "skip_singular",
];

/// Parses `key = value` lines; `#` starts a comment, dashes in keys count as underscores.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| ConfigError(format!("line {}: expected `key = value`", ln + 1)))?;
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError(format!("line {}: unknown key '{}'", ln + 1, k.trim())));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn from_file<T: FromStr>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, ConfigError> {
    file.get(key)
        .map(|v| v.parse::<T>().map_err(|_| ConfigError(format!("config: cannot parse {key} = {v}"))))
        .transpose()
}

fn list_from_file<T: FromStr>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
    file.get(key)
        .map(|v| {
            v.split(',')
                .map(|x| x.trim().parse::<T>().map_err(|_| ConfigError(format!("config: cannot parse {key} = {v}"))))
                .collect()
        })
        .transpose()
}

fn flag_from_file(file: &BTreeMap<String, String>, key: &str) -> Result<bool, ConfigError> {
    Ok(from_file::<bool>(file, key)?.unwrap_or(false))
}

/// Flags merged with the config file; flags win.
pub fn merge(flags: Flags) -> Result<Flags, ConfigError> {
    let file = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => BTreeMap::new(),
    };
    let mode = match (flags.mode, file.get("mode")) {
        (Some(m), _) => Some(m),
        (None, Some(v)) => Some(v.parse::<Mode>().map_err(|_| ConfigError(format!("config: unknown mode '{v}'")))?),
        (None, None) => None,
    };
    let merged = Flags {
        kernel: flags.kernel.or(from_file(&file, "kernel")?),
        eps_s: flags.eps_s.or(from_file(&file, "eps_s")?),
        poly: flags.poly.or(from_file(&file, "poly")?),
        mi: flags.mi.or(from_file(&file, "mi")?),
        dmin: flags.dmin.or(from_file(&file, "dmin")?),
        spacing: flags.spacing.or(from_file(&file, "spacing")?),
        mode,
        out: flags.out.or(from_file(&file, "out")?),
        seed: flags.seed.or(from_file(&file, "seed")?),
        n_interior: flags.n_interior.or(from_file(&file, "n_interior")?),
        n_alpha: flags.n_alpha.or(from_file(&file, "n_alpha")?),
        lebesgue_res: flags.lebesgue_res.or(from_file(&file, "lebesgue_res")?),
        iters: flags.iters.or(from_file(&file, "iters")?),
        arrangement: flags.arrangement.or(from_file(&file, "arrangement")?),
        resolution: flags.resolution.or(from_file(&file, "resolution")?),
        eps_grid: flags.eps_grid.or(list_from_file(&file, "eps_grid")?),
        dmin_grid: flags.dmin_grid.or(list_from_file(&file, "dmin_grid")?),
        poly_grid: flags.poly_grid.or(list_from_file(&file, "poly_grid")?),
        step: flags.step.or(from_file(&file, "step")?),
        max_iter: flags.max_iter.or(from_file(&file, "max_iter")?),
        allow_small_eps: flags.allow_small_eps || flag_from_file(&file, "allow_small_eps")?,
        skip_singular: flags.skip_singular || flag_from_file(&file, "skip_singular")?,
        config: flags.config,
    };
    merged.validate()?;
    Ok(merged)
}

impl Flags {
    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError(m));
        if let Some(k) = &self.kernel {
            if let Err(e) = neumann_rbf::KernelSpec::from_name(k, 1.0, 1.0) {
                return bad(format!("kernel: {e}"));
            }
        }
        let mut eps: Vec<f64> = self.eps_grid.clone().unwrap_or_default();
        eps.extend(self.eps_s);
        for e in eps {
            if !(e.is_finite() && e > 0.0) {
                return bad(format!("eps s must be positive, got {e}"));
            }
            if e < 0.2 && !self.allow_small_eps {
                return bad(format!(
                    "eps s = {e} is below 0.2; pass --allow-small-eps to run it (double precision only, \
                     expect cancellation errors)"
                ));
            }
        }
        let mut dmins: Vec<f64> = self.dmin_grid.clone().unwrap_or_default();
        dmins.extend(self.dmin);
        for d in dmins {
            if let Err(e) = neumann_rbf::SelectionConfig::new(d) {
                return bad(format!("dmin: {e}"));
            }
        }
        if let Some(s) = self.spacing {
            if !(s.is_finite() && s > 0.0) {
                return bad(format!("spacing must be positive, got {s}"));
            }
        }
        if let Some(s) = self.step {
            if !(s.is_finite() && s > 0.0) {
                return bad(format!("step must be positive, got {s}"));
            }
        }
        if let Some(a) = &self.arrangement {
            if neumann_rbf::experiments::Arrangement::parse(a).is_err() {
                return bad(format!("unknown arrangement '{a}'"));
            }
        }
        if self.mi == Some(0) || self.n_interior == Some(0) || self.resolution.is_some_and(|r| r < 3) {
            return bad("mi and n-interior must be positive, resolution at least 3".into());
        }
        Ok(())
    }
}
