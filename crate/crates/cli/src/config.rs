//! Experiment configuration: a TOML file merged with command-line flags.
//! Flags win over file values; the file wins over per-experiment defaults.

use std::path::{Path, PathBuf};

use advrisk::KernelSpec;
use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const OUTPUT_DIR_ENV: &str = "ADVRISK_OUTPUT_DIR";
pub const THREADS_ENV: &str = "ADVRISK_THREADS";

/// Every key the file may set. All subcommands share one key set; keys an
/// experiment does not read are ignored by it.
#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Must match the subcommand when present in a file.
    #[arg(skip)]
    pub experiment: Option<String>,
    /// `synthetic`, or a path (or URL with the `fetch` feature) to the diabetes table.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Noise standard deviation of synthetic responses.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    /// ntk | exponential | matern | spiky
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub lengthscale: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub growth: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub test_points: Option<usize>,
    #[arg(long)]
    pub grid_res: Option<usize>,
    #[arg(long)]
    pub probes: Option<usize>,
    /// Use training inputs inside a ball as extra adversarial probes.
    #[arg(long)]
    pub anchors: Option<bool>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Target smoothness.
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub s_min: Option<f64>,
    #[arg(long)]
    pub s_max: Option<f64>,
    /// Sobolev-ball radius for PT-KRR, or the norm budget for lowerbound.
    #[arg(long)]
    pub ball_radius: Option<f64>,
    #[arg(long)]
    pub threshold_scale: Option<f64>,
    #[arg(long)]
    pub trim: Option<f64>,
    #[arg(long)]
    pub smoothing_std: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub plot: Option<bool>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Overlay `other` onto `self`; set fields in `other` win.
    pub fn merged(mut self, other: &ConfigFile) -> Self {
        let dst = &mut self;
        merge_fields!(dst, other;
            experiment, dataset, n, d, sigma, seeds, radii, kernel, depth, nu, lengthscale,
            t0, growth, t_end, test_points, grid_res, probes, anchors, test_fraction, s, s_min,
            s_max, ball_radius, threshold_scale, trim, smoothing_std, samples, widths, lr, steps,
            trials, output_dir, plot);
        self
    }
}

/// The experiment families, one per subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    KernelCheck,
    FlowSweep,
    InterpolantDivergence,
    RateSweep,
    Lepski,
    PtKrr,
    Smooth,
    Lowerbound,
    TheorySuite,
    Widenet,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::KernelCheck => "kernel-check",
            Experiment::FlowSweep => "flow-sweep",
            Experiment::InterpolantDivergence => "interpolant-divergence",
            Experiment::RateSweep => "rate-sweep",
            Experiment::Lepski => "lepski",
            Experiment::PtKrr => "pt-krr",
            Experiment::Smooth => "smooth",
            Experiment::Lowerbound => "lowerbound",
            Experiment::TheorySuite => "theory-suite",
            Experiment::Widenet => "widenet",
        }
    }

    /// Defaults reproduce the desk-scale version of each experiment.
    fn defaults(self) -> ConfigFile {
        let mut c = ConfigFile {
            dataset: Some("synthetic".into()),
            n: Some(vec![200]),
            d: Some(1),
            sigma: Some(advrisk::data::DEFAULT_NOISE_STD),
            seeds: Some((0..5).collect()),
            radii: Some(vec![0.05]),
            kernel: Some("ntk".into()),
            depth: Some(2),
            nu: Some(1.5),
            lengthscale: Some(1.0),
            t0: Some(1e-2),
            growth: Some(1.5),
            t_end: Some(1e9),
            test_points: Some(200),
            grid_res: Some(1024),
            probes: Some(0),
            anchors: Some(true),
            test_fraction: Some(0.2),
            s: Some(1.0),
            s_min: Some(0.5),
            s_max: Some(1.0),
            ball_radius: Some(10.0),
            threshold_scale: Some(1.0),
            trim: Some(0.35),
            smoothing_std: Some(0.1),
            samples: Some(200),
            widths: Some(vec![256, 1024, 4096]),
            lr: Some(1e-2),
            steps: Some(1000),
            trials: Some(10_000),
            output_dir: Some(PathBuf::from("advrisk-out")),
            plot: Some(true),
            experiment: None,
        };
        match self {
            Experiment::KernelCheck => c.n = Some(vec![50]),
            Experiment::FlowSweep => c.radii = Some(vec![0.0, 0.02, 0.05]),
            Experiment::InterpolantDivergence => {
                c.n = Some(vec![50, 100, 200, 400, 800]);
                c.kernel = Some("exponential".into());
                c.seeds = Some((0..10).collect());
                c.grid_res = Some(2048);
            }
            Experiment::RateSweep => {
                c.n = Some((6..=11).map(|k| 1 << k).collect());
                c.seeds = Some((0..20).collect());
                c.grid_res = Some(4096);
            }
            Experiment::Lepski | Experiment::PtKrr => {
                c.n = Some((6..=10).map(|k| 1 << k).collect());
                c.radii = Some(vec![0.0]);
            }
            Experiment::Smooth => c.n = Some(vec![100]),
            Experiment::Lowerbound => {
                c.radii = Some(vec![0.005, 0.01, 0.02, 0.03, 0.04, 0.05]);
                c.s = Some(0.7);
                c.ball_radius = Some(1.0);
                c.grid_res = Some(4000);
                c.seeds = Some(vec![0]);
            }
            Experiment::TheorySuite => {
                c.n = Some(vec![20]);
                c.seeds = Some(vec![0]);
            }
            Experiment::Widenet => c.n = Some(vec![10]),
        }
        c
    }
}

/// Fully resolved settings; every field has a value and has been validated.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub experiment: String,
    pub dataset: String,
    pub n: Vec<usize>,
    pub d: usize,
    pub sigma: f64,
    pub seeds: Vec<u64>,
    pub radii: Vec<f64>,
    pub kernel: String,
    pub depth: usize,
    pub nu: f64,
    pub lengthscale: f64,
    pub t0: f64,
    pub growth: f64,
    pub t_end: f64,
    pub test_points: usize,
    pub grid_res: usize,
    /// 0 selects the per-dimension default.
    pub probes: usize,
    pub anchors: bool,
    pub test_fraction: f64,
    pub s: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub ball_radius: f64,
    pub threshold_scale: f64,
    pub trim: f64,
    pub smoothing_std: f64,
    pub samples: usize,
    pub widths: Vec<usize>,
    pub lr: f64,
    pub steps: usize,
    pub trials: usize,
    #[serde(skip)]
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub plot: bool,
}

fn req<T>(v: Option<T>, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing value for `{key}`")))
}

impl Settings {
    /// Precedence: flags, then the environment (output directory only), then
    /// the file, then experiment defaults.
    pub fn resolve(
        experiment: Experiment,
        file: Option<ConfigFile>,
        flags: &ConfigFile,
        env_output_dir: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        if let Some(name) = file.as_ref().and_then(|f| f.experiment.as_deref()) {
            if name != experiment.name() {
                return Err(CliError::Config(format!(
                    "config file is for `{name}`, not `{}`",
                    experiment.name()
                )));
            }
        }
        let mut c = experiment.defaults();
        if let Some(f) = file {
            c = c.merged(&f);
        }
        if let Some(dir) = env_output_dir {
            c.output_dir = Some(dir);
        }
        let c = c.merged(flags);
        let s = Settings {
            experiment: experiment.name().to_string(),
            dataset: req(c.dataset, "dataset")?,
            n: req(c.n, "n")?,
            d: req(c.d, "d")?,
            sigma: req(c.sigma, "sigma")?,
            seeds: req(c.seeds, "seeds")?,
            radii: req(c.radii, "radii")?,
            kernel: req(c.kernel, "kernel")?,
            depth: req(c.depth, "depth")?,
            nu: req(c.nu, "nu")?,
            lengthscale: req(c.lengthscale, "lengthscale")?,
            t0: req(c.t0, "t0")?,
            growth: req(c.growth, "growth")?,
            t_end: req(c.t_end, "t_end")?,
            test_points: req(c.test_points, "test_points")?,
            grid_res: req(c.grid_res, "grid_res")?,
            probes: req(c.probes, "probes")?,
            anchors: req(c.anchors, "anchors")?,
            test_fraction: req(c.test_fraction, "test_fraction")?,
            s: req(c.s, "s")?,
            s_min: req(c.s_min, "s_min")?,
            s_max: req(c.s_max, "s_max")?,
            ball_radius: req(c.ball_radius, "ball_radius")?,
            threshold_scale: req(c.threshold_scale, "threshold_scale")?,
            trim: req(c.trim, "trim")?,
            smoothing_std: req(c.smoothing_std, "smoothing_std")?,
            samples: req(c.samples, "samples")?,
            widths: req(c.widths, "widths")?,
            lr: req(c.lr, "lr")?,
            steps: req(c.steps, "steps")?,
            trials: req(c.trials, "trials")?,
            output_dir: req(c.output_dir, "output_dir")?,
            plot: req(c.plot, "plot")?,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.n.is_empty() || self.n.contains(&0) {
            return bad("`n` must be a nonempty list of positive sizes".into());
        }
        if self.seeds.is_empty() {
            return bad("`seeds` must not be empty".into());
        }
        if self.radii.is_empty() || self.radii.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return bad("`radii` must be a nonempty list of finite values >= 0".into());
        }
        if self.d == 0 {
            return bad("`d` must be >= 1".into());
        }
        if !(self.sigma >= 0.0) {
            return bad(format!("`sigma` must be >= 0, got {}", self.sigma));
        }
        if !(self.t0 > 0.0 && self.growth > 1.0 && self.t_end.is_finite() && self.t_end >= self.t0) {
            return bad("time grid needs t0 > 0, growth > 1 and a finite t_end >= t0".into());
        }
        if self.test_points < 2 {
            return bad("`test_points` must be >= 2".into());
        }
        if self.grid_res < 2 {
            return bad("`grid_res` must be >= 2".into());
        }
        if !(self.trim >= 0.0 && self.trim < 0.5) {
            return bad(format!("`trim` must lie in [0, 0.5), got {}", self.trim));
        }
        if !(self.smoothing_std > 0.0) || self.samples == 0 {
            return bad("smoothing needs smoothing_std > 0 and samples >= 1".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad("`test_fraction` must lie in (0, 1)".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || self.widths.is_empty() || self.widths.contains(&0) {
            return bad("widenet needs a finite lr >= 0 and positive widths".into());
        }
        if !(self.s > 0.0 && self.s_min > 0.0 && self.s_min <= self.s_max) {
            return bad("need s > 0 and 0 < s_min <= s_max".into());
        }
        if !(self.ball_radius > 0.0 && self.threshold_scale > 0.0) {
            return bad("ball_radius and threshold_scale must be > 0".into());
        }
        if self.dataset != "synthetic" && !matches!(self.experiment.as_str(), "flow-sweep" | "smooth") {
            return bad(format!("`{}` runs on synthetic data only", self.experiment));
        }
        self.kernel_spec(self.n[0], self.d)?;
        Ok(())
    }

    /// The configured kernel; the spiky kernel depends on `n`.
    pub fn kernel_spec(&self, n: usize, d: usize) -> Result<KernelSpec, CliError> {
        let spec = match self.kernel.as_str() {
            "ntk" => KernelSpec::ntk(self.depth),
            "exponential" => Ok(KernelSpec::Exponential),
            "matern" => KernelSpec::matern(self.nu, self.lengthscale),
            "spiky" => KernelSpec::spiky(n, d),
            other => return Err(CliError::Config(format!("unknown kernel `{other}`"))),
        };
        spec.map_err(|e| CliError::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML rendering of the resolved settings.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("settings serialize");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_is_flags_env_file_defaults() {
        let file: ConfigFile = toml::from_str("n = [10, 20]\nsigma = 0.5\noutput_dir = \"from-file\"").unwrap();
        let flags = ConfigFile {
            sigma: Some(0.1),
            ..Default::default()
        };
        let s = Settings::resolve(Experiment::FlowSweep, Some(file.clone()), &flags, None).unwrap();
        assert_eq!(s.n, vec![10, 20]);
        assert_eq!(s.sigma, 0.1);
        assert_eq!(s.output_dir, PathBuf::from("from-file"));
        assert_eq!(s.radii, vec![0.0, 0.02, 0.05]);
        let s = Settings::resolve(Experiment::FlowSweep, Some(file), &flags, Some("env".into())).unwrap();
        assert_eq!(s.output_dir, PathBuf::from("env"));
    }

    #[test]
    fn unknown_keys_and_mismatched_experiments_are_rejected() {
        assert!(toml::from_str::<ConfigFile>("bogus = 1").is_err());
        let file: ConfigFile = toml::from_str("experiment = \"lepski\"").unwrap();
        let err = Settings::resolve(Experiment::FlowSweep, Some(file), &ConfigFile::default(), None);
        assert!(matches!(err, Err(CliError::Config(_))));
    }

    #[test]
    fn invalid_values_fail_before_running() {
        for text in ["trim = 0.5", "radii = [-0.1]", "kernel = \"gauss\"", "depth = 0", "n = []"] {
            let file: ConfigFile = toml::from_str(text).unwrap();
            let r = Settings::resolve(Experiment::FlowSweep, Some(file), &ConfigFile::default(), None);
            assert!(matches!(r, Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn hash_tracks_content_only() {
        let a = Settings::resolve(Experiment::RateSweep, None, &ConfigFile::default(), None).unwrap();
        let mut flags = ConfigFile::default();
        flags.output_dir = Some("elsewhere".into());
        let b = Settings::resolve(Experiment::RateSweep, None, &flags, None).unwrap();
        assert_eq!(a.hash(), b.hash());
        flags.sigma = Some(0.2);
        let c = Settings::resolve(Experiment::RateSweep, None, &flags, None).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
