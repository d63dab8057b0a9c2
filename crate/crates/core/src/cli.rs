//! The `gkraus` command line: generate, classify, apply, verify.
//!
//! Settings come from built-in defaults, then an optional JSON `--config`
//! file, then flags. The resolved settings are written into every artifact.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{invalid, Error, Result};
use crate::fock::FockOperator;
use crate::kraus::*;
use crate::phase_space::*;
use crate::verify::acceptance::{self, CriterionOutcome};
use crate::verify::*;

#[derive(Parser, Debug)]
#[command(name = "gkraus", version, about = "Kraus operators of single-mode Gaussian channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a Kraus family and write it as JSON.
    Gen(GenArgs),
    /// Complete positivity, quantum-limitedness and entanglement breaking.
    Classify(ClassifyArgs),
    /// Apply a saved family to a test state.
    Apply(ApplyArgs),
    /// Run verification checks; exits 3 if any fails.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Representation {
    /// Single-index family at finite squeezing, or double-index if α is above the quantum limit.
    FiniteR,
    /// Single-index family of a quantum-limited channel.
    Limit,
    /// Double-index family of a noisy gain channel.
    Noisy,
    /// Rank-one coherent-state family at the entanglement-breaking threshold.
    EbRankOne,
    /// Homodyne-and-prepare family.
    A2,
    /// Gaussian-weighted `q` displacements.
    B1,
    /// Gaussian-weighted displacements in the plane.
    B2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Suite {
    /// All ten acceptance criteria.
    All,
    Oracle,
    Choi,
    Completeness,
    Thresholds,
    MeasurePrepare,
    Composition,
    BeamsplitterProduct,
    Convergence,
}

/// Settings shared by every command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Fock truncation `N`.
    pub dim: usize,
    /// Index cutoff of single-index families.
    pub n_max: Option<usize>,
    /// Index cutoffs of double-index families.
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    /// Levels on which completeness is reported.
    pub levels: Option<usize>,
    pub disc: DiscGrid,
    pub homodyne: LineGrid,
    pub gaussian: LineGrid,
    pub gaussian_2d: LineGrid,
    pub tolerance: Option<f64>,
    pub r: Option<Vec<f64>>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: 60,
            n_max: None,
            n1: None,
            n2: None,
            levels: None,
            disc: DiscGrid::DEFAULT,
            homodyne: LineGrid::HOMODYNE,
            gaussian: LineGrid::GAUSSIAN,
            gaussian_2d: LineGrid::GAUSSIAN_2D,
            tolerance: None,
            r: None,
            format: Format::Json,
        }
    }
}

impl RunConfig {
    pub fn n_max_for(&self, family: ChannelFamily) -> usize {
        self.n_max.unwrap_or(match family {
            ChannelFamily::C2 => 4 * self.dim,
            ChannelFamily::D => 2 * self.dim,
            _ => self.dim,
        })
    }

    pub fn cutoffs(&self) -> Cutoffs {
        Cutoffs { n1: self.n1.unwrap_or(2 * self.dim), n2: self.n2.unwrap_or(self.dim) }
    }

    pub fn levels(&self) -> usize {
        self.levels.unwrap_or(self.dim / 2).min(self.dim)
    }

    fn comparison(&self) -> ComparisonConfig {
        ComparisonConfig { dim: self.dim, cutoffs: self.cutoffs(), disc: self.disc, gaussian_2d: self.gaussian_2d }
    }

    /// The configuration with every defaulted cutoff filled in.
    pub fn resolved(&self, family: Option<ChannelFamily>) -> RunConfig {
        let mut c = self.clone();
        c.n_max = Some(self.n_max_for(family.unwrap_or(ChannelFamily::C1)));
        let cut = self.cutoffs();
        c.n1 = Some(cut.n1);
        c.n2 = Some(cut.n2);
        c.levels = Some(self.levels());
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(invalid("dim must be at least 2"));
        }
        for (name, v) in [("n_max", self.n_max), ("n1", self.n1), ("n2", self.n2), ("levels", self.levels)] {
            if v == Some(0) {
                return Err(invalid(format!("{name} must be at least 1")));
            }
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid("tolerance must be positive"));
            }
        }
        if let Some(rs) = &self.r {
            if rs.is_empty() || rs.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                return Err(invalid("r values must be positive and finite"));
            }
        }
        let positive = |a: f64, b: f64| a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite();
        if !positive(self.disc.radius, self.disc.step) {
            return Err(invalid("disc grid needs positive radius and step"));
        }
        for g in [self.homodyne, self.gaussian, self.gaussian_2d] {
            if !positive(g.half_width, g.step) {
                return Err(invalid("line grids need positive half width and step"));
            }
        }
        Ok(())
    }
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `A,B`, got `{s}`"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((p(a)?, p(b)?))
}

#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// JSON file with `RunConfig` fields; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fock truncation N.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub n2: Option<usize>,
    #[arg(long)]
    pub levels: Option<usize>,
    /// Coherent-state disc grid as `RADIUS,STEP`.
    #[arg(long, value_parser = parse_pair)]
    pub disc: Option<(f64, f64)>,
    /// Homodyne grid as `HALF_WIDTH,STEP`.
    #[arg(long, value_parser = parse_pair)]
    pub homodyne: Option<(f64, f64)>,
    /// One-dimensional Gaussian grid, in standard deviations.
    #[arg(long, value_parser = parse_pair)]
    pub gaussian: Option<(f64, f64)>,
    /// Per-axis two-dimensional Gaussian grid, in standard deviations.
    #[arg(long, value_parser = parse_pair)]
    pub gaussian_2d: Option<(f64, f64)>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Comma-separated squeezing values.
    #[arg(long, value_delimiter = ',')]
    pub r: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(p)?))?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.dim {
            c.dim = v;
        }
        c.n_max = self.n_max.or(c.n_max);
        c.n1 = self.n1.or(c.n1);
        c.n2 = self.n2.or(c.n2);
        c.levels = self.levels.or(c.levels);
        if let Some((radius, step)) = self.disc {
            c.disc = DiscGrid { radius, step };
        }
        let line = |v: Option<(f64, f64)>, g: &mut LineGrid| {
            if let Some((half_width, step)) = v {
                *g = LineGrid { half_width, step };
            }
        };
        line(self.homodyne, &mut c.homodyne);
        line(self.gaussian, &mut c.gaussian);
        line(self.gaussian_2d, &mut c.gaussian_2d);
        c.tolerance = self.tol.or(c.tolerance);
        if self.r.is_some() {
            c.r = self.r.clone();
        }
        if let Some(f) = self.format {
            c.format = f;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct ChannelArgs {
    #[arg(long)]
    pub family: Option<ChannelFamily>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Noise; defaults to the quantum limit where that is meaningful.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// JSON channel spec, `{family, kappa, alpha}` or `{X, Y}`.
    #[arg(long, conflicts_with_all = ["family", "kappa", "alpha"])]
    pub channel: Option<PathBuf>,
}

/// A family and gain with the noise left open.
struct ChannelRequest {
    family: ChannelFamily,
    kappa: f64,
    alpha: Option<f64>,
}

impl ChannelArgs {
    fn request(&self) -> Result<ChannelRequest> {
        if let Some(p) = &self.channel {
            let spec: ChannelSpec = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(p)?))?;
            let ch = spec.build()?;
            return Ok(ChannelRequest { family: ch.family(), kappa: ch.kappa(), alpha: Some(ch.alpha()) });
        }
        let family = self.family.ok_or_else(|| invalid("--family or --channel is required"))?;
        let kappa = match (family.has_kappa(), self.kappa) {
            (true, Some(k)) => k,
            (true, None) => return Err(invalid(format!("family {family} needs --kappa"))),
            (false, _) => 1.0,
        };
        Ok(ChannelRequest { family, kappa, alpha: self.alpha })
    }

    fn channel(&self) -> Result<GaussianChannel> {
        let rq = self.request()?;
        match rq.alpha {
            Some(a) => GaussianChannel::new(rq.family, rq.kappa, a),
            None => GaussianChannel::quantum_limited(rq.family, rq.kappa),
        }
    }
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, value_enum)]
    pub rep: Representation,
    /// Output file; the family goes to stdout and the summary to stderr if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Args, Debug)]
pub struct ApplyArgs {
    /// Family file written by `gen`.
    #[arg(long)]
    pub family_file: PathBuf,
    /// `vacuum`, `coherent:RE[,IM]`, `thermal:NU` or `fock:N`.
    #[arg(long)]
    pub state: TestState,
    /// Where to write the output density matrix.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    /// Criteria to run with `--suite all`; all ten by default.
    #[arg(long, value_delimiter = ',')]
    pub criteria: Option<Vec<u8>>,
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, value_enum)]
    pub rep: Option<Representation>,
    /// Input states separated by `;`, e.g. `vacuum;coherent:1,0.5`.
    #[arg(long, value_delimiter = ';', value_parser = parse_state_list)]
    pub states: Option<Vec<TestState>>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub k2: Option<f64>,
    /// Beamsplitter angle for `beamsplitter_product`.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Largest operator index compared by `convergence`.
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    /// Leading matrix block compared by `convergence`.
    #[arg(long, default_value_t = 30)]
    pub block: usize,
    /// Also write the CSV summary here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

fn parse_state_list(s: &str) -> std::result::Result<TestState, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// What the process should report through its exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    ValidationFailure,
    VerificationFailure,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::ValidationFailure => 2,
            Outcome::VerificationFailure => 3,
        }
    }
}

/// Exit code for an error: 2 for anything caused by the input, 1 for I/O.
pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 1,
        _ => 2,
    }
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<Outcome> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a, out, err),
        Command::Classify(a) => cmd_classify(a, out),
        Command::Apply(a) => cmd_apply(a, out),
        Command::Verify(a) => cmd_verify(a, out, err),
    }
}

fn line(out: &mut dyn Write, v: &impl Serialize) -> Result<()> {
    serde_json::to_writer(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}

/// Builds the family selected by `rep`, with the settings actually used.
pub fn build_family(rq: &ChannelArgs, rep: Representation, cfg: &RunConfig) -> Result<(KrausFamily, BTreeMap<String, Value>)> {
    let ChannelRequest { family, kappa, alpha } = rq.request()?;
    let mut header = BTreeMap::new();
    header.insert("rep".to_string(), serde_json::to_value(rep)?);
    let ql = GaussianChannel::quantum_limited(family, kappa)?;
    let is_ql = |a: Option<f64>| a.is_none_or(|a| (a - ql.alpha()).abs() <= 1e-12 * ql.alpha().max(1.0));
    let pairing = |what: &str| Error::Unsupported(format!("representation {what} is not available for family {family}"));
    let single_r = || match cfg.r.as_deref() {
        Some([r]) => Ok(*r),
        _ => Err(invalid("finite_r needs exactly one --r value")),
    };
    let fam = match rep {
        Representation::Limit | Representation::FiniteR if !family.has_kappa() => return Err(pairing("limit/finite_r")),
        Representation::Limit => {
            if !is_ql(alpha) {
                return Err(invalid(format!(
                    "α = {} is above the quantum limit {}; use --rep noisy",
                    alpha.unwrap(),
                    ql.alpha()
                )));
            }
            header.insert("n_max".into(), cfg.n_max_for(family).into());
            quantum_limited_family(family, kappa, Squeezing::Limit, cfg.dim, cfg.n_max_for(family))?
        }
        Representation::FiniteR => {
            let r = single_r()?;
            header.insert("r".into(), r.into());
            if is_ql(alpha) {
                header.insert("n_max".into(), cfg.n_max_for(family).into());
                quantum_limited_family(family, kappa, Squeezing::Finite(r), cfg.dim, cfg.n_max_for(family))?
            } else {
                let ch = GaussianChannel::new(family, kappa, alpha.unwrap())?;
                require_cp(&ch)?;
                header.insert("cutoffs".into(), serde_json::to_value(cfg.cutoffs())?);
                noisy_family_finite_r(&ch, r, cfg.dim, cfg.cutoffs())?
            }
        }
        Representation::Noisy => {
            if !family.has_kappa() {
                return Err(pairing("noisy"));
            }
            let a = alpha.ok_or_else(|| invalid("--rep noisy needs --alpha"))?;
            let ch = GaussianChannel::new(family, kappa, a)?;
            require_cp(&ch)?;
            header.insert("cutoffs".into(), serde_json::to_value(cfg.cutoffs())?);
            noisy_family(&ch, cfg.dim, cfg.cutoffs())?
        }
        Representation::EbRankOne => {
            let a0 = rank_one_alpha(family, kappa).ok_or_else(|| pairing("eb_rank_one"))?;
            if let Some(a) = alpha {
                if (a - a0).abs() > 1e-12 * a0.max(1.0) {
                    return Err(invalid(format!("the rank-one family of {family} is built at α = {a0}, got {a}")));
                }
            }
            header.insert("disc".into(), serde_json::to_value(cfg.disc)?);
            eb_rank_one(family, kappa, cfg.dim, cfg.disc)?
        }
        Representation::A2 => {
            if family != ChannelFamily::A2 {
                return Err(pairing("a2"));
            }
            if !is_ql(alpha) {
                return Err(invalid("the homodyne family realises A2 with α = 1 only"));
            }
            header.insert("grid".into(), serde_json::to_value(cfg.homodyne)?);
            a2_kraus(cfg.dim, cfg.homodyne)?
        }
        Representation::B1 | Representation::B2 => {
            let want = if rep == Representation::B1 { ChannelFamily::B1 } else { ChannelFamily::B2 };
            if family != want {
                return Err(pairing(if want == ChannelFamily::B1 { "b1" } else { "b2" }));
            }
            let a = alpha.ok_or_else(|| invalid("additive-noise families need --alpha"))?;
            if rep == Representation::B1 {
                header.insert("grid".into(), serde_json::to_value(cfg.gaussian)?);
                b1_kraus(a, cfg.dim, cfg.gaussian)?
            } else {
                header.insert("grid".into(), serde_json::to_value(cfg.gaussian_2d)?);
                b2_displacement(a, cfg.dim, cfg.gaussian_2d)?
            }
        }
    };
    header.insert("config".into(), serde_json::to_value(cfg.resolved(Some(family)))?);
    Ok((fam, header))
}

fn cmd_gen(a: GenArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<Outcome> {
    let cfg = a.cfg.resolve()?;
    let (fam, header) = build_family(&a.channel, a.rep, &cfg)?;
    let levels = cfg.levels();
    let defect = completeness_defect(&fam);
    let (d, o) = defect.on_levels(levels);
    let summary = json!({
        "family": fam.channel.family(),
        "kappa": fam.channel.kappa(),
        "alpha": fam.channel.alpha(),
        "rep": a.rep,
        "dim": fam.dim,
        "operators": fam.len(),
        "completeness_target": match fam.squeezing { Squeezing::Limit => "identity", Squeezing::Finite(_) => "tanh^(2j) r" },
        "levels": levels,
        "defect_diagonal": d,
        "defect_offdiagonal": o,
        "out": a.out,
    });
    match &a.out {
        Some(p) => {
            save_family(&fam, header, p)?;
            line(out, &summary)?;
        }
        None => {
            write_family(&fam, header, &mut *out)?;
            writeln!(out)?;
            line(err, &summary)?;
        }
    }
    Ok(Outcome::Success)
}

fn cmd_classify(a: ClassifyArgs, out: &mut dyn Write) -> Result<Outcome> {
    let cfg = a.cfg.resolve()?;
    let ch = a.channel.channel()?;
    let rs = cfg.r.clone().unwrap_or_else(|| vec![0.3, EB_TEST_SQUEEZING, 2.0]);
    let cp = is_cp(&ch);
    let ql = GaussianChannel::quantum_limited(ch.family(), ch.kappa())?.alpha();
    let mut report = json!({
        "family": ch.family(),
        "kappa": ch.kappa(),
        "alpha": ch.alpha(),
        "cp": cp,
        "cp_margin": cp_margin(&ch),
        "quantum_limited": cp && is_quantum_limited(&ch),
        "thresholds": { "cp_alpha_min": ql, "eb_alpha_min": eb_noise_threshold(ch.family(), ch.kappa()).map(|t| t.max(ql)) },
    });
    if cp {
        let pt: Vec<Value> = rs
            .iter()
            .map(|&r| json!({ "r": r, "min_pt_symplectic_eigenvalue": eb_pt_minimum(&ch, r) }))
            .collect();
        report["eb"] = is_entanglement_breaking(&ch)?.into();
        report["eb_by_r"] = rs.iter().map(|&r| is_entanglement_breaking_at(&ch, r)).collect::<Result<Vec<_>>>()?.into();
        report["pt_test"] = pt.into();
    } else {
        report["eb"] = Value::Null;
    }
    match cfg.format {
        Format::Json => line(out, &report)?,
        Format::Csv => {
            writeln!(out, "family,kappa,alpha,cp,quantum_limited,eb")?;
            writeln!(
                out,
                "{},{},{},{},{},{}",
                ch.family(),
                ch.kappa(),
                ch.alpha(),
                cp,
                report["quantum_limited"],
                report["eb"]
            )?;
        }
    }
    Ok(if cp { Outcome::Success } else { Outcome::ValidationFailure })
}

fn cmd_apply(a: ApplyArgs, out: &mut dyn Write) -> Result<Outcome> {
    let (fam, _) = load_family(&a.family_file)?;
    let rho = a.state.density(fam.dim)?;
    let res = apply_kraus(&fam, &rho)?;
    let est = cm_from_density(&res)?;
    let pops: Vec<f64> = (0..res.dim().min(10)).map(|j| res.matrix[(j, j)].re).collect();
    let summary = json!({
        "input": a.state.label(),
        "family": fam.channel.family(),
        "kappa": fam.channel.kappa(),
        "alpha": fam.channel.alpha(),
        "dim": fam.dim,
        "trace": res.trace().re,
        "leakage": res.leakage,
        "populations": pops,
        "cm": est.cm,
        "expected_cm": a.state.cm().filter(|_| fam.squeezing == Squeezing::Limit).map(|v| apply_channel_cm(&fam.channel, &v)),
        "warning": est.warning,
        "out": a.out,
    });
    if let Some(p) = &a.out {
        write_state(&res, p)?;
    }
    line(out, &summary)?;
    Ok(Outcome::Success)
}

fn write_state(rho: &FockOperator, p: &Path) -> Result<()> {
    serde_json::to_writer(std::io::BufWriter::new(std::fs::File::create(p)?), rho)?;
    Ok(())
}

fn default_states(s: &Option<Vec<TestState>>, d: &[TestState]) -> Vec<TestState> {
    s.clone().unwrap_or_else(|| d.to_vec())
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<Outcome> {
    let cfg = a.cfg.resolve()?;
    let tol = |d: f64| cfg.tolerance.unwrap_or(d);
    let mut reports: Vec<VerificationReport> = Vec::new();
    let mut criteria: Vec<CriterionOutcome> = Vec::new();
    let mut table: Option<(String, Vec<String>)> = None;
    match a.suite {
        Suite::All => {
            let ids = a.criteria.clone().unwrap_or_else(|| (1..=10).collect());
            for id in ids {
                let f = acceptance::CRITERIA
                    .get((id as usize).wrapping_sub(1))
                    .ok_or_else(|| invalid(format!("no criterion {id}")))?;
                let o = f()?;
                writeln!(err, "{}", o.line())?;
                criteria.push(o);
            }
            for o in &criteria {
                reports.extend(o.reports.iter().cloned().map(|r| r.param("criterion", o.id)));
            }
        }
        Suite::Oracle | Suite::Completeness => {
            let rq = a.channel.request()?;
            let rep = a.rep.unwrap_or(default_rep(&rq));
            let (fam, _) = build_family(&a.channel, rep, &cfg)?;
            let quadrature = matches!(fam.construction, Construction::RankOne | Construction::Homodyne | Construction::Displacement);
            if a.suite == Suite::Oracle {
                let t = tol(if quadrature { 1e-3 } else { 1e-4 });
                let states = default_states(&a.states, &[TestState::Vacuum, TestState::coherent(1.0), TestState::Thermal { nu: 2.0 }]);
                for s in states {
                    reports.push(oracle_equivalence(&fam, s, t)?);
                }
            } else {
                let (d, o) = completeness_defect(&fam).on_levels(cfg.levels());
                let t = tol(if quadrature { 1e-4 } else { 1e-6 });
                for (metric, v) in [("max_abs_diagonal", d), ("max_abs_offdiagonal", o)] {
                    reports.push(
                        VerificationReport::new("completeness", metric, v, t)
                            .param("family", fam.channel.family().name())
                            .param("kappa", fam.channel.kappa())
                            .param("levels", cfg.levels())
                            .param("operators", fam.len()),
                    );
                }
            }
        }
        Suite::Choi => {
            let rq = a.channel.request()?;
            let (fam, _) = build_family(&a.channel, a.rep.unwrap_or(default_rep(&rq)), &cfg)?;
            for &r in cfg.r.as_deref().unwrap_or(&[0.8]) {
                reports.push(choi_cm_check(&fam, r, tol(1e-4))?);
            }
        }
        Suite::Thresholds => criteria.push(acceptance::criterion_6()?),
        Suite::MeasurePrepare => {
            let kappas = match a.channel.kappa {
                Some(k) => vec![k],
                None => vec![0.5, 0.8, 1.3],
            };
            let states = default_states(&a.states, &[TestState::Vacuum, TestState::Fock { n: 1 }, TestState::coherent(1.0)]);
            for k in kappas {
                reports.extend(measure_prepare_equivalence(k, &states, &cfg.comparison(), tol(1e-3))?);
            }
        }
        Suite::Composition => {
            let pairs = match (a.k1, a.k2) {
                (Some(k1), Some(k2)) => vec![(k1, k2)],
                (None, None) => vec![(0.8, 1.25), (0.6, 1.2)],
                _ => return Err(invalid("give both --k1 and --k2")),
            };
            let states = default_states(&a.states, &[TestState::Vacuum, TestState::Fock { n: 1 }, TestState::coherent(1.0)]);
            for (k1, k2) in pairs {
                let o = composition_check(k1, k2, &states, &cfg.comparison(), tol(1e-6))?;
                let name = o.matching_ordering.unwrap_or("none");
                writeln!(err, "composition ({k1}, {k2}): matching ordering {name}")?;
                reports.push(
                    VerificationReport::new("composition_ordering", "matching_orderings", o.matching_ordering.is_some() as u8 as f64, f64::INFINITY)
                        .param("kappa1", k1)
                        .param("kappa2", k2)
                        .param("ordering", name),
                );
                // the mismatching ordering is informative, not a failure
                reports.extend(o.reports.into_iter().map(|mut r| {
                    if r.params.get("ordering").and_then(|v| v.as_str()).is_some_and(|n| Some(n) != o.matching_ordering) {
                        r.pass = true;
                        r.note = Some("non-matching ordering, reported for reference".into());
                    }
                    r
                }));
            }
        }
        Suite::BeamsplitterProduct => {
            let theta = a.theta.unwrap_or(std::f64::consts::FRAC_PI_4);
            let states = default_states(&a.states, &[TestState::coherent(1.0), TestState::Fock { n: 1 }, TestState::Fock { n: 2 }]);
            for s in states {
                let r = match s {
                    TestState::Coherent { .. } | TestState::Vacuum => beamsplitter_product_check(s, theta, cfg.dim, Separability::Product, tol(1e-8))?,
                    _ => beamsplitter_product_check(s, theta, cfg.dim, Separability::Entangled, tol(1e-3))?,
                };
                reports.push(r);
            }
        }
        Suite::Convergence => {
            let family = a.channel.family.unwrap_or(ChannelFamily::C1);
            let kappa = a.channel.kappa.unwrap_or(0.5);
            let rs = cfg.r.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0]);
            let mut rows = Vec::new();
            let mut gaps = Vec::new();
            for &r in &rs {
                let g = convergence_gap(family, kappa, r, a.window, a.block)?;
                rows.push(format!("{r},{g:.6e}"));
                gaps.push(g);
            }
            let last = *gaps.last().unwrap();
            reports.push(
                VerificationReport::new("convergence", "max_abs_entry", last, tol(1e-6))
                    .param("family", family.name())
                    .param("kappa", kappa)
                    .param("r", *rs.last().unwrap())
                    .param("window", a.window)
                    .param("block", a.block),
            );
            let ups = gaps.windows(2).filter(|w| w[1] >= w[0]).count();
            reports.push(VerificationReport::new("convergence", "non_decreasing_steps", ups as f64, 0.0).param("gaps", serde_json::to_value(&gaps)?));
            table = Some(("r,max_abs_diff".into(), rows));
        }
    }
    for o in &criteria {
        if a.suite != Suite::All {
            reports.extend(o.reports.iter().cloned());
        }
    }

    let header = json!({ "config": cfg.resolved(a.channel.family), "suite": format!("{:?}", a.suite).to_lowercase() });
    let csv = render_csv(&header, &reports, &criteria, table.as_ref());
    match cfg.format {
        Format::Json => {
            line(out, &header)?;
            for r in &reports {
                line(out, r)?;
            }
        }
        Format::Csv => out.write_all(csv.as_bytes())?,
    }
    if let Some(p) = &a.csv {
        std::fs::write(p, &csv)?;
    }
    let pass = reports.iter().all(|r| r.pass) && criteria.iter().all(|c| c.pass);
    Ok(if pass { Outcome::Success } else { Outcome::VerificationFailure })
}

fn default_rep(rq: &ChannelRequest) -> Representation {
    match rq.family {
        ChannelFamily::A2 => Representation::A2,
        ChannelFamily::B1 => Representation::B1,
        ChannelFamily::B2 => Representation::B2,
        ChannelFamily::A1 => Representation::EbRankOne,
        f => {
            let ql = GaussianChannel::quantum_limited(f, rq.kappa).map(|c| c.alpha()).unwrap_or(0.0);
            match rq.alpha {
                Some(a) if (a - ql).abs() > 1e-12 * ql.max(1.0) => Representation::Noisy,
                _ => Representation::Limit,
            }
        }
    }
}

fn render_csv(header: &Value, reports: &[VerificationReport], criteria: &[CriterionOutcome], table: Option<&(String, Vec<String>)>) -> String {
    let mut s = format!("# {header}\n");
    if let Some((head, rows)) = table {
        s.push_str(head);
        s.push('\n');
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s.push('\n');
    }
    if !criteria.is_empty() {
        s.push_str("criterion,title,pass,worst_ratio,reports\n");
        for c in criteria {
            s.push_str(&format!("{},\"{}\",{},{:.3e},{}\n", c.id, c.title, c.pass, c.worst_ratio, c.reports.len()));
        }
        s.push('\n');
    }
    s.push_str(VerificationReport::CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Parses process arguments and runs, returning the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    match run(cli, &mut stdout.lock(), &mut stderr.lock()) {
        Ok(o) => o.code(),
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    }
}
