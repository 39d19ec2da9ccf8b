use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use indra_core::{OperatorSpec, ReprKind, RowSimilarity};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "indra", version, about = "Relational (Indra) representations of embedding sets")]
pub struct Cli {
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, env = "INDRA_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Generate a synthetic embedding set (or paired set).
    Synth(SynthArgs),
    /// Build Indra profile matrices from embeddings.
    Build(BuildArgs),
    /// Apply sparsification / normalisation operators to a matrix.
    Ops(OpsArgs),
    /// Check the Lawvere-metric and Yoneda properties of a square matrix.
    Verify(VerifyArgs),
    /// Cross-modal relational matching with ground-truth pairs.
    Match(MatchArgs),
    /// Train and evaluate a linear probe.
    Probe(ProbeArgs),
    /// Linear-probe accuracy across embedding noise levels.
    Sweep(SweepArgs),
    /// Describe an embeddings or matrix file.
    Info(InfoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    GaussianBlobs,
    PairedOrthogonal,
    PairedNonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WidthArg {
    F32,
    F64,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub generator: GeneratorKind,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 200)]
    pub n_per_class: usize,
    /// Pair count for paired generators.
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 16)]
    pub latent_dim: usize,
    #[arg(long, default_value_t = 32)]
    pub dim_u: usize,
    #[arg(long, default_value_t = 48)]
    pub dim_q: usize,
    #[arg(long, default_value_t = 10.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Value width of the written files.
    #[arg(long, value_enum, default_value_t = WidthArg::F32)]
    pub width: WidthArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// `all`, `random:K` or `ids:FILE` (one id per line).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(into = "String")]
pub enum AnchorArg {
    All,
    Random(usize),
    Ids(PathBuf),
}

impl FromStr for AnchorArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(AnchorArg::All);
        }
        if let Some(k) = s.strip_prefix("random:") {
            let k: usize = k.parse().map_err(|_| format!("bad anchor count {k:?}"))?;
            if k == 0 {
                return Err("anchor count must be >= 1".into());
            }
            return Ok(AnchorArg::Random(k));
        }
        if let Some(path) = s.strip_prefix("ids:") {
            if path.is_empty() {
                return Err("ids: needs a file".into());
            }
            return Ok(AnchorArg::Ids(PathBuf::from(path)));
        }
        Err(format!("expected all, random:K or ids:FILE, got {s:?}"))
    }
}

impl From<AnchorArg> for String {
    fn from(a: AnchorArg) -> String {
        match a {
            AnchorArg::All => "all".into(),
            AnchorArg::Random(k) => format!("random:{k}"),
            AnchorArg::Ids(p) => format!("ids:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorQueries {
    Keep,
    Exclude,
}

#[derive(Debug, Args, Serialize)]
pub struct AnchorOpts {
    #[arg(long, default_value = "all")]
    pub anchors: AnchorArg,
    /// Whether anchor samples also appear as query rows. Defaults to
    /// `exclude` for paired inputs and `keep` otherwise.
    #[arg(long, value_enum)]
    pub anchor_queries: Option<AnchorQueries>,
    /// Operator pipeline, e.g. `sparsify:10,zscore`.
    #[arg(long, value_parser = parse_ops)]
    pub ops: Option<OperatorSpec>,
    /// Largest sample count for a full (non-anchored) build.
    #[arg(long, default_value_t = 20_000)]
    pub max_n: usize,
}

fn parse_ops(s: &str) -> Result<OperatorSpec, String> {
    s.parse::<OperatorSpec>().map_err(|e| e.to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct BuildArgs {
    /// Embeddings (binary or CSV).
    #[arg(long)]
    pub input: PathBuf,
    /// Second modality, paired with `--input` by id (or by position).
    #[arg(long)]
    pub paired: Option<PathBuf>,
    #[command(flatten)]
    pub anchor: AnchorOpts,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct OpsArgs {
    /// Matrix file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_ops)]
    pub ops: OperatorSpec,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Square matrix file.
    #[arg(long)]
    pub input: PathBuf,
    /// Refuse matrices larger than this (the triangle check is cubic).
    #[arg(long, default_value_t = 512)]
    pub max_n: usize,
    #[arg(long, default_value_t = indra_core::verify::TRIANGLE_TOL)]
    pub triangle_tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimArg {
    Cosine,
    Centered,
    Negeuclid,
}

impl From<SimArg> for RowSimilarity {
    fn from(s: SimArg) -> Self {
        match s {
            SimArg::Cosine => RowSimilarity::Cosine,
            SimArg::Centered => RowSimilarity::CenteredCosine,
            SimArg::Negeuclid => RowSimilarity::NegativeEuclidean,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MatchArgs {
    /// Modality U: embeddings or a matrix file.
    #[arg(long)]
    pub input: PathBuf,
    /// Modality Q, same kind of file as `--input`.
    #[arg(long)]
    pub paired: PathBuf,
    #[command(flatten)]
    pub anchor: AnchorOpts,
    #[arg(long, value_enum, default_value_t = SimArg::Cosine)]
    pub sim: SimArg,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10, 30, 50])]
    pub k: Vec<usize>,
    /// Keep each row's own-sample coordinate when comparing rows.
    #[arg(long)]
    pub include_diagonal: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// `raw` or `indra:K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(into = "String")]
pub struct ReprArg(pub ReprKind);

impl FromStr for ReprArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "raw" {
            return Ok(ReprArg(ReprKind::Raw));
        }
        match s.strip_prefix("indra:").map(str::parse::<usize>) {
            Some(Ok(k)) if k > 0 => Ok(ReprArg(ReprKind::Indra { anchors: k })),
            _ => Err(format!("expected raw or indra:K, got {s:?}")),
        }
    }
}

impl From<ReprArg> for String {
    fn from(r: ReprArg) -> String {
        r.0.label()
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ProbeOpts {
    /// `id,label` CSV covering every sample.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ProbeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub probe: ProbeOpts,
    #[arg(long, default_value = "raw")]
    pub repr: ReprArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub probe: ProbeOpts,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 3.0, 5.0, 7.0])]
    pub sigma: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [ReprArg(ReprKind::Raw)])]
    pub repr: Vec<ReprArg>,
    /// First seed; `--repeats` consecutive seeds are run.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl std::fmt::Display for ReprArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0.label())
    }
}

#[derive(Debug, Args, Serialize)]
pub struct InfoArgs {
    #[arg(long)]
    pub input: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn anchor_forms() {
        assert_eq!("all".parse::<AnchorArg>(), Ok(AnchorArg::All));
        assert_eq!("random:64".parse::<AnchorArg>(), Ok(AnchorArg::Random(64)));
        assert_eq!("ids:a.txt".parse::<AnchorArg>(), Ok(AnchorArg::Ids("a.txt".into())));
        assert!("random:0".parse::<AnchorArg>().is_err());
        assert!("ids:".parse::<AnchorArg>().is_err());
        assert!("some".parse::<AnchorArg>().is_err());
        assert_eq!(String::from(AnchorArg::Random(3)), "random:3");
    }

    #[test]
    fn repr_forms() {
        assert_eq!("raw".parse::<ReprArg>().unwrap().0, ReprKind::Raw);
        assert_eq!("indra:256".parse::<ReprArg>().unwrap().0, ReprKind::Indra { anchors: 256 });
        assert!("indra:0".parse::<ReprArg>().is_err());
        assert!("indra".parse::<ReprArg>().is_err());
    }

    #[test]
    fn threads_from_env_or_flag() {
        let c = Cli::try_parse_from(["indra", "info", "--input", "x", "--threads", "3"]).unwrap();
        assert_eq!(c.threads, Some(3));
        let c = Cli::try_parse_from(["indra", "match", "--input", "a", "--paired", "b", "--out", "o", "--k", "1,10"])
            .unwrap();
        match c.command {
            Command::Match(m) => assert_eq!(m.k, vec![1, 10]),
            _ => unreachable!(),
        }
    }
}
