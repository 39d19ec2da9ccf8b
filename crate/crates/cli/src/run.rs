use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use indra_core::io::{
    inspect, load_embeddings, read_embeddings_csv, read_labels_csv, read_matrix, write_embeddings_as, write_labels_csv,
    write_matrix, PayloadKind, MAGIC,
};
use indra_core::probe::{evaluate_indices, represent, SweepRow};
use indra_core::verify::{Tolerances, VerifyOptions};
use indra_core::{
    apply_operators, build_indra, build_paired_indra, evaluate_probe, generate_synthetic, noise_sweep,
    relational_match_with_truth, train_probe, AnchorSpec, Angular, CostMatrix, DiagonalHandling, EmbeddingSet,
    Generator, LabeledSplit, MatchConfig, OperatorSpec, PairedDataset, ProbeConfig, RetrievalReport, Synthetic,
    SyntheticSpec, Width,
};
use serde::Serialize;

use crate::cli::{
    AnchorArg, AnchorOpts, AnchorQueries, BuildArgs, GeneratorKind, InfoArgs, MatchArgs, OpsArgs, ProbeArgs, ProbeOpts,
    SweepArgs, SynthArgs, VerifyArgs, WidthArg,
};
use crate::manifest::Run;

/// Whether the pipeline's own check passed (only `verify` can fail here).
pub type Passed = bool;

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

enum Loaded {
    Embeddings(EmbeddingSet<f64>),
    Matrix(CostMatrix<f64>),
}

fn load_any(path: &Path) -> Result<Loaded> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(MAGIC) {
        match inspect(&bytes)?.kind {
            PayloadKind::Matrix => Ok(Loaded::Matrix(read_matrix(&bytes)?)),
            PayloadKind::Embeddings => Ok(Loaded::Embeddings(indra_core::io::read_embeddings(&bytes)?)),
        }
    } else {
        let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(Loaded::Embeddings(read_embeddings_csv(bytes.as_slice(), &name)?))
    }
}

fn load_emb(path: &Path, run: &mut Run) -> Result<EmbeddingSet<f64>> {
    run.input(path);
    load_embeddings(path).with_context(|| format!("loading embeddings from {}", path.display()))
}

fn load_mat(path: &Path, run: &mut Run) -> Result<CostMatrix<f64>> {
    run.input(path);
    match load_any(path).with_context(|| format!("loading {}", path.display()))? {
        Loaded::Matrix(m) => Ok(m),
        Loaded::Embeddings(_) => bail!("{} holds embeddings, expected a matrix", path.display()),
    }
}

fn read_id_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

fn anchor_spec(opts: &AnchorOpts, paired: bool, seed: u64, run: &mut Run) -> Result<AnchorSpec> {
    let exclude = match opts.anchor_queries {
        Some(q) => q == AnchorQueries::Exclude,
        None => paired,
    };
    let spec = match &opts.anchors {
        AnchorArg::All => AnchorSpec::all(),
        AnchorArg::Random(k) => AnchorSpec::random(*k, seed),
        AnchorArg::Ids(path) => {
            run.input(path);
            AnchorSpec::ids(read_id_list(path)?)
        }
    };
    Ok(spec.excluding_queries(exclude))
}

fn check_full_size(spec: &AnchorSpec, n: usize, max_n: usize) -> Result<()> {
    if spec.is_all() && n > max_n {
        bail!(
            "full build of {n} samples exceeds --max-n {max_n}; use --anchors random:K for an anchored build \
             or raise --max-n"
        );
    }
    Ok(())
}

/// Reorders `q` into the id order of `u` when both carry the same ids;
/// otherwise rows are paired by position.
fn align_pair(u: EmbeddingSet<f64>, q: EmbeddingSet<f64>) -> Result<(PairedDataset<f64>, &'static str)> {
    if u.len() != q.len() {
        bail!("modalities differ in size: {} vs {}", u.len(), q.len());
    }
    if u.ids() == q.ids() {
        return Ok((PairedDataset::new(u, q)?, "id"));
    }
    let order: Option<Vec<usize>> = u.ids().iter().map(|id| q.index_of(id)).collect();
    match order {
        Some(order) => {
            let q = q.select(&order)?;
            Ok((PairedDataset::new(u, q)?, "id"))
        }
        None => Ok((PairedDataset::new(u, q)?, "position")),
    }
}

fn maybe_ops(m: CostMatrix<f64>, ops: Option<&OperatorSpec>) -> Result<CostMatrix<f64>> {
    match ops {
        Some(spec) if !spec.is_empty() => Ok(apply_operators(&m, spec)?),
        _ => Ok(m),
    }
}

pub fn synth(a: &SynthArgs, run: &mut Run) -> Result<Passed> {
    out_dir(&a.out)?;
    run.seed = Some(a.seed);
    let generator = match a.generator {
        GeneratorKind::GaussianBlobs => Generator::GaussianBlobs {
            classes: a.classes,
            n_per_class: a.n_per_class,
            dim: a.dim,
            separation: a.separation,
        },
        GeneratorKind::PairedOrthogonal => Generator::PairedOrthogonal { n: a.n, dim: a.dim, noise: a.noise },
        GeneratorKind::PairedNonlinear => Generator::PairedNonlinear {
            n: a.n,
            latent_dim: a.latent_dim,
            dim_u: a.dim_u,
            dim_q: a.dim_q,
            noise: a.noise,
        },
    };
    let width = match a.width {
        WidthArg::F32 => Width::F32,
        WidthArg::F64 => Width::F64,
    };
    let spec = SyntheticSpec { generator, seed: a.seed };
    match generate_synthetic::<f64>(&spec)? {
        Synthetic::Labeled { set, labels } => {
            run.write(a.out.join("embeddings.indr"), &write_embeddings_as(&set, width))?;
            let mut csv = Vec::new();
            write_labels_csv(set.ids(), &labels, &mut csv)?;
            run.write(a.out.join("labels.csv"), &csv)?;
        }
        Synthetic::Paired(p) => {
            run.write(a.out.join("u.indr"), &write_embeddings_as(p.u(), width))?;
            run.write(a.out.join("q.indr"), &write_embeddings_as(p.q(), width))?;
        }
    }
    run.write_json(a.out.join("spec.json"), &spec)?;
    Ok(true)
}

pub fn build(a: &BuildArgs, run: &mut Run) -> Result<Passed> {
    out_dir(&a.out)?;
    run.seed = Some(a.seed);
    let u = load_emb(&a.input, run)?;
    let spec = anchor_spec(&a.anchor, a.paired.is_some(), a.seed, run)?;
    check_full_size(&spec, u.len(), a.anchor.max_n)?;
    let ops = a.anchor.ops.as_ref();
    match &a.paired {
        None => {
            let m = maybe_ops(build_indra(&u, &Angular, &spec)?, ops)?;
            run.write(a.out.join("indra.indr"), &write_matrix(&m))?;
        }
        Some(qp) => {
            let q = load_emb(qp, run)?;
            let (pair, _) = align_pair(u, q)?;
            let (iu, iq) = build_paired_indra(&pair, &Angular, &spec)?;
            run.write(a.out.join("indra_u.indr"), &write_matrix(&maybe_ops(iu, ops)?))?;
            run.write(a.out.join("indra_q.indr"), &write_matrix(&maybe_ops(iq, ops)?))?;
        }
    }
    Ok(true)
}

pub fn ops(a: &OpsArgs, run: &mut Run) -> Result<Passed> {
    out_dir(&a.out)?;
    let m = load_mat(&a.input, run)?;
    let out = apply_operators(&m, &a.ops)?;
    run.write(a.out.join("indra.indr"), &write_matrix(&out))?;
    Ok(true)
}

pub fn verify_cmd(a: &VerifyArgs, run: &mut Run) -> Result<Passed> {
    out_dir(&a.out)?;
    let m = load_mat(&a.input, run)?;
    let opts = VerifyOptions {
        tolerances: Tolerances { triangle: a.triangle_tol, ..Tolerances::default() },
        max_n: Some(a.max_n),
    };
    let report = indra_core::verify::verify(&m, &opts)?;
    run.write_json(a.out.join("verify.json"), &report)?;
    eprintln!(
        "verify: n={} passed={} triangle_violations={} max_slack={:.3e} yoneda_error={:.3e} t0_duplicates={}",
        report.n,
        report.passed,
        report.triangle_violation_count,
        report.max_triangle_slack,
        report.yoneda_max_error,
        report.t0_duplicates.len()
    );
    Ok(report.passed)
}

#[derive(Serialize)]
struct MatchOutput {
    alignment: &'static str,
    anchors: usize,
    u_to_q: RetrievalReport,
    q_to_u: RetrievalReport,
}

pub fn match_cmd(a: &MatchArgs, run: &mut Run) -> Result<Passed> {
    out_dir(&a.out)?;
    run.seed = Some(a.seed);
    run.input(&a.input);
    run.input(&a.paired);
    let ops = a.anchor.ops.as_ref();
    let (iu, iq, truth, alignment) = match (load_any(&a.input)?, load_any(&a.paired)?) {
        (Loaded::Embeddings(u), Loaded::Embeddings(q)) => {
            let spec = anchor_spec(&a.anchor, true, a.seed, run)?;
            check_full_size(&spec, u.len(), a.anchor.max_n)?;
            let (pair, alignment) = align_pair(u, q)?;
            let (iu, iq) = build_paired_indra(&pair, &Angular, &spec)?;
            let truth: Vec<usize> = (0..iu.rows()).collect();
            (maybe_ops(iu, ops)?, maybe_ops(iq, ops)?, truth, alignment)
        }
        (Loaded::Matrix(iu), Loaded::Matrix(iq)) => {
            let (truth, alignment) = matrix_truth(&iu, &iq)?;
            (maybe_ops(iu, ops)?, maybe_ops(iq, ops)?, truth, alignment)
        }
        _ => bail!("--input and --paired must both be embeddings or both be matrices"),
    };
    let n = iu.rows();
    let mut k_list = Vec::new();
    for &k in &a.k {
        if k == 0 || k > n {
            eprintln!("warning: dropping k={k} (candidates: {n})");
        } else if !k_list.contains(&k) {
            k_list.push(k);
        }
    }
    let cfg = MatchConfig {
        row_similarity: a.sim.into(),
        diagonal_handling: if a.include_diagonal { DiagonalHandling::Include } else { DiagonalHandling::ExcludePair },
        k_list,
    };
    let (uq, qu) = relational_match_with_truth(&iu, &iq, &truth, &cfg)?;

    let mut csv = String::from("direction,query_id,truth_id,best_id,rank_of_truth\n");
    for (rep, queries, cands, truth_of) in [(&uq, &iu, &iq, truth.clone()), (&qu, &iq, &iu, invert(&truth))] {
        for (qi, (&rank, &best)) in rep.per_query_rank_of_truth.iter().zip(&rep.per_query_best).enumerate() {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                rep.direction,
                queries.row_ids()[qi],
                cands.row_ids()[truth_of[qi]],
                cands.row_ids()[best],
                rank
            ));
        }
    }
    run.write(a.out.join("match_ranks.csv"), csv.as_bytes())?;
    for rep in [&uq, &qu] {
        let tops: Vec<String> = rep.topk_accuracy.iter().map(|(k, v)| format!("top{k}={v:.4}")).collect();
        eprintln!("match {}: {} mrr={:.4}", rep.direction, tops.join(" "), rep.mean_reciprocal_rank);
    }
    run.write_json(a.out.join("match.json"), &MatchOutput { alignment, anchors: iu.cols(), u_to_q: uq, q_to_u: qu })?;
    Ok(true)
}

fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &t) in p.iter().enumerate() {
        inv[t] = i;
    }
    inv
}

/// Pairs matrix rows by row id when both matrices carry the same ids,
/// otherwise by position.
fn matrix_truth(iu: &CostMatrix<f64>, iq: &CostMatrix<f64>) -> Result<(Vec<usize>, &'static str)> {
    if iu.rows() != iq.rows() {
        bail!("matrices differ in row count: {} vs {}", iu.rows(), iq.rows());
    }
    let pos: HashMap<&str, usize> = iq.row_ids().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let by_id: Option<Vec<usize>> = iu.row_ids().iter().map(|id| pos.get(id.as_str()).copied()).collect();
    Ok(match by_id {
        Some(t) if pos.len() == iq.rows() => (t, "id"),
        _ => ((0..iu.rows()).collect(), "position"),
    })
}

fn probe_config(p: &ProbeOpts, seed: u64) -> ProbeConfig {
    ProbeConfig { l2_penalty: p.l2, max_iterations: p.max_iter, convergence_tol: p.tol, seed, ..ProbeConfig::default() }
}

fn load_labels(path: &Path, ids: &[String], run: &mut Run) -> Result<Vec<usize>> {
    run.input(path);
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(read_labels_csv(bytes.as_slice(), ids)?)
}

#[derive(Serialize)]
struct ProbeOutput {
    repr: String,
    seed: u64,
    n_train: usize,
    n_test: usize,
    classes: usize,
    features: usize,
    /// `None` when the test split is empty.
    test_accuracy: Option<f64>,
    train_accuracy: f64,
    iterations: usize,
    converged: bool,
    gradient_norm: f64,
    config: ProbeConfig,
}

pub fn probe(a: &ProbeArgs, run: &mut Run) -> Result<Passed> {
    out_dir(&a.out)?;
    run.seed = Some(a.seed);
    let e = load_emb(&a.input, run)?;
    let labels = load_labels(&a.probe.labels, e.ids(), run)?;
    let cfg = probe_config(&a.probe, a.seed);
    let base = LabeledSplit::stratified(e.data().clone(), labels, a.probe.test_fraction, a.seed)?;
    let features = represent(&e, a.repr.0, base.train(), a.seed)?;
    let split = base.with_features(features)?;
    let model = train_probe(&split, &cfg)?;
    let out = ProbeOutput {
        repr: a.repr.0.label(),
        seed: a.seed,
        n_train: split.train().len(),
        n_test: split.test().len(),
        classes: split.classes(),
        features: split.features().cols(),
        test_accuracy: if split.test().is_empty() { None } else { Some(evaluate_probe(&model, &split)?) },
        train_accuracy: evaluate_indices(&model, &split, split.train())?,
        iterations: model.iterations,
        converged: model.converged,
        gradient_norm: model.gradient_norm,
        config: cfg,
    };
    match out.test_accuracy {
        Some(acc) => eprintln!("probe {}: test_accuracy={acc:.4} train_accuracy={:.4}", out.repr, out.train_accuracy),
        None => eprintln!("probe {}: empty test split, train_accuracy={:.4}", out.repr, out.train_accuracy),
    }
    run.write_json(a.out.join("probe.json"), &out)?;
    Ok(true)
}

#[derive(Serialize)]
struct SweepSummary {
    repr_kind: String,
    sigma: f64,
    median_accuracy: f64,
    seeds: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn sweep(a: &SweepArgs, run: &mut Run) -> Result<Passed> {
    out_dir(&a.out)?;
    run.seed = Some(a.seed);
    if a.repeats == 0 {
        bail!("--repeats must be >= 1");
    }
    let e = load_emb(&a.input, run)?;
    let labels = load_labels(&a.probe.labels, e.ids(), run)?;
    let mut sigmas = a.sigma.clone();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let mut rows: Vec<SweepRow> = Vec::new();
    for seed in a.seed..a.seed + a.repeats {
        for repr in &a.repr {
            let cfg = probe_config(&a.probe, seed);
            rows.extend(noise_sweep(&e, &labels, &sigmas, repr.0, &cfg, a.probe.test_fraction)?);
        }
    }
    let mut csv = String::from("sigma,repr_kind,accuracy,seed\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{}\n", r.sigma, r.repr_kind, r.accuracy, r.seed));
    }
    run.write(a.out.join("sweep.csv"), csv.as_bytes())?;

    let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for r in &rows {
        let si = sigmas.iter().position(|&s| s == r.sigma).ok_or_else(|| anyhow!("unknown sigma"))?;
        groups.entry((r.repr_kind.clone(), si)).or_default().push(r.accuracy);
    }
    let summary: Vec<SweepSummary> = groups
        .into_iter()
        .map(|((repr_kind, si), acc)| SweepSummary {
            repr_kind,
            sigma: sigmas[si],
            seeds: acc.len(),
            median_accuracy: median(acc),
        })
        .collect();
    for s in &summary {
        eprintln!("sweep {} sigma={}: median accuracy {:.4}", s.repr_kind, s.sigma, s.median_accuracy);
    }
    run.write_json(a.out.join("sweep.json"), &summary)?;
    Ok(true)
}

#[derive(Serialize)]
struct CsvInfo {
    kind: &'static str,
    rows: usize,
    cols: usize,
}

pub fn info(a: &InfoArgs) -> Result<Passed> {
    let bytes = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let text = if bytes.starts_with(MAGIC) {
        let mut v = serde_json::to_value(inspect(&bytes)?)?;
        abbreviate(&mut v);
        serde_json::to_string_pretty(&v)?
    } else {
        let e: EmbeddingSet<f64> = read_embeddings_csv(bytes.as_slice(), "")?;
        serde_json::to_string_pretty(&CsvInfo { kind: "csv-embeddings", rows: e.len(), cols: e.dim() })?
    };
    println!("{text}");
    Ok(true)
}

/// Replaces long arrays (row and column index tables) with a short summary.
fn abbreviate(v: &mut serde_json::Value) {
    use serde_json::Value;
    match v {
        Value::Array(items) if items.len() > 8 => {
            let head: Vec<String> = items.iter().take(4).map(|x| x.to_string()).collect();
            *v = Value::String(format!("[{}, ... ({} items)]", head.join(", "), items.len()));
        }
        Value::Array(items) => items.iter_mut().for_each(abbreviate),
        Value::Object(map) => map.values_mut().for_each(abbreviate),
        _ => {}
    }
}

pub fn out_of(cmd: &crate::cli::Command) -> Option<PathBuf> {
    use crate::cli::Command::*;
    match cmd {
        Synth(a) => Some(a.out.clone()),
        Build(a) => Some(a.out.clone()),
        Ops(a) => Some(a.out.clone()),
        Verify(a) => Some(a.out.clone()),
        Match(a) => Some(a.out.clone()),
        Probe(a) => Some(a.out.clone()),
        Sweep(a) => Some(a.out.clone()),
        Info(_) => None,
    }
}
