use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use mlrh::bench::{inter_bit_correlation, random_codes, scaling_sweep, scan_throughput, BenchConfig};
use mlrh::boost::{boost_train, finalize_model, DEFAULT_RUNS};
use mlrh::data::{
    encode_matrix, gen_synthetic, load_class_ids, load_csv_features, load_labels, load_matrix, one_hot_pm, split,
    DType, Dataset, SyntheticSpec,
};
use mlrh::eval::{mean_ap, metrics_csv, metrics_table, precision_at_k, MetricRow, RelevanceOracle};
use mlrh::features::{fit_rbf, RbfMap};
use mlrh::index::{knn, pack, rank_indices, PackedCodes};
use mlrh::trainer::{encode_model, load_model, train_with, Hyperparams, TrainControl, TrainedModel};
use mlrh::{write_atomic, DenseMatrix, Error, Result};

use crate::config::{HyperFlags, Resolver};

/// Outputs are staged in memory and only written once every step succeeded,
/// each alongside a `<path>.cfg` echo of the effective configuration.
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    fn commit(self, resolver: &Resolver, command: &str) -> Result<()> {
        let mut seen = HashSet::new();
        for (p, _) in &self.files {
            if !seen.insert(p.clone()) {
                return Err(Error::Usage(format!("{} is named as more than one output", p.display())));
            }
        }
        let cfg = resolver.render(command);
        for (path, bytes) in &self.files {
            write_atomic(path, bytes)?;
            write_atomic(&sidecar(path), cfg.as_bytes())?;
        }
        Ok(())
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".cfg");
    PathBuf::from(s)
}

fn parse_list<T: FromStr>(raw: &str, what: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Usage(format!("{what}: {s:?} is not a valid entry")))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DbCodes {
    /// `sgn(Pᵀx)` of the training features.
    Reencode,
    /// The codes learned during training.
    Hf,
}

impl FromStr for DbCodes {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <Self as clap::ValueEnum>::from_str(s, true)
    }
}

impl std::fmt::Display for DbCodes {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DbCodes::Reencode => "reencode",
            DbCodes::Hf => "hf",
        })
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 50)]
    dim: usize,
    #[arg(long, default_value_t = 200)]
    per_class: usize,
    #[arg(long, default_value_t = 0.3)]
    spread: f64,
    #[arg(long, default_value_t = 3.0)]
    center_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hold out this fraction as a stratified query set.
    #[arg(long)]
    query_fraction: Option<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn gen(a: GenArgs) -> Result<()> {
    let spec = SyntheticSpec {
        num_classes: a.classes,
        dim: a.dim,
        per_class: a.per_class,
        cluster_spread: a.spread,
        center_scale: a.center_scale,
        seed: a.seed,
    };
    let ds = gen_synthetic(&spec)?;
    let mut r = Resolver::default();
    for (k, v) in [
        ("classes", a.classes.to_string()),
        ("dim", a.dim.to_string()),
        ("per_class", a.per_class.to_string()),
        ("spread", a.spread.to_string()),
        ("center_scale", a.center_scale.to_string()),
        ("seed", a.seed.to_string()),
    ] {
        r.note(k, v);
    }
    let mut out = Outputs::new();
    let mut put = |name: &str, ds: &Dataset| -> Result<()> {
        out.add(a.out_dir.join(format!("{name}features.mlrh")), encode_matrix(ds.features(), DType::F32)?);
        out.add(a.out_dir.join(format!("{name}labels.mlrh")), encode_matrix(ds.labels(), DType::I8)?);
        Ok(())
    };
    match a.query_fraction {
        Some(f) => {
            r.note("query_fraction", f);
            let (db, query) = split(&ds, f, a.seed)?;
            put("train_", &db)?;
            put("query_", &query)?;
        }
        None => put("", &ds)?,
    }
    std::fs::create_dir_all(&a.out_dir)?;
    out.commit(&r, "gen")
}

#[derive(Debug, Default, Args)]
pub struct InputArgs {
    /// Feature matrix file (d×n).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Label matrix file (c×n, ±1).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// CSV features, one sample per line.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Class ids matching `--csv`, one per line.
    #[arg(long)]
    class_ids: Option<PathBuf>,
}

fn load_features(r: &mut Resolver, a: &InputArgs) -> Result<DenseMatrix> {
    let features = r.path("features", a.features.clone())?;
    let csv = r.path("csv", a.csv.clone())?;
    match (features, csv) {
        (Some(p), None) => load_matrix(&p),
        (None, Some(p)) => load_csv_features(&p),
        (Some(_), Some(_)) => Err(Error::Usage("give either --features or --csv, not both".into())),
        (None, None) => Err(Error::Usage("missing --features or --csv".into())),
    }
}

fn load_training_set(r: &mut Resolver, a: &InputArgs) -> Result<Dataset> {
    let v = load_features(r, a)?;
    let labels = r.path("labels", a.labels.clone())?;
    let ids = r.path("class_ids", a.class_ids.clone())?;
    let y = match (labels, ids) {
        (Some(p), None) => load_labels(&p)?,
        (None, Some(p)) => {
            let ids = load_class_ids(&p)?;
            let c = ids.iter().max().map_or(0, |m| m + 1);
            one_hot_pm(&ids, c).map_err(|e| e.context(p.display()))?
        }
        (Some(_), Some(_)) => return Err(Error::Usage("give either --labels or --class-ids, not both".into())),
        (None, None) => return Err(Error::Usage("missing --labels or --class-ids".into())),
    };
    Dataset::new(v, y).map_err(|e| match e {
        Error::Usage(m) => Error::Data(m),
        other => other,
    })
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `key = value` config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    hyper: HyperFlags,
    /// Number of RBF anchors; 0 trains on raw features.
    #[arg(long)]
    rbf_m: Option<usize>,
    /// Which codes to write with `--codes`.
    #[arg(long)]
    db_codes: Option<DbCodes>,
    /// Output model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Objective trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Database codes of the training set.
    #[arg(long)]
    codes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoostArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// Ensemble size.
    #[arg(long)]
    runs: Option<usize>,
    /// Bit provenance CSV.
    #[arg(long)]
    provenance: Option<PathBuf>,
}

struct Prepared {
    resolver: Resolver,
    hp: Hyperparams,
    ds: Dataset,
    rbf: Option<RbfMap>,
    /// Training inputs after the optional feature map.
    v: DenseMatrix,
    db_codes: DbCodes,
    model: PathBuf,
    trace: Option<PathBuf>,
    codes: Option<PathBuf>,
}

fn prepare(a: &TrainArgs, extra: impl FnOnce(&mut Resolver) -> Result<()>) -> Result<Prepared> {
    let mut r = Resolver::new(a.config.as_deref())?;
    let hp = r.hyperparams(&a.hyper)?;
    let rbf_m = r.value("rbf_m", a.rbf_m, 0usize)?;
    let db_codes = r.value("db_codes", a.db_codes, DbCodes::Reencode)?;
    let model = r
        .path("model", a.model.clone())?
        .ok_or_else(|| Error::Usage("missing --model".into()))?;
    let trace = r.path("trace", a.trace.clone())?;
    let codes = r.path("codes", a.codes.clone())?;
    extra(&mut r)?;
    let ds = load_training_set(&mut r, &a.input)?;
    let rbf = if rbf_m > 0 { Some(fit_rbf(ds.features(), rbf_m, hp.seed)?) } else { None };
    let v = match &rbf {
        Some(map) => map.apply(ds.features())?,
        None => ds.features().clone(),
    };
    Ok(Prepared {
        resolver: r,
        hp,
        ds,
        rbf,
        v,
        db_codes,
        model,
        trace,
        codes,
    })
}

fn trace_csv(rows: impl IntoIterator<Item = (Option<usize>, Vec<f64>)>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header_done = false;
    for (run, trace) in rows {
        if !header_done {
            match run {
                Some(_) => w.write_record(["run", "iteration", "objective"]),
                None => w.write_record(["iteration", "objective"]),
            }
            .map_err(csv_err)?;
            header_done = true;
        }
        for (i, obj) in trace.iter().enumerate() {
            let mut rec = Vec::with_capacity(3);
            if let Some(t) = run {
                rec.push(t.to_string());
            }
            rec.push(i.to_string());
            rec.push(format!("{obj:.12e}"));
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| Error::Data(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

fn stage_common(
    out: &mut Outputs,
    p: &Prepared,
    model: &TrainedModel,
    learned_h: &DenseMatrix,
    trace: Vec<u8>,
) -> Result<()> {
    out.add(p.model.clone(), encode_model(model)?);
    if let Some(path) = &p.trace {
        out.add(path.clone(), trace);
    }
    if let Some(path) = &p.codes {
        let h = match p.db_codes {
            DbCodes::Reencode => model.encode(p.ds.features())?,
            DbCodes::Hf => learned_h.clone(),
        };
        out.add(path.clone(), pack(&h)?.to_bytes());
    }
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let p = prepare(&a, |_| Ok(()))?;
    let (m, state, report) = mlrh::trainer::train(&p.v, p.ds.labels(), &p.hp)?;
    let model = TrainedModel::new(m.p, p.rbf.clone(), p.hp.clone())?;
    let mut out = Outputs::new();
    let trace = trace_csv([(None, report.objective_trace.clone())])?;
    stage_common(&mut out, &p, &model, &state.h, trace)?;
    eprintln!(
        "trained {} bits on {} samples: {} iterations, objective {:.6e}",
        p.hp.bits,
        p.ds.len(),
        report.iterations_run,
        report.objective_trace.last().copied().unwrap_or(f64::NAN)
    );
    out.commit(&p.resolver, "train")
}

pub fn boost(a: BoostArgs) -> Result<()> {
    let mut runs = DEFAULT_RUNS;
    let mut provenance = None;
    let p = prepare(&a.train, |r| {
        runs = r.value("runs", a.runs, DEFAULT_RUNS)?;
        provenance = r.path("provenance", a.provenance.clone())?;
        if runs == 0 {
            return Err(Error::Usage("--runs must be at least 1".into()));
        }
        Ok(())
    })?;
    let (result, ensemble) = boost_train(&p.v, p.ds.labels(), &p.hp, runs)?;
    let model = finalize_model(&result, p.rbf.clone(), &p.hp)?;
    let mut out = Outputs::new();
    let trace = trace_csv(
        ensemble
            .runs
            .iter()
            .enumerate()
            .map(|(t, r)| (Some(t), r.report.objective_trace.clone())),
    )?;
    stage_common(&mut out, &p, &model, &result.h_f, trace)?;
    if let Some(path) = provenance {
        out.add(path, result.provenance_csv().into_bytes());
    }
    eprintln!("boosted {} bits from {} runs on {} samples", p.hp.bits, runs, p.ds.len());
    out.commit(&p.resolver, "boost")
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    /// Output codes file.
    #[arg(long)]
    out: PathBuf,
}

pub fn encode(a: EncodeArgs) -> Result<()> {
    let mut r = Resolver::default();
    r.note("model", a.model.display());
    let model = load_model(&a.model)?;
    let x = load_features(&mut r, &a.input)?;
    if x.rows() != model.input_dim() {
        return Err(Error::Data(format!(
            "features have dimension {}, the model expects {}",
            x.rows(),
            model.input_dim()
        )));
    }
    let codes = pack(&model.encode(&x)?)?;
    let mut out = Outputs::new();
    out.add(a.out, codes.to_bytes());
    out.commit(&r, "encode")
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Database codes file.
    #[arg(long)]
    db: PathBuf,
    /// Query codes file.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Output CSV of `query,rank,db_index,distance`.
    #[arg(long)]
    out: PathBuf,
}

pub fn search(a: SearchArgs) -> Result<()> {
    let db = PackedCodes::load(&a.db)?;
    let queries = PackedCodes::load(&a.queries)?;
    if db.bits() != queries.bits() {
        return Err(Error::Data(format!(
            "database codes have {} bits, queries have {}",
            db.bits(),
            queries.bits()
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["query", "rank", "db_index", "distance"]).map_err(csv_err)?;
    for q in 0..queries.len() {
        for (rank, nb) in knn(&db, queries.code(q), a.k)?.iter().enumerate() {
            w.serialize((q, rank, nb.index, nb.distance)).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    let mut r = Resolver::default();
    r.note("db", a.db.display());
    r.note("queries", a.queries.display());
    r.note("k", a.k);
    let mut out = Outputs::new();
    out.add(a.out, bytes);
    out.commit(&r, "search")
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Database codes file.
    #[arg(long)]
    db: PathBuf,
    /// Query codes file.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    db_labels: PathBuf,
    #[arg(long)]
    query_labels: PathBuf,
    /// Truncate rankings before computing AP.
    #[arg(long)]
    map_cutoff: Option<usize>,
    /// Comma-separated k values for precision@k.
    #[arg(long)]
    precision_at: Option<String>,
    /// Method tag for the metrics CSV.
    #[arg(long, default_value = "mlrh")]
    method: String,
    /// Seed tag for the metrics CSV.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output metrics CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let mut r = Resolver::new(a.config.as_deref())?;
    let cutoff = r.optional("map_cutoff", a.map_cutoff)?;
    let ks: Vec<usize> = match &a.precision_at {
        Some(s) => parse_list(s, "--precision-at")?,
        None => Vec::new(),
    };
    r.note("method", &a.method);
    r.note("seed", a.seed);
    let db = PackedCodes::load(&a.db)?;
    let queries = PackedCodes::load(&a.queries)?;
    let db_labels = load_labels(&a.db_labels)?;
    let query_labels = load_labels(&a.query_labels)?;
    if db_labels.cols() != db.len() || query_labels.cols() != queries.len() {
        return Err(Error::Data(format!(
            "label counts ({}, {}) do not match code counts ({}, {})",
            db_labels.cols(),
            query_labels.cols(),
            db.len(),
            queries.len()
        )));
    }
    if db.bits() != queries.bits() {
        return Err(Error::Data(format!(
            "database codes have {} bits, queries have {}",
            db.bits(),
            queries.bits()
        )));
    }
    let oracle = RelevanceOracle::new(&query_labels, &db_labels).map_err(|e| Error::Data(e.to_string()))?;
    let rankings = rank_indices(&db, &queries)?;
    let row = |metric: String, value: f64| MetricRow {
        metric,
        bits: db.bits(),
        method: a.method.clone(),
        seed: a.seed,
        value,
    };
    let map_name = cutoff.map_or("map".to_string(), |c| format!("map@{c}"));
    let mut rows = vec![row(map_name, mean_ap(&rankings, &oracle, cutoff)?)];
    for k in ks {
        rows.push(row(format!("precision@{k}"), precision_at_k(&rankings, &oracle, k)?));
    }
    print!("{}", metrics_table(&rows));
    if let Some(path) = a.out {
        let mut out = Outputs::new();
        out.add(path, metrics_csv(&rows).into_bytes());
        out.commit(&r, "eval")?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated training-set sizes.
    #[arg(long, default_value = "2000,4000,8000")]
    n_list: String,
    /// Comma-separated code lengths.
    #[arg(long, default_value = "16,32,64")]
    bits_list: String,
    #[arg(long, default_value_t = 50)]
    dim: usize,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 10)]
    max_outer: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Queries used for the scan-throughput measurement.
    #[arg(long, default_value_t = 100)]
    scan_queries: usize,
    /// Output CSV of `metric,n,bits,value`.
    #[arg(long)]
    out: PathBuf,
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let cfg = BenchConfig {
        n_list: parse_list(&a.n_list, "--n-list")?,
        bits_list: parse_list(&a.bits_list, "--bits-list")?,
        dim: a.dim,
        classes: a.classes,
        reps: a.reps,
        hyperparams: Hyperparams {
            max_outer: a.max_outer,
            seed: a.seed,
            ..Hyperparams::default()
        },
        data_seed: a.seed,
    };
    cfg.hyperparams.validate()?;
    let report = scaling_sweep(&cfg)?;
    let mut csv = report.to_csv();

    let n_min = *cfg.n_list.iter().min().unwrap();
    let n_max = *cfg.n_list.iter().max().unwrap();
    let ds = gen_synthetic(&SyntheticSpec {
        num_classes: cfg.classes,
        dim: cfg.dim,
        per_class: n_min / cfg.classes,
        seed: cfg.data_seed,
        ..SyntheticSpec::default()
    })?;
    for &bits in &cfg.bits_list {
        let hp = Hyperparams { bits, ..cfg.hyperparams.clone() };
        let (_, state, _) = train_with(ds.features(), ds.labels(), &hp, TrainControl::default())?;
        writeln!(csv, "inter_bit_correlation,{},{bits},{:.6}", ds.len(), inter_bit_correlation(&state.h)).unwrap();
        let db = random_codes(bits, n_max, a.seed)?;
        let q = random_codes(bits, a.scan_queries.max(1), a.seed.wrapping_add(1))?;
        writeln!(csv, "scan_codes_per_second,{n_max},{bits},{:.1}", scan_throughput(&db, &q)?).unwrap();
    }
    print!("{csv}");

    let mut r = Resolver::default();
    for (k, v) in [
        ("n_list", a.n_list.clone()),
        ("bits_list", a.bits_list.clone()),
        ("dim", a.dim.to_string()),
        ("classes", a.classes.to_string()),
        ("reps", a.reps.to_string()),
        ("max_outer", a.max_outer.to_string()),
        ("seed", a.seed.to_string()),
        ("scan_queries", a.scan_queries.to_string()),
    ] {
        r.note(k, v);
    }
    let mut out = Outputs::new();
    out.add(a.out, csv.into_bytes());
    out.commit(&r, "bench")
}
