//! The augmentation-ratio sweep: a real-only baseline, a synthetic-only
//! baseline and one `RFEs + k × GFEs` model per `k`, each trained from
//! scratch and scored on its own test split and on held-out corpora.

mod select;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use select::{detect_forgetting_threshold, mean_by_k, select_best_k, BestK, DEFAULT_FORGETTING_MARGIN};

use crate::archive;
use crate::data::{
    load_preprocessed, mix, split_by_identity, write_manifest, FaceDataset, PreprocessCache, PreprocessConfig,
    SplitSpec,
};
use crate::error::{Error, Result};
use crate::eval::{cross_database_evaluate, evaluate, TrainingReference};
use crate::model::{train_classifier, ClassifierSpec, FitConfig};
use crate::plots;

/// A held-out corpus used for cross-database scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeldoutSpec {
    pub tag: String,
    pub manifest: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    /// Strictly increasing, nonnegative. `k = 0` is the real-only baseline,
    /// which is run whether or not it is listed.
    pub k_values: Vec<i64>,
    pub real_manifest: PathBuf,
    pub generated_pool_manifest: PathBuf,
    pub split: SplitSpec,
    pub fit: FitConfig,
    pub classifier: ClassifierSpec,
    pub preprocess: PreprocessConfig,
    pub heldout: Vec<HeldoutSpec>,
    /// Classifier seeds; each seed repeats the whole sweep. The seed is the
    /// same for every `k`, so only the data composition varies.
    pub seeds: Vec<u64>,
    pub synthetic_baseline: bool,
    pub workers: usize,
    pub forgetting_margin: f64,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.k_values.iter().any(|&k| k < 0) {
            return Err(Error::InvalidConfig(format!("k values must be nonnegative, got {:?}", self.k_values)));
        }
        if self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "k values must be strictly increasing, got {:?}",
                self.k_values
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("sweep needs at least one seed".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("sweep.workers must be positive".into()));
        }
        if !(self.forgetting_margin >= 0.0 && self.forgetting_margin.is_finite()) {
            return Err(Error::InvalidConfig("sweep.forgetting_margin must be nonnegative".into()));
        }
        if self.preprocess.output_size != self.classifier.input_size {
            return Err(Error::InvalidConfig(format!(
                "preprocess.output_size {} differs from classifier.input_size {}",
                self.preprocess.output_size, self.classifier.input_size
            )));
        }
        let mut tags = BTreeSet::new();
        for h in &self.heldout {
            if h.tag.is_empty() || !h.tag.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(Error::InvalidConfig(format!(
                    "held-out tag {:?} must be nonempty and use [A-Za-z0-9_-]",
                    h.tag
                )));
            }
            if !tags.insert(&h.tag) {
                return Err(Error::InvalidConfig(format!("duplicate held-out tag {:?}", h.tag)));
            }
        }
        self.split.validate()?;
        self.fit.validate()?;
        self.classifier.validate()?;
        self.preprocess.validate()
    }

    /// Sorted `k` values with the real-only baseline included.
    pub fn ks(&self) -> Vec<usize> {
        let mut ks: BTreeSet<usize> = self.k_values.iter().map(|&k| k as usize).collect();
        ks.insert(0);
        ks.into_iter().collect()
    }

    pub fn max_k(&self) -> usize {
        self.ks().last().copied().unwrap_or(0)
    }

    /// Digest of everything that affects row contents (not `workers`).
    pub fn digest(&self) -> String {
        archive::digest(&ExperimentPlan {
            workers: 0,
            ..self.clone()
        })
    }

    pub fn heldout_tags(&self) -> Vec<String> {
        self.heldout.iter().map(|h| h.tag.clone()).collect()
    }
}

/// Which data a sweep point trains on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    /// Real identities plus `k` generated units; `k = 0` is real only.
    Mixed(usize),
    SyntheticOnly,
}

impl Composition {
    pub fn k(self) -> Option<usize> {
        match self {
            Composition::Mixed(k) => Some(k),
            Composition::SyntheticOnly => None,
        }
    }

    /// `RFEs`, `RFEs + k × GFEs` or `GFEs`.
    pub fn label(self) -> String {
        match self {
            Composition::Mixed(0) => "RFEs".into(),
            Composition::Mixed(k) => format!("RFEs + {k} × GFEs"),
            Composition::SyntheticOnly => "GFEs".into(),
        }
    }

    pub fn model_tag(self, seed: u64) -> String {
        match self {
            Composition::Mixed(0) => format!("real-s{seed}"),
            Composition::Mixed(k) => format!("mix-k{k}-s{seed}"),
            Composition::SyntheticOnly => format!("synthetic-s{seed}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub composition: Composition,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Held-out tag to accuracy.
    pub cross_db_accuracy: BTreeMap<String, f64>,
    pub model_tag: String,
    pub seed: u64,
    pub train_identities: usize,
    pub train_images: usize,
    /// Generated identities consumed by this row, over all splits.
    pub generated_identities: Vec<String>,
}

impl SweepRow {
    pub fn k(&self) -> Option<usize> {
        self.composition.k()
    }
}

/// On-disk form of a finished row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct PersistedRow {
    plan_digest: String,
    row: SweepRow,
}

/// Preprocessed inputs shared by every sweep point.
#[derive(Clone, Debug)]
pub struct SweepData {
    pub real: FaceDataset,
    pub pool: FaceDataset,
    pub heldout: Vec<(String, FaceDataset)>,
}

impl SweepData {
    /// Loads every manifest at classifier resolution, through `cache` when
    /// given.
    pub fn load(plan: &ExperimentPlan, cache: Option<&PreprocessCache>) -> Result<Self> {
        let real = load_preprocessed(&plan.real_manifest, &plan.preprocess, cache)?;
        let pool = load_preprocessed(&plan.generated_pool_manifest, &plan.preprocess, cache)?;
        let mut heldout = Vec::new();
        for h in &plan.heldout {
            heldout.push((h.tag.clone(), load_preprocessed(&h.manifest, &plan.preprocess, cache)?));
        }
        Ok(SweepData { real, pool, heldout })
    }
}

/// Train/val/test parts of one sweep point.
#[derive(Clone, Debug)]
pub struct PointData {
    pub train: FaceDataset,
    pub val: FaceDataset,
    pub test: FaceDataset,
}

impl PointData {
    fn generated_identities(&self) -> Vec<String> {
        let mut out = Vec::new();
        for part in [&self.train, &self.val, &self.test] {
            for id in part.identities() {
                if part.records_of(id).iter().any(|&i| part.records()[i].provenance == crate::data::Provenance::Generated)
                {
                    out.push(id.clone());
                }
            }
        }
        out
    }
}

/// Builds the datasets of every composition from one real split and one
/// partition of the generated pool.
///
/// A generated unit holds as many identities as the real corpus, cut into
/// train/val/test with the real split's identity counts. Unit `u` is pool
/// identities `[u·n, (u+1)·n)` in pool order, so `k` units are a prefix of
/// the pool and larger `k` extends smaller `k`.
#[derive(Clone, Debug)]
pub struct SweepLayout {
    real: (FaceDataset, FaceDataset, FaceDataset),
    generated: (FaceDataset, FaceDataset, FaceDataset),
}

impl SweepLayout {
    pub fn new(data: &SweepData, split: &SplitSpec, max_units: usize) -> Result<Self> {
        if data.real.is_empty() {
            return Err(Error::EmptyDataset("real corpus".into()));
        }
        let real = split_by_identity(&data.real, split)?;
        let (nt, nv, ns) = (real.0.identity_count(), real.1.identity_count(), real.2.identity_count());
        if nt == 0 || ns == 0 {
            return Err(Error::InfeasibleSplit(format!(
                "sweep needs nonempty train and test splits, got {nt} train / {ns} test identities"
            )));
        }
        let n = nt + nv + ns;
        let needed = n * max_units;
        if data.pool.identity_count() < needed {
            return Err(Error::PoolExhausted {
                needed,
                available: data.pool.identity_count(),
            });
        }
        let mut parts: [BTreeSet<&str>; 3] = Default::default();
        for (j, id) in data.pool.identities()[..needed].iter().enumerate() {
            let o = j % n;
            let slot = if o < nt {
                0
            } else if o < nt + nv {
                1
            } else {
                2
            };
            if !data.real.records_of(id).is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "generated identity {id:?} also appears in the real corpus"
                )));
            }
            parts[slot].insert(id);
        }
        let [t, v, s] = parts;
        Ok(SweepLayout {
            real,
            generated: (data.pool.subset(&t), data.pool.subset(&v), data.pool.subset(&s)),
        })
    }

    pub fn real_split(&self) -> (&FaceDataset, &FaceDataset, &FaceDataset) {
        (&self.real.0, &self.real.1, &self.real.2)
    }

    pub fn point(&self, composition: Composition) -> Result<PointData> {
        let (rt, rv, rs) = &self.real;
        let (gt, gv, gs) = &self.generated;
        match composition {
            Composition::Mixed(k) => Ok(PointData {
                train: mix(rt, k, gt)?,
                val: mix(rv, k, gv)?,
                test: mix(rs, k, gs)?,
            }),
            Composition::SyntheticOnly => {
                let first = |pool: &FaceDataset, n: usize| -> Result<FaceDataset> {
                    if pool.identity_count() < n {
                        return Err(Error::PoolExhausted {
                            needed: n,
                            available: pool.identity_count(),
                        });
                    }
                    Ok(pool.subset(&pool.identities()[..n].iter().map(String::as_str).collect()))
                };
                Ok(PointData {
                    train: first(gt, rt.identity_count())?,
                    val: first(gv, rv.identity_count())?,
                    test: first(gs, rs.identity_count())?,
                })
            }
        }
    }
}

/// Directory layout of a sweep's results.
#[derive(Clone, Debug)]
pub struct SweepPaths {
    pub root: PathBuf,
}

impl SweepPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        SweepPaths { root: root.into() }
    }

    pub fn row(&self, tag: &str) -> PathBuf {
        self.root.join("rows").join(format!("{tag}.json"))
    }

    pub fn manifests(&self, tag: &str) -> PathBuf {
        self.root.join("manifests").join(tag)
    }

    pub fn model(&self, tag: &str) -> PathBuf {
        self.root.join("models").join(format!("{tag}.ckpt"))
    }

    pub fn training_log(&self, tag: &str) -> PathBuf {
        self.root.join("logs").join(format!("{tag}.csv"))
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn csv(&self) -> PathBuf {
        self.root.join("sweep.csv")
    }
}

fn training_references(point: &PointData) -> Vec<TrainingReference> {
    [&point.train, &point.val, &point.test]
        .into_iter()
        .map(TrainingReference::from_dataset)
        .collect()
}

/// Trains and scores one sweep point, persisting its manifests, checkpoint,
/// training log, reports and finally the row itself.
pub fn run_point(
    plan: &ExperimentPlan,
    data: &SweepData,
    layout: &SweepLayout,
    composition: Composition,
    seed: u64,
    paths: &SweepPaths,
) -> Result<SweepRow> {
    let tag = composition.model_tag(seed);
    let point = layout.point(composition)?;
    let mdir = paths.manifests(&tag);
    write_manifest(&mdir.join("train.csv"), &point.train)?;
    write_manifest(&mdir.join("val.csv"), &point.val)?;
    write_manifest(&mdir.join("test.csv"), &point.test)?;

    log::info!(
        "{tag}: training on {} identities / {} images",
        point.train.identity_count(),
        point.train.len()
    );
    let fit = FitConfig { seed, ..plan.fit.clone() };
    let (model, training) = train_classifier(&point.train, &point.val, &plan.classifier, &fit)?;
    model.save(
        &paths.model(&tag),
        serde_json::json!({ "composition": composition, "fit": fit, "plan_digest": plan.digest() }),
    )?;
    training.write_csv(&paths.training_log(&tag))?;

    let reports = paths.reports();
    let train_report = evaluate(&model, &point.train, &tag, "train")?;
    let test_report = evaluate(&model, &point.test, &tag, "test")?;
    test_report.write(&reports)?;
    let refs = training_references(&point);
    let mut cross = BTreeMap::new();
    for (htag, ds) in &data.heldout {
        let r = cross_database_evaluate(&model, ds, &refs, &tag, htag)?;
        r.write(&reports)?;
        cross.insert(htag.clone(), r.accuracy);
    }
    let row = SweepRow {
        composition,
        train_accuracy: train_report.accuracy,
        test_accuracy: test_report.accuracy,
        cross_db_accuracy: cross,
        model_tag: tag.clone(),
        seed,
        train_identities: point.train.identity_count(),
        train_images: point.train.len(),
        generated_identities: point.generated_identities(),
    };
    let persisted = PersistedRow {
        plan_digest: plan.digest(),
        row: row.clone(),
    };
    archive::write_atomic(&paths.row(&tag), (serde_json::to_string_pretty(&persisted)? + "\n").as_bytes())?;
    Ok(row)
}

/// Row previously persisted for `tag` under the same plan, if any.
pub fn load_row(paths: &SweepPaths, plan: &ExperimentPlan, tag: &str) -> Option<SweepRow> {
    let text = std::fs::read_to_string(paths.row(tag)).ok()?;
    let p: PersistedRow = serde_json::from_str(&text).ok()?;
    (p.plan_digest == plan.digest()).then_some(p.row)
}

/// Points of the sweep in output order: per seed, `k` ascending, then the
/// synthetic baseline.
pub fn sweep_points(plan: &ExperimentPlan) -> Vec<(Composition, u64)> {
    let mut out = Vec::new();
    for &seed in &plan.seeds {
        for k in plan.ks() {
            out.push((Composition::Mixed(k), seed));
        }
        if plan.synthetic_baseline {
            out.push((Composition::SyntheticOnly, seed));
        }
    }
    out
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutcome {
    /// Finished rows in [`sweep_points`] order.
    pub rows: Vec<SweepRow>,
    /// `(model_tag, error)` of points that failed.
    pub failures: Vec<(String, String)>,
    /// Rows reused from an earlier run.
    pub resumed: usize,
}

impl SweepOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs every sweep point not already persisted, on up to `plan.workers`
/// threads. A failing point is recorded and does not stop the others.
pub fn run_sweep(plan: &ExperimentPlan, data: &SweepData, paths: &SweepPaths) -> Result<SweepOutcome> {
    plan.validate()?;
    let layout = SweepLayout::new(data, &plan.split, plan.max_k().max(usize::from(plan.synthetic_baseline)))?;
    let points = sweep_points(plan);
    let results: Mutex<Vec<Option<std::result::Result<(SweepRow, bool), String>>>> =
        Mutex::new(vec![None; points.len()]);
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(&(composition, seed)) = points.get(i) else {
            break;
        };
        let tag = composition.model_tag(seed);
        let r = match load_row(paths, plan, &tag) {
            Some(row) => {
                log::info!("{tag}: reusing persisted row");
                Ok((row, true))
            }
            None => run_point(plan, data, &layout, composition, seed, paths)
                .map(|row| (row, false))
                .map_err(|e| e.to_string()),
        };
        if let Err(e) = &r {
            log::error!("{tag}: {e}");
        }
        results.lock().expect("results lock")[i] = Some(r);
    };
    std::thread::scope(|s| {
        for _ in 0..plan.workers.min(points.len()).max(1) {
            s.spawn(work);
        }
    });
    let mut out = SweepOutcome::default();
    for ((composition, seed), r) in points.iter().zip(results.into_inner().expect("results lock")) {
        match r {
            Some(Ok((row, resumed))) => {
                out.resumed += usize::from(resumed);
                out.rows.push(row);
            }
            Some(Err(e)) => out.failures.push((composition.model_tag(*seed), e)),
            None => out.failures.push((composition.model_tag(*seed), "not run".into())),
        }
    }
    Ok(out)
}

/// Runs only the real-only baseline.
pub fn run_experiment_real(plan: &ExperimentPlan, data: &SweepData, paths: &SweepPaths, seed: u64) -> Result<SweepRow> {
    plan.validate()?;
    let layout = SweepLayout::new(data, &plan.split, 0)?;
    run_point(plan, data, &layout, Composition::Mixed(0), seed, paths)
}

/// Runs only the synthetic-only baseline.
pub fn run_experiment_synthetic(
    plan: &ExperimentPlan,
    data: &SweepData,
    paths: &SweepPaths,
    seed: u64,
) -> Result<SweepRow> {
    plan.validate()?;
    let layout = SweepLayout::new(data, &plan.split, 1)?;
    run_point(plan, data, &layout, Composition::SyntheticOnly, seed, paths)
}

fn fmt_acc(v: f64) -> String {
    format!("{v:.6}")
}

/// Sweep CSV: `k,composition,train_acc,test_acc,{heldout}_acc...,model_tag,seed`.
/// The synthetic baseline has an empty `k`.
pub fn sweep_csv(rows: &[SweepRow], heldout_tags: &[String]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header = vec!["k".to_string(), "composition".into(), "train_acc".into(), "test_acc".into()];
    header.extend(heldout_tags.iter().map(|t| format!("{t}_acc")));
    header.extend(["model_tag".to_string(), "seed".into()]);
    let csv_err = |e: csv::Error| Error::InvalidConfig(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.k().map(|k| k.to_string()).unwrap_or_default(),
            r.composition.label(),
            fmt_acc(r.train_accuracy),
            fmt_acc(r.test_accuracy),
        ];
        for t in heldout_tags {
            rec.push(r.cross_db_accuracy.get(t).map(|&v| fmt_acc(v)).unwrap_or_default());
        }
        rec.push(r.model_tag.clone());
        rec.push(r.seed.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 csv"))
}

/// Mean accuracy per composition (over seeds), in plot order: synthetic
/// baseline first, then `k` ascending.
fn composition_means(rows: &[SweepRow], get: impl Fn(&SweepRow) -> Option<f64>) -> BTreeMap<(u8, usize), (String, f64)> {
    let mut acc: BTreeMap<(u8, usize), (String, Vec<(u64, f64)>)> = BTreeMap::new();
    for r in rows {
        let key = match r.composition {
            Composition::SyntheticOnly => (0, 0),
            Composition::Mixed(k) => (1, k),
        };
        let e = acc.entry(key).or_insert_with(|| (r.composition.label(), Vec::new()));
        if let Some(v) = get(r) {
            e.1.push((r.seed, v));
        }
    }
    acc.into_iter()
        .map(|(key, (label, mut v))| {
            v.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let mean = if v.is_empty() {
                f64::NAN
            } else {
                v.iter().map(|x| x.1).sum::<f64>() / v.len() as f64
            };
            (key, (label, mean))
        })
        .collect()
}

/// Accuracy-vs-composition line chart.
pub fn composition_plot(rows: &[SweepRow], heldout_tags: &[String]) -> String {
    let train = composition_means(rows, |r| Some(r.train_accuracy));
    let labels: Vec<String> = train.values().map(|(l, _)| l.clone()).collect();
    let to_series = |m: BTreeMap<(u8, usize), (String, f64)>| -> Vec<Option<f64>> {
        m.values().map(|(_, v)| v.is_finite().then_some(*v)).collect()
    };
    let mut series = vec![
        ("train".to_string(), to_series(train)),
        ("test".to_string(), to_series(composition_means(rows, |r| Some(r.test_accuracy)))),
    ];
    for t in heldout_tags {
        series.push((
            format!("{t} (cross-database)"),
            to_series(composition_means(rows, |r| r.cross_db_accuracy.get(t).copied())),
        ));
    }
    plots::line_chart("Accuracy vs. dataset composition", &labels, &series, "accuracy")
}

/// Best `k` and forgetting threshold per held-out tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub heldout: String,
    pub best: BestK,
    pub forgetting_threshold: Option<usize>,
    pub margin: f64,
}

/// Writes the sweep CSV, the composition plot and `summary.json` into
/// `paths.root`. Per-model heatmaps and metric charts are written by
/// [`run_point`] under `reports/`.
pub fn emit_outputs(
    rows: &[SweepRow],
    heldout_tags: &[String],
    margin: f64,
    paths: &SweepPaths,
) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig("no sweep rows to emit".into()));
    }
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let p = paths.root.join(name);
        archive::write_atomic(&p, body.as_bytes())?;
        written.push(p);
        Ok(())
    };
    put("sweep.csv", sweep_csv(rows, heldout_tags)?)?;
    put("accuracy_vs_composition.svg", composition_plot(rows, heldout_tags))?;
    let mut summary = Vec::new();
    for t in heldout_tags {
        if rows.iter().any(|r| r.k().is_some()) {
            summary.push(SweepSummary {
                heldout: t.clone(),
                best: select_best_k(rows, t)?,
                forgetting_threshold: detect_forgetting_threshold(rows, t, margin),
                margin,
            });
        }
    }
    put("summary.json", serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(written)
}

/// Persisted rows of `plan` under `paths`, in [`sweep_points`] order.
/// Rows left by other plans are ignored.
pub fn read_rows(paths: &SweepPaths, plan: &ExperimentPlan) -> Result<Vec<SweepRow>> {
    let dir = paths.root.join("rows");
    if !dir.is_dir() {
        return Err(Error::InvalidConfig(format!("no sweep results under {}", paths.root.display())));
    }
    Ok(sweep_points(plan)
        .into_iter()
        .filter_map(|(c, seed)| load_row(paths, plan, &c.model_tag(seed)))
        .collect())
}
