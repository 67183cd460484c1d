//! Cross-validated evaluation of oversampling techniques and report output.
//!
//! For every base seed the data is split into stratified folds. Each training
//! portion is oversampled on its own, every classifier is trained on the
//! result, and the untouched test fold is scored for balanced accuracy and
//! the three disparities. Fold outcomes whose metrics are undefined are
//! skipped and logged, never replaced by zeros.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{predict, train, ClassifierKind, Hyperparams};
use crate::dataset::{imbalance_degrees, partition_clusters, ClusterKey, Dataset, DatasetSchema};
use crate::error::{Error, Result};
use crate::metrics::{balanced_accuracy, confusion, equal_opportunity, equalized_odds, statistical_parity};
use crate::oversample::{oversample, Augmented, OversamplerConfig, Technique};

pub const PLAN_VERSION: u32 = 1;
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits instances into `folds` disjoint test sets.
///
/// Strata are the class × group clusters when every non-empty cluster has at
/// least `folds` members, otherwise the two classes. Each stratum is shuffled
/// and dealt round-robin, continuing from where the previous stratum stopped,
/// so per-stratum and total fold sizes differ by at most one.
pub fn stratified_folds(ds: &Dataset, folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::Parameter(format!("need at least 2 folds, got {folds}")));
    }
    if ds.n() < folds {
        return Err(Error::InsufficientData(format!(
            "{} instances cannot fill {folds} folds",
            ds.n()
        )));
    }
    let ci = partition_clusters(ds);
    let by_cluster = ci.iter().all(|(_, v)| v.is_empty() || v.len() >= folds);
    let strata: Vec<Vec<usize>> = if by_cluster {
        ci.iter().map(|(_, v)| v.to_vec()).collect()
    } else {
        vec![ci.class_members(0), ci.class_members(1)]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; ds.n()];
    let mut next = 0usize;
    for mut stratum in strata {
        stratum.shuffle(&mut rng);
        for i in stratum {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    let mut out = Vec::with_capacity(folds);
    for f in 0..folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..ds.n()).partition(|&i| assignment[i] == f);
        let mut classes = [false; 2];
        for &i in &train {
            classes[ds.label(i) as usize] = true;
        }
        if !(classes[0] && classes[1]) {
            return Err(Error::InsufficientData(format!(
                "training portion of fold {f} lacks a class"
            )));
        }
        out.push(Fold { train, test });
    }
    Ok(out)
}

/// What to evaluate, independent of where the data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub techniques: Vec<Technique>,
    pub classifiers: Vec<ClassifierKind>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_pin")]
    pub pin_protected: bool,
    #[serde(default)]
    pub hyperparams: Hyperparams,
}

fn default_k() -> usize {
    5
}
fn default_folds() -> usize {
    5
}
fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}
fn default_pin() -> bool {
    true
}

impl Default for ExperimentSettings {
    /// Every technique and classifier, `k = 5`, 5 folds, seeds 0..5.
    fn default() -> Self {
        ExperimentSettings {
            techniques: Technique::ALL.to_vec(),
            classifiers: ClassifierKind::ALL.to_vec(),
            k: default_k(),
            folds: default_folds(),
            seeds: default_seeds(),
            pin_protected: true,
            hyperparams: Hyperparams::default(),
        }
    }
}

impl ExperimentSettings {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Validation("folds must be at least 2".into()));
        }
        if self.techniques.is_empty() || self.classifiers.is_empty() {
            return Err(Error::Validation(
                "at least one technique and one classifier are required".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::Validation("at least one seed is required".into()));
        }
        if self.k == 0 {
            return Err(Error::Validation("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// A benchmark run read from a plan file.
///
/// Plan files are TOML. Relative paths resolve against the plan's directory.
///
/// ```toml
/// version = 1
/// dataset = "german.csv"
/// schema = "german.schema.toml"
/// output_dir = "results"
/// techniques = ["original", "smote", "fsmote", "fbsmote", "fadasyn", "heterofair"]
/// classifiers = ["lr", "svm", "nb"]
/// k = 5
/// folds = 5
/// seeds = [0, 1, 2, 3, 4]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub version: u32,
    pub dataset: PathBuf,
    pub schema: PathBuf,
    pub output_dir: PathBuf,
    #[serde(flatten)]
    pub settings: ExperimentSettings,
}

impl ExperimentPlan {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut plan: ExperimentPlan =
            toml::from_str(text).map_err(|e| Error::Validation(format!("plan file: {e}")))?;
        if plan.version != PLAN_VERSION {
            return Err(Error::Validation(format!(
                "unsupported plan version {} (expected {PLAN_VERSION})",
                plan.version
            )));
        }
        plan.settings.validate()?;
        for p in [&mut plan.dataset, &mut plan.schema, &mut plan.output_dir] {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base)
    }
}

/// Metric values of one (seed, fold) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub seed: u64,
    pub fold: usize,
    pub bacc: f64,
    pub sp: f64,
    pub e_opp: f64,
    pub e_odds: f64,
    pub sp_per_group: Vec<f64>,
    pub e_opp_per_group: Vec<f64>,
    pub e_odds_per_group: Vec<f64>,
    /// Equalized-odds gaps per group for true class 0 and true class 1.
    pub e_odds_class_gaps: [Vec<f64>; 2],
    pub synthetic: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub technique: Technique,
    pub classifier: ClassifierKind,
    pub seed: u64,
    pub fold: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMeans {
    pub bacc: f64,
    pub sp: f64,
    pub e_opp: f64,
    pub e_odds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub technique: Technique,
    pub classifier: ClassifierKind,
    /// `None` when every fold was skipped.
    pub means: Option<CellMeans>,
    pub retained: usize,
    pub skipped: usize,
    pub folds: Vec<FoldRecord>,
}

impl CellReport {
    fn from_folds(technique: Technique, classifier: ClassifierKind, folds: Vec<FoldRecord>, skipped: usize) -> Self {
        CellReport {
            technique,
            classifier,
            means: mean_of(&folds),
            retained: folds.len(),
            skipped,
            folds,
        }
    }
}

/// Arithmetic means of the fold values, in fold order.
pub fn mean_of(folds: &[FoldRecord]) -> Option<CellMeans> {
    if folds.is_empty() {
        return None;
    }
    let n = folds.len() as f64;
    let sum = |f: fn(&FoldRecord) -> f64| folds.iter().map(f).sum::<f64>() / n;
    Some(CellMeans {
        bacc: sum(|r| r.bacc),
        sp: sum(|r| r.sp),
        e_opp: sum(|r| r.e_opp),
        e_odds: sum(|r| r.e_odds),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format_version: u32,
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub settings: ExperimentSettings,
    pub cells: Vec<CellReport>,
    pub skipped: Vec<SkipRecord>,
    pub warnings: Vec<String>,
}

impl EvaluationReport {
    pub fn cell(&self, technique: Technique, classifier: ClassifierKind) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.technique == technique && c.classifier == classifier)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Oversampling seed for one (base seed, fold, technique) cell.
fn derive_seed(base: u64, fold: usize, technique: Technique) -> u64 {
    let mut z = base
        .wrapping_add((fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((technique as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03));
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Oversamples the training rows of `fold` only. Returns the augmented
/// training set and, for each of its original rows, the row index in `ds`.
pub fn oversample_training_fold(ds: &Dataset, fold: &Fold, cfg: &OversamplerConfig) -> Result<(Augmented, Vec<usize>)> {
    let train_ds = ds.subset(&fold.train);
    let aug = oversample(&train_ds, cfg)?;
    Ok((aug, fold.train.clone()))
}

type CellOutcome = std::result::Result<FoldRecord, String>;

fn score_fold(
    ds: &Dataset,
    test_idx: &[usize],
    train_set: &Dataset,
    kind: ClassifierKind,
    hp: &Hyperparams,
    seed: u64,
    fold: usize,
    synthetic: usize,
) -> Result<FoldRecord> {
    let model = train(kind, train_set.features(), train_set.d(), train_set.labels(), hp)?;
    let test = ds.subset(test_idx);
    let y_pred = predict(&model, test.features(), test.d())?;
    let y_true = test.labels();
    let groups = test.groups();
    let bacc = balanced_accuracy(&confusion(y_true, &y_pred)?)?;
    let sp = statistical_parity(&y_pred, groups, ds.m())?;
    let eo = equal_opportunity(y_true, &y_pred, groups, ds.m())?;
    let eodds = equalized_odds(y_true, &y_pred, groups, ds.m())?;
    Ok(FoldRecord {
        seed,
        fold,
        bacc,
        sp: sp.disparity,
        e_opp: eo.disparity,
        e_odds: eodds.disparity,
        sp_per_group: sp.per_group,
        e_opp_per_group: eo.per_group,
        e_odds_per_group: eodds.per_group,
        e_odds_class_gaps: eodds.class_gaps.expect("equalized odds records class gaps"),
        synthetic,
    })
}

struct TaskResult {
    // technique-major, classifier-minor
    outcomes: Vec<CellOutcome>,
    warnings: Vec<String>,
}

/// Runs the cross-validation protocol over an in-memory dataset.
pub fn evaluate(ds: &Dataset, name: &str, settings: &ExperimentSettings) -> Result<EvaluationReport> {
    settings.validate()?;
    let mut tasks = Vec::new();
    for &seed in &settings.seeds {
        for (f, fold) in stratified_folds(ds, settings.folds, seed)?.into_iter().enumerate() {
            tasks.push((seed, f, fold));
        }
    }

    let results: Vec<TaskResult> = tasks
        .par_iter()
        .map(|(seed, f, fold)| {
            let mut outcomes = Vec::new();
            let mut warnings = Vec::new();
            for &technique in &settings.techniques {
                let cfg = OversamplerConfig {
                    technique,
                    k: settings.k,
                    seed: derive_seed(*seed, *f, technique),
                    pin_protected: settings.pin_protected,
                    ..Default::default()
                };
                match oversample_training_fold(ds, fold, &cfg) {
                    Ok((aug, _)) => {
                        warnings.extend(
                            aug.batch
                                .warnings
                                .iter()
                                .map(|w| format!("seed {seed} fold {f} {}: {w}", technique.name())),
                        );
                        for &kind in &settings.classifiers {
                            outcomes.push(
                                score_fold(
                                    ds,
                                    &fold.test,
                                    &aug.dataset,
                                    kind,
                                    &settings.hyperparams,
                                    *seed,
                                    *f,
                                    aug.batch.len(),
                                )
                                .map_err(|e| e.to_string()),
                            );
                        }
                    }
                    Err(e) => {
                        outcomes.extend(settings.classifiers.iter().map(|_| Err(format!("oversampling failed: {e}"))));
                    }
                }
            }
            TaskResult { outcomes, warnings }
        })
        .collect();

    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    let n_clf = settings.classifiers.len();
    for (ti, &technique) in settings.techniques.iter().enumerate() {
        for (ci, &classifier) in settings.classifiers.iter().enumerate() {
            let mut folds = Vec::new();
            let mut skips = 0;
            for ((seed, f, _), result) in tasks.iter().zip(&results) {
                match &result.outcomes[ti * n_clf + ci] {
                    Ok(rec) => folds.push(rec.clone()),
                    Err(reason) => {
                        skips += 1;
                        skipped.push(SkipRecord {
                            technique,
                            classifier,
                            seed: *seed,
                            fold: *f,
                            reason: reason.clone(),
                        });
                    }
                }
            }
            cells.push(CellReport::from_folds(technique, classifier, folds, skips));
        }
    }
    let warnings = results.into_iter().flat_map(|r| r.warnings).collect();
    Ok(EvaluationReport {
        format_version: REPORT_VERSION,
        dataset: name.to_string(),
        n: ds.n(),
        d: ds.d(),
        m: ds.m(),
        settings: settings.clone(),
        cells,
        skipped,
        warnings,
    })
}

/// Loads the plan's dataset and evaluates it.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<EvaluationReport> {
    let schema = DatasetSchema::load(&plan.schema)?;
    let ds = Dataset::load_csv(&plan.dataset, &schema)?;
    let name = plan
        .dataset
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    evaluate(&ds, &name, &plan.settings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    AlignedText,
    Delimited,
    Markdown,
    /// Full fold-level detail.
    Json,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 4] = [
        ReportFormat::AlignedText,
        ReportFormat::Delimited,
        ReportFormat::Markdown,
        ReportFormat::Json,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::AlignedText => "report.txt",
            ReportFormat::Delimited => "report.csv",
            ReportFormat::Markdown => "report.md",
            ReportFormat::Json => "report.json",
        }
    }
}

const COLUMNS: [&str; 4] = ["BAcc", "SP", "E.Opp.", "E.Odds"];

fn values(m: &CellMeans) -> [f64; 4] {
    [m.bacc, m.sp, m.e_opp, m.e_odds]
}

/// Per-classifier rows with best-value flags (max BAcc, min disparities).
fn table_rows(report: &EvaluationReport, classifier: ClassifierKind) -> Vec<(&CellReport, [bool; 4])> {
    let rows: Vec<&CellReport> = report.cells.iter().filter(|c| c.classifier == classifier).collect();
    let mut best = [f64::NAN; 4];
    for col in 0..4 {
        let vals = rows.iter().filter_map(|c| c.means.as_ref()).map(|m| values(m)[col]);
        best[col] = if col == 0 {
            vals.fold(f64::NEG_INFINITY, f64::max)
        } else {
            vals.fold(f64::INFINITY, f64::min)
        };
    }
    rows.into_iter()
        .map(|c| {
            let mut flags = [false; 4];
            if let Some(m) = &c.means {
                let v = values(m);
                for col in 0..4 {
                    flags[col] = v[col] == best[col];
                }
            }
            (c, flags)
        })
        .collect()
}

fn classifiers_in(report: &EvaluationReport) -> Vec<ClassifierKind> {
    let mut out: Vec<ClassifierKind> = Vec::new();
    for c in &report.cells {
        if !out.contains(&c.classifier) {
            out.push(c.classifier);
        }
    }
    out
}

pub fn render_report(report: &EvaluationReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Json => return report.to_json(),
        ReportFormat::Delimited => {
            out.push_str("classifier,technique,bacc,sp,e_opp,e_odds,retained_folds,skipped_folds,best\n");
            for clf in classifiers_in(report) {
                for (cell, flags) in table_rows(report, clf) {
                    let nums = match &cell.means {
                        Some(m) => values(m).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
                        None => ",,,".to_string(),
                    };
                    let best: Vec<&str> = ["bacc", "sp", "e_opp", "e_odds"]
                        .iter()
                        .zip(flags)
                        .filter(|(_, f)| *f)
                        .map(|(n, _)| *n)
                        .collect();
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        clf.name(),
                        cell.technique.name(),
                        nums,
                        cell.retained,
                        cell.skipped,
                        best.join(";")
                    );
                }
            }
        }
        ReportFormat::AlignedText => {
            for clf in classifiers_in(report) {
                let _ = writeln!(out, "{} ({}, {} classifier)", report.dataset, clf, clf.name());
                let _ = writeln!(
                    out,
                    "{:<12}{:>10}{:>10}{:>10}{:>10}{:>8}{:>8}",
                    "Technique", COLUMNS[0], COLUMNS[1], COLUMNS[2], COLUMNS[3], "folds", "skips"
                );
                for (cell, flags) in table_rows(report, clf) {
                    let _ = write!(out, "{:<12}", cell.technique.to_string());
                    match &cell.means {
                        Some(m) => {
                            for (v, f) in values(m).iter().zip(flags) {
                                let s = format!("{:.4}{}", v, if f { "*" } else { " " });
                                let _ = write!(out, "{s:>10}");
                            }
                        }
                        None => {
                            for _ in 0..4 {
                                let _ = write!(out, "{:>10}", "n/a ");
                            }
                        }
                    }
                    let _ = writeln!(out, "{:>8}{:>8}", cell.retained, cell.skipped);
                }
                out.push_str("* best in column\n\n");
            }
        }
        ReportFormat::Markdown => {
            for clf in classifiers_in(report) {
                let _ = writeln!(out, "### {}: {}\n", report.dataset, clf);
                let _ = writeln!(out, "| Technique | {} | {} | {} | {} |", COLUMNS[0], COLUMNS[1], COLUMNS[2], COLUMNS[3]);
                out.push_str("|---|---:|---:|---:|---:|\n");
                for (cell, flags) in table_rows(report, clf) {
                    let _ = write!(out, "| {} |", cell.technique);
                    match &cell.means {
                        Some(m) => {
                            for (v, f) in values(m).iter().zip(flags) {
                                if f {
                                    let _ = write!(out, " **{v:.4}** |");
                                } else {
                                    let _ = write!(out, " {v:.4} |");
                                }
                            }
                        }
                        None => out.push_str(" n/a | n/a | n/a | n/a |"),
                    }
                    out.push('\n');
                }
                out.push('\n');
            }
        }
    }
    out
}

/// Writes one report file into `dir`, creating the directory if needed.
pub fn write_report(report: &EvaluationReport, format: ReportFormat, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    if report.cells.is_empty() {
        return Err(Error::Validation("report has no cells".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format.file_name());
    fs::write(&path, render_report(report, format)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Size characteristics of a dataset and its cluster imbalance degrees.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    /// Indexed by label.
    pub class_counts: [usize; 2],
    pub group_counts: Vec<usize>,
    pub group_names: Vec<String>,
    pub clusters: Vec<(ClusterKey, usize, usize)>,
}

pub fn summarize(ds: &Dataset) -> DatasetSummary {
    let ci = partition_clusters(ds);
    let degrees = imbalance_degrees(&ci);
    DatasetSummary {
        n: ds.n(),
        d: ds.d(),
        m: ds.m(),
        class_counts: ds.class_counts(),
        group_counts: ds.group_counts(),
        group_names: ds.group_names().to_vec(),
        clusters: ci.iter().map(|(k, v)| (k, v.len(), degrees[&k])).collect(),
    }
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "N = {}", self.n)?;
        writeln!(f, "D = {}", self.d)?;
        writeln!(f, "M = {}", self.m)?;
        writeln!(
            f,
            "class distribution (0/1) = {}/{}",
            self.class_counts[0], self.class_counts[1]
        )?;
        let groups: Vec<String> = self.group_counts.iter().map(|c| c.to_string()).collect();
        writeln!(f, "group distribution = {}", groups.join("/"))?;
        for (g, name) in self.group_names.iter().enumerate() {
            writeln!(f, "  group {g}: {name} ({})", self.group_counts[g])?;
        }
        writeln!(f, "cluster sizes and imbalance degrees:")?;
        for (key, size, degree) in &self.clusters {
            writeln!(f, "  {key}: size {size}, imbalance {degree}")?;
        }
        Ok(())
    }
}
