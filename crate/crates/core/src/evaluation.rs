//! Leave-one-subject-out comparison of the acquisition agent, recursive feature
//! elimination and the all-features network.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{FeatureRow, FeatureTable, FeatureVector, NormParams};
use crate::metrics::{f1_score, mean_std};
use crate::motion::Exercise;
use crate::nn::{encode_full, predict_batch, train, TrainConfig};
use crate::seeding::derive_seed;
use crate::selector::{rfe_select, select_and_classify, train_selector, RfeConfig, RlConfig};

pub use crate::metrics::f1_score as f1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MlRl,
    MlRfe,
    FullNn,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::MlRl, Method::MlRfe, Method::FullNn];

    pub fn label(self) -> &'static str {
        match self {
            Method::MlRl => "ML-RL",
            Method::MlRfe => "ML-RFE",
            Method::FullNn => "NN (all features)",
        }
    }
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

/// Grid used for the predictors inside every fold.
pub fn fold_train_config() -> TrainConfig {
    TrainConfig { learning_rates: vec![0.01], hidden_grid: vec![vec![32], vec![64]], ..TrainConfig::default() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "fold_train_config")]
    pub train: TrainConfig,
    #[serde(default)]
    pub rl: RlConfig,
    #[serde(default)]
    pub rfe: RfeConfig,
    #[serde(default)]
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no evaluation methods selected".into()));
        }
        self.train.validate()?;
        self.rl.validate()?;
        self.rfe.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectScore {
    pub subject: String,
    pub f1: f64,
    pub n: usize,
    /// Mean features acquired per repetition (agent only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_acquired: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub method: Method,
    pub exercise: Exercise,
    pub mean: f64,
    pub std: f64,
    pub subjects: Vec<SubjectScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_acquired: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub seed: u64,
    pub n_features: usize,
    pub exercises: Vec<Exercise>,
    pub methods: Vec<Method>,
    pub scores: Vec<MethodScores>,
    /// Per method: mean of the per-exercise means, std over all (subject, exercise) scores.
    pub overall: BTreeMap<Method, Summary>,
}

impl EvalResult {
    pub fn get(&self, method: Method, exercise: Exercise) -> Option<&MethodScores> {
        self.scores.iter().find(|s| s.method == method && s.exercise == exercise)
    }

    pub fn from_scores(seed: u64, n_features: usize, exercises: Vec<Exercise>, methods: Vec<Method>, scores: Vec<MethodScores>) -> Self {
        let mut overall = BTreeMap::new();
        for &m in &methods {
            let per: Vec<&MethodScores> = scores.iter().filter(|s| s.method == m).collect();
            if per.is_empty() {
                continue;
            }
            let means: Vec<f64> = per.iter().map(|s| s.mean).collect();
            let pooled: Vec<f64> = per.iter().flat_map(|s| s.subjects.iter().map(|x| x.f1)).collect();
            let std = if pooled.is_empty() { per.iter().map(|s| s.std).sum::<f64>() / per.len() as f64 } else { mean_std(&pooled).1 };
            overall.insert(m, Summary { mean: means.iter().sum::<f64>() / means.len() as f64, std });
        }
        Self { seed, n_features, exercises, methods, scores, overall }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Externally supplied therapist-agreement row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TpAgreement {
    #[serde(default = "tp_label")]
    pub label: String,
    pub exercises: BTreeMap<Exercise, Summary>,
    #[serde(default)]
    pub overall: Option<Summary>,
}

fn tp_label() -> String {
    "TP".into()
}

impl TpAgreement {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

fn cell(s: &Summary) -> String {
    format!("{:.4} ± {:.4}", s.mean, s.std)
}

/// Fixed-width table: one row per method (plus the optional TP row), one column
/// per exercise and an Overall column.
pub fn emit_results_table(res: &EvalResult, tp: Option<&TpAgreement>) -> String {
    let mut header = vec!["Method".to_string()];
    header.extend(res.exercises.iter().map(|e| format!("Exercise {} ({})", e.index() + 1, e.code())));
    header.push("Overall".into());
    let mut rows = vec![header];
    for &m in &res.methods {
        let mut row = vec![m.label().to_string()];
        for &e in &res.exercises {
            row.push(res.get(m, e).map_or("-".into(), |s| cell(&Summary { mean: s.mean, std: s.std })));
        }
        row.push(res.overall.get(&m).map_or("-".into(), cell));
        rows.push(row);
    }
    if let Some(tp) = tp {
        let mut row = vec![tp.label.clone()];
        for e in &res.exercises {
            row.push(tp.exercises.get(e).map_or("-".into(), cell));
        }
        row.push(tp.overall.as_ref().map_or("-".into(), cell));
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in &rows {
        let line: Vec<String> =
            r.iter().zip(&widths).enumerate().map(|(i, (v, &w))| if i == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") }).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

struct FoldOutcome {
    scores: Vec<(Method, SubjectScore)>,
}

fn standardize(norm: &NormParams, rows: &[&FeatureRow]) -> Vec<FeatureVector> {
    rows.iter().map(|r| r.features.with_values(norm.apply_values(r.features.values()))).collect()
}

fn matrix(fvs: &[FeatureVector], cols: Option<&[usize]>) -> Array2<f64> {
    let dim = fvs.first().map_or(0, |f| f.dim());
    let full = Array2::from_shape_fn((fvs.len(), dim), |(i, j)| fvs[i].values()[j]);
    match cols {
        Some(c) => full.select(Axis(1), c),
        None => full,
    }
}

fn label_of(r: &FeatureRow) -> Result<u8> {
    r.label.map(u8::from).ok_or_else(|| Error::Config(format!("repetition {} of {} has no label", r.rep, r.subject_id)))
}

/// Training and held-out rows of the fold for `subject`.
fn loso_split<'a>(rows: &[&'a FeatureRow], subject: &str) -> (Vec<&'a FeatureRow>, Vec<&'a FeatureRow>) {
    rows.iter().partition(|r| r.subject_id != subject)
}

fn run_fold(rows: &[&FeatureRow], subject: &str, cfg: &EvalConfig, seed: u64) -> Result<FoldOutcome> {
    let (trainset, test) = loso_split(rows, subject);
    let train_rows: Vec<&[f64]> = trainset.iter().map(|r| r.features.values()).collect();
    let norm = NormParams::fit_rows(rows[0].features.names().to_vec(), &train_rows)?;
    let tr = standardize(&norm, &trainset);
    let te = standardize(&norm, &test);
    let y_tr = trainset.iter().map(|r| label_of(r)).collect::<Result<Vec<u8>>>()?;
    let y_te = test.iter().map(|r| label_of(r)).collect::<Result<Vec<u8>>>()?;
    let mut scores = Vec::new();
    for &m in &cfg.methods {
        let mseed = derive_seed(seed, &[m as u64]);
        let (pred, acquired) = match m {
            Method::FullNn => {
                let x = encode_full(&tr.iter().map(|f| f.values()).collect::<Vec<_>>());
                let (model, _) = train(x.view(), &y_tr, &TrainConfig { seed: mseed, ..cfg.train.clone() })?;
                let xt = encode_full(&te.iter().map(|f| f.values()).collect::<Vec<_>>());
                (predict_batch(&model, xt.view())?, None)
            }
            Method::MlRfe => {
                let x = matrix(&tr, None);
                let rfe = rfe_select(x.view(), &y_tr, &RfeConfig { seed: mseed, ..cfg.rfe.clone() })?;
                let subset = rfe.selected();
                let xs = x.select(Axis(1), &subset);
                let tcfg = TrainConfig { seed: derive_seed(mseed, &[1]), ..cfg.train.clone() };
                let (model, _) = train(xs.view(), &y_tr, &tcfg)?;
                (predict_batch(&model, matrix(&te, Some(&subset)).view())?, None)
            }
            Method::MlRl => {
                let rl = RlConfig { seed: mseed, ..cfg.rl.clone() };
                let agent = train_selector(&tr, &y_tr, &rl)?;
                let mut pred = Vec::with_capacity(te.len());
                let mut total = 0usize;
                for fv in &te {
                    let (mask, p, _) = select_and_classify(&agent, fv, None, &rl)?;
                    total += mask.iter().filter(|&&b| b).count();
                    pred.push(p);
                }
                (pred, Some(total as f64 / te.len() as f64))
            }
        };
        let f1 = f1_score(&pred, &y_te)?;
        scores.push((m, SubjectScore { subject: subject.to_string(), f1, n: y_te.len(), mean_acquired: acquired }));
    }
    Ok(FoldOutcome { scores })
}

/// Leave-one-subject-out evaluation for every exercise present in `table`.
/// Folds run in parallel; results are merged in subject order.
pub fn loso_evaluate(table: &FeatureTable, cfg: &EvalConfig) -> Result<EvalResult> {
    cfg.validate()?;
    let mut exercises: Vec<Exercise> = table.rows.iter().map(|r| r.exercise).collect();
    exercises.sort_unstable();
    exercises.dedup();
    let mut all_scores = Vec::new();
    for &ex in &exercises {
        let rows: Vec<&FeatureRow> = table.rows.iter().filter(|r| r.exercise == ex).collect();
        let mut subjects: Vec<&str> = Vec::new();
        for r in &rows {
            if !subjects.contains(&r.subject_id.as_str()) {
                subjects.push(&r.subject_id);
            }
        }
        if subjects.len() < 3 {
            return Err(Error::Config(format!("{}: LOSO needs at least 3 subjects, found {}", ex.code(), subjects.len())));
        }
        let folds = subjects
            .par_iter()
            .enumerate()
            .map(|(k, s)| {
                let seed = derive_seed(cfg.seed, &[ex.index() as u64, k as u64]);
                log::info!("{} fold {}/{} (held out {s})", ex.code(), k + 1, subjects.len());
                run_fold(&rows, s, cfg, seed).map_err(|e| Error::Fold { subject: s.to_string(), source: Box::new(e) })
            })
            .collect::<Result<Vec<FoldOutcome>>>()?;
        for &m in &cfg.methods {
            let subjects: Vec<SubjectScore> =
                folds.iter().flat_map(|f| f.scores.iter().filter(|(mm, _)| *mm == m).map(|(_, s)| s.clone())).collect();
            let f1s: Vec<f64> = subjects.iter().map(|s| s.f1).collect();
            let (mean, std) = mean_std(&f1s);
            let mean_acquired = (m == Method::MlRl).then(|| {
                let n: usize = subjects.iter().map(|s| s.n).sum();
                subjects.iter().map(|s| s.mean_acquired.unwrap_or(0.0) * s.n as f64).sum::<f64>() / n.max(1) as f64
            });
            all_scores.push(MethodScores { method: m, exercise: ex, mean, std, subjects, mean_acquired });
        }
    }
    Ok(EvalResult::from_scores(cfg.seed, table.names.len(), exercises, cfg.methods.clone(), all_scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(method: Method, exercise: Exercise, mean: f64, std: f64) -> MethodScores {
        MethodScores { method, exercise, mean, std, subjects: vec![], mean_acquired: None }
    }

    #[test]
    fn overall_is_mean_of_exercise_means() {
        let scores = vec![
            ms(Method::MlRl, Exercise::E1Cup, 0.8331, 0.05),
            ms(Method::MlRl, Exercise::E2Light, 0.7973, 0.05),
            ms(Method::MlRl, Exercise::E3Cane, 0.8053, 0.05),
        ];
        let r = EvalResult::from_scores(0, 60, Exercise::ALL.to_vec(), vec![Method::MlRl], scores);
        let table = emit_results_table(&r, None);
        assert!(table.lines().nth(1).unwrap().ends_with("0.8119 ± 0.0500"), "{table}");
    }

    #[test]
    fn single_cell_table() {
        let r = EvalResult::from_scores(
            0,
            60,
            vec![Exercise::E1Cup],
            vec![Method::MlRl],
            vec![ms(Method::MlRl, Exercise::E1Cup, 0.81190, 0.1)],
        );
        let t = emit_results_table(&r, None);
        assert_eq!(t.lines().count(), 2);
        assert!(t.contains("0.8119 ± 0.1000"));
        let header = t.lines().next().unwrap();
        assert!(header.contains("Exercise 1 (E1)") && header.contains("Overall"));
    }

    fn toy_table() -> FeatureTable {
        use crate::kinematics::FeatureConfig;
        use crate::synth::{synth_dataset, CorpusSpec};
        let spec = CorpusSpec {
            n_patients: 2,
            n_healthy: 1,
            reps_per_patient_side: 4,
            reps_per_healthy: 4,
            exercises: vec![Exercise::E1Cup],
            seed: 4,
        };
        FeatureTable::extract(&synth_dataset(&spec).unwrap(), &FeatureConfig::default()).unwrap()
    }

    fn cheap_config() -> EvalConfig {
        let mut cfg = EvalConfig::default();
        cfg.train = TrainConfig { hidden_grid: vec![vec![4]], max_iter: 20, ..cfg.train };
        cfg.rl.episodes = 30;
        cfg.rl.hidden_grid = vec![vec![8]];
        cfg.rfe.hidden = vec![4];
        cfg.rfe.max_iter = 20;
        cfg
    }

    #[test]
    fn folds_hold_out_each_subject_once() {
        let table = toy_table();
        let rows: Vec<&FeatureRow> = table.rows.iter().collect();
        for s in ["P01", "P02", "H01"] {
            let (train, test) = loso_split(&rows, s);
            assert!(!test.is_empty() && test.iter().all(|r| r.subject_id == s));
            assert!(train.iter().all(|r| r.subject_id != s));
            assert_eq!(train.len() + test.len(), rows.len());
        }
    }

    #[test]
    fn three_subjects_give_three_folds_per_method() {
        let table = toy_table();
        let labelled = table.filter(|r| r.label.is_some());
        let res = loso_evaluate(&labelled, &cheap_config()).unwrap();
        assert_eq!(res.scores.len(), 3);
        for s in &res.scores {
            let ids: Vec<&str> = s.subjects.iter().map(|x| x.subject.as_str()).collect();
            assert_eq!(ids, ["P01", "P02", "H01"]);
            assert!(s.subjects.iter().all(|x| (0.0..=1.0).contains(&x.f1)));
            assert_eq!(s.mean_acquired.is_some(), s.method == Method::MlRl);
        }
        let table_text = emit_results_table(&res, None);
        assert_eq!(table_text.lines().count(), 4);
        assert!(table_text.lines().all(|l| l.matches(" ± ").count() == 2 || l.starts_with("Method")));
    }

    #[test]
    fn too_few_subjects_is_a_config_error() {
        let table = toy_table().filter(|r| r.subject_id != "H01");
        assert!(matches!(loso_evaluate(&table, &cheap_config()), Err(Error::Config(_))));
    }

    #[test]
    fn tp_row_is_ingested() {
        let r =
            EvalResult::from_scores(0, 60, vec![Exercise::E1Cup], vec![Method::MlRl], vec![ms(Method::MlRl, Exercise::E1Cup, 0.9, 0.1)]);
        let tp: TpAgreement = serde_json::from_str(r#"{"exercises": {"E1": {"mean": 0.7619, "std": 0.1626}}}"#).unwrap();
        let t = emit_results_table(&r, Some(&tp));
        let last = t.lines().last().unwrap();
        assert!(last.starts_with("TP") && last.contains("0.7619 ± 0.1626") && last.ends_with('-'));
    }
}
