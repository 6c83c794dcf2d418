use std::collections::BTreeMap;
use std::path::PathBuf;

use cffq::data::KinematicBin;
use cffq::globalfit::{kinematic_grid, train_global, GlobalPrediction, LocalExtraction};
use cffq::io::{self, TruthRow};
use cffq::metrics::{
    accuracy, algorithmic_error, avg_scaled_error, m_chi2, methodological_error, nonlinearity, precision, qualifier,
    xi_outperformance, ErrorReport, MdvcsGrid,
};
use cffq::models::ModelClass;
use cffq::physics::CffSet;
use cffq::pseudodata::{make_pseudobin, qualifier_grid, synthetic_templates};
use cffq::training::{fit_replicas, BinProblem, ReplicaEnsemble};
use cffq::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const PSEUDODATA_FILE: &str = "pseudodata.csv";
pub const TRUTH_CFF_FILE: &str = "truth_cffs.csv";
pub const TRUTH_F_FILE: &str = "truth_f.csv";
pub const MANIFEST_FILE: &str = "qualifier_manifest.csv";
pub const LOCAL_FITS_FILE: &str = "local_fits.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const EVALUATION_FILE: &str = "evaluation.csv";
pub const EVALUATION_SUMMARY_FILE: &str = "evaluation_summary.json";
pub const XI_FILE: &str = "outperformance.csv";
pub const QUALIFY_FILE: &str = "qualify.csv";
pub const QUALIFY_SUMMARY_FILE: &str = "qualify_summary.json";
pub const GLOBAL_GRID_FILE: &str = "global_grid.csv";
pub const GLOBAL_SUMMARY_FILE: &str = "global_summary.json";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const REPORT_FILE: &str = "report.md";

fn out(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.paths.output.join(name)
}

pub fn fit_path(cfg: &RunConfig, class: ModelClass, set_id: u32) -> PathBuf {
    cfg.paths.output.join("fits").join(class.name()).join(format!("set_{set_id:05}.json"))
}

// ---------------------------------------------------------------- generate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub set_id: u32,
    pub replica: usize,
    pub level_re_h: u8,
    pub level_re_e: u8,
    pub level_re_ht: u8,
    pub level_dvcs: u8,
    #[serde(rename = "ReH")]
    pub re_h: f64,
    #[serde(rename = "ReE")]
    pub re_e: f64,
    #[serde(rename = "ReHt")]
    pub re_ht: f64,
    #[serde(rename = "DVCS")]
    pub dvcs: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

pub fn generate(cfg: &RunConfig) -> Result<()> {
    let p = &cfg.pseudodata;
    let templates = match &p.template {
        Some(path) => io::read_bins(path)?,
        None => synthetic_templates(p.synthetic_templates, p.catalog_seed, &cfg.physics)?,
    };
    let gens = p.generators.set();
    let mut data = Vec::new();
    let mut truth_f = Vec::new();
    let mut truth = Vec::new();
    let mut manifest = Vec::new();
    for t in &templates {
        let pb = match make_pseudobin(t, &gens, p.noise_scale, p.seed, &cfg.physics) {
            Ok(pb) => pb,
            Err(e) => {
                eprintln!("set {}: skipped: {e}", t.set_id);
                continue;
            }
        };
        let mut tb = pb.bin.clone();
        for (pt, f) in tb.points.iter_mut().zip(&pb.truth_f) {
            pt.f = *f;
        }
        truth.push(TruthRow::new(t.set_id, &pb.truth));
        if p.qualifier_grid {
            for r in qualifier_grid(t.set_id, pb.truth, p.seed) {
                manifest.push(ManifestRow {
                    set_id: r.set_id,
                    replica: r.replica,
                    level_re_h: r.levels[0],
                    level_re_e: r.levels[1],
                    level_re_ht: r.levels[2],
                    level_dvcs: r.levels[3],
                    re_h: r.truth.re_h,
                    re_e: r.truth.re_e,
                    re_ht: r.truth.re_ht,
                    dvcs: r.truth.dvcs,
                    noise_scale: r.noise_scale,
                    seed: r.seed,
                });
            }
        }
        data.push(pb.bin);
        truth_f.push(tb);
    }
    if data.is_empty() {
        return Err(Error::Domain("no template produced valid pseudodata".into()));
    }
    io::write_bins(&out(cfg, PSEUDODATA_FILE), &data)?;
    io::write_bins(&out(cfg, TRUTH_F_FILE), &truth_f)?;
    io::write_csv(&out(cfg, TRUTH_CFF_FILE), &truth)?;
    let points: usize = data.iter().map(|b| b.points.len()).sum();
    println!("generated {} bins ({points} points) at noise scale {}", data.len(), p.noise_scale);
    if p.qualifier_grid {
        io::write_csv(&out(cfg, MANIFEST_FILE), &manifest)?;
        println!("qualifier manifest: {} replica specs", manifest.len());
    }
    Ok(())
}

// ---------------------------------------------------------------- fit-local

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFitRow {
    pub set_id: u32,
    pub model: ModelClass,
    pub k: f64,
    #[serde(rename = "Q2")]
    pub q2: f64,
    #[serde(rename = "xB")]
    pub xb: f64,
    pub t: f64,
    #[serde(rename = "ReH_mean")]
    pub re_h_mean: f64,
    #[serde(rename = "ReE_mean")]
    pub re_e_mean: f64,
    #[serde(rename = "ReHt_mean")]
    pub re_ht_mean: f64,
    #[serde(rename = "DVCS_mean")]
    pub dvcs_mean: f64,
    #[serde(rename = "ReH_sigma")]
    pub re_h_sigma: f64,
    #[serde(rename = "ReE_sigma")]
    pub re_e_sigma: f64,
    #[serde(rename = "ReHt_sigma")]
    pub re_ht_sigma: f64,
    #[serde(rename = "DVCS_sigma")]
    pub dvcs_sigma: f64,
    pub n_included: usize,
    pub n_excluded: usize,
}

impl LocalFitRow {
    pub fn mean(&self) -> CffSet {
        CffSet::new(self.re_h_mean, self.re_e_mean, self.re_ht_mean, self.dvcs_mean)
    }

    pub fn sigma(&self) -> CffSet {
        CffSet::new(self.re_h_sigma, self.re_e_sigma, self.re_ht_sigma, self.dvcs_sigma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub set_id: u32,
    pub model: ModelClass,
    pub error: String,
}

fn ensemble_mean(e: &ReplicaEnsemble) -> Result<CffSet> {
    let c = e.included();
    if c.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut m = [0.0; 4];
    for x in &c {
        for (a, v) in m.iter_mut().zip(x.to_array()) {
            *a += v / c.len() as f64;
        }
    }
    Ok(CffSet::from_array(m))
}

fn summary_row(bin: &KinematicBin, e: &ReplicaEnsemble) -> Result<LocalFitRow> {
    let m = ensemble_mean(e)?;
    let s = precision(e)?;
    Ok(LocalFitRow {
        set_id: bin.set_id,
        model: e.model_class,
        k: bin.k,
        q2: bin.q2,
        xb: bin.xb,
        t: bin.t,
        re_h_mean: m.re_h,
        re_e_mean: m.re_e,
        re_ht_mean: m.re_ht,
        dvcs_mean: m.dvcs,
        re_h_sigma: s[0],
        re_e_sigma: s[1],
        re_ht_sigma: s[2],
        dvcs_sigma: s[3],
        n_included: e.included().len(),
        n_excluded: e.n_excluded(),
    })
}

fn load_ensemble(cfg: &RunConfig, class: ModelClass, set_id: u32) -> Option<ReplicaEnsemble> {
    let e: ReplicaEnsemble = io::read_json(&fit_path(cfg, class, set_id)).ok()?;
    (e.set_id == set_id && e.model_class == class && e.records.len() == cfg.models.n_replicas).then_some(e)
}

pub struct FitLocalOutcome {
    pub fitted: usize,
    pub skipped: usize,
    pub failed: usize,
}

pub fn fit_local(cfg: &RunConfig) -> Result<FitLocalOutcome> {
    let bins = io::read_bins(&cfg.paths.data)?;
    let mut outcome = FitLocalOutcome { fitted: 0, skipped: 0, failed: 0 };
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for &class in &cfg.models.classes {
        for bin in &bins {
            let ens = match load_ensemble(cfg, class, bin.set_id) {
                Some(e) => {
                    outcome.skipped += 1;
                    e
                }
                None => {
                    let res = BinProblem::new(bin, &cfg.physics).and_then(|p| {
                        fit_replicas(
                            class,
                            &p,
                            cfg.models.n_replicas,
                            cfg.models.resample,
                            cfg.models.seed_policy,
                            &cfg.fit,
                        )
                    });
                    match res {
                        Ok(e) => {
                            io::write_json(&fit_path(cfg, class, bin.set_id), &e)?;
                            outcome.fitted += 1;
                            e
                        }
                        Err(err) => {
                            eprintln!("set {} ({class}): {err}", bin.set_id);
                            failures.push(FailureRow { set_id: bin.set_id, model: class, error: err.to_string() });
                            outcome.failed += 1;
                            continue;
                        }
                    }
                }
            };
            match summary_row(bin, &ens) {
                Ok(r) => rows.push(r),
                Err(err) => {
                    eprintln!("set {} ({class}): {err}", bin.set_id);
                    failures.push(FailureRow { set_id: bin.set_id, model: class, error: err.to_string() });
                }
            }
        }
    }
    io::write_csv(&out(cfg, LOCAL_FITS_FILE), &rows)?;
    io::write_csv(&out(cfg, FAILURES_FILE), &failures)?;
    println!(
        "fit-local: {} fitted, {} resumed, {} failed ({} bins x {} models)",
        outcome.fitted,
        outcome.skipped,
        outcome.failed,
        bins.len(),
        cfg.models.classes.len()
    );
    if rows.is_empty() && !bins.is_empty() {
        return Err(Error::Convergence { iterations: 0 });
    }
    Ok(outcome)
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub set_id: u32,
    pub model: ModelClass,
    pub cff: String,
    pub mean: f64,
    pub truth: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: f64,
    pub algorithmic: Option<f64>,
    pub methodological: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiRow {
    pub set_id: u32,
    pub model: ModelClass,
    pub m_dvcs: f64,
    pub m_dvcs_relative: f64,
    /// Against the CDNN in the same bin, when both were fitted.
    pub xi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: ModelClass,
    pub n_bins: usize,
    pub m_chi2: Option<f64>,
    pub median_m_dvcs: Option<f64>,
    pub mean_accuracy: Option<[f64; 4]>,
    pub mean_precision: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub models: Vec<ModelSummary>,
    pub n_bins_with_truth: usize,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let bins = io::read_bins(&cfg.paths.data)?;
    let truth: BTreeMap<u32, CffSet> = match &cfg.paths.truth {
        Some(p) => io::read_truth(p)?,
        None => BTreeMap::new(),
    };
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut mdvcs: BTreeMap<(u32, ModelClass), (f64, f64)> = BTreeMap::new();
    let mut summaries = Vec::new();
    for &class in &cfg.models.classes {
        let (mut means, mut truths, mut sigmas, mut ms) = (vec![], vec![], vec![], vec![]);
        let mut acc_sum = [0.0; 4];
        let mut prec_sum = [0.0; 4];
        let mut n_bins = 0;
        for bin in &bins {
            let Some(ens) = load_ensemble(cfg, class, bin.set_id) else { continue };
            let t = truth.get(&bin.set_id);
            let (acc, prec) = match (accuracy(&ens, t), precision(&ens)) {
                (Ok(a), Ok(p)) => (Some(a), p),
                (Err(Error::MissingTruth(_)), Ok(p)) => (None, p),
                (Err(e), _) | (_, Err(e)) => {
                    eprintln!("set {} ({class}): {e}", bin.set_id);
                    continue;
                }
            };
            let problem = BinProblem::new(bin, &cfg.physics)?;
            let algorithmic = match cfg.evaluate.algorithmic_replicas {
                0 | 1 => None,
                n => Some(algorithmic_error(class, &problem, n, cfg.models.seed_policy, &cfg.fit)?),
            };
            let methodological = match cfg.evaluate.methodological_draws {
                0 | 1 => None,
                n => Some(methodological_error(
                    class,
                    bin,
                    &cfg.pseudodata.generators.set(),
                    cfg.evaluate.parameter_spread,
                    n,
                    &cfg.fit,
                    &cfg.physics,
                )?),
            };
            let mean = ensemble_mean(&ens)?;
            for k in 0..4 {
                rows.push(EvaluationRow {
                    set_id: bin.set_id,
                    model: class,
                    cff: CffSet::NAMES[k].to_string(),
                    mean: mean.to_array()[k],
                    truth: t.map(|t| t.to_array()[k]),
                    accuracy: acc.map(|a| a[k]),
                    precision: prec[k],
                    algorithmic: algorithmic.map(|a| a[k]),
                    methodological: methodological.map(|a| a[k]),
                });
                prec_sum[k] += prec[k];
                if let Some(a) = acc {
                    acc_sum[k] += a[k];
                }
            }
            n_bins += 1;
            reports.push(ErrorReport {
                set_id: bin.set_id,
                model_class: class,
                accuracy: acc,
                precision: prec,
                algorithmic,
                methodological,
                n_excluded: ens.n_excluded(),
            });
            if let Some(t) = t {
                let m = MdvcsGrid::new(bin, &cfg.physics)?.between(&mean, t);
                let mean_f = bin.values().iter().sum::<f64>() / bin.points.len() as f64;
                mdvcs.insert((bin.set_id, class), (m, m / (mean_f * 345.0)));
                ms.push(m);
                means.push(mean);
                truths.push(*t);
                sigmas.push(CffSet::from_array(prec));
            }
        }
        let m_chi2 = if means.is_empty() {
            None
        } else {
            match m_chi2(&means, &truths, &sigmas) {
                Ok(v) => Some(v),
                Err(e) => {
                    eprintln!("{class}: M_chi2 unavailable: {e}");
                    None
                }
            }
        };
        let with_truth = means.len();
        summaries.push(ModelSummary {
            model: class,
            n_bins,
            m_chi2,
            median_m_dvcs: median(ms),
            mean_accuracy: (with_truth > 0).then(|| acc_sum.map(|a| a / with_truth as f64)),
            mean_precision: prec_sum.map(|p| if n_bins > 0 { p / n_bins as f64 } else { 0.0 }),
        });
    }
    let xi_rows: Vec<XiRow> = mdvcs
        .iter()
        .map(|(&(set_id, model), &(m, rel))| {
            let xi = if model == ModelClass::Cdnn {
                None
            } else {
                mdvcs.get(&(set_id, ModelClass::Cdnn)).and_then(|&(mc, _)| xi_outperformance(mc, m).ok())
            };
            XiRow { set_id, model, m_dvcs: m, m_dvcs_relative: rel, xi }
        })
        .collect();
    io::write_csv(&out(cfg, EVALUATION_FILE), &rows)?;
    io::write_csv(&out(cfg, XI_FILE), &xi_rows)?;
    io::write_json(&out(cfg, "error_reports.json"), &reports)?;
    let summary = EvaluationSummary { models: summaries, n_bins_with_truth: truth.len() };
    io::write_json(&out(cfg, EVALUATION_SUMMARY_FILE), &summary)?;
    for m in &summary.models {
        println!(
            "{}: {} bins, M_chi2 = {}, median M_DVCS = {}",
            m.model,
            m.n_bins,
            m.m_chi2.map_or("n/a".into(), |v| format!("{v:.4}")),
            m.median_m_dvcs.map_or("n/a".into(), |v| format!("{v:.4e}"))
        );
    }
    Ok(())
}

// ---------------------------------------------------------------- qualify

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualifyRow {
    pub set_id: u32,
    pub eps_bar_s: f64,
    pub nonlinearity: Option<f64>,
    pub xi_hat: Option<f64>,
    pub recommendation: String,
    pub n_excluded_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualifySummary {
    pub n_bins: usize,
    pub n_degenerate: usize,
    pub quantum: f64,
    pub classical: f64,
    pub tie: f64,
}

pub const TIE: &str = "tie";
pub const DEGENERATE: &str = "degenerate";

pub fn recommendation(xi_hat: f64, tie: f64, quantum: ModelClass) -> String {
    if xi_hat.abs() <= tie {
        TIE.into()
    } else if xi_hat > 0.0 {
        quantum.name().into()
    } else {
        ModelClass::Cdnn.name().into()
    }
}

pub fn qualify(cfg: &RunConfig) -> Result<QualifySummary> {
    let bins = io::read_bins(&cfg.paths.data)?;
    let q = &cfg.qualifier;
    let mut rows = Vec::new();
    for bin in &bins {
        let eps = avg_scaled_error(std::slice::from_ref(bin), q.noise_scale);
        let pts: Vec<(f64, f64)> = bin.points.iter().map(|p| (p.phi_deg, p.f)).collect();
        let row = match nonlinearity(&pts) {
            Ok(n) => {
                let s = qualifier(eps.value, n);
                QualifyRow {
                    set_id: bin.set_id,
                    eps_bar_s: eps.value,
                    nonlinearity: Some(n),
                    xi_hat: Some(s),
                    recommendation: recommendation(s, q.tie_threshold, q.quantum_model),
                    n_excluded_points: eps.n_excluded,
                }
            }
            Err(e) => {
                eprintln!("set {}: {e}", bin.set_id);
                QualifyRow {
                    set_id: bin.set_id,
                    eps_bar_s: eps.value,
                    nonlinearity: None,
                    xi_hat: None,
                    recommendation: DEGENERATE.into(),
                    n_excluded_points: eps.n_excluded,
                }
            }
        };
        rows.push(row);
    }
    let decided: Vec<&QualifyRow> = rows.iter().filter(|r| r.recommendation != DEGENERATE).collect();
    let frac = |pred: &dyn Fn(&str) -> bool| {
        if decided.is_empty() {
            0.0
        } else {
            decided.iter().filter(|r| pred(&r.recommendation)).count() as f64 / decided.len() as f64
        }
    };
    let quantum_name = q.quantum_model.name();
    let summary = QualifySummary {
        n_bins: rows.len(),
        n_degenerate: rows.len() - decided.len(),
        quantum: frac(&|r| r == quantum_name),
        classical: frac(&|r| r == ModelClass::Cdnn.name()),
        tie: frac(&|r| r == TIE),
    };
    io::write_csv(&out(cfg, QUALIFY_FILE), &rows)?;
    io::write_json(&out(cfg, QUALIFY_SUMMARY_FILE), &summary)?;
    println!(
        "qualify: {} bins; {quantum_name} {:.1}%, cdnn {:.1}%, tie {:.1}%, degenerate {}",
        summary.n_bins,
        100.0 * summary.quantum,
        100.0 * summary.classical,
        100.0 * summary.tie,
        summary.n_degenerate
    );
    Ok(summary)
}

// ---------------------------------------------------------------- fit-global

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    #[serde(rename = "xB")]
    pub xb: f64,
    pub t: f64,
    #[serde(rename = "Q2")]
    pub q2: f64,
    #[serde(rename = "ReH_mean")]
    pub re_h_mean: f64,
    #[serde(rename = "ReE_mean")]
    pub re_e_mean: f64,
    #[serde(rename = "ReHt_mean")]
    pub re_ht_mean: f64,
    #[serde(rename = "DVCS_mean")]
    pub dvcs_mean: f64,
    #[serde(rename = "ReH_sigma")]
    pub re_h_sigma: f64,
    #[serde(rename = "ReE_sigma")]
    pub re_e_sigma: f64,
    #[serde(rename = "ReHt_sigma")]
    pub re_ht_sigma: f64,
    #[serde(rename = "DVCS_sigma")]
    pub dvcs_sigma: f64,
    pub extrapolated: bool,
}

impl From<&GlobalPrediction> for GridRow {
    fn from(p: &GlobalPrediction) -> Self {
        Self {
            xb: p.xb,
            t: p.t,
            q2: p.q2,
            re_h_mean: p.mean.re_h,
            re_e_mean: p.mean.re_e,
            re_ht_mean: p.mean.re_ht,
            dvcs_mean: p.mean.dvcs,
            re_h_sigma: p.sigma.re_h,
            re_e_sigma: p.sigma.re_e,
            re_ht_sigma: p.sigma.re_ht,
            dvcs_sigma: p.sigma.dvcs,
            extrapolated: p.extrapolated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    #[serde(rename = "xB")]
    pub xb: f64,
    pub t: f64,
    #[serde(rename = "Q2")]
    pub q2: f64,
    #[serde(rename = "ReH")]
    pub re_h: f64,
    #[serde(rename = "ReE")]
    pub re_e: f64,
    #[serde(rename = "ReHt")]
    pub re_ht: f64,
    #[serde(rename = "DVCS")]
    pub dvcs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    #[serde(rename = "xB")]
    pub xb: f64,
    pub t: f64,
    #[serde(rename = "Q2")]
    pub q2: f64,
    pub cff: String,
    pub mean: f64,
    pub sigma: f64,
    pub reference: f64,
    /// (mean - reference) / sigma; absent when sigma is zero.
    pub pull: Option<f64>,
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSummary {
    pub n_bins: usize,
    pub models_used: BTreeMap<String, usize>,
    pub n_replicas: usize,
    pub n_excluded: usize,
    pub mean_final_loss: [f64; 4],
    pub n_grid_points: usize,
    pub n_extrapolated: usize,
}

fn axis_range(vals: impl Iterator<Item = f64> + Clone, pad: f64) -> (f64, f64) {
    let lo = vals.clone().fold(f64::INFINITY, f64::min);
    let hi = vals.fold(f64::NEG_INFINITY, f64::max);
    let w = (hi - lo) * pad;
    (lo - w, hi + w)
}

pub fn fit_global(cfg: &RunConfig) -> Result<GlobalSummary> {
    let local: Vec<LocalFitRow> = io::read_csv(&out(cfg, LOCAL_FITS_FILE))?;
    let qualify_path = out(cfg, QUALIFY_FILE);
    let choice: BTreeMap<u32, String> = if cfg.global.use_qualifier && qualify_path.exists() {
        io::read_csv::<QualifyRow>(&qualify_path)?.into_iter().map(|r| (r.set_id, r.recommendation)).collect()
    } else {
        BTreeMap::new()
    };
    let mut by_set: BTreeMap<u32, Vec<&LocalFitRow>> = BTreeMap::new();
    for r in &local {
        by_set.entry(r.set_id).or_default().push(r);
    }
    let mut data = Vec::new();
    let mut used: BTreeMap<String, usize> = BTreeMap::new();
    for (set_id, rows) in &by_set {
        let want = match choice.get(set_id).and_then(|c| c.parse::<ModelClass>().ok()) {
            Some(m) => m,
            None => cfg.global.fallback_model,
        };
        let pick = rows
            .iter()
            .find(|r| r.model == want)
            .or_else(|| rows.iter().find(|r| r.model == cfg.global.fallback_model))
            .or(rows.first());
        if let Some(r) = pick {
            *used.entry(r.model.name().to_string()).or_default() += 1;
            data.push(LocalExtraction {
                set_id: r.set_id,
                k: r.k,
                q2: r.q2,
                xb: r.xb,
                t: r.t,
                mean: r.mean(),
                sigma: r.sigma(),
            });
        }
    }
    let ens = train_global(&data, &cfg.global.fit)?;
    let pad = cfg.global.grid_padding;
    let [nx, nt, nq] = cfg.global.grid_points;
    let (x0, x1) = axis_range(data.iter().map(|d| d.xb), pad);
    let (t0, t1) = axis_range(data.iter().map(|d| d.t), pad);
    let (q0, q1) = axis_range(data.iter().map(|d| d.q2), pad);
    let grid = kinematic_grid((x0, x1, nx), (t0, t1, nt), (q0, q1, nq));
    let preds = ens.predict_many(&grid)?;
    let grid_rows: Vec<GridRow> = preds.iter().map(GridRow::from).collect();
    io::write_csv(&out(cfg, GLOBAL_GRID_FILE), &grid_rows)?;

    if let Some(path) = &cfg.paths.reference {
        let refs: Vec<ReferenceRow> = io::read_csv(path)?;
        let pts: Vec<(f64, f64, f64)> = refs.iter().map(|r| (r.xb, r.t, r.q2)).collect();
        let p = ens.predict_many(&pts)?;
        let mut cmp = Vec::new();
        for (r, p) in refs.iter().zip(&p) {
            let reference = [r.re_h, r.re_e, r.re_ht, r.dvcs];
            for k in 0..4 {
                let (m, s) = (p.mean.to_array()[k], p.sigma.to_array()[k]);
                cmp.push(ComparisonRow {
                    xb: r.xb,
                    t: r.t,
                    q2: r.q2,
                    cff: CffSet::NAMES[k].to_string(),
                    mean: m,
                    sigma: s,
                    reference: reference[k],
                    pull: (s > 0.0).then(|| (m - reference[k]) / s),
                    extrapolated: p.extrapolated,
                });
            }
        }
        io::write_csv(&out(cfg, COMPARISON_FILE), &cmp)?;
    }

    let inc: Vec<_> = ens.included().collect();
    let mut loss = [0.0; 4];
    for r in &inc {
        for k in 0..4 {
            loss[k] += r.final_loss[k] / inc.len() as f64;
        }
    }
    let summary = GlobalSummary {
        n_bins: data.len(),
        models_used: used,
        n_replicas: ens.replicas.len(),
        n_excluded: ens.replicas.len() - inc.len(),
        mean_final_loss: loss,
        n_grid_points: grid_rows.len(),
        n_extrapolated: grid_rows.iter().filter(|r| r.extrapolated).count(),
    };
    io::write_json(&out(cfg, GLOBAL_SUMMARY_FILE), &summary)?;
    println!(
        "fit-global: {} bins, {} replicas ({} excluded), {} grid points ({} extrapolated)",
        summary.n_bins, summary.n_replicas, summary.n_excluded, summary.n_grid_points, summary.n_extrapolated
    );
    Ok(summary)
}

// ---------------------------------------------------------------- report

pub fn report(cfg: &RunConfig) -> Result<PathBuf> {
    let mut md = String::from("# Extraction report\n");
    let section = |md: &mut String, title: &str| md.push_str(&format!("\n## {title}\n\n"));
    let local_path = out(cfg, LOCAL_FITS_FILE);
    if local_path.exists() {
        let rows: Vec<LocalFitRow> = io::read_csv(&local_path)?;
        section(&mut md, "Local fits");
        md.push_str("| set | model | ReH | ReE | ReHt | DVCS |\n|---|---|---|---|---|---|\n");
        for r in &rows {
            md.push_str(&format!(
                "| {} | {} | {:.4} ± {:.4} | {:.4} ± {:.4} | {:.4} ± {:.4} | {:.5} ± {:.5} |\n",
                r.set_id,
                r.model,
                r.re_h_mean,
                r.re_h_sigma,
                r.re_e_mean,
                r.re_e_sigma,
                r.re_ht_mean,
                r.re_ht_sigma,
                r.dvcs_mean,
                r.dvcs_sigma
            ));
        }
    }
    let eval_path = out(cfg, EVALUATION_SUMMARY_FILE);
    if eval_path.exists() {
        let s: EvaluationSummary = io::read_json(&eval_path)?;
        section(&mut md, "Evaluation");
        md.push_str("| model | bins | M_chi2 | median M_DVCS |\n|---|---|---|---|\n");
        for m in &s.models {
            md.push_str(&format!(
                "| {} | {} | {} | {} |\n",
                m.model,
                m.n_bins,
                m.m_chi2.map_or("n/a".into(), |v| format!("{v:.4}")),
                m.median_m_dvcs.map_or("n/a".into(), |v| format!("{v:.4e}"))
            ));
        }
    }
    let q_path = out(cfg, QUALIFY_SUMMARY_FILE);
    if q_path.exists() {
        let s: QualifySummary = io::read_json(&q_path)?;
        section(&mut md, "Qualifier");
        md.push_str(&format!(
            "{} bins: quantum {:.1}%, classical {:.1}%, tie {:.1}%, degenerate {}.\n",
            s.n_bins,
            100.0 * s.quantum,
            100.0 * s.classical,
            100.0 * s.tie,
            s.n_degenerate
        ));
    }
    let g_path = out(cfg, GLOBAL_SUMMARY_FILE);
    if g_path.exists() {
        let s: GlobalSummary = io::read_json(&g_path)?;
        section(&mut md, "Global fit");
        md.push_str(&format!(
            "{} bins, {} replicas ({} excluded), {} grid points of which {} outside the data hull.\n",
            s.n_bins, s.n_replicas, s.n_excluded, s.n_grid_points, s.n_extrapolated
        ));
        for (m, n) in &s.models_used {
            md.push_str(&format!("- {m}: {n} bins\n"));
        }
    }
    let path = out(cfg, REPORT_FILE);
    std::fs::create_dir_all(&cfg.paths.output)?;
    std::fs::write(&path, md)?;
    println!("report written to {}", path.display());
    Ok(path)
}
