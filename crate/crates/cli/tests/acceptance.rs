//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed. Pass a substring to run matching criteria only.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use cffq::globalfit::{ensemble_stats, kinematic_grid, train_global, GlobalFitConfig, LocalExtraction};
use cffq::metrics::{
    accuracy, algorithmic_error, avg_scaled_error, nonlinearity, precision_of, qualifier, xi_outperformance, MdvcsGrid,
    XI_HAT_COEFFS,
};
use cffq::models::{count_flops, count_params, sel_param_count, ModelClass, ModelSpec, QdnnSpec};
use cffq::physics::{
    bh_term, derive_kinematics, forward_model, interference_term, kelly_form_factors, lepton_propagators, CffSet,
    PhysicsConstants,
};
use cffq::pseudodata::{make_pseudobin, synthetic_templates, GeneratorSet, QUALIFIER_NOISE_SCALES};
use cffq::qsim::{
    apply_sel_layer, final_state, parameter_shift_jacobian, CircuitParams, EntanglerRange, QuantumGradient,
    QuantumState,
};
use cffq::seeds::derive_seed;
use cffq::training::{fit_local, BinProblem, FitConfig, ReplicaEnsemble, SeedPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::statistics::Statistics;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn complexity_parity() -> Outcome {
    let cdnn = ModelClass::Cdnn.initial_spec(8, 8);
    let qdnn = ModelSpec::Qdnn(QdnnSpec::new(8, EntanglerRange::Fixed(1)));
    let got = [count_params(&cdnn), count_params(&qdnn), count_flops(&cdnn), count_flops(&qdnn)];
    check(
        got == [33796, 876, 67008, 74688],
        format!("params cdnn/qdnn {}/{}, flops {}/{}", got[0], got[1], got[2], got[3]),
    )
}

fn sel_count() -> Outcome {
    let n = sel_param_count(8, 6);
    let p = CircuitParams::zeros(6, 8, EntanglerRange::Fixed(1)).map_err(|e| e.to_string())?;
    check(n == 144 && p.n_angles() == 144, format!("{n} angles"))
}

fn gradient_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut n_checked = 0;
    for c in 0..120 {
        let n = rng.random_range(1..=6);
        let l = rng.random_range(1..=8);
        let range = if c % 2 == 0 { EntanglerRange::Cyclic } else { EntanglerRange::Fixed(1) };
        let thetas: Vec<f64> = (0..l * n * 3).map(|_| rng.random_range(-3.2..3.2)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let p = CircuitParams::new(n, l, thetas, range).map_err(|e| e.to_string())?;
        let jac = parameter_shift_jacobian(&x, &p).map_err(|e| e.to_string())?;
        for k in 0..p.n_angles() {
            let mut pp = p.clone();
            pp.thetas[k] += h;
            let zp = final_state(&x, &pp).unwrap().z_expectations();
            pp.thetas[k] -= 2.0 * h;
            let zm = final_state(&x, &pp).unwrap().z_expectations();
            for j in 0..n {
                let fd = (zp[j] - zm[j]) / (2.0 * h);
                let err = (jac[k][j] - fd).abs();
                let tol = f64::max(1e-6, 1e-5 * fd.abs());
                worst = worst.max(err / tol);
                n_checked += 1;
            }
        }
    }
    check(worst <= 1.0, format!("120 circuits, {n_checked} entries, worst error/tolerance {worst:.3e}"))
}

fn unitarity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    let mut applied = 0;
    while applied < 10_000 {
        let n = rng.random_range(1..=6);
        let mut s = QuantumState::zero(n).map_err(|e| e.to_string())?;
        for _ in 0..50 {
            let thetas: Vec<f64> = (0..n * 3).map(|_| rng.random_range(-7.0..7.0)).collect();
            let range = if n > 1 { rng.random_range(1..n) } else { 1 };
            apply_sel_layer(&mut s, &thetas, range).map_err(|e| e.to_string())?;
            worst = worst.max((s.norm_sqr().sqrt() - 1.0).abs());
            applied += 1;
        }
    }
    check(worst < 1e-12, format!("{applied} layers, max |norm - 1| = {worst:.2e}"))
}

/// Largest relative residual after keeping harmonics 0..=max_n of samples
/// on a uniform periodic grid.
fn harmonic_residual(samples: &[f64], max_n: usize) -> f64 {
    let m = samples.len();
    let w = 2.0 * std::f64::consts::PI / m as f64;
    let mut recon = vec![0.0; m];
    for n in 0..=max_n {
        let (mut a, mut b) = (0.0, 0.0);
        for (i, v) in samples.iter().enumerate() {
            a += v * (n as f64 * w * i as f64).cos();
            b += v * (n as f64 * w * i as f64).sin();
        }
        let scale = if n == 0 { 1.0 } else { 2.0 } / m as f64;
        for (i, r) in recon.iter_mut().enumerate() {
            *r += scale * (a * (n as f64 * w * i as f64).cos() + b * (n as f64 * w * i as f64).sin());
        }
    }
    let norm = samples.iter().map(|v| v * v).sum::<f64>().sqrt();
    let res = samples.iter().zip(&recon).map(|(v, r)| (v - r).powi(2)).sum::<f64>().sqrt();
    res / norm
}

fn forward_structure() -> Outcome {
    let c = PhysicsConstants::default();
    let mut worst_bh = 0.0f64;
    let mut worst_affine = 0.0f64;
    let mut worst_harm = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let kins = [(5.75, 2.22, 0.333, -0.16), (5.75, 1.9, 0.26, -0.3), (10.6, 3.5, 0.4, -0.45), (5.75, 3.3, 0.45, -0.35)];
    for &(k, q2, xb, t) in &kins {
        let kin = derive_kinematics(k, q2, xb, t, &c, false).map_err(|e| e.to_string())?;
        let ff = kelly_form_factors(kin.t, &c);
        let phis: Vec<f64> = (0..360).map(|i| i as f64 + 0.5).collect();
        let a = CffSet::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 0.0);
        let b = CffSet::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 0.0);
        let (al, be) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let mix = CffSet::from_array([0, 1, 2, 3].map(|i| al * a.to_array()[i] + be * b.to_array()[i]));
        let mut int_pp = Vec::new();
        let mut bh_pp = Vec::new();
        for &phi in &phis {
            let bh = bh_term(&kin, &ff, &c, phi).unwrap();
            let f0 = forward_model(&kin, &ff, &c, &CffSet::default(), phi).unwrap();
            worst_bh = worst_bh.max((f0 - bh).abs() / bh.abs());
            let ia = interference_term(&kin, &ff, &c, &a, phi).unwrap();
            let ib = interference_term(&kin, &ff, &c, &b, phi).unwrap();
            let im = forward_model(&kin, &ff, &c, &mix, phi).unwrap() - bh;
            let scale = (al * ia).abs() + (be * ib).abs() + bh.abs();
            worst_affine = worst_affine.max((im - al * ia - be * ib).abs() / scale);
            let (p1, p2) = lepton_propagators(&kin, phi);
            int_pp.push(ia * p1 * p2);
            bh_pp.push(bh * p1 * p2);
        }
        worst_harm = worst_harm.max(harmonic_residual(&int_pp, 3)).max(harmonic_residual(&bh_pp, 3));
    }
    check(
        worst_bh == 0.0 && worst_affine < 1e-13 && worst_harm < 1e-10,
        format!("zero-CFF deviation {worst_bh:.1e}, affine residual {worst_affine:.1e}, n>3 harmonic residual {worst_harm:.1e}"),
    )
}

fn closure() -> Outcome {
    let c = PhysicsConstants::default();
    let templates = synthetic_templates(20, 11, &c).map_err(|e| e.to_string())?;
    let mut good = 0;
    let mut worst = 0.0f64;
    for b in &templates {
        let pb = make_pseudobin(b, &GeneratorSet::BASIC, 0.0, 1, &c).map_err(|e| e.to_string())?;
        let prob = BinProblem::new(&pb.bin, &c).map_err(|e| e.to_string())?;
        let fit = fit_local(ModelClass::Cdnn, &prob, &FitConfig { seed: 5, ..Default::default() })
            .map_err(|e| e.to_string())?;
        let m = MdvcsGrid::new(b, &c).map_err(|e| e.to_string())?.between(&fit.cffs, &pb.truth);
        let mean_f = pb.truth_f.iter().sum::<f64>() / pb.truth_f.len() as f64;
        let ratio = m / (mean_f * 345.0);
        worst = worst.max(ratio);
        if ratio < 0.02 {
            good += 1;
        }
    }
    check(good >= 18, format!("{good}/20 bins below 2%, worst ratio {worst:.2e}"))
}

fn qualifier_formula() -> Outcome {
    let exact = XI_HAT_COEFFS == (1.98, -0.132, -0.583)
        && qualifier(0.0, 0.0) == -0.583
        && qualifier(1.0, 0.0) == 1.98 - 0.583
        && qualifier(0.0, 1.0) == -0.132 - 0.583;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut monotone = true;
    for _ in 0..10_000 {
        let (e, n) = (rng.random_range(0.0..2.0), rng.random_range(0.0..1.0));
        let d = rng.random_range(1e-6..0.5);
        monotone &= qualifier(e + d, n) > qualifier(e, n) && qualifier(e, n + d) < qualifier(e, n);
    }
    let example = (qualifier(0.5, 0.2) - 0.3806).abs() < 1e-12;
    check(exact && monotone && example, format!("coefficients exact {exact}, monotone {monotone}, example {example}"))
}

fn error_taxonomy() -> Outcome {
    let c = PhysicsConstants::default();
    let t = synthetic_templates(1, 3, &c).map_err(|e| e.to_string())?;
    let pb = make_pseudobin(&t[0], &GeneratorSet::BASIC, 1.0, 2, &c).map_err(|e| e.to_string())?;
    let prob = BinProblem::new(&pb.bin, &c).map_err(|e| e.to_string())?;
    let mut spread = [0.0; 4];
    for class in [ModelClass::Cdnn, ModelClass::Fqdnn] {
        let cfg = FitConfig { epochs: 200, seed: 9, ..Default::default() };
        let a = algorithmic_error(class, &prob, 5, SeedPolicy::Shared, &cfg).map_err(|e| e.to_string())?;
        for k in 0..4 {
            spread[k] = f64::max(spread[k], a[k]);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut worst_prec = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(2..60);
        let shift = rng.random_range(-1e3..1e3);
        let cffs: Vec<CffSet> =
            (0..n).map(|_| CffSet::from_array([0; 4].map(|_| shift + rng.random_range(-5.0..5.0)))).collect();
        let got = precision_of(&cffs).map_err(|e| e.to_string())?;
        for k in 0..4 {
            let col: Vec<f64> = cffs.iter().map(|x| x.to_array()[k]).collect();
            let oracle = col.iter().population_std_dev();
            worst_prec = worst_prec.max((got[k] - oracle).abs());
        }
    }

    let truth = CffSet::new(1.5, -0.75, 2.25, 0.0625);
    let d = [0.25, 0.5, -0.125, 0.03125];
    let lo = CffSet::from_array([0, 1, 2, 3].map(|k| truth.to_array()[k] - d[k]));
    let hi = CffSet::from_array([0, 1, 2, 3].map(|k| truth.to_array()[k] + d[k]));
    let ens = ReplicaEnsemble::from_cffs(1, ModelClass::Cdnn, &[lo, hi, truth]);
    let acc = accuracy(&ens, Some(&truth)).map_err(|e| e.to_string())?;

    check(
        spread == [0.0; 4] && worst_prec < 1e-12 && acc == [0.0; 4],
        format!("identical-replica spread {spread:?}, precision vs oracle {worst_prec:.1e}, accuracy {acc:?}"),
    )
}

fn global_sigma() -> Outcome {
    let (m2, s2) = ensemble_stats(&[0.0, 2.0]).map_err(|e| e.to_string())?;
    let exact = m2 == 1.0 && s2 == 2f64.sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut worst_oracle = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(2..100);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let (m, s) = ensemble_stats(&v).map_err(|e| e.to_string())?;
        worst_oracle = worst_oracle.max((m - v.iter().mean()).abs()).max((s - v.iter().std_dev()).abs());
    }

    let c = PhysicsConstants::default();
    let t = synthetic_templates(30, 4, &c).map_err(|e| e.to_string())?;
    let data: Vec<LocalExtraction> = t
        .iter()
        .map(|b| {
            let m = GeneratorSet::BASIC.eval(b.xb, b.t).unwrap();
            let s = CffSet::from_array(m.to_array().map(|v| 0.05 * v.abs() + 0.01));
            LocalExtraction { set_id: b.set_id, k: b.k, q2: b.q2, xb: b.xb, t: b.t, mean: m, sigma: s }
        })
        .collect();
    let cfg = GlobalFitConfig { n_replicas: 50, seed: 1, ..Default::default() };
    let ens = train_global(&data, &cfg).map_err(|e| e.to_string())?;
    let grid = kinematic_grid((0.15, 0.6, 10), (-0.6, -0.05, 10), (1.2, 4.5, 6));
    let preds = ens.predict_many(&grid).map_err(|e| e.to_string())?;

    // The reported mean and sigma are the ensemble statistics of the replica predictions.
    let reps = ens.replica_predictions(&grid);
    for (i, p) in preds.iter().enumerate() {
        for k in 0..4 {
            let col: Vec<f64> = reps.iter().map(|r| r[i].to_array()[k]).collect();
            worst_oracle = worst_oracle
                .max((p.mean.to_array()[k] - col.iter().mean()).abs())
                .max((p.sigma.to_array()[k] - col.iter().std_dev()).abs());
        }
    }

    let mut acc = [[0.0; 4]; 2];
    let mut cnt = [0usize; 2];
    for p in &preds {
        let i = p.extrapolated as usize;
        cnt[i] += 1;
        for k in 0..4 {
            acc[i][k] += p.sigma.to_array()[k];
        }
    }
    let interior = acc[0].map(|v| v / cnt[0] as f64);
    let exterior = acc[1].map(|v| v / cnt[1] as f64);
    let ordered = cnt[0] > 0 && cnt[1] > 0 && (0..4).all(|k| exterior[k] >= interior[k]);
    check(
        exact && worst_oracle < 1e-12 && ordered,
        format!(
            "{{0,2}} -> ({m2}, {s2}), oracle deviation {worst_oracle:.1e}, \
             mean sigma interior {interior:.3?} ({}) vs exterior {exterior:.3?} ({})",
            cnt[0], cnt[1]
        ),
    )
}

const SMOKE: &str = r#"
threads = 1
[paths]
data = "out/pseudodata.csv"
truth = "out/truth_cffs.csv"
output = "out"
[models]
classes = ["cdnn", "fqdnn"]
n_replicas = 3
[fit]
epochs = 150
gradient = "adjoint"
[pseudodata]
synthetic_templates = 4
qualifier_grid = true
[evaluate]
algorithmic_replicas = 2
methodological_draws = 2
[global]
grid_points = [3, 3, 2]
[global.fit]
n_replicas = 3
epochs = 40
"#;

fn hash_dir(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(key, Sha256::digest(std::fs::read(&p).unwrap()).to_vec());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let commands = ["generate", "fit-local", "evaluate", "qualify", "fit-global", "report"];
    let mut trees = Vec::new();
    for _ in 0..2 {
        let d = tempfile::tempdir().map_err(|e| e.to_string())?;
        std::fs::write(d.path().join("run.toml"), SMOKE).unwrap();
        let mut snapshots = Vec::new();
        for cmd in commands {
            let o = Command::new(env!("CARGO_BIN_EXE_cffq"))
                .args(["-c", "run.toml", cmd])
                .current_dir(d.path())
                .env_remove("CFFQ_OUTPUT_DIR")
                .output()
                .map_err(|e| e.to_string())?;
            if !o.status.success() {
                return Err(format!("{cmd} failed: {}", String::from_utf8_lossy(&o.stderr)));
            }
            snapshots.push(hash_dir(&d.path().join("out")));
        }
        trees.push(snapshots);
    }
    let mismatched: Vec<&str> =
        commands.iter().zip(trees[0].iter().zip(&trees[1])).filter(|(_, (a, b))| a != b).map(|(c, _)| *c).collect();
    let n_files = trees[0].last().map_or(0, |t| t.len());
    check(
        mismatched.is_empty(),
        format!("{n_files} output files hashed after each of {} commands, mismatches {mismatched:?}", commands.len()),
    )
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

/// Average ranks, ties sharing the mean of their positions.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    r
}

/// Spearman rho and its one-sided p-value for rho > 0 (t approximation).
fn spearman(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (rx.iter().mean(), ry.iter().mean());
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    let rho = sxy / (sxx * syy).sqrt();
    let n = x.len() as f64;
    let t = rho * ((n - 2.0) / (1.0 - rho * rho)).sqrt();
    let p = 1.0 - StudentsT::new(0.0, 1.0, n - 2.0).unwrap().cdf(t);
    (rho, p)
}

struct Cell {
    s: f64,
    xi_hat: f64,
    xi: f64,
}

/// Fresh templates, four noise levels, 50 replicas per cell; each replica is
/// fitted by both model classes and compared by median curve distance.
fn decision_grid() -> Result<Vec<Cell>, String> {
    let c = PhysicsConstants::default();
    let templates = synthetic_templates(20, 2027, &c).map_err(|e| e.to_string())?;
    let n_rep = 50;
    let mut cells = Vec::new();
    for b in &templates {
        let grid = MdvcsGrid::new(b, &c).map_err(|e| e.to_string())?;
        for (si, &s) in QUALIFIER_NOISE_SCALES.iter().enumerate() {
            let mut bins = Vec::with_capacity(n_rep);
            let (mut mc, mut mq) = (Vec::new(), Vec::new());
            for r in 0..n_rep {
                let seed = derive_seed(31, &[b.set_id as u64, si as u64, r as u64]);
                let pb = make_pseudobin(b, &GeneratorSet::BASIC, s, seed, &c).map_err(|e| e.to_string())?;
                let prob = BinProblem::new(&pb.bin, &c).map_err(|e| e.to_string())?;
                let cc = FitConfig { seed, ..Default::default() };
                let qc = FitConfig { seed, gradient: QuantumGradient::Adjoint, ..Default::default() };
                let fc = fit_local(ModelClass::Cdnn, &prob, &cc).map_err(|e| e.to_string())?;
                let fq = fit_local(ModelClass::Fqdnn, &prob, &qc).map_err(|e| e.to_string())?;
                mc.push(grid.between(&fc.cffs, &pb.truth));
                mq.push(grid.between(&fq.cffs, &pb.truth));
                bins.push(pb.bin);
            }
            let eps = avg_scaled_error(&bins, s).value;
            let pooled: Vec<(f64, f64)> = bins.iter().flat_map(|b| b.points.iter().map(|p| (p.phi_deg, p.f))).collect();
            let n = nonlinearity(&pooled).map_err(|e| e.to_string())?;
            let xi = xi_outperformance(median(mc), median(mq)).map_err(|e| e.to_string())?;
            cells.push(Cell { s, xi_hat: qualifier(eps, n), xi });
        }
    }
    Ok(cells)
}

fn decision_quality(cells: &[Cell]) -> Outcome {
    let confident: Vec<&Cell> = cells.iter().filter(|c| c.xi_hat.abs() > 0.1).collect();
    let correct = confident.iter().filter(|c| (c.xi_hat > 0.0) == (c.xi > 0.0)).count();
    let frac = correct as f64 / confident.len().max(1) as f64;
    let quantum_better = cells.iter().filter(|c| c.xi > 0.0).count();
    check(
        !confident.is_empty() && frac >= 0.9,
        format!(
            "{correct}/{} confident cells agree ({:.1}%); measured Xi > 0 in {quantum_better}/{} cells, \
             Xi range [{:+.4}, {:+.4}]",
            confident.len(),
            100.0 * frac,
            cells.len(),
            cells.iter().map(|c| c.xi).fold(f64::INFINITY, f64::min),
            cells.iter().map(|c| c.xi).fold(f64::NEG_INFINITY, f64::max),
        ),
    )
}

fn noise_trend(cells: &[Cell]) -> Outcome {
    let s: Vec<f64> = cells.iter().map(|c| c.s).collect();
    let xi: Vec<f64> = cells.iter().map(|c| c.xi).collect();
    let (rho, p) = spearman(&s, &xi);
    check(rho > 0.0 && p < 0.05, format!("Spearman rho {rho:+.3}, one-sided p {p:.3e} over {} cells", cells.len()))
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let wanted = |name: &str| filter.as_deref().is_none_or(|f| name.contains(f));
    let mut results: Vec<(&str, Outcome, f64)> = Vec::new();
    let mut run = |name: &'static str, f: &dyn Fn() -> Outcome| {
        if !wanted(name) {
            return;
        }
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (tag, msg) = match &out {
            Ok(m) => ("PASS", m),
            Err(m) => ("FAIL", m),
        };
        println!("{tag} {name} ({secs:.1} s): {msg}");
        results.push((name, out, secs));
    };

    run("complexity_parity", &complexity_parity);
    run("sel_parameter_count", &sel_count);
    run("gradient_fidelity", &gradient_fidelity);
    run("unitarity", &unitarity);
    run("forward_model_structure", &forward_structure);
    run("closure", &closure);
    run("qualifier_formula", &qualifier_formula);
    run("error_taxonomy", &error_taxonomy);
    run("global_fit_sigma", &global_sigma);
    run("determinism", &determinism);

    if wanted("decision_quality") || wanted("noise_trend") {
        let start = Instant::now();
        match catch_unwind(decision_grid).unwrap_or_else(|_| Err("panicked".into())) {
            Ok(cells) => {
                for c in &cells {
                    println!("  cell s={} xi_hat={:+.4} xi={:+.5}", c.s, c.xi_hat, c.xi);
                }
                run("qualifier_decision_quality", &|| decision_quality(&cells));
                run("noise_trend", &|| noise_trend(&cells));
            }
            Err(e) => {
                for name in ["qualifier_decision_quality", "noise_trend"] {
                    println!("FAIL {name}: grid run failed: {e}");
                    results.push((name, Err(e.clone()), 0.0));
                }
            }
        }
        println!("decision grid took {:.0} s", start.elapsed().as_secs_f64());
    }

    let failed: Vec<&str> = results.iter().filter(|r| r.1.is_err()).map(|r| r.0).collect();
    println!("{} criteria, {} passed, {} failed", results.len(), results.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
