//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line per criterion and exits nonzero if any fails.

use std::f64::consts::{PI, TAU};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{UnitQuaternion, Vector3};
use sct_core::control::run_campaign;
use sct_core::experiments::{ablate, fresh_campaign};
use sct_core::geometry::{curvature_torsion, CurvatureTorsion, finite_differences, geodesic_angle, Pose, Trajectory};
use sct_core::memory::{self, Action, MemoryConfig, MemoryEntry, MemoryStore, SharedStore, SuccessImage, VisualFeature};
use sct_core::perturb::{
    local_moments, perturb_detailed, rbf_weights, ActionMatrix, ActionVector, GaussianStream, PerturbParams,
    PerturbationSampler,
};
use sct_core::quality::{efficiency_score, gate, smoothness_score, stability_score, EvalParams};
use sct_core::sim::TaskId;
use sct_core::termination::{decide_prepared, pearson_similarity, PreparedImage, TermParams};
use sct_core::{Config, Error};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn task(id: &str) -> TaskId {
    id.parse().expect("known task")
}

fn curve(n: usize, dt: f64, f: impl Fn(f64) -> Vector3<f64>) -> Trajectory {
    Trajectory::from_positions((0..n).map(|i| f(i as f64 * dt)), dt).expect("valid curve")
}

const EDGE: usize = 3;

fn c1_geometry() -> Outcome {
    let n = 200;
    let circle = curve(n, TAU / n as f64, |s| Vector3::new(2.0 * s.cos(), 2.0 * s.sin(), 0.0));
    let ct = curvature_torsion(&finite_differences(&circle).map_err(|e| e.to_string())?);
    let kappa_err = ct.iter().map(|c| (c.curvature - 0.5).abs() / 0.5).fold(0.0, f64::max);
    ensure!(kappa_err <= 0.02, "circle curvature error {kappa_err:.4} > 2%");

    let c = 0.5;
    let helix = curve(400, 4.0 * PI / 400.0, |s| Vector3::new(s.cos(), s.sin(), c * s));
    let expected = c / (1.0 + c * c);
    let ct = curvature_torsion(&finite_differences(&helix).map_err(|e| e.to_string())?);
    // Torsion needs a third derivative, whose nested one-sided stencils
    // reach three samples in from each end; those samples are reported but
    // not held to the tolerance.
    let rel = |x: &CurvatureTorsion| (x.torsion - expected).abs() / expected;
    let tau_err = ct[EDGE..ct.len() - EDGE].iter().map(rel).fold(0.0, f64::max);
    let edge_err = ct.iter().map(rel).fold(0.0, f64::max);
    ensure!(tau_err <= 0.05, "helix torsion error {tau_err:.4} > 5%");

    let mut geo_err: f64 = 0.0;
    for theta in [0.01, 0.137, 0.5, 1.2] {
        for count in [2usize, 10, 50, 200] {
            let qs: Vec<_> = (0..count)
                .map(|i| UnitQuaternion::from_axis_angle(&Vector3::z_axis(), i as f64 * theta).into_inner())
                .collect();
            let total: f64 = qs.windows(2).map(|w| geodesic_angle(&w[0], &w[1]).unwrap()).sum();
            geo_err = geo_err.max((total - (count - 1) as f64 * theta).abs());
        }
    }
    ensure!(geo_err < 1e-6, "geodesic accumulation error {geo_err:e}");
    Ok(format!(
        "kappa err {:.3}%, torsion err {:.3}% (end samples {:.1}%), geodesic err {geo_err:.1e}",
        kappa_err * 100.0,
        tau_err * 100.0,
        edge_err * 100.0
    ))
}

fn random_trajectory(g: &mut GaussianStream) -> Trajectory {
    let n = 5 + (g.uniform() * 40.0) as usize;
    let mut p = Vector3::zeros();
    let mut q = UnitQuaternion::identity();
    let poses = (0..n)
        .map(|_| {
            p += Vector3::from_fn(|_, _| 0.05 * g.standard_normal());
            q *= UnitQuaternion::from_scaled_axis(Vector3::from_fn(|_, _| 0.2 * g.standard_normal()));
            Pose::from_parts(p, q).unwrap()
        })
        .collect();
    Trajectory::new(poses, 0.2).unwrap()
}

fn c2_scores() -> Outcome {
    let p = EvalParams::default();
    let line = Trajectory::new(
        (0..40)
            .map(|i| Pose::from_parts(Vector3::new(0.02, -0.01, 0.005) * i as f64, UnitQuaternion::identity()).unwrap())
            .collect(),
        0.2,
    )
    .unwrap();
    let (e, s, m) = (
        efficiency_score(&line, &p).unwrap(),
        stability_score(&line, &p).unwrap(),
        smoothness_score(&line, &p).unwrap(),
    );
    ensure!(e == 1.0 && s == 1.0, "straight line s_eff {e}, s_sta {s}");
    ensure!(m >= 0.999999, "straight line s_smo {m}");

    let mut g = GaussianStream::new(2);
    for _ in 0..200 {
        let t = random_trajectory(&mut g);
        let e = efficiency_score(&t, &EvalParams { a: 0.0, b: 0.0, ..p.clone() }).unwrap();
        let s = stability_score(&t, &EvalParams { k: 0.0, ..p.clone() }).unwrap();
        let m = smoothness_score(&t, &EvalParams { mu: 0.0, ..p.clone() }).unwrap();
        ensure!(e == 1.0 && s == 1.0 && m == 1.0, "zeroed coefficients gave {e}, {s}, {m}");
    }
    Ok(format!("line s_smo {m:.9}; 200 random trajectories at zeroed coefficients"))
}

fn random_bank(g: &mut GaussianStream, n: usize, dim: usize) -> Vec<MemoryEntry> {
    (0..n)
        .map(|k| MemoryEntry {
            feature: VisualFeature::new((0..dim).map(|_| g.standard_normal()).collect()).unwrap(),
            action: Action::new(std::array::from_fn(|_| 2.0 * g.uniform() - 1.0)).unwrap(),
            episode_id: "bank".into(),
            step_index: k as u64,
        })
        .collect()
}

fn c3_moments() -> Outcome {
    let mut g = GaussianStream::new(3);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let n = 1 + (g.uniform() * 50.0) as usize;
        let bank = random_bank(&mut g, n, 16);
        let current = VisualFeature::new((0..16).map(|_| g.standard_normal()).collect()).unwrap();
        let gamma = 0.1 + 5.0 * g.uniform();
        let w = rbf_weights(&current, &bank, gamma).unwrap();
        let m = match local_moments(&w, &bank, 1e-300) {
            Ok(m) => m,
            Err(e) => return Err(format!("bank {i}: {e}")),
        };
        let total: f64 = w.iter().sum();
        let mut mean = [0.0; 7];
        for (wk, e) in w.iter().zip(&bank) {
            for d in 0..7 {
                mean[d] += wk * e.action.values()[d];
            }
        }
        for v in &mut mean {
            *v /= total;
        }
        let mut cov = [[0.0; 7]; 7];
        for (wk, e) in w.iter().zip(&bank) {
            let a = e.action.values();
            for r in 0..7 {
                for c in 0..7 {
                    cov[r][c] += wk * (a[r] - mean[r]) * (a[c] - mean[c]);
                }
            }
        }
        for r in 0..7 {
            worst = worst.max((m.mean[r] - mean[r]).abs());
            for c in 0..7 {
                worst = worst.max((m.covariance[(r, c)] - cov[r][c] / total).abs());
            }
        }
    }
    ensure!(worst <= 1e-12, "max deviation from the double-loop oracle {worst:e}");
    Ok(format!("1000 banks, max deviation {worst:.1e}"))
}

fn c4_sampler() -> Outcome {
    let mut g = GaussianStream::new(4);
    let bank = random_bank(&mut g, 30, 8);
    let moments = local_moments(&vec![1.0; bank.len()], &bank, 1e-6).unwrap();
    let params = PerturbParams { alpha: 0.0, ..PerturbParams::default() };
    let sampler = PerturbationSampler::new(&moments, &params).map_err(|e| e.to_string())?;
    let target = sampler.regularized_covariance() * (params.temperature * params.beta)
        + ActionMatrix::identity() * (params.sigma * params.sigma);

    let a_c = ActionVector::from_column_slice(&[0.3, -0.2, 0.1, 0.0, -0.4, 0.25, 0.9]);
    let n = 100_000;
    let mut stream = GaussianStream::new(40);
    let mut sum = ActionVector::zeros();
    let mut outer = ActionMatrix::zeros();
    for _ in 0..n {
        let d = sampler.draw_unclipped(&a_c, &mut stream) - a_c;
        sum += d;
        outer += d * d.transpose();
    }
    let mean_offset = sum / n as f64;
    let cov = (outer - mean_offset * sum.transpose()) / (n - 1) as f64;
    let frob = (cov - target).norm() / target.norm();
    let mean_err = mean_offset.norm();
    ensure!(frob <= 0.05, "covariance off by {:.2}% Frobenius", frob * 100.0);
    ensure!(mean_err <= 0.01, "sample mean is {mean_err:.4} from the proposal");
    Ok(format!("covariance {:.2}% Frobenius, mean offset {mean_err:.4}", frob * 100.0))
}

fn c5_degenerate() -> Outcome {
    let mut g = GaussianStream::new(5);
    let bounds = PerturbParams::default().action_bounds;
    for trial in 0..200 {
        let bank = random_bank(&mut g, 1 + trial % 40, 8);
        let current = bank[trial % bank.len()].feature.clone();
        let proposed = Action::new(std::array::from_fn(|_| 3.0 * g.standard_normal())).unwrap();
        let w = rbf_weights(&current, &bank, 5.0).unwrap();
        let m = local_moments(&w, &bank, 1e-6).unwrap();
        let mut mean = [0.0; 7];
        mean.copy_from_slice(m.mean.as_slice());
        let quiet = |alpha| PerturbParams { alpha, beta: 0.0, sigma: 0.0, ..PerturbParams::default() };

        let pulled = perturb_detailed(&proposed, &current, &bank, &quiet(1.0), trial as u64).unwrap();
        ensure!(pulled.action == bounds.clip(&Action::new(mean).unwrap()), "trial {trial}: alpha=1 is not clip(mean)");
        let kept = perturb_detailed(&proposed, &current, &bank, &quiet(0.0), trial as u64).unwrap();
        ensure!(kept.action == bounds.clip(&proposed), "trial {trial}: alpha=0 is not clip(proposal)");
        let empty: Vec<MemoryEntry> = Vec::new();
        let fallback = perturb_detailed(&proposed, &current, &empty, &PerturbParams::default(), trial as u64).unwrap();
        ensure!(fallback.fell_back && fallback.action == bounds.clip(&proposed), "trial {trial}: empty bank did not fall back");
    }
    Ok("200 trials, exact equality".into())
}

fn c6_termination() -> Outcome {
    let mut g = GaussianStream::new(6);
    let mut worst: f64 = 0.0;
    let mut affine: f64 = 0.0;
    for _ in 0..500 {
        let x: Vec<f64> = (0..64 * 64).map(|_| g.uniform()).collect();
        let y: Vec<f64> = (0..64 * 64).map(|_| if g.uniform() < 0.5 { g.uniform() } else { 0.0 }).collect();
        let y: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a + 0.5 * b).collect();
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for i in 0..x.len() {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
            syy += (y[i] - my) * (y[i] - my);
        }
        let oracle = (sxy / (sxx * syy).sqrt() + 1.0) / 2.0;
        worst = worst.max((pearson_similarity(&x, &y).unwrap() - oracle).abs());

        let a = 0.1 + 10.0 * g.uniform();
        let b = 10.0 * g.uniform() - 5.0;
        let z: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        affine = affine.max((pearson_similarity(&x, &z).unwrap() - 1.0).abs());
    }
    ensure!(worst <= 1e-12, "Pearson deviates from the oracle by {worst:e}");
    ensure!(affine <= 1e-12, "affine copies score {affine:e} below 1");

    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    for trial in 0..100 {
        let base: Vec<f64> = (0..64 * 64).map(|_| g.uniform()).collect();
        let views: Vec<PreparedImage> = (0..1 + trial % 10)
            .map(|k| {
                let noise = 0.2 * k as f64;
                PreparedImage::new(&base.iter().map(|v| v + noise * g.standard_normal()).collect::<Vec<_>>())
            })
            .collect();
        let current = PreparedImage::new(&base);
        let stops: Vec<bool> = grid
            .iter()
            .map(|&tau| decide_prepared(&current, &views, &TermParams { tau_term: tau, ..TermParams::default() }).stop)
            .collect();
        ensure!(stops.windows(2).all(|w| w[0] || !w[1]), "trial {trial}: stop decisions not monotone in tau");
    }
    Ok(format!("500 pairs, oracle err {worst:.1e}, affine err {affine:.1e}; 100 repositories monotone"))
}

fn windows_of(tasks: &[&str], cfg: &Config, take: usize) -> Vec<Trajectory> {
    let tasks: Vec<TaskId> = tasks.iter().map(|t| task(t)).collect();
    let w = cfg.control.eval_window;
    let stride = w.div_ceil(2);
    let mut out = Vec::new();
    let store = SharedStore::new(MemoryStore::new(cfg.memory.clone()).unwrap());
    run_campaign(&tasks, cfg, 40, 7000, &store, |_, t| {
        for i in 0..t.steps.len() {
            if i + 1 >= w && (i + 1 - w).is_multiple_of(stride) {
                let poses = t.steps[i + 1 - w..=i].iter().map(|s| s.pose).collect();
                out.push(Trajectory::new(poses, sct_core::sim::DT).unwrap());
            }
        }
    })
    .unwrap();
    out.truncate(take);
    out
}

/// 500 windows cut at the controller's cadence from fixed-seed episodes,
/// proposals executed unmodified: half from clean policies, half from the
/// mixed policies of every task family.
fn frozen_corpus(cfg: &Config) -> Vec<Trajectory> {
    let mut base = cfg.clone();
    base.control.correction_enabled = false;
    base.control.termination_enabled = false;
    let mut corpus = windows_of(&["goal:clean", "object:clean", "spatial:clean", "long:clean"], &base, 250);
    corpus.extend(windows_of(&["goal", "object", "spatial", "long"], &base, 250));
    corpus
}

/// Low-quality window counts of the corpus at each grid threshold, measured
/// once and pinned.
const C7_GOLDEN: [usize; 5] = [250, 315, 465, 495, 495];

fn c7_activation() -> Outcome {
    let cfg = Config::default();
    let corpus = frozen_corpus(&cfg);
    ensure!(corpus.len() == 500, "corpus holds {} windows", corpus.len());
    let scores: Vec<(f64, f64, f64)> = corpus
        .iter()
        .map(|t| {
            (
                efficiency_score(t, &cfg.eval).unwrap(),
                stability_score(t, &cfg.eval).unwrap(),
                smoothness_score(t, &cfg.eval).unwrap(),
            )
        })
        .collect();
    let grid = [0.55, 0.65, 0.75, 0.85, 0.95];
    let counts: Vec<usize> = grid
        .iter()
        .map(|&thr| {
            let p = EvalParams { gate_threshold: thr, ..cfg.eval.clone() };
            scores.iter().filter(|(e, s, m)| gate(*e, *s, *m, &p).gate_low_quality).count()
        })
        .collect();
    let rates: Vec<String> = counts.iter().map(|c| format!("{:.3}", *c as f64 / 500.0)).collect();
    ensure!(counts.windows(2).all(|w| w[0] <= w[1]), "activation not monotone: {rates:?}");
    ensure!(counts == C7_GOLDEN, "activation counts {counts:?} differ from pinned {C7_GOLDEN:?}");
    Ok(format!("activation {}", rates.join(" <= ")))
}

/// Successes out of 500 per ablation row, measured once and pinned.
const C8_GOLDEN: [(bool, bool, usize); 4] = [(false, false, 135), (true, false, 197), (false, true, 185), (true, true, 299)];

fn c8_end_to_end() -> Outcome {
    let cfg = Config::default();
    let episodes = 500;
    let rows = ablate(&[task("object:mixed")], &cfg, episodes, 0).map_err(|e| e.to_string())?;
    let rate = |c: bool, t: bool| {
        let r = rows.iter().find(|r| r.correction == c && r.termination == t).expect("row present");
        &r.report.rows[0]
    };
    let (off_off, on_off, off_on, on_on) = (
        rate(false, false).success_rate,
        rate(true, false).success_rate,
        rate(false, true).success_rate,
        rate(true, true).success_rate,
    );
    let gap = 0.05 - 1e-12;
    ensure!(on_on - on_off >= gap, "on/on {on_on:.3} vs on/off {on_off:.3}");
    ensure!(on_off - off_off >= gap, "on/off {on_off:.3} vs off/off {off_off:.3}");
    ensure!(off_on - off_off >= gap, "off/on {off_on:.3} vs off/off {off_off:.3}");
    ensure!(on_on >= on_off.max(off_on), "on/on below a single-module row");
    for (c, t, golden) in C8_GOLDEN {
        let got = rate(c, t).successes;
        ensure!(got == golden, "row {c}/{t}: {got} successes, pinned {golden}");
    }

    let mut base = cfg.clone();
    base.control.correction_enabled = false;
    let tasks = [task("object:clean"), task("object:non_terminating")];
    let timeout = |termination: bool| -> Result<f64, String> {
        let mut c = base.clone();
        c.control.termination_enabled = termination;
        let report = fresh_campaign(&tasks, &c, episodes, 0).map_err(|e| e.to_string())?;
        Ok(report.rows[1].timeout_rate)
    };
    let (t_off, t_on) = (timeout(false)?, timeout(true)?);
    ensure!(t_off > 0.0 && t_on <= 0.2 * t_off, "timeout rate {t_on:.3} with termination vs {t_off:.3} without");
    ensure!((t_off, t_on) == (1.0, 0.0), "timeout rates {t_off}/{t_on} differ from pinned 1/0");
    Ok(format!(
        "success off/off {off_off:.3}, on/off {on_off:.3}, off/on {off_on:.3}, on/on {on_on:.3}; non-terminating timeouts {t_off:.3} -> {t_on:.3}"
    ))
}

fn cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("sct").chain(args.iter().copied());
    let code = sct_cli::run_cli(argv, &mut out, &mut err);
    ensure!(code == 0, "sct {} exited {code}: {}", args.join(" "), String::from_utf8_lossy(&err));
    Ok(out)
}

fn directory_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map(|it| it.flatten().map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())).collect())
        .unwrap_or_default();
    files.sort();
    files
}

fn c9_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let config = root.join("sct.toml");
    std::fs::write(&config, "[perturb]\nsigma = 0.03\n\n[loop]\nmax_steps = 120\n").unwrap();
    let poses = root.join("poses.csv");
    let mut log = String::from("t,px,py,pz,qw,qx,qy,qz\n");
    for i in 0..30 {
        let s = i as f64 * 0.2;
        let q = UnitQuaternion::from_euler_angles(0.1 * s, 0.0, 0.3 * s);
        log.push_str(&format!("{s},{},{},{},{},{},{},{}\n", s.cos(), s.sin(), 0.1 * s, q.w, q.i, q.j, q.k));
    }
    std::fs::write(&poses, log).unwrap();
    let cfg = config.to_str().unwrap();

    let mut runs: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for rep in 0..2 {
        let dir = root.join(format!("rep{rep}"));
        let d = |name: &str| dir.join(name).to_str().unwrap().to_owned();
        std::fs::create_dir_all(&dir).unwrap();
        let mut outputs = Vec::new();
        let mut record = |name: &str, bytes: Vec<u8>| outputs.push((name.to_owned(), bytes));
        record("run", cli(&["--config", cfg, "run", "--task", "object:mixed,goal", "--episodes", "4", "--seed", "7", "--out", &d("run"), "--traces", "--bank-out", &d("bank.jsonl")])?);
        record("replay", cli(&["--config", cfg, "run", "--task", "object", "--episodes", "4", "--seed", "3", "--bank-in", &d("bank.jsonl"), "--replay", "--parallel", "2", "--out", &d("replay")])?);
        record("ablate", cli(&["--config", cfg, "ablate", "--task", "object:biased", "--episodes", "3", "--seed", "2", "--out", &d("ablate")])?);
        record("sweep", cli(&["sweep", "--task", "spatial", "--episodes", "2", "--grid", "0.55,0.75,0.95", "--out", &d("sweep")])?);
        record("score", cli(&["score", poses.to_str().unwrap()])?);
        record("inspect", cli(&["bank", "inspect", &d("bank.jsonl")])?);
        for sub in ["run", "replay", "ablate", "sweep"] {
            for (name, bytes) in directory_bytes(&dir.join(sub)) {
                record(&format!("{sub}/{name}"), bytes);
            }
        }
        record("bank.jsonl", std::fs::read(dir.join("bank.jsonl")).map_err(|e| e.to_string())?);
        runs.push(outputs);
    }
    ensure!(runs[0].len() == runs[1].len(), "output sets differ in size");
    for ((name, a), (_, b)) in runs[0].iter().zip(&runs[1]) {
        ensure!(!a.is_empty(), "{name} is empty");
        ensure!(a == b, "{name} differs between identical invocations");
    }
    Ok(format!("{} outputs byte-identical across repeats", runs[0].len()))
}

fn random_store(g: &mut GaussianStream) -> MemoryStore {
    let dim = 1 + (g.uniform() * 32.0) as usize;
    let (w, h) = (1 + (g.uniform() * 8.0) as usize, 1 + (g.uniform() * 8.0) as usize);
    let config = MemoryConfig {
        feature_dim: dim,
        image_width: w,
        image_height: h,
        entry_capacity: 1 + (g.uniform() * 60.0) as usize,
        image_capacity: 1 + (g.uniform() * 6.0) as usize,
        ..MemoryConfig::default()
    };
    let mut store = MemoryStore::new(config).unwrap();
    for ep in 0..(g.uniform() * 12.0) as usize {
        let id = format!("task:{}/{ep}", (g.uniform() * 1e6) as u64);
        let entries = (0..1 + (g.uniform() * 8.0) as usize)
            .map(|k| MemoryEntry {
                feature: VisualFeature::new((0..dim).map(|_| g.standard_normal() + 1e-3).collect()).unwrap(),
                action: Action::new(std::array::from_fn(|_| 2.0 * g.uniform() - 1.0)).unwrap(),
                episode_id: id.clone(),
                step_index: k as u64 * 3,
            })
            .collect();
        let image = SuccessImage::new(w, h, (0..w * h).map(|_| g.uniform()).collect(), id).unwrap();
        store.record_success(entries, image).unwrap();
    }
    store
}

fn c10_persistence() -> Outcome {
    let mut g = GaussianStream::new(10);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    for i in 0..1000 {
        let store = random_store(&mut g);
        let text = memory::save_to_string(&store).map_err(|e| e.to_string())?;
        let back = memory::load_from_str(&text, store.config().clone()).map_err(|e| format!("store {i}: {e}"))?;
        ensure!(back == store, "store {i} changed across a round trip");
        if i % 100 == 0 {
            let path = tmp.path().join(format!("s{i}.jsonl"));
            memory::save(&store, &path).map_err(|e| e.to_string())?;
            ensure!(memory::load(&path, store.config().clone()).map_err(|e| e.to_string())? == store, "file round trip {i}");
        }
    }

    let corruptions: [(&str, fn(&str) -> String); 5] = [
        ("truncated json", |l| l[..l.len() / 2].to_owned()),
        ("extra action component", |l| l.replacen("\"action\":[", "\"action\":[0.5,", 1)),
        ("unnormalized feature", |l| l.replacen("\"feature\":[", "\"feature\":[3.0,", 1)),
        ("unknown kind", |l| l.replacen("\"kind\":\"entry\"", "\"kind\":\"ghost\"", 1)),
        ("non-numeric value", |l| l.replacen("\"step_index\":", "\"step_index\":\"x\",\"_\":", 1)),
    ];
    let mut diagnosed = 0;
    for trial in 0..200 {
        let store = loop {
            let s = random_store(&mut g);
            if s.entry_count() > 0 {
                break s;
            }
        };
        let text = memory::save_to_string(&store).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        let target = 1 + (g.uniform() * store.entry_count() as f64) as usize;
        let (label, corrupt) = corruptions[trial % corruptions.len()];
        lines[target] = corrupt(&lines[target]);
        let expected = target + 1;
        match memory::load_from_str(&lines.join("\n"), store.config().clone()) {
            Err(e @ Error::Parse { .. }) => {
                let Error::Parse { line, .. } = &e else { unreachable!() };
                ensure!(*line == expected, "{label}: reported line {line}, corrupted line {expected}");
                ensure!(e.to_string().contains(&format!(":{expected}:")), "{label}: message lacks line: {e}");
            }
            Err(e) => {
                ensure!(e.to_string().contains(&format!("line {expected}")), "{label}: {e}");
            }
            Ok(_) => return Err(format!("{label} on line {expected} was accepted")),
        }
        diagnosed += 1;
    }
    let header_only = memory::load_from_str("{\"format\":\"sct-memory\",\"version\":2}", MemoryConfig::default());
    ensure!(matches!(header_only, Err(Error::Parse { line: 1, .. })), "bad header accepted");
    Ok(format!("1000 round trips; {diagnosed} corrupted files rejected at the right line"))
}

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { id: 1, name: "geometry oracles", limit: secs(1), run: c1_geometry },
        Criterion { id: 2, name: "score identities", limit: secs(1), run: c2_scores },
        Criterion { id: 3, name: "moment oracle equivalence", limit: secs(5), run: c3_moments },
        Criterion { id: 4, name: "sampler moments", limit: secs(10), run: c4_sampler },
        Criterion { id: 5, name: "degenerate perturbation identities", limit: None, run: c5_degenerate },
        Criterion { id: 6, name: "termination math", limit: secs(5), run: c6_termination },
        Criterion { id: 7, name: "activation monotonicity", limit: secs(30), run: c7_activation },
        Criterion { id: 8, name: "directional end-to-end gains", limit: secs(300), run: c8_end_to_end },
        Criterion { id: 9, name: "CLI determinism", limit: None, run: c9_determinism },
        Criterion { id: 10, name: "persistence round trip", limit: None, run: c10_persistence },
    ];
    let filter: Option<Vec<usize>> = std::env::var("SCT_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    // Libtest flags such as `--list` or `--bench` carry no meaning here.
    if std::env::args().any(|a| a == "--list") {
        for c in &criteria {
            println!("criterion_{}: test", c.id);
        }
        return;
    }
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        if filter.as_ref().is_some_and(|f| !f.contains(&c.id)) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match (result, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS criterion {:>2} {} ({elapsed:.2?}): {detail}", c.id, c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} {} ({elapsed:.2?}): {why}", c.id, c.name);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
