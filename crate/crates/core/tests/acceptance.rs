//! Acceptance criteria. Runs as a plain binary so every criterion prints
//! one PASS/FAIL line; exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;

use dopt::bench::{brute_force_dopt, run_suite, KRule, SuiteOptions, Variant};
use dopt::linalg::{det_update_full_rank, det_update_rank_deficient, pm1_to_01_transform, InfoMatrix};
use dopt::local_search::{self, LocalSearchOptions, Start};
use dopt::model::{
    eval_design_point, generate_cardinality_with_bound, generate_knapsack_instance,
    generate_second_order_knapsack_instance, seeded_rng, unconstrained_first_order_instance, DesignPoint, Instance,
};
use dopt::pricing::{solve_bb, solve_enum, BbOptions, Pricer};
use dopt::relaxation::{
    check_dual_feasibility, column_generation, sparsify, support_bound, upper_bound_from_alpha, CgMode, CgParams,
    ContinuousDesign,
};

const CUBE_CASES: [(usize, usize, bool); 6] =
    [(3, 8, true), (4, 10, true), (5, 12, true), (3, 8, false), (4, 10, false), (5, 12, false)];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn closed_form(p: usize, k: f64) -> f64 {
    p as f64 * k.ln() - 2.0 * (p as f64 - 1.0) * 2f64.ln()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_psd<R: Rng>(rng: &mut R, p: usize) -> DMatrix<f64> {
    let b = random_matrix(rng, p, p);
    &b * b.transpose() + DMatrix::identity(p, p) * 1e-3
}

fn cube_points(d: usize, fixed_first: bool) -> Vec<DesignPoint> {
    let inst = unconstrained_first_order_instance(d, fixed_first, d + 1).unwrap();
    inst.space.feasible_points().map(|x| eval_design_point(&inst.model, &x.0).unwrap()).collect()
}

fn c1_closed_form() -> Outcome {
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    // x₁ = 1 with the collapsed model (p = d), and the free cube with an intercept (p = d + 1)
    for (d, k, fixed) in CUBE_CASES {
        let inst = unconstrained_first_order_instance(d, fixed, k).map_err(|e| e.to_string())?;
        let t = Instant::now();
        let r = column_generation(&inst, &Pricer::enumerate(), &CgParams::default()).map_err(|e| e.to_string())?;
        let el = t.elapsed();
        slowest = slowest.max(el);
        let err = (r.master_objective() - closed_form(inst.p(), k as f64)).abs();
        worst = worst.max(err);
        if err >= 1e-3 || el >= Duration::from_secs(30) {
            return Err(format!("(d,k)=({d},{k}) fixed_first={fixed}: |err|={err:.3e}, time {el:?}"));
        }
    }
    Ok(format!("max |err| {worst:.2e} (< 1e-3), slowest {slowest:.2?} (< 30 s)"))
}

fn c2_dual_structure() -> Outcome {
    let mut worst_nu = 0.0f64;
    let mut worst_l = 0.0f64;
    // x₁ = 1 with the collapsed model (p = d), and the free cube with an intercept (p = d + 1)
    for (d, k, fixed) in CUBE_CASES {
        let inst = unconstrained_first_order_instance(d, fixed, k).map_err(|e| e.to_string())?;
        let p = inst.p();
        let r = column_generation(&inst, &Pricer::enumerate(), &CgParams::default()).map_err(|e| e.to_string())?;
        let kf = k as f64;
        let cert = &r.certificate;
        worst_nu = worst_nu.max(rel_err(cert.nu, p as f64 / kf));
        // symmetrize over the coordinate permutations that fix the cube
        let lam = &cert.lambda;
        let mut off = 0.0;
        let mut cross = 0.0;
        let mut diag = 0.0;
        let m = (p - 1) as f64;
        for i in 1..p {
            cross += lam[(0, i)] / m;
            diag += lam[(i, i)] / m;
            for j in 1..p {
                if i != j {
                    off += lam[(i, j)] / (m * (m - 1.0)).max(1.0);
                }
            }
        }
        let expect = DMatrix::from_fn(p, p, |i, j| match (i, j) {
            (0, 0) => p as f64 / kf,
            (0, _) | (_, 0) => -2.0 / kf,
            (i, j) if i == j => 4.0 / kf,
            _ => 0.0,
        });
        let sym = DMatrix::from_fn(p, p, |i, j| match (i, j) {
            (0, 0) => lam[(0, 0)],
            (0, _) | (_, 0) => cross,
            (i, j) if i == j => diag,
            _ => off,
        });
        worst_l = worst_l.max((sym - expect).amax());
    }
    if worst_nu <= 1e-6 && worst_l <= 1e-4 {
        Ok(format!("nu rel err {worst_nu:.2e} (<= 1e-6), Lambda max abs err {worst_l:.2e} (<= 1e-4)"))
    } else {
        Err(format!("nu rel err {worst_nu:.2e}, Lambda max abs err {worst_l:.2e}"))
    }
}

fn c3_det_lemma() -> Outcome {
    let mut rng = seeded_rng(3);
    let (mut worst_full, mut worst_def) = (0.0f64, 0.0f64);
    for i in 0..1000 {
        let p = rng.gen_range(1..=12);
        let v: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if i % 2 == 0 {
            let b = random_matrix(&mut rng, p, p + 3);
            let s = &b * b.transpose();
            let info = InfoMatrix::from_matrix(s.clone()).map_err(|e| e.to_string())?;
            let factor = det_update_full_rank(&info, &v).map_err(|e| e.to_string())?;
            let vv = DMatrix::from_column_slice(p, 1, &v);
            let direct = (&s + &vv * vv.transpose()).determinant() / s.determinant();
            worst_full = worst_full.max(rel_err(factor, direct));
        } else {
            if p < 2 {
                continue;
            }
            // kdet_{p-1}(BBᵀ) = det(BᵀB) and det(BBᵀ + vvᵀ) = det([B v])², both
            // computed without forming the singular S
            let b = random_matrix(&mut rng, p, p - 1);
            let s = &b * b.transpose();
            let info = InfoMatrix::from_matrix(s).map_err(|e| e.to_string())?;
            let value = det_update_rank_deficient(&info, &v).map_err(|e| e.to_string())?;
            let bv = DMatrix::from_fn(p, p, |r, c| if c + 1 < p { b[(r, c)] } else { v[r] });
            let direct = bv.determinant().powi(2) / (b.transpose() * &b).determinant();
            worst_def = worst_def.max(rel_err(value, direct));
        }
    }
    if worst_full <= 1e-10 && worst_def <= 1e-8 {
        Ok(format!("full-rank max rel err {worst_full:.2e} (<= 1e-10), rank-deficient {worst_def:.2e} (<= 1e-8)"))
    } else {
        Err(format!("full-rank max rel err {worst_full:.2e}, rank-deficient {worst_def:.2e}"))
    }
}

fn c4_hadamard() -> Outcome {
    let mut rng = seeded_rng(4);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 100 {
        let p = rng.gen_range(1..=8);
        let cols = p + rng.gen_range(0..=4);
        let v = DMatrix::from_fn(p, cols, |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        let w = pm1_to_01_transform(&v).map_err(|e| e.to_string())?;
        let before = (&v * v.transpose()).determinant() / 4f64.powi(p as i32 - 1);
        let after = (&w * w.transpose()).determinant();
        let scale = 4f64.powi(p as i32) / 4f64.powi(p as i32 - 1);
        let err = if before.abs() < 1e-9 * scale { (after - before).abs() / scale } else { rel_err(after, before) };
        worst = worst.max(err);
        checked += 1;
    }
    if worst <= 1e-9 {
        Ok(format!("100 matrices, max rel err {worst:.2e} (<= 1e-9)"))
    } else {
        Err(format!("max rel err {worst:.2e}"))
    }
}

/// Cardinality and knapsack instances with `d ≤ 4`, `p ≤ k ≤ 8`, whose
/// feasible points span the model (others have no nonsingular design).
fn desk_instances() -> (Vec<Instance>, usize) {
    let mut out = Vec::new();
    let mut skipped = 0;
    let mut push = |inst: Instance| {
        if inst.feasible_span_rank(1 << 16).unwrap() == inst.p() {
            out.push(inst);
        } else {
            skipped += 1;
        }
    };
    for d in 2..=4usize {
        for k in d..=8 {
            for r in 1..=d as i64 {
                push(generate_cardinality_with_bound(d, r, Some(k)).unwrap());
            }
            for seed in 0..30 {
                push(generate_knapsack_instance(d, Some(k), seed).unwrap());
            }
        }
    }
    (out, skipped)
}

fn c5_oracle_optimality() -> Outcome {
    let t = Instant::now();
    let (instances, skipped) = desk_instances();
    let pricer = Pricer::enumerate();
    let opts = LocalSearchOptions::default();
    let (mut runs, mut optimal) = (0usize, 0usize);
    for inst in &instances {
        let opt = brute_force_dopt(inst, 1 << 24).map_err(|e| e.to_string())?.optimum_logdet;
        let (k, p) = (inst.k, inst.p());
        let floor = opt + p as f64 * ((k - p + 1) as f64 / k as f64).ln();
        for seed in 0..3 {
            let (design, _) = local_search::run(inst, Start::Seed(seed), &pricer, &opts).map_err(|e| e.to_string())?;
            runs += 1;
            if design.logdet() < floor - 1e-9 {
                return Err(format!(
                    "{} d={} k={k}: ln det {} below guarantee {floor}",
                    inst.generator,
                    inst.d(),
                    design.logdet()
                ));
            }
            if design.logdet() >= opt - 1e-9 * opt.abs().max(1.0) {
                optimal += 1;
            }
        }
    }
    let el = t.elapsed();
    let frac = optimal as f64 / runs as f64;
    let msg = format!(
        "{} instances ({skipped} rank-deficient skipped), {runs} runs, guarantee held on all, optimal {:.1}% (>= 80%), {el:.2?} (< 60 s)",
        instances.len(),
        100.0 * frac
    );
    if frac >= 0.8 && el < Duration::from_secs(60) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c6_certificates() -> Outcome {
    let (instances, _) = desk_instances();
    let pricer = Pricer::enumerate();
    let mut violations = 0;
    let mut checked = 0;
    for inst in &instances {
        let opt = brute_force_dopt(inst, 1 << 24).map_err(|e| e.to_string())?.optimum_logdet;
        let r = column_generation(inst, &pricer, &CgParams::default()).map_err(|e| e.to_string())?;
        let start = &r.experiments[r.design.support()[0]];
        let check = check_dual_feasibility(&r.certificate, inst, &pricer, start).map_err(|e| e.to_string())?;
        let ub = upper_bound_from_alpha(&r.certificate, &check).map_err(|e| e.to_string())?;
        checked += 1;
        if ub < opt - 1e-9 * opt.abs().max(1.0) {
            violations += 1;
        }
    }
    let msg = format!("{checked} brute-forced instances, {violations} violations");
    if checked >= 50 && violations == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c7_sparsify() -> Outcome {
    let mut parts = Vec::new();
    // the x₁ = 1 cube (2^{d-1} points) and, as a stronger case, the free cube
    for (d, fixed) in [(4usize, true), (5, true), (4, false), (5, false)] {
        let pts = cube_points(d, fixed);
        let (n, p) = (pts.len(), pts[0].values().len());
        let k = 2.0 * p as f64;
        let cd = ContinuousDesign::new(pts, vec![k / n as f64; n], k).map_err(|e| e.to_string())?;
        let sp = sparsify(&cd).map_err(|e| e.to_string())?;
        let err = (cd.moment().matrix() - sp.moment().matrix()).norm() / cd.moment().matrix().norm();
        let support = sp.support().len();
        let bound = support_bound(p);
        if support > bound || err > 1e-8 {
            return Err(format!("d={d} p={p}: support {support} (bound {bound}), moment rel err {err:.2e}"));
        }
        parts.push(format!("p={p}: {n} -> {support} <= {bound}, err {err:.1e}"));
    }
    Ok(parts.join("; "))
}

fn c8_pricing_exactness() -> Outcome {
    let mut rng = seeded_rng(8);
    let mut mismatches = 0;
    let mut nodes = 0u64;
    for i in 0..200 {
        let d = rng.gen_range(2..=10usize);
        let seed = rng.gen::<u64>() % 1000;
        let inst = match i % 3 {
            0 => generate_cardinality_with_bound(d, rng.gen_range(1..=d as i64), None),
            1 => generate_knapsack_instance(d, None, seed),
            _ => generate_second_order_knapsack_instance(d.max(4), None, seed),
        }
        .map_err(|e| e.to_string())?;
        let g = random_psd(&mut rng, inst.p());
        let e = solve_enum(&g, &inst.space, &inst.model, 1 << 24).map_err(|e| e.to_string())?;
        let b = solve_bb(&g, &inst.space, &inst.model, None, None, &BbOptions::default()).map_err(|e| e.to_string())?;
        nodes += b.nodes;
        if !b.exact || (b.value - e.value).abs() > 1e-9 * e.value.abs().max(1.0) {
            mismatches += 1;
        }
    }
    let msg = format!("200 pairs, {mismatches} mismatches, {nodes} B&B nodes in total");
    if mismatches == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c9_suite_gaps() -> Outcome {
    let opts = SuiteOptions::default();
    let seeds = [0u64, 1, 2];
    let mut ok = 0;
    let mut max_gap = 0.0f64;
    for variant in [Variant::Cardinality, Variant::Knapsack] {
        let report = run_suite(variant, 5..=11, KRule::TimesP(2), &seeds, &opts).map_err(|e| e.to_string())?;
        for row in report.rows.iter().filter(|r| r.status == "ok") {
            ok += 1;
            max_gap = max_gap.max(row.gap);
            if !(0.0..=2.0).contains(&(row.gap + 1e-9)) {
                return Err(format!("{variant:?} d={} seed={}: gap {}", row.d, row.seed, row.gap));
            }
        }
    }
    if ok == 0 {
        return Err("no completed rows".into());
    }
    Ok(format!("{ok} completed rows at k=2p, all gaps in [0, 2], max {max_gap:.3}"))
}

fn c10_trace() -> Outcome {
    // most d=8 knapsack seeds fix the heavy coordinate to 0 (singular
    // for every design); take the first full-span seed whose run grows 𝒫′
    // past the sparsification threshold
    let (inst, r) = (0u64..20_000)
        .map(|s| generate_knapsack_instance(8, None, s).unwrap())
        .filter(|i| i.feasible_span_rank(1 << 16).unwrap() == i.p())
        .map(|i| {
            let r = column_generation(&i, &Pricer::default(), &CgParams::default()).unwrap();
            (i, r)
        })
        .find(|(_, r)| r.trace.iter().any(|e| e.sparsified))
        .ok_or("no d=8 knapsack seed below 20000 reaches the threshold")?;
    let p = inst.p();
    let heuristic_only = r.trace.iter().filter(|e| !e.ip_solved).count();
    let escalations = r.trace.iter().filter(|e| e.ip_solved).count();
    let sparsified = r.trace.iter().filter(|e| e.sparsified).count();
    let threshold = (p * p).div_ceil(3);
    let monotone =
        r.trace.windows(2).all(|w| w[1].master_obj >= w[0].master_obj - 1e-9 * w[0].master_obj.abs().max(1.0));
    let dual = column_generation(&inst, &Pricer::default(), &CgParams { gamma: 1e9, ..CgParams::default() })
        .map_err(|e| e.to_string())?;
    let dual_ok =
        dual.mode == CgMode::Dual && dual.trace.iter().skip_while(|e| e.mode == CgMode::Primal).all(|e| !e.sparsified);
    let msg = format!(
        "seed {}: {} iterations, {heuristic_only} heuristic-only, {escalations} exact, {sparsified} sparsifications (threshold {threshold}), monotone={monotone}, dual branch={dual_ok}",
        inst.seed.unwrap_or(0),
        r.trace.len()
    );
    if heuristic_only > 0 && escalations > 0 && sparsified > 0 && monotone && dual_ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("closed-form relaxation optimum", c1_closed_form),
        ("dual structure at the optimum", c2_dual_structure),
        ("determinant-lemma consistency", c3_det_lemma),
        ("Hadamard transform", c4_hadamard),
        ("oracle optimality at desk scale", c5_oracle_optimality),
        ("certificate validity", c6_certificates),
        ("sparsification", c7_sparsify),
        ("pricing exactness", c8_pricing_exactness),
        ("suite gaps (tables substituted)", c9_suite_gaps),
        ("column-generation trace", c10_trace),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let tag = if res.is_ok() { "PASS" } else { "FAIL" };
        let detail = res.unwrap_or_else(|e| {
            failed += 1;
            e
        });
        println!("acceptance {:>2} {tag}: {name}: {detail} [{:.2?}]", i + 1, t.elapsed());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
