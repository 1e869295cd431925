//! Acceptance suite. Each test prints one `[PASS]` or `[FAIL]` line and then
//! asserts, so `cargo test --test acceptance -- --nocapture` gives a summary.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subsys_core::compare::compare;
use subsys_core::decomposition::{decompose, verify_block_form, verify_theorem, TheoremReport};
use subsys_core::dynamics::{make_kernel, no_gain_check, propagate_full, ForcingSignal, ForcingTarget, KernelSide, TimeGrid};
use subsys_core::lattice::{build_lattice_system, multiplicity_bound, surface_count, verify_example, LatticeReport, LatticeSpec};
use subsys_core::linalg::{c64, op_norm, CMatrix, CVector};
use subsys_core::subspace::SubspaceBasis;
use subsys_core::system::{assemble_full, random_system, random_matrix, BlockSystem};

fn report(id: &str, ok: bool, detail: String) {
    println!("[{}] {id} {detail}", if ok { "PASS" } else { "FAIL" });
}

/// (d1, d2, rank, seed) for the random suite.
fn random_cases(count: usize, max_d1: usize, max_d2: usize, max_total: usize, seed: u64) -> Vec<(usize, usize, usize, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let d1 = rng.random_range(1..=max_d1);
            let d2 = rng.random_range(1..=max_d2.min(max_total - d1));
            let rank = rng.random_range(0..=d1.min(d2));
            (d1, d2, rank, seed * 1000 + i as u64)
        })
        .collect()
}

struct RandomRun {
    case: (usize, usize, usize, u64),
    report: TheoremReport,
    block_form_absolute: f64,
    omega_norm: f64,
}

fn random_suite() -> &'static Vec<RandomRun> {
    static SUITE: OnceLock<Vec<RandomRun>> = OnceLock::new();
    SUITE.get_or_init(|| {
        random_cases(200, 12, 20, 32, 1)
            .into_iter()
            .map(|case| {
                let sys = random_system(case.0, case.1, case.2, case.3).unwrap();
                let dec = decompose(&sys).unwrap();
                RandomRun {
                    case,
                    report: verify_theorem(&sys).unwrap(),
                    block_form_absolute: verify_block_form(&sys, &dec),
                    omega_norm: op_norm(&assemble_full(&sys).omega),
                }
            })
            .collect()
    })
}

fn lattice_specs() -> Vec<LatticeSpec> {
    let mut out = Vec::new();
    for n in [2, 3] {
        for m in [6, 8] {
            out.push(LatticeSpec::centered(3, m, n));
        }
    }
    out
}

fn lattice_suite() -> &'static Vec<LatticeReport> {
    static SUITE: OnceLock<Vec<LatticeReport>> = OnceLock::new();
    SUITE.get_or_init(|| lattice_specs().iter().map(|s| verify_example(s).unwrap()).collect())
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    let v = random_matrix(rng, n, 1).column(0).into_owned();
    let norm = v.norm();
    v / c64(norm, 0.0)
}

#[test]
fn ac1_orbit_equalities_on_random_systems() {
    let runs = random_suite();
    let worst = runs
        .iter()
        .map(|r| (r.report.orbit_equalities.iter().map(|d| d.distance).fold(0.0, f64::max), r.case))
        .fold((0.0, (0, 0, 0, 0)), |a, b| if b.0 > a.0 { b } else { a });
    let ok = runs.len() >= 200 && worst.0 <= 1e-8;
    report(
        "AC1",
        ok,
        format!("{} systems, max pairwise projector distance {:e} at (d1,d2,rank,seed)={:?}", runs.len(), worst.0, worst.1),
    );
    assert!(ok);
}

#[test]
fn ac2_multiplicity_bound() {
    let mut violations = Vec::new();
    for r in random_suite() {
        if !r.report.bound_satisfied {
            violations.push(format!("random {:?}: {} > {}", r.case, r.report.multiplicity_omega_c, r.report.bound));
        }
    }
    for l in lattice_suite() {
        if !l.theorem.bound_satisfied {
            violations.push(format!(
                "lattice M={} N={}: {} > {}",
                l.spec.box_size, l.spec.cube, l.theorem.multiplicity_omega_c, l.theorem.bound
            ));
        }
    }
    let instances = random_suite().len() + lattice_suite().len();
    report("AC2", violations.is_empty(), format!("{instances} instances, violations: {violations:?}"));
    assert!(violations.is_empty());
}

#[test]
fn ac3_lattice_formulas() {
    let formulas = surface_count(2).unwrap() == 8
        && surface_count(3).unwrap() == 26
        && multiplicity_bound(2).unwrap() == 16
        && multiplicity_bound(3).unwrap() == 52;
    let mut detail = Vec::new();
    let mut ok = formulas;
    for l in lattice_suite() {
        let bound = multiplicity_bound(l.spec.cube).unwrap();
        ok &= l.rank_gamma <= surface_count(l.spec.cube).unwrap() && l.multiplicity_omega_c <= bound;
        detail.push(format!(
            "N={} M={}: rank {} / {}, multiplicity {} / {}",
            l.spec.cube, l.spec.box_size, l.rank_gamma, l.surface_count, l.multiplicity_omega_c, bound
        ));
    }
    report("AC3", ok, format!("formulas exact: {formulas}; {}", detail.join("; ")));
    assert!(ok);
}

#[test]
fn ac4_undetectable_hidden_part() {
    let mut ok = true;
    let mut detail = Vec::new();
    for l in lattice_suite().iter().filter(|l| l.spec.cube == 2) {
        ok &= l.dim_h2d > 0;
        detail.push(format!("M={}: dim h2d = {}", l.spec.box_size, l.dim_h2d));
    }
    report("AC4", ok, detail.join(", "));
    assert!(ok);
}

#[test]
fn ac5_reduction_consistency() {
    let grid = TimeGrid::uniform(10.0, 2000).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut systems: Vec<(String, BlockSystem, CVector)> = Vec::new();
    let one = CMatrix::from_element(1, 1, c64(1.0, 0.0));
    let zero = CMatrix::zeros(1, 1);
    systems.push((
        "pair".into(),
        BlockSystem::new(zero.clone(), zero, one, 1e-10).unwrap(),
        CVector::from_element(1, c64(1.0, 0.0)),
    ));
    for case in random_cases(20, 6, 11, 12, 5) {
        let sys = random_system(case.0, case.1, case.2, case.3).unwrap();
        let v = unit_vector(&mut rng, case.0);
        systems.push((format!("{:?}", case), sys, v));
    }

    let mut worst_diff = 0.0f64;
    let mut order_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut bad = Vec::new();
    for (name, sys, v) in &systems {
        let r = compare(sys, v, &grid).unwrap();
        worst_diff = worst_diff.max(r.sup_diff);
        order_range = (order_range.0.min(r.order), order_range.1.max(r.order));
        if !(r.sup_diff <= 1e-3 && (r.order - 2.0).abs() <= 0.3) {
            bad.push(format!("{name}: diff {:e} order {:.3}", r.sup_diff, r.order));
        }
    }

    // closed form for the pair: v1(t) = cos t
    let pair = &systems[0].1;
    let reduced = subsys_core::dynamics::propagate_reduced(
        pair,
        &systems[0].2,
        &ForcingSignal::zero(ForcingTarget::Observable),
        &grid,
    )
    .unwrap();
    let cos_err = reduced
        .times
        .iter()
        .zip(&reduced.states)
        .map(|(t, s)| (s[0] - c64(t.cos(), 0.0)).norm())
        .fold(0.0, f64::max);
    let ok = bad.is_empty() && cos_err <= 1e-3 && systems.len() >= 21;
    report(
        "AC5",
        ok,
        format!(
            "{} systems at h=5e-3: max sup diff {:e}, order in [{:.3}, {:.3}], cos t error {:e}, failures {bad:?}",
            systems.len(),
            worst_diff,
            order_range.0,
            order_range.1,
            cos_err
        ),
    );
    assert!(ok);
}

#[test]
fn ac6_norm_conservation() {
    let grid = TimeGrid::uniform(10.0, 2000).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut systems: Vec<BlockSystem> = random_cases(30, 12, 20, 32, 6)
        .into_iter()
        .map(|c| random_system(c.0, c.1, c.2, c.3).unwrap())
        .collect();
    systems.push(build_lattice_system(&LatticeSpec::centered(3, 6, 2)).unwrap());
    let mut worst = 0.0f64;
    for sys in &systems {
        let v0 = unit_vector(&mut rng, sys.dim());
        let traj = propagate_full(&assemble_full(sys), &v0, &ForcingSignal::zero(ForcingTarget::Full), &grid).unwrap();
        for s in &traj.states {
            worst = worst.max((s.norm() - 1.0).abs());
        }
    }
    let ok = worst <= 1e-10;
    report("AC6", ok, format!("{} systems over [0,10]: max relative norm drift {worst:e}", systems.len()));
    assert!(ok);
}

#[test]
fn ac7_no_gain() {
    let coarse = TimeGrid::uniform(10.0, 400).unwrap();
    let fine = coarse.refined();
    let mut kernels = Vec::new();
    for (i, case) in random_cases(8, 8, 12, 20, 7).into_iter().enumerate() {
        let sys = random_system(case.0, case.1, case.2.max(1), case.3).unwrap();
        let side = if i % 2 == 0 { KernelSide::Observable } else { KernelSide::Hidden };
        kernels.push((format!("random {case:?} {side:?}"), make_kernel(&sys, side)));
    }
    for m in [4, 6] {
        let sys = build_lattice_system(&LatticeSpec::centered(3, m, 2)).unwrap();
        kernels.push((format!("lattice M={m}"), make_kernel(&sys, KernelSide::Observable)));
    }

    let trials_each = 6;
    let mut signals = 0;
    let mut min_margin = f64::INFINITY;
    let mut bad = Vec::new();
    for (k, (name, kernel)) in kernels.iter().enumerate() {
        let a = no_gain_check(kernel, trials_each, &coarse, 70 + k as u64);
        let b = no_gain_check(kernel, trials_each, &fine, 70 + k as u64);
        signals += a.trials.len();
        for (ta, tb) in a.trials.iter().zip(&b.trials) {
            min_margin = min_margin.min(ta.value + ta.eps_quad).min(tb.value + tb.eps_quad);
            let (ea, eb) = ((-ta.value).max(0.0), (-tb.value).max(0.0));
            if ta.value < -ta.eps_quad || tb.value < -tb.eps_quad || (eb > 0.0 && eb > 0.5 * ea) {
                bad.push(format!("{name}: {:e} / {:e} -> {:e} / {:e}", ta.value, ta.eps_quad, tb.value, tb.eps_quad));
            }
        }
    }
    let ok = signals >= 50 && bad.is_empty();
    report(
        "AC7",
        ok,
        format!("{signals} signals on {} kernels, min(value + eps_quad) {min_margin:e}, failures {bad:?}", kernels.len()),
    );
    assert!(ok);
}

#[test]
fn ac8_block_form() {
    let mut worst = 0.0f64;
    for r in random_suite() {
        worst = worst.max(r.block_form_absolute / r.omega_norm);
    }
    for l in lattice_suite() {
        worst = worst.max(l.theorem.block_form_residual);
    }

    // Negative control: tilt one coupled hidden direction into the decoupled one.
    let sys = build_lattice_system(&LatticeSpec::centered(3, 4, 2)).unwrap();
    let mut dec = decompose(&sys).unwrap();
    assert!(dec.h2c.dim() > 0 && dec.h2d.dim() > 0);
    let theta: f64 = 0.3;
    let mut c = dec.h2c.matrix().clone();
    let mut d = dec.h2d.matrix().clone();
    let (u, w) = (c.column(0).into_owned(), d.column(0).into_owned());
    c.set_column(0, &(&u * c64(theta.cos(), 0.0) + &w * c64(theta.sin(), 0.0)));
    d.set_column(0, &(&w * c64(theta.cos(), 0.0) - &u * c64(theta.sin(), 0.0)));
    dec.h2c = SubspaceBasis::from_orthonormal_columns(c, sys.tol()).unwrap();
    dec.h2d = SubspaceBasis::from_orthonormal_columns(d, sys.tol()).unwrap();
    let control = verify_block_form(&sys, &dec) / op_norm(&assemble_full(&sys).omega);

    let ok = worst <= 1e-9 && control > 1e-3;
    report(
        "AC8",
        ok,
        format!("max required-zero block {worst:e} * ||Omega||, corrupted control {control:e} * ||Omega||"),
    );
    assert!(ok);
}
