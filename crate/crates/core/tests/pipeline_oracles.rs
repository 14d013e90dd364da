use proptest::prelude::*;
use qbheat::field::{
    generate_exact_field, random_commuting_pair, random_vector, FeatureField, FieldGenSpec, GenMode,
};
use qbheat::fitting::{fit_closed_form, fit_iterative, FitConfig};
use qbheat::linalg::{inverse, Matrix};
use qbheat::masking::{make_layout, Direction, Position, QuarterLayout};
use qbheat::predictor::{predict_masked, project, LinearModelSet};
use qbheat::rng::{self, SeedRng};
use qbheat::spectrum::{alignment, energy, energy_ratio, normalized_spectrum, spatial_correlation};

const GRID: usize = 32;
const C: usize = 8;

/// Commuting truth with `Δ·ρ = 0.4` for a discrete step of `cells` cells.
fn truth(rng: &mut SeedRng, c: usize, spacing: f64, cells: usize) -> (Matrix, Matrix) {
    random_commuting_pair(c, 0.4 / (spacing * cells as f64), rng).unwrap()
}

fn discrete_fields(
    a: &Matrix,
    b: &Matrix,
    rng: &mut SeedRng,
    n: usize,
    size: usize,
    spacing: f64,
    cells: usize,
) -> Vec<FeatureField> {
    (0..n)
        .map(|_| {
            let z0 = random_vector(a.rows(), rng);
            let spec = FieldGenSpec::new(a.clone(), b.clone(), z0, GenMode::Discrete)
                .unwrap()
                .with_step_cells(cells)
                .unwrap();
            generate_exact_field(&spec, size, size, spacing).unwrap()
        })
        .collect()
}

fn rel(m: &Matrix, truth: &Matrix) -> f64 {
    (m - truth).frobenius_norm() / truth.frobenius_norm()
}

fn add_noise(fields: &[FeatureField], sigma: f64, rng: &mut SeedRng) -> Vec<FeatureField> {
    fields
        .iter()
        .map(|f| f.perturbed(|| sigma * rng::normal(rng)))
        .collect()
}

#[test]
fn discrete_field_is_predicted_exactly_at_its_step() {
    let spacing = 0.05;
    let layout = make_layout(GRID, GRID, Position::TopLeft).unwrap();
    for seed in 0..5 {
        let mut r = rng::seeded(seed);
        let (a, b) = truth(&mut r, C, spacing, 16);
        let f = &discrete_fields(&a, &b, &mut r, 1, GRID, spacing, 16)[0];
        let models = LinearModelSet::for_layout(a, b, &layout, spacing).unwrap();
        let (pred, report) = predict_masked(f, &layout, &models).unwrap();
        assert!(report.total <= 1e-16, "seed {seed}: {}", report.total);
        assert_eq!(report.directions.len(), 3);
        for cell in layout.unmasked().cells() {
            assert_eq!(pred.at(cell.row, cell.col), f.at(cell.row, cell.col));
        }
    }
}

#[test]
fn continuous_prediction_error_is_second_order_in_the_offset() {
    let spacing = 0.01;
    for seed in 0..5 {
        let mut r = rng::seeded(200 + seed);
        let (a, b) = random_commuting_pair(4, 1.0, &mut r).unwrap();
        let spec = FieldGenSpec::new(
            a.clone(),
            b.clone(),
            random_vector(4, &mut r),
            GenMode::Continuous,
        )
        .unwrap();
        let f = generate_exact_field(&spec, GRID, GRID, spacing).unwrap();
        let mse = |position| {
            let layout = make_layout(GRID, GRID, position).unwrap();
            let m = LinearModelSet::for_layout(a.clone(), b.clone(), &layout, spacing).unwrap();
            predict_masked(&f, &layout, &m).unwrap().1.total
        };
        let ratio = mse(Position::TopLeft) / mse(Position::Center);
        assert!(ratio >= 3.5, "seed {seed}: ratio {ratio}");
    }
}

#[test]
fn explicit_variant8_matches_derived_variant2() {
    let spacing = 0.05;
    let mut r = rng::seeded(9);
    let (a, b) = truth(&mut r, C, spacing, 8);
    let f = &discrete_fields(&a, &b, &mut r, 1, GRID, spacing, 8)[0];
    for position in Position::ALL {
        let layout = make_layout(GRID, GRID, position).unwrap();
        let m2 = LinearModelSet::for_layout(a.clone(), b.clone(), &layout, spacing).unwrap();
        let m8 = m2.to_variant8().unwrap();
        let (p2, r2) = predict_masked(f, &layout, &m2).unwrap();
        let (p8, r8) = predict_masked(f, &layout, &m8).unwrap();
        for (x, y) in p2.values().iter().zip(p8.values()) {
            assert!((x - y).abs() <= 1e-12);
        }
        assert!((r2.total - r8.total).abs() <= 1e-12);
    }
}

#[test]
fn exact_inverse_of_forward_step_is_second_order_from_negation() {
    let mut r = rng::seeded(31);
    let (a, _) = random_commuting_pair(6, 1.0, &mut r).unwrap();
    let norm = a.frobenius_norm();
    let errs: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|eps| {
            let dx = eps / norm;
            let exact = inverse(&a.scaled(dx).plus_identity(1.0)).unwrap();
            let e = (&exact - &a.scaled(-dx).plus_identity(1.0)).frobenius_norm();
            // Leading term is (dx·A)², bounded by ε².
            assert!(e <= eps * eps * (1.0 + 2.0 * eps));
            e
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 4.0).abs() <= 0.5, "ratio {ratio}");
    }
}

proptest! {
    #[test]
    fn projection_is_linear(seed: u64, d in 0usize..8) {
        let mut r = rng::seeded(seed);
        let (a, b) = random_commuting_pair(4, 1.0, &mut r).unwrap();
        let m = LinearModelSet::new(a, b, qbheat::masking::Scale::Half, 0.2, 0.3).unwrap();
        let (z1, z2) = (random_vector(4, &mut r), random_vector(4, &mut r));
        let sum: Vec<f64> = z1.iter().zip(&z2).map(|(x, y)| x + y).collect();
        let dir = Direction::ALL[d];
        let p = project(&m, &sum, dir).unwrap();
        let p1 = project(&m, &z1, dir).unwrap();
        let p2 = project(&m, &z2, dir).unwrap();
        for i in 0..4 {
            prop_assert!((p[i] - p1[i] - p2[i]).abs() <= 1e-12);
        }
    }
}

fn corner_batch(seed: u64, n: usize) -> (Vec<FeatureField>, Vec<QuarterLayout>, Matrix, Matrix) {
    let spacing = 0.05;
    let mut r = rng::seeded(seed);
    let (a, b) = truth(&mut r, C, spacing, 16);
    let fields = discrete_fields(&a, &b, &mut r, n, GRID, spacing, 16);
    let layouts = vec![make_layout(GRID, GRID, Position::TopLeft).unwrap(); n];
    (fields, layouts, a, b)
}

#[test]
fn closed_form_recovers_single_noiseless_field() {
    // One trajectory spans the channel space poorly as C grows, so the
    // single-field check uses C = 4.
    let spacing = 0.05;
    let layout = make_layout(GRID, GRID, Position::TopLeft).unwrap();
    let cfg = FitConfig {
        ridge: 0.0,
        ..FitConfig::default()
    };
    for seed in 0..20 {
        let mut r = rng::seeded(1000 + seed);
        let (a, b) = truth(&mut r, 4, spacing, 16);
        let fields = discrete_fields(&a, &b, &mut r, 1, GRID, spacing, 16);
        let report = fit_closed_form(&fields, std::slice::from_ref(&layout), &cfg).unwrap();
        assert!(rel(report.models.a(), &a) <= 1e-8, "seed {seed}");
        assert!(rel(report.models.b(), &b) <= 1e-8, "seed {seed}");
    }
}

#[test]
fn closed_form_recovers_noiseless_batches() {
    let cfg = FitConfig {
        ridge: 0.0,
        ..FitConfig::default()
    };
    for seed in 0..20 {
        let (fields, layouts, a, b) = corner_batch(1500 + seed, 4);
        let report = fit_closed_form(&fields, &layouts, &cfg).unwrap();
        assert!(rel(report.models.a(), &a) <= 1e-8, "seed {seed}");
        assert!(rel(report.models.b(), &b) <= 1e-8, "seed {seed}");
    }
}

#[test]
fn closed_form_tolerates_small_noise() {
    let cfg = FitConfig {
        ridge: 1e-6,
        ..FitConfig::default()
    };
    for seed in 0..20 {
        let (fields, layouts, a, b) = corner_batch(2000 + seed, 8);
        let mut r = rng::seeded(3000 + seed);
        let noisy = add_noise(&fields, 0.01, &mut r);
        let report = fit_closed_form(&noisy, &layouts, &cfg).unwrap();
        let (ea, eb) = (rel(report.models.a(), &a), rel(report.models.b(), &b));
        assert!(ea <= 0.05 && eb <= 0.05, "seed {seed}: {ea} {eb}");
    }
}

#[test]
fn estimator_error_shrinks_with_sample_count() {
    let spacing = 0.05;
    let cfg = FitConfig {
        ridge: 1e-6,
        ..FitConfig::default()
    };
    let layout = make_layout(16, 16, Position::TopLeft).unwrap();
    // 1, 4, 16 fields of 16x16 give 64, 256, 1024 horizontal pairs.
    let mut means = Vec::new();
    for n in [1usize, 4, 16] {
        let mut total = 0.0;
        for seed in 0..20 {
            let mut r = rng::seeded(4000 + seed);
            let (a, b) = truth(&mut r, 4, spacing, 8);
            let fields = discrete_fields(&a, &b, &mut r, n, 16, spacing, 8);
            let noisy = add_noise(&fields, 0.01, &mut r);
            let report = fit_closed_form(&noisy, &vec![layout.clone(); n], &cfg).unwrap();
            assert_eq!(report.sample_count, 2 * 64 * n);
            total += rel(report.models.a(), &a);
        }
        means.push(total / 20.0);
    }
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
}

#[test]
fn ridge_path_is_continuous() {
    let (fields, layouts, _, _) = corner_batch(77, 4);
    let fit = |ridge| {
        fit_closed_form(
            &fields,
            &layouts,
            &FitConfig {
                ridge,
                ..FitConfig::default()
            },
        )
        .unwrap()
    };
    let (lo, hi) = (fit(1e-10), fit(1e-8));
    assert!(rel(lo.models.a(), hi.models.a()) <= 1e-4);
    assert!(rel(lo.models.b(), hi.models.b()) <= 1e-4);
}

#[test]
fn descent_from_closed_form_is_a_fixed_point() {
    let (fields, layouts, _, _) = corner_batch(5, 4);
    let closed = fit_closed_form(
        &fields,
        &layouts,
        &FitConfig {
            ridge: 0.0,
            ..FitConfig::default()
        },
    )
    .unwrap();
    assert!(closed.final_loss <= 1e-12);
    let refined = fit_iterative(&fields, &layouts, &closed.models, &FitConfig::default()).unwrap();
    assert!(refined.steps <= 1);
    assert!(refined.final_loss <= 1e-12);
}

#[test]
fn descent_from_zero_converges() {
    for seed in 0..3 {
        let (fields, layouts, _, _) = corner_batch(10 + seed, 4);
        let init =
            LinearModelSet::for_layout(Matrix::zeros(C, C), Matrix::zeros(C, C), &layouts[0], 0.05)
                .unwrap();
        let report = fit_iterative(&fields, &layouts, &init, &FitConfig::default()).unwrap();
        assert!(report.steps <= 5000);
        assert!(
            report.final_loss <= 1e-6,
            "seed {seed}: {}",
            report.final_loss
        );
        let first = report.ratio_history.first().unwrap();
        assert_eq!(first.step, 0);
        assert_eq!(first.ratio, None);
    }
}

#[test]
fn energy_ratio_is_stable_across_scales() {
    let spacing = 0.005;
    let cfg = FitConfig {
        ridge: 0.0,
        ..FitConfig::default()
    };
    for seed in 0..10 {
        let mut r = rng::seeded(100 + seed);
        let (a, b) = random_commuting_pair(4, 1.0, &mut r).unwrap();
        let spec = FieldGenSpec::new(a, b, random_vector(4, &mut r), GenMode::Continuous).unwrap();
        let f = generate_exact_field(&spec, GRID, GRID, spacing).unwrap();
        let fit = |position| {
            let layout = make_layout(GRID, GRID, position).unwrap();
            fit_closed_form(std::slice::from_ref(&f), &[layout], &cfg)
                .unwrap()
                .models
        };
        let (quarter, half) = (fit(Position::Center), fit(Position::TopLeft));
        let rq = energy_ratio(quarter.a(), quarter.b()).unwrap();
        let rh = energy_ratio(half.a(), half.b()).unwrap();
        assert!((rq / rh - 1.0).abs() <= 0.05, "seed {seed}: {rq} vs {rh}");
        assert!(alignment(quarter.a(), half.a()).unwrap() <= 0.05);
        assert!(alignment(quarter.b(), half.b()).unwrap() <= 0.05);
    }
}

fn random_matrix(n: usize, r: &mut SeedRng) -> Matrix {
    Matrix::from_fn(n, n, |_, _| rng::normal(r))
}

#[test]
fn energy_scales_with_the_matrix() {
    let mut r = rng::seeded(55);
    for _ in 0..20 {
        let (a, b) = (random_matrix(6, &mut r), random_matrix(6, &mut r));
        let c = rng::uniform(&mut r, -3.0, 3.0);
        let (e, ec) = (energy(&a).unwrap(), energy(&a.scaled(c)).unwrap());
        assert!((ec - c.abs() * e).abs() <= 1e-10 * ec);
        let (r1, r2) = (
            energy_ratio(&a, &b).unwrap(),
            energy_ratio(&a.scaled(c), &b.scaled(c)).unwrap(),
        );
        assert!((r1 - r2).abs() <= 1e-10 * r1);
    }
}

#[test]
fn normalized_spectrum_is_similarity_invariant() {
    let mut r = rng::seeded(56);
    for _ in 0..20 {
        let m = random_matrix(6, &mut r);
        // Well-conditioned P: identity plus a small perturbation.
        let p = &Matrix::identity(6) + &random_matrix(6, &mut r).scaled(0.1);
        let similar = &(&p * &m) * &inverse(&p).unwrap();
        let (s1, s2) = (
            normalized_spectrum(&m, "M").unwrap(),
            normalized_spectrum(&similar, "PMP^-1").unwrap(),
        );
        for (x, y) in s1.normalized.iter().zip(&s2.normalized) {
            assert!((x - y).abs() <= 1e-6);
        }
        assert!((s1.normalized.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn orthogonal_similarity_aligns_exactly() {
    let mut r = rng::seeded(57);
    let m = random_matrix(5, &mut r);
    let (c, s) = (0.6f64, 0.8f64);
    let mut q = Matrix::identity(5);
    q[(0, 0)] = c;
    q[(0, 3)] = -s;
    q[(3, 0)] = s;
    q[(3, 3)] = c;
    let rotated = &(&q * &m) * &q.transpose();
    assert!(alignment(&m, &rotated).unwrap() <= 1e-12);
    assert_eq!(
        alignment(&m, &rotated).unwrap(),
        alignment(&rotated, &m).unwrap()
    );
}

#[test]
fn independent_positions_are_weakly_correlated() {
    for seed in 0..20 {
        let mut r = rng::seeded(600 + seed);
        let values = (0..14 * 14 * 256).map(|_| rng::normal(&mut r)).collect();
        let f = FeatureField::new(14, 14, 256, 1.0, values).unwrap();
        let report = spatial_correlation(&f).unwrap();
        assert!(report.score <= 0.1, "seed {seed}: {}", report.score);
        assert_eq!(report.n_positions, 196);
    }
}

proptest! {
    #[test]
    fn correlation_score_is_bounded(seed: u64, h in 2usize..6, w in 2usize..6, c in 2usize..6) {
        let mut r = rng::seeded(seed);
        let values = (0..h * w * c).map(|_| rng::normal(&mut r)).collect();
        let f = FeatureField::new(h, w, c, 1.0, values).unwrap();
        let s = spatial_correlation(&f).unwrap().score;
        prop_assert!((0.0..=1.0).contains(&s));
    }
}
