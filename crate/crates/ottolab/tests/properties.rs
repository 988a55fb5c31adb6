//! Algebraic and randomized properties of the discrete operators and the
//! entropy functionals: integration by parts, dual forms, nonnegativity of
//! the relative entropy, and sign of the curvature-weighted integrand on
//! weights whose curvature is certifiably nonnegative on the grid.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ottolab::model::{ModelParams, PotentialSign, Speed};
use ottolab::{entropy, ops};
use ottolab::{DensityField, Grid, PotentialField, WeightedMeasure};

const TAU: f64 = 2.0 * std::f64::consts::PI;

fn trig_field(rng: &mut ChaCha8Rng, length: f64, modes: u32) -> impl Fn(f64) -> f64 {
    let coefs: Vec<(f64, f64)> = (0..modes)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    move |x: f64| {
        coefs
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                let w = (k + 1) as f64 * TAU / length * x;
                a * w.sin() + b * w.cos()
            })
            .sum()
    }
}

fn random_torus_density(rng: &mut ChaCha8Rng, grid: &Grid) -> DensityField {
    let f = trig_field(rng, grid.extent(), 5);
    let length = grid.extent();
    DensityField::from_fn(grid, |x| (1.0 + 0.1 * f(x)).max(0.2) / length).unwrap()
}

#[test]
fn divergence_is_adjoint_to_gradient_on_the_torus() {
    let grid = Grid::periodic(256, TAU).unwrap();
    let measures = [
        WeightedMeasure::flat(&grid),
        WeightedMeasure::cosine(&grid, 0.1, 1).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for mu in &measures {
        for _ in 0..10 {
            let xf = trig_field(&mut rng, TAU, 6);
            let gf = trig_field(&mut rng, TAU, 6);
            let x: Vec<f64> = grid.nodes().iter().map(|&p| xf(p)).collect();
            let g: Vec<f64> = grid.nodes().iter().map(|&p| gf(p)).collect();
            let div = ops::weighted_divergence_adjoint(&grid, mu, &x);
            let lhs = ops::inner_mu(&grid, mu, &div, &g);
            let rhs = ops::inner_mu(&grid, mu, &x, &ops::gradient(&grid, &g));
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            assert!(
                (lhs - rhs).abs() <= 1e-8 * scale,
                "adjointness broke: {lhs} vs {rhs}"
            );
        }
    }
}

#[test]
fn divergence_is_adjoint_to_gradient_on_the_weighted_half_line() {
    for ambient in [1u32, 3] {
        let grid = Grid::radial(2048, 6.0, ambient).unwrap();
        let mu = WeightedMeasure::quadratic(&grid, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let (a, b) = (rng.gen_range(0.3..1.0), rng.gen_range(0.5..2.0));
            let (c, d) = (rng.gen_range(0.3..1.0), rng.gen_range(0.5..2.0));
            // odd radial component and even scalar, both dying well before
            // the outer edge so the one-sided boundary stencils see zeros
            let x: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|&r| r * (-r * r).exp() * (1.0 + a * (b * r * r).cos()))
                .collect();
            let g: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|&r| (-0.5 * r * r).exp() * (1.0 + c * (d * r * r).sin()))
                .collect();
            let div = ops::weighted_divergence_adjoint(&grid, &mu, &x);
            let lhs = ops::inner_mu(&grid, &mu, &div, &g);
            let rhs = ops::inner_mu(&grid, &mu, &x, &ops::gradient(&grid, &g));
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            assert!(
                (lhs - rhs).abs() <= 1e-8 * scale,
                "ambient {ambient}: adjointness broke: {lhs} vs {rhs}"
            );
        }
    }
}

#[test]
fn fisher_information_matches_its_dual_form() {
    let grid = Grid::periodic(1024, TAU).unwrap();
    let mu = WeightedMeasure::flat(&grid);
    let rho = DensityField::from_fn(&grid, |x| {
        (1.0 + 0.3 * x.sin() + 0.1 * (2.0 * x).cos()) / TAU
    })
    .unwrap();
    for gamma in [2.0, 2.5, 3.0] {
        let primary = entropy::fisher_information(&grid, &mu, &rho, gamma).unwrap();
        let dual = entropy::grad_entropy_norm_sq(&grid, &mu, &rho, gamma).unwrap();
        assert!(
            (primary - dual).abs() <= 1e-10 * primary.abs().max(dual.abs()),
            "gamma = {gamma}: {primary} vs {dual}"
        );
    }
}

#[test]
fn relative_entropy_is_nonnegative_on_random_pairs() {
    let grid = Grid::periodic(256, TAU).unwrap();
    let mu = WeightedMeasure::flat(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..50 {
        let a = random_torus_density(&mut rng, &grid);
        let b = random_torus_density(&mut rng, &grid);
        let gamma = [2.0, 2.5, 3.0][trial % 3];
        let rel = entropy::relative_entropy(&grid, &mu, &a, &b, gamma).unwrap();
        assert!(rel >= 0.0, "trial {trial}: negative divergence {rel}");
        let self_rel = entropy::relative_entropy(&grid, &mu, &a, &a, gamma).unwrap();
        assert!(self_rel == 0.0, "trial {trial}: self-divergence {self_rel}");
    }
}

#[test]
fn curvature_weighted_integrand_stays_nonnegative_on_certified_weights() {
    // flat torus
    let grid = Grid::periodic(256, TAU).unwrap();
    let mu = WeightedMeasure::flat(&grid);
    assert!(
        ops::bakry_emery_curvature(&grid, &mu, 1.0, 1.0)
            .unwrap()
            .iter()
            .all(|&r| r >= 0.0)
    );
    let params =
        ModelParams::new(2.2, 1.0, 1.0, Speed::Finite(1.0), PotentialSign::Positive).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for trial in 0..25 {
        let rho = random_torus_density(&mut rng, &grid);
        let pf = trig_field(&mut rng, TAU, 5);
        let phi = PotentialField::from_fn(&grid, |x| 0.5 * pf(x)).unwrap();
        let alpha = rng.gen_range(-1.0..1.0);
        let q = entropy::bochner_rhs(&grid, &mu, &rho, &phi, alpha, &params).unwrap();
        assert!(q >= 0.0, "torus trial {trial}: {q}");
    }

    // half line under the quadratic weight, inside the radius where the
    // curvature stays nonnegative
    let grid = Grid::radial(1024, 3.0, 1).unwrap();
    let mu = WeightedMeasure::quadratic(&grid, 0.1).unwrap();
    assert!(
        ops::bakry_emery_curvature(&grid, &mu, 3.0, 1.0)
            .unwrap()
            .iter()
            .all(|&r| r >= 0.0)
    );
    let params =
        ModelParams::new(2.0, 3.0, 1.0, Speed::Finite(1.0), PotentialSign::Positive).unwrap();
    for trial in 0..25 {
        let (a, b) = (rng.gen_range(0.0..0.4), rng.gen_range(0.5..2.0));
        let (c, d) = (rng.gen_range(0.2..1.0), rng.gen_range(0.5..2.0));
        let rho = DensityField::from_fn(&grid, |r| {
            (-r * r).exp() * (1.0 + a * (b * r * r).cos())
        })
        .unwrap();
        let phi =
            PotentialField::from_fn(&grid, |r| c * (d * r * r).sin() * (-0.3 * r * r).exp())
                .unwrap();
        let alpha = rng.gen_range(-1.0..1.0);
        let q = entropy::bochner_rhs(&grid, &mu, &rho, &phi, alpha, &params).unwrap();
        assert!(q >= 0.0, "radial trial {trial}: {q}");
    }
}

#[test]
fn quadratic_weight_curvature_flips_sign_beyond_the_slack_radius() {
    // f = a r^2 / 2 has curvature a - a^2 r^2 / (m - n), nonnegative only
    // for r <= sqrt((m - n) / a); amplitude 0.1 with m - n = 2 flips at
    // r = sqrt(20)
    let grid = Grid::radial(1024, 6.0, 1).unwrap();
    let mu = WeightedMeasure::quadratic(&grid, 0.1).unwrap();
    let ric = ops::bakry_emery_curvature(&grid, &mu, 3.0, 1.0).unwrap();
    let min = ric.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min < 0.0, "expected a negative tail, min = {min}");
}
