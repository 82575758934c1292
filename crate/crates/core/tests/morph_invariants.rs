#[path = "support/checks.rs"]
mod checks;
#[path = "support/morph_cases.rs"]
mod morph_cases;
#[path = "support/qp_oracle.rs"]
mod qp_oracle;
#[path = "support/sweep_oracle.rs"]
mod sweep_oracle;

use checks::random_params;
use lookalike_core::morphgen::generate_doppelganger_pair;
use lookalike_core::MorphParams;
use rand::Rng;

fn run(seed: u64, check: impl Fn(&morph_cases::Case, &mut rand_chacha::ChaCha8Rng) -> Result<(), String>) {
    let mut rng = morph_cases::rng(seed);
    for i in 0..50 {
        let c = morph_cases::random_case(&mut rng);
        if let Err(e) = check(&c, &mut rng) {
            panic!("case {i} ({:?}): {e}", c.target.dimensions());
        }
    }
}

#[test]
fn self_morph_is_fixed_point() {
    run(40, |c, rng| checks::check_self_morph(c, &random_params(rng)));
}

#[test]
fn zero_parameters_reproduce_target() {
    run(41, |c, rng| checks::check_zero_identity(c, rng.random_range(0..6)));
}

#[test]
fn outer_region_is_retained() {
    run(42, |c, rng| checks::check_outer_retention(c, &random_params(rng)));
}

#[test]
fn interpolation_is_exact() {
    run(43, |c, rng| checks::check_interpolation(c, rng.random_range(0..=16)));
}

#[test]
fn blend_is_continuous_in_alpha() {
    let mut rng = morph_cases::rng(44);
    for _ in 0..10 {
        let c = morph_cases::random_case(&mut rng);
        let p = random_params(&mut rng);
        let q = MorphParams {
            blend_alpha: (p.blend_alpha + 1e-6).min(1.0),
            ..p
        };
        let a = generate_doppelganger_pair(&c.target, &c.target_lmk, &c.source, &c.source_lmk, &p).unwrap();
        let b = generate_doppelganger_pair(&c.target, &c.target_lmk, &c.source, &c.source_lmk, &q).unwrap();
        for (x, y) in a.image.pixels().iter().zip(b.image.pixels()) {
            assert!(x.abs_diff(*y) <= 1);
        }
    }
}
