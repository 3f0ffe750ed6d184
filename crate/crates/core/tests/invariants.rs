use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use carleman_core::config::RunConfig;
use carleman_core::linalg::random_unit;
use carleman_core::operator::Preset;
use carleman_core::pipeline::{self, Construction};
use carleman_core::verify::{in_grid_children, representation_check, Status};

fn small(preset: Preset, dim: usize, seed: u64) -> Construction {
    let mut cfg = RunConfig::for_preset(preset, dim, 2);
    cfg.family.seed = seed;
    cfg.schedule.rule_target = 0.9;
    cfg.grid.extent = 6.0;
    cfg.grid.step = 0.1;
    pipeline::construct(&cfg).expect("construction")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pairing_is_unitary_in_coordinates(seed in 0u64..500, dim in 8usize..24) {
        let c = small(Preset::RandomCompact, dim, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..4 {
            let v = random_unit(&mut rng, dim);
            let coef = c.pairing.coefficients(&c.frames, &v);
            prop_assert!((coef.norm() - 1.0).abs() < 1e-12);
        }
        let mut children = c.pairing.children();
        children.sort_by_key(|ch| (ch.j, ch.k));
        children.dedup();
        prop_assert_eq!(children.len(), dim);
    }

    #[test]
    fn kernel_coefficients_represent_s(seed in 0u64..500, dim in 8usize..20) {
        let c = small(Preset::RandomCompact, dim, seed);
        for field in &c.kernels {
            prop_assert!(field.provenance.coefficient_error < 1e-10);
            for (k, (p, f)) in field.k.fields.iter().zip(field.p.fields.iter().zip(&field.f.fields)) {
                prop_assert!(k.iter().zip(p.iter().zip(f.iter())).all(|(k, (p, f))| *k == *p + *f));
            }
        }
    }

    #[test]
    fn carleman_norm_matches_profile(seed in 0u64..500, index in 0usize..121) {
        let c = small(Preset::WeightedShift, 16, seed);
        let ctx = c.context(c.grid.clone()).unwrap();
        let s = c.grid.points()[index];
        for field in &c.kernels {
            for order in 0..=field.orders() {
                let direct = ctx.carleman_norm(field, s, order).unwrap();
                let profile = ctx.carleman_profile(field, order)[index];
                prop_assert!((direct - profile).abs() <= 1e-12 * (1.0 + direct));
            }
        }
    }

    #[test]
    fn rule_targets_parse(t in 0.01f64..0.99) {
        let text = format!("[family]\npreset = zero\n[schedule]\nrule_target = {t}\n");
        let cfg = RunConfig::parse(&text, std::path::Path::new(".")).unwrap();
        prop_assert_eq!(cfg.schedule.rule_target, t);
    }
}

#[test]
fn representation_of_random_compact_family() {
    let mut cfg = RunConfig::for_preset(Preset::RandomCompact, 16, 2);
    cfg.family.seed = 7;
    cfg.grid.step = 0.1;
    let c = pipeline::construct(&cfg).unwrap();
    let ctx = c.context(c.grid.clone()).unwrap();
    assert!(!in_grid_children(&ctx).is_empty());
    for field in &c.kernels {
        let e = representation_check("r", &ctx, field, 6, 3, 1e-2);
        assert_eq!(e.status, Status::Pass, "{e:?}");
    }
}

#[test]
fn test_functions_outside_grid_are_skipped() {
    let mut cfg = RunConfig::for_preset(Preset::DiagonalDecay, 16, 2);
    cfg.grid.extent = 1.0;
    cfg.grid.step = 0.1;
    let c = pipeline::construct(&cfg).unwrap();
    let ctx = c.context(c.grid.clone()).unwrap();
    let e = representation_check("r", &ctx, &c.kernels[0], 4, 1, 1e-2);
    assert_eq!(e.status, Status::Skip);
}
