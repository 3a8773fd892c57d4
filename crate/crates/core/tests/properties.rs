use proptest::prelude::*;

use slabqed::bath::{chain_map, discretize, BathLabel, DiscretizationRule, DiscretizedBath};
use slabqed::em1d::{Direction, LorentzSlab};
use slabqed::spectral::{correlation, uniform_grid, SpectralKind, SpectralTable};

fn slab() -> impl Strategy<Value = LorentzSlab> {
    (0.05..0.5f64, 0.002..0.1f64, 1.0..40.0f64)
        .prop_map(|(wp, g, l)| LorentzSlab::new(wp, g, l).unwrap())
}

fn table() -> impl Strategy<Value = SpectralTable> {
    prop::collection::vec(0.0..2.0f64, 8..40).prop_map(|values| {
        let grid = uniform_grid(values.len(), 3.0);
        SpectralTable::new(SpectralKind::Custom, grid, values, 0.3, 1.0).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lossy_slab_never_amplifies(s in slab(), w in 0.05..4.0f64) {
        for d in Direction::BOTH {
            let sol = s.scatter(w, d).unwrap();
            let out = sol.reflection.norm_sqr() + sol.transmission.norm_sqr();
            prop_assert!(out <= 1.0 + 1e-10, "|r|^2 + |t|^2 = {out}");
        }
    }

    #[test]
    fn transmission_is_reciprocal(s in slab(), w in 0.05..4.0f64) {
        let l = s.scatter(w, Direction::FromLeft).unwrap().transmission;
        let r = s.scatter(w, Direction::FromRight).unwrap().transmission;
        prop_assert!((l - r).norm() <= 1e-9 * l.norm().max(1e-300));
    }

    #[test]
    fn green_function_is_passive(s in slab(), w in 0.05..4.0f64, x in -0.5..0.5f64) {
        let s = s.with_emitter_position(x * s.length()).unwrap();
        prop_assert!(s.green_point(w).unwrap().value.im > 0.0);
    }

    #[test]
    fn correlation_is_hermitian_in_time(t in table(), beta in prop::sample::select(vec![f64::INFINITY, 2.0, 0.5])) {
        let times = [-7.3, -1.1, 0.0, 1.1, 7.3];
        let c = correlation(&t, beta, &times).unwrap().values;
        let scale = c[2].norm();
        for k in 0..2 {
            prop_assert!((c[k] - c[4 - k].conj()).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn correlation_is_linear_in_eta(t in table(), factor in 0.1..5.0f64) {
        let times: Vec<f64> = (0..20).map(|i| i as f64 * 0.7).collect();
        let a = correlation(&t, 1.0, &times).unwrap().values;
        let b = correlation(&t.with_eta(t.eta() * factor).unwrap(), 1.0, &times).unwrap().values;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x * factor - y).norm() <= 1e-12 * (x.norm() * factor).max(1e-300));
        }
    }

    #[test]
    fn interpolation_hits_nodes(t in table()) {
        for (w, v) in t.grid().iter().zip(t.values()) {
            prop_assert!((t.profile(*w).unwrap() - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn chain_map_is_an_orthogonal_change_of_basis(
        steps in prop::collection::vec(0.01..0.3f64, 2..30),
        seed in prop::collection::vec(0.01..1.0f64, 30),
    ) {
        let freqs: Vec<f64> = steps
            .iter()
            .scan(0.0, |w, s| {
                *w += s;
                Some(*w)
            })
            .collect();
        let couplings: Vec<f64> = seed[..freqs.len()].to_vec();
        let bath = DiscretizedBath::new(BathLabel::Eq, freqs, couplings.clone()).unwrap();
        let chain = chain_map(&bath).unwrap();
        let u = chain.transform();
        let gram = u.dot(&u.t());
        for i in 0..chain.len() {
            for j in 0..chain.len() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram[[i, j]] - want).abs() < 1e-10);
            }
        }
        let total: f64 = couplings.iter().map(|g| g * g).sum();
        prop_assert!((chain.emitter_coupling().powi(2) - total).abs() < 1e-12 * total);
        if !chain.is_truncated() {
            for (a, b) in chain.reconstructed_couplings().iter().zip(&couplings) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }
    }
}

// With one bin per table segment the midpoint rule integrates the
// piecewise-linear density exactly.
#[test]
fn discretized_weight_matches_density_integral() {
    let t = SpectralTable::new(
        SpectralKind::Custom,
        uniform_grid(40, 4.0),
        (1..=40).map(|i| (i as f64 * 0.3).sin().abs()).collect(),
        0.7,
        1.0,
    )
    .unwrap();
    let midpoint = discretize(&t, BathLabel::M, 40, 4.0, DiscretizationRule::MidpointLinear).unwrap();
    let gauss = discretize(&t, BathLabel::M, 50, 4.0, DiscretizationRule::Gauss).unwrap();
    let exact = slabqed::bath::integrated_weight(&t, 4.0, 400).unwrap();
    assert!((midpoint.total_weight() - exact).abs() < 1e-10 * exact);
    // Gauss nodes ignore the kinks of the interpolant.
    assert!((gauss.total_weight() - exact).abs() < 2e-3 * exact);
}
