use cvpbt::bounds::{edrc_apply, edrc_diamond_norm, lossy_diamond_bound_positive, mc_index, EdrcParams, MC_SCAN_CAP};
use cvpbt::fock::trace_norm;
use cvpbt::two_port::{apply_coherent, derived_scalars, regime};
use cvpbt::{ChannelParams, Cutoff, Regime};
use num_complex::Complex64;
use proptest::prelude::*;

fn positive_params() -> impl Strategy<Value = ChannelParams> {
    (0.05f64..0.8, 0.05f64..0.9)
        .prop_map(|(x, y)| ChannelParams::two_port(x, y).unwrap())
        .prop_filter("positive regime", |p| regime(p) == Regime::Positive)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lossy_bound_range(p in positive_params(), e in 0.0f64..50.0) {
        let sc = derived_scalars(&p, 1e-16).unwrap();
        let v = lossy_diamond_bound_positive(e, &p).unwrap();
        prop_assert!(v >= 2.0 * (1.0 - sc.g * sc.omega) - 1e-12 && v <= 2.0 + 1e-12);
    }

    #[test]
    fn edrc_norm_dominates_coherent_differences(p in positive_params(), r in 0.0f64..1.5, th in 0.0f64..6.3) {
        let c = Cutoff::new(30).unwrap();
        let alpha = Complex64::from_polar(r, th);
        let ep = EdrcParams::matched(&p).unwrap();
        let diff = apply_coherent(alpha, &p, c).unwrap().op().sub(edrc_apply(alpha, &ep, c).unwrap().op()).unwrap();
        prop_assert!(trace_norm(&diff).unwrap() <= edrc_diamond_norm(&p).unwrap() + 1e-10);
    }

    #[test]
    fn mc_scan_terminates(p in positive_params()) {
        let m = mc_index(&p).unwrap();
        prop_assert!(m.m_c < MC_SCAN_CAP as i64 || m.capped);
    }
}
