//! Randomized round-trip properties.

use dpc_tcm::harness::{emit_csv, parse_csv, BerPoint};
use dpc_tcm::trellis::{bits_to_symbols, symbols_to_bits};
use dpc_tcm::{
    build_preset, medd_decode, pip_encode, recover_dirt, tcm_decode, tcm_encode, BinStrategy, Complex64, DpcSpec,
    TrellisPreset,
};
use proptest::prelude::*;

fn dpc_preset() -> impl Strategy<Value = TrellisPreset> {
    prop::sample::select(
        TrellisPreset::ALL
            .into_iter()
            .filter(|&p| p != TrellisPreset::Qam4State4Awgn)
            .collect::<Vec<_>>(),
    )
}

fn strategy() -> impl Strategy<Value = BinStrategy> {
    prop_oneof![
        prop::sample::select(BinStrategy::ALL.to_vec()),
        any::<u64>().prop_map(BinStrategy::Random),
    ]
}

fn dirt(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-4.0..4.0f64, -4.0..4.0f64).prop_map(|(re, im)| Complex64::new(re, im)), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bits_symbols_round_trip(width in 1usize..4, symbols in prop::collection::vec(0usize..8, 0..40)) {
        let symbols: Vec<usize> = symbols.into_iter().map(|s| s % (1 << width)).collect();
        let bits = symbols_to_bits(&symbols, width);
        prop_assert_eq!(bits.len(), symbols.len() * width);
        prop_assert_eq!(bits_to_symbols(&bits, width).unwrap(), symbols);
    }

    /// With alpha = 1 the receiver sees the codeword itself.
    #[test]
    fn full_compensation_decodes_exactly(
        preset in dpc_preset(),
        strategy in strategy(),
        (message, s) in (1usize..24).prop_flat_map(|n| (prop::collection::vec(0u8..2, n), dirt(n))),
    ) {
        let spec = DpcSpec::from_preset(preset, 20.0, 1, strategy, 1.0).unwrap();
        let block = pip_encode(&spec, &message, &s).unwrap();
        let y: Vec<Complex64> = block.x.iter().zip(&s).map(|(x, s)| x + s).collect();
        let d = medd_decode(&spec, &y).unwrap();
        prop_assert_eq!(&d.message, &message);
        prop_assert!(d.distance < 1e-18);
    }

    #[test]
    fn dirt_recovery_inverts_channel(
        alpha in 0.0..0.95f64,
        (u, s) in (1usize..32).prop_flat_map(|n| (dirt(n), dirt(n))),
    ) {
        let y: Vec<Complex64> = u.iter().zip(&s).map(|(u, s)| u + (1.0 - alpha) * s).collect();
        let s_hat = recover_dirt(&y, &u, alpha).unwrap();
        for (a, b) in s_hat.iter().zip(&s) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn tcm_round_trip(preset in prop::sample::select(TrellisPreset::ALL.to_vec()), symbols in 1usize..20, seed in any::<u64>()) {
        let t = build_preset(preset, 10.0).unwrap();
        let bits: Vec<u8> = (0..symbols * t.r0()).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
        let cw = tcm_encode(&t, &bits).unwrap();
        prop_assert_eq!(tcm_decode(&t, &cw.points).unwrap().message, bits);
    }

    #[test]
    fn csv_round_trip(
        rows in prop::collection::vec(
            (any::<f64>(), 0.0..=1.0f64, 0.0..100.0f64, any::<u32>(), any::<u32>(), prop::option::of(0.0..=1.0f64), any::<bool>()),
            0..5,
        ),
    ) {
        let points: Vec<BerPoint> = rows
            .into_iter()
            .map(|(p, alpha, s2, bits, errors, dirt_ser, truncated)| BerPoint {
                design_power_db: if p.is_finite() { p } else { 0.0 },
                alpha,
                sigma_s2: s2,
                measured_snr_db: p.abs().min(1e300).ln_1p(),
                bits: u64::from(bits),
                errors: u64::from(errors),
                ber: f64::from(errors) / f64::from(bits.max(1)),
                blocks: u64::from(bits % 17),
                dirt_ser,
                truncated,
            })
            .collect();
        let mut buf = Vec::new();
        emit_csv(&points, &mut buf).unwrap();
        prop_assert_eq!(parse_csv(buf.as_slice()).unwrap(), points);
    }
}
