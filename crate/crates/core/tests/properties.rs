use memgap::analysis::{Accumulator, LogLogFit};
use memgap::drivers::{generate_brownian, SeedSpec, StreamTag};
use memgap::paths::{extend_initial, InitialFunction, SamplePath, TimeGrid};
use proptest::prelude::*;

fn node_theta(values: &[f64]) -> InitialFunction {
    // 8 nodes per unit on [-1, 0].
    InitialFunction::from_nodes(1.0, 8, 1, values.to_vec()).unwrap()
}

fn nine_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, 9)
}

proptest! {
    #[test]
    fn sup_norm_is_a_norm(a in nine_values(), b in nine_values(), c in -10.0..10.0f64) {
        let ta = node_theta(&a);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let scaled: Vec<f64> = a.iter().map(|x| c * x).collect();
        let (na, nb) = (ta.sup_norm(), node_theta(&b).sup_norm());
        prop_assert!(na >= 0.0);
        prop_assert!(node_theta(&sum).sup_norm() <= na + nb + 1e-9);
        prop_assert!((node_theta(&scaled).sup_norm() - c.abs() * na).abs() <= 1e-9 * (1.0 + na));
        for v in &a {
            prop_assert!(v.abs() <= na);
        }
    }

    #[test]
    fn aggregation_telescopes_exactly(seed in any::<u64>(), i in 0usize..=32, j in 0usize..=32, l in 0usize..=32) {
        let mut cut = [i, j, l];
        cut.sort();
        let grid = TimeGrid::new(0.0, 2.0, 16).unwrap();
        let w = generate_brownian(&grid, 2, SeedSpec::new(seed, 3, StreamTag::Brownian)).unwrap();
        let t = |n: usize| n as f64 / 16.0;
        let ab = w.aggregate(t(cut[0]), t(cut[1])).unwrap();
        let bc = w.aggregate(t(cut[1]), t(cut[2])).unwrap();
        let ac = w.aggregate(t(cut[0]), t(cut[2])).unwrap();
        for c in 0..2 {
            prop_assert_eq!((ab[c] + bc[c]).to_bits(), ac[c].to_bits());
        }
    }

    #[test]
    fn coarse_increments_are_sums_of_fine_ones(seed in any::<u64>(), factor in prop::sample::select(vec![2usize, 4, 8])) {
        let grid = TimeGrid::new(0.0, 1.0, 64).unwrap();
        let w = generate_brownian(&grid, 1, SeedSpec::new(seed, 0, StreamTag::Brownian)).unwrap();
        let coarse = w.coarsen(factor).unwrap();
        for j in 0..coarse.n_steps() {
            let expect: f64 = w.increments()[j * factor..(j + 1) * factor].iter().sum();
            prop_assert_eq!(coarse.increment(j)[0].to_bits(), expect.to_bits());
        }
    }

    #[test]
    fn extension_is_theta_then_constant(values in nine_values(), t in -2.0..0.0f64) {
        let theta = node_theta(&values);
        let ext = extend_initial(&theta, 1.0).unwrap();
        let got = ext.eval(t).unwrap()[0];
        let expect = if t >= -1.0 { theta.eval(t).unwrap()[0] } else { values[0] };
        prop_assert!((got - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
    }

    #[test]
    fn segment_endpoints_match_the_path(values in prop::collection::vec(-5.0..5.0f64, 25), anchor in 0usize..=8) {
        // Delay 1, horizon 1, 8 steps per unit: 25 nodes on [-2, 1].
        let grid = TimeGrid::new(1.0, 1.0, 8).unwrap();
        let path = SamplePath::new(grid, 1, values).unwrap();
        let t = anchor as f64 / 8.0;
        let seg = path.segment_at(t).unwrap();
        let (mut head, mut tail) = ([0.0], [0.0]);
        seg.head(&mut head);
        seg.tail(&mut tail);
        prop_assert_eq!(head[0], path.eval(t).unwrap()[0]);
        prop_assert_eq!(tail[0], path.eval(t - 1.0).unwrap()[0]);
        prop_assert_eq!(seg.eval(-0.5)[0], path.eval(t - 0.5).unwrap()[0]);
        prop_assert!(seg.sup_norm() >= head[0].abs().max(tail[0].abs()));
    }

    #[test]
    fn loglog_fit_recovers_exponents(slope in -3.0..3.0f64, scale in 0.01..100.0f64) {
        let xs = [1.0, 0.5, 0.25, 0.125];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| scale * x.powf(slope)).collect();
        let fit = LogLogFit::fit(&xs, &ys).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!((fit.intercept - scale.ln()).abs() < 1e-9);
    }

    #[test]
    fn accumulator_merge_matches_single_pass(xs in prop::collection::vec(-1e3..1e3f64, 1..60), split in 0usize..60) {
        let split = split.min(xs.len());
        let mut whole = Accumulator::default();
        let (mut left, mut right) = (Accumulator::default(), Accumulator::default());
        for (n, &x) in xs.iter().enumerate() {
            whole.push(x);
            if n < split { left.push(x) } else { right.push(x) }
        }
        let merged = left.merge(right);
        prop_assert_eq!(merged.count, whole.count);
        prop_assert!((merged.mean() - whole.mean()).abs() <= 1e-9 * (1.0 + whole.mean().abs()));
        prop_assert!(merged.variance() >= 0.0 && merged.half_width() >= 0.0);
    }
}
