mod common;

use common::naive_box_mean;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shockwave::microsim::{load_csv, save_csv, TrajectorySample};
use shockwave::netcore::{
    conv2d_forward, custom_loss, deconv2d_forward, mse, transpose_roles, ConvLayerParams, ConvMode, Tensor4,
};
use shockwave::trainer::{split_runs, Metrics};
use shockwave::tsgrid::{
    average_matrix, to_density, GridOrigin, PairMeta, PairSource, TimeSpaceMatrix, TsdsReader, TsdsWriter, COLS, ROWS,
};
use shockwave::window::{box_mean, box_mean_adjoint};

fn grid(rows: usize, cols: usize) -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1..=rows, 1..=cols).prop_flat_map(|(r, c)| (Just(r), Just(c), prop::collection::vec(-1.0f64..1.0, r * c)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn box_mean_matches_double_loop((r, c, v) in grid(30, 30), w in 1usize..12) {
        let fast = box_mean(&v, r, c, w);
        let slow = naive_box_mean(&v, r, c, w);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn box_mean_adjoint_identity((r, c, x) in grid(25, 25), w in 1usize..12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..r * c).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let lhs: f64 = box_mean(&x, r, c, w).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(box_mean_adjoint(&y, r, c, w)).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn conv_and_transposed_conv_are_adjoint(
        cin in 1usize..4, cout in 1usize..4, h in 1usize..12, w in 1usize..12, seed in any::<u64>()
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ConvLayerParams::<f64>::zeros(cin, cout, ConvMode::Conv);
        p.kernels.iter_mut().for_each(|k| *k = rand::Rng::gen_range(&mut rng, -1.0..1.0));
        let x = common::random_tensor(&mut rng, [2, cin, h, w], -1.0, 1.0);
        let y = common::random_tensor(&mut rng, [2, cout, h, w], -1.0, 1.0);
        let lhs = conv2d_forward(&x, &p).unwrap().dot(&y);
        let rhs = x.dot(&deconv2d_forward(&y, &transpose_roles(&p, ConvMode::Deconv)).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn custom_loss_bounds((r, c, p) in grid(20, 20), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = Tensor4::from_vec([1, 1, r, c], p).unwrap();
        let t = common::random_tensor(&mut rng, [1, 1, r, c], -1.0, 1.0);
        prop_assert_eq!(custom_loss(&p, &p).unwrap(), 0.0);
        let plain = mse(&p, &t).unwrap();
        prop_assert!(plain >= 0.0);
        prop_assert!(custom_loss(&p, &t).unwrap() >= plain);
    }

    #[test]
    fn density_is_528_times_average(bits in prop::collection::vec(any::<bool>(), ROWS * COLS)) {
        let m = TimeSpaceMatrix {
            origin: GridOrigin { lane: 0, segment_origin: 0.0, window_start: 0.0 },
            cells: bits.iter().map(|&b| b as u8).collect(),
        };
        let a = average_matrix(&m);
        prop_assert!(a.cells.iter().all(|&v| (0.0..=1.0).contains(&v)));
        for (d, v) in to_density(&a).cells.iter().zip(&a.cells) {
            prop_assert_eq!(*d, 528.0 * v);
        }
    }

    #[test]
    fn metric_scaling_is_exact(m in 0.0f64..1.0, a in 0.0f64..1.0) {
        let r = Metrics::from_matrix(m, a, 1);
        prop_assert!((r.density_rmse - 528.0 * m.sqrt()).abs() <= 1e-9 * r.density_rmse.max(1e-300));
        prop_assert!((r.density_mse - 528.0 * 528.0 * m).abs() <= 1e-9 * r.density_mse.max(1e-300));
        prop_assert!((r.density_mae - 528.0 * a).abs() <= 1e-9 * r.density_mae.max(1e-300));
    }

    #[test]
    fn run_split_partitions(ids in prop::collection::btree_set(any::<u64>(), 3..60), seed in any::<u64>()) {
        let ids: Vec<u64> = ids.into_iter().collect();
        let s = split_runs(&ids, seed).unwrap();
        let mut all: Vec<u64> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(&all, &ids);
        prop_assert!(!s.validation.is_empty() && !s.test.is_empty() && !s.train.is_empty());
        let held = ((ids.len() as f64) * 0.1).round().max(1.0) as usize;
        prop_assert_eq!(s.test.len(), held);
        prop_assert_eq!(s.validation.len(), held);
        prop_assert_eq!(split_runs(&ids, seed).unwrap(), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tsds_round_trip(h in 1usize..6, w in 1usize..6, n in 0usize..5, seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.tsds");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut writer = TsdsWriter::with_dims(&path, h, w).unwrap();
        let mut expected = Vec::new();
        for k in 0..n {
            let g = |rng: &mut ChaCha8Rng| (0..h * w).map(|_| rand::Rng::gen_range(rng, 0.0f32..1.0)).collect::<Vec<_>>();
            let (a, b) = (g(&mut rng), g(&mut rng));
            let meta = PairMeta {
                run_id: k as u64,
                lane: (k % 3) as u8,
                segment_origin: 2000.0 * k as f64,
                input_window_start: 0.0,
                target_window_start: 20.0,
            };
            writer.write(meta, &a, &b).unwrap();
            expected.push((meta, a, b));
        }
        writer.finish(None).unwrap();
        let reader = TsdsReader::open(&path).unwrap();
        prop_assert_eq!(reader.len(), n);
        for (k, (meta, a, b)) in expected.iter().enumerate() {
            prop_assert_eq!(reader.meta(k), meta);
            let (ra, rb) = reader.read_pair(k).unwrap();
            prop_assert_eq!(&ra, a);
            prop_assert_eq!(&rb, b);
        }
    }

    #[test]
    fn trajectory_csv_round_trip(rows in prop::collection::vec(
        (0u64..1000, 0u32..9000, 0u64..10_000, 0u8..3, 0.0f64..40_000.0, 0.0f64..150.0), 0..50)
    ) {
        let samples: Vec<TrajectorySample> = rows
            .iter()
            .map(|&(run_id, tick, vehicle_id, lane, position_ft, speed_ftps)| TrajectorySample {
                run_id,
                time_s: (tick as f64 * 0.1 * 10.0).round() / 10.0,
                vehicle_id,
                lane,
                position_ft,
                speed_ftps,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        save_csv(&samples, &path).unwrap();
        prop_assert_eq!(load_csv(&path).unwrap(), samples);
    }
}
