//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass name fragments as arguments to run a subset.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{max_gradient_error, micro_topology, naive_box_mean, naive_smoothed_mse, random_tensor};
use shockwave::microsim::{run_simulation, DisturbanceEvent, DisturbanceKind, SimConfig, TrajectorySample};
use shockwave::model::{build_model, EncoderDecoder, PARAMETER_COUNT};
use shockwave::netcore::{
    conv2d_forward, custom_loss, deconv2d_forward, mse, smoothed_mse, transpose_roles, AdamState, ConvLayerParams,
    ConvMode, LossKind, Tensor4, SMOOTHED_WEIGHT, SMOOTHING_WIDTHS,
};
use shockwave::trainer::{
    apply_assignment, baseline_persistence, evaluate, split_runs, train_step, train_two_phase, Metrics,
    MetricsTable, TrainOptions,
};
use shockwave::tsgrid::{
    average_matrix, build_time_space_matrix, edie_density_oracle, for_each_sample_pair, lane_matrices, to_density,
    EdieBlock, GridOrigin, InMemoryDataset, PairSource, RunLayout, TimeSpaceMatrix, TsdsReader, TsdsWriter, COLS,
    ROWS, SEGMENT_FT, SPACE_BIN_FT, TIME_BIN_S, WINDOW_S,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn env_usize(name: &str, default: usize) -> usize {
    std::env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn parameter_count() -> Outcome {
    let n = build_model(0).map_err(|e| e.to_string())?.param_count();
    ensure(n == PARAMETER_COUNT, || format!("{n} parameters"))?;
    Ok(format!("{n} trainable parameters"))
}

fn shape_invariance() -> Outcome {
    let model = build_model(1).map_err(|e| e.to_string())?;
    let sizes = [10, 64, 200, 317];
    for h in sizes {
        for w in sizes {
            let x = Tensor4::<f32>::zeros([1, 1, h, w]).map(|_| 0.25);
            let y = model.forward(&x).map_err(|e| e.to_string())?;
            ensure(y.dims() == [1, 1, h, w], || format!("{h}x{w} -> {:?}", y.dims()))?;
        }
    }
    Ok(format!("{} input shapes preserved", sizes.len() * sizes.len()))
}

fn gradient_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut model = EncoderDecoder::<f64>::new(micro_topology(), 5).map_err(|e| e.to_string())?;
    for l in model.layers_mut() {
        l.biases.iter_mut().for_each(|b| *b = rng.gen_range(-0.1..0.1));
    }
    let x = random_tensor(&mut rng, [1, 1, 8, 8], 0.0, 1.0);
    let target = random_tensor(&mut rng, [1, 1, 8, 8], 0.0, 1.0);
    let mut worst: f64 = 0.0;
    for kind in [LossKind::PlainMse, LossKind::Custom] {
        let err = max_gradient_error(&mut model, &x, |y| kind.value_and_grad(y, &target).unwrap(), 1e-5);
        worst = worst.max(err);
    }
    ensure(worst < 1e-4, || format!("max relative error {worst:.3e}"))?;
    Ok(format!("{} parameters, max relative error {worst:.2e}", model.param_count()))
}

fn adjointness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (cin, cout) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let (h, w) = (rng.gen_range(1..24), rng.gen_range(1..24));
        let mut p = ConvLayerParams::<f64>::zeros(cin, cout, ConvMode::Conv);
        p.kernels.iter_mut().for_each(|k| *k = rng.gen_range(-1.0..1.0));
        let x = random_tensor(&mut rng, [1, cin, h, w], -1.0, 1.0);
        let y = random_tensor(&mut rng, [1, cout, h, w], -1.0, 1.0);
        let lhs = conv2d_forward(&x, &p).map_err(|e| e.to_string())?.dot(&y);
        let rhs = x.dot(&deconv2d_forward(&y, &transpose_roles(&p, ConvMode::Deconv)).map_err(|e| e.to_string())?);
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-12));
    }
    ensure(worst < 1e-6, || format!("max relative gap {worst:.3e}"))?;
    Ok(format!("100 cases, max relative gap {worst:.2e}"))
}

fn edie_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let layout = RunLayout::default();
    let mut cells = 0usize;
    let mut worst: f64 = 0.0;
    for run in 0..4u64 {
        let out = run_simulation(&SimConfig::with_seed(100 + run)).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let lane = rng.gen_range(0..layout.lanes) as u8;
            let origin = rng.gen_range(0..layout.segments()) as f64 * SEGMENT_FT;
            let start = rng.gen_range(0..layout.windows()) as f64 * WINDOW_S;
            let m = build_time_space_matrix(&out.samples, lane, origin, start).map_err(|e| e.to_string())?;
            let averaged = average_matrix(&m);
            let density = to_density(&averaged);
            for (d, a) in density.cells.iter().zip(&averaged.cells) {
                ensure(*d == 528.0 * a, || format!("density {d} != 528 x {a}"))?;
            }
            // Samples of this lane and window, sorted by position for range lookups.
            let mut local: Vec<&TrajectorySample> = out
                .samples
                .iter()
                .filter(|s| s.lane == lane && s.time_s > start - 1.0 && s.time_s < start + WINDOW_S + 1.0)
                .collect();
            local.sort_by(|a, b| a.position_ft.total_cmp(&b.position_ft));
            for i in 5..=ROWS - 5 {
                for j in 5..=COLS - 5 {
                    let block = EdieBlock {
                        lane,
                        space_start: origin + (i as f64 - 5.0) * SPACE_BIN_FT,
                        space_end: origin + (i as f64 + 5.0) * SPACE_BIN_FT,
                        time_start: start + (j as f64 - 5.0) * TIME_BIN_S,
                        time_end: start + (j as f64 + 5.0) * TIME_BIN_S,
                    };
                    let lo = local.partition_point(|s| s.position_ft < block.space_start - 1.0);
                    let hi = local.partition_point(|s| s.position_ft < block.space_end + 1.0);
                    let near: Vec<TrajectorySample> = local[lo..hi].iter().map(|s| **s).collect();
                    let oracle = edie_density_oracle(&near, &block);
                    let got = density.cells[i * COLS + j];
                    let err = (got - oracle).abs() / oracle.abs().max(1.0);
                    worst = worst.max(err);
                    ensure(err <= 1e-9, || {
                        format!("lane {lane} origin {origin} window {start}: cell ({i},{j}) {got} vs oracle {oracle}")
                    })?;
                    cells += 1;
                }
            }
        }
    }
    Ok(format!("20 windows, {cells} interior cells, max error {worst:.1e}, K = 528 x TS exact"))
}

fn averaging_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let origin = GridOrigin {
        lane: 0,
        segment_origin: 0.0,
        window_start: 0.0,
    };
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let fill = rng.gen_range(0.0..1.0);
        let m = TimeSpaceMatrix {
            origin,
            cells: (0..ROWS * COLS).map(|_| rng.gen_bool(fill) as u8).collect(),
        };
        let fast = average_matrix(&m);
        let src: Vec<f64> = m.cells.iter().map(|&c| c as f64).collect();
        let slow = naive_box_mean(&src, ROWS, COLS, 10);
        for (a, b) in fast.cells.iter().zip(&slow) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max difference {worst:.3e}"))?;
    Ok(format!("1000 random 200x200 matrices, max difference {worst:.1e}"))
}

fn loss_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst: f64 = 0.0;
    for case in 0..40 {
        let (h, w) = if case < 4 { (200, 200) } else { (rng.gen_range(1..60), rng.gen_range(1..60)) };
        let p = random_tensor(&mut rng, [1, 1, h, w], 0.0, 1.0);
        let t = random_tensor(&mut rng, [1, 1, h, w], 0.0, 1.0);
        let same = custom_loss(&p, &p).map_err(|e| e.to_string())?;
        ensure(same == 0.0, || format!("custom_loss(p, p) = {same}"))?;
        let total = custom_loss(&p, &t).map_err(|e| e.to_string())?;
        let plain = mse(&p, &t).map_err(|e| e.to_string())?;
        ensure(total >= plain, || format!("custom {total} < mse {plain}"))?;
        let (pv, tv) = (p.to_f64_vec(), t.to_f64_vec());
        let naive_plain = pv.iter().zip(&tv).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / pv.len() as f64;
        let mut composed = naive_plain;
        worst = worst.max((plain - naive_plain).abs());
        for width in SMOOTHING_WIDTHS {
            let term = smoothed_mse(&p, &t, width).map_err(|e| e.to_string())?;
            let naive = naive_smoothed_mse(&pv, &tv, h, w, width);
            worst = worst.max((term - naive).abs());
            composed += SMOOTHED_WEIGHT * naive;
        }
        worst = worst.max((total - composed).abs() / composed.max(1.0));
    }
    ensure(worst <= 1e-12, || format!("max term error {worst:.3e}"))?;
    Ok(format!("40 random cases, max term error {worst:.1e}"))
}

fn vehicle_at(samples: &[TrajectorySample], vehicle: u64, t: f64) -> Result<&TrajectorySample, String> {
    let tick = (t / TIME_BIN_S).round() as i64;
    samples
        .iter()
        .find(|s| s.vehicle_id == vehicle && (s.time_s / TIME_BIN_S).round() as i64 == tick)
        .ok_or_else(|| format!("vehicle {vehicle} not on the road at t={t}"))
}

/// Upstream end of the dense region trailing `vehicle` at time `t`, as a
/// row index of the 2000 ft matrix starting at `origin`. Low-density runs of
/// up to 150 ft inside the queue are bridged.
fn queue_edge(samples: &[TrajectorySample], vehicle: u64, lane: u8, origin: f64, t: f64) -> Result<usize, String> {
    const DENSE: f64 = 0.15;
    const MAX_GAP_ROWS: usize = 15;
    let m = build_time_space_matrix(samples, lane, origin, t - WINDOW_S / 2.0).map_err(|e| e.to_string())?;
    let a = average_matrix(&m);
    let col = COLS / 2;
    let head = vehicle_at(samples, vehicle, t)?;
    ensure(head.lane == lane, || format!("slow vehicle left lane {lane}"))?;
    let head_row = ((head.position_ft - origin) / SPACE_BIN_FT).floor();
    ensure((0.0..ROWS as f64).contains(&head_row), || format!("slow vehicle outside the matrix at t={t}"))?;
    let mut edge = head_row as usize;
    let mut row = edge;
    while row > 0 && row + MAX_GAP_ROWS >= edge {
        row -= 1;
        if a.get(row, col) > DENSE {
            edge = row;
        }
    }
    ensure(row > 0, || format!("dense region reaches the matrix edge at t={t}"))?;
    Ok(edge)
}

/// Queue edge rows behind a slow vehicle, every 20 s over 60 s.
fn slow_vehicle_queue() -> Result<(Vec<usize>, [f64; 4]), String> {
    let onset = 290.0;
    let config = SimConfig {
        speed_limit_mph: Some(65.0),
        inflow: Some(2000.0),
        disturbances: Some(vec![DisturbanceEvent {
            kind: DisturbanceKind::SlowVehicle,
            start_time: onset,
            duration: 300.0,
            target_speed: Some(8.0),
        }]),
        ..SimConfig::with_seed(7)
    };
    let out = run_simulation(&config).map_err(|e| e.to_string())?;
    let applied = &out.disturbances[0];
    let (vehicle, lane) = match (applied.vehicle_id, applied.lane) {
        (Some(v), Some(l)) => (v, l as u8),
        _ => return Err("slow-vehicle disturbance found no target".into()),
    };
    let times = [onset + 20.0, onset + 40.0, onset + 60.0, onset + 80.0];
    // The vehicle creeps about 500 ft downstream over the span while the
    // queue grows upstream, so leave room on both sides.
    let first = vehicle_at(&out.samples, vehicle, times[0])?.position_ft;
    let origin = ((first - 1000.0) / SPACE_BIN_FT).floor() * SPACE_BIN_FT;
    let edges = times
        .iter()
        .map(|&t| queue_edge(&out.samples, vehicle, lane, origin, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((edges, times))
}

fn simulator_soundness() -> Outcome {
    let (edges, times) = slow_vehicle_queue()?;
    eprintln!("    slow vehicle: queue edge rows {edges:?} at t = {times:?}");
    ensure(edges.windows(2).all(|w| w[1] < w[0]), || {
        format!("upstream edge rows {edges:?} at t = {times:?} are not strictly decreasing")
    })?;
    let runs = 100u64;
    let mut samples = 0usize;
    for seed in 0..runs {
        let out = run_simulation(&SimConfig::with_seed(seed)).map_err(|e| format!("seed {seed}: {e}"))?;
        let min_speed = out.samples.iter().map(|s| s.speed_ftps).fold(f64::INFINITY, f64::min);
        ensure(min_speed >= 0.0, || format!("seed {seed}: negative speed {min_speed}"))?;
        samples += out.samples.len();
    }
    Ok(format!(
        "{runs} runs ({samples} samples) without collisions or negative speeds; queue edge rows {edges:?} at t = {times:?}"
    ))
}

fn dataset_bookkeeping() -> Outcome {
    let out = run_simulation(&SimConfig::with_seed(2)).map_err(|e| e.to_string())?;
    let layout = RunLayout::default();
    for lane in 0..layout.lanes as u8 {
        let tiles = lane_matrices(&out.samples, &layout, lane).map_err(|e| e.to_string())?;
        ensure(tiles.len() == 900, || format!("lane {lane}: {} matrices", tiles.len()))?;
    }
    let mut per_lane = [0usize; 3];
    let mut windows_used = std::collections::BTreeSet::new();
    let total = for_each_sample_pair(&out.samples, &layout, |p| {
        per_lane[p.input.origin.lane as usize] += 1;
        windows_used.insert((p.input.origin.window_start / WINDOW_S) as usize);
        windows_used.insert((p.target.origin.window_start / WINDOW_S) as usize);
        assert_eq!(p.target.origin.window_start, p.input.origin.window_start + WINDOW_S);
        assert_eq!((p.input.origin.window_start / WINDOW_S) as usize % 2, 0);
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    ensure(per_lane == [440; 3], || format!("pairs per lane {per_lane:?}"))?;
    ensure(windows_used.len() == 44 && !windows_used.contains(&44), || {
        format!("{} windows used", windows_used.len())
    })?;
    Ok(format!(
        "900 matrices and 440 pairs per lane ({total} total); window 44 (880-900 s) discarded"
    ))
}

fn overfit_sanity() -> Outcome {
    let max_steps = env_usize("SHOCKWAVE_OVERFIT_STEPS", 3000);
    let out = run_simulation(&SimConfig::with_seed(3)).map_err(|e| e.to_string())?;
    let mut ds = InMemoryDataset::new(ROWS, COLS);
    let mut k = 0;
    for_each_sample_pair(&out.samples, &RunLayout::default(), |p| {
        if k % 165 == 7 {
            ds.push_pair(&p)?;
        }
        k += 1;
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let mut model = build_model(0).map_err(|e| e.to_string())?;
    let mut optimizer = AdamState::new(&model.group_sizes());
    let mut first = None;
    // With the whole set as one batch, each step's loss is the train MSE
    // of the weights left by the previous step.
    for step in 0..=max_steps {
        let loss = train_step(&mut model, &mut optimizer, &ds, &all, LossKind::PlainMse, (step, 0))
            .map_err(|e| e.to_string())?;
        first.get_or_insert(loss);
        if loss < 1e-3 {
            return Ok(format!(
                "{} pairs: train MSE {:.2e} -> {loss:.2e} after {step} steps",
                ds.len(),
                first.unwrap()
            ));
        }
        if step % 50 == 0 {
            eprintln!("    overfit: step {step}, train MSE {loss:.3e}");
        }
    }
    Err(format!("train MSE still >= 1e-3 after {max_steps} steps"))
}

fn desk_scale_end_to_end() -> Outcome {
    let runs = 50u64;
    let per_run = env_usize("SHOCKWAVE_DESK_PAIRS", 4);
    let epochs = env_usize("SHOCKWAVE_DESK_EPOCHS", 3);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("desk.tsds");
    let assignment = split_runs(&(0..runs).collect::<Vec<_>>(), 0).map_err(|e| e.to_string())?;
    let mut writer = TsdsWriter::create(&path).map_err(|e| e.to_string())?;
    let layout = RunLayout::default();
    let total = layout.lanes * layout.pairs_per_lane();
    for seed in 0..runs {
        let out = run_simulation(&SimConfig::with_seed(seed)).map_err(|e| format!("seed {seed}: {e}"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = sample(&mut rng, total, per_run).into_vec();
        keep.sort_unstable();
        let mut k = 0;
        for_each_sample_pair(&out.samples, &layout, |p| {
            if keep.binary_search(&k).is_ok() {
                writer.write_pair(&p)?;
            }
            k += 1;
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    }
    writer.finish(Some(assignment.clone())).map_err(|e| e.to_string())?;
    let reader = TsdsReader::open(&path).map_err(|e| e.to_string())?;
    let split = apply_assignment(&reader, &assignment).map_err(|e| e.to_string())?;
    let options = TrainOptions {
        max_epochs: epochs,
        seed: 0,
        ..TrainOptions::default()
    };
    let mut model = build_model(0).map_err(|e| e.to_string())?;
    let report = train_two_phase(&mut model, &reader, &split, &options).map_err(|e| e.to_string())?;
    let (p1, p2) = (&report.phases[0], &report.phases[1]);
    let test = report.test.ok_or("no test metrics")?;
    let baseline = report.baseline.ok_or("no baseline metrics")?;
    eprint!("{}", MetricsTable(vec![("Trained Model", test), ("Persistence Baseline", baseline)]));
    let summary = format!(
        "{} runs, {}/{}/{} pairs; validation MSE {:.5} -> {:.5}; test MSE {:.5} vs persistence {:.5}",
        runs,
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        p1.best_validation_mse,
        p2.best_validation_mse,
        test.mse,
        baseline.mse
    );
    ensure(test.mse < baseline.mse, || format!("model does not beat persistence: {summary}"))?;
    ensure(p2.best_validation_mse <= p1.best_validation_mse, || {
        format!("phase 2 validation MSE above phase 1: {summary}")
    })?;
    Ok(summary)
}

fn metric_scaling() -> Outcome {
    let m = Metrics::from_matrix(0.0030, 0.0408, 1);
    ensure((m.density_rmse - 28.92).abs() < 0.005, || format!("RMSE {}", m.density_rmse))?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ds = InMemoryDataset::new(16, 16);
    for run_id in 0..6 {
        let meta = shockwave::tsgrid::PairMeta {
            run_id,
            lane: 0,
            segment_origin: 0.0,
            input_window_start: 0.0,
            target_window_start: 20.0,
        };
        let grid = |rng: &mut ChaCha8Rng| (0..256).map(|_| rng.gen_range(0.0f32..1.0)).collect::<Vec<_>>();
        let (a, b) = (grid(&mut rng), grid(&mut rng));
        ds.push(meta, a, b).map_err(|e| e.to_string())?;
    }
    let model = build_model(0).map_err(|e| e.to_string())?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let rows = [
        evaluate(&model, &all, &ds).map_err(|e| e.to_string())?,
        baseline_persistence(&all, &ds).map_err(|e| e.to_string())?,
    ];
    for r in rows {
        let want = 528.0 * r.mse.sqrt();
        ensure((r.density_rmse - want).abs() <= 1e-9 * want, || format!("{} vs {want}", r.density_rmse))?;
        ensure((r.density_mse - 528.0 * 528.0 * r.mse).abs() <= 1e-9 * r.density_mse, || "MSE scaling".into())?;
        ensure((r.density_mae - 528.0 * r.mae).abs() <= 1e-9 * r.density_mae, || "MAE scaling".into())?;
    }
    let table = MetricsTable(vec![("Trained Model", rows[0]), ("Persistence Baseline", rows[1])]).to_string();
    for (line, r) in table.lines().skip(1).zip(&rows) {
        let printed: f64 = line.split_whitespace().last().unwrap().parse().map_err(|_| "unparsable table")?;
        ensure((printed - 528.0 * r.mse.sqrt()).abs() < 5e-5, || format!("printed RMSE {printed}"))?;
    }
    Ok(format!("MSE 0.0030 -> RMSE {:.2} vpm; evaluate/table scaling exact", m.density_rmse))
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("parameter_count", parameter_count),
        ("shape_invariance", shape_invariance),
        ("gradient_oracle", gradient_oracle),
        ("adjointness", adjointness),
        ("edie_equivalence", edie_equivalence),
        ("averaging_oracle", averaging_oracle),
        ("loss_identities", loss_identities),
        ("metric_scaling", metric_scaling),
        ("dataset_bookkeeping", dataset_bookkeeping),
        ("simulator_soundness", simulator_soundness),
        ("overfit_sanity", overfit_sanity),
        ("desk_scale_end_to_end", desk_scale_end_to_end),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1} s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
