use std::collections::HashSet;

use hystkin::simulator::sweep_profile;
use hystkin::{load_csv, BacklashPlant, BranchLabel, CycleDataset, GainCurve, Preset, Sample};
use proptest::prelude::*;

fn noisy_dataset(seed: u64, cycles: usize, steps: usize) -> CycleDataset {
    Preset::PitchLike.plant(0.15, seed).generate_dataset(cycles, steps, 1.0, false).unwrap()
}

#[test]
fn nine_cycle_protocol_shape() {
    let ds = noisy_dataset(7, 9, 200);
    assert_eq!((ds.cycles(), ds.points_per_cycle(), ds.len()), (9, 200, 1800));
    let (train, test) = ds.train_test_split(6).unwrap();
    assert_eq!((train.cycles(), test.cycles()), (6, 3));
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let ds = noisy_dataset(3, 4, 50);
    ds.write_csv(&path).unwrap();
    let back = load_csv(&path, -1.0, 1.0).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back.to_csv_string(), std::fs::read_to_string(&path).unwrap());
    for (a, b) in back.samples().iter().zip(ds.samples()) {
        assert_eq!(a.q.to_bits(), b.q.to_bits());
        assert_eq!(a.gamma.to_bits(), b.gamma.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn split_partitions_every_cycle(seed in 0u64..10_000, cycles in 1usize..6, half in 2usize..40) {
        let ds = noisy_dataset(seed, cycles, 2 * half);
        let split = ds.split_cycles().unwrap();
        prop_assert_eq!(split.ascending.len() + split.descending.len(), ds.len());
        for c in 0..cycles as u32 {
            let asc: HashSet<u32> = split.ascending.iter().filter(|s| s.sample.cycle_id == c).map(|s| s.sample.step_index).collect();
            let desc: HashSet<u32> = split.descending.iter().filter(|s| s.sample.cycle_id == c).map(|s| s.sample.step_index).collect();
            prop_assert!(asc.is_disjoint(&desc));
            prop_assert_eq!(asc.len() + desc.len(), 2 * half);
        }
        prop_assert!(split.ascending.iter().all(|s| s.label == BranchLabel::Ascending));
        prop_assert!(split.descending.iter().all(|s| s.label == BranchLabel::Descending));
    }

    #[test]
    fn csv_text_round_trip(seed in 0u64..10_000) {
        let ds = noisy_dataset(seed, 2, 12);
        let text = ds.to_csv_string();
        let back = CycleDataset::from_csv_reader(text.as_bytes(), -1.0, 1.0).unwrap();
        prop_assert_eq!(back.to_csv_string(), text);
    }
}

#[test]
fn split_is_idempotent_on_monotone_cycles() {
    let ds = noisy_dataset(11, 3, 40);
    let asc = ds.split_cycles().unwrap().ascending;
    // Re-number each cycle's ascending half as its own dataset; trim to the
    // shortest so cycles stay rectangular.
    let per = (0..3u32).map(|c| asc.iter().filter(|s| s.sample.cycle_id == c).count()).min().unwrap();
    let samples: Vec<Sample> = (0..3u32)
        .flat_map(|c| asc.iter().filter(move |s| s.sample.cycle_id == c).take(per).map(|s| s.sample))
        .collect();
    let mono = CycleDataset::new(samples.clone(), -1.0, 1.0).unwrap();
    let again = mono.split_cycles().unwrap();
    assert!(again.descending.is_empty());
    let back: Vec<Sample> = again.ascending.iter().map(|s| s.sample).collect();
    assert_eq!(back, mono.samples());
}

#[test]
fn doubling_the_step_count_refines_the_same_loop() {
    let mut plant = Preset::PitchLike.plant(0.0, 0);
    let coarse = plant.clone().generate_dataset(2, 40, 1.0, true).unwrap();
    let fine = plant.generate_dataset(2, 80, 1.0, true).unwrap();
    let branch = |ds: &CycleDataset| {
        let split = ds.split_cycles().unwrap();
        (split.ascending_points(), split.descending_points())
    };
    let (ca, cd) = branch(&coarse);
    let (fa, fd) = branch(&fine);
    let mut shared = 0;
    for (coarse_pts, fine_pts) in [(ca, fa), (cd, fd)] {
        for p in &coarse_pts {
            let twin = fine_pts.iter().find(|f| (f[0] - p[0]).abs() < 1e-12);
            if let Some(f) = twin {
                assert!((f[1] - p[1]).abs() <= 1e-9, "q = {}: {} vs {}", p[0], p[1], f[1]);
                shared += 1;
            }
        }
    }
    assert!(shared >= 60, "only {shared} shared inputs");
}

#[test]
fn descending_branch_sits_above_ascending() {
    for preset in Preset::ALL {
        let mut plant = preset.plant(0.0, 0);
        let ds = plant.generate_dataset(1, 200, 1.0, true).unwrap();
        let split = ds.split_cycles().unwrap();
        for up in split.ascending_points() {
            if let Some(down) = split.descending_points().iter().find(|d| (d[0] - up[0]).abs() < 1e-12) {
                assert!(down[1] >= up[1] - 1e-12, "{} at q = {}", preset.name(), up[0]);
            }
        }
    }
}

#[test]
fn identity_gain_inverse_example() {
    let plant = BacklashPlant::new(0.1, GainCurve::new(45.0, 0.0).unwrap(), 0.0, -1.0, 1.0, 0).unwrap();
    let q = plant.analytic_inverse(22.5, BranchLabel::Ascending).unwrap();
    assert!((q - 0.55).abs() <= 1e-12);
    assert_eq!(sweep_profile(4, 1.0).len(), 4);
}
