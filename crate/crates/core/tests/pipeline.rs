use gbi::config::Config;
use gbi::junction::DetectionParams;
use gbi::pipeline::{ablate, build_pool, dataset_items, ABLATION_VARIANTS};
use gbi::prior::{fit_model, AnglePool, AnglePriorModel, PriorFitParams};
use gbi::saliency::{compute_gbi, SaliencyParams, Stages};
use gbi::scene::{generate_suite, random_spec, render, scene_seed, SuiteParams};

#[test]
fn index_is_brighter_on_buildings() {
    for i in 0..4 {
        let scene = render(&random_spec(&SuiteParams::default(), scene_seed(21, i)).unwrap()).unwrap();
        let run = compute_gbi(
            &scene.image,
            &AnglePriorModel::shipped(),
            &DetectionParams::default(),
            &SaliencyParams::default(),
            Stages::FULL,
        )
        .unwrap();
        let (mut sums, mut counts) = ([0.0; 2], [0usize; 2]);
        for (v, m) in run.map.index.data().iter().zip(scene.mask.data()) {
            sums[*m as usize] += v;
            counts[*m as usize] += 1;
        }
        assert!(sums[1] / counts[1] as f64 > 2.0 * sums[0] / counts[0] as f64, "scene {i}");
        assert!(run.map.index.max() <= 1.0 && run.map.index.min() >= 0.0);
    }
}

#[test]
fn dataset_pool_and_ablation_agree_with_their_parts() {
    let dir = tempfile::tempdir().unwrap();
    generate_suite(dir.path(), 4, 7, &SuiteParams::default()).unwrap();
    let items = dataset_items(dir.path()).unwrap();
    assert_eq!(items.len(), 4);

    let pool = build_pool(&items, &DetectionParams::default()).unwrap();
    let mut by_hand = AnglePool::default();
    for item in &items[..2] {
        let one = build_pool(std::slice::from_ref(item), &DetectionParams::default()).unwrap();
        by_hand.building.extend(one.building);
        by_hand.background.extend(one.background);
    }
    assert!(pool.building.starts_with(&by_hand.building));
    assert!(pool.building.iter().chain(&pool.background).all(|&b| b > 0.0 && b <= std::f64::consts::PI));

    let rows = ablate(&items, &AnglePriorModel::shipped(), &Config::default()).unwrap();
    assert_eq!(rows.len(), ABLATION_VARIANTS.len());
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.map) && (0.0..=1.0).contains(&r.mean_f)));
    assert!(rows[3].mean_f > rows[0].mean_f);
}

#[test]
fn fitting_needs_enough_labeled_angles() {
    let pool = AnglePool { building: vec![1.5; 29], background: vec![1.0; 200] };
    assert!(fit_model(&pool, &PriorFitParams::default()).is_err());
    let bad = PriorFitParams { prior_building: Some(0.0), ..Default::default() };
    assert!(bad.validate().is_err());
}
