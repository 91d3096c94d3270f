use std::f64::consts::PI;

use dswater::labels::ClassLabel;
use dswater::raster::{ClassMap, Grid};
use dswater::scene::*;
use dswater::spectral::find_threshold;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn polyline_length(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).sum()
}

#[test]
fn water_area_matches_drawn_geometry() {
    for seed in [42, 1, 2] {
        let scene = generate(&SceneSpec { seed, ..SceneSpec::default() }).unwrap();
        let g = &scene.geometry;
        let estimate = polyline_length(&g.river.points) * g.river.width
            + g.lake.map_or(0.0, |d| PI * d.radius * d.radius)
            + g.streams.iter().map(|s| polyline_length(&s.points) * s.width).sum::<f64>();
        let water = scene.truth.iter().filter(|&&t| t == Truth::Water).count() as f64;
        let rel = (water - estimate).abs() / estimate;
        assert!(rel <= 0.20, "seed {seed}: {water} water pixels vs estimate {estimate:.0}");
    }
}

#[test]
fn confusers_lie_inside_clouds_or_shadows() {
    let scene = generate(&SceneSpec::default()).unwrap();
    let g = &scene.geometry;
    let inside = |d: &Disc, x: usize, y: usize| {
        (x as f64 + 0.5 - d.center.0).hypot(y as f64 + 0.5 - d.center.1) <= d.radius
    };
    let (w, h) = scene.truth.dims();
    for y in 0..h {
        for x in 0..w {
            let in_cloud = g.clouds.iter().any(|d| inside(d, x, y));
            let in_shadow = g.shadows.iter().any(|d| inside(d, x, y));
            match scene.truth.get(x, y) {
                Truth::Confuser => assert!(in_cloud || in_shadow),
                _ => assert!(!in_cloud),
            }
        }
    }
}

#[test]
fn scoring_matches_counting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (w, h) = (50, 40);
    let truth = Grid::from_fn(w, h, |_, _| [Truth::Land, Truth::Water, Truth::Confuser][rng.random_range(0..3)]);
    let labels = Grid::from_fn(w, h, |_, _| ClassLabel::ALL[rng.random_range(0..3)]);
    let m = score(&ClassMap::new(labels.clone(), None).unwrap(), &truth).unwrap();

    let pairs: Vec<(ClassLabel, Truth)> = labels.iter().copied().zip(truth.iter().copied()).collect();
    let count = |f: &dyn Fn(&(ClassLabel, Truth)) -> bool| pairs.iter().filter(|p| f(p)).count() as f64;
    let tp = count(&|(l, t)| *l == ClassLabel::Water && *t == Truth::Water);
    let predicted_water = count(&|(l, _)| *l == ClassLabel::Water);
    let hard_water = count(&|(l, t)| *t == Truth::Water && *l != ClassLabel::Ignorance);
    let confusers = count(&|(_, t)| *t == Truth::Confuser);
    let captured = count(&|(l, t)| *t == Truth::Confuser && *l != ClassLabel::Water);
    let ignorance = count(&|(l, _)| *l == ClassLabel::Ignorance);

    assert!((m.precision - tp / predicted_water).abs() < 1e-12);
    assert!((m.recall - tp / hard_water).abs() < 1e-12);
    assert!((m.confuser_capture - captured / confusers).abs() < 1e-12);
    assert!((m.ignorance_fraction - ignorance / (w * h) as f64).abs() < 1e-12);
}

#[test]
fn empty_categories_score_zero() {
    let truth = Grid::from_fn(4, 4, |_, _| Truth::Land);
    let labels = Grid::from_fn(4, 4, |_, _| ClassLabel::NonWater);
    let m = score(&ClassMap::new(labels, None).unwrap(), &truth).unwrap();
    assert_eq!((m.precision, m.recall, m.confuser_capture), (0.0, 0.0, 0.0));
}

#[test]
fn default_scene_nir_is_bimodal() {
    let spec = SceneSpec::default();
    let scene = generate(&spec).unwrap();
    let fit = find_threshold(scene.raster.band("nir").unwrap().as_slice(), 256).unwrap();
    let water_nir = spec.profiles.water.nir();
    let land_nir = spec.profiles.soil.nir().min(spec.profiles.vegetation.nir());
    assert!(water_nir < fit.params.t && fit.params.t < land_nir, "threshold {}", fit.params.t);
}

#[test]
fn truth_round_trips_through_pgm() {
    let scene = generate(&SceneSpec { width: 64, height: 48, lake: None, ..SceneSpec::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("truth.pgm");
    write_truth(&scene.truth, &path).unwrap();
    assert_eq!(read_truth(&path).unwrap(), scene.truth);
}

#[test]
fn spec_round_trips_through_json() {
    let spec = SceneSpec { seed: 9, ..SceneSpec::default() };
    let text = serde_json::to_string(&spec).unwrap();
    assert_eq!(serde_json::from_str::<SceneSpec>(&text).unwrap(), spec);
    assert!(serde_json::from_str::<SceneSpec>(r#"{"widht": 10}"#).is_err());
}
