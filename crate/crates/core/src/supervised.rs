//! Self-trained linear classifier in index space and the supervised mass function.
//!
//! Training pixels are harvested from the spectral model where it is
//! confident. A linear SVM trained on them labels every pixel, and the
//! distance of a pixel to its class center sets how much mass that label gets.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::MassFunction;
use crate::error::{Error, Result};
use crate::indices::FeatureVector;
use crate::labels::{Label, MassTriple};
use crate::raster::Grid;
use crate::spectral::big_n;

/// Lower bound substituted for a zero or undefined `D′`.
pub const DPRIME_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarvestConfig {
    pub threshold: f64,
    pub per_class: usize,
    pub min_samples: usize,
    pub seed: u64,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        HarvestConfig {
            threshold: 0.7,
            per_class: 5000,
            min_samples: 50,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub pixel: usize,
    pub features: FeatureVector,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub samples: Vec<Sample>,
    pub seed: u64,
}

impl TrainingSet {
    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }
}

/// Randomly picks confidently labeled pixels of each class.
///
/// A pixel is eligible for a class when its spectral mass on that singleton
/// exceeds `cfg.threshold`.
pub fn harvest_training_samples(
    masses: &Grid<MassTriple>,
    features: &Grid<FeatureVector>,
    cfg: &HarvestConfig,
) -> Result<TrainingSet> {
    masses.check_dims(features)?;
    if !(0.0..1.0).contains(&cfg.threshold) {
        return Err(Error::InvalidArgument(format!(
            "harvest threshold must lie in [0, 1), got {}",
            cfg.threshold
        )));
    }
    if cfg.per_class == 0 {
        return Err(Error::InvalidArgument("per_class must be positive".into()));
    }
    let eligible = |pick: fn(&MassTriple) -> f64| -> Vec<usize> {
        masses
            .iter()
            .enumerate()
            .filter(|(_, m)| pick(m) > cfg.threshold)
            .map(|(i, _)| i)
            .collect()
    };
    let water = eligible(|m| m.water);
    let non_water = eligible(|m| m.non_water);
    if water.len() < cfg.min_samples || non_water.len() < cfg.min_samples {
        return Err(Error::InsufficientTrainingData {
            water: water.len(),
            non_water: non_water.len(),
            required: cfg.min_samples,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::new();
    for (pool, label) in [(water, Label::Water), (non_water, Label::NonWater)] {
        let take = cfg.per_class.min(pool.len());
        for k in rand::seq::index::sample(&mut rng, pool.len(), take) {
            let pixel = pool[k];
            samples.push(Sample {
                pixel,
                features: features.as_slice()[pixel],
                label,
            });
        }
    }
    Ok(TrainingSet {
        samples,
        seed: cfg.seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub reg: f64,
    pub seed: u64,
    pub alpha: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            reg: 1e-3,
            seed: 42,
            alpha: 0.95,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be positive".into()));
        }
        if !(self.reg.is_finite() && self.reg > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "regularization must be positive, got {}",
                self.reg
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Trained linear classifier plus the geometry of the supervised mass function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupervisedModel {
    /// Weights over standardized features; the last entry is the bias.
    pub weights: [f64; 4],
    pub feature_means: [f64; 3],
    pub feature_scales: [f64; 3],
    pub c_water: FeatureVector,
    pub c_nonwater: FeatureVector,
    pub dprime_water: f64,
    pub dprime_nonwater: f64,
    pub alpha: f64,
    pub seed: u64,
    pub epochs: usize,
    pub reg: f64,
}

impl SupervisedModel {
    /// Signed distance-like score; positive means water.
    pub fn decision_value(&self, f: &FeatureVector) -> f64 {
        let z = standardize(f, &self.feature_means, &self.feature_scales);
        z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.weights[3]
    }
}

fn standardize(f: &FeatureVector, means: &[f64; 3], scales: &[f64; 3]) -> [f64; 3] {
    let a = f.to_array();
    [0, 1, 2].map(|i| (a[i] - means[i]) / scales[i])
}

fn class_sign(l: Label) -> f64 {
    match l {
        Label::Water => 1.0,
        Label::NonWater => -1.0,
    }
}

fn mean_of(samples: &[&Sample]) -> FeatureVector {
    let mut acc = [0.0; 3];
    for s in samples {
        for (a, v) in acc.iter_mut().zip(s.features.to_array()) {
            *a += v;
        }
    }
    FeatureVector::from_array(acc.map(|a| a / samples.len() as f64))
}

/// Trains the classifier on `ts` and measures `D′` over `image`.
pub fn train(
    ts: &TrainingSet,
    image: &Grid<FeatureVector>,
    cfg: &TrainConfig,
) -> Result<SupervisedModel> {
    cfg.validate()?;
    let water: Vec<&Sample> = ts.samples.iter().filter(|s| s.label == Label::Water).collect();
    let non_water: Vec<&Sample> = ts.samples.iter().filter(|s| s.label == Label::NonWater).collect();
    if water.is_empty() || non_water.is_empty() {
        return Err(Error::Untrainable("training set must contain both classes".into()));
    }

    let n = ts.samples.len() as f64;
    let mut means = [0.0; 3];
    for s in &ts.samples {
        for (m, v) in means.iter_mut().zip(s.features.to_array()) {
            *m += v / n;
        }
    }
    let mut var = [0.0; 3];
    for s in &ts.samples {
        for (i, v) in s.features.to_array().iter().enumerate() {
            var[i] += (v - means[i]).powi(2) / n;
        }
    }
    if var.iter().all(|&v| v == 0.0) {
        return Err(Error::Untrainable("every feature is constant over the training set".into()));
    }
    let scales = var.map(|v| if v > 0.0 { v.sqrt() } else { 1.0 });

    let xs: Vec<[f64; 4]> = ts
        .samples
        .iter()
        .map(|s| {
            let z = standardize(&s.features, &means, &scales);
            [z[0], z[1], z[2], 1.0]
        })
        .collect();
    let ys: Vec<f64> = ts.samples.iter().map(|s| class_sign(s.label)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut w = [0.0f64; 4];
    let mut step = 0u64;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            step += 1;
            let eta = 1.0 / (cfg.reg * step as f64);
            let margin = ys[i] * w.iter().zip(&xs[i]).map(|(a, b)| a * b).sum::<f64>();
            let shrink = 1.0 - eta * cfg.reg;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (v, x) in w.iter_mut().zip(&xs[i]) {
                    *v += eta * ys[i] * x;
                }
            }
        }
    }

    let c_water = mean_of(&water);
    let c_nonwater = mean_of(&non_water);
    let (dprime_water, dprime_nonwater) = compute_dprime(&c_water, &c_nonwater, image.as_slice())?;
    Ok(SupervisedModel {
        weights: w,
        feature_means: means,
        feature_scales: scales,
        c_water,
        c_nonwater,
        dprime_water,
        dprime_nonwater,
        alpha: cfg.alpha,
        seed: cfg.seed,
        epochs: cfg.epochs,
        reg: cfg.reg,
    })
}

/// Water when the decision value is strictly positive.
pub fn predict(model: &SupervisedModel, f: &FeatureVector) -> Label {
    if model.decision_value(f) > 0.0 {
        Label::Water
    } else {
        Label::NonWater
    }
}

/// Largest squared distance from each center to the pixels nearer to it.
pub fn compute_dprime(
    c_water: &FeatureVector,
    c_nonwater: &FeatureVector,
    features: &[FeatureVector],
) -> Result<(f64, f64)> {
    if c_water == c_nonwater {
        return Err(Error::DegenerateCenters);
    }
    let (mut dw, mut dn) = (0.0f64, 0.0f64);
    for f in features {
        let d1 = f.squared_distance(c_water);
        let d2 = f.squared_distance(c_nonwater);
        if d1 <= d2 {
            dw = dw.max(d1);
        } else {
            dn = dn.max(d2);
        }
    }
    let floor = |d: f64| if d > 0.0 { d } else { DPRIME_FLOOR };
    Ok((floor(dw), floor(dn)))
}

/// Supervised masses from squared center distances.
pub fn distance_masses(
    d1_sq: f64,
    d2_sq: f64,
    dprime_water: f64,
    dprime_nonwater: f64,
    alpha: f64,
) -> Result<MassTriple> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !(dprime_water > 0.0 && dprime_nonwater > 0.0) {
        return Err(Error::InvalidArgument("D′ must be positive".into()));
    }
    if !(d1_sq >= 0.0 && d2_sq >= 0.0) {
        return Err(Error::InvalidArgument("squared distances must be non-negative".into()));
    }
    let curve = |d: f64, dp: f64| {
        (alpha / big_n() * ((-d / dp).exp() - (-1.0f64).exp())).clamp(0.0, alpha)
    };
    Ok(if d1_sq <= d2_sq {
        let w = curve(d1_sq, dprime_water);
        MassTriple::new(w, 0.0, 1.0 - w)
    } else {
        let nw = curve(d2_sq, dprime_nonwater);
        MassTriple::new(0.0, nw, 1.0 - nw)
    })
}

pub fn supervised_triple(model: &SupervisedModel, f: &FeatureVector) -> MassTriple {
    distance_masses(
        f.squared_distance(&model.c_water),
        f.squared_distance(&model.c_nonwater),
        model.dprime_water,
        model.dprime_nonwater,
        model.alpha,
    )
    .expect("a trained model has valid geometry")
}

pub fn supervised_mass(model: &SupervisedModel, f: &FeatureVector) -> Result<MassFunction> {
    supervised_triple(model, f).to_mass_function()
}
