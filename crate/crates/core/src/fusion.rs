//! Discounting, fusion, decision, and the end-to-end detection pipeline.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::belief::{appriou_decide, combine_average, DecisionParams, MassFunction};
use crate::error::{Error, Result, StageContext};
use crate::indices::feature_raster;
use crate::labels::{ClassLabel, Label, MassTriple, NON_WATER, OMEGA, WATER};
use crate::raster::{render_classmap, render_mass_channel, ClassMap, Grid, MultiBandRaster};
use crate::spectral::{
    find_threshold, gamma_grid, spectral_label, spectral_triple, GammaConfig,
    SpectralModelParams, ThresholdFit, DEFAULT_NBINS, MIN_NBINS,
};
use crate::supervised::{
    harvest_training_samples, predict, supervised_triple, train, HarvestConfig, SupervisedModel,
    TrainConfig,
};

/// Label-pair counts, indexed `[spectral][supervised]` with water first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn get(&self, spectral: Label, supervised: Label) -> u64 {
        self.counts[spectral.index()][supervised.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

pub fn confusion(spectral: &Grid<Label>, supervised: &Grid<Label>) -> Result<ConfusionMatrix> {
    spectral.check_dims(supervised)?;
    let mut cm = ConfusionMatrix::default();
    for (a, b) in spectral.iter().zip(supervised.iter()) {
        cm.counts[a.index()][b.index()] += 1;
    }
    Ok(cm)
}

/// `(α_water, α_nonwater)`: the share of each supervised class that the
/// spectral model assigned to the other one.
pub fn discount_coefficients(cm: &ConfusionMatrix) -> (f64, f64) {
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let w = Label::Water;
    let nw = Label::NonWater;
    (
        ratio(cm.get(w, nw), cm.get(w, nw) + cm.get(nw, nw)),
        ratio(cm.get(nw, w), cm.get(w, w) + cm.get(nw, w)),
    )
}

/// Rebuilds the spectral masses of pixels where the two models disagree,
/// using the discounted parameters; agreeing pixels keep their masses.
pub fn apply_discounts(
    masses: &Grid<MassTriple>,
    nir: &Grid<f64>,
    gamma: &Grid<f64>,
    params: &SpectralModelParams,
    spectral: &Grid<Label>,
    supervised: &Grid<Label>,
    alphas: (f64, f64),
) -> Result<Grid<MassTriple>> {
    masses.check_dims(nir)?;
    masses.check_dims(gamma)?;
    masses.check_dims(spectral)?;
    masses.check_dims(supervised)?;
    let discounted = params.with_alphas(alphas.0, alphas.1)?;
    let data = (0..masses.len())
        .map(|i| {
            if spectral.as_slice()[i] == supervised.as_slice()[i] {
                Ok(masses.as_slice()[i])
            } else {
                spectral_triple(nir.as_slice()[i], &discounted, gamma.as_slice()[i])
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Grid::from_vec(masses.width(), masses.height(), data)
}

pub fn fuse_pixel(m1: &MassFunction, m2: &MassFunction) -> Result<MassFunction> {
    combine_average(&[m1.clone(), m2.clone()])
}

pub fn decide_pixel(m: &MassFunction, params: &DecisionParams) -> Result<ClassLabel> {
    let s = appriou_decide(m, params)?;
    Ok(ClassLabel::from_subset(s).expect("decisions on the water frame are water subsets"))
}

pub fn fuse_grid(m1: &Grid<MassTriple>, m2: &Grid<MassTriple>) -> Result<Grid<MassTriple>> {
    m1.check_dims(m2)?;
    let data = m1
        .iter()
        .zip(m2.iter())
        .map(|(a, b)| Ok(MassTriple::of(&fuse_pixel(&a.to_mass_function()?, &b.to_mass_function()?)?)))
        .collect::<Result<Vec<_>>>()?;
    Grid::from_vec(m1.width(), m1.height(), data)
}

pub fn decide_grid(masses: &Grid<MassTriple>, params: &DecisionParams) -> Result<Grid<ClassLabel>> {
    let data = masses
        .iter()
        .map(|t| decide_pixel(&t.to_mass_function()?, params))
        .collect::<Result<Vec<_>>>()?;
    Grid::from_vec(masses.width(), masses.height(), data)
}

pub fn ignorance_fraction(labels: &Grid<ClassLabel>) -> f64 {
    labels.iter().filter(|&&l| l == ClassLabel::Ignorance).count() as f64 / labels.len() as f64
}

/// Per-subset utility weights of the decision rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaConfig {
    pub water: f64,
    pub non_water: f64,
    pub ignorance: f64,
}

impl Default for LambdaConfig {
    fn default() -> Self {
        LambdaConfig {
            water: 1.0,
            non_water: 1.0,
            ignorance: 1.0,
        }
    }
}

/// Every tunable of the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub nbins: usize,
    pub gamma_window: usize,
    pub harvest_threshold: f64,
    pub per_class: usize,
    pub min_samples: usize,
    pub seed: u64,
    pub r: f64,
    pub k_d: f64,
    pub lambda: LambdaConfig,
    pub epochs: usize,
    pub reg: f64,
    pub alpha: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let h = HarvestConfig::default();
        let t = TrainConfig::default();
        PipelineConfig {
            nbins: DEFAULT_NBINS,
            gamma_window: GammaConfig::default().window(),
            harvest_threshold: h.threshold,
            per_class: h.per_class,
            min_samples: h.min_samples,
            seed: 42,
            r: 0.1,
            k_d: 1.0,
            lambda: LambdaConfig::default(),
            epochs: t.epochs,
            reg: t.reg,
            alpha: t.alpha,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nbins < MIN_NBINS {
            return Err(Error::InvalidArgument(format!(
                "nbins must be at least {MIN_NBINS}, got {}",
                self.nbins
            )));
        }
        GammaConfig::new(self.gamma_window)?;
        if !(0.0..1.0).contains(&self.harvest_threshold) {
            return Err(Error::InvalidArgument(format!(
                "harvest threshold must lie in [0, 1), got {}",
                self.harvest_threshold
            )));
        }
        if self.per_class == 0 || self.min_samples == 0 {
            return Err(Error::InvalidArgument(
                "per_class and min_samples must be positive".into(),
            ));
        }
        self.decision_params()?;
        self.train_config().validate()
    }

    pub fn decision_params(&self) -> Result<DecisionParams> {
        DecisionParams::new(self.r, self.k_d)?
            .with_lambda(WATER, self.lambda.water)?
            .with_lambda(NON_WATER, self.lambda.non_water)?
            .with_lambda(OMEGA, self.lambda.ignorance)
    }

    pub fn harvest_config(&self) -> HarvestConfig {
        HarvestConfig {
            threshold: self.harvest_threshold,
            per_class: self.per_class,
            min_samples: self.min_samples,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            reg: self.reg,
            seed: self.seed,
            alpha: self.alpha,
        }
    }
}

/// Class shares in percent, rounded to two decimals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub water: f64,
    pub non_water: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ignorance: Option<f64>,
}

fn percent(count: usize, total: usize) -> f64 {
    (10_000.0 * count as f64 / total as f64).round() / 100.0
}

fn label_split(labels: &Grid<Label>) -> Split {
    let water = labels.iter().filter(|&&l| l == Label::Water).count();
    Split {
        water: percent(water, labels.len()),
        non_water: percent(labels.len() - water, labels.len()),
        ignorance: None,
    }
}

fn class_split(labels: &Grid<ClassLabel>) -> Split {
    let count = |c| labels.iter().filter(|&&l| l == c).count();
    Split {
        water: percent(count(ClassLabel::Water), labels.len()),
        non_water: percent(count(ClassLabel::NonWater), labels.len()),
        ignorance: Some(percent(count(ClassLabel::Ignorance), labels.len())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub bins: (usize, usize),
    pub nir: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassMapPaths {
    pub water: String,
    pub non_water: String,
    pub ignorance: String,
}

/// Summary of a pipeline run, written as `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub width: usize,
    pub height: usize,
    pub threshold: f64,
    pub nir_min: f64,
    pub nir_max: f64,
    pub peaks: PeakReport,
    pub confusion: ConfusionMatrix,
    pub alpha_water: f64,
    pub alpha_nonwater: f64,
    pub spectral: Split,
    pub supervised: Split,
    pub fused: Split,
    pub training_samples: TrainingCounts,
    pub model: SupervisedModel,
    pub config: PipelineConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_maps: Option<MassMapPaths>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingCounts {
    pub water: usize,
    pub non_water: usize,
}

/// All intermediate and final products of a run.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub classmap: ClassMap,
    pub report: Report,
    pub threshold: ThresholdFit,
    pub spectral_labels: Grid<Label>,
    pub supervised_labels: Grid<Label>,
    pub spectral_masses: Grid<MassTriple>,
    pub supervised_masses: Grid<MassTriple>,
    pub fused_masses: Grid<MassTriple>,
}

/// Runs the full detection on a five-band raster.
pub fn run_pipeline(r: &MultiBandRaster, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate().stage("config")?;
    let decision = cfg.decision_params().stage("config")?;
    let nir = r.band("nir").stage("threshold")?;

    let fit = find_threshold(nir.as_slice(), cfg.nbins).stage("threshold")?;
    let params = fit.params;

    let spectral_labels = nir.map(|&n| spectral_label(n, &params));
    let gamma = gamma_grid(&spectral_labels, GammaConfig::new(cfg.gamma_window)?);
    let spectral_masses = Grid::from_vec(
        r.width(),
        r.height(),
        nir.iter()
            .zip(gamma.iter())
            .map(|(&n, &g)| spectral_triple(n, &params, g))
            .collect::<Result<Vec<_>>>()
            .stage("spectral-mass")?,
    )?;

    let features = feature_raster(r).stage("features")?;
    let training = harvest_training_samples(&spectral_masses, &features, &cfg.harvest_config())
        .stage("harvest")?;

    let model = train(&training, &features, &cfg.train_config()).stage("train")?;
    let supervised_labels = features.map(|f| predict(&model, f));
    let supervised_masses = features.map(|f| supervised_triple(&model, f));

    let cm = confusion(&spectral_labels, &supervised_labels).stage("discount")?;
    let alphas = discount_coefficients(&cm);
    let discounted = apply_discounts(
        &spectral_masses,
        nir,
        &gamma,
        &params,
        &spectral_labels,
        &supervised_labels,
        alphas,
    )
    .stage("discount")?;

    let fused = fuse_grid(&discounted, &supervised_masses).stage("fusion")?;
    let labels = decide_grid(&fused, &decision).stage("decision")?;
    let classmap = ClassMap::new(labels, Some(fused.clone())).stage("decision")?;

    let (p1, p2) = fit.peaks;
    let report = Report {
        width: r.width(),
        height: r.height(),
        threshold: params.t,
        nir_min: params.n_min,
        nir_max: params.n_max,
        peaks: PeakReport {
            bins: (p1, p2),
            nir: (fit.histogram.center(p1), fit.histogram.center(p2)),
        },
        confusion: cm,
        alpha_water: alphas.0,
        alpha_nonwater: alphas.1,
        spectral: label_split(&spectral_labels),
        supervised: label_split(&supervised_labels),
        fused: class_split(classmap.labels()),
        training_samples: TrainingCounts {
            water: training.count(Label::Water),
            non_water: training.count(Label::NonWater),
        },
        model,
        config: cfg.clone(),
        mass_maps: None,
    };
    Ok(PipelineOutput {
        classmap,
        report,
        threshold: fit,
        spectral_labels,
        supervised_labels,
        spectral_masses: discounted,
        supervised_masses,
        fused_masses: fused,
    })
}

pub const CLASSMAP_FILE: &str = "classmap.ppm";
pub const REPORT_FILE: &str = "report.json";
pub const MASS_FILES: [(ClassLabel, &str); 3] = [
    (ClassLabel::Water, "mass_water.pgm"),
    (ClassLabel::NonWater, "mass_nonwater.pgm"),
    (ClassLabel::Ignorance, "mass_ignorance.pgm"),
];

/// Writes the class map, the three mass planes and the report into `dir`.
pub fn write_outputs(out: &PipelineOutput, dir: impl AsRef<Path>) -> Result<Report> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    render_classmap(&out.classmap, dir.join(CLASSMAP_FILE))?;
    for (label, file) in MASS_FILES {
        render_mass_channel(&out.classmap, label, dir.join(file))?;
    }
    let mut report = out.report.clone();
    report.mass_maps = Some(MassMapPaths {
        water: MASS_FILES[0].1.into(),
        non_water: MASS_FILES[1].1.into(),
        ignorance: MASS_FILES[2].1.into(),
    });
    let path = dir.join(REPORT_FILE);
    let text = serde_json::to_string_pretty(&report)? + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}
