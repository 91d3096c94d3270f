use std::fs;
use std::path::Path;

use dswater::fusion::{run_pipeline, write_outputs, PipelineConfig};
use dswater::indices::{feature_raster, FeatureVector};
use dswater::raster::{load_raster, save_raster, write_pgm, write_ppm, Band, Grid, MultiBandRaster};
use dswater::scene::{generate, read_truth, score, write_truth, SceneSpec};
use dswater::spectral::{find_threshold, ThresholdFit};

use crate::{
    data, read_json, Command, DetectArgs, Failure, IndicesArgs, RenderArgs, ScoreArgs, SynthArgs,
    ThresholdArgs,
};

pub fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Detect(a) => detect(*a),
        Command::Threshold(a) => threshold(a),
        Command::Indices(a) => indices(a),
        Command::Synth(a) => synth(a),
        Command::Render(a) => render(a),
        Command::Score(a) => score_cmd(a),
    }
}

fn make_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::Data(format!("write: cannot create {}: {e}", dir.display())))
}

fn pipeline_config(a: &DetectArgs) -> Result<PipelineConfig, Failure> {
    let mut cfg: PipelineConfig = match &a.config {
        Some(path) => read_json(path, "config")?,
        None => PipelineConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = a.$flag { cfg.$($field).+ = v; })*
        };
    }
    set!(
        seed => seed,
        nbins => nbins,
        window => gamma_window,
        harvest_threshold => harvest_threshold,
        per_class => per_class,
        min_samples => min_samples,
        r => r,
        k_d => k_d,
        lambda_water => lambda.water,
        lambda_nonwater => lambda.non_water,
        lambda_ignorance => lambda.ignorance,
        epochs => epochs,
        reg => reg,
        alpha => alpha,
    );
    cfg.validate()
        .map_err(|e| Failure::Usage(format!("invalid configuration: {e}")))?;
    Ok(cfg)
}

fn detect(a: DetectArgs) -> Result<(), Failure> {
    let cfg = pipeline_config(&a)?;
    let raster = load_raster(&a.input).map_err(data("load"))?;
    let out = run_pipeline(&raster, &cfg).map_err(data("pipeline"))?;
    let report = write_outputs(&out, &a.out).map_err(data("write"))?;
    let f = &report.fused;
    println!(
        "threshold {:.2}; water {:.2}%, non-water {:.2}%, ignorance {:.2}%",
        report.threshold,
        f.water,
        f.non_water,
        f.ignorance.unwrap_or(0.0)
    );
    Ok(())
}

fn write_threshold_csv(fit: &ThresholdFit, dir: &Path) -> Result<(), Failure> {
    let csv_err = |e: csv::Error| Failure::Data(format!("write: {e}"));
    make_dir(dir)?;
    let h = &fit.histogram;
    let mut w = csv::Writer::from_path(dir.join("histogram.csv")).map_err(csv_err)?;
    w.write_record(["bin", "lower", "upper", "center", "count", "smoothed", "fitted"])
        .map_err(csv_err)?;
    let (lo, hi) = fit.fit_bins;
    for b in 0..h.nbins() {
        let fitted = if (lo..=hi).contains(&b) {
            fit.poly.eval(h.center(b)).to_string()
        } else {
            String::new()
        };
        w.write_record([
            b.to_string(),
            h.edges[b].to_string(),
            h.edges[b + 1].to_string(),
            h.center(b).to_string(),
            h.counts[b].to_string(),
            fit.smoothed[b].to_string(),
            fitted,
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Failure::Data(format!("write: {e}")))?;

    let mut w = csv::Writer::from_path(dir.join("polynomial.csv")).map_err(csv_err)?;
    w.write_record(["power", "normalized", "raw"]).map_err(csv_err)?;
    let raw = fit.poly.raw_coefficients();
    for (k, c) in fit.poly.coeffs.iter().enumerate() {
        w.write_record([k.to_string(), c.to_string(), raw[k].to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Failure::Data(format!("write: {e}")))
}

fn threshold(a: ThresholdArgs) -> Result<(), Failure> {
    let raster = load_raster(&a.input).map_err(data("load"))?;
    let band = raster.band(&a.band).map_err(data("load"))?;
    let fit = find_threshold(band.as_slice(), a.nbins).map_err(data("threshold"))?;
    let (p1, p2) = fit.peaks;
    let h = &fit.histogram;
    println!("threshold: {}", fit.params.t);
    println!("peaks: bin {p1} ({}), bin {p2} ({})", h.center(p1), h.center(p2));
    println!("range: {} .. {}", fit.params.n_min, fit.params.n_max);
    println!("fit domain: {} .. {}", fit.poly.lo, fit.poly.hi);
    if let Some(dir) = &a.out {
        write_threshold_csv(&fit, dir)?;
    }
    Ok(())
}

fn index_gray(v: f64) -> u8 {
    (127.5 * (v.clamp(-1.0, 1.0) + 1.0)).round() as u8
}

fn indices(a: IndicesArgs) -> Result<(), Failure> {
    let raster = load_raster(&a.input).map_err(data("load"))?;
    let features = feature_raster(&raster).map_err(data("indices"))?;
    make_dir(&a.out)?;
    type Pick = fn(&FeatureVector) -> f64;
    let planes: [(&str, Pick); 3] = [
        ("ndvi", |f| f.ndvi),
        ("ndwi", |f| f.ndwi),
        ("re_ndwi", |f| f.re_ndwi),
    ];
    let mut bands = Vec::with_capacity(3);
    for (name, pick) in planes {
        let values = features.map(pick);
        write_pgm(a.out.join(format!("{name}.pgm")), &values.map(|&v| index_gray(v)))
            .map_err(data("write"))?;
        bands.push(Band {
            name: name.to_string(),
            values,
        });
    }
    let out = MultiBandRaster::new(bands).map_err(data("indices"))?;
    save_raster(&out, a.out.join("indices")).map_err(data("write"))
}

fn synth(a: SynthArgs) -> Result<(), Failure> {
    let mut spec: SceneSpec = match &a.spec {
        Some(path) => read_json(path, "synth")?,
        None => SceneSpec::default(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    spec.validate()
        .map_err(|e| Failure::Usage(format!("invalid scene spec: {e}")))?;
    let scene = generate(&spec).map_err(data("synth"))?;
    for w in &scene.warnings {
        eprintln!("warning: {w}");
    }
    let dir = a.out.parent().unwrap_or(Path::new(""));
    if !dir.as_os_str().is_empty() {
        make_dir(dir)?;
    }
    save_raster(&scene.raster, &a.out).map_err(data("write"))?;
    write_truth(&scene.truth, dir.join("truth.pgm")).map_err(data("write"))?;
    let water = scene
        .truth
        .iter()
        .filter(|&&t| t == dswater::scene::Truth::Water)
        .count();
    println!(
        "{}x{} scene, seed {}, {:.2}% water",
        spec.width,
        spec.height,
        spec.seed,
        100.0 * water as f64 / scene.truth.len() as f64
    );
    Ok(())
}

/// Value at quantile `q` of `values`, by nearest rank.
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[((sorted.len() - 1) as f64 * q).round() as usize]
}

fn render(a: RenderArgs) -> Result<(), Failure> {
    let raster = load_raster(&a.input).map_err(data("load"))?;
    let mut channels = Vec::with_capacity(3);
    for name in &a.bands {
        let band = raster.band(name).map_err(data("render"))?;
        let lo = quantile(band.as_slice(), 0.02);
        let hi = quantile(band.as_slice(), 0.98);
        let span = if hi > lo { hi - lo } else { 1.0 };
        channels.push(band.map(|&v| (255.0 * ((v - lo) / span).clamp(0.0, 1.0)).round() as u8));
    }
    let (w, h) = raster.dims();
    let img = Grid::from_fn(w, h, |x, y| {
        [*channels[0].get(x, y), *channels[1].get(x, y), *channels[2].get(x, y)]
    });
    write_ppm(&a.out, &img).map_err(data("write"))
}

fn score_cmd(a: ScoreArgs) -> Result<(), Failure> {
    let classmap = dswater::raster::read_classmap_ppm(&a.classmap).map_err(data("score"))?;
    let truth = read_truth(&a.truth).map_err(data("score"))?;
    let metrics = score(&classmap, &truth).map_err(data("score"))?;
    let text = serde_json::to_string_pretty(&metrics)
        .map_err(|e| Failure::Data(format!("score: {e}")))?;
    println!("{text}");
    Ok(())
}
