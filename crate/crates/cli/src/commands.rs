use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use wavescat::classifier::{
    classify, cross_validate, equalize, fit_affine_models, model_diagnostics, stratified_split,
    EqualizationTable, FeatureVector,
};
use wavescat::cosine::cosine_compress;
use wavescat::filterbank::{build_filter_bank, FilterBankParams};
use wavescat::io::{
    read_idx, read_idx_labels, read_image, read_image_dir, read_scat, read_scat_expecting,
    write_pgm, write_png, write_scat, CoefficientBatch, Dataset, DatasetSource, ModelBundle,
    RunConfig, ScatPayload,
};
use wavescat::numerics::ImageGrid;
use wavescat::scattering::display::centered_modulus;
use wavescat::scattering::{render_display, scattering_transform};
use wavescat::stationary::{
    estimate_expected, order_energy_profile, phase_randomize, scattering_rho_orders,
    TextureEnsemble,
};

use crate::csv::{float, Table};
use crate::{
    BuildFilters, Display, EnergyReport, Evaluate, LabelSource, TextureCompare, Train, Transform,
};

/// Images transformed per batch; bounds peak memory on large datasets.
const CHUNK: usize = 1024;

/// Cosine kept fraction when `--cosine` is given without `--keep`.
const DEFAULT_KEEP: f64 = 1.0 / 3.0;

const IMAGE_EXTENSIONS: [&str; 4] = ["pgm", "pnm", "png", "tif"];

pub fn build_filters(a: BuildFilters) -> Result<()> {
    let params = FilterBankParams {
        j: a.scales,
        c: a.orientations,
        sigma: a.sigma,
        xi: a.xi,
        sigma0: a.sigma0,
        grid_w: a.size.0,
        grid_h: a.size.1,
        boundary: a.boundary,
    };
    let bank = build_filter_bank(params)?;
    let config = RunConfig::default().with_bank_params(&params);
    config.validate()?;
    if let Some(dir) = &a.dump_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let dump = |name: String, g: &wavescat::numerics::ComplexGrid| -> Result<()> {
            let m = centered_modulus(g);
            let peak = m.values().iter().fold(0.0f64, |a, &b| a.max(b));
            let m = if peak > 0.0 { m.scale(1.0 / peak) } else { m };
            write_pgm(dir.join(name), &m)?;
            Ok(())
        };
        dump("phi.pgm".into(), &bank.phi_hat)?;
        for (s, row) in bank.psi_hat.iter().enumerate() {
            for (k, g) in row.iter().enumerate() {
                dump(format!("psi_s{s}_k{k}.pgm"), g)?;
            }
        }
    }
    println!("epsilon={}", float(bank.epsilon));
    info!(
        "bank J={} C={} on {}x{} (working grid {}x{})",
        params.j,
        params.c,
        params.grid_w,
        params.grid_h,
        bank.padded_dims().0,
        bank.padded_dims().1
    );
    write_scat(&a.out, &ScatPayload::Bank { config, bank })?;
    Ok(())
}

fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn load_dataset(input: &Path, labels: Option<&Path>, normalize: bool) -> Result<Dataset> {
    let mut ds = if input.is_dir() {
        read_image_dir(input, normalize)?
    } else if is_image_file(input) {
        let x = read_image(input)?;
        let x = if normalize { x.standardize() } else { x };
        Dataset::new(vec![x], None, DatasetSource::ImageDirectory)?
    } else {
        let mut ds = read_idx(input)?;
        if normalize {
            ds.images = ds.images.iter().map(ImageGrid::standardize).collect();
        }
        ds
    };
    if let Some(path) = labels {
        if ds.labels.is_some() {
            bail!("--labels given for an input that already carries labels");
        }
        ds = ds.with_labels(read_idx_labels(path)?)?;
    }
    Ok(ds)
}

pub fn transform(a: Transform) -> Result<()> {
    let (bank_config, bank) = read_scat(&a.bank)?.into_bank()?;
    let mut config = bank_config;
    config.m_max = a.max_order;
    config.alpha = a.alpha;
    config.kept_fraction = a.cosine.then(|| a.keep.unwrap_or(DEFAULT_KEEP));
    config.validate()?;

    let ds = load_dataset(&a.input, a.labels.as_deref(), a.normalize)?.range(a.skip, a.take);
    if ds.is_empty() {
        bail!("no images left after --skip {} --take {:?}", a.skip, a.take);
    }
    let (w, h) = (config.width, config.height);
    let ds = if ds.dims() != Some((w, h)) {
        info!("zero-padding {:?} images to {w}x{h}", ds.dims().unwrap());
        ds.zero_pad(w, h)?
    } else {
        ds
    };
    info!(
        "transforming {} images, m_max={}, alpha={}",
        ds.len(),
        config.m_max,
        config.alpha
    );

    let mut batch: Option<CoefficientBatch> = None;
    for chunk in ds.images.chunks(CHUNK) {
        let results = chunk
            .par_iter()
            .map(|x| {
                Ok((
                    scattering_transform(x, &bank, config.m_max, config.alpha)?,
                    x.norm_sq(),
                ))
            })
            .collect::<wavescat::Result<Vec<_>>>()?;
        let part = match config.kept_fraction {
            Some(keep) => {
                let cs = results
                    .par_iter()
                    .map(|(r, e)| Ok((cosine_compress(r, keep)?, *e)))
                    .collect::<wavescat::Result<Vec<_>>>()?;
                CoefficientBatch::from_cosine(config.clone(), &cs)?
            }
            None => CoefficientBatch::from_scattering(config.clone(), &results)?,
        };
        match &mut batch {
            Some(b) => b.items.extend(part.items),
            None => batch = Some(part),
        }
    }
    let mut batch = batch.expect("dataset is not empty");
    if let Some(labels) = ds.labels {
        batch = batch.with_labels(labels)?;
    }
    write_scat(&a.out, &ScatPayload::Coefficients(batch))?;
    Ok(())
}

pub fn energy_report(a: EnergyReport) -> Result<()> {
    let batch = read_scat(&a.coeffs)?.into_coefficients()?;
    let m_max = batch.config.m_max;
    let mut sums = vec![0.0; m_max + 1];
    let mut count = 0usize;
    for (i, it) in batch.items.iter().enumerate() {
        if it.input_energy <= 0.0 {
            warn!("item {i} has zero energy; left out of the table");
            continue;
        }
        for (s, e) in sums.iter_mut().zip(&it.layer_energy) {
            *s += e / it.input_energy;
        }
        count += 1;
    }
    if count == 0 {
        bail!("every item has zero energy");
    }
    let mut header = vec!["j".to_string(), "images".to_string()];
    header.extend((0..=m_max).map(|m| format!("order_{m}")));
    header.push(format!("order_le_{m_max}"));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&header);
    let pct: Vec<f64> = sums.iter().map(|s| 100.0 * s / count as f64).collect();
    let mut row = vec![batch.config.j.to_string(), count.to_string()];
    row.extend(pct.iter().map(|&p| float(p)));
    row.push(float(pct.iter().sum()));
    table.row(&row);
    table.write(&a.out)?;
    Ok(())
}

fn resolve_labels(batch: &CoefficientBatch, src: &LabelSource) -> Result<Vec<u32>> {
    match &src.labels {
        Some(path) => {
            let all = read_idx_labels(path)?;
            let end = src.label_skip + batch.items.len();
            if end > all.len() {
                bail!(
                    "{} holds {} labels, batch needs {}..{end}",
                    path.display(),
                    all.len(),
                    src.label_skip
                );
            }
            Ok(all[src.label_skip..end].to_vec())
        }
        None => batch
            .labels
            .clone()
            .ok_or_else(|| anyhow!("coefficient batch carries no labels; pass --labels")),
    }
}

/// Moves the coefficients out of `batch` and equalizes them.
fn equalized(
    batch: CoefficientBatch,
    table: Option<&EqualizationTable>,
    labels: Vec<u32>,
) -> Result<(EqualizationTable, Vec<(FeatureVector, u32)>)> {
    let (block, hash) = (batch.block(), batch.config_hash());
    let raw = batch
        .items
        .into_iter()
        .map(|it| FeatureVector::new(it.values, block, hash.clone()))
        .collect::<wavescat::Result<Vec<_>>>()?;
    let table = match table {
        Some(t) => t.clone(),
        None => EqualizationTable::fit(&raw)?,
    };
    let eq = raw
        .into_par_iter()
        .map(|f| equalize(&f, &table))
        .collect::<wavescat::Result<Vec<_>>>()?;
    Ok((table, eq.into_iter().zip(labels).collect()))
}

pub fn train(a: Train) -> Result<()> {
    let batch = read_scat(&a.coeffs)?.into_coefficients()?;
    let labels = resolve_labels(&batch, &a.labels)?;
    let mut config = batch.config.clone();
    let (table, data) = equalized(batch, None, labels)?;

    let cv = cross_validate(&data, &a.d_grid, a.holdout, a.seed)?;
    let models = fit_affine_models(&data, cv.d)?;
    // diagnostics on held-out vectors, with models that never saw them
    let (fit, val) = stratified_split(&data, a.holdout, a.seed)?;
    let (sigma, lambda) = model_diagnostics(&fit_affine_models(&fit, cv.d)?, &val)?;
    info!(
        "chose d={} (sigma_d^2={sigma:.4}, lambda_d={lambda:.3})",
        cv.d
    );

    let mut table_csv = Table::new(&["quantity", "d", "value"]);
    for (d, e) in &cv.errors {
        table_csv.row(&["validation_error".into(), d.to_string(), float(*e)]);
    }
    table_csv.row(&["chosen_d".into(), cv.d.to_string(), cv.d.to_string()]);
    table_csv.row(&["sigma_sq".into(), cv.d.to_string(), float(sigma)]);
    table_csv.row(&["lambda".into(), cv.d.to_string(), float(lambda)]);
    match &a.report {
        Some(p) => table_csv.write(p)?,
        None => print!("{}", table_csv.as_str()),
    }

    config.d_grid = a.d_grid.clone();
    config.holdout_fraction = a.holdout;
    config.seed = a.seed;
    config.validate()?;
    let bundle = ModelBundle {
        config,
        d: cv.d,
        table,
        models,
    };
    write_scat(&a.out, &ScatPayload::Models(bundle))?;
    Ok(())
}

pub fn evaluate(a: Evaluate) -> Result<()> {
    let bundle = read_scat(&a.models)?.into_models()?;
    let batch =
        read_scat_expecting(&a.coeffs, &bundle.config.config_hash())?.into_coefficients()?;
    let labels = resolve_labels(&batch, &a.labels)?;
    let (_, data) = equalized(batch, Some(&bundle.table), labels)?;
    let predicted = data
        .par_iter()
        .map(|(f, _)| classify(f, &bundle.models).map(|(l, _)| l))
        .collect::<wavescat::Result<Vec<_>>>()?;

    let classes: Vec<u32> = data
        .iter()
        .map(|(_, l)| *l)
        .chain(bundle.models.iter().map(|m| m.label))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let col = |l: u32| {
        classes
            .binary_search(&l)
            .expect("label is in the class list")
    };
    let mut counts = vec![vec![0usize; classes.len()]; classes.len()];
    for ((_, truth), p) in data.iter().zip(&predicted) {
        counts[col(*truth)][col(*p)] += 1;
    }

    let mut header = vec!["true_label".to_string()];
    header.extend(classes.iter().map(|l| format!("pred_{l}")));
    header.extend(["total", "errors", "error_rate"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&header);
    let (mut total, mut wrong) = (0usize, 0usize);
    for (i, row) in counts.iter().enumerate() {
        let n: usize = row.iter().sum();
        if n == 0 {
            continue;
        }
        let e = n - row[i];
        total += n;
        wrong += e;
        let mut cells = vec![classes[i].to_string()];
        cells.extend(row.iter().map(usize::to_string));
        cells.extend([n.to_string(), e.to_string(), float(e as f64 / n as f64)]);
        table.row(&cells);
    }
    let rate = wrong as f64 / total as f64;
    let mut cells = vec!["all".to_string()];
    cells.extend(
        classes
            .iter()
            .enumerate()
            .map(|(j, _)| counts.iter().map(|r| r[j]).sum::<usize>().to_string()),
    );
    cells.extend([total.to_string(), wrong.to_string(), float(rate)]);
    table.row(&cells);
    table.write(&a.out)?;
    println!("error_rate={}", float(rate));
    Ok(())
}

fn ensemble(dir: &Path) -> Result<TextureEnsemble> {
    let ds = read_image_dir(dir, true)?;
    Ok(TextureEnsemble::new(ds.images, dir.display().to_string())?)
}

pub fn texture_compare(a: TextureCompare) -> Result<()> {
    let x1 = ensemble(&a.a)?;
    let x2 = match &a.b {
        Some(dir) => ensemble(dir)?,
        None => TextureEnsemble::new(
            x1.realizations
                .iter()
                .enumerate()
                .map(|(i, x)| phase_randomize(x, a.seed.wrapping_add(i as u64)))
                .collect(),
            "phase-randomized",
        )?,
    };
    let (w, h) = x1.realizations[0].dims();
    let j_max = a.scales.unwrap_or(w.min(h).ilog2() as usize);
    let bank_for = |j: usize| build_filter_bank(FilterBankParams::new(j, a.orientations, w, h));

    let mut table = Table::new(&["statistic", "index", "value"]);
    let bank = bank_for(j_max)?;
    let rho = scattering_rho_orders(&x1, &x2, &bank, &a.orders, a.alpha)?;
    for (m, r) in a.orders.iter().zip(&rho) {
        info!("rho({m}) = {r:.4}");
        table.row(&["rho".into(), m.to_string(), float(*r)]);
    }
    for j in 1..=j_max {
        let v = estimate_expected(&x1, &bank_for(j)?, 2, a.alpha)?.normalized_variance();
        table.row(&["normalized_variance".into(), j.to_string(), float(v)]);
    }
    let profile_order = a.orders.iter().copied().max().unwrap_or(0).max(3);
    let profile = order_energy_profile(&estimate_expected(&x1, &bank, profile_order, a.alpha)?)?;
    for (m, p) in profile.iter().enumerate() {
        table.row(&["order_energy".into(), m.to_string(), float(*p)]);
    }
    table.write(&a.out)?;
    Ok(())
}

pub fn display(a: Display) -> Result<()> {
    let batch = read_scat(&a.coeffs)?.into_coefficients()?;
    let result = batch.scattering(a.item)?;
    let bank = build_filter_bank(batch.config.bank_params())?;
    let img = render_display(&result, &bank, a.position, a.panel)?;
    let peak = img.values().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let img = if peak > 0.0 {
        img.scale(1.0 / peak)
    } else {
        img
    };
    write_png(&a.out, &img)?;
    Ok(())
}
