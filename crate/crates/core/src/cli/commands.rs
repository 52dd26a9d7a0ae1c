use std::fs;
use std::path::{Path, PathBuf};

use super::config::Config;
use crate::baselines::SmoothedTV;
use crate::crr::{read_checkpoint, write_checkpoint, Checkpoint, CrrArchitecture, CrrParams};
use crate::error::{Error, Result};
use crate::estimators::{run_map, run_mmse, MapConfig, MmseConfig, Optimizer};
use crate::io;
use crate::likelihoods::{corrupt_gaussian_with, corrupt_poisson, GaussianLikelihood, Likelihood, PoissonLikelihood};
use crate::metrics::{psnr, ssim};
use crate::operators::{gaussian_blur_kernel, Kernel, LinearOperator};
use crate::regularizer::{GroupScales, Potential};
use crate::rng::RngStream;
use crate::samplers::KernelKind;
use crate::sapg::{perturbed_prior_init, train_single, train_batched, warmstart_adversarial, write_loss_csv, SapgConfig, TrainState};
use crate::synthetic::blob_dataset;
use crate::tensor::{Dataset, Image, Tensor};

const OPERATOR_FILE: &str = "operator.tnsr";

/// Stream id for the random CRR initialization.
const INIT_STREAM: u64 = 7;
/// Stream id for the inpainting mask.
const MASK_STREAM: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    Gaussian,
    Poisson,
}

/// Corrupted images, their likelihoods, and the clean images when present.
pub struct Measurements {
    pub names: Vec<String>,
    pub noisy: Dataset,
    pub clean: Option<Dataset>,
    pub likelihoods: Vec<Likelihood>,
    pub noise: Noise,
}

fn image_name(i: usize) -> String {
    format!("img_{i:04}")
}

fn out_dir(cfg: &Config) -> Result<PathBuf> {
    let out = PathBuf::from(cfg.require("out")?);
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    Ok(out)
}

fn subset(ds: &Dataset, skip: usize, count: Option<usize>) -> Result<Dataset> {
    let end = count.map_or(ds.len(), |c| (skip + c).min(ds.len()));
    if skip >= end {
        return Err(Error::InvalidArgument(format!(
            "selection skip={skip} count={count:?} is empty for {} images",
            ds.len()
        )));
    }
    let mut out = Dataset::new(ds.items()[skip..end].to_vec())?;
    out.metadata = ds.metadata.clone();
    Ok(out)
}

fn meta<'a>(ds: &'a Dataset, key: &str) -> Result<&'a str> {
    ds.metadata
        .get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::InvalidArgument(format!("dataset metadata lacks `{key}`")))
}

fn meta_f64(ds: &Dataset, key: &str) -> Result<f64> {
    let raw = meta(ds, key)?;
    raw.parse().map_err(|_| Error::BadValue {
        key: key.into(),
        value: raw.into(),
    })
}

/// Reads `<data>/noisy` and, if present, `<data>/clean`, honouring `skip`/`count`.
pub fn load_measurements(cfg: &Config, count_key: &str) -> Result<Measurements> {
    let data = PathBuf::from(cfg.require("data")?);
    let skip: usize = cfg.get("skip", 0)?;
    let count: Option<usize> = cfg.get_opt(count_key)?;
    let noisy_dir = data.join("noisy");
    let all = io::read_dataset(&noisy_dir)?;
    let noisy = subset(&all, skip, count)?;
    let clean_dir = data.join("clean");
    let clean = if clean_dir.join("images.tnsr").exists() {
        Some(subset(&io::read_dataset(&clean_dir)?, skip, count)?)
    } else {
        None
    };
    let shape = noisy.image_shape().to_vec();
    let (noise, likelihoods) = match meta(&noisy, "noise")? {
        "gaussian" => {
            let sigma = meta_f64(&noisy, "sigma")?;
            let op_name = meta(&noisy, "operator")?;
            let op = if op_name == "identity" {
                LinearOperator::identity(&shape)?
            } else if op_name == "mask" {
                LinearOperator::mask(io::read_tensor(noisy_dir.join(OPERATOR_FILE))?)?
            } else {
                let k = Kernel::from_tensor(&io::read_tensor(noisy_dir.join(OPERATOR_FILE))?, op_name)?;
                LinearOperator::conv2d(k, &shape)?
            };
            let liks = noisy
                .items()
                .iter()
                .map(|y| Ok(GaussianLikelihood::new(op.clone(), y.tensor().clone(), sigma)?.into()))
                .collect::<Result<Vec<Likelihood>>>()?;
            (Noise::Gaussian, liks)
        }
        "poisson" => {
            let b = meta_f64(&noisy, "b")?;
            let liks = noisy
                .items()
                .iter()
                .enumerate()
                .map(|(i, y)| {
                    let eta = meta_f64(&noisy, &format!("eta.{}", i + skip))?;
                    Ok(PoissonLikelihood::new(y.tensor().clone(), eta, b)?.into())
                })
                .collect::<Result<Vec<Likelihood>>>()?;
            (Noise::Poisson, liks)
        }
        other => return Err(Error::UnsupportedFormat(format!("noise model `{other}`"))),
    };
    Ok(Measurements {
        names: (skip..skip + noisy.len()).map(image_name).collect(),
        noisy,
        clean,
        likelihoods,
        noise,
    })
}

fn load_source(cfg: &Config) -> Result<Dataset> {
    let source = cfg.get_str("source", "blobs")?;
    if source == "blobs" {
        return blob_dataset(
            cfg.get("n_images", 8)?,
            cfg.get("channels", 1)?,
            cfg.get("height", 16)?,
            cfg.get("width", 16)?,
            cfg.get("seed", 0)?,
        );
    }
    let path = PathBuf::from(&source);
    if path.join("images.tnsr").exists() {
        return io::read_dataset(&path);
    }
    // a directory of PGM/PPM files, in name order
    let mut files: Vec<PathBuf> = fs::read_dir(&path)
        .map_err(|e| Error::io(&path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|s| s.to_str()), Some("pgm" | "ppm" | "pnm")))
        .collect();
    files.sort();
    let images = files.iter().map(io::read_pnm).collect::<Result<Vec<_>>>()?;
    let mut ds = Dataset::new(images)?;
    ds.metadata.insert("source".into(), source);
    Ok(ds)
}

pub fn corrupt(cfg: &Config) -> Result<String> {
    let out = out_dir(cfg)?;
    let clean = load_source(cfg)?;
    let seed: u64 = cfg.get("seed", 0)?;
    let noise = cfg.get_str("noise", "gaussian")?;
    let noisy_dir = out.join("noisy");
    let noisy = match noise.as_str() {
        "gaussian" => {
            let sigma = cfg.get("sigma", 0.05)?;
            let op = match cfg.get_str("operator", "blur")?.as_str() {
                "blur" => LinearOperator::conv2d(
                    gaussian_blur_kernel(cfg.get("blur_size", 5)?, cfg.get("blur_strength", 1.0)?)?,
                    clean.image_shape(),
                )?,
                "identity" => LinearOperator::identity(clean.image_shape())?,
                "inpaint" => LinearOperator::random_mask(
                    clean.image_shape(),
                    cfg.get("missing", 0.5)?,
                    &mut RngStream::new(seed, MASK_STREAM),
                )?,
                other => return Err(Error::BadValue { key: "operator".into(), value: other.into() }),
            };
            let ds = corrupt_gaussian_with(&clean, &op, sigma, seed)?;
            io::write_dataset(&noisy_dir, &ds)?;
            op.write_payload(noisy_dir.join(OPERATOR_FILE))?;
            ds
        }
        "poisson" => {
            let (ds, _) = corrupt_poisson(&clean, cfg.get("miv", 25.0)?, seed)?;
            io::write_dataset(&noisy_dir, &ds)?;
            ds
        }
        other => return Err(Error::BadValue { key: "noise".into(), value: other.into() }),
    };
    io::write_dataset(out.join("clean"), &clean)?;
    if cfg.get_bool("preview", false)? && noise == "gaussian" {
        write_previews(&out.join("preview"), "noisy", &noisy.tensors())?;
    }
    Ok(format!("corrupt: wrote {} images to {}", noisy.len(), out.display()))
}

fn architecture(cfg: &Config, in_ch: usize) -> Result<CrrArchitecture> {
    let d = CrrArchitecture::default();
    let arch = CrrArchitecture {
        in_ch,
        mid_ch: cfg.get("crr_mid_ch", d.mid_ch)?,
        channels: cfg.get("crr_channels", d.channels)?,
        kernel_size: cfg.get("crr_kernel_size", d.kernel_size)?,
        half_knots: cfg.get("knots", d.half_knots)?,
        delta: cfg.get("knot_spacing", d.delta)?,
        use_diff: cfg.get_bool("use_diff", d.use_diff)?,
        use_bias: cfg.get_bool("use_bias", d.use_bias)?,
        learn_log_scale: cfg.get_bool("learn_log_scale", d.learn_log_scale)?,
        m_min: cfg.get("m_min", d.m_min)?,
        m_max: cfg.get("m_max", d.m_max)?,
        radius: cfg.get("radius", d.radius)?,
    };
    arch.validate()?;
    Ok(arch)
}

fn kernel_key(cfg: &Config, key: &str, default: KernelKind) -> Result<KernelKind> {
    let raw = cfg.get_str(key, default.name())?;
    KernelKind::parse(&raw).ok_or(Error::BadValue { key: key.into(), value: raw })
}

fn default_gammas(noise: Noise) -> (f64, f64) {
    match noise {
        Noise::Gaussian => (1e-4, 1e-4),
        Noise::Poisson => (5e-6, 1e-5),
    }
}

fn default_kernel(noise: Noise) -> KernelKind {
    match noise {
        Noise::Gaussian => KernelKind::Ula,
        Noise::Poisson => KernelKind::ReflectedUla,
    }
}

/// Contiguous batches whose sizes differ by at most one.
pub fn split_batches<T: Clone>(items: &[T], b: usize) -> Result<Vec<Vec<T>>> {
    if b == 0 || b > items.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} images into {b} batches",
            items.len()
        )));
    }
    let (q, r) = (items.len() / b, items.len() % b);
    let mut out = Vec::with_capacity(b);
    let mut start = 0;
    for i in 0..b {
        let len = q + usize::from(i < r);
        out.push(items[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

/// SAPG hyperparameters from the config; `pixels` sets the `δ₀/d` default.
pub fn sapg_config(cfg: &Config, noise: Noise, pixels: usize) -> Result<SapgConfig> {
    let (g, gp) = default_gammas(noise);
    let delta = match cfg.get_opt::<f64>("delta")? {
        Some(d) => d,
        None => SapgConfig::scaled_delta(cfg.get("delta0", 1.0)?, pixels),
    };
    let config = SapgConfig {
        delta,
        m_n: cfg.get("m_n", 1)?,
        iterations: cfg.get("iterations", 1000)?,
        gamma: cfg.get("gamma", g)?,
        gamma_prime: cfg.get("gamma_prime", gp)?,
        posterior_kernel: kernel_key(cfg, "kernel_posterior", default_kernel(noise))?,
        prior_kernel: kernel_key(cfg, "kernel_prior", default_kernel(noise))?,
        checkpoint_every: cfg.get("checkpoint_every", 500)?,
        seed: cfg.get("seed", 0)?,
        scales: GroupScales {
            conv: cfg.get("scale_conv", 1.0)?,
            spline: cfg.get("scale_spline", 1.0)?,
            bias: cfg.get("scale_bias", 1.0)?,
            log_scale: cfg.get("scale_log_scale", 1.0)?,
        },
        normalize_by_batches: cfg.get_bool("normalize_by_b", false)?,
    };
    config.validate()?;
    Ok(config)
}

pub fn train(cfg: &Config) -> Result<String> {
    let out = out_dir(cfg)?;
    let m = load_measurements(cfg, "train_images")?;
    let shape = m.noisy.image_shape().to_vec();
    let arch = architecture(cfg, shape[0])?;
    let seed: u64 = cfg.get("seed", 0)?;
    let mut theta = match cfg.get_opt::<String>("init")? {
        Some(path) => read_checkpoint(path)?.params,
        None => CrrParams::init(arch, &mut RngStream::new(seed, INIT_STREAM))?,
    };
    let ws_iters: usize = cfg.get("warmstart_iters", 0)?;
    if ws_iters > 0 {
        let clean = m.clean.as_ref().ok_or_else(|| {
            Error::InvalidArgument("the adversarial warm start needs clean images".into())
        })?;
        let frac: f64 = cfg.get("warmstart_fraction", 0.02)?;
        let n = ((frac * m.noisy.len() as f64).ceil() as usize).clamp(1, m.noisy.len());
        let (c, y): (Vec<Tensor>, Vec<Tensor>) = (clean.tensors()[..n].to_vec(), m.noisy.tensors()[..n].to_vec());
        theta = warmstart_adversarial(&theta, &c, &y, ws_iters, cfg.get("warmstart_step", 1e-3)?)?.0;
    }
    let pixels: usize = shape.iter().product();
    let config = sapg_config(cfg, m.noise, pixels)?;
    let algorithm: u32 = cfg.get("algorithm", 2)?;
    let b: usize = cfg.get("B", 1)?;
    let batches = split_batches(&m.likelihoods, b)?;
    let prior_n: usize = cfg.get("prior_images", batches[0].len())?;
    let starts = m.likelihoods[..prior_n.clamp(1, m.likelihoods.len())]
        .iter()
        .map(Likelihood::initial_estimate)
        .collect::<Result<Vec<_>>>()?;
    let mut prior_init = perturbed_prior_init(&starts, seed);
    if config.prior_kernel == KernelKind::ReflectedUla {
        prior_init.iter_mut().for_each(|x| x.data_mut().iter_mut().for_each(|v| *v = v.abs()));
    }
    let mut state = TrainState::from_likelihoods(theta, &batches, prior_init, seed)?;
    let ckpt_dir = out.clone();
    let mut sink = |iteration: u64, theta: &CrrParams| {
        write_checkpoint(
            ckpt_dir.join(format!("ckpt_{iteration:06}.crr")),
            &Checkpoint { params: theta.clone(), iteration, seed },
        )
    };
    let result = match algorithm {
        1 => {
            if batches.len() != 1 || batches[0].len() != 1 {
                return Err(Error::InvalidArgument(
                    "algorithm 1 trains on a single measurement; use algorithm = 2 for datasets".into(),
                ));
            }
            train_single(&config, &batches[0][0], &mut state, &mut sink)
        }
        2 => train_batched(&config, &batches, &mut state, &mut sink),
        other => return Err(Error::BadValue { key: "algorithm".into(), value: other.to_string() }),
    };
    write_loss_csv(out.join("loss.csv"), &state.loss)?;
    result?;
    write_checkpoint(
        out.join("final.crr"),
        &Checkpoint { params: state.theta.clone(), iteration: state.iteration, seed },
    )?;
    Ok(format!(
        "train: {} iterations on {} images in {} batches, final checkpoint {}",
        state.iteration,
        m.likelihoods.len(),
        batches.len(),
        out.join("final.crr").display()
    ))
}

fn stack(images: &[Tensor]) -> Result<Tensor> {
    let mut shape = vec![images.len()];
    shape.extend_from_slice(images[0].shape());
    Tensor::new(shape, images.iter().flat_map(|t| t.data().iter().copied()).collect())
}

fn unstack(t: &Tensor) -> Result<Vec<Tensor>> {
    if t.rank() != 4 {
        return Err(Error::InvalidArgument(format!("expected an (N,C,H,W) stack, got {:?}", t.shape())));
    }
    let per: usize = t.shape()[1..].iter().product();
    t.data()
        .chunks(per)
        .map(|c| Tensor::new(t.shape()[1..].to_vec(), c.to_vec()))
        .collect()
}

fn write_previews(dir: &Path, prefix: &str, images: &[Tensor]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, t) in images.iter().enumerate() {
        let ext = if t.shape()[0] == 3 { "ppm" } else { "pgm" };
        io::write_pnm(dir.join(format!("{prefix}_{i:04}.{ext}")), &Image::new(t.clone())?)?;
    }
    Ok(())
}

/// One `name,psnr,ssim,lambda` row per image.
fn report_rows(names: &[String], estimates: &[Tensor], truth: &Dataset, lambdas: &[Option<f64>]) -> Result<String> {
    let mut out = String::from("name,psnr,ssim,lambda\n");
    for (i, x) in estimates.iter().enumerate() {
        let t = truth.items()[i].tensor();
        let l = lambdas.get(i).copied().flatten().map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{:.4},{:.4},{}\n", names[i], psnr(x, t, 1.0)?, ssim(x, t)?, l));
    }
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn mmse(cfg: &Config) -> Result<String> {
    let out = out_dir(cfg)?;
    let theta = read_checkpoint(cfg.require("checkpoint")?)?.params;
    let m = load_measurements(cfg, "count")?;
    let (gamma, _) = default_gammas(m.noise);
    let seed: u64 = cfg.get("seed", 0)?;
    let base = MmseConfig {
        warmstart: cfg.get("mmse_warmstart", 5_000)?,
        samples: cfg.get("mmse_samples", 20_000)?,
        gamma: cfg.get("gamma", gamma)?,
        kernel: Some(kernel_key(cfg, "kernel_posterior", default_kernel(m.noise))?),
        seed,
        stream: 0,
        dump: None,
    };
    let mut means = Vec::new();
    let mut stds = Vec::new();
    for (i, lik) in m.likelihoods.iter().enumerate() {
        let c = MmseConfig { stream: i as u64, ..base.clone() };
        let est = run_mmse(&theta, lik, &c)?;
        means.push(est.mean);
        stds.push(est.std);
    }
    io::write_tensor(out.join("mmse_mean.tnsr"), &stack(&means)?)?;
    io::write_tensor(out.join("mmse_std.tnsr"), &stack(&stds)?)?;
    if cfg.get_bool("preview", false)? {
        write_previews(&out.join("preview"), "mmse", &means)?;
    }
    if let Some(truth) = &m.clean {
        write_text(&out.join("report.csv"), &report_rows(&m.names, &means, truth, &[])?)?;
    }
    Ok(format!("mmse: {} posterior means in {}", means.len(), out.display()))
}

fn map_config(cfg: &Config, grid_key: &str, default_grid: &[f64]) -> Result<MapConfig> {
    let d = MapConfig::default();
    let lambdas = match cfg.get_opt::<f64>("lambda")? {
        Some(l) => vec![l],
        None => cfg.get_list(grid_key, default_grid)?,
    };
    let raw = cfg.get_str("optimizer", "adam")?;
    let optimizer = Optimizer::parse(&raw).ok_or(Error::BadValue { key: "optimizer".into(), value: raw })?;
    let c = MapConfig {
        lambdas,
        max_iters: cfg.get("map_iters", d.max_iters)?,
        step: cfg.get("map_step", d.step)?,
        optimizer,
        tol: cfg.get("tol", d.tol)?,
    };
    c.validate()?;
    Ok(c)
}

fn reconstruct<P: Potential>(cfg: &Config, prior: &P, grid_key: &str, default_grid: &[f64], tag: &str) -> Result<String> {
    let out = out_dir(cfg)?;
    let m = load_measurements(cfg, "count")?;
    let config = map_config(cfg, grid_key, default_grid)?;
    if config.lambdas.len() > 1 && m.clean.is_none() {
        return Err(Error::InvalidArgument(
            "a lambda grid needs clean images; set `lambda` for single-value mode".into(),
        ));
    }
    let mut xs = Vec::new();
    let mut lambdas = Vec::new();
    for (i, lik) in m.likelihoods.iter().enumerate() {
        let truth = m.clean.as_ref().map(|c| c.items()[i].tensor());
        let x0 = lik.initial_estimate()?;
        let r = run_map(prior, lik, &config, &x0, truth)?;
        xs.push(r.x);
        lambdas.push(Some(r.lambda));
    }
    io::write_tensor(out.join(format!("{tag}.tnsr")), &stack(&xs)?)?;
    let lambda_text: String = lambdas.iter().flatten().map(|l| format!("{l}\n")).collect();
    write_text(&out.join(format!("{tag}.lambda")), &lambda_text)?;
    if cfg.get_bool("preview", false)? {
        write_previews(&out.join("preview"), tag, &xs)?;
    }
    if let Some(truth) = &m.clean {
        write_text(&out.join("report.csv"), &report_rows(&m.names, &xs, truth, &lambdas)?)?;
    }
    Ok(format!("{tag}: {} reconstructions in {}", xs.len(), out.display()))
}

pub fn map(cfg: &Config) -> Result<String> {
    let theta = read_checkpoint(cfg.require("checkpoint")?)?.params;
    let grid: Vec<f64> = MapConfig::default().lambdas;
    reconstruct(cfg, &theta, "lambda_grid", &grid, "map")
}

pub fn tv(cfg: &Config) -> Result<String> {
    let tv = SmoothedTV::new(1.0, cfg.get("tv_eps", 1e-3)?)?;
    reconstruct(cfg, &tv, "tv_grid", &[0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0], "tv")
}

pub fn eval(cfg: &Config) -> Result<String> {
    let estimate = PathBuf::from(cfg.require("estimate")?);
    let xs = unstack(&io::read_tensor(&estimate)?)?;
    let data = PathBuf::from(cfg.require("data")?);
    let skip: usize = cfg.get("skip", 0)?;
    let truth = subset(&io::read_dataset(data.join("clean"))?, skip, Some(xs.len()))?;
    if truth.len() != xs.len() {
        return Err(Error::shape(&[truth.len()], &[xs.len()]));
    }
    let lambdas: Vec<Option<f64>> = match fs::read_to_string(estimate.with_extension("lambda")) {
        Ok(text) => text.lines().map(|l| l.trim().parse().ok()).collect(),
        Err(_) => Vec::new(),
    };
    let names: Vec<String> = (skip..skip + xs.len()).map(image_name).collect();
    let rows = report_rows(&names, &xs, &truth, &lambdas)?;
    let csv = match cfg.get_opt::<String>("csv")? {
        Some(p) => PathBuf::from(p),
        None => estimate.with_extension("csv"),
    };
    write_text(&csv, &rows)?;
    Ok(format!("eval: {} rows in {}", xs.len(), csv.display()))
}
