//! Pipeline commands. Every command is a pure function of (config, seed,
//! existing artifacts): rerunning one with the same inputs rewrites
//! byte-identical outputs.


use ghostimg::autograd::AdamConfig;
use ghostimg::data::{
    load_idx, preprocess, write_pgm, Image, ImageSet, SamplingConfig, Split,
};
use ghostimg::metrics::MetricReport;
use ghostimg::optics::{
    add_noise, compute_bucket_signals, gen_pink_speckles, gen_rayleigh_speckles,
    normalize_buckets, BucketSequence, OpticsError, PatternStack,
};
use ghostimg::recon::{cgi_reconstruct, cs_reconstruct, CsConfig};
use ghostimg::translator::{
    load_checkpoint, save_checkpoint, tokenize_image, train, Model, ModelConfig,
    TokenSeq, TrainConfig,
};
use ghostimg::{Dtype, Real};

use crate::artifacts::{
    check_provenance, load_image_stack, load_objects, save_image_stack, save_labels_csv,
    split_tag, Layout,
};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::synth;

pub struct CommandCtx {
    pub cfg: ExperimentConfig,
    pub workers: usize,
    pub force: bool,
}

impl CommandCtx {
    fn layout(&self) -> Layout {
        Layout::new(&self.cfg.out_dir)
    }
}

/// Stable per-purpose seed derivation from the experiment seed.
fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut z = seed ^ (crc32fast::hash(tag.as_bytes()) as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic fan-out over items: output order matches input order
/// regardless of worker count.
fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> Result<R, CliError> + Sync,
{
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let mut slots: Vec<Option<Result<R, CliError>>> = Vec::new();
    slots.resize_with(items.len(), || None);
    let slot_chunks: Vec<&mut [Option<Result<R, CliError>>]> =
        slots.chunks_mut(chunk).collect();
    std::thread::scope(|scope| {
        for (c, out) in slot_chunks.into_iter().enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (j, slot) in out.iter_mut().enumerate() {
                    let i = c * chunk + j;
                    *slot = Some(f(i, &items[i]));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("worker filled slot")).collect()
}

pub fn cmd_dataset(ctx: &CommandCtx) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let s = &cfg.synth;
    let (train_imgs, train_labels) = synth::generate(
        &s.kind,
        s.train_count,
        s.size,
        derive_seed(cfg.seed, "synth_train"),
    )?;
    let (test_imgs, test_labels) = synth::generate(
        &s.kind,
        s.test_count,
        s.size,
        derive_seed(cfg.seed, "synth_test"),
    )?;
    synth::write_idx_images(&cfg.dataset.train_images, &train_imgs, s.size)?;
    synth::write_idx_images(&cfg.dataset.test_images, &test_imgs, s.size)?;
    if let Some(p) = &cfg.dataset.train_labels {
        synth::write_idx_labels(p, &train_labels)?;
    }
    if let Some(p) = &cfg.dataset.test_labels {
        synth::write_idx_labels(p, &test_labels)?;
    }
    println!(
        "dataset: wrote {} train / {} test {} images of {}x{}",
        train_imgs.len(),
        test_imgs.len(),
        s.kind,
        s.size,
        s.size
    );
    Ok(())
}

pub fn cmd_speckles(ctx: &CommandCtx) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let layout = ctx.layout();
    std::fs::create_dir_all(&cfg.out_dir)?;
    let size = cfg.dataset.image_size;
    let sampling = SamplingConfig::with_patterns(cfg.n_pixels(), cfg.n_patterns())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let gen_seed = derive_seed(cfg.seed, "speckles");
    let stack: PatternStack<Real> = match cfg.speckles.kind.as_str() {
        "rayleigh" => {
            gen_rayleigh_speckles(&sampling, size, size, cfg.speckles.grain, gen_seed)?
        }
        "pink" => {
            gen_pink_speckles(&sampling, size, size, cfg.speckles.exponent, gen_seed)?
        }
        "imported" => {
            let path = cfg.speckles.import_path.as_ref().ok_or_else(|| {
                CliError::Config("[speckles] import_path is required for kind=imported".into())
            })?;
            if !path.exists() {
                return Err(CliError::MissingArtifact(path.display().to_string()));
            }
            let (stack, _) = PatternStack::<Real>::load(path)?;
            if stack.width() != size || stack.height() != size {
                return Err(CliError::IncompatibleArtifacts(format!(
                    "imported patterns are {}x{}, config wants {}x{}",
                    stack.width(),
                    stack.height(),
                    size,
                    size
                )));
            }
            if stack.len() != cfg.n_patterns() {
                return Err(CliError::IncompatibleArtifacts(format!(
                    "imported stack has {} patterns, config wants {}",
                    stack.len(),
                    cfg.n_patterns()
                )));
            }
            stack
        }
        other => return Err(CliError::Config(format!("unknown speckle kind {:?}", other))),
    };
    stack.save(
        &layout.patterns(),
        &[
            ("beta", format!("{}", cfg.effective_beta())),
            ("cfg", format!("{:08x}", cfg.fingerprint())),
        ],
    )?;
    println!(
        "speckles: {} patterns of {}x{} ({}) -> {}",
        stack.len(),
        size,
        size,
        cfg.speckles.kind,
        layout.patterns().display()
    );
    Ok(())
}

fn load_patterns(ctx: &CommandCtx) -> Result<PatternStack<Real>, CliError> {
    let layout = ctx.layout();
    let path = layout.patterns();
    if !path.exists() {
        return Err(CliError::MissingArtifact(path.display().to_string()));
    }
    let (stack, meta) = PatternStack::<Real>::load(&path)?;
    check_provenance(&meta, &ctx.cfg, &path, ctx.force)?;
    if stack.len() != ctx.cfg.n_patterns() || stack.width() != ctx.cfg.dataset.image_size {
        return Err(CliError::IncompatibleArtifacts(format!(
            "pattern stack is {}x{}x{}, config wants {}x{}x{}",
            stack.len(),
            stack.height(),
            stack.width(),
            ctx.cfg.n_patterns(),
            ctx.cfg.dataset.image_size,
            ctx.cfg.dataset.image_size
        )));
    }
    Ok(stack)
}

fn noise_applies(cfg: &ExperimentConfig, split: Split) -> bool {
    cfg.noise.level > 0.0
        && match cfg.noise.apply_to.as_str() {
            "both" => true,
            "train" => split == Split::Train,
            _ => split == Split::Test,
        }
}

pub fn cmd_simulate(ctx: &CommandCtx) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let layout = ctx.layout();
    let patterns = load_patterns(ctx)?;

    for split in [Split::Train, Split::Test] {
        let (images_path, labels_path, limit) = match split {
            Split::Train => (
                &cfg.dataset.train_images,
                cfg.dataset.train_labels.as_deref(),
                cfg.dataset.train_limit,
            ),
            Split::Test => (
                &cfg.dataset.test_images,
                cfg.dataset.test_labels.as_deref(),
                cfg.dataset.test_limit,
            ),
        };
        if !images_path.exists() {
            return Err(CliError::MissingArtifact(images_path.display().to_string()));
        }
        let raw: ImageSet<Real> = load_idx(images_path, labels_path, split)?;
        let mut set = preprocess(&raw, cfg.dataset.image_size, cfg.dataset.threshold)?;
        if limit > 0 {
            set.truncate(limit);
        }
        if set.is_empty() {
            return Err(CliError::Config(format!(
                "{} split is empty after limits",
                split_tag(split)
            )));
        }

        save_image_stack(
            &layout.objects(split),
            &format!("objects_{}", split_tag(split)),
            &set.images,
            cfg,
            &[("split", split_tag(split).to_string())],
        )?;
        if let Some(labels) = &set.labels {
            save_labels_csv(&layout.labels(split), labels)?;
        }

        let noisy = noise_applies(cfg, split);
        let dir = layout.bucket_dir(split);
        std::fs::create_dir_all(&dir)?;
        let buckets: Vec<BucketSequence<Real>> =
            parallel_map(&set.images, ctx.workers, |idx, img| {
                let clean = compute_bucket_signals(&patterns, img)?;
                if noisy {
                    let seed =
                        derive_seed(cfg.seed, &format!("noise_{}_{}", split_tag(split), idx));
                    Ok(add_noise(&clean, cfg.noise.level, seed)?)
                } else {
                    Ok(clean)
                }
            })?;
        for (idx, seq) in buckets.iter().enumerate() {
            let meta = ghostimg::data::ContainerMeta::new(
                "buckets",
                vec![seq.len()],
                Dtype::F64,
                cfg.seed,
            )
            .with_extra("cfg", &format!("{:08x}", cfg.fingerprint()))
            .with_extra("split", split_tag(split))
            .with_extra("index", &idx.to_string())
            .with_extra("noise", &format!("{}", seq.noise_level));
            let payload =
                ghostimg::data::ContainerMeta::encode_scalars(&seq.values);
            ghostimg::data::save_container(&layout.bucket(split, idx), &meta, &payload)?;
        }
        println!(
            "simulate: {} {} objects -> {} bucket sequences of K={}{}",
            set.len(),
            split_tag(split),
            set.len(),
            patterns.len(),
            if noisy { format!(" (noise {})", cfg.noise.level) } else { String::new() }
        );
    }
    Ok(())
}

fn load_bucket_files(
    ctx: &CommandCtx,
    split: Split,
    expected: usize,
) -> Result<(Vec<BucketSequence<Real>>, f64), CliError> {
    let layout = ctx.layout();
    let mut sequences = Vec::with_capacity(expected);
    let mut noise = 0.0f64;
    for idx in 0..expected {
        let path = layout.bucket(split, idx);
        if !path.exists() {
            return Err(CliError::MissingArtifact(path.display().to_string()));
        }
        let (meta, payload) = ghostimg::data::load_container(&path)?;
        check_provenance(&meta, &ctx.cfg, &path, ctx.force)?;
        let values: Vec<Real> = ghostimg::data::ContainerMeta::decode_scalars(&payload)?;
        let mut seq = BucketSequence::new(values);
        if let Some(n) = meta.extra.get("noise").and_then(|v| v.parse::<f64>().ok()) {
            seq.noise_level = n;
            noise = n;
        }
        sequences.push(seq);
    }
    Ok((sequences, noise))
}

/// Per-sequence [0,1] normalization, mapping the degenerate constant case to
/// all zeros so empty objects stay usable.
fn normalize_or_zero(seq: &BucketSequence<Real>) -> Result<BucketSequence<Real>, CliError> {
    match normalize_buckets(seq) {
        Ok(n) => Ok(n),
        Err(OpticsError::ConstantSequence) => Ok(BucketSequence {
            values: vec![0.0; seq.len()],
            noise_level: seq.noise_level,
            normalized: true,
        }),
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_train(ctx: &CommandCtx) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let layout = ctx.layout();
    let (objects, _) = load_objects(&layout, Split::Train)?;
    let (buckets, _) = load_bucket_files(ctx, Split::Train, objects.len())?;

    let mut dataset: Vec<(BucketSequence<Real>, TokenSeq)> =
        Vec::with_capacity(objects.len());
    for (img, seq) in objects.images.iter().zip(&buckets) {
        dataset.push((normalize_or_zero(seq)?, tokenize_image(img)?));
    }

    let size = cfg.dataset.image_size;
    let model_cfg = ModelConfig {
        n_enc_layers: cfg.model.enc_layers,
        n_dec_layers: cfg.model.dec_layers,
        d_model: cfg.model.d_model,
        n_heads: cfg.model.n_heads,
        d_ff: cfg.d_ff(),
        width: size,
        height: size,
        max_src_len: cfg.n_patterns(),
    };
    let adam = AdamConfig {
        lr_max: cfg.train.lr,
        warmup_steps: cfg.train.warmup_steps,
        ..AdamConfig::default()
    };
    let mut model: Model<Real> =
        Model::new(model_cfg, adam, derive_seed(cfg.seed, "model"))?;
    println!(
        "train: {} samples, K={}, model d={} ({}+{} layers, {} heads, {} params)",
        dataset.len(),
        cfg.n_patterns(),
        cfg.model.d_model,
        cfg.model.enc_layers,
        cfg.model.dec_layers,
        cfg.model.n_heads,
        model.n_parameters()
    );

    let mut loss_csv = String::from("epoch,loss\n");
    let single_epoch = TrainConfig {
        batch_size: cfg.train.batch_size,
        epochs: 1,
        ..TrainConfig::default()
    };
    let started = std::time::Instant::now();
    for _ in 0..cfg.train.epochs {
        let report = train(&mut model, &dataset, &single_epoch)?;
        let loss = report.epoch_losses[0];
        loss_csv.push_str(&format!("{},{:.12}\n", model.epoch, loss));
        println!(
            "train: epoch {:4} loss {:.6} ({:.1}s elapsed)",
            model.epoch,
            loss,
            started.elapsed().as_secs_f64()
        );
        if cfg.train.checkpoint_every > 0 && model.epoch % cfg.train.checkpoint_every == 0 {
            let path = cfg.out_dir.join(format!("ckpt_epoch{:04}.gtc", model.epoch));
            save_checkpoint(&model, &path)?;
        }
        if cfg.train.early_stop_loss > 0.0 && loss < cfg.train.early_stop_loss {
            println!("train: early stop, loss below {}", cfg.train.early_stop_loss);
            break;
        }
    }
    save_checkpoint(&model, &layout.model())?;
    std::fs::write(layout.loss_csv(), loss_csv)?;
    println!("train: wrote {}", layout.model().display());
    Ok(())
}

fn load_model_checked(ctx: &CommandCtx) -> Result<Model<Real>, CliError> {
    let layout = ctx.layout();
    let path = layout.model();
    if !path.exists() {
        return Err(CliError::MissingArtifact(path.display().to_string()));
    }
    let model: Model<Real> = load_checkpoint(&path)?;
    let cfg = &ctx.cfg;
    if model.config.max_src_len != cfg.n_patterns()
        || model.config.width != cfg.dataset.image_size
        || model.config.height != cfg.dataset.image_size
    {
        return Err(CliError::IncompatibleArtifacts(format!(
            "model was trained for K={} on {}x{}, config wants K={} on {}x{}",
            model.config.max_src_len,
            model.config.width,
            model.config.height,
            cfg.n_patterns(),
            cfg.dataset.image_size,
            cfg.dataset.image_size
        )));
    }
    Ok(model)
}

pub fn cmd_translate(ctx: &CommandCtx) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let layout = ctx.layout();
    let model = load_model_checked(ctx)?;
    let (objects, _) = load_objects(&layout, Split::Test)?;
    let (buckets, noise) = load_bucket_files(ctx, Split::Test, objects.len())?;

    let recons: Vec<Image<Real>> = parallel_map(&buckets, ctx.workers, |_, seq| {
        let normed = normalize_or_zero(seq)?;
        Ok(model.translate(&normed)?)
    })?;

    save_image_stack(
        &layout.recon("gt"),
        "recon_gt",
        &recons,
        cfg,
        &[("method", "gt".into()), ("noise", format!("{}", noise))],
    )?;
    let pgm_dir = layout.pgm_dir();
    std::fs::create_dir_all(&pgm_dir)?;
    for (i, img) in recons.iter().enumerate() {
        write_pgm(&pgm_dir.join(format!("gt_{:03}.pgm", i)), img)?;
    }
    println!("translate: {} images -> {}", recons.len(), layout.recon("gt").display());
    Ok(())
}

pub fn cmd_reconstruct_cgi(ctx: &CommandCtx) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let layout = ctx.layout();
    let patterns = load_patterns(ctx)?;
    let (objects, _) = load_objects(&layout, Split::Test)?;
    let (buckets, noise) = load_bucket_files(ctx, Split::Test, objects.len())?;

    let recons: Vec<Image<Real>> = parallel_map(&buckets, ctx.workers, |_, seq| {
        Ok(cgi_reconstruct(&patterns, seq)?.display)
    })?;

    save_image_stack(
        &layout.recon("cgi"),
        "recon_cgi",
        &recons,
        cfg,
        &[("method", "cgi".into()), ("noise", format!("{}", noise))],
    )?;
    let pgm_dir = layout.pgm_dir();
    std::fs::create_dir_all(&pgm_dir)?;
    for (i, img) in recons.iter().enumerate() {
        write_pgm(&pgm_dir.join(format!("cgi_{:03}.pgm", i)), img)?;
    }
    println!(
        "reconstruct-cgi: {} images -> {}",
        recons.len(),
        layout.recon("cgi").display()
    );
    Ok(())
}

pub fn cmd_reconstruct_cs(ctx: &CommandCtx) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let layout = ctx.layout();
    let patterns = load_patterns(ctx)?;
    let (objects, _) = load_objects(&layout, Split::Test)?;
    let (buckets, noise) = load_bucket_files(ctx, Split::Test, objects.len())?;

    let cs_cfg = CsConfig {
        lambda: if cfg.cs.lambda > 0.0 { Some(cfg.cs.lambda) } else { None },
        max_iters: cfg.cs.max_iters,
        rel_tol: cfg.cs.rel_tol,
        nonneg: true,
    };
    let results = parallel_map(&buckets, ctx.workers, |_, seq| {
        Ok(cs_reconstruct(&patterns, seq, &cs_cfg)?)
    })?;

    let recons: Vec<Image<Real>> = results.iter().map(|r| r.image.clone()).collect();
    save_image_stack(
        &layout.recon("cs"),
        "recon_cs",
        &recons,
        cfg,
        &[("method", "cs".into()), ("noise", format!("{}", noise))],
    )?;
    let mut trace = String::from("image,iteration,objective\n");
    for (i, r) in results.iter().enumerate() {
        for (it, obj) in r.objective_trace.iter().enumerate() {
            trace.push_str(&format!("{},{},{:.12e}\n", i, it, obj));
        }
    }
    std::fs::write(layout.cs_trace_csv(), trace)?;
    let pgm_dir = layout.pgm_dir();
    std::fs::create_dir_all(&pgm_dir)?;
    for (i, img) in recons.iter().enumerate() {
        write_pgm(&pgm_dir.join(format!("cs_{:03}.pgm", i)), img)?;
    }
    let unconverged = results.iter().filter(|r| !r.converged).count();
    println!(
        "reconstruct-cs: {} images -> {} ({} unconverged)",
        recons.len(),
        layout.recon("cs").display(),
        unconverged
    );
    Ok(())
}

const METHODS: [&str; 3] = ["cgi", "cs", "gt"];

pub fn cmd_evaluate(ctx: &CommandCtx) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let layout = ctx.layout();
    let (objects, _) = load_objects(&layout, Split::Test)?;

    let mut evaluated = 0;
    for method in METHODS {
        let path = layout.recon(method);
        if !path.exists() {
            continue;
        }
        let (recons, meta) = load_image_stack(&path)?;
        check_provenance(&meta, cfg, &path, ctx.force)?;
        let noise = meta
            .extra
            .get("noise")
            .and_then(|v| v.parse::<f64>().ok())
            .unwrap_or(0.0);
        let report = MetricReport::evaluate(
            &method.to_uppercase(),
            cfg.effective_beta(),
            noise,
            &recons,
            &objects,
        )?;
        std::fs::write(layout.metrics_csv(method), report.to_csv())?;
        println!(
            "evaluate: {} mse {:.4} snr {:.2} dB ssim {:.4} exact {:.3}{}",
            method.to_uppercase(),
            report.mse_mean(),
            report.snr_mean(),
            report.ssim_mean(),
            report.exact_match_rate(),
            report
                .knn_rate()
                .map(|r| format!(" knn {:.3}", r))
                .unwrap_or_default()
        );
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(CliError::MissingArtifact(format!(
            "no reconstruction stacks under {}",
            cfg.out_dir.display()
        )));
    }
    Ok(())
}

pub fn cmd_render(ctx: &CommandCtx) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let layout = ctx.layout();
    let (objects, _) = load_objects(&layout, Split::Test)?;

    let mut rows: Vec<(String, Vec<Image<Real>>)> =
        vec![("object".into(), objects.images.clone())];
    let mut bars = String::from(
        "method,mse_mean,mse_std,snr_mean,snr_std,ssim_mean,ssim_std,exact_match_rate,knn_rate\n",
    );
    for method in METHODS {
        let path = layout.recon(method);
        if !path.exists() {
            continue;
        }
        let (recons, meta) = load_image_stack(&path)?;
        check_provenance(&meta, cfg, &path, ctx.force)?;
        let noise = meta
            .extra
            .get("noise")
            .and_then(|v| v.parse::<f64>().ok())
            .unwrap_or(0.0);
        let report = MetricReport::evaluate(
            &method.to_uppercase(),
            cfg.effective_beta(),
            noise,
            &recons,
            &objects,
        )?;
        bars.push_str(&format!(
            "{},{:.12},{:.12},{:.6},{:.6},{:.12},{:.12},{:.6},{}\n",
            method.to_uppercase(),
            report.mse_mean(),
            report.mse_std(),
            report.snr_mean(),
            report.snr_std(),
            report.ssim_mean(),
            report.ssim_std(),
            report.exact_match_rate(),
            report.knn_rate().map(|r| format!("{:.6}", r)).unwrap_or_default()
        ));
        rows.push((method.to_string(), recons));
    }
    if rows.len() == 1 {
        return Err(CliError::MissingArtifact(format!(
            "no reconstruction stacks under {}",
            cfg.out_dir.display()
        )));
    }

    let columns = rows[0].1.len().min(10);
    let montage = build_montage(&rows, columns)?;
    write_pgm(&layout.montage(), &montage)?;
    std::fs::write(layout.bars_csv(), bars)?;
    println!(
        "render: montage of {} rows x {} columns -> {}",
        rows.len(),
        columns,
        layout.montage().display()
    );
    Ok(())
}

/// Grid of images with 1-pixel mid-gray separators; one row per method,
/// ground truth first.
fn build_montage(
    rows: &[(String, Vec<Image<Real>>)],
    columns: usize,
) -> Result<Image<Real>, CliError> {
    let cell_w = rows[0].1[0].width();
    let cell_h = rows[0].1[0].height();
    let total_w = columns * cell_w + (columns - 1);
    let total_h = rows.len() * cell_h + (rows.len() - 1);
    let mut pixels = vec![0.5f64; total_w * total_h];
    for (r, (_, images)) in rows.iter().enumerate() {
        for c in 0..columns {
            let img = images.get(c).ok_or_else(|| {
                CliError::Numerical("method stacks have differing lengths".into())
            })?;
            let (x0, y0) = (c * (cell_w + 1), r * (cell_h + 1));
            for y in 0..cell_h {
                for x in 0..cell_w {
                    pixels[(y0 + y) * total_w + x0 + x] = img.get(x, y);
                }
            }
        }
    }
    Image::new(total_w, total_h, pixels).map_err(|e| CliError::Numerical(e.to_string()))
}

/// Shared by tests: runs the whole classical + translation pipeline on a
/// config already materialized on disk.
pub fn run_full_pipeline(ctx: &CommandCtx) -> Result<(), CliError> {
    cmd_dataset(ctx)?;
    cmd_speckles(ctx)?;
    cmd_simulate(ctx)?;
    cmd_train(ctx)?;
    cmd_translate(ctx)?;
    cmd_reconstruct_cgi(ctx)?;
    cmd_reconstruct_cs(ctx)?;
    cmd_evaluate(ctx)?;
    cmd_render(ctx)?;
    Ok(())
}
