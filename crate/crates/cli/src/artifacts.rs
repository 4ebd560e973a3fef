//! On-disk layout of pipeline artifacts under the experiment output
//! directory, plus stacked-image container helpers and provenance checks.

use std::path::{Path, PathBuf};

use ghostimg::data::{
    load_container, save_container, ContainerMeta, Image, ImageSet, Split,
};
use ghostimg::{Dtype, Real};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub struct Layout {
    pub out_dir: PathBuf,
}

impl Layout {
    pub fn new(out_dir: &Path) -> Self {
        Self { out_dir: out_dir.to_path_buf() }
    }

    pub fn patterns(&self) -> PathBuf {
        self.out_dir.join("patterns.gic")
    }

    pub fn objects(&self, split: Split) -> PathBuf {
        self.out_dir.join(format!("objects_{}.gic", split_tag(split)))
    }

    pub fn labels(&self, split: Split) -> PathBuf {
        self.out_dir.join(format!("labels_{}.csv", split_tag(split)))
    }

    pub fn bucket_dir(&self, split: Split) -> PathBuf {
        self.out_dir.join("buckets").join(split_tag(split))
    }

    pub fn bucket(&self, split: Split, index: usize) -> PathBuf {
        self.bucket_dir(split).join(format!("{:05}.gic", index))
    }

    pub fn model(&self) -> PathBuf {
        self.out_dir.join("model.gtc")
    }

    pub fn loss_csv(&self) -> PathBuf {
        self.out_dir.join("loss.csv")
    }

    pub fn recon(&self, method: &str) -> PathBuf {
        self.out_dir.join(format!("recon_{}.gic", method))
    }

    pub fn metrics_csv(&self, method: &str) -> PathBuf {
        self.out_dir.join(format!("metrics_{}.csv", method))
    }

    pub fn cs_trace_csv(&self) -> PathBuf {
        self.out_dir.join("cs_trace.csv")
    }

    pub fn pgm_dir(&self) -> PathBuf {
        self.out_dir.join("pgm")
    }

    pub fn montage(&self) -> PathBuf {
        self.out_dir.join("montage.pgm")
    }

    pub fn bars_csv(&self) -> PathBuf {
        self.out_dir.join("bars.csv")
    }
}

pub fn split_tag(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Test => "test",
    }
}

/// Stores a set of same-sized images as one container with dims [n, h, w].
pub fn save_image_stack(
    path: &Path,
    name: &str,
    images: &[Image<Real>],
    cfg: &ExperimentConfig,
    extra: &[(&str, String)],
) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let (w, h) = (images[0].width(), images[0].height());
    let mut flat = Vec::with_capacity(images.len() * w * h);
    for img in images {
        flat.extend_from_slice(img.pixels());
    }
    let mut meta = ContainerMeta::new(name, vec![images.len(), h, w], Dtype::F64, cfg.seed)
        .with_extra("cfg", &format!("{:08x}", cfg.fingerprint()));
    for (k, v) in extra {
        meta = meta.with_extra(k, v);
    }
    let payload = ContainerMeta::encode_scalars(&flat);
    save_container(path, &meta, &payload)?;
    Ok(())
}

pub fn load_image_stack(path: &Path) -> Result<(Vec<Image<Real>>, ContainerMeta), CliError> {
    if !path.exists() {
        return Err(CliError::MissingArtifact(path.display().to_string()));
    }
    let (meta, payload) = load_container(path)?;
    if meta.dims.len() != 3 || meta.dtype != Dtype::F64 {
        return Err(CliError::Numerical(format!(
            "{} is not an f64 image stack",
            path.display()
        )));
    }
    let (n, h, w) = (meta.dims[0], meta.dims[1], meta.dims[2]);
    let values: Vec<Real> = ContainerMeta::decode_scalars(&payload)?;
    let images = values
        .chunks_exact(w * h)
        .map(|chunk| Image::new(w, h, chunk.to_vec()))
        .collect::<Result<Vec<_>, _>>()?;
    if images.len() != n {
        return Err(CliError::Numerical(format!(
            "{}: header says {} images, payload holds {}",
            path.display(),
            n,
            images.len()
        )));
    }
    Ok((images, meta))
}

/// Rejects artifacts produced under a different resolved configuration
/// (the fingerprint covers the seed) unless forced.
pub fn check_provenance(
    meta: &ContainerMeta,
    cfg: &ExperimentConfig,
    what: &Path,
    force: bool,
) -> Result<(), CliError> {
    if force {
        return Ok(());
    }
    let expected = format!("{:08x}", cfg.fingerprint());
    match meta.extra.get("cfg") {
        Some(found) if *found == expected => Ok(()),
        Some(found) => Err(CliError::IncompatibleArtifacts(format!(
            "{} was produced under config {}, current is {} (use --force to override)",
            what.display(),
            found,
            expected
        ))),
        None => Err(CliError::IncompatibleArtifacts(format!(
            "{} carries no provenance header (use --force to override)",
            what.display()
        ))),
    }
}

pub fn save_labels_csv(path: &Path, labels: &[u8]) -> Result<(), CliError> {
    let mut text = String::from("index,label\n");
    for (i, l) in labels.iter().enumerate() {
        text.push_str(&format!("{},{}\n", i, l));
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_labels_csv(path: &Path) -> Result<Vec<u8>, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::from_read(path, e))?;
    let mut labels = Vec::new();
    for line in text.lines().skip(1) {
        let (_, label) = line.split_once(',').ok_or_else(|| {
            CliError::Numerical(format!("malformed label row {:?} in {}", line, path.display()))
        })?;
        labels.push(label.parse::<u8>().map_err(|_| {
            CliError::Numerical(format!("bad label {:?} in {}", label, path.display()))
        })?);
    }
    Ok(labels)
}

/// Loads the preprocessed object set for a split together with its labels
/// when present.
pub fn load_objects(
    layout: &Layout,
    split: Split,
) -> Result<(ImageSet<Real>, ContainerMeta), CliError> {
    let (images, meta) = load_image_stack(&layout.objects(split))?;
    let labels_path = layout.labels(split);
    let labels =
        if labels_path.exists() { Some(load_labels_csv(&labels_path)?) } else { None };
    let set = ImageSet::new(images, labels, split)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok((set, meta))
}
