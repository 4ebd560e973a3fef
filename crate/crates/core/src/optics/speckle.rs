use std::path::Path;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fft2::ifft2_inplace, OpticsError};
use crate::data::{load_container, save_container, ContainerMeta, DataError, SamplingConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpeckleKind {
    /// Fully developed speckle: uniform random phase inside a Fourier-domain
    /// pupil disk, intensity = |field|^2.
    Rayleigh { grain: f64 },
    /// Low-frequency-weighted stand-in for optimized illumination: white
    /// Gaussian spectrum shaped by f^(-exponent/2).
    Pink { exponent: f64 },
    Imported,
}

impl SpeckleKind {
    pub fn tag(&self) -> &'static str {
        match self {
            SpeckleKind::Rayleigh { .. } => "rayleigh",
            SpeckleKind::Pink { .. } => "pink",
            SpeckleKind::Imported => "imported",
        }
    }
}

/// K illumination patterns of `width x height` nonnegative values in `[0,1]`.
#[derive(Debug, Clone)]
pub struct PatternStack<S: Scalar> {
    width: usize,
    height: usize,
    data: Vec<S>, // k * width * height, pattern-major
    kind: SpeckleKind,
    seed: u64,
}

impl<S: Scalar> PatternStack<S> {
    pub fn from_data(
        width: usize,
        height: usize,
        data: Vec<S>,
        kind: SpeckleKind,
        seed: u64,
    ) -> Result<Self, OpticsError> {
        let cell = width * height;
        if cell == 0 || data.is_empty() || data.len() % cell != 0 {
            return Err(OpticsError::DimensionMismatch(format!(
                "{} values cannot form {}x{} patterns",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|&v| !(v >= S::zero() && v <= S::one())) {
            return Err(OpticsError::InvalidParameter(
                "pattern values must lie in [0,1]".into(),
            ));
        }
        Ok(Self { width, height, data, kind, seed })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n_pixels()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn kind(&self) -> SpeckleKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn pattern(&self, i: usize) -> &[S] {
        let n = self.n_pixels();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn patterns(&self) -> impl Iterator<Item = &[S]> {
        self.data.chunks_exact(self.n_pixels())
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    /// Persists the stack as a container with dims `[k, height, width]` and
    /// the generation parameters in the header.
    pub fn save(&self, path: &Path, extra: &[(&str, String)]) -> Result<(), DataError> {
        let mut meta = ContainerMeta::new(
            "patterns",
            vec![self.len(), self.height, self.width],
            S::DTYPE,
            self.seed,
        )
        .with_extra("kind", self.kind.tag());
        match self.kind {
            SpeckleKind::Rayleigh { grain } => {
                meta = meta.with_extra("grain", &format!("{}", grain));
            }
            SpeckleKind::Pink { exponent } => {
                meta = meta.with_extra("exponent", &format!("{}", exponent));
            }
            SpeckleKind::Imported => {}
        }
        for (k, v) in extra {
            meta = meta.with_extra(k, v);
        }
        let payload = ContainerMeta::encode_scalars(&self.data);
        save_container(path, &meta, &payload)
    }

    /// Loads a stack saved by [`PatternStack::save`] or supplied externally
    /// in the same layout; unknown kinds load as `Imported`.
    pub fn load(path: &Path) -> Result<(Self, ContainerMeta), DataError> {
        let (meta, payload) = load_container(path)?;
        if meta.dims.len() != 3 {
            return Err(DataError::HeaderMismatch(format!(
                "pattern container must have dims [k,h,w], got {:?}",
                meta.dims
            )));
        }
        if meta.dtype != S::DTYPE {
            return Err(DataError::HeaderMismatch(format!(
                "pattern container dtype {} does not match requested {}",
                meta.dtype.tag(),
                S::DTYPE.tag()
            )));
        }
        let (k, h, w) = (meta.dims[0], meta.dims[1], meta.dims[2]);
        let data: Vec<S> = ContainerMeta::decode_scalars(&payload)?;
        let kind = match meta.extra.get("kind").map(|s| s.as_str()) {
            Some("rayleigh") => SpeckleKind::Rayleigh {
                grain: meta
                    .extra
                    .get("grain")
                    .and_then(|g| g.parse().ok())
                    .unwrap_or(0.0),
            },
            Some("pink") => SpeckleKind::Pink {
                exponent: meta
                    .extra
                    .get("exponent")
                    .and_then(|e| e.parse().ok())
                    .unwrap_or(0.0),
            },
            _ => SpeckleKind::Imported,
        };
        let stack = Self::from_data(w, h, data, kind, meta.seed).map_err(|e| {
            DataError::HeaderMismatch(format!("invalid pattern payload: {}", e))
        })?;
        if stack.len() != k {
            return Err(DataError::HeaderMismatch(format!(
                "header says {} patterns, payload holds {}",
                k,
                stack.len()
            )));
        }
        Ok((stack, meta))
    }
}

/// Fully developed (Rayleigh) speckle patterns.
///
/// Each pattern is synthesized by filling a centered Fourier-domain disk of
/// radius `width / (2 * grain)` with unit-amplitude, uniformly random phase,
/// taking the inverse 2-D FFT and squaring the magnitude; the result is
/// normalized to peak 1.
pub fn gen_rayleigh_speckles<S: Scalar>(
    cfg: &SamplingConfig,
    width: usize,
    height: usize,
    grain: f64,
    seed: u64,
) -> Result<PatternStack<S>, OpticsError> {
    if width * height != cfg.n_pixels() {
        return Err(OpticsError::DimensionMismatch(format!(
            "{}x{} grid does not match configured {} pixels",
            width,
            height,
            cfg.n_pixels()
        )));
    }
    if grain < 1.0 {
        return Err(OpticsError::InvalidParameter(format!(
            "grain {} must be at least 1 pixel",
            grain
        )));
    }
    let radius = width as f64 / (2.0 * grain);
    if radius < 1.0 {
        return Err(OpticsError::GrainTooLarge { radius });
    }

    let k = cfg.n_patterns();
    let cell = width * height;
    let cx = width as f64 / 2.0;
    let cy = height as f64 / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(k * cell);
    let mut field = vec![Complex::new(S::zero(), S::zero()); cell];

    for _ in 0..k {
        for v in 0..height {
            for u in 0..width {
                let du = u as f64 - cx;
                let dv = v as f64 - cy;
                field[v * width + u] = if (du * du + dv * dv).sqrt() <= radius {
                    let phase = rng.gen::<f64>() * std::f64::consts::TAU;
                    Complex::new(S::from_f64c(phase.cos()), S::from_f64c(phase.sin()))
                } else {
                    Complex::new(S::zero(), S::zero())
                };
            }
        }
        ifft2_inplace(&mut field, width, height);
        let start = data.len();
        let mut max = S::zero();
        for z in &field {
            let intensity = z.re * z.re + z.im * z.im;
            if intensity > max {
                max = intensity;
            }
            data.push(intensity);
        }
        if max > S::zero() {
            for v in &mut data[start..] {
                *v = *v / max;
            }
        }
    }
    PatternStack::from_data(
        width,
        height,
        data,
        SpeckleKind::Rayleigh { grain },
        seed,
    )
}

/// Colored-noise ("pink") speckle patterns: a complex white Gaussian
/// spectrum is shaped by the radial filter f^(-exponent/2) with the DC term
/// zeroed, inverted, and the real part min-max scaled to `[0,1]` per pattern.
pub fn gen_pink_speckles<S: Scalar>(
    cfg: &SamplingConfig,
    width: usize,
    height: usize,
    exponent: f64,
    seed: u64,
) -> Result<PatternStack<S>, OpticsError> {
    if width * height != cfg.n_pixels() {
        return Err(OpticsError::DimensionMismatch(format!(
            "{}x{} grid does not match configured {} pixels",
            width,
            height,
            cfg.n_pixels()
        )));
    }
    if exponent <= 0.0 {
        return Err(OpticsError::InvalidParameter(format!(
            "spectral exponent {} must be positive",
            exponent
        )));
    }

    let k = cfg.n_patterns();
    let cell = width * height;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(k * cell);
    let mut field = vec![Complex::new(S::zero(), S::zero()); cell];

    for _ in 0..k {
        for v in 0..height {
            for u in 0..width {
                // unshifted DFT layout: frequency 0 sits at (0,0)
                let fu = u.min(width - u) as f64;
                let fv = v.min(height - v) as f64;
                let f = (fu * fu + fv * fv).sqrt();
                field[v * width + u] = if f == 0.0 {
                    Complex::new(S::zero(), S::zero())
                } else {
                    let amp = f.powf(-exponent / 2.0);
                    let g_re = standard_normal(&mut rng);
                    let g_im = standard_normal(&mut rng);
                    Complex::new(S::from_f64c(g_re * amp), S::from_f64c(g_im * amp))
                };
            }
        }
        ifft2_inplace(&mut field, width, height);
        let start = data.len();
        let mut lo = S::infinity();
        let mut hi = S::neg_infinity();
        for z in &field {
            if z.re < lo {
                lo = z.re;
            }
            if z.re > hi {
                hi = z.re;
            }
            data.push(z.re);
        }
        let span = hi - lo;
        if span > S::zero() {
            for v in &mut data[start..] {
                *v = (*v - lo) / span;
            }
        } else {
            for v in &mut data[start..] {
                *v = S::zero();
            }
        }
    }
    PatternStack::from_data(width, height, data, SpeckleKind::Pink { exponent }, seed)
}

/// Box-Muller standard normal draw from two uniform samples.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::spectrum::{radial_power_slope, speckle_contrast};

    #[test]
    fn rayleigh_stack_has_configured_count_and_range() {
        let cfg = SamplingConfig::new(1024, 0.05).unwrap();
        let stack: PatternStack<f64> =
            gen_rayleigh_speckles(&cfg, 32, 32, 2.0, 7).unwrap();
        assert_eq!(stack.len(), 52);
        assert_eq!(stack.n_pixels(), 1024);
        for p in stack.patterns() {
            let max = p.iter().cloned().fold(f64::MIN, f64::max);
            assert!((max - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = SamplingConfig::new(256, 0.1).unwrap();
        let a: PatternStack<f64> = gen_rayleigh_speckles(&cfg, 16, 16, 2.0, 99).unwrap();
        let b: PatternStack<f64> = gen_rayleigh_speckles(&cfg, 16, 16, 2.0, 99).unwrap();
        assert_eq!(a.data(), b.data());
        let c: PatternStack<f64> = gen_pink_speckles(&cfg, 16, 16, 1.0, 99).unwrap();
        let d: PatternStack<f64> = gen_pink_speckles(&cfg, 16, 16, 1.0, 99).unwrap();
        assert_eq!(c.data(), d.data());
    }

    #[test]
    fn grain_too_large_is_rejected() {
        let cfg = SamplingConfig::new(1024, 0.05).unwrap();
        let err = gen_rayleigh_speckles::<f64>(&cfg, 32, 32, 20.0, 0).unwrap_err();
        assert!(matches!(err, OpticsError::GrainTooLarge { .. }));
    }

    #[test]
    fn rayleigh_contrast_is_near_unity() {
        // fully developed speckle has a negative-exponential intensity
        // distribution, hence contrast sigma/mu = 1
        let cfg = SamplingConfig::new(1024, 0.05).unwrap();
        let stack: PatternStack<f64> =
            gen_rayleigh_speckles(&cfg, 32, 32, 2.0, 11).unwrap();
        assert!(stack.len() * stack.n_pixels() >= 10_000);
        let c = speckle_contrast(&stack);
        assert!((0.9..=1.1).contains(&c), "contrast {}", c);
    }

    #[test]
    fn rayleigh_intensity_is_exponential_shaped() {
        // for Exp(mu): median = mu ln 2 and P(I > 2 mu) = e^-2
        let cfg = SamplingConfig::new(1024, 0.05).unwrap();
        let stack: PatternStack<f64> =
            gen_rayleigh_speckles(&cfg, 32, 32, 2.0, 13).unwrap();
        let mut all: Vec<f64> = stack.data().to_vec();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let median = all[all.len() / 2];
        assert!(
            (median / mean - std::f64::consts::LN_2).abs() < 0.08,
            "median/mean {}",
            median / mean
        );
        let tail = all.iter().filter(|&&v| v > 2.0 * mean).count() as f64 / all.len() as f64;
        assert!((tail - (-2.0f64).exp()).abs() < 0.05, "tail fraction {}", tail);
    }

    #[test]
    fn pink_stack_count_at_two_percent() {
        let cfg = SamplingConfig::new(1024, 0.02).unwrap();
        let stack: PatternStack<f64> = gen_pink_speckles(&cfg, 32, 32, 1.0, 3).unwrap();
        assert_eq!(stack.len(), 21);
    }

    #[test]
    fn pink_slope_tracks_exponent() {
        let cfg = SamplingConfig::new(1024, 0.05).unwrap();
        let stack: PatternStack<f64> = gen_pink_speckles(&cfg, 32, 32, 1.0, 5).unwrap();
        let slope = radial_power_slope(&stack);
        assert!((slope + 1.0).abs() < 0.2, "slope {}", slope);
    }

    #[test]
    fn near_zero_exponent_gives_flat_spectrum() {
        let cfg = SamplingConfig::new(1024, 0.05).unwrap();
        let stack: PatternStack<f64> =
            gen_pink_speckles(&cfg, 32, 32, 1e-9, 5).unwrap();
        let slope = radial_power_slope(&stack);
        assert!(slope.abs() < 0.2, "slope {}", slope);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = std::env::temp_dir().join("ghostimg_speckle_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("stack.gic");
        let cfg = SamplingConfig::new(64, 0.25).unwrap();
        let stack: PatternStack<f64> = gen_rayleigh_speckles(&cfg, 8, 8, 2.0, 21).unwrap();
        stack.save(&path, &[("beta", "0.25".into())]).unwrap();
        let (loaded, meta) = PatternStack::<f64>::load(&path).unwrap();
        assert_eq!(loaded.data(), stack.data());
        assert_eq!(loaded.kind(), stack.kind());
        assert_eq!(meta.extra.get("beta").map(|s| s.as_str()), Some("0.25"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
