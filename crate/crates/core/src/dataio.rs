//! Images as pure quaternion matrices, dataset manifests, corruption
//! generators and a synthetic stand-in dataset.
//!
//! Pixels map `R, G, B` onto `i, j, k` with channels scaled to `[0, 1]`.
//! Every random operation takes an explicit generator so that a recipe plus
//! a seed fully determines its output.

use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::{ImageFormat, ImageReader, Rgb, Rgb32FImage, RgbImage};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::classify::LabeledDictionary;
use crate::error::{QmrError, Result};
use crate::quat::{Quaternion, QuaternionMatrix};

fn pixel_to_quaternion(p: [f64; 3]) -> Quaternion {
    Quaternion::pure(p[0], p[1], p[2])
}

fn rgb8_to_matrix(img: &RgbImage) -> QuaternionMatrix {
    let (w, h) = img.dimensions();
    QuaternionMatrix::from_fn(h as usize, w as usize, |r, c| {
        let Rgb(px) = *img.get_pixel(c as u32, r as u32);
        pixel_to_quaternion(px.map(|v| f64::from(v) / 255.0))
    })
}

fn matrix_to_rgb32f(q: &QuaternionMatrix) -> Rgb32FImage {
    Rgb32FImage::from_fn(q.cols() as u32, q.rows() as u32, |c, r| {
        let p = q.get(r as usize, c as usize);
        Rgb([p.x as f32, p.y as f32, p.z as f32])
    })
}

/// Bilinear resize of the three imaginary channels; the real part is
/// dropped, so the result is always pure.
pub fn resize_matrix(q: &QuaternionMatrix, rows: usize, cols: usize) -> QuaternionMatrix {
    if q.shape() == (rows, cols) {
        return q.map(|p| Quaternion::pure(p.x, p.y, p.z));
    }
    let resized = image::imageops::resize(&matrix_to_rgb32f(q), cols as u32, rows as u32, FilterType::Triangle);
    QuaternionMatrix::from_fn(rows, cols, |r, c| {
        let Rgb(px) = *resized.get_pixel(c as u32, r as u32);
        pixel_to_quaternion(px.map(f64::from))
    })
}

fn io_error(path: &Path, source: std::io::Error) -> QmrError {
    QmrError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads an 8-bit RGB PNG or binary PPM as a pure quaternion matrix of the
/// requested `(rows, cols)`.
pub fn load_image(path: &Path, target: (usize, usize)) -> Result<QuaternionMatrix> {
    let q = load_image_native(path)?;
    Ok(resize_matrix(&q, target.0, target.1))
}

/// [`load_image`] at the file's own size.
pub fn load_image_native(path: &Path) -> Result<QuaternionMatrix> {
    let reader = ImageReader::open(path)
        .map_err(|e| io_error(path, e))?
        .with_guessed_format()
        .map_err(|e| io_error(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        other => {
            return Err(QmrError::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: format!("expected PNG or PPM, detected {other:?}"),
            })
        }
    }
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(io) => io_error(path, io),
        other => QmrError::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })?;
    Ok(rgb8_to_matrix(&decoded.to_rgb8()))
}

/// Writes the imaginary channels as an 8-bit RGB image; the format follows
/// the extension (`.png`, `.ppm`).
pub fn save_image(q: &QuaternionMatrix, path: &Path) -> Result<()> {
    let format = ImageFormat::from_path(path).map_err(|e| QmrError::UnsupportedFormat {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Pnm) {
        return Err(QmrError::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("cannot write {format:?}"),
        });
    }
    let quantize = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let img = RgbImage::from_fn(q.cols() as u32, q.rows() as u32, |c, r| {
        let p = q.get(r as usize, c as usize);
        Rgb([quantize(p.x), quantize(p.y), quantize(p.z)])
    });
    img.save_with_format(path, format).map_err(|e| match e {
        image::ImageError::IoError(io) => io_error(path, io),
        other => QmrError::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train or test)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub class_id: usize,
    pub split: Split,
}

/// An image with its 1-based class id.
#[derive(Clone, Debug)]
pub struct LabeledImage {
    pub image: QuaternionMatrix,
    pub class: usize,
}

/// `path,classId,split` records; relative paths resolve against the
/// manifest's directory.
#[derive(Clone, Debug)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub image_size: (usize, usize),
}

impl DatasetManifest {
    pub fn read(path: &Path, image_size: (usize, usize)) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, image_size).map_err(|(line, reason)| QmrError::Manifest {
            path: path.to_path_buf(),
            line,
            reason,
        })
    }

    fn parse(text: &str, base: &Path, image_size: (usize, usize)) -> std::result::Result<Self, (usize, String)> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| (e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.iter().all(|f| f.is_empty()) {
                continue;
            }
            if entries.is_empty() && record.get(0).is_some_and(|f| f.eq_ignore_ascii_case("path")) {
                continue;
            }
            if record.len() != 3 {
                return Err((line, format!("expected 3 fields, found {}", record.len())));
            }
            let class_id: usize = record[1]
                .parse()
                .map_err(|_| (line, format!("class id {:?} is not a positive integer", &record[1])))?;
            if class_id == 0 {
                return Err((line, "class ids start at 1".into()));
            }
            let split = record[2].parse().map_err(|e| (line, e))?;
            let p = PathBuf::from(&record[0]);
            let path = if p.is_absolute() { p } else { base.join(p) };
            entries.push(ManifestEntry { path, class_id, split });
        }
        let manifest = Self { entries, image_size };
        manifest.validate().map_err(|e| (0, e))?;
        Ok(manifest)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.image_size.0 == 0 || self.image_size.1 == 0 {
            return Err("image size must be nonzero".into());
        }
        for e in &self.entries {
            if !self
                .entries
                .iter()
                .any(|t| t.class_id == e.class_id && t.split == Split::Train)
            {
                return Err(format!("class {} has no training image", e.class_id));
            }
        }
        if self.entries.is_empty() {
            return Err("manifest is empty".into());
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.entries.iter().map(|e| e.class_id).max().unwrap_or(0)
    }

    /// Loads both splits: the training dictionary and the test queries.
    pub fn load(&self) -> Result<(LabeledDictionary, Vec<LabeledImage>)> {
        let mut train = Vec::new();
        let mut labels = Vec::new();
        let mut test = Vec::new();
        for e in &self.entries {
            let image = load_image(&e.path, self.image_size)?;
            match e.split {
                Split::Train => {
                    train.push(image);
                    labels.push(e.class_id);
                }
                Split::Test => test.push(LabeledImage {
                    image,
                    class: e.class_id,
                }),
            }
        }
        Ok((LabeledDictionary::new(train, labels, self.classes())?, test))
    }
}

/// What fills an occlusion block.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockSource {
    /// An unrelated image, resized to the block.
    Patch(QuaternionMatrix),
    /// Uniform random colors.
    Noise,
}

impl Default for BlockSource {
    fn default() -> Self {
        BlockSource::Patch(procedural_patch(64, 64))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorruptionRecipe {
    /// Occluded area as a fraction of the image.
    pub block_fraction: f64,
    pub block_source: BlockSource,
    /// Per-pixel salt-and-pepper probability.
    pub sp_probability: f64,
    /// Variance of the zero-mean additive Gaussian noise, per channel.
    pub gaussian_variance: f64,
    pub seed: u64,
}

impl Default for CorruptionRecipe {
    fn default() -> Self {
        Self::clean()
    }
}

impl CorruptionRecipe {
    pub fn clean() -> Self {
        Self {
            block_fraction: 0.0,
            block_source: BlockSource::default(),
            sp_probability: 0.0,
            gaussian_variance: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.block_fraction) {
            return Err(QmrError::InvalidInput(format!(
                "block fraction {} outside [0, 1]",
                self.block_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.sp_probability) {
            return Err(QmrError::InvalidInput(format!(
                "salt-and-pepper probability {} outside [0, 1]",
                self.sp_probability
            )));
        }
        if !(self.gaussian_variance >= 0.0 && self.gaussian_variance.is_finite()) {
            return Err(QmrError::InvalidInput(format!(
                "gaussian variance {} must be finite and nonnegative",
                self.gaussian_variance
            )));
        }
        if let BlockSource::Patch(p) = &self.block_source {
            if p.is_empty() {
                return Err(QmrError::InvalidInput("occlusion patch is empty".into()));
            }
        }
        Ok(())
    }

    pub fn is_clean(&self) -> bool {
        self.block_fraction == 0.0 && self.sp_probability == 0.0 && self.gaussian_variance == 0.0
    }

    /// Generator for query `index`; independent streams per query keep
    /// results identical regardless of processing order.
    pub fn rng_for(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// A smooth, colorful test pattern used as the default occluder.
pub fn procedural_patch(rows: usize, cols: usize) -> QuaternionMatrix {
    use std::f64::consts::TAU;
    QuaternionMatrix::from_fn(rows, cols, |r, c| {
        let y = r as f64 / rows.max(1) as f64;
        let x = c as f64 / cols.max(1) as f64;
        let d = ((x - 0.35).powi(2) + (y - 0.6).powi(2)).sqrt();
        Quaternion::pure(
            0.5 + 0.5 * (TAU * 3.0 * x).sin(),
            0.5 + 0.5 * (TAU * 5.0 * d).cos(),
            0.5 + 0.5 * (TAU * 2.0 * (x + y)).sin() * (TAU * y).cos(),
        )
    })
}

/// Block height and width covering about `fraction` of a `rows x cols`
/// image with the image's aspect ratio.
pub fn block_dims(rows: usize, cols: usize, fraction: f64) -> (usize, usize) {
    if fraction <= 0.0 || rows == 0 || cols == 0 {
        return (0, 0);
    }
    let h = ((rows as f64) * fraction.sqrt()).round().clamp(1.0, rows as f64) as usize;
    let w = ((fraction * (rows * cols) as f64) / h as f64).round().clamp(1.0, cols as f64) as usize;
    (h, w)
}

/// Occludes a uniformly placed block; returns the image and a column-major
/// mask of replaced pixels.
pub fn occlude_block_with_mask(
    img: &QuaternionMatrix,
    recipe: &CorruptionRecipe,
    rng: &mut impl Rng,
) -> (QuaternionMatrix, Vec<bool>) {
    let (m, n) = img.shape();
    let mut out = img.clone();
    let mut mask = vec![false; m * n];
    let (h, w) = block_dims(m, n, recipe.block_fraction);
    if h == 0 || w == 0 {
        return (out, mask);
    }
    let top = rng.random_range(0..=m - h);
    let left = rng.random_range(0..=n - w);
    let patch = match &recipe.block_source {
        BlockSource::Patch(p) => resize_matrix(p, h, w),
        BlockSource::Noise => {
            QuaternionMatrix::from_fn(h, w, |_, _| Quaternion::pure(rng.random(), rng.random(), rng.random()))
        }
    };
    for c in 0..w {
        for r in 0..h {
            out.set(top + r, left + c, patch.get(r, c));
            mask[(left + c) * m + top + r] = true;
        }
    }
    (out, mask)
}

pub fn occlude_block(img: &QuaternionMatrix, recipe: &CorruptionRecipe, rng: &mut impl Rng) -> QuaternionMatrix {
    occlude_block_with_mask(img, recipe, rng).0
}

/// Salt-and-pepper followed by additive Gaussian noise, channels clamped to
/// `[0, 1]`. The mask flags salt-and-pepper pixels (column-major).
pub fn add_mixed_noise_with_mask(
    img: &QuaternionMatrix,
    recipe: &CorruptionRecipe,
    rng: &mut impl Rng,
) -> (QuaternionMatrix, Vec<bool>) {
    let mut out = img.clone();
    let mut mask = vec![false; img.len()];
    if recipe.sp_probability > 0.0 {
        for (p, hit) in out.as_mut_slice().iter_mut().zip(mask.iter_mut()) {
            if rng.random_bool(recipe.sp_probability) {
                *hit = true;
                let mut level = || if rng.random_bool(0.5) { 1.0 } else { 0.0 };
                *p = Quaternion::pure(level(), level(), level());
            }
        }
    }
    if recipe.gaussian_variance > 0.0 {
        let normal = Normal::new(0.0, recipe.gaussian_variance.sqrt()).expect("variance validated");
        for p in out.as_mut_slice() {
            let x = p.x + normal.sample(rng);
            let y = p.y + normal.sample(rng);
            let z = p.z + normal.sample(rng);
            *p = Quaternion::pure(x, y, z);
        }
    }
    for p in out.as_mut_slice() {
        *p = Quaternion::pure(p.x.clamp(0.0, 1.0), p.y.clamp(0.0, 1.0), p.z.clamp(0.0, 1.0));
    }
    (out, mask)
}

pub fn add_mixed_noise(img: &QuaternionMatrix, recipe: &CorruptionRecipe, rng: &mut impl Rng) -> QuaternionMatrix {
    add_mixed_noise_with_mask(img, recipe, rng).0
}

/// Block occlusion, then mixed noise.
pub fn corrupt(img: &QuaternionMatrix, recipe: &CorruptionRecipe, rng: &mut impl Rng) -> QuaternionMatrix {
    let occluded = occlude_block(img, recipe, rng);
    add_mixed_noise(&occluded, recipe, rng)
}

/// Parameters of the synthetic dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthSpec {
    pub classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub rows: usize,
    pub cols: usize,
    /// Standard deviation of within-class pixel perturbations.
    pub noise_std: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(classes: usize, per_class: usize, size: (usize, usize), seed: u64) -> Self {
        Self {
            classes,
            train_per_class: per_class,
            test_per_class: per_class,
            rows: size.0,
            cols: size.1,
            noise_std: 0.02,
            seed,
        }
    }

    /// Expected Frobenius norm of one within-class perturbation.
    pub fn noise_scale(&self) -> f64 {
        self.noise_std * ((3 * self.rows * self.cols) as f64).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub templates: Vec<QuaternionMatrix>,
    pub train: LabeledDictionary,
    pub test: Vec<LabeledImage>,
}

/// Each class gets a pure quaternion template whose three channels are
/// rank-one outer products of uniform `[0, 1]` vectors (quaternion rank at
/// most 3). Samples add clamped Gaussian noise. Templates are redrawn until
/// all pairwise distances exceed five times the noise scale.
pub fn synth_dataset(spec: &SynthSpec) -> Result<SynthDataset> {
    if spec.classes < 2 {
        return Err(QmrError::InvalidInput("synthetic dataset needs at least 2 classes".into()));
    }
    if spec.train_per_class == 0 || spec.rows == 0 || spec.cols == 0 {
        return Err(QmrError::InvalidInput("synthetic dataset needs nonzero sizes".into()));
    }
    if !(spec.noise_std >= 0.0 && spec.noise_std.is_finite()) {
        return Err(QmrError::InvalidInput("noise_std must be finite and nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (m, n) = (spec.rows, spec.cols);
    let min_distance = 5.0 * spec.noise_scale();

    let mut templates: Vec<QuaternionMatrix> = Vec::with_capacity(spec.classes);
    let mut attempts = 0;
    while templates.len() < spec.classes {
        attempts += 1;
        if attempts > 1000 * spec.classes {
            return Err(QmrError::InvalidInput(
                "could not draw separated templates; reduce noise_std".into(),
            ));
        }
        let mut factor = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random::<f64>()).collect() };
        let channels: Vec<(Vec<f64>, Vec<f64>)> = (0..3).map(|_| (factor(m), factor(n))).collect();
        let t = QuaternionMatrix::from_fn(m, n, |r, c| {
            let v = |k: usize| channels[k].0[r] * channels[k].1[c];
            Quaternion::pure(v(0), v(1), v(2))
        });
        if templates.iter().all(|o| (o - &t).frobenius_norm() >= min_distance) {
            templates.push(t);
        }
    }

    let noise = Normal::new(0.0, spec.noise_std).expect("validated");
    let mut sample = |t: &QuaternionMatrix| {
        t.map(|p| {
            let mut jitter = |v: f64| {
                let d = if spec.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                (v + d).clamp(0.0, 1.0)
            };
            Quaternion::pure(jitter(p.x), jitter(p.y), jitter(p.z))
        })
    };

    let mut train = Vec::new();
    let mut labels = Vec::new();
    let mut test = Vec::new();
    for (k, t) in templates.iter().enumerate() {
        for _ in 0..spec.train_per_class {
            train.push(sample(t));
            labels.push(k + 1);
        }
    }
    for (k, t) in templates.iter().enumerate() {
        for _ in 0..spec.test_per_class {
            test.push(LabeledImage {
                image: sample(t),
                class: k + 1,
            });
        }
    }
    Ok(SynthDataset {
        train: LabeledDictionary::new(train, labels, spec.classes)?,
        templates,
        test,
    })
}
