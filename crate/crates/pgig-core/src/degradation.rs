//! Patch-degradation benchmark: rank non-overlapping patches by aggregated
//! saliency, replace a growing number of them with the image's mean value,
//! and track how fast the model's confidence in its original prediction
//! decays. Steeper decay (smaller normalized area under the curve) means
//! the attribution method found the important pixels.
//!
//! Saliency is computed once per image on the clean input for the class the
//! model predicts there; the patch ranking is then fixed for all
//! perturbation counts. Replacement values are the per-image channel mean
//! of the original, unperturbed image.

use crate::attribution::{self, AttributionMap, Method, MethodConfig};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::rng::RandomSource;
use crate::tensor::Tensor;
use crate::trainer::{argmax, LabeledImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Sum the raw signed saliencies of a patch (default).
    SumSigned,
    /// Sum absolute saliencies.
    SumAbsolute,
}

impl Aggregation {
    pub fn name(self) -> &'static str {
        match self {
            Aggregation::SumSigned => "sum_signed",
            Aggregation::SumAbsolute => "sum_absolute",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "sum_signed" => Ok(Aggregation::SumSigned),
            "sum_absolute" => Ok(Aggregation::SumAbsolute),
            other => Err(Error::Config(format!(
                "unknown aggregation {other:?}; valid: sum_signed, sum_absolute"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DegradationConfig {
    /// Patch side length; must divide the image side.
    pub patch_side: usize,
    /// Cap on perturbed patches; `None` runs to the full grid.
    pub max_patches: Option<usize>,
    pub aggregation: Aggregation,
    pub methods: Vec<Method>,
    pub method_config: MethodConfig,
    /// Cap on benchmark images; `None` uses the whole split.
    pub max_images: Option<usize>,
}

impl Default for DegradationConfig {
    fn default() -> Self {
        DegradationConfig {
            patch_side: 4,
            max_patches: None,
            aggregation: Aggregation::SumSigned,
            methods: Method::ALL.to_vec(),
            method_config: MethodConfig::default(),
            max_images: None,
        }
    }
}

/// Confidence-decay series of one method plus its normalized AUC.
#[derive(Debug, Clone)]
pub struct DegradationCurve {
    pub method: Method,
    /// (patches perturbed, mean confidence); k runs 0..=max.
    pub points: Vec<(usize, f64)>,
    /// Trapezoidal area divided by (max_k * confidence at k = 0).
    pub auc: f64,
}

struct PatchGrid {
    image_side: usize,
    patch_side: usize,
}

impl PatchGrid {
    fn for_map_len(len: usize, patch_side: usize) -> Result<PatchGrid> {
        let side = (len as f64).sqrt().round() as usize;
        if side * side != len {
            return Err(Error::Config(format!(
                "map length {len} is not a square image"
            )));
        }
        if patch_side == 0 || !side.is_multiple_of(patch_side) {
            return Err(Error::Config(format!(
                "patch side {patch_side} does not tile image side {side}"
            )));
        }
        Ok(PatchGrid {
            image_side: side,
            patch_side,
        })
    }

    fn grid_side(&self) -> usize {
        self.image_side / self.patch_side
    }

    fn patch_count(&self) -> usize {
        self.grid_side() * self.grid_side()
    }

    fn pixels(&self, patch: usize) -> impl Iterator<Item = usize> + '_ {
        let row0 = (patch / self.grid_side()) * self.patch_side;
        let col0 = (patch % self.grid_side()) * self.patch_side;
        (0..self.patch_side).flat_map(move |dr| {
            (0..self.patch_side).map(move |dc| (row0 + dr) * self.image_side + (col0 + dc))
        })
    }
}

/// Orders patch indices by aggregated saliency, descending; ties break by
/// ascending patch index.
pub fn rank_patches(map: &AttributionMap, cfg: &DegradationConfig) -> Result<Vec<usize>> {
    let grid = PatchGrid::for_map_len(map.values().len(), cfg.patch_side)?;
    let mut scored: Vec<(usize, f64)> = (0..grid.patch_count())
        .map(|patch| {
            let mut acc = 0.0;
            for px in grid.pixels(patch) {
                let v = map.values().get(px);
                acc += match cfg.aggregation {
                    Aggregation::SumSigned => v,
                    Aggregation::SumAbsolute => v.abs(),
                };
            }
            (patch, acc)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().map(|(patch, _)| patch).collect())
}

/// Replaces the first `k` ranked patches with the mean value of `image`.
/// Callers pass the original, unperturbed image so extending a perturbation
/// matches perturbing in one go.
pub fn perturb(
    image: &Tensor,
    cfg: &DegradationConfig,
    ranked: &[usize],
    k: usize,
) -> Result<Tensor> {
    if k > ranked.len() {
        return Err(Error::Argument(format!(
            "cannot perturb {k} patches, ranking has {}",
            ranked.len()
        )));
    }
    let grid = PatchGrid::for_map_len(image.len(), cfg.patch_side)?;
    let mean = image.mean();
    let mut pixels = image.data().to_vec();
    for &patch in &ranked[..k] {
        for px in grid.pixels(patch) {
            pixels[px] = mean;
        }
    }
    Tensor::vector(pixels)
}

/// Runs the benchmark: one saliency map per (image, method) on the clean
/// input for the predicted class, then mean confidence at every
/// perturbation count. Stochastic methods get per-image child seeds.
pub fn run_benchmark(
    net: &Network,
    dataset: &[LabeledImage],
    cfg: &DegradationConfig,
) -> Result<Vec<DegradationCurve>> {
    if dataset.is_empty() {
        return Err(Error::Argument("degradation needs a non-empty dataset".into()));
    }
    if cfg.methods.is_empty() {
        return Err(Error::Config("no methods configured".into()));
    }
    if cfg.methods.iter().any(|m| m.requires_patterns()) && !net.has_patterns() {
        return Err(Error::Config(
            "configured methods need patterns on every layer, but the network has none".into(),
        ));
    }
    let image_len = dataset[0].pixels.len();
    let grid = PatchGrid::for_map_len(image_len, cfg.patch_side)?;
    let max_k = match cfg.max_patches {
        None => grid.patch_count(),
        Some(m) if m == 0 || m > grid.patch_count() => {
            return Err(Error::Config(format!(
                "max_patches {m} outside 1..={}",
                grid.patch_count()
            )))
        }
        Some(m) => m,
    };
    let image_count = cfg
        .max_images
        .map(|m| m.min(dataset.len()))
        .unwrap_or(dataset.len());

    let seed_root = RandomSource::new(cfg.method_config.random_seed);
    let mut sums = vec![vec![0.0; max_k + 1]; cfg.methods.len()];
    for (image_idx, example) in dataset.iter().take(image_count).enumerate() {
        let clean = net.forward(&example.pixels)?;
        let predicted = argmax(clean.output());
        let mut image_cfg = cfg.method_config.clone();
        image_cfg.random_seed = seed_root.derive(image_idx as u64).seed();
        for (m_idx, method) in cfg.methods.iter().enumerate() {
            let map = attribution::explain(net, &example.pixels, Some(predicted), *method, &image_cfg)?;
            let ranked = rank_patches(&map, cfg)?;
            for (k, slot) in sums[m_idx].iter_mut().enumerate() {
                let perturbed = perturb(&example.pixels, cfg, &ranked, k)?;
                let confidence = net.forward(&perturbed)?.output().get(predicted);
                *slot += confidence;
            }
        }
    }

    let n = image_count as f64;
    Ok(cfg
        .methods
        .iter()
        .zip(sums)
        .map(|(method, row)| {
            let points: Vec<(usize, f64)> = row
                .iter()
                .enumerate()
                .map(|(k, total)| (k, total / n))
                .collect();
            let auc = normalized_auc(&points);
            DegradationCurve {
                method: *method,
                points,
                auc,
            }
        })
        .collect())
}

/// Trapezoidal area under (k, confidence) points divided by
/// `max_k * confidence(0)`; 1.0 for a flat curve.
pub(crate) fn normalized_auc(points: &[(usize, f64)]) -> f64 {
    if points.len() < 2 || points[0].1 == 0.0 {
        return 0.0;
    }
    let mut area = 0.0;
    for pair in points.windows(2) {
        let dk = (pair[1].0 - pair[0].0) as f64;
        area += dk * (pair[0].1 + pair[1].1) / 2.0;
    }
    let span = (points.last().unwrap().0 - points[0].0) as f64;
    area / (span * points[0].1)
}
