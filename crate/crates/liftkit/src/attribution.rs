//! Gradient saliency over IMU windows: per-window |∂output/∂input| maps,
//! dataset-level channel ranking, and heatmap artifacts.

use crate::liftnet::{self, GradientTarget, Model};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error(transparent)]
    Model(#[from] liftnet::LiftnetError),
}

pub type Result<T> = std::result::Result<T, AttributionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Raw,
    /// Scaled so the maximum value is 1 (unless the map is all zero).
    MaxOne,
}

/// Non-negative saliency values, row-major time × channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub values: Vec<f64>,
    pub window_len: usize,
    pub n_channels: usize,
    pub normalization: Normalization,
}

impl SaliencyMap {
    pub fn at(&self, frame: usize, channel: usize) -> f64 {
        self.values[frame * self.n_channels + channel]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Anything that can report the gradient of its scalar output w.r.t. a
/// window. The LSTM model implements it; [`LinearSurrogate`] provides an
/// analytically checkable stand-in.
pub trait Scorer {
    fn window_shape(&self) -> (usize, usize);
    fn input_gradient(&self, window: &[f64], target: GradientTarget) -> Result<Vec<f64>>;
}

impl Scorer for Model {
    fn window_shape(&self) -> (usize, usize) {
        (self.config.window_len, self.config.n_channels)
    }

    fn input_gradient(&self, window: &[f64], target: GradientTarget) -> Result<Vec<f64>> {
        Ok(liftnet::input_gradient(self, window, target)?)
    }
}

/// LSTM-bypass test hook: output = σ(w · flatten(x)), so the saliency of the
/// probability output is |w|·σ′ element-wise.
pub struct LinearSurrogate {
    pub weights: Vec<f64>,
    pub window_len: usize,
    pub n_channels: usize,
}

impl Scorer for LinearSurrogate {
    fn window_shape(&self) -> (usize, usize) {
        (self.window_len, self.n_channels)
    }

    fn input_gradient(&self, window: &[f64], target: GradientTarget) -> Result<Vec<f64>> {
        if window.len() != self.weights.len() {
            return Err(AttributionError::Shape(format!(
                "window has {} values, surrogate expects {}",
                window.len(),
                self.weights.len()
            )));
        }
        let logit: f64 = self.weights.iter().zip(window).map(|(w, x)| w * x).sum();
        let scale = match target {
            GradientTarget::Logit => 1.0,
            GradientTarget::Probability => {
                let p = 1.0 / (1.0 + (-logit).exp());
                p * (1.0 - p)
            }
        };
        Ok(self.weights.iter().map(|w| w * scale).collect())
    }
}

/// Saliency with explicit gradient target and normalization.
pub fn saliency_with<S: Scorer>(
    scorer: &S,
    window: &[f64],
    target: GradientTarget,
    normalization: Normalization,
) -> Result<SaliencyMap> {
    let (window_len, n_channels) = scorer.window_shape();
    if window.len() != window_len * n_channels {
        return Err(AttributionError::Shape(format!(
            "window has {} values, scorer expects {}",
            window.len(),
            window_len * n_channels
        )));
    }
    let mut values: Vec<f64> =
        scorer.input_gradient(window, target)?.into_iter().map(f64::abs).collect();
    if normalization == Normalization::MaxOne {
        let max = values.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            for v in &mut values {
                *v /= max;
            }
        }
    }
    Ok(SaliencyMap { values, window_len, n_channels, normalization })
}

/// |∂probability/∂input| with MaxOne normalization (the default reading of a
/// heatmap figure).
pub fn saliency(model: &Model, window: &[f64]) -> Result<SaliencyMap> {
    saliency_with(model, window, GradientTarget::Probability, Normalization::MaxOne)
}

/// Per-channel importance share, descending; ties broken by channel order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRanking {
    pub entries: Vec<(usize, f64)>,
}

impl ChannelRanking {
    pub fn share_of(&self, channel: usize) -> f64 {
        self.entries.iter().find(|(c, _)| *c == channel).map(|(_, s)| *s).unwrap_or(0.0)
    }

    pub fn top(&self, n: usize) -> Vec<usize> {
        self.entries.iter().take(n).map(|(c, _)| *c).collect()
    }
}

/// Mean per-channel saliency over maps and frames, normalized to shares
/// summing to 1. Aggregation works on the stored values; pass Raw maps so
/// confident windows weigh more than flat ones.
pub fn aggregate_saliency(maps: &[SaliencyMap]) -> Result<ChannelRanking> {
    let first = maps
        .first()
        .ok_or_else(|| AttributionError::Shape("no maps to aggregate".into()))?;
    let n_channels = first.n_channels;
    let mut totals = vec![0.0; n_channels];
    let mut n_frames = 0usize;
    for map in maps {
        if map.n_channels != n_channels || map.window_len != first.window_len {
            return Err(AttributionError::Shape("heterogeneous map shapes".into()));
        }
        for frame in 0..map.window_len {
            for ch in 0..n_channels {
                totals[ch] += map.at(frame, ch);
            }
        }
        n_frames += map.window_len;
    }
    let mut means: Vec<f64> = totals.iter().map(|t| t / n_frames as f64).collect();
    let sum: f64 = means.iter().sum();
    if sum > 0.0 {
        for m in &mut means {
            *m /= sum;
        }
    } else {
        means.fill(1.0 / n_channels as f64);
    }
    let mut entries: Vec<(usize, f64)> = means.into_iter().enumerate().collect();
    entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(ChannelRanking { entries })
}

/// Grayscale raster + numeric matrix for one saliency map. Rows are time
/// steps, columns are channels; lighter means more salient.
#[derive(Debug, Clone)]
pub struct HeatmapArtifact {
    /// ASCII portable graymap (P2).
    pub pgm: String,
    /// CSV matrix with a channel-name header row.
    pub csv: String,
}

pub fn render_heatmap(map: &SaliencyMap, channel_names: &[String]) -> Result<HeatmapArtifact> {
    if channel_names.len() != map.n_channels {
        return Err(AttributionError::Shape(format!(
            "{} channel names for {} channels",
            channel_names.len(),
            map.n_channels
        )));
    }
    let max = map.max();
    let mut pgm = format!("P2\n{} {}\n255\n", map.n_channels, map.window_len);
    let mut csv = channel_names.join(",");
    csv.push('\n');
    for frame in 0..map.window_len {
        let mut pixels = Vec::with_capacity(map.n_channels);
        let mut row = Vec::with_capacity(map.n_channels);
        for ch in 0..map.n_channels {
            let v = map.at(frame, ch);
            let intensity =
                if max > 0.0 { (v / max * 255.0).round() as u32 } else { 0 };
            pixels.push(intensity.to_string());
            row.push(format!("{v:.6e}"));
        }
        pgm.push_str(&pixels.join(" "));
        pgm.push('\n');
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    Ok(HeatmapArtifact { pgm, csv })
}

/// Ranking CSV: `channel,share`, descending.
pub fn ranking_csv(ranking: &ChannelRanking, channel_names: &[String]) -> String {
    let mut out = String::from("channel,share\n");
    for (ch, share) in &ranking.entries {
        out.push_str(&format!("{},{share:.9}\n", channel_names[*ch]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liftnet::{init_model, ModelConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_model(seed: u64) -> Model {
        let cfg = ModelConfig {
            window_len: 3,
            n_channels: 2,
            lstm_hidden: 4,
            dense_widths: vec![5, 5],
            seed,
            channel_layout: Vec::new(),
        };
        init_model(&cfg).unwrap()
    }

    #[test]
    fn linear_surrogate_saliency_proportional_to_weights() {
        let weights = vec![0.5, -1.5, 2.0, 0.0, -0.25, 1.0];
        let surrogate =
            LinearSurrogate { weights: weights.clone(), window_len: 3, n_channels: 2 };
        let window = vec![0.1, 0.2, -0.3, 0.4, 0.0, -0.1];
        let map = saliency_with(
            &surrogate,
            &window,
            GradientTarget::Probability,
            Normalization::MaxOne,
        )
        .unwrap();
        // relative magnitudes equal |w| up to the shared σ′ factor
        let wmax = 2.0;
        for (v, w) in map.values.iter().zip(&weights) {
            assert!((v - w.abs() / wmax).abs() < 1e-9);
        }
    }

    #[test]
    fn saliency_matches_finite_differences() {
        let model = tiny_model(31);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let window: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let map =
            saliency_with(&model, &window, GradientTarget::Probability, Normalization::Raw)
                .unwrap();
        let h = 1e-5;
        for j in 0..window.len() {
            let mut plus = window.clone();
            plus[j] += h;
            let mut minus = window.clone();
            minus[j] -= h;
            let fd = (crate::liftnet::forward(&model, &plus).unwrap()
                - crate::liftnet::forward(&model, &minus).unwrap())
                / (2.0 * h);
            let denom = map.values[j].max(fd.abs()).max(1e-9);
            assert!((map.values[j] - fd.abs()).abs() / denom <= 1e-3);
        }
    }

    #[test]
    fn zero_weight_model_gives_zero_map() {
        let mut model = tiny_model(2);
        model.theta.iter_mut().for_each(|v| *v = 0.0);
        let map = saliency_with(
            &model,
            &vec![0.4; 6],
            GradientTarget::Probability,
            Normalization::Raw,
        )
        .unwrap();
        assert!(map.values.iter().all(|&v| v == 0.0));
    }

    fn map_from(values: Vec<f64>, n_channels: usize) -> SaliencyMap {
        let window_len = values.len() / n_channels;
        SaliencyMap { values, window_len, n_channels, normalization: Normalization::Raw }
    }

    #[test]
    fn aggregate_single_channel_mass() {
        let map = map_from(vec![0.0, 2.0, 0.0, 3.0], 2);
        let ranking = aggregate_saliency(&[map]).unwrap();
        assert_eq!(ranking.entries[0].0, 1);
        assert!((ranking.share_of(1) - 1.0).abs() < 1e-12);
        assert_eq!(ranking.share_of(0), 0.0);
    }

    #[test]
    fn aggregate_uniform_is_equal_shares() {
        let maps = vec![map_from(vec![1.0; 8], 4), map_from(vec![1.0; 8], 4)];
        let ranking = aggregate_saliency(&maps).unwrap();
        for (_, share) in &ranking.entries {
            assert!((share - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_two_to_one_ratio() {
        let maps = vec![map_from(vec![2.0, 1.0, 2.0, 1.0], 2); 2];
        let ranking = aggregate_saliency(&maps).unwrap();
        assert!((ranking.share_of(0) - 2.0 * ranking.share_of(1)).abs() < 1e-12);
    }

    #[test]
    fn aggregate_shares_sum_to_one_and_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let values: Vec<f64> = (0..12).map(|_| rng.gen::<f64>()).collect();
        let map = map_from(values.clone(), 4);
        let ranking = aggregate_saliency(&[map]).unwrap();
        let total: f64 = ranking.entries.iter().map(|(_, s)| s).sum();
        assert!((total - 1.0).abs() < 1e-9);

        // swap channels 0 and 2 in every frame
        let mut swapped = values;
        for frame in 0..3 {
            swapped.swap(frame * 4, frame * 4 + 2);
        }
        let swapped_ranking = aggregate_saliency(&[map_from(swapped, 4)]).unwrap();
        assert!((ranking.share_of(0) - swapped_ranking.share_of(2)).abs() < 1e-12);
        assert!((ranking.share_of(2) - swapped_ranking.share_of(0)).abs() < 1e-12);
    }

    #[test]
    fn aggregate_rejects_heterogeneous_shapes() {
        let maps = vec![map_from(vec![1.0; 4], 2), map_from(vec![1.0; 6], 3)];
        assert!(matches!(aggregate_saliency(&maps), Err(AttributionError::Shape(_))));
    }

    #[test]
    fn heatmap_pixels() {
        let map = map_from(vec![0.0, 1.0, 1.0, 0.0], 2);
        let names = vec!["a".to_string(), "b".to_string()];
        let art = render_heatmap(&map, &names).unwrap();
        assert_eq!(art.pgm, "P2\n2 2\n255\n0 255\n255 0\n");
        assert!(art.csv.starts_with("a,b\n"));
    }

    #[test]
    fn heatmap_all_zero_is_black_and_maxone_has_white() {
        let names = vec!["a".to_string(), "b".to_string()];
        let zero = map_from(vec![0.0; 4], 2);
        let art = render_heatmap(&zero, &names).unwrap();
        assert_eq!(art.pgm, "P2\n2 2\n255\n0 0\n0 0\n");

        let mut maxone = map_from(vec![0.25, 1.0, 0.5, 0.75], 2);
        maxone.normalization = Normalization::MaxOne;
        let art = render_heatmap(&maxone, &names).unwrap();
        assert!(art.pgm.contains("255"));
    }

    #[test]
    fn heatmap_name_count_mismatch() {
        let map = map_from(vec![0.0; 4], 2);
        assert!(matches!(
            render_heatmap(&map, &["only".to_string()]),
            Err(AttributionError::Shape(_))
        ));
    }
}
