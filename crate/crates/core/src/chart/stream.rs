use alloc::vec::Vec;

use super::ChartError;

/// Silhouette-stacked layers, in data units.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamLayers {
    /// Bottom of the stack at each x, `-sum/2`.
    pub baseline: Vec<f64>,
    /// `spans[layer][x] = [lower, upper]`.
    pub spans: Vec<Vec<[f64; 2]>>,
}

impl StreamLayers {
    pub fn len_x(&self) -> usize {
        self.baseline.len()
    }

    /// Stack height at each x.
    pub fn totals(&self) -> Vec<f64> {
        (0..self.len_x())
            .map(|i| match self.spans.last() {
                Some(top) => top[i][1] - self.baseline[i],
                None => 0.0,
            })
            .collect()
    }
}

/// Stacks `series` around a silhouette baseline so each column is
/// symmetric about zero.
pub fn streamgraph_baseline(series: &[Vec<f64>]) -> Result<StreamLayers, ChartError> {
    let n = series.first().map_or(0, Vec::len);
    if series.iter().any(|s| s.len() != n) {
        return Err(ChartError::RaggedSeries);
    }
    if series.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ChartError::NonFinite);
    }
    if series.iter().flatten().any(|&v| v < 0.0) {
        return Err(ChartError::NegativeValue);
    }
    let baseline: Vec<f64> = (0..n)
        .map(|i| -0.5 * series.iter().map(|s| s[i]).sum::<f64>())
        .collect();
    let mut spans: Vec<Vec<[f64; 2]>> = Vec::with_capacity(series.len());
    let mut running = baseline.clone();
    for s in series {
        let layer = (0..n)
            .map(|i| {
                let lower = running[i];
                running[i] += s[i];
                [lower, running[i]]
            })
            .collect();
        spans.push(layer);
    }
    Ok(StreamLayers { baseline, spans })
}
