use super::{Clustering, IngestError, UtiClip};
use crate::numeric::percentile_linear;

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One representative frame per non-empty cluster: the member closest to the
/// cluster center, lowest frame index on ties. Sorted ascending.
pub fn select_keyframes(clustering: &Clustering, clip: &UtiClip) -> Result<Vec<usize>, IngestError> {
    if clustering.num_frames() != clip.num_frames() {
        return Err(IngestError::ClusteringMismatch {
            clustering: clustering.num_frames(),
            clip: clip.num_frames(),
        });
    }
    let mut best: Vec<Option<(usize, f64)>> = vec![None; clustering.k];
    let centers: Vec<Vec<f64>> = (0..clustering.k).map(|j| clustering.center_flat(j)).collect();
    for (t, &cluster) in clustering.assignments.iter().enumerate() {
        let d = squared_distance(&clip.flat_frame(t), &centers[cluster]);
        match best[cluster] {
            Some((_, bd)) if bd <= d => {}
            _ => best[cluster] = Some((t, d)),
        }
    }
    let mut picks: Vec<usize> = best.into_iter().flatten().map(|(t, _)| t).collect();
    picks.sort_unstable();
    Ok(picks)
}

/// Mean squared elementwise difference of each listed frame to the previous
/// listed frame. The first entry copies the second; a single frame gets 0.
pub fn frame_dynamic_variances(clip: &UtiClip, indices: &[usize]) -> Vec<f64> {
    let pixels = (clip.height() * clip.width()) as f64;
    let mut out: Vec<f64> = Vec::with_capacity(indices.len());
    for w in indices.windows(2) {
        let d = squared_distance(&clip.flat_frame(w[1]), &clip.flat_frame(w[0])) / pixels;
        out.push(d);
    }
    match out.first().copied() {
        Some(first) => out.insert(0, first),
        None if !indices.is_empty() => out.push(0.0),
        None => {}
    }
    out
}

/// Drops keyframes whose dynamic variance falls strictly below the given
/// percentile of the keyframe variance distribution. Never returns an empty
/// set.
pub fn dynamic_variance_filter(
    clip: &UtiClip,
    clustering: &Clustering,
    percentile: f64,
) -> Result<Vec<usize>, IngestError> {
    if !(0.0..=1.0).contains(&percentile) {
        return Err(IngestError::InvalidPercentile(percentile));
    }
    let keyframes = select_keyframes(clustering, clip)?;
    let variances = frame_dynamic_variances(clip, &keyframes);
    let threshold = percentile_linear(&variances, percentile).expect("at least one keyframe");
    let retained: Vec<usize> = keyframes
        .iter()
        .zip(&variances)
        .filter(|(_, &v)| v >= threshold)
        .map(|(&t, _)| t)
        .collect();
    if !retained.is_empty() {
        return Ok(retained);
    }
    let mut best = 0;
    for (i, v) in variances.iter().enumerate() {
        if *v > variances[best] {
            best = i;
        }
    }
    Ok(vec![keyframes[best]])
}
