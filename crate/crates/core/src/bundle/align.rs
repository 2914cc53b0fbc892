/// Default maximum skew: half a frame period at 30 Hz.
pub const DEFAULT_MAX_SKEW_MS: f64 = 17.0;

/// For every reference timestamp, the index of the nearest-in-time entry of
/// `other`, or `None` when that nearest entry is more than `max_skew_ms`
/// away. Both inputs must be sorted ascending. Ties go to the earlier index.
pub fn align_streams(reference: &[f64], other: &[f64], max_skew_ms: f64) -> Vec<Option<usize>> {
    if other.is_empty() {
        return vec![None; reference.len()];
    }
    let mut j = 0;
    reference
        .iter()
        .map(|&t| {
            while j + 1 < other.len() && (other[j + 1] - t).abs() < (other[j] - t).abs() {
                j += 1;
            }
            ((other[j] - t).abs() <= max_skew_ms).then_some(j)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(reference: &[f64], other: &[f64], skew: f64) -> Vec<Option<usize>> {
        reference
            .iter()
            .map(|&t| {
                let mut best: Option<usize> = None;
                for (k, &o) in other.iter().enumerate() {
                    if best.map_or(true, |b| (o - t).abs() < (other[b] - t).abs()) {
                        best = Some(k);
                    }
                }
                best.filter(|&b| (other[b] - t).abs() <= skew)
            })
            .collect()
    }

    fn frames(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 * 1000.0 / 30.0).collect()
    }

    #[test]
    fn identical_is_identity() {
        let t = frames(50);
        let m = align_streams(&t, &t, DEFAULT_MAX_SKEW_MS);
        assert!(m.iter().enumerate().all(|(i, v)| *v == Some(i)));
    }

    #[test]
    fn offset_stream() {
        let t = frames(60);
        let other: Vec<f64> = t.iter().map(|x| x + 10.0).collect();
        let m = align_streams(&t, &other, DEFAULT_MAX_SKEW_MS);
        assert_eq!(m, brute(&t, &other, DEFAULT_MAX_SKEW_MS));
        assert!(m.iter().all(Option::is_some));
    }

    #[test]
    fn gap_in_other_marks_invalid() {
        let t = frames(40);
        let other: Vec<f64> = t.iter().enumerate().filter(|(i, _)| !(20..25).contains(i)).map(|(_, &v)| v).collect();
        let m = align_streams(&t, &other, DEFAULT_MAX_SKEW_MS);
        assert_eq!(m, brute(&t, &other, DEFAULT_MAX_SKEW_MS));
        for (i, v) in m.iter().enumerate() {
            assert_eq!(v.is_none(), (20..25).contains(&i), "frame {i}");
        }
    }

    #[test]
    fn empty_inputs() {
        assert!(align_streams(&[], &[1.0], 17.0).is_empty());
        assert_eq!(align_streams(&[1.0], &[], 17.0), vec![None]);
    }
}
