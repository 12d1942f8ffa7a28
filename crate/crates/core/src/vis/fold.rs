/// Splits a time-sorted series into consecutive cycles of `cycle_hours`.
///
/// A point at `t` lands in segment `floor(t / cycle)` with in-cycle time
/// `t - idx * cycle` in `[0, cycle)`. The output has `floor(t_max / cycle) + 1`
/// segments; empty interior segments are kept as empty lists.
pub fn fold(series: &[(f64, f64)], cycle_hours: f64) -> Vec<Vec<(f64, f64)>> {
    assert!(cycle_hours > 0.0, "cycle must be positive");
    let mut segments: Vec<Vec<(f64, f64)>> = Vec::new();
    for &(t, v) in series {
        let (idx, t_in) = fold_time(t, cycle_hours);
        if segments.len() <= idx {
            segments.resize_with(idx + 1, Vec::new);
        }
        segments[idx].push((t_in, v));
    }
    segments
}

/// Segment index and in-cycle offset for one timestamp. Corrects for the
/// rounding of `t / cycle` so the offset is always in `[0, cycle)`.
#[inline]
pub fn fold_time(t: f64, cycle_hours: f64) -> (usize, f64) {
    let mut idx = (t / cycle_hours).floor().max(0.0);
    let mut rem = t - idx * cycle_hours;
    if rem < 0.0 {
        idx -= 1.0;
        rem = t - idx * cycle_hours;
    } else if rem >= cycle_hours {
        idx += 1.0;
        rem = t - idx * cycle_hours;
    }
    (idx as usize, rem.max(0.0))
}

/// Inverse of [`fold`].
pub fn unfold(segments: &[Vec<(f64, f64)>], cycle_hours: f64) -> Vec<(f64, f64)> {
    segments
        .iter()
        .enumerate()
        .flat_map(|(i, seg)| seg.iter().map(move |&(t, v)| (i as f64 * cycle_hours + t, v)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries_are_half_open() {
        assert_eq!(fold(&[(0.0, 1.0)], 24.0), vec![vec![(0.0, 1.0)]]);
        let f = fold(&[(24.0, 1.0)], 24.0);
        assert_eq!(f.len(), 2);
        assert!(f[0].is_empty());
        assert_eq!(f[1], vec![(0.0, 1.0)]);
    }

    #[test]
    fn interior_gaps_kept() {
        let f = fold(&[(1.0, 1.0), (50.0, 2.0), (100.0, 3.0)], 24.0);
        assert_eq!(f.len(), 5);
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), vec![1, 0, 1, 0, 1]);
        assert_eq!(f[2], vec![(2.0, 2.0)]);
    }

    #[test]
    fn empty_series() {
        assert!(fold(&[], 24.0).is_empty());
    }

    #[test]
    fn awkward_cycles_stay_in_range() {
        for (t, c) in [(0.3, 0.1), (0.7, 0.1), (1e6 + 0.1, 0.7), (5.0, 1.0 / 3.0)] {
            let (_, r) = fold_time(t, c);
            assert!((0.0..c).contains(&r), "{t} {c} -> {r}");
        }
    }
}
