//! Slice-and-wrap geometry: one polar curve per folded cycle, superimposed.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::fold::{fold, fold_time};
use super::spline::{self, Point};
use super::VisError;
use crate::dataset::{BpType, EventKind, PatientStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct WrapConfig {
    pub cycle_hours: f64,
    pub bp_type: BpType,
    /// mmHg drawn as the dashed reference circle.
    pub baseline: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub bp_lo: f64,
    pub bp_hi: f64,
    pub samples_per_span: usize,
}

impl Default for WrapConfig {
    fn default() -> Self {
        WrapConfig {
            cycle_hours: 24.0,
            bp_type: BpType::Sbp,
            baseline: 120.0,
            r_min: 0.2,
            r_max: 1.0,
            bp_lo: 60.0,
            bp_hi: 220.0,
            samples_per_span: 12,
        }
    }
}

impl WrapConfig {
    pub fn validate(&self) -> Result<(), VisError> {
        let ok = self.cycle_hours.is_finite()
            && self.cycle_hours > 0.0
            && self.r_min >= 0.0
            && self.r_min < self.r_max
            && self.r_max <= 1.0
            && self.bp_lo.is_finite()
            && self.bp_hi.is_finite()
            && self.bp_lo < self.bp_hi
            && self.baseline.is_finite()
            && self.samples_per_span >= 1;
        if ok {
            Ok(())
        } else {
            Err(VisError::InvalidConfig(
                "wrap config needs cycleHours > 0, 0 <= rMin < rMax <= 1, bpLo < bpHi, samplesPerSpan >= 1".into(),
            ))
        }
    }

    /// Linear value-to-radius map with clamping to `[bp_lo, bp_hi]`.
    pub fn radius(&self, value: f64) -> f64 {
        let v = value.clamp(self.bp_lo, self.bp_hi);
        self.r_min + (v - self.bp_lo) / (self.bp_hi - self.bp_lo) * (self.r_max - self.r_min)
    }

    /// Clockwise from 12 o'clock.
    /// Kept below `TAU` even when `t_in_cycle` is one ulp short of the cycle.
    pub fn angle(&self, t_in_cycle: f64) -> f64 {
        (TAU * t_in_cycle / self.cycle_hours).min(TAU.next_down())
    }

    pub fn polar_to_xy(theta: f64, r: f64) -> Point {
        [r * theta.sin(), r * theta.cos()]
    }
}

/// Stroke opacity shared by all segments of one patient.
pub fn stroke_alpha(non_empty_segments: usize) -> f64 {
    (1.6 / non_empty_segments.max(1) as f64).clamp(0.08, 0.8)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WrapKnot {
    pub t_in_cycle: f64,
    pub value: f64,
    pub angle: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WrapSegment {
    pub segment_idx: usize,
    pub knots: Vec<WrapKnot>,
    pub samples: Vec<Point>,
    pub knot_flags: Vec<bool>,
    pub above_baseline: Vec<bool>,
    pub stroke_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WrapEventMark {
    pub kind: EventKind,
    pub segment_idx: usize,
    pub angle_start: f64,
    /// Present for interval events; the interval may run into later segments.
    pub angle_end: Option<f64>,
    pub t_start: f64,
    pub t_end: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WrapGeometry {
    pub uid: String,
    pub segments: Vec<WrapSegment>,
    pub baseline_radius: f64,
    pub config: WrapConfig,
    pub event_marks: Vec<WrapEventMark>,
}

pub fn build_wrap(store: &PatientStore, uid: &str, cfg: &WrapConfig) -> Result<WrapGeometry, VisError> {
    cfg.validate()?;
    let series = store.derive_series(uid, cfg.bp_type).map_err(|_| VisError::UnknownUid(uid.to_owned()))?;
    let baseline_radius = cfg.radius(cfg.baseline);
    let folded = fold(&series, cfg.cycle_hours);
    let non_empty = folded.iter().filter(|s| !s.is_empty()).count();
    let alpha = stroke_alpha(non_empty);

    let segments = folded
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_empty())
        .map(|(idx, seg)| {
            let knots: Vec<WrapKnot> = seg
                .iter()
                .map(|&(t_in, value)| WrapKnot {
                    t_in_cycle: t_in,
                    value,
                    angle: cfg.angle(t_in),
                    radius: cfg.radius(value),
                })
                .collect();
            let points: Vec<Point> = knots.iter().map(|k| WrapConfig::polar_to_xy(k.angle, k.radius)).collect();
            let (samples, knot_flags) = spline::sample(&points, cfg.samples_per_span);
            let above_baseline = samples.iter().map(|p| p[0].hypot(p[1]) > baseline_radius).collect();
            WrapSegment { segment_idx: idx, knots, samples, knot_flags, above_baseline, stroke_alpha: alpha }
        })
        .collect();

    let event_marks = store
        .events(uid)
        .map_err(|_| VisError::UnknownUid(uid.to_owned()))?
        .iter()
        .map(|e| {
            let (seg, t_in) = fold_time(e.t_start, cfg.cycle_hours);
            WrapEventMark {
                kind: e.kind.clone(),
                segment_idx: seg,
                angle_start: cfg.angle(t_in),
                angle_end: e.t_end.map(|end| cfg.angle(fold_time(end, cfg.cycle_hours).1)),
                t_start: e.t_start,
                t_end: e.t_end,
            }
        })
        .collect();

    Ok(WrapGeometry { uid: uid.to_owned(), segments, baseline_radius, config: cfg.clone(), event_marks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_endpoints_and_clamp() {
        let cfg = WrapConfig::default();
        assert_eq!(cfg.radius(cfg.bp_lo), cfg.r_min);
        assert_eq!(cfg.radius(cfg.bp_hi), cfg.r_max);
        assert_eq!(cfg.radius(10.0), cfg.r_min);
        assert_eq!(cfg.radius(400.0), cfg.r_max);
    }

    #[test]
    fn angle_zero_is_twelve_oclock_clockwise() {
        let cfg = WrapConfig::default();
        let p = WrapConfig::polar_to_xy(cfg.angle(0.0), 1.0);
        assert!((p[0]).abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
        let p = WrapConfig::polar_to_xy(cfg.angle(6.0), 1.0);
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12);
    }

    #[test]
    fn angle_stays_below_full_turn() {
        for c in [0.37, 24.0, 7.1, 1e-3] {
            let cfg = WrapConfig { cycle_hours: c, ..WrapConfig::default() };
            assert!(cfg.angle(c.next_down()) < TAU);
        }
    }

    #[test]
    fn stroke_alpha_formula() {
        assert_eq!(stroke_alpha(1), 0.8);
        assert_eq!(stroke_alpha(2), 0.8);
        assert!((stroke_alpha(9) - 1.6 / 9.0).abs() < 1e-15);
        assert_eq!(stroke_alpha(30), 0.08);
    }

    #[test]
    fn invalid_config() {
        assert!(WrapConfig { r_min: 1.0, ..WrapConfig::default() }.validate().is_err());
        assert!(WrapConfig { bp_hi: 10.0, ..WrapConfig::default() }.validate().is_err());
        assert!(WrapConfig { samples_per_span: 0, ..WrapConfig::default() }.validate().is_err());
    }
}
