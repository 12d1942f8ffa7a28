//! Seeded synthetic stroke cohort.
//!
//! Planted subpopulations (fractions of all patients, drawn independently
//! per patient):
//!
//! | group               | share | shape                                                            |
//! |---------------------|-------|------------------------------------------------------------------|
//! | sustained high      | 6 %   | every SBP >= 181 mmHg for days 0-7, then a slow decline           |
//! | U-shaped after IAT  | 6 %   | SBP dips ~55 mmHg within 20 h after an IAT interval, symHT event  |
//! | triangular          | 30 %  | from day 2 on, measured only at 08:00, 12:00 and 18:00 of the cycle |
//! | everyone else       | 58 %  | irregular log-normal gaps                                        |
//!
//! Independently of the group, 72 % of ordinary patients are admitted with
//! SBP around 172 mmHg, the rest around 148 mmHg. Sustained-high and
//! U-shaped patients are always admitted elevated.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::{
    write_dataset, BpMeasurement, ClinicalEvent, Codebook, DatasetError, EventKind, FieldDescriptor, FieldValue,
    PatientStore, StoreBuilder, Table, Uid,
};

pub const SUSTAINED_HIGH_SHARE: f64 = 0.06;
pub const U_SHAPED_SHARE: f64 = 0.06;
pub const TRIANGULAR_SHARE: f64 = 0.30;
pub const ADMISSION_ELEVATED_SHARE: f64 = 0.72;
/// Fixed measurement hours (within a 24 h cycle) of the triangular regime.
pub const TRIANGULAR_HOURS: [f64; 3] = [8.0, 12.0, 18.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SynthConfig {
    pub n_patients: usize,
    pub seed: u64,
    /// Replaces the uid of the first patient; used to plant a recognisable
    /// token when auditing prompts.
    #[serde(default)]
    pub sentinel_uid: Option<String>,
}

impl SynthConfig {
    pub fn new(n_patients: usize, seed: u64) -> Self {
        SynthConfig { n_patients, seed, sentinel_uid: None }
    }
}

/// Which patients received which planted pattern.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SynthReport {
    pub n_patients: usize,
    pub seed: u64,
    pub sustained_high: Vec<Uid>,
    pub u_shaped: Vec<Uid>,
    pub triangular: Vec<Uid>,
    pub admission_elevated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Regime {
    SustainedHigh,
    UShaped,
    Triangular,
    Irregular,
}

pub fn synthetic_codebook() -> Codebook {
    use FieldDescriptor as F;
    use Table::*;
    let yes_no: &[(i64, &str)] = &[(0, "no"), (1, "yes")];
    let mrs: &[(i64, &str)] = &[
        (0, "no symptoms"),
        (1, "no significant disability"),
        (2, "slight disability"),
        (3, "moderate disability"),
        (4, "moderately severe disability"),
        (5, "severe disability"),
        (6, "dead"),
    ];
    Codebook {
        dataset_name: "synthetic-acute-stroke".into(),
        version: "1.0".into(),
        fields: vec![
            F::numeric("age", Clinical, Some("years"), "age at admission"),
            F::categorical("male", Clinical, &[(0, "female"), (1, "male")], "sex"),
            F::categorical(
                "toast",
                Clinical,
                &[
                    (1, "LAA"),
                    (2, "SVO"),
                    (3, "CE"),
                    (4, "other determined"),
                    (5, "undetermined"),
                ],
                "TOAST etiologic classification (LAA large artery atherosclerosis, SVO small vessel occlusion, CE cardioembolism)",
            ),
            F::numeric("nihss_initial", Clinical, Some("points"), "NIH stroke scale at admission"),
            F::categorical("mrs_discharge", Clinical, mrs, "modified Rankin scale at discharge"),
            F::categorical("mrs_3mo", Clinical, mrs, "modified Rankin scale at 3 months"),
            F::categorical("urokinase", Clinical, yes_no, "urokinase administered during intra-arterial therapy"),
            F::categorical("ivt", Clinical, yes_no, "intravenous thrombolysis performed"),
            F::categorical("iat", Clinical, yes_no, "intra-arterial thrombolysis performed"),
            F::categorical("hypertension", Clinical, yes_no, "history of hypertension"),
            F::categorical("diabetes", Clinical, yes_no, "history of diabetes mellitus"),
            F::categorical("hyperlipidemia", Clinical, yes_no, "history of hyperlipidemia"),
            F::categorical("smoking", Clinical, yes_no, "current smoker"),
            F::categorical("atrial_fibrillation", Clinical, yes_no, "atrial fibrillation"),
            F::categorical("prior_stroke", Clinical, yes_no, "previous stroke or TIA"),
            F::numeric("bmi", Clinical, Some("kg/m2"), "body mass index"),
            F::numeric("glucose", Clinical, Some("mg/dL"), "initial blood glucose"),
            F::numeric("delay", Clinical, Some("hours"), "stroke onset to arrival"),
            F::numeric("ia_surgery_time", Clinical, Some("minutes"), "duration of intra-arterial procedure"),
            F::categorical(
                "hospital",
                Clinical,
                &[(1, "site A"), (2, "site B"), (3, "site C"), (4, "site D")],
                "treating hospital",
            ),
            F::numeric("los_days", Clinical, Some("days"), "length of hospital stay"),
            F::numeric("t_hours", Bp, Some("hours"), "measurement time since stroke onset"),
            F::numeric("sbp", Bp, Some("mmHg"), "systolic blood pressure"),
            F::numeric("dbp", Bp, Some("mmHg"), "diastolic blood pressure"),
            F::categorical(
                "kind",
                Events,
                &[(1, "IVT"), (2, "IAT"), (3, "recurrence"), (4, "symHT")],
                "clinical event type (IVT intravenous thrombolysis, IAT intra-arterial thrombolysis, symHT symptomatic hemorrhagic transformation)",
            ),
            F::numeric("t_start_hours", Events, Some("hours"), "event start since stroke onset"),
            F::numeric("t_end_hours", Events, Some("hours"), "event end since stroke onset; empty for point events"),
        ],
    }
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let p = 10f64.powi(decimals);
    (v * p).round() / p
}

struct PatientGen<'a> {
    rng: &'a mut ChaCha8Rng,
}

impl PatientGen<'_> {
    fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        Normal::new(mean, sd).expect("valid normal").sample(self.rng)
    }

    fn lognormal_median(&mut self, median: f64, sigma: f64) -> f64 {
        LogNormal::new(median.ln(), sigma).expect("valid lognormal").sample(self.rng)
    }

    fn flag(&mut self, p: f64) -> i64 {
        i64::from(self.rng.random_bool(p))
    }
}

/// Builds the dataset in memory.
pub fn synthesize(cfg: &SynthConfig) -> Result<(PatientStore, SynthReport), DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut builder = StoreBuilder::new(synthetic_codebook());
    let mut report = SynthReport { n_patients: cfg.n_patients, seed: cfg.seed, ..Default::default() };

    for i in 0..cfg.n_patients {
        let uid = match (&cfg.sentinel_uid, i) {
            (Some(s), 0) => Uid::new(s.clone()),
            _ => Uid::new(format!("P{:06}", i + 1)),
        };
        let mut g = PatientGen { rng: &mut rng };
        let draw: f64 = g.rng.random();
        let regime = if draw < SUSTAINED_HIGH_SHARE {
            Regime::SustainedHigh
        } else if draw < SUSTAINED_HIGH_SHARE + U_SHAPED_SHARE {
            Regime::UShaped
        } else if draw < SUSTAINED_HIGH_SHARE + U_SHAPED_SHARE + TRIANGULAR_SHARE {
            Regime::Triangular
        } else {
            Regime::Irregular
        };
        let elevated =
            matches!(regime, Regime::SustainedHigh | Regime::UShaped) || g.rng.random_bool(ADMISSION_ELEVATED_SHARE);
        if elevated {
            report.admission_elevated += 1;
        }
        match regime {
            Regime::SustainedHigh => report.sustained_high.push(uid.clone()),
            Regime::UShaped => report.u_shaped.push(uid.clone()),
            Regime::Triangular => report.triangular.push(uid.clone()),
            Regime::Irregular => {}
        }

        let age = if regime == Regime::SustainedHigh {
            g.rng.random_range(40..50) as f64
        } else {
            g.normal(68.0, 12.0).clamp(25.0, 98.0).round()
        };
        let male = g.flag(0.58);
        let toast = {
            let r: f64 = g.rng.random();
            match r {
                r if r < 0.30 => 1,
                r if r < 0.55 => 2,
                r if r < 0.75 => 3,
                r if r < 0.80 => 4,
                _ => 5,
            }
        };
        let nihss = g.lognormal_median(4.5, 0.9).round().clamp(0.0, 42.0);
        let mrs_discharge = if regime == Regime::SustainedHigh {
            1
        } else {
            ((nihss / 5.0 + g.normal(0.5, 1.0)).round() as i64).clamp(0, 6)
        };
        let mrs_3mo = (mrs_discharge + g.rng.random_range(-1..=1)).clamp(0, 6);
        let delay = round_to(g.lognormal_median(2.5, 0.7).clamp(0.1, 20.0), 2);
        let los_days = if regime == Regime::SustainedHigh {
            g.rng.random_range(12..=14) as f64
        } else {
            g.rng.random_range(5..=14) as f64
        };
        let horizon = los_days * 24.0;
        let has_ivt = g.rng.random_bool(0.2);
        let has_iat = regime == Regime::UShaped || g.rng.random_bool(0.12);
        let ia_minutes = has_iat.then(|| {
            if regime == Regime::UShaped {
                g.rng.random_range(150.0..260.0_f64).round()
            } else {
                g.rng.random_range(30.0..90.0_f64).round()
            }
        });
        let urokinase = if has_iat { g.flag(0.4) } else { 0 };

        let mut values: Vec<(String, FieldValue)> = vec![
            ("age".into(), FieldValue::Numeric(age)),
            ("male".into(), FieldValue::Code(male)),
            ("toast".into(), FieldValue::Code(toast)),
            ("nihss_initial".into(), FieldValue::Numeric(nihss)),
            ("mrs_discharge".into(), FieldValue::Code(mrs_discharge)),
            ("mrs_3mo".into(), FieldValue::Code(mrs_3mo)),
            ("urokinase".into(), FieldValue::Code(urokinase)),
            ("ivt".into(), FieldValue::Code(i64::from(has_ivt))),
            ("iat".into(), FieldValue::Code(i64::from(has_iat))),
        ];
        for (name, p) in [
            ("hypertension", 0.65),
            ("diabetes", 0.30),
            ("hyperlipidemia", 0.35),
            ("smoking", 0.30),
            ("atrial_fibrillation", 0.18),
            ("prior_stroke", 0.20),
        ] {
            let v = g.flag(p);
            values.push((name.into(), FieldValue::Code(v)));
        }
        let bmi = if g.rng.random_bool(0.05) {
            FieldValue::Missing
        } else {
            FieldValue::Numeric(round_to(g.normal(24.0, 3.5).clamp(14.0, 45.0), 1))
        };
        let glucose = if g.rng.random_bool(0.03) {
            FieldValue::Missing
        } else {
            FieldValue::Numeric(g.normal(135.0, 40.0).clamp(60.0, 450.0).round())
        };
        values.push(("bmi".into(), bmi));
        values.push(("glucose".into(), glucose));
        values.push(("delay".into(), FieldValue::Numeric(delay)));
        values.push(("ia_surgery_time".into(), ia_minutes.map_or(FieldValue::Missing, FieldValue::Numeric)));
        let hospital = g.rng.random_range(1..=4);
        values.push(("hospital".into(), FieldValue::Code(hospital)));
        values.push(("los_days".into(), FieldValue::Numeric(los_days)));

        // Events.
        let admit = delay;
        let mut events = Vec::new();
        if has_ivt {
            let t = round_to(admit + g.rng.random_range(0.2..1.0), 3);
            events.push(ClinicalEvent { kind: EventKind::Ivt, t_start: t, t_end: None });
        }
        let iat_window = ia_minutes.map(|mins| {
            let start = round_to(admit + g.rng.random_range(0.5..3.0), 3);
            let end = round_to(start + mins / 60.0, 3);
            events.push(ClinicalEvent { kind: EventKind::Iat, t_start: start, t_end: Some(end) });
            (start, end)
        });
        if regime == Regime::UShaped {
            let (_, end) = iat_window.expect("U-shaped patients always have IAT");
            let t = round_to(end + g.rng.random_range(8.0..14.0), 3);
            events.push(ClinicalEvent { kind: EventKind::SymHt, t_start: t, t_end: None });
        } else if g.rng.random_bool(0.01) {
            let t = round_to(g.rng.random_range(admit..horizon), 3);
            events.push(ClinicalEvent { kind: EventKind::SymHt, t_start: t, t_end: None });
        }
        if g.rng.random_bool(0.03) {
            let t = round_to(g.rng.random_range(24.0_f64.max(admit)..horizon), 3);
            events.push(ClinicalEvent { kind: EventKind::Recurrence, t_start: t, t_end: None });
        }

        // Measurement times.
        let mut times = Vec::new();
        let mut t = admit;
        while t <= horizon {
            times.push(t);
            let in_acute = t - admit < 24.0;
            let in_u = iat_window.is_some_and(|(_, e)| regime == Regime::UShaped && t >= e && t < e + 24.0);
            let median_gap = if in_acute || in_u { 2.2 } else { 5.0 };
            t += g.lognormal_median(median_gap, 0.6).max(0.05);
            if regime == Regime::Triangular && t >= 48.0 {
                break;
            }
        }
        if regime == Regime::Triangular {
            let mut day = 2.0_f64;
            while day * 24.0 + TRIANGULAR_HOURS[0] <= horizon {
                for h in TRIANGULAR_HOURS {
                    let tt = day * 24.0 + h;
                    if tt <= horizon {
                        times.push(tt);
                    }
                }
                day += 1.0;
            }
        }

        // Values.
        let s0 = if elevated { g.normal(172.0, 9.0) } else { g.normal(148.0, 8.0) };
        let target = g.normal(135.0, 8.0);
        let tau = g.rng.random_range(24.0..72.0);
        let mut last_t = f64::NEG_INFINITY;
        let mut series = Vec::with_capacity(times.len());
        for &raw_t in &times {
            let mut tt = round_to(raw_t, 3);
            if tt <= last_t {
                tt = round_to(last_t + 0.001, 3);
            }
            last_t = tt;
            let since = tt - admit;
            let noise = g.normal(0.0, 7.0);
            let mut sbp = match regime {
                Regime::SustainedHigh if tt < 8.0 * 24.0 => g.normal(192.0, 6.0).max(181.0),
                Regime::SustainedHigh => {
                    let k = ((tt - 8.0 * 24.0) / (3.0 * 24.0)).min(1.0);
                    190.0 - k * 62.0 + noise
                }
                _ => target + (s0 - target) * (-since / tau).exp() + noise,
            };
            if let (Regime::UShaped, Some((_, end))) = (regime, iat_window) {
                if tt >= end && tt <= end + 20.0 {
                    sbp -= 55.0 * (std::f64::consts::PI * (tt - end) / 20.0).sin();
                }
            }
            let sbp = sbp.clamp(70.0, 250.0).round();
            let sbp = if regime == Regime::SustainedHigh && tt < 8.0 * 24.0 { sbp.max(181.0) } else { sbp };
            let ratio = g.rng.random_range(0.55..0.65);
            let dbp = (sbp * ratio + g.normal(0.0, 4.0)).clamp(35.0, sbp - 10.0).round();
            series.push(BpMeasurement { t: tt, sbp, dbp });
        }

        builder.push_patient(uid.clone(), values);
        for m in series {
            builder.push_bp(uid.as_str(), m);
        }
        for e in events {
            builder.push_event(uid.as_str(), e);
        }
    }
    Ok((builder.finish()?, report))
}

/// Generates and writes `clinical.csv`, `bp.csv`, `events.csv` and
/// `codebook.json` into `out_dir`.
pub fn generate_synthetic(n_patients: usize, seed: u64, out_dir: &Path) -> Result<SynthReport, DatasetError> {
    let (store, report) = synthesize(&SynthConfig::new(n_patients, seed))?;
    write_dataset(&store, out_dir)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::BpType;

    #[test]
    fn sustained_high_patients_stay_above_180_for_a_week() {
        let (store, report) = synthesize(&SynthConfig::new(400, 3)).unwrap();
        assert!(!report.sustained_high.is_empty());
        for uid in &report.sustained_high {
            let series = store.derive_series(uid.as_str(), BpType::Sbp).unwrap();
            let mut days = std::collections::BTreeSet::new();
            for (t, v) in series.iter().filter(|(t, _)| *t < 8.0 * 24.0) {
                assert!(*v >= 180.0, "{uid} at {t}: {v}");
                days.insert((*t / 24.0).floor() as i64);
            }
            assert!(days.len() >= 7, "{uid} covers only {} days", days.len());
        }
    }

    #[test]
    fn triangular_patients_use_fixed_hours_after_day_two() {
        let (store, report) = synthesize(&SynthConfig::new(200, 5)).unwrap();
        assert!(!report.triangular.is_empty());
        for uid in &report.triangular {
            for m in store.bp_series(uid.as_str()).unwrap().iter().filter(|m| m.t >= 48.0) {
                let h = m.t % 24.0;
                assert!(TRIANGULAR_HOURS.contains(&h), "{uid}: {}", m.t);
            }
        }
    }

    #[test]
    fn u_shaped_patients_have_iat_and_symht() {
        let (store, report) = synthesize(&SynthConfig::new(300, 9)).unwrap();
        assert!(!report.u_shaped.is_empty());
        for uid in &report.u_shaped {
            let evs = store.events(uid.as_str()).unwrap();
            let iat = evs.iter().find(|e| e.kind == EventKind::Iat).unwrap();
            assert!(iat.t_end.unwrap() > iat.t_start);
            assert!(evs.iter().any(|e| e.kind == EventKind::SymHt));
        }
    }

    #[test]
    fn measurement_rate_is_a_few_per_day() {
        let (store, _) = synthesize(&SynthConfig::new(300, 2)).unwrap();
        let mut per_day = Vec::new();
        for row in 0..store.len() {
            let s = store.bp_at(row);
            let span = s.last().unwrap().t - s[0].t;
            per_day.push(s.len() as f64 / (span / 24.0).max(1.0));
        }
        per_day.sort_by(f64::total_cmp);
        let median = per_day[per_day.len() / 2];
        assert!((2.0..=6.0).contains(&median), "median rate {median}");
    }

    #[test]
    fn sentinel_uid_replaces_first_patient() {
        let mut cfg = SynthConfig::new(5, 1);
        cfg.sentinel_uid = Some("ZQX-SENTINEL-93".into());
        let (store, _) = synthesize(&cfg).unwrap();
        assert_eq!(store.uid_at(0).as_str(), "ZQX-SENTINEL-93");
    }
}
