//! Seeded synthetic cohorts with the same shape as the club datasets.
//!
//! Exposure follows a weekly match rhythm with subject-specific training
//! volume. Intrinsic injuries arrive from a daily hazard that grows with the
//! trailing 7-day load. GPS sessions are drawn from a latent-factor model;
//! a designated block of features ("planted") shares a private factor and is
//! shifted upward in the ISO week of each intrinsic injury, which links that
//! block to the weekly injury label.

use chrono::{Datelike, Duration, NaiveDate};
use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ExposureDay, ExposureRecord, GpsSession, GpsTable, IngestError, InjuryEvent, Outcome};
use crate::config::{render, ConfigError, KvConfig};
use crate::data::Dataset;

const GPS_VARIABLES: [&str; 68] = [
    "AccelerationsZone1",
    "AccelerationsZone2",
    "AccelerationsZone3",
    "AccelerationsZone4",
    "AccelerationsZone5",
    "AccelerationsZone6",
    "AverageMetabolicPower",
    "AverageSpeed",
    "HighSpeedRunning",
    "DecelerationsZone1",
    "DecelerationsZone2",
    "DecelerationsZone3",
    "DecelerationsZone4",
    "DecelerationsZone5",
    "DecelerationsZone6",
    "DistancePerMin",
    "DistanceTotal",
    "DistanceZ1",
    "DistanceZ2",
    "DistanceZ3",
    "DistanceZ4",
    "DistanceZ5",
    "DistanceZ6",
    "DurationofHI",
    "DynamicStressLoadZone1",
    "DynamicStressLoadZone2",
    "DynamicStressLoadZone3",
    "DynamicStressLoadZone4",
    "DynamicStressLoadZone5",
    "DynamicStressLoadZone6",
    "EnergyExpenditure.KCal.",
    "EquivalentMetabolicDistance",
    "ExplosiveDistance",
    "HighSpeedRunningPerMinute",
    "HMLDistance",
    "HMLDistancePerMinute",
    "HMLEfforts",
    "ImpactsZone1",
    "ImpactsZone2",
    "ImpactsZone3",
    "ImpactsZone4",
    "ImpactsZone5",
    "ImpactsZone6",
    "LeftAntPostImpact",
    "LeftAverageVertImpact",
    "LeftLateralImpact",
    "LeftMagnitudeImpact",
    "LeftVerticalImpact",
    "LowerSpeedLoading",
    "MaxSpeed",
    "MetabolicDistanceZonal",
    "MetabolicTimeZonal",
    "NumberofHighIntensityBursts",
    "RightAverageVertImpact",
    "RightLateralImpact",
    "RightMagnitudeImpact",
    "RightVerticalImpact",
    "SpeedIntensityZone1",
    "SpeedIntensityZone2",
    "SpeedIntensityZone3",
    "SpeedIntensityZone4",
    "SpeedIntensityZone5",
    "SpeedIntensityZone6",
    "Sprints",
    "StepBalance",
    "TotalLeftSteps",
    "TotalLoading",
    "TotalRightSteps",
];

/// The first `count` GPS variable names; counts above 68 get `Feature69`, ...
pub fn gps_feature_names(count: usize) -> Vec<String> {
    (0..count)
        .map(|i| match GPS_VARIABLES.get(i) {
            Some(name) => (*name).to_string(),
            None => format!("Feature{}", i + 1),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub subjects: usize,
    pub season_days: u32,
    pub season_start: NaiveDate,
    /// Daily injury probability at a trailing load of 60 minutes/day.
    pub hazard_base: f64,
    /// Log-hazard slope per extra hour of trailing daily load.
    pub hazard_load: f64,
    /// No intrinsic injury before this day.
    pub min_injury_day: u32,
    pub match_interval: u32,
    pub gps_features: usize,
    pub planted_features: usize,
    /// Upward shift, in feature standard deviations, during injury weeks.
    pub planted_shift: f64,
    /// Daily probability of a zero-days-lost knock.
    pub transient_rate: f64,
    /// Daily probability of a contact injury.
    pub contact_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            subjects: 29,
            season_days: 180,
            season_start: NaiveDate::from_ymd_opt(2014, 7, 1).expect("valid date"),
            hazard_base: 0.012,
            hazard_load: 1.5,
            min_injury_day: 14,
            match_interval: 7,
            gps_features: 68,
            planted_features: 3,
            planted_shift: 2.5,
            transient_rate: 0.0,
            contact_rate: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn take_from(cfg: &mut KvConfig) -> Result<Self, ConfigError> {
        let d = Self::default();
        let season_start = match cfg.take_str("season_start") {
            None => d.season_start,
            Some(v) => {
                NaiveDate::parse_from_str(&v, "%Y-%m-%d").map_err(|e| ConfigError::BadValue {
                    key: "season_start".into(),
                    value: v,
                    reason: e.to_string(),
                })?
            }
        };
        Ok(Self {
            subjects: cfg.take_or("subjects", d.subjects)?,
            season_days: cfg.take_or("season_days", d.season_days)?,
            season_start,
            hazard_base: cfg.take_or("hazard_base", d.hazard_base)?,
            hazard_load: cfg.take_or("hazard_load", d.hazard_load)?,
            min_injury_day: cfg.take_or("min_injury_day", d.min_injury_day)?,
            match_interval: cfg.take_or("match_interval", d.match_interval)?,
            gps_features: cfg.take_or("gps_features", d.gps_features)?,
            planted_features: cfg.take_or("planted_features", d.planted_features)?,
            planted_shift: cfg.take_or("planted_shift", d.planted_shift)?,
            transient_rate: cfg.take_or("transient_rate", d.transient_rate)?,
            contact_rate: cfg.take_or("contact_rate", d.contact_rate)?,
        })
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = KvConfig::parse(text)?;
        let out = Self::take_from(&mut cfg)?;
        cfg.finish()?;
        Ok(out)
    }

    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("subjects", self.subjects.to_string()),
            ("season_days", self.season_days.to_string()),
            (
                "season_start",
                self.season_start.format("%Y-%m-%d").to_string(),
            ),
            ("hazard_base", self.hazard_base.to_string()),
            ("hazard_load", self.hazard_load.to_string()),
            ("min_injury_day", self.min_injury_day.to_string()),
            ("match_interval", self.match_interval.to_string()),
            ("gps_features", self.gps_features.to_string()),
            ("planted_features", self.planted_features.to_string()),
            ("planted_shift", self.planted_shift.to_string()),
            ("transient_rate", self.transient_rate.to_string()),
            ("contact_rate", self.contact_rate.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        render(&self.pairs())
    }

    fn validate(&self) -> Result<(), IngestError> {
        let bad = |msg: &str| Err(IngestError::InvalidSynthConfig(msg.to_string()));
        if self.subjects == 0 {
            return bad("subjects must be at least 1");
        }
        if self.season_days == 0 {
            return bad("season_days must be at least 1");
        }
        if !(self.hazard_base >= 0.0 && self.hazard_base <= 1.0) {
            return bad("hazard_base must lie in [0, 1]");
        }
        if !self.hazard_load.is_finite() {
            return bad("hazard_load must be finite");
        }
        if self.match_interval == 0 {
            return bad("match_interval must be at least 1");
        }
        if self.gps_features == 0 {
            return bad("gps_features must be at least 1");
        }
        if self.planted_features > self.gps_features {
            return bad("planted_features cannot exceed gps_features");
        }
        if !self.planted_shift.is_finite() {
            return bad("planted_shift must be finite");
        }
        for (name, p) in [
            ("transient_rate", self.transient_rate),
            ("contact_rate", self.contact_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(IngestError::InvalidSynthConfig(format!(
                    "{name} must lie in [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub exposure: Vec<ExposureRecord>,
    pub injuries: Vec<InjuryEvent>,
    pub gps: GpsTable,
    pub planted_features: Vec<String>,
}

struct FeatureModel {
    mean: f64,
    sd: f64,
    /// Loadings on (volume, factor A, factor B, planted factor).
    loadings: [f64; 4],
    idio: f64,
    planted: bool,
}

fn feature_models(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<FeatureModel> {
    (0..cfg.gps_features)
        .map(|j| {
            let mean = rng.random_range(10.0..500.0);
            let sd = mean * rng.random_range(0.1..0.3);
            if j < cfg.planted_features {
                return FeatureModel {
                    mean,
                    sd,
                    loadings: [0.0, 0.0, 0.0, 0.9],
                    idio: 0.4,
                    planted: true,
                };
            }
            let mut loadings = [0.0; 4];
            if rng.random_bool(0.6) {
                loadings[0] = rng.random_range(0.3..0.9);
            }
            if rng.random_bool(0.5) {
                let which = if rng.random_bool(0.5) { 1 } else { 2 };
                loadings[which] = rng.random_range(0.3..0.9);
            }
            FeatureModel {
                mean,
                sd,
                loadings,
                idio: 0.6,
                planted: false,
            }
        })
        .collect()
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

/// Generates exposure records, injury events and GPS sessions.
/// Identical `(cfg, seed)` always yields identical output.
pub fn synth_generate(cfg: &SynthConfig, seed: u64) -> Result<SynthOutput, IngestError> {
    cfg.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let models = feature_models(cfg, &mut master);
    let feature_names = gps_feature_names(cfg.gps_features);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut exposure = Vec::with_capacity(cfg.subjects);
    let mut injuries = Vec::new();
    let mut sessions = Vec::new();
    let width = cfg.subjects.to_string().len().max(2);

    for s in 0..cfg.subjects {
        let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
        let subject_id = format!("P{:0width$}", s + 1);
        let train_mean: f64 = rng.random_range(25.0..65.0);
        let train_prob: f64 = rng.random_range(0.6..0.9);
        let match_prob: f64 = rng.random_range(0.2..0.95);
        let train_minutes = Normal::new(train_mean, 15.0).expect("finite sd");

        let n = cfg.season_days as usize;
        let mut training = vec![0.0; n];
        let mut matches = vec![0.0; n];
        for d in 0..n {
            let day = d as u32 + 1;
            if day.is_multiple_of(cfg.match_interval) {
                if rng.random_bool(match_prob) {
                    matches[d] = if rng.random_bool(0.7) {
                        90.0
                    } else {
                        (rng.random_range(10.0..80.0f64) * 10.0).round() / 10.0
                    };
                }
            } else if rng.random_bool(train_prob) {
                let m: f64 = train_minutes.sample(&mut rng);
                training[d] = (m.max(5.0) * 10.0).round() / 10.0;
            }
        }

        // Injury process over the generated schedule.
        let mut injury: Option<(u32, u32)> = None;
        let mut unavailable_until = 0u32;
        for d in 0..n {
            let day = d as u32 + 1;
            if day <= unavailable_until {
                training[d] = 0.0;
                matches[d] = 0.0;
                continue;
            }
            if cfg.transient_rate > 0.0 && rng.random_bool(cfg.transient_rate) {
                injuries.push(InjuryEvent {
                    subject_id: subject_id.clone(),
                    day,
                    intrinsic: true,
                    days_unavailable: 0,
                });
            }
            if cfg.contact_rate > 0.0 && rng.random_bool(cfg.contact_rate) {
                let lost = rng.random_range(1..30u32);
                injuries.push(InjuryEvent {
                    subject_id: subject_id.clone(),
                    day,
                    intrinsic: false,
                    days_unavailable: lost,
                });
                unavailable_until = day + lost;
                continue;
            }
            if injury.is_some() || day < cfg.min_injury_day || cfg.hazard_base == 0.0 {
                continue;
            }
            let lo = d.saturating_sub(6);
            let load: f64 =
                (lo..=d).map(|k| training[k] + matches[k]).sum::<f64>() / (d - lo + 1) as f64;
            let hazard = (cfg.hazard_base * (cfg.hazard_load * (load / 60.0 - 1.0)).exp()).min(1.0);
            if rng.random_bool(hazard) {
                if training[d] == 0.0 {
                    training[d] = (train_mean * 10.0).round() / 10.0;
                }
                let lost = rng.random_range(1..60u32);
                injuries.push(InjuryEvent {
                    subject_id: subject_id.clone(),
                    day,
                    intrinsic: true,
                    days_unavailable: lost,
                });
                injury = Some((day, lost));
                unavailable_until = day + lost;
            }
        }

        let injury_week = injury.map(|(day, _)| {
            let date = cfg.season_start + Duration::days(i64::from(day) - 1);
            (date.iso_week(), date)
        });

        for (d, &minutes) in training.iter().enumerate() {
            if minutes <= 0.0 {
                continue;
            }
            let date = cfg.season_start + Duration::days(d as i64);
            let shifted = injury_week
                .map(|(week, injury_date)| date.iso_week() == week && date <= injury_date)
                .unwrap_or(false);
            let factors = [
                (minutes - 45.0) / 20.0,
                std_normal.sample(&mut rng),
                std_normal.sample(&mut rng),
                std_normal.sample(&mut rng),
            ];
            let features = models
                .iter()
                .map(|fm| {
                    let latent: f64 = fm.loadings.iter().zip(&factors).map(|(l, z)| l * z).sum();
                    let mut z = latent + fm.idio * std_normal.sample(&mut rng);
                    if shifted && fm.planted {
                        z += cfg.planted_shift;
                    }
                    round4(fm.mean + fm.sd * z)
                })
                .collect();
            sessions.push(GpsSession {
                subject_id: subject_id.clone(),
                date,
                duration_minutes: minutes,
                features,
            });
        }

        let days = (0..n)
            .map(|d| ExposureDay {
                day: d as u32 + 1,
                training_minutes: training[d],
                match_minutes: matches[d],
            })
            .collect();
        let outcome = match injury {
            Some((day, _)) => Outcome::Injured { day },
            None => Outcome::Censored {
                last_day: cfg.season_days,
            },
        };
        exposure.push(ExposureRecord {
            subject_id,
            days,
            outcome,
        });
    }

    injuries.sort_by(|a, b| a.subject_id.cmp(&b.subject_id).then(a.day.cmp(&b.day)));
    Ok(SynthOutput {
        exposure,
        injuries,
        gps: GpsTable {
            feature_names: feature_names.clone(),
            sessions,
        },
        planted_features: feature_names[..cfg.planted_features].to_vec(),
    })
}

/// Settings for a small labelled table with a known informative block.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTableConfig {
    pub rows: usize,
    pub features: usize,
    /// Leading columns whose mean shifts with the class.
    pub informative: usize,
    /// Class-conditional mean shift of informative columns, in noise sds.
    pub shift: f64,
    /// Fraction of positive rows.
    pub positive_rate: f64,
}

impl Default for PlantedTableConfig {
    fn default() -> Self {
        Self {
            rows: 200,
            features: 8,
            informative: 2,
            shift: 1.5,
            positive_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTable {
    pub data: Dataset,
    pub informative: Vec<usize>,
}

/// Binary-labelled table: informative columns are `shift * y + N(0, 1)`,
/// the rest pure `N(0, 1)` noise.
pub fn synth_planted_table(
    cfg: &PlantedTableConfig,
    seed: u64,
) -> Result<PlantedTable, IngestError> {
    if cfg.rows < 2 || cfg.features == 0 || cfg.informative > cfg.features {
        return Err(IngestError::InvalidSynthConfig(
            "need rows >= 2, features >= 1 and informative <= features".into(),
        ));
    }
    if !(0.0..=1.0).contains(&cfg.positive_rate) {
        return Err(IngestError::InvalidSynthConfig(
            "positive_rate must lie in [0, 1]".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let positives = (cfg.rows as f64 * cfg.positive_rate).round() as usize;
    let y: Vec<bool> = (0..cfg.rows).map(|i| i < positives).collect();
    let mut x = DMatrix::zeros(cfg.rows, cfg.features);
    for i in 0..cfg.rows {
        for j in 0..cfg.features {
            let base: f64 = normal.sample(&mut rng);
            x[(i, j)] = if j < cfg.informative && y[i] {
                base + cfg.shift
            } else {
                base
            };
        }
    }
    let names = (0..cfg.features).map(|j| format!("x{}", j + 1)).collect();
    Ok(PlantedTable {
        data: Dataset::new(names, x, y),
        informative: (0..cfg.informative).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{filter_subjects, read_exposure, read_gps, read_injuries, FilterConfig};
    use crate::ingest::{write_exposure, write_gps, write_injuries};

    fn small() -> SynthConfig {
        SynthConfig {
            subjects: 6,
            season_days: 60,
            gps_features: 10,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = synth_generate(&small(), 1).unwrap();
        let b = synth_generate(&small(), 1).unwrap();
        assert_eq!(a, b);
        let c = synth_generate(&small(), 2).unwrap();
        assert_ne!(a.exposure, c.exposure);
    }

    #[test]
    fn zero_hazard_censors_everyone() {
        let cfg = SynthConfig {
            hazard_base: 0.0,
            ..small()
        };
        let out = synth_generate(&cfg, 7).unwrap();
        assert!(out.injuries.is_empty());
        assert!(out
            .exposure
            .iter()
            .all(|r| matches!(r.outcome, Outcome::Censored { last_day: 60 })));
    }

    #[test]
    fn default_cohort_shape() {
        let out = synth_generate(&SynthConfig::default(), 3).unwrap();
        assert_eq!(out.exposure.len(), 29);
        for r in &out.exposure {
            assert_eq!(r.days.len(), 180);
            assert!(r
                .days
                .iter()
                .enumerate()
                .all(|(i, d)| d.day == i as u32 + 1));
            assert!(r
                .days
                .iter()
                .all(|d| d.training_minutes >= 0.0 && d.match_minutes >= 0.0));
            if let Outcome::Injured { day } = r.outcome {
                assert!((14..=180).contains(&day));
            }
        }
        assert_eq!(out.gps.feature_names.len(), 68);
        assert_eq!(out.planted_features.len(), 3);
    }

    #[test]
    fn invalid_specs() {
        let cfg = SynthConfig {
            subjects: 0,
            ..small()
        };
        assert!(matches!(
            synth_generate(&cfg, 1),
            Err(IngestError::InvalidSynthConfig(_))
        ));
        let cfg = SynthConfig {
            planted_features: 11,
            ..small()
        };
        assert!(synth_generate(&cfg, 1).is_err());
    }

    #[test]
    fn csv_round_trip_preserves_domain_values() {
        let cfg = SynthConfig {
            transient_rate: 0.01,
            ..small()
        };
        let out = synth_generate(&cfg, 11).unwrap();

        let mut buf = Vec::new();
        write_exposure(&out.exposure, &mut buf).unwrap();
        let exposure = read_exposure(buf.as_slice()).unwrap();
        let mut buf = Vec::new();
        write_injuries(&out.injuries, &mut buf).unwrap();
        let injuries = read_injuries(buf.as_slice()).unwrap();
        let mut buf = Vec::new();
        write_gps(&out.gps, &mut buf).unwrap();
        let gps = read_gps(buf.as_slice()).unwrap();

        assert_eq!(injuries, out.injuries);
        assert_eq!(gps, out.gps);
        let filtered = filter_subjects(&exposure, &injuries, &FilterConfig::default());
        assert_eq!(filtered.kept, out.exposure);
    }

    #[test]
    fn config_text_round_trip() {
        let cfg = SynthConfig {
            subjects: 20,
            hazard_base: 0.02,
            ..SynthConfig::default()
        };
        assert_eq!(SynthConfig::from_text(&cfg.to_text()).unwrap(), cfg);
        assert!(SynthConfig::from_text("subjects = 3\nbogus = 1\n").is_err());
    }

    #[test]
    fn planted_table_shape() {
        let t = synth_planted_table(&PlantedTableConfig::default(), 5).unwrap();
        assert_eq!(t.data.nrows(), 200);
        assert_eq!(t.data.ncols(), 8);
        assert_eq!(t.data.positive_count(), 100);
        assert_eq!(t.informative, vec![0, 1]);
    }
}
