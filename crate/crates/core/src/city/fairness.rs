use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ids::Minutes;

use super::CityError;

pub const DEFAULT_THRESHOLD: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub zone_id: String,
    pub baseline_share: f64,
    #[serde(default)]
    pub vulnerable: bool,
}

/// Zones whose baseline shares partition the city enforcement baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct Zones(BTreeMap<String, Zone>);

impl Zones {
    pub fn new(zones: Vec<Zone>) -> Result<Self, CityError> {
        let mut map = BTreeMap::new();
        let mut sum = 0.0;
        for z in zones {
            if !(0.0..=1.0).contains(&z.baseline_share) {
                return Err(CityError::InvalidZones(format!("{} share {} outside [0,1]", z.zone_id, z.baseline_share)));
            }
            sum += z.baseline_share;
            if map.insert(z.zone_id.clone(), z).is_some() {
                return Err(CityError::InvalidZones("duplicate zone id".into()));
            }
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CityError::InvalidZones(format!("baseline shares sum to {sum}")));
        }
        Ok(Self(map))
    }

    pub fn get(&self, id: &str) -> Option<&Zone> {
        self.0.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Zone> {
        self.0.values()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnforcementEvent {
    pub zone_id: String,
    pub time: Minutes,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FairnessFlag {
    pub zone_id: String,
    pub observed_share: f64,
    pub baseline_share: f64,
    pub concentration_ratio: f64,
    pub cascade_active: bool,
    pub raised_at: Minutes,
    /// Vulnerable zone during an active cascade.
    pub human_review: bool,
}

/// Concentration of enforcement per zone over the window ending at `now`.
/// A zone is flagged when its observed share is at least `threshold` times
/// its baseline share.
/// Absorbs float rounding so exact boundary ratios (0.5 / 0.2 = 2.5) flag.
const RATIO_TOLERANCE: f64 = 1e-9;

pub fn monitor_fairness(
    events: &[EnforcementEvent],
    zones: &Zones,
    cascade_active: bool,
    threshold: f64,
    now: Minutes,
    window: Minutes,
) -> Result<Vec<FairnessFlag>, CityError> {
    if threshold.is_nan() || threshold <= 1.0 {
        return Err(CityError::InvalidThreshold(threshold));
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    let mut total = 0u64;
    for e in events {
        if zones.get(&e.zone_id).is_none() {
            return Err(CityError::UnknownZone(e.zone_id.clone()));
        }
        if e.time <= now && e.time + window > now {
            *counts.entry(e.zone_id.as_str()).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Ok(Vec::new());
    }
    let mut flags = Vec::new();
    for z in zones.iter() {
        let n = counts.get(z.zone_id.as_str()).copied().unwrap_or(0);
        if n == 0 {
            continue;
        }
        let observed = n as f64 / total as f64;
        let ratio = if z.baseline_share > 0.0 { observed / z.baseline_share } else { f64::INFINITY };
        if ratio + RATIO_TOLERANCE >= threshold {
            flags.push(FairnessFlag {
                zone_id: z.zone_id.clone(),
                observed_share: observed,
                baseline_share: z.baseline_share,
                concentration_ratio: ratio,
                cascade_active,
                raised_at: now,
                human_review: cascade_active && z.vulnerable,
            });
        }
    }
    Ok(flags)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zones() -> Zones {
        Zones::new(vec![
            Zone { zone_id: "A".into(), baseline_share: 0.2, vulnerable: true },
            Zone { zone_id: "B".into(), baseline_share: 0.8, vulnerable: false },
        ])
        .unwrap()
    }

    fn events(a: usize, b: usize) -> Vec<EnforcementEvent> {
        let mut v = vec![EnforcementEvent { zone_id: "A".into(), time: 10 }; a];
        v.extend(vec![EnforcementEvent { zone_id: "B".into(), time: 10 }; b]);
        v
    }

    #[test]
    fn half_of_events_in_a_fifth_baseline_zone() {
        let flags = monitor_fairness(&events(50, 50), &zones(), true, 2.0, 25, 30).unwrap();
        assert_eq!(flags.len(), 1);
        let f = &flags[0];
        assert_eq!(f.zone_id, "A");
        assert!((f.concentration_ratio - 2.5).abs() < 1e-12);
        assert!(f.human_review);
    }

    #[test]
    fn baseline_distribution_raises_nothing() {
        assert!(monitor_fairness(&events(20, 80), &zones(), true, 2.0, 25, 30).unwrap().is_empty());
    }

    #[test]
    fn no_review_without_cascade() {
        let flags = monitor_fairness(&events(50, 50), &zones(), false, 2.0, 25, 30).unwrap();
        assert!(!flags[0].human_review);
    }

    #[test]
    fn errors() {
        let bad = vec![EnforcementEvent { zone_id: "Z".into(), time: 1 }];
        assert!(matches!(monitor_fairness(&bad, &zones(), false, 2.0, 5, 30), Err(CityError::UnknownZone(_))));
        assert!(matches!(monitor_fairness(&[], &zones(), false, 1.0, 5, 30), Err(CityError::InvalidThreshold(_))));
        let uneven = vec![Zone { zone_id: "A".into(), baseline_share: 0.5, vulnerable: false }];
        assert!(Zones::new(uneven).is_err());
    }

    #[test]
    fn events_outside_window_are_ignored() {
        let mut ev = events(0, 10);
        ev.extend(vec![EnforcementEvent { zone_id: "A".into(), time: 100 }; 10]);
        // window (60, 90]: nothing in range
        assert!(monitor_fairness(&ev, &zones(), false, 2.0, 90, 30).unwrap().is_empty());
    }
}
