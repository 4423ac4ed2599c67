use chrono::{NaiveDate, NaiveTime};
use proptest::prelude::*;
use sipsense_core::hydration::{
    consumed_today, feedback_tier, hydration_level, prompt_band, snapshot, HydrationConfig, PromptBand, Sip,
};
use sipsense_core::time::{LocalZone, DAY_MS};

#[test]
fn band_and_tier_sweep() {
    let cfg = HydrationConfig::default();
    let mut prev: Option<(PromptBand, u8)> = None;
    for level in 0..=100 {
        let l = level as f64;
        let band = prompt_band(l, &cfg);
        let tier = feedback_tier(l).value();
        if let Some((pb, pt)) = prev {
            assert!(band >= pb, "band decreased at {level}");
            assert!(tier <= pt, "tier increased at {level}");
        }
        if band == PromptBand::High {
            assert!(tier <= 1, "HIGH with tier {tier} at {level}");
        }
        if band == PromptBand::Low {
            assert!(tier >= 3, "LOW with tier {tier} at {level}");
        }
        prev = Some((band, tier));
    }
    assert_eq!(prompt_band(20.0, &cfg), PromptBand::Mid);
    assert_eq!(prompt_band(80.0, &cfg), PromptBand::High);
    let tiers: Vec<u8> = [20.0, 40.0, 60.0, 80.0].iter().map(|&l| feedback_tier(l).value()).collect();
    assert_eq!(tiers, vec![4, 3, 2, 1]);
}

proptest! {
    #[test]
    fn level_is_monotone(c1 in 0.0f64..5000.0, c2 in 0.0f64..5000.0, e in 0.0f64..5000.0) {
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        prop_assert!(hydration_level(lo, e) <= hydration_level(hi, e));
        prop_assert!(hydration_level(e, hi) <= hydration_level(e, lo));
        let l = hydration_level(c1, e);
        prop_assert!((0.0..=100.0).contains(&l));
    }

    #[test]
    fn no_leakage_across_days(day_sips in prop::collection::vec(prop::collection::vec((0i64..DAY_MS, 1.0f64..500.0), 0..10), 1..5)) {
        let zone = LocalZone::utc();
        let first = zone.midnight(NaiveDate::from_ymd_opt(2024, 2, 1).unwrap());
        let mut all = Vec::new();
        for (d, sips) in day_sips.iter().enumerate() {
            let mut day: Vec<Sip> = sips.iter().map(|&(off, v)| Sip { ts: first + d as i64 * DAY_MS + off, volume_ml: v }).collect();
            day.sort_by_key(|s| s.ts);
            all.extend(day);
        }
        for (d, sips) in day_sips.iter().enumerate() {
            let expect: f64 = sips.iter().map(|s| s.1).sum();
            let now = first + d as i64 * DAY_MS + DAY_MS - 1;
            prop_assert!((consumed_today(&all, now, zone) - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn snapshot_is_consistent_and_pure(minute in 0i64..1440, sips in prop::collection::vec((0i64..1440, 1.0f64..400.0), 0..12)) {
        let zone = LocalZone::utc();
        let cfg = HydrationConfig { daily_goal_ml: 1140.0, ..Default::default() };
        let midnight = zone.at(NaiveDate::from_ymd_opt(2024, 2, 1).unwrap(), NaiveTime::MIN);
        let mut list: Vec<Sip> = sips.iter().map(|&(m, v)| Sip { ts: midnight + m * 60_000, volume_ml: v }).collect();
        list.sort_by_key(|s| s.ts);
        let now = midnight + minute * 60_000;
        let s = snapshot(now, &list, &cfg);
        prop_assert_eq!(s, snapshot(now, &list, &cfg));
        prop_assert_eq!(s.band, prompt_band(s.level_pct, &cfg));
        prop_assert_eq!(s.tier, feedback_tier(s.level_pct));
        prop_assert!(s.consumed_ml <= list.iter().map(|x| x.volume_ml).sum::<f64>() + 1e-9);
    }
}
