use proptest::prelude::*;
use tbict_core::credit::{negative_credit, proximity_credit, CreditPolicy, CreditState, PenaltyEvent, PenaltyKind};
use tbict_core::identity::NodeId;

const CASES: u32 = 10_000;

fn distance() -> impl Strategy<Value = f64> {
    prop_oneof![0.001f64..2.0, 2.0f64..50.0]
}

fn kind() -> impl Strategy<Value = PenaltyKind> {
    prop_oneof![Just(PenaltyKind::FalseClaim), Just(PenaltyKind::ContactViolation), Just(PenaltyKind::NetworkAttack),]
}

fn events(max_tick: u64) -> impl Strategy<Value = Vec<PenaltyEvent>> {
    proptest::collection::vec((kind(), 0..max_tick).prop_map(|(kind, tick)| PenaltyEvent { kind, tick }), 0..12)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn contacts(ds: &[f64]) -> Vec<(NodeId, f64)> {
    ds.iter().enumerate().map(|(i, &d)| (NodeId([i as u8; 32]), d)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn proximity_credit_is_non_decreasing_in_distance(a in distance(), b in distance()) {
        let p = CreditPolicy::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(proximity_credit(lo, &p).unwrap() <= proximity_credit(hi, &p).unwrap());
    }

    #[test]
    fn proximity_credit_sign_follows_the_immediate_threshold(d in distance()) {
        let p = CreditPolicy::default();
        let c = proximity_credit(d, &p).unwrap();
        prop_assert_eq!(c < 0.0, d < p.immediate_threshold);
    }

    #[test]
    fn accumulation_is_additive(
        a in proptest::collection::vec(distance(), 0..20),
        b in proptest::collection::vec(distance(), 0..20),
    ) {
        let p = CreditPolicy::default();
        let mut split = CreditState::new(NodeId::default());
        split.accumulate_proximity(&contacts(&a), &p).unwrap();
        split.accumulate_proximity(&contacts(&b), &p).unwrap();
        let mut joined = CreditState::new(NodeId::default());
        let all: Vec<f64> = a.iter().chain(&b).copied().collect();
        joined.accumulate_proximity(&contacts(&all), &p).unwrap();
        prop_assert_eq!(split.prox_credit, joined.prox_credit);
        let direct: f64 = all.iter().map(|&d| proximity_credit(d, &p).unwrap()).sum();
        prop_assert!(close(joined.prox_credit, direct));
    }

    #[test]
    fn accumulation_ignores_contact_order(mut ds in proptest::collection::vec(distance(), 0..30), seed in any::<u64>()) {
        let p = CreditPolicy::default();
        let mut fwd = CreditState::new(NodeId::default());
        fwd.accumulate_proximity(&contacts(&ds), &p).unwrap();
        let k = ds.len().max(1);
        ds.rotate_left((seed as usize) % k);
        ds.reverse();
        let mut shuffled = CreditState::new(NodeId::default());
        shuffled.accumulate_proximity(&contacts(&ds), &p).unwrap();
        prop_assert!(close(fwd.prox_credit, shuffled.prox_credit));
    }

    #[test]
    fn penalties_are_order_independent_and_non_positive(mut ev in events(1_000), extra in 1u64..1_000) {
        let p = CreditPolicy::default();
        let now = 1_000 + extra;
        let a = negative_credit(&ev, now, &p).unwrap();
        prop_assert!(a <= 0.0);
        ev.reverse();
        prop_assert!(close(a, negative_credit(&ev, now, &p).unwrap()));
    }

    #[test]
    fn penalties_fade_with_time(ev in events(1_000), now in 1_000u64..5_000, later in 0u64..5_000) {
        let p = CreditPolicy::default();
        prop_assert!(negative_credit(&ev, now, &p).unwrap() <= negative_credit(&ev, now + later, &p).unwrap());
    }

    #[test]
    fn another_penalty_never_raises_credit(ev in events(1_000), k in kind(), tick in 0u64..1_000, prox in -1e6f64..1e6) {
        let p = CreditPolicy::default();
        let now = 1_000;
        let mut s = CreditState { node: NodeId::default(), prox_credit: prox, neg_events: ev };
        let before = s.total_credit(now, &p).unwrap();
        s.record_penalty(k, tick);
        let after = s.total_credit(now, &p).unwrap();
        prop_assert!(after < before);
        prop_assert!(close(after, s.prox_credit + s.negative_credit(now, &p).unwrap()));
    }

    #[test]
    fn heavier_kinds_dominate_at_equal_age(tick in 0u64..1_000, age in 1u64..1_000) {
        let p = CreditPolicy::default();
        let at = |kind| negative_credit(&[PenaltyEvent { kind, tick }], tick + age, &p).unwrap();
        prop_assert!(at(PenaltyKind::NetworkAttack) <= at(PenaltyKind::FalseClaim));
        prop_assert!(at(PenaltyKind::FalseClaim) <= at(PenaltyKind::ContactViolation));
    }

    #[test]
    fn fresh_network_attack_pushes_credit_below_threshold(prox in -1e6f64..1e6, tick in 0u64..10_000) {
        let p = CreditPolicy::default();
        let mut s = CreditState { node: NodeId::default(), prox_credit: prox, neg_events: vec![] };
        s.record_penalty(PenaltyKind::NetworkAttack, tick);
        let now = tick + p.delta_t as u64;
        prop_assert!(s.total_credit(now, &p).unwrap() < p.alpha_d);
    }
}
