use proptest::prelude::*;

use edgeshed::control::Command;
use edgeshed::net::{Bus, Delivery, DeliverySpec, Endpoint, Latency, Message, Payload};

fn msg(src: Endpoint, dst: Endpoint, t: f64, c: Command) -> Message {
    Message { src, dst, payload: Payload::Command(c), send_time: t }
}

fn spec(lo: f64, hi: f64, drop: f64, seed: u64) -> DeliverySpec {
    DeliverySpec { latency: Latency::Uniform { lo, hi }, drop_probability: drop, seed, fifo: true }
}

/// Sends `n` messages spread over ten outlets, then drains the bus.
fn drain(spec: DeliverySpec, n: usize) -> Vec<Delivery> {
    let mut bus = Bus::new(spec).unwrap();
    for i in 0..n {
        let dst = Endpoint::Outlet((i % 10) as u32);
        let c = if i % 3 == 0 { Command::On } else { Command::Off };
        bus.schedule(msg(Endpoint::ControlCenter, dst, i as f64 * 0.01, c)).unwrap();
    }
    bus.advance(1e9).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn same_seed_same_deliveries(seed in any::<u64>(), drop in 0.0..1.0f64, n in 1usize..200) {
        let s = spec(0.0, 0.5, drop, seed);
        prop_assert_eq!(drain(s, n), drain(s, n));
    }

    #[test]
    fn per_pair_order_preserved(seed in any::<u64>(), n in 1usize..200) {
        let out = drain(spec(0.0, 0.5, 0.0, seed), n);
        prop_assert_eq!(out.len(), n);
        for dst in 0..10u32 {
            let sends: Vec<f64> = out
                .iter()
                .filter(|d| d.msg.dst == Endpoint::Outlet(dst))
                .map(|d| d.msg.send_time)
                .collect();
            prop_assert!(sends.windows(2).all(|w| w[0] <= w[1]));
        }
        // the drain itself is time ordered
        prop_assert!(out.windows(2).all(|w| (w[0].time, w[0].seq) <= (w[1].time, w[1].seq)));
    }

    #[test]
    fn latency_within_bounds_without_fifo(seed in any::<u64>(), lo in 0.0..0.2f64, width in 0.0..0.3f64) {
        let s = DeliverySpec { fifo: false, ..spec(lo, lo + width, 0.0, seed) };
        for d in drain(s, 100) {
            let l = d.time - d.msg.send_time;
            prop_assert!(l >= lo - 1e-12 && l <= lo + width + 1e-12, "{}", l);
        }
    }
}

#[test]
fn drop_probability_extremes() {
    assert_eq!(drain(spec(0.0, 0.1, 0.0, 4), 500).len(), 500);
    assert!(drain(spec(0.0, 0.1, 1.0, 4), 500).is_empty());
    let mut bus = Bus::new(spec(0.0, 0.1, 1.0, 4)).unwrap();
    let r = bus.schedule(msg(Endpoint::ControlCenter, Endpoint::Outlet(1), 0.0, Command::Off));
    assert_eq!(r.unwrap(), None);
    assert!(bus.trace()[0].dropped);
}

#[test]
fn deliveries_wait_for_their_time() {
    let s = DeliverySpec { latency: Latency::Fixed { s: 0.25 }, ..DeliverySpec::default() };
    let mut bus = Bus::new(s).unwrap();
    bus.schedule(msg(Endpoint::Outlet(2), Endpoint::ControlCenter, 1.0, Command::On)).unwrap();
    assert!(bus.advance(1.2).unwrap().is_empty());
    let out = bus.advance(1.25).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].time, 1.25);
    assert_eq!(bus.pending(), 0);
}

#[test]
fn clock_never_rewinds() {
    let mut bus = Bus::new(DeliverySpec::default()).unwrap();
    bus.advance(2.0).unwrap();
    assert!(bus.advance(1.0).is_err());
    assert!(bus.schedule(msg(Endpoint::ControlCenter, Endpoint::Outlet(0), 1.5, Command::Off)).is_err());
}

#[test]
fn invalid_specs_rejected() {
    assert!(Bus::new(spec(0.3, 0.1, 0.0, 0)).is_err());
    assert!(Bus::new(spec(0.0, 0.1, 1.5, 0)).is_err());
    assert!(Bus::new(DeliverySpec { latency: Latency::Fixed { s: -1.0 }, ..DeliverySpec::default() }).is_err());
    let mut bus = Bus::new(DeliverySpec::default()).unwrap();
    assert!(bus.set_drop_probability(-0.1).is_err());
}
