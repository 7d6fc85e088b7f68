use std::sync::OnceLock;

use wdma_vlc::channel::{second_order_power, PowerBreakdown, PowerMatrix};
use wdma_vlc::scenario::ScenarioConfig;

fn scenario1() -> &'static PowerBreakdown {
    static CELL: OnceLock<PowerBreakdown> = OnceLock::new();
    CELL.get_or_init(|| {
        ScenarioConfig::scenario1()
            .channel_model()
            .unwrap()
            .compute_breakdown()
    })
}

fn close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs())
}

/// Index of the point at `p` after applying `map`.
fn permutation(points: &[[f64; 3]], map: impl Fn([f64; 3]) -> [f64; 3]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let q = map(*p);
            points
                .iter()
                .position(|r| r.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-12))
                .expect("scene is closed under the symmetry")
        })
        .collect()
}

#[test]
fn scenario1_symmetry_group() {
    let cfg = ScenarioConfig::scenario1();
    let aps: Vec<_> = cfg.access_points.iter().map(|a| a.position_m).collect();
    let users: Vec<_> = cfg.receivers.iter().map(|r| r.position_m).collect();
    let maps: [fn([f64; 3]) -> [f64; 3]; 3] = [
        |[x, y, z]| [4.0 - x, y, z],
        |[x, y, z]| [x, 4.0 - y, z],
        |[x, y, z]| [y, x, z],
    ];
    for b in [
        &scenario1().los,
        &scenario1().first_order,
        &scenario1().second_order,
    ] {
        for map in maps {
            let (sl, sk) = (permutation(&aps, map), permutation(&users, map));
            for (k, &mk) in sk.iter().enumerate() {
                for (l, &ml) in sl.iter().enumerate() {
                    for n in 0..4 {
                        let (a, c) = (b.get(k, l, n), b.get(mk, ml, n));
                        assert!(close(a, c, 1e-9), "p[{k}][{l}][{n}] = {a} vs {c}");
                    }
                }
            }
        }
    }
}

#[test]
fn overhead_ap_dominates_and_diagonal_is_uniform() {
    let pm = scenario1().total();
    for n in 0..4 {
        for k in 0..4 {
            for l in 0..4 {
                if l != k {
                    assert!(pm.get(k, k, n) > pm.get(k, l, n));
                }
            }
            assert!(close(
                scenario1().los.get(k, k, n),
                scenario1().los.get(0, 0, n),
                1e-12
            ));
        }
    }
}

#[test]
fn factorised_second_order_matches_direct_sum() {
    let cfg = ScenarioConfig::scenario1();
    let model = cfg.channel_model().unwrap();
    let direct = second_order_power(
        &model.emitters[0],
        &model.wavelengths[0],
        &model.receivers[0],
        &model.second_order_elements,
    )
    .unwrap();
    let factorised = scenario1().second_order.get(0, 0, 0);
    assert!(close(direct, factorised, 1e-9), "{direct} vs {factorised}");
}

fn coarse(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.element_edge_first_order_m = 0.25;
    cfg.element_edge_second_order_m = 0.5;
    cfg
}

#[test]
fn doubling_transmit_power_doubles_every_entry() {
    let base = coarse(ScenarioConfig::scenario2());
    let mut doubled = base.clone();
    for w in &mut doubled.wavelengths {
        w.per_ld_power_w *= 2.0;
    }
    let (a, b) = (
        base.compute_power_matrix().unwrap(),
        doubled.compute_power_matrix().unwrap(),
    );
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        assert_eq!(2.0 * x, *y);
    }
}

#[test]
fn wider_fov_never_loses_power() {
    let mut prev: Option<PowerMatrix> = None;
    for fov in [10.0, 25.0, 40.0, 55.0, 70.0, 85.0] {
        let mut cfg = coarse(ScenarioConfig::scenario2());
        for r in &mut cfg.receivers {
            r.fov_deg = fov;
        }
        let pm = cfg.compute_power_matrix().unwrap();
        if let Some(p) = &prev {
            for (a, b) in p.as_slice().iter().zip(pm.as_slice()) {
                assert!(b >= a, "fov {fov}: {b} < {a}");
            }
        }
        prev = Some(pm);
    }
}

#[test]
fn no_users_gives_empty_matrix() {
    let mut cfg = coarse(ScenarioConfig::scenario1());
    cfg.receivers.clear();
    cfg.qos.thresholds_db.clear();
    let pm = cfg.compute_power_matrix().unwrap();
    assert_eq!(pm.dims(), (0, 4, 4));
    assert!(pm.as_slice().is_empty());
}

#[test]
fn golden_reflection_ratios() {
    // per-watt gains of the overhead link in scenario 1, red
    let b = scenario1();
    let p_tx = 12.0 * 0.8;
    let checks = [
        (b.los.get(0, 0, 0) / p_tx, 1.5915e-4),
        (b.first_order.get(0, 0, 0) / p_tx, 8.781e-6),
        (b.second_order.get(0, 0, 0) / p_tx, 1.134e-5),
    ];
    for (got, want) in checks {
        assert!(close(got, want, 1e-3), "{got} vs {want}");
    }
    assert!(b.first_order.get(0, 0, 0) < b.los.get(0, 0, 0));
}
