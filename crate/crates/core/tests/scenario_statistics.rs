use relaycast_core::units::db_to_linear;
use relaycast_core::Scenario;
use relaycast_core::scenario::LinkKind;

fn fixed_ring(m: usize, radius: f64) -> Scenario {
    let mut sc = Scenario::reference(1, m);
    sc.geometry.destination_radius_min = radius;
    sc.geometry.destination_radius_max = radius;
    sc
}

#[test]
fn direct_gain_follows_pathloss_without_shadowing() {
    let mut sc = fixed_ring(10_000, 700.0);
    sc.shadowing_std_db = 0.0;
    let ch = sc.generate(3).unwrap();
    let dist = (700.0f64.powi(2) + (10.0f64 - 1.5).powi(2)).sqrt();
    let expected = db_to_linear(-(34.53 + 38.0 * dist.log10()));
    let mean = ch.d.iter().map(|d| d.norm_sqr()).sum::<f64>() / ch.d.len() as f64;
    assert!((mean / expected - 1.0).abs() < 0.03, "ratio {}", mean / expected);
}

#[test]
fn direct_gain_includes_mean_shadowing() {
    // With 10 dB shadowing the per-draw gain is heavy tailed, so the sample
    // mean is compared against pathloss × E[shadowing] on 10⁶ links.
    let sc = fixed_ring(1_000_000, 700.0);
    let ch = sc.generate(11).unwrap();
    let pl = db_to_linear(-sc.pathloss.pathloss_db(
        (700.0f64.powi(2) + 8.5f64.powi(2)).sqrt(),
        LinkKind::SourceDestination,
    ));
    let s = 10.0 * std::f64::consts::LN_10 / 10.0;
    let expected = pl * (s * s / 2.0).exp();
    let mean = ch.d.iter().map(|d| d.norm_sqr()).sum::<f64>() / ch.d.len() as f64;
    assert!((mean / expected - 1.0).abs() < 0.1, "ratio {}", mean / expected);
}

#[test]
fn shadowing_is_lognormal_in_db() {
    let sc = fixed_ring(100_000, 700.0);
    let ch = sc.generate(5).unwrap();
    let ls = ch.large_scale.as_ref().unwrap();
    let pl_db = sc.pathloss.pathloss_db((700.0f64.powi(2) + 8.5f64.powi(2)).sqrt(), LinkKind::SourceDestination);
    let db: Vec<f64> = ls.d.iter().map(|g| 10.0 * g.log10() + pl_db).collect();
    let n = db.len() as f64;
    let mean = db.iter().sum::<f64>() / n;
    let std = (db.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 0.1, "mean {mean} dB");
    assert!((std - 10.0).abs() < 0.1, "std {std} dB");
    // No shadowing towards the relays.
    let relay_pl = sc.pathloss.pathloss_db((250.0f64.powi(2) + 25.0).sqrt(), LinkKind::SourceRelay);
    assert!((10.0 * ls.f[0].log10() + relay_pl).abs() < 1e-9);
}

#[test]
fn fading_has_unit_variance_on_every_link_family() {
    let sc = Scenario::reference(1, 100_000);
    let ch = sc.generate(9).unwrap();
    let ls = ch.large_scale.as_ref().unwrap();
    let var = |xs: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = xs.collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let d = var(&mut ch.d.iter().zip(&ls.d).map(|(c, g)| c.norm_sqr() / g));
    let g = var(&mut ch.g.iter().zip(&ls.g).map(|(c, g)| c[0].norm_sqr() / g[0]));
    assert!((d - 1.0).abs() < 0.02, "direct {d}");
    assert!((g - 1.0).abs() < 0.02, "relay {g}");

    let f: Vec<f64> = (0..20_000u64)
        .flat_map(|seed| {
            let ch = Scenario::reference(10, 1).generate(seed).unwrap();
            let ls = ch.large_scale.unwrap();
            ch.f.iter().zip(ls.f).map(|(c, g)| c.norm_sqr() / g).collect::<Vec<_>>()
        })
        .collect();
    let fv = f.iter().sum::<f64>() / f.len() as f64;
    assert!((fv - 1.0).abs() < 0.02, "source-relay {fv}");
}
