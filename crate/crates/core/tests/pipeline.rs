use std::sync::Arc;

use mmwave_peb::bounds::{
    approx_position_orientation_efim, exact_and_approx_bounds, exact_bounds, location_fim, peb_oeb,
    position_orientation_efim, transformation_matrix,
};
use mmwave_peb::channel::{
    build_scenario, EnvironmentConfig, LinkBudget, LinkDirection, Path, PathKind, Scenario, System,
};
use mmwave_peb::fim::{approx_as_full, approx_from_exact, exact_channel_fim, geometric_efim, ChannelFim};
use mmwave_peb::geometry::{los_path_geometry, make_square_ura, nlos_path_geometry, Orientation, Vec3};
use mmwave_peb::signal::{beamformer, downlink_beam_grid, uplink_beam_grid, PulseSpec, Sector, WeffConvention};
use mmwave_peb::{C64, SPEED_OF_LIGHT};

const W: f64 = 125e6;

fn lambda() -> f64 {
    SPEED_OF_LIGHT / 38e9
}

fn system(n: usize, direction: LinkDirection) -> Arc<System> {
    let bs = make_square_ura(n, lambda() / 2.0).unwrap();
    let ue = make_square_ura(n, lambda() / 2.0).unwrap();
    let sector = Sector::default();
    let (tx, dirs) = match direction {
        LinkDirection::Downlink => (&bs, downlink_beam_grid(&sector, 25).unwrap()),
        LinkDirection::Uplink => (&ue, uplink_beam_grid(&sector, 25).unwrap()),
    };
    let bf = beamformer(tx, &dirs, lambda()).unwrap();
    Arc::new(System {
        bs,
        ue,
        lambda: lambda(),
        pulse: PulseSpec::ideal_sinc(W).with_convention(WeffConvention::Paper),
        budget: LinkBudget::from_dbm(0.0, -170.0, 16, 1.0 / W),
        direction,
        beamformer: bf,
    })
}

fn clustered(sys: Arc<System>, p: Vec3, o: Orientation, qs: &[Vec3]) -> Scenario {
    let mut paths = vec![Path {
        kind: PathKind::Los,
        cluster: None,
        beta: C64::from_polar(1e-5, 0.3),
        geometry: los_path_geometry(&p, o).unwrap(),
    }];
    for (k, q) in qs.iter().enumerate() {
        paths.push(Path {
            kind: PathKind::Scatterer,
            cluster: Some(*q),
            beta: C64::from_polar(3e-6, 1.0 + k as f64),
            geometry: nlos_path_geometry(&p, o, q).unwrap(),
        });
    }
    Scenario::new(sys, p, o, paths).unwrap()
}

#[test]
fn approximate_bound_is_the_exact_pipeline_on_a_block_diagonal_fim() {
    let qs = [
        Vec3::new(-10.0, 15.0, -3.0),
        Vec3::new(14.0, 32.0, -6.0),
        Vec3::new(30.0, 8.0, -8.0),
    ];
    for dir in [LinkDirection::Uplink, LinkDirection::Downlink] {
        let s = clustered(
            system(36, dir),
            Vec3::new(5.0, 20.0, -10.0),
            Orientation::new(0.1, -0.2),
            &qs,
        );
        let full = exact_channel_fim(&s).unwrap();
        let ups = transformation_matrix(&s).unwrap();
        let block = ChannelFim {
            matrix: approx_as_full(&full),
            ..full.clone()
        };
        let via_pipeline =
            position_orientation_efim(&location_fim(&geometric_efim(&block).unwrap(), &ups).unwrap()).unwrap();
        let prop = approx_position_orientation_efim(&approx_from_exact(&full), &ups)
            .unwrap()
            .efim();
        assert!((&via_pipeline - &prop).norm() <= 1e-8 * prop.norm(), "{dir:?}");
        let (_, approx) = exact_and_approx_bounds(&s).unwrap();
        let b = peb_oeb(&via_pipeline);
        assert!((b.peb - approx.peb).abs() <= 1e-8 * b.peb);
    }
}

#[test]
fn a_strong_cluster_tightens_the_bound() {
    // at this pose the cluster's information outweighs its unknown position
    let sys = system(36, LinkDirection::Downlink);
    let p = Vec3::new(-8.0, 25.0, -10.0);
    let o = Orientation::default();
    let los = exact_bounds(&clustered(sys.clone(), p, o, &[])).unwrap();
    let more = exact_bounds(&clustered(sys, p, o, &[Vec3::new(10.0, 30.0, -4.0)])).unwrap();
    assert!(more.peb <= los.peb * (1.0 + 1e-9));
    assert!(more.oeb <= los.oeb * (1.0 + 1e-9));
}

#[test]
fn generated_environment_scenarios_are_bounded() {
    let sector = Sector::default();
    let layout = mmwave_peb::channel::EnvironmentLayout::default();
    let env = EnvironmentConfig::generate(&sector, &layout, 7).unwrap();
    let sys = system(16, LinkDirection::Downlink);
    let mut finite = 0;
    for k in 0..20 {
        let az = (35.0 + 5.5 * k as f64).to_radians();
        let p = sector.ground_point(8.0 + 2.0 * k as f64, az);
        let s = build_scenario(sys.clone(), &env, p, Orientation::default(), false).unwrap();
        assert!(s.has_los());
        let b = exact_bounds(&s).unwrap();
        if b.is_finite() {
            finite += 1;
            assert!(b.peb > 0.0 && b.oeb > 0.0);
        }
    }
    assert!(finite >= 15);
}

#[test]
fn uplink_and_downlink_share_the_delay_information() {
    // swapping the link direction swaps the arrays but leaves the delay block
    let p = Vec3::new(12.0, 18.0, -10.0);
    let o = Orientation::new(0.2, 0.1);
    let env = EnvironmentConfig::default();
    let ul = build_scenario(system(16, LinkDirection::Uplink), &env, p, o, false).unwrap();
    let dl = build_scenario(system(16, LinkDirection::Downlink), &env, p, o, false).unwrap();
    let ju = exact_channel_fim(&ul).unwrap();
    let jd = exact_channel_fim(&dl).unwrap();
    let t = 4;
    let gu = ju.matrix[(t, t)]
        / ul.system.beamformer.gain(&mmwave_peb::geometry::steering_vector(
            ul.system.tx_array(),
            ul.tx_angles(0),
            lambda(),
        ));
    let gd = jd.matrix[(t, t)]
        / dl.system.beamformer.gain(&mmwave_peb::geometry::steering_vector(
            dl.system.tx_array(),
            dl.tx_angles(0),
            lambda(),
        ));
    assert!((gu - gd).abs() <= 1e-9 * gu);
}
