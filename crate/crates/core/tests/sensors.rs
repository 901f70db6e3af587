mod common;

use common::*;
use sedro_core::caregiver::{Behavior, CaregiverCommand};
use sedro_core::math::{axis_angle, vec3, Pose, Vec3};
use sedro_core::protocol::{encode_observation, OBS_PAYLOAD_LEN};
use sedro_core::raycast::RayFilter;
use sedro_core::scene::{ObjectSpec, SceneObject};
use sedro_core::sensors::{
    effective_resolution, render_view, sense_retina, sense_touch, sense_vestibular, RetinaSpec, FOVEA_SIZE,
};
use sedro_core::{Action, Observation, Shape, WorldState, MUSCLE_CHANNELS};

const G: f64 = 9.81;

fn idle(w: &mut WorldState, ticks: u64) {
    for _ in 0..ticks {
        w.step(&Action::zero(), &CaregiverCommand::default()).unwrap();
    }
}

/// Upright, straight body floating in an empty scene.
fn upright(buoyancy: f64) -> WorldState {
    let mut w = empty_world();
    w.buoyancy = buoyancy;
    w.set_body_pose(Pose::new(Vec3::new(0.0, 0.0, 1.0), axis_angle(&Vec3::y(), 0.0)), [0.0; MUSCLE_CHANNELS]);
    w
}

fn sensor_positions(w: &WorldState) -> Vec<Vec3> {
    let poses = w.body.link_poses();
    w.model().touch.sensors.iter().map(|s| poses[s.link].transform_point(&s.local)).collect()
}

#[test]
fn floating_body_feels_nothing() {
    let mut w = upright(1.0);
    let mut pose = [0.0; MUSCLE_CHANNELS];
    for name in ["l_shoulder_abduct", "r_shoulder_abduct"] {
        let ch = w.model().channel_by_name(name).unwrap();
        pose[ch] = 0.8;
    }
    let root = *w.body.root();
    w.set_body_pose(root, pose);
    let bits = sense_touch(&w, &w.model().touch);
    assert_eq!(bits.count(), 0, "{:?}", bits);
}

#[test]
fn hands_on_mattress_touch_and_face_does_not() {
    let mut w = world("nursery");
    idle(&mut w, 1500);
    let layout = &w.model().touch;
    let bits = sense_touch(&w, layout);
    let hands: Vec<usize> = layout.region_bits("l_hand").into_iter().chain(layout.region_bits("r_hand")).collect();
    assert!(bits.any_of(&hands), "no hand contact");
    assert!(!bits.any_of(&layout.region_bits("face")));

    // geometric oracle: every sensor within reach of the mattress top must fire
    let mattress = w.object(2).unwrap();
    let half = mattress.shape.params();
    let top = mattress.pose.position.z + half[2];
    for (i, p) in sensor_positions(&w).iter().enumerate() {
        let inside = (p.x - mattress.pose.position.x).abs() <= half[0] && (p.y - mattress.pose.position.y).abs() <= half[1];
        if inside && p.z - top <= layout.sensing_radius {
            assert!(bits.get(i), "sensor {i} at height {} above the mattress is silent", p.z - top);
        }
    }
}

#[test]
fn feeding_touches_the_face() {
    let mut env = environment(30.0, true);
    env.world_mut().intero.energy = 0.2;
    let mut fed = false;
    for _ in 0..3000 {
        env.step(&Action::zero()).unwrap();
        if env.world().caregiver.as_ref().unwrap().behavior == Behavior::Feed {
            fed = true;
            break;
        }
    }
    assert!(fed, "caregiver never started feeding");
    let obs = env.observe();
    assert!(obs.touch.any_of(&env.world().model().touch.region_bits("face")));
}

#[test]
fn empty_scene_is_black() {
    let w = upright(1.0);
    let (fovea, periphery) = sense_retina(&w, 1.0);
    assert!(fovea.pixels.iter().all(|p| *p == 0));
    assert!(periphery.pixels.iter().all(|p| *p == 0));
}

fn place(w: &mut WorldState, id: u32, shape: Shape, at: Vec3, color: [u8; 3]) {
    let mut spec = ObjectSpec::new(id, shape, [at.x, at.y, at.z]);
    spec.color = color;
    w.insert_object(SceneObject::from_spec(&spec, 0, w.tick).unwrap()).unwrap();
}

#[test]
fn sphere_on_gaze_axis_fills_fovea_centre() {
    let mut w = upright(1.0);
    let eye = w.eye_pose();
    let ahead = eye.transform_point(&Vec3::new(1.0, 0.0, 0.0));
    place(&mut w, 500, Shape::Sphere { radius: 0.5 }, ahead, [255, 0, 0]);
    let (fovea, _) = sense_retina(&w, 1.0);
    let c = FOVEA_SIZE / 2;
    for (r, col) in [(c - 1, c - 1), (c - 1, c), (c, c - 1), (c, c)] {
        let [red, green, blue] = fovea.pixel(r, col);
        assert!(red >= 250 && green == 0 && blue == 0, "pixel ({r},{col}) = {:?}", [red, green, blue]);
    }
}

fn cluttered() -> WorldState {
    let mut w = world_with_caregiver("nursery");
    idle(&mut w, 5);
    let eye = w.eye_pose();
    let colors = [[200, 30, 30], [30, 200, 30], [30, 30, 200], [220, 220, 40], [200, 40, 200], [40, 200, 200]];
    for (k, color) in colors.iter().enumerate() {
        let angle = k as f64 * 1.05;
        let off = Vec3::new(0.6, 0.05 * angle.cos(), 0.05 * angle.sin());
        place(&mut w, 600 + k as u32, Shape::Sphere { radius: 0.02 + 0.004 * k as f64 }, eye.transform_point(&off), *color);
    }
    w
}

#[test]
fn quarter_acuity_has_at_most_64_fovea_values() {
    let w = cluttered();
    let eye = w.eye_pose();
    let filter = RayFilter::from_eye(&w);
    let full = render_view(&w, &eye, RetinaSpec::FOVEA, 1.0, &filter);
    let quarter = render_view(&w, &eye, RetinaSpec::FOVEA, 0.25, &filter);
    assert_eq!(effective_resolution(32, 0.25), 8);
    assert!(quarter.distinct_colors() <= 64);
    assert!(full.distinct_colors() > quarter.distinct_colors());
    // nearest-neighbour upsampling: every 4x4 block is a single value
    for r in 0..32 {
        for c in 0..32 {
            assert_eq!(quarter.pixel(r, c), quarter.pixel(r / 4 * 4, c / 4 * 4));
        }
    }
}

#[test]
fn distinct_values_grow_with_acuity() {
    let mut w = cluttered();
    let acuities: Vec<f64> = (1..=20).map(|k| k as f64 / 20.0).collect();
    for yaw in [-0.3, 0.0, 0.3] {
        w.set_eye_angles([yaw, 0.1, 0.0]);
        let eye = w.eye_pose();
        let filter = RayFilter::from_eye(&w);
        let counts: Vec<usize> =
            acuities.iter().map(|a| render_view(&w, &eye, RetinaSpec::FOVEA, *a, &filter).distinct_colors()).collect();
        assert!(counts.windows(2).all(|p| p[0] <= p[1]), "yaw {yaw}: {counts:?}");
    }
}

#[test]
fn vestibular_at_rest_upright() {
    let mut w = upright(1.0);
    idle(&mut w, 3);
    let v = sense_vestibular(&w);
    for a in &v[..3] {
        assert!(a.abs() < 1e-9, "{v:?}");
    }
    assert!((v[3]).abs() < 1e-12 && (v[4]).abs() < 1e-12 && (v[5] + 1.0).abs() < 1e-12, "{v:?}");
}

#[test]
fn vestibular_in_free_fall() {
    let mut w = upright(0.0);
    idle(&mut w, 1);
    assert_eq!(sense_vestibular(&w)[..3], [0.0; 3]);
    idle(&mut w, 4);
    let v = sense_vestibular(&w);
    let acc = Vec3::new(v[0], v[1], v[2]);
    assert!((acc.norm() - G).abs() < 1e-6, "acceleration {acc:?}");
    assert!((acc.normalize() - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-6);
    assert!((Vec3::new(v[3], v[4], v[5]) - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
}

#[test]
fn vestibular_follows_head_pitch() {
    for angle in [0.5f64, 1.0, std::f64::consts::FRAC_PI_2] {
        let mut w = upright(1.0);
        w.set_body_pose(Pose::new(Vec3::new(0.0, 0.0, 1.0), axis_angle(&Vec3::y(), angle)), [0.0; MUSCLE_CHANNELS]);
        let v = sense_vestibular(&w);
        // R_yᵀ(θ)·(0, 0, −1) = (sin θ, 0, −cos θ)
        let expected = [angle.sin(), 0.0, -angle.cos()];
        for k in 0..3 {
            assert!((v[3 + k] - expected[k]).abs() < 1e-12, "θ={angle}: {v:?}");
        }
    }
}

#[test]
fn observation_contract_under_random_actions() {
    let mut env = environment(10.0, true);
    for t in 0..300 {
        env.step(&random_action(5, t)).unwrap();
        let obs = env.observe();
        assert!(obs.is_finite());
        assert!((0.0..=1.0).contains(&obs.energy()));
        assert_eq!(obs.intero[1..], [0.0; 3]);
        assert_eq!(obs.tick, t + 1);
        assert_eq!(encode_observation(&obs).len(), OBS_PAYLOAD_LEN);
    }
    assert_eq!(OBS_PAYLOAD_LEN, 4332);
}

#[test]
fn blank_observation_is_well_formed() {
    let obs = Observation::blank(9);
    assert_eq!(encode_observation(&obs).len(), OBS_PAYLOAD_LEN);
    assert_eq!(vec3([0.0; 3]), Vec3::zeros());
}

mod acuity {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn distinct_count_is_monotone(
            spheres in proptest::collection::vec(
                (-0.2f64..0.2, -0.2f64..0.2, 0.005f64..0.08, any::<[u8; 3]>()), 1..8),
            a in 0.01f64..1.0,
            b in 0.01f64..1.0,
        ) {
            let mut w = upright(1.0);
            let eye = w.eye_pose();
            for (k, (y, z, r, color)) in spheres.iter().enumerate() {
                place(&mut w, 700 + k as u32, Shape::Sphere { radius: *r }, eye.transform_point(&Vec3::new(1.0, *y, *z)), *color);
            }
            let filter = RayFilter::from_eye(&w);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for spec in [RetinaSpec::FOVEA, RetinaSpec::PERIPHERY] {
                let low = render_view(&w, &eye, spec, lo, &filter).distinct_colors();
                let high = render_view(&w, &eye, spec, hi, &filter).distinct_colors();
                prop_assert!(low <= high, "acuity {} -> {}, acuity {} -> {}", lo, low, hi, high);
            }
        }
    }
}
