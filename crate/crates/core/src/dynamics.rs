//! Body and object integration.
//!
//! The body is integrated in generalized coordinates with a linearly implicit
//! semi-implicit Euler step: joint damping, contact stiffness, contact damping
//! and viscous friction enter the system matrix, so stiff penalty contacts stay
//! stable at the fixed tick on light links. Velocity-product (Coriolis) terms
//! are neglected.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};

use crate::body::{DofKind, MUSCLE_CHANNELS, ROOT_DOFS};
use crate::math::{integrate_rotation, Mat3, Vec3};
use crate::scene::SceneObject;
use crate::world::{advance_rotation, WorldState};
use crate::DT;

/// Force applied by the body to a dynamic object at a world point.
pub(crate) struct Reaction {
    pub object: usize,
    pub point: Vec3,
    pub force: Vec3,
}

struct Contact {
    object: usize,
    point: Vec3,
    normal: Vec3,
    depth: f64,
    damping: f64,
    friction: f64,
    object_velocity: Vec3,
    jac: Vec<(usize, Vec3)>,
}

/// A proxy close enough to a fixed object that one tick could push it deeper
/// than `DEPTH_CAP`.
struct Guard {
    link: usize,
    proxy: usize,
    object: usize,
    depth: f64,
    approach: f64,
    jn: Vec<(usize, f64)>,
}

/// Deepest overlap a single tick may produce against a fixed object.
const DEPTH_CAP: f64 = 0.003;
/// Distance within which proxies are guarded against tunnelling past the cap.
const GUARD_MARGIN: f64 = 0.05;
const MAX_PASSES: usize = 8;

fn skew_inertia(rotation: &crate::math::Quat, local: &Mat3) -> Mat3 {
    let r = rotation.to_rotation_matrix();
    r.matrix() * local * r.matrix().transpose()
}

fn point_velocity(o: &SceneObject, x: &Vec3) -> Vec3 {
    o.linear_velocity + o.angular_velocity.cross(&(x - o.pose.position))
}

fn near(o: &SceneObject, x: &Vec3, r: f64) -> bool {
    if o.hollow {
        return true;
    }
    let reach = o.bounding_radius() + r;
    (x - o.pose.position).norm_squared() <= reach * reach
}

/// Whether any body proxy overlaps a non-static object.
fn touching_nonstatic(world: &WorldState) -> bool {
    let model = world.model();
    let poses = world.body.link_poses();
    world.objects.iter().filter(|o| !o.is_static()).any(|o| {
        model.links.iter().zip(poses).any(|(link, pose)| {
            link.proxies.iter().any(|p| {
                let x = pose.transform_point(p);
                near(o, &x, link.radius) && o.signed_distance(&x).0 < link.radius
            })
        })
    })
}

fn add_outer(a: &mut DMatrix<f64>, scale: f64, u: &[(usize, f64)]) {
    for &(i, ui) in u {
        for &(j, uj) in u {
            a[(i, j)] += scale * ui * uj;
        }
    }
}

pub(crate) fn step_body(world: &mut WorldState, torques: &[f64; MUSCLE_CHANNELS]) -> Vec<Reaction> {
    let model = world.model_arc().clone();
    let physics = world.physics;
    let active = torques.iter().any(|t| *t != 0.0);
    if world.body.is_sleeping(&physics) && !active && !touching_nonstatic(world) {
        return Vec::new();
    }

    let n = model.gen_dofs();
    let body = &world.body;
    let kin = model.forward(&body.root, &body.joint_angles);
    let root = body.root.position;
    let mut v = DVector::<f64>::zeros(n);
    for i in 0..3 {
        v[i] = body.root_linear_velocity[i];
        v[3 + i] = body.root_angular_velocity[i];
    }
    for (k, &ch) in model.geo_channels.iter().enumerate() {
        v[ROOT_DOFS + k] = body.joint_velocities[ch];
    }

    let mut mass = DMatrix::<f64>::zeros(n, n);
    let mut extra = DMatrix::<f64>::zeros(n, n);
    let mut force = DVector::<f64>::zeros(n);
    let mut jv = Vec::new();
    let mut jw = Vec::new();
    let g = world.gravity * (1.0 - world.buoyancy);
    for (l, link) in model.links.iter().enumerate() {
        let pose = &kin.links[l];
        let c = pose.transform_point(&link.com);
        model.point_jacobian(&kin, &root, l, &c, &mut jv);
        model.angular_jacobian(&kin, l, &mut jw);
        let inertia = skew_inertia(&pose.rotation, &link.inertia);
        for (i, a) in &jv {
            force[*i] += link.mass * a.dot(&g);
            for (j, b) in &jv {
                mass[(*i, *j)] += link.mass * a.dot(b);
            }
        }
        for (i, a) in &jw {
            let ia = inertia * a;
            for (j, b) in &jw {
                mass[(*i, *j)] += b.dot(&ia);
            }
        }
        if physics.drag > 0.0 {
            for (i, a) in &jv {
                for (j, b) in &jv {
                    extra[(*i, *j)] += DT * physics.drag * link.mass * a.dot(b);
                }
            }
        }
    }
    let damping = physics.joint_damping.unwrap_or(model.joint_damping);
    for (k, &ch) in model.geo_channels.iter().enumerate() {
        extra[(ROOT_DOFS + k, ROOT_DOFS + k)] += DT * damping;
        force[ROOT_DOFS + k] += torques[ch];
    }

    // penalty contacts, linearized about the start of the tick
    let mut contacts = Vec::new();
    let mut guards = Vec::new();
    for (l, link) in model.links.iter().enumerate() {
        let pose = &kin.links[l];
        for (pi, p) in link.proxies.iter().enumerate() {
            let x = pose.transform_point(p);
            for (oi, o) in world.objects.iter().enumerate() {
                let fixed = !o.is_dynamic();
                let reach = if fixed { link.radius + GUARD_MARGIN } else { link.radius };
                if !near(o, &x, reach) {
                    continue;
                }
                let (d, normal) = o.signed_distance(&x);
                let depth = link.radius - d;
                if depth <= link.radius - reach {
                    continue;
                }
                let mut jac = Vec::new();
                model.point_jacobian(&kin, &root, l, &x, &mut jac);
                let object_velocity = point_velocity(o, &x);
                if fixed {
                    let jn = jac.iter().map(|(i, a)| (*i, a.dot(&normal))).collect();
                    guards.push(Guard { link: l, proxy: pi, object: oi, depth, approach: normal.dot(&object_velocity), jn });
                }
                if depth <= 0.0 {
                    continue;
                }
                let mut vel = -object_velocity;
                for (i, a) in &jac {
                    vel += a * v[*i];
                }
                let vn = vel.dot(&normal);
                let damping = if vn < 0.0 { physics.contact_damping * (1.0 - o.material.restitution) } else { 0.0 };
                let tangential = (vel - normal * vn).norm();
                let normal_force = physics.contact_stiffness * depth;
                let friction =
                    (o.material.friction * normal_force / tangential.max(1e-6)).min(physics.contact_damping);
                contacts.push(Contact { object: oi, point: x, normal, depth, damping, friction, object_velocity, jac });
            }
        }
    }
    let k = physics.contact_stiffness;
    let mut jn: Vec<(usize, f64)> = Vec::new();
    for c in &contacts {
        jn.clear();
        jn.extend(c.jac.iter().map(|(i, a)| (*i, a.dot(&c.normal))));
        let an = DT * (DT * k + c.damping);
        add_outer(&mut extra, an, &jn);
        let push = k * c.depth + (DT * k + c.damping) * c.normal.dot(&c.object_velocity);
        for &(i, u) in &jn {
            force[i] += push * u;
        }
        if c.friction > 0.0 {
            let gamma = DT * c.friction;
            let vt = c.object_velocity - c.normal * c.normal.dot(&c.object_velocity);
            for (idx, (i, a)) in c.jac.iter().enumerate() {
                let at = a - c.normal * jn[idx].1;
                force[*i] += c.friction * at.dot(&vt);
                for (j, b) in &c.jac {
                    extra[(*i, *j)] += gamma * at.dot(b);
                }
            }
        }
    }

    let rhs = &mass * &v + force * DT;
    let factor = Factor::new(&mass + extra);
    let v_free = factor.solve(&rhs);

    // Joint limits and the depth cap are one-sided velocity constraints
    // `J v >= lo`, solved for non-negative impulses.
    let mut rows: Vec<Row> = Vec::new();
    for g in &guards {
        rows.push(Row { jac: g.jn.clone(), lo: g.approach + (g.depth - DEPTH_CAP) / DT });
    }
    let mut limited = alloc::vec![false; model.geo_channels.len()];
    let mut v_new = v_free.clone();
    for _ in 0..MAX_PASSES {
        let mut changed = false;
        for (k, &ch) in model.geo_channels.iter().enumerate() {
            let i = ROOT_DOFS + k;
            let dof = &model.dofs[ch];
            let q = world.body.joint_angles[ch];
            let next = q + DT * v_new[i];
            if limited[k] || (next >= dof.lower && next <= dof.upper) {
                continue;
            }
            limited[k] = true;
            rows.push(Row { jac: alloc::vec![(i, 1.0)], lo: (dof.lower - q) / DT });
            rows.push(Row { jac: alloc::vec![(i, -1.0)], lo: (q - dof.upper) / DT });
            changed = true;
        }
        // rows are linear in velocity; the curvature of the motion can still
        // carry a proxy past the cap, so measure the true end-of-tick depth
        if !guards.is_empty() {
            let (root1, q1) = predict(&world.body.root, &world.body.joint_angles, &model.geo_channels, &v_new);
            let kin1 = model.forward(&root1, &q1);
            for (row, g) in rows.iter_mut().zip(&guards) {
                let link = &model.links[g.link];
                let o = &world.objects[g.object];
                let x = kin1.links[g.link].transform_point(&link.proxies[g.proxy]) - o.linear_velocity * DT;
                let excess = link.radius - o.signed_distance(&x).0 - DEPTH_CAP;
                if excess > 1e-6 {
                    row.lo = row.lo.max(row.dot(&v_new) + excess / DT);
                    changed = true;
                }
            }
        }
        if !changed && !rows.iter().any(|r| r.dot(&v_new) < r.lo - 1e-9) {
            break;
        }
        v_new = project(&factor, &v_free, &rows);
    }

    let mut reactions = Vec::new();
    for c in &contacts {
        if !world.objects[c.object].is_dynamic() {
            continue;
        }
        let mut vel = -c.object_velocity;
        for (i, a) in &c.jac {
            vel += a * v_new[*i];
        }
        let vn = vel.dot(&c.normal);
        let on_body = c.normal * (k * c.depth - (DT * k + c.damping) * vn) - (vel - c.normal * vn) * c.friction;
        reactions.push(Reaction { object: c.object, point: c.point, force: -on_body });
    }

    let body = &mut world.body;
    for i in 0..3 {
        body.root_linear_velocity[i] = v_new[i];
        body.root_angular_velocity[i] = v_new[3 + i];
    }
    body.root.position += body.root_linear_velocity * DT;
    let omega = body.root_angular_velocity;
    advance_rotation(&mut body.root, &omega);
    for (k, &ch) in model.geo_channels.iter().enumerate() {
        body.joint_velocities[ch] = v_new[ROOT_DOFS + k];
    }
    for (ch, dof) in model.dofs.iter().enumerate() {
        if let DofKind::Virtual { inertia, .. } = dof.kind {
            let qd = &mut body.joint_velocities[ch];
            *qd = (inertia * *qd + DT * torques[ch]) / (inertia + DT * damping);
        }
        let q = &mut body.joint_angles[ch];
        let qd = &mut body.joint_velocities[ch];
        *q += DT * *qd;
        if *q < dof.lower {
            *q = dof.lower;
            *qd = qd.max(0.0);
        } else if *q > dof.upper {
            *q = dof.upper;
            *qd = qd.min(0.0);
        }
    }


    // Without velocity-product terms the kinetic energy at the new
    // configuration can exceed what the solve produced; remove the excess.
    let solved = 0.5 * v_new.dot(&(&mass * &v_new));
    let (moved, _) = body_energy(world);
    let body = &mut world.body;
    if moved > solved {
        let s = libm::sqrt(solved / moved);
        body.root_linear_velocity *= s;
        body.root_angular_velocity *= s;
        for &ch in &model.geo_channels {
            body.joint_velocities[ch] *= s;
        }
    }

    let still = body.root_linear_velocity.iter().chain(body.root_angular_velocity.iter()).all(|x| x.abs() < physics.sleep_speed)
        && body.joint_velocities.iter().all(|x| x.abs() < physics.sleep_speed);
    let resting = still && !active && !contacts.iter().any(|c| !world.objects[c.object].is_static());
    if resting {
        body.resting_ticks = (body.resting_ticks + 1).min(physics.sleep_ticks);
        if body.resting_ticks >= physics.sleep_ticks {
            body.root_linear_velocity = Vec3::zeros();
            body.root_angular_velocity = Vec3::zeros();
            body.joint_velocities = [0.0; MUSCLE_CHANNELS];
        }
    } else {
        body.resting_ticks = 0;
    }
    reactions
}

/// Kinetic and gravitational potential energy of the body, in joules.
/// Virtual channels carry no energy.
pub(crate) fn body_energy(world: &WorldState) -> (f64, f64) {
    let model = world.model();
    let body = &world.body;
    let kin = model.forward(&body.root, &body.joint_angles);
    let root = body.root.position;
    let mut v = DVector::<f64>::zeros(model.gen_dofs());
    for i in 0..3 {
        v[i] = body.root_linear_velocity[i];
        v[3 + i] = body.root_angular_velocity[i];
    }
    for (k, &ch) in model.geo_channels.iter().enumerate() {
        v[ROOT_DOFS + k] = body.joint_velocities[ch];
    }
    let g = world.gravity * (1.0 - world.buoyancy);
    let (mut kinetic, mut potential) = (0.0, 0.0);
    let mut jac = Vec::new();
    for (l, link) in model.links.iter().enumerate() {
        let pose = &kin.links[l];
        let c = pose.transform_point(&link.com);
        model.point_jacobian(&kin, &root, l, &c, &mut jac);
        let lin: Vec3 = jac.iter().map(|(i, a)| a * v[*i]).sum();
        model.angular_jacobian(&kin, l, &mut jac);
        let ang: Vec3 = jac.iter().map(|(i, a)| a * v[*i]).sum();
        let inertia = skew_inertia(&pose.rotation, &link.inertia);
        kinetic += 0.5 * link.mass * lin.norm_squared() + 0.5 * ang.dot(&(inertia * ang));
        potential -= link.mass * g.dot(&c);
    }
    (kinetic, potential)
}

/// Deepest overlap between a body contact proxy and any object accepted by
/// `include`, in metres (0 when nothing overlaps).
pub(crate) fn max_penetration(world: &WorldState, include: impl Fn(&SceneObject) -> bool) -> f64 {
    let model = world.model();
    let mut deepest = 0.0f64;
    for (l, link) in model.links.iter().enumerate() {
        let pose = &world.body.link_poses()[l];
        for p in &link.proxies {
            let x = pose.transform_point(p);
            for o in world.objects.iter().filter(|o| include(o)) {
                if near(o, &x, link.radius) {
                    deepest = deepest.max(link.radius - o.signed_distance(&x).0);
                }
            }
        }
    }
    deepest
}

/// Root pose and joint angles after one tick at generalized velocity `v`.
fn predict(
    root: &crate::math::Pose,
    q: &[f64; MUSCLE_CHANNELS],
    geo: &[usize],
    v: &DVector<f64>,
) -> (crate::math::Pose, [f64; MUSCLE_CHANNELS]) {
    let mut next = *root;
    next.position += Vec3::new(v[0], v[1], v[2]) * DT;
    advance_rotation(&mut next, &Vec3::new(v[3], v[4], v[5]));
    let mut angles = *q;
    for (k, &ch) in geo.iter().enumerate() {
        angles[ch] += DT * v[ROOT_DOFS + k];
    }
    (next, angles)
}

struct Row {
    jac: Vec<(usize, f64)>,
    lo: f64,
}

impl Row {
    fn dot(&self, v: &DVector<f64>) -> f64 {
        self.jac.iter().map(|(i, u)| u * v[*i]).sum()
    }
}

enum Factor {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn new(system: DMatrix<f64>) -> Self {
        match system.clone().cholesky() {
            Some(ch) => Factor::Cholesky(ch),
            None => Factor::Lu(system.lu()),
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            Factor::Cholesky(ch) => ch.solve(rhs),
            Factor::Lu(lu) => lu.solve(rhs).unwrap_or_else(|| DVector::zeros(rhs.len())),
        }
    }
}

const PGS_ITERATIONS: usize = 400;

/// Projected Gauss-Seidel on the constraint-space system: finds impulses
/// `λ >= 0` so that `v = v_free + A⁻¹ Jᵀ λ` satisfies every row.
fn project(factor: &Factor, v_free: &DVector<f64>, rows: &[Row]) -> DVector<f64> {
    let n = v_free.len();
    let responses: Vec<DVector<f64>> = rows
        .iter()
        .map(|r| {
            let mut jt = DVector::zeros(n);
            for &(i, u) in &r.jac {
                jt[i] += u;
            }
            factor.solve(&jt)
        })
        .collect();
    let diag: Vec<f64> = rows.iter().zip(&responses).map(|(r, x)| r.dot(x)).collect();
    let mut lambda = alloc::vec![0.0; rows.len()];
    let mut v = v_free.clone();
    for _ in 0..PGS_ITERATIONS {
        let mut largest = 0.0f64;
        for (k, r) in rows.iter().enumerate() {
            if diag[k] <= 0.0 {
                continue;
            }
            let next = (lambda[k] + (r.lo - r.dot(&v)) / diag[k]).max(0.0);
            let delta = next - lambda[k];
            if delta != 0.0 {
                v.axpy(delta, &responses[k], 1.0);
                lambda[k] = next;
                largest = largest.max((delta * diag[k]).abs());
            }
        }
        if largest < 1e-10 {
            break;
        }
    }
    v
}

/// Moves kinematic, carried and dynamic objects one tick. Dynamic objects
/// collide with static and kinematic ones; dynamic pairs pass through each other.
pub(crate) fn step_objects(world: &mut WorldState, reactions: &[Reaction], held: Option<(usize, Vec3)>, carry_speed: f64) {
    let next_tick = world.tick + 1;
    let g = world.gravity * (1.0 - world.buoyancy);
    let physics = world.physics;
    let mut updates: Vec<(usize, Vec3, Vec3)> = Vec::new();
    for (oi, o) in world.objects.iter().enumerate() {
        if let Some((h, target)) = held {
            if h == oi {
                let delta = target - o.pose.position;
                let dist = delta.norm();
                let step = if dist > carry_speed * DT { delta * (carry_speed * DT / dist) } else { delta };
                updates.push((oi, step / DT, Vec3::zeros()));
                continue;
            }
        }
        if o.motion.is_some() || !o.is_dynamic() {
            continue;
        }
        let mut f = Vec3::zeros();
        let mut tau = Vec3::zeros();
        for r in reactions.iter().filter(|r| r.object == oi) {
            f += r.force;
            tau += (r.point - o.pose.position).cross(&r.force);
        }
        let inertia = skew_inertia(&o.pose.rotation, &o.local_inertia());
        let mut system = Matrix6::<f64>::zeros();
        let mut rhs = Vector6::<f64>::zeros();
        let mut touching = false;
        for (local, r) in o.proxies() {
            let x = o.pose.transform_point(&local);
            for (oj, other) in world.objects.iter().enumerate() {
                if oj == oi || other.is_dynamic() || !near(other, &x, r) {
                    continue;
                }
                let (d, n) = other.signed_distance(&x);
                let depth = r - d;
                if depth <= 0.0 {
                    continue;
                }
                touching = true;
                let arm = x - o.pose.position;
                let ov = point_velocity(other, &x);
                let vel = point_velocity(o, &x) - ov;
                let vn = vel.dot(&n);
                let restitution = 0.5 * (o.material.restitution + other.material.restitution);
                let damping = if vn < 0.0 { physics.contact_damping * (1.0 - restitution) } else { 0.0 };
                let k = physics.contact_stiffness;
                let mu = 0.5 * (o.material.friction + other.material.friction);
                let tangential = (vel - n * vn).norm();
                let friction = (mu * k * depth / tangential.max(1e-6)).min(physics.contact_damping);
                // velocity of x is J [v; w] with J = [I, -[arm]x]
                let jn = Vector6::new(n.x, n.y, n.z, arm.cross(&n).x, arm.cross(&n).y, arm.cross(&n).z);
                let an = DT * (DT * k + damping);
                system += jn * jn.transpose() * an;
                rhs += jn * (DT * (k * depth + (DT * k + damping) * n.dot(&ov)));
                for axis in [Vec3::x(), Vec3::y(), Vec3::z()] {
                    let t = axis - n * n.dot(&axis);
                    let jt = Vector6::new(t.x, t.y, t.z, arm.cross(&t).x, arm.cross(&t).y, arm.cross(&t).z);
                    system += jt * jt.transpose() * (DT * friction);
                    rhs += jt * (DT * friction * t.dot(&ov));
                }
            }
        }
        let (lin, ang) = if touching {
            let mut m = system;
            let mut p = rhs;
            for i in 0..3 {
                m[(i, i)] += o.mass;
                p[i] += o.mass * (o.linear_velocity[i] + DT * g[i]) + DT * f[i];
            }
            let iw = inertia * o.angular_velocity + tau * DT;
            for i in 0..3 {
                for j in 0..3 {
                    m[(3 + i, 3 + j)] += inertia[(i, j)];
                }
                p[3 + i] += iw[i];
            }
            match m.cholesky() {
                Some(ch) => {
                    let s = ch.solve(&p);
                    (Vec3::new(s[0], s[1], s[2]), Vec3::new(s[3], s[4], s[5]))
                }
                None => (o.linear_velocity, o.angular_velocity),
            }
        } else {
            let lin = o.linear_velocity + (g + f / o.mass) * DT;
            let ang = match inertia.try_inverse() {
                Some(inv) if tau != Vec3::zeros() => o.angular_velocity + inv * tau * DT,
                _ => o.angular_velocity,
            };
            (lin, ang)
        };
        updates.push((oi, lin, ang));
    }
    for (oi, lin, ang) in updates {
        let o = &mut world.objects[oi];
        o.linear_velocity = lin;
        o.angular_velocity = ang;
        o.pose.position += lin * DT;
        o.pose.rotation = integrate_rotation(&o.pose.rotation, &ang, DT);
    }
    for o in world.objects.iter_mut() {
        if let Some(m) = o.motion {
            o.pose.position = m.position_at(next_tick);
            o.linear_velocity = m.velocity_at(next_tick);
        }
    }
}
