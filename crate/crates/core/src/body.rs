//! Infant morphology: body spec file schema, validated body model, forward
//! kinematics and point Jacobians.
//!
//! Links are capsules arranged in a tree rooted at the pelvis. Each link hangs
//! off its parent at a pivot and carries zero or more revolute degrees of
//! freedom applied in sequence about parent-frame axes. Channels that do not
//! move geometry (finger synergies, jaw, vocalization) are "virtual" DOFs:
//! they have state, limits and torque but no link of their own.
//!
//! Generalized velocities are laid out as `[root linear (3), root angular (3),
//! geometric joints...]`, with root velocities expressed in the world frame.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{axis_angle, vec3, Mat3, Pose, Vec3};

/// Muscle channels in an action.
pub const MUSCLE_CHANNELS: usize = 53;
/// Eye velocity channels in an action (yaw, pitch, torsion).
pub const EYE_CHANNELS: usize = 3;
/// Links in the infant body.
pub const LINK_COUNT: usize = 16;
/// Touch sensors in the layout.
pub const TOUCH_SENSORS: usize = 128;
/// Root translation + rotation entries at the front of the generalized velocity.
pub const ROOT_DOFS: usize = 6;

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct BodySpec {
    pub name: String,
    pub joint_damping: f64,
    pub links: Vec<LinkSpec>,
    pub virtual_dofs: Vec<VirtualDofSpec>,
    /// DOF names in action-channel order.
    pub channels: Vec<String>,
    pub eyes: EyeSpec,
    pub touch: TouchSpec,
    #[serde(default = "default_skin")]
    pub skin_color: [u8; 3],
}

fn default_skin() -> [u8; 3] {
    [224, 184, 150]
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct LinkSpec {
    pub name: String,
    pub parent: Option<String>,
    pub pivot: [f64; 3],
    pub mass: f64,
    pub capsule: CapsuleSpec,
    #[serde(default)]
    pub dofs: Vec<DofSpec>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct CapsuleSpec {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub radius: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct DofSpec {
    pub name: String,
    pub axis: [f64; 3],
    pub limit: [f64; 2],
    pub max_torque: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct VirtualDofSpec {
    pub name: String,
    pub host: String,
    pub limit: [f64; 2],
    pub max_torque: f64,
    pub inertia: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct EyeSpec {
    pub link: String,
    /// Cyclopean eye position in the host link frame.
    pub offset: [f64; 3],
    /// Yaw, pitch and torsion limits in radians.
    pub limits: [[f64; 2]; 3],
    /// Angular speed at a normalized command of 1, rad/s.
    pub max_speed: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct TouchSpec {
    pub sensing_radius: f64,
    pub regions: Vec<TouchRegionSpec>,
    pub sensors: Vec<TouchSensorSpec>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct TouchRegionSpec {
    pub name: String,
    pub count: usize,
    /// Skin area covered by the region, m².
    pub skin_area: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct TouchSensorSpec {
    pub region: String,
    pub link: String,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BodySpecError {
    #[error("link `{0}` is defined more than once")]
    DuplicateLink(String),
    #[error("link `{link}` names parent `{parent}` which is not defined before it")]
    UnknownParent { link: String, parent: String },
    #[error("exactly one root link is required, found {0}")]
    RootCount(usize),
    #[error("expected {expected} links, found {found}")]
    LinkCount { expected: usize, found: usize },
    #[error("dof `{0}` is defined more than once")]
    DuplicateDof(String),
    #[error("channels: expected {expected} entries, found {found}")]
    ChannelCount { expected: usize, found: usize },
    #[error("channels: `{0}` does not name a dof")]
    UnknownChannel(String),
    #[error("channels: dof `{0}` is listed more than once")]
    DuplicateChannel(String),
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: &'static str },
    #[error("touch: expected {expected} sensors, found {found}")]
    TouchCount { expected: usize, found: usize },
    #[error("touch region `{region}`: declared {declared} sensors, found {found}")]
    RegionCount { region: String, declared: usize, found: usize },
}

fn invalid(field: impl Into<String>, reason: &'static str) -> BodySpecError {
    BodySpecError::Invalid { field: field.into(), reason }
}

#[derive(Clone, Debug)]
pub enum DofKind {
    /// Revolute joint moving `link` about `axis` (parent frame, unit).
    Joint { link: usize, axis: Vec3 },
    /// State-only channel attached to `host`.
    Virtual { host: usize, inertia: f64 },
}

#[derive(Clone, Debug)]
pub struct Dof {
    pub name: String,
    pub kind: DofKind,
    pub lower: f64,
    pub upper: f64,
    pub max_torque: f64,
}

#[derive(Clone, Debug)]
pub struct Link {
    pub name: String,
    pub parent: Option<usize>,
    pub pivot: Vec3,
    /// Channels of this link's joint, applied in order.
    pub dofs: Vec<usize>,
    pub mass: f64,
    pub com: Vec3,
    /// Inertia about the COM in the link frame.
    pub inertia: Mat3,
    pub seg_a: Vec3,
    pub seg_b: Vec3,
    pub radius: f64,
    /// Contact proxy sphere centers (link frame), all with `radius`.
    pub proxies: Vec<Vec3>,
    /// Generalized indices of geometric DOFs from the root down to this link.
    pub chain: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct EyeModel {
    pub link: usize,
    pub offset: Vec3,
    pub limits: [[f64; 2]; 3],
    pub max_speed: f64,
}

#[derive(Clone, Debug)]
pub struct TouchSensor {
    pub link: usize,
    pub local: Vec3,
    pub region: usize,
}

#[derive(Clone, Debug)]
pub struct TouchRegion {
    pub name: String,
    pub count: usize,
    pub skin_area: f64,
}

/// Compiled touch sensor placement. Bit `i` of the touch observation belongs
/// to `sensors[i]`.
#[derive(Clone, Debug)]
pub struct TouchLayout {
    pub sensing_radius: f64,
    pub sensors: Vec<TouchSensor>,
    pub regions: Vec<TouchRegion>,
}

impl TouchLayout {
    /// Sensors per m² of skin for the named region.
    pub fn density(&self, region: &str) -> Option<f64> {
        self.regions.iter().find(|r| r.name == region).map(|r| r.count as f64 / r.skin_area)
    }

    pub fn region_index(&self, region: &str) -> Option<usize> {
        self.regions.iter().position(|r| r.name == region)
    }

    /// Bit indices of the sensors in `region`.
    pub fn region_bits(&self, region: &str) -> Vec<usize> {
        match self.region_index(region) {
            Some(r) => self.sensors.iter().enumerate().filter(|(_, s)| s.region == r).map(|(i, _)| i).collect(),
            None => Vec::new(),
        }
    }
}

/// Validated, immutable body description shared by every world that uses it.
#[derive(Clone, Debug)]
pub struct BodyModel {
    pub name: String,
    pub links: Vec<Link>,
    /// Indexed by action channel.
    pub dofs: Vec<Dof>,
    /// Channel of generalized index `ROOT_DOFS + k`.
    pub geo_channels: Vec<usize>,
    /// Generalized index of each channel, `None` for virtual DOFs.
    pub gen_index: Vec<Option<usize>>,
    pub joint_damping: f64,
    pub eyes: EyeModel,
    pub touch: TouchLayout,
    pub total_mass: f64,
    pub skin_color: [u8; 3],
    /// Channel whose command drives vocalization, if the body has one.
    pub vocal_channel: Option<usize>,
}

/// World poses of all links plus the world axis and pivot of every channel.
#[derive(Clone, Debug)]
pub struct Kinematics {
    pub links: Vec<Pose>,
    pub dof_axis: Vec<Vec3>,
    pub dof_pivot: Vec<Vec3>,
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn capsule_inertia(mass: f64, a: &Vec3, b: &Vec3, r: f64) -> Mat3 {
    let seg = b - a;
    let len = seg.norm();
    if len < 1e-12 {
        return Mat3::identity() * (0.4 * mass * r * r);
    }
    // solid cylinder spanning the segment plus both hemispherical caps
    let l = len + 2.0 * r;
    let axial = 0.5 * mass * r * r;
    let perp = mass * (3.0 * r * r + l * l) / 12.0;
    let u = seg / len;
    let uu = u * u.transpose();
    (Mat3::identity() - uu) * perp + uu * axial
}

fn proxies(a: &Vec3, b: &Vec3, r: f64) -> Vec<Vec3> {
    let len = (b - a).norm();
    if len < 1e-12 {
        return alloc::vec![*a];
    }
    let n = libm::ceil(len / r) as usize + 1;
    let n = n.max(2);
    (0..n).map(|i| a + (b - a) * (i as f64 / (n - 1) as f64)).collect()
}

impl BodyModel {
    pub fn from_spec(spec: &BodySpec) -> Result<Self, BodySpecError> {
        if spec.links.len() != LINK_COUNT {
            return Err(BodySpecError::LinkCount { expected: LINK_COUNT, found: spec.links.len() });
        }
        if !(spec.joint_damping.is_finite() && spec.joint_damping >= 0.0) {
            return Err(invalid("joint_damping", "must be finite and non-negative"));
        }
        let mut link_index: BTreeMap<&str, usize> = BTreeMap::new();
        let mut links: Vec<Link> = Vec::with_capacity(spec.links.len());
        let mut roots = 0;
        // name -> (link, axis, limit, max_torque)
        let mut joint_dofs: BTreeMap<&str, (usize, &DofSpec)> = BTreeMap::new();

        for (i, ls) in spec.links.iter().enumerate() {
            if link_index.insert(ls.name.as_str(), i).is_some() {
                return Err(BodySpecError::DuplicateLink(ls.name.clone()));
            }
            let parent = match &ls.parent {
                None => {
                    roots += 1;
                    None
                }
                Some(p) => match link_index.get(p.as_str()) {
                    Some(&pi) if pi < i => Some(pi),
                    _ => {
                        return Err(BodySpecError::UnknownParent { link: ls.name.clone(), parent: p.clone() })
                    }
                },
            };
            let field = |f: &str| alloc::format!("links.{}.{}", ls.name, f);
            if !(ls.mass.is_finite() && ls.mass > 0.0) {
                return Err(invalid(field("mass"), "must be positive"));
            }
            let c = &ls.capsule;
            if !finite(&ls.pivot) || !finite(&c.a) || !finite(&c.b) {
                return Err(invalid(field("capsule"), "non-finite coordinate"));
            }
            if !(c.radius.is_finite() && c.radius > 0.0) {
                return Err(invalid(field("capsule.radius"), "must be positive"));
            }
            let (a, b) = (vec3(c.a), vec3(c.b));
            for d in &ls.dofs {
                if joint_dofs.insert(d.name.as_str(), (i, d)).is_some() {
                    return Err(BodySpecError::DuplicateDof(d.name.clone()));
                }
                let fd = alloc::format!("links.{}.dofs.{}", ls.name, d.name);
                if !finite(&d.axis) || vec3(d.axis).norm() < 1e-9 {
                    return Err(invalid(fd, "axis must be a finite non-zero vector"));
                }
                if !(finite(&d.limit) && d.limit[0] <= d.limit[1]) {
                    return Err(invalid(fd, "limit must be an ordered finite interval"));
                }
                if !(d.max_torque.is_finite() && d.max_torque >= 0.0) {
                    return Err(invalid(fd, "max_torque must be non-negative"));
                }
            }
            links.push(Link {
                name: ls.name.clone(),
                parent,
                pivot: vec3(ls.pivot),
                dofs: Vec::new(),
                mass: ls.mass,
                com: (a + b) * 0.5,
                inertia: capsule_inertia(ls.mass, &a, &b, c.radius),
                seg_a: a,
                seg_b: b,
                radius: c.radius,
                proxies: proxies(&a, &b, c.radius),
                chain: Vec::new(),
            });
        }
        if roots != 1 {
            return Err(BodySpecError::RootCount(roots));
        }

        let mut virtual_dofs: BTreeMap<&str, &VirtualDofSpec> = BTreeMap::new();
        for v in &spec.virtual_dofs {
            if joint_dofs.contains_key(v.name.as_str()) || virtual_dofs.insert(v.name.as_str(), v).is_some() {
                return Err(BodySpecError::DuplicateDof(v.name.clone()));
            }
            let fv = alloc::format!("virtual_dofs.{}", v.name);
            if !link_index.contains_key(v.host.as_str()) {
                return Err(invalid(fv, "host does not name a link"));
            }
            if !(finite(&v.limit) && v.limit[0] <= v.limit[1]) {
                return Err(invalid(fv, "limit must be an ordered finite interval"));
            }
            if !(v.inertia.is_finite() && v.inertia > 0.0 && v.max_torque.is_finite() && v.max_torque >= 0.0) {
                return Err(invalid(fv, "inertia must be positive and max_torque non-negative"));
            }
        }

        let total_dofs = joint_dofs.len() + virtual_dofs.len();
        if spec.channels.len() != MUSCLE_CHANNELS || total_dofs != MUSCLE_CHANNELS {
            return Err(BodySpecError::ChannelCount {
                expected: MUSCLE_CHANNELS,
                found: spec.channels.len().max(total_dofs),
            });
        }
        let mut dofs = Vec::with_capacity(MUSCLE_CHANNELS);
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for (ch, name) in spec.channels.iter().enumerate() {
            if seen.insert(name.as_str(), ch).is_some() {
                return Err(BodySpecError::DuplicateChannel(name.clone()));
            }
            if let Some(&(li, d)) = joint_dofs.get(name.as_str()) {
                dofs.push(Dof {
                    name: name.clone(),
                    kind: DofKind::Joint { link: li, axis: vec3(d.axis).normalize() },
                    lower: d.limit[0],
                    upper: d.limit[1],
                    max_torque: d.max_torque,
                });
            } else if let Some(v) = virtual_dofs.get(name.as_str()) {
                dofs.push(Dof {
                    name: name.clone(),
                    kind: DofKind::Virtual { host: link_index[v.host.as_str()], inertia: v.inertia },
                    lower: v.limit[0],
                    upper: v.limit[1],
                    max_torque: v.max_torque,
                });
            } else {
                return Err(BodySpecError::UnknownChannel(name.clone()));
            }
        }

        // joint order inside each link follows the spec's dof list
        for (li, ls) in spec.links.iter().enumerate() {
            links[li].dofs = ls.dofs.iter().map(|d| seen[d.name.as_str()]).collect();
        }
        // generalized indices in link order so a chain is always increasing
        let mut gen_index = alloc::vec![None; MUSCLE_CHANNELS];
        let mut geo_channels = Vec::new();
        for link in &links {
            for &ch in &link.dofs {
                gen_index[ch] = Some(ROOT_DOFS + geo_channels.len());
                geo_channels.push(ch);
            }
        }
        for li in 0..links.len() {
            let mut chain = match links[li].parent {
                Some(p) => links[p].chain.clone(),
                None => Vec::new(),
            };
            chain.extend(links[li].dofs.iter().map(|&ch| gen_index[ch].expect("joint dof")));
            links[li].chain = chain;
        }

        let e = &spec.eyes;
        let eye_link =
            *link_index.get(e.link.as_str()).ok_or_else(|| invalid("eyes.link", "does not name a link"))?;
        if !finite(&e.offset) || e.limits.iter().any(|l| !(finite(l) && l[0] <= l[1])) {
            return Err(invalid("eyes", "offset and limits must be finite, limits ordered"));
        }
        if !(e.max_speed.is_finite() && e.max_speed > 0.0) {
            return Err(invalid("eyes.max_speed", "must be positive"));
        }

        let t = &spec.touch;
        if !(t.sensing_radius.is_finite() && t.sensing_radius > 0.0) {
            return Err(invalid("touch.sensing_radius", "must be positive"));
        }
        if t.sensors.len() != TOUCH_SENSORS {
            return Err(BodySpecError::TouchCount { expected: TOUCH_SENSORS, found: t.sensors.len() });
        }
        let mut regions = Vec::new();
        for r in &t.regions {
            if !(r.skin_area.is_finite() && r.skin_area > 0.0) {
                return Err(invalid(alloc::format!("touch.regions.{}", r.name), "skin_area must be positive"));
            }
            regions.push(TouchRegion { name: r.name.clone(), count: r.count, skin_area: r.skin_area });
        }
        let mut sensors = Vec::with_capacity(TOUCH_SENSORS);
        for (i, s) in t.sensors.iter().enumerate() {
            let region = regions
                .iter()
                .position(|r| r.name == s.region)
                .ok_or_else(|| invalid(alloc::format!("touch.sensors[{i}].region"), "unknown region"))?;
            let link = *link_index
                .get(s.link.as_str())
                .ok_or_else(|| invalid(alloc::format!("touch.sensors[{i}].link"), "unknown link"))?;
            if !finite(&s.position) {
                return Err(invalid(alloc::format!("touch.sensors[{i}].position"), "non-finite"));
            }
            sensors.push(TouchSensor { link, local: vec3(s.position), region });
        }
        for (ri, r) in regions.iter().enumerate() {
            let found = sensors.iter().filter(|s| s.region == ri).count();
            if found != r.count {
                return Err(BodySpecError::RegionCount { region: r.name.clone(), declared: r.count, found });
            }
        }

        let total_mass = links.iter().map(|l| l.mass).sum();
        let vocal_channel = dofs.iter().position(|d| d.name == "vocalization");
        Ok(Self {
            name: spec.name.clone(),
            links,
            dofs,
            geo_channels,
            gen_index,
            joint_damping: spec.joint_damping,
            eyes: EyeModel { link: eye_link, offset: vec3(e.offset), limits: e.limits, max_speed: e.max_speed },
            touch: TouchLayout { sensing_radius: t.sensing_radius, sensors, regions },
            total_mass,
            skin_color: spec.skin_color,
            vocal_channel,
        })
    }

    /// Size of the generalized velocity vector (root + geometric joints).
    pub fn gen_dofs(&self) -> usize {
        ROOT_DOFS + self.geo_channels.len()
    }

    pub fn link_by_name(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn channel_by_name(&self, name: &str) -> Option<usize> {
        self.dofs.iter().position(|d| d.name == name)
    }

    pub fn head_link(&self) -> usize {
        self.eyes.link
    }

    pub fn max_torques(&self) -> [f64; MUSCLE_CHANNELS] {
        let mut out = [0.0; MUSCLE_CHANNELS];
        for (o, d) in out.iter_mut().zip(&self.dofs) {
            *o = d.max_torque;
        }
        out
    }

    /// Channel limits clamped into a joint angle vector.
    pub fn clamp_to_limits(&self, q: &mut [f64; MUSCLE_CHANNELS]) {
        for (v, d) in q.iter_mut().zip(&self.dofs) {
            *v = v.clamp(d.lower, d.upper);
        }
    }

    pub fn forward(&self, root: &Pose, q: &[f64; MUSCLE_CHANNELS]) -> Kinematics {
        let mut poses: Vec<Pose> = Vec::with_capacity(self.links.len());
        let mut dof_axis = alloc::vec![Vec3::zeros(); MUSCLE_CHANNELS];
        let mut dof_pivot = alloc::vec![Vec3::zeros(); MUSCLE_CHANNELS];
        for link in &self.links {
            let base = match link.parent {
                None => *root,
                Some(p) => {
                    let pp = &poses[p];
                    Pose::new(pp.transform_point(&link.pivot), pp.rotation)
                }
            };
            let mut rot = base.rotation;
            for &ch in &link.dofs {
                if let DofKind::Joint { axis, .. } = &self.dofs[ch].kind {
                    dof_axis[ch] = rot * axis;
                    dof_pivot[ch] = base.position;
                    rot *= axis_angle(axis, q[ch]);
                }
            }
            poses.push(Pose::new(base.position, rot));
        }
        Kinematics { links: poses, dof_axis, dof_pivot }
    }

    /// Linear-velocity Jacobian of world point `x` rigidly attached to `link`,
    /// as sparse `(generalized index, column)` pairs.
    pub fn point_jacobian(&self, kin: &Kinematics, root: &Vec3, link: usize, x: &Vec3, out: &mut Vec<(usize, Vec3)>) {
        out.clear();
        out.push((0, Vec3::x()));
        out.push((1, Vec3::y()));
        out.push((2, Vec3::z()));
        let r = x - root;
        out.push((3, Vec3::x().cross(&r)));
        out.push((4, Vec3::y().cross(&r)));
        out.push((5, Vec3::z().cross(&r)));
        for &g in &self.links[link].chain {
            let ch = self.geo_channels[g - ROOT_DOFS];
            out.push((g, kin.dof_axis[ch].cross(&(x - kin.dof_pivot[ch]))));
        }
    }

    /// Angular-velocity Jacobian of `link`, same sparse layout.
    pub fn angular_jacobian(&self, kin: &Kinematics, link: usize, out: &mut Vec<(usize, Vec3)>) {
        out.clear();
        out.push((3, Vec3::x()));
        out.push((4, Vec3::y()));
        out.push((5, Vec3::z()));
        for &g in &self.links[link].chain {
            let ch = self.geo_channels[g - ROOT_DOFS];
            out.push((g, kin.dof_axis[ch]));
        }
    }

    /// Names of all channels in action order.
    pub fn channel_names(&self) -> Vec<String> {
        self.dofs.iter().map(|d| d.name.to_string()).collect()
    }
}
