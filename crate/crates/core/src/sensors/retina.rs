use alloc::vec::Vec;

use crate::math::{Pose, Vec3};
use crate::raycast::{cast, RayFilter};
use crate::world::WorldState;

pub const FOVEA_SIZE: usize = 32;
pub const PERIPHERY_SIZE: usize = 16;
pub const FOVEA_FOV_DEG: f64 = 20.0;
pub const PERIPHERY_FOV_DEG: f64 = 120.0;

/// Square pinhole view: `size × size` pixels over a `fov_deg` field of view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetinaSpec {
    pub size: usize,
    pub fov_deg: f64,
}

impl RetinaSpec {
    pub const FOVEA: Self = Self { size: FOVEA_SIZE, fov_deg: FOVEA_FOV_DEG };
    pub const PERIPHERY: Self = Self { size: PERIPHERY_SIZE, fov_deg: PERIPHERY_FOV_DEG };
}

/// Row-major RGB image, row 0 at the top.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RetinaImage {
    pub size: usize,
    pub pixels: Vec<u8>,
}

impl RetinaImage {
    pub fn black(size: usize) -> Self {
        Self { size, pixels: alloc::vec![0; size * size * 3] }
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.size + col) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn distinct_colors(&self) -> usize {
        let mut seen: Vec<[u8; 3]> = self.pixels.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

/// Rendered resolution for `acuity`: `ceil(size × acuity)`, at least 1.
pub fn effective_resolution(size: usize, acuity: f64) -> usize {
    let a = acuity.clamp(0.0, 1.0);
    (libm::ceil(size as f64 * a) as usize).clamp(1, size)
}

/// Full-resolution lines (rows or columns) sampled at reduced resolution `n`,
/// ascending. Lines are taken in van der Corput order starting from the
/// centre, so the lines used at resolution `n` are a subset of those used at
/// any higher resolution and are spread evenly across the axis.
pub fn sample_lines(size: usize, n: usize) -> Vec<usize> {
    let n = n.min(size);
    let mut used = alloc::vec![false; size];
    let mut lines = Vec::with_capacity(n);
    let mut k: u32 = 0;
    while lines.len() < n {
        let x = (k.reverse_bits() as f64 / 4_294_967_296.0 + 0.5) % 1.0;
        let line = ((x * size as f64) as usize).min(size - 1);
        if !used[line] {
            used[line] = true;
            lines.push(line);
        }
        k += 1;
    }
    lines.sort_unstable();
    lines
}

/// Renders one view from `eye` (x forward, y left, z up). At reduced acuity
/// one ray is cast per cell of an `n × n` grid whose rays are a subset of the
/// full-resolution pixel centres, then upsampled by nearest neighbour.
/// Surfaces are flat-colored, dimmed by the grazing angle; misses are black.
pub fn render_view(world: &WorldState, eye: &Pose, spec: RetinaSpec, acuity: f64, filter: &RayFilter) -> RetinaImage {
    let size = spec.size;
    let n = effective_resolution(size, acuity);
    let lines = sample_lines(size, n);
    let half = libm::tan(spec.fov_deg.to_radians() * 0.5);
    let forward = eye.rotation * Vec3::x();
    let right = eye.rotation * -Vec3::y();
    let up = eye.rotation * Vec3::z();
    let centre = |i: usize| (2.0 * (i as f64 + 0.5) / size as f64 - 1.0) * half;
    let mut low = alloc::vec![[0u8; 3]; n * n];
    for (r, &row) in lines.iter().enumerate() {
        let v = -centre(row);
        for (c, &col) in lines.iter().enumerate() {
            let dir = (forward + right * centre(col) + up * v).normalize();
            if let Ok(Some(hit)) = cast(world, &eye.position, &dir, filter) {
                let shade = 0.5 + 0.5 * dir.dot(&hit.normal).abs();
                low[r * n + c] = hit.color.map(|c| libm::round(c as f64 * shade) as u8);
            }
        }
    }
    let mut out = RetinaImage::black(size);
    for row in 0..size {
        for col in 0..size {
            let c = low[(row * n / size) * n + col * n / size];
            let i = (row * size + col) * 3;
            out.pixels[i..i + 3].copy_from_slice(&c);
        }
    }
    out
}

/// Fovea and periphery from the agent's current eye pose. The head link is
/// transparent to its own eyes. `acuity` is clamped into `(0, 1]`.
pub fn sense_retina(world: &WorldState, acuity: f64) -> (RetinaImage, RetinaImage) {
    let eye = world.eye_pose();
    let filter = RayFilter::from_eye(world);
    (
        render_view(world, &eye, RetinaSpec::FOVEA, acuity, &filter),
        render_view(world, &eye, RetinaSpec::PERIPHERY, acuity, &filter),
    )
}
