//! Scene geometry in nanometres and its rasterization onto the Yee grid.
//!
//! Permittivity is sampled at cell centers (no subpixel averaging), so
//! curved boundaries are staircased at the cell size.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Axis-aligned rectangle in nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    fn empty() -> Self {
        Self {
            x_min: f64::INFINITY,
            y_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_max: f64::NEG_INFINITY,
        }
    }

    fn include(&mut self, x: f64, y: f64) {
        self.x_min = self.x_min.min(x);
        self.y_min = self.y_min.min(y);
        self.x_max = self.x_max.max(x);
        self.y_max = self.y_max.max(y);
    }

    fn union(&mut self, other: &Rect) {
        self.include(other.x_min, other.y_min);
        self.include(other.x_max, other.y_max);
    }

    pub fn is_empty(&self) -> bool {
        !(self.x_min <= self.x_max && self.y_min <= self.y_max)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x_min >= self.x_min
            && other.x_max <= self.x_max
            && other.y_min >= self.y_min
            && other.y_max <= self.y_max
    }
}

/// Annular resonator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ring {
    pub center: (f64, f64),
    pub r_out: f64,
    pub r_in: f64,
    pub eps: f64,
}

impl Ring {
    fn contains(&self, x: f64, y: f64) -> bool {
        let r2 = (x - self.center.0).powi(2) + (y - self.center.1).powi(2);
        r2 <= self.r_out * self.r_out && r2 >= self.r_in * self.r_in
    }

    fn bounds(&self) -> Rect {
        Rect {
            x_min: self.center.0 - self.r_out,
            y_min: self.center.1 - self.r_out,
            x_max: self.center.0 + self.r_out,
            y_max: self.center.1 + self.r_out,
        }
    }
}

/// Straight waveguide along x spanning the whole grid, PML included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waveguide {
    pub y_center: f64,
    pub width: f64,
    pub eps: f64,
}

/// Disk particle next to one ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    /// Index into [`GeometrySpec::rings`].
    pub ring: usize,
    /// Azimuth in radians, counter-clockwise from +x.
    pub theta: f64,
    pub radius: f64,
    /// Distance from the ring's outer surface to the particle surface.
    pub gap: f64,
    pub eps: f64,
}

/// Rectangular slab centered between two rings, long side perpendicular to
/// the line joining their centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slab {
    pub rings: (usize, usize),
    /// Extent along the center-to-center line.
    pub width: f64,
    /// Extent across it.
    pub length: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySpec {
    pub background_eps: f64,
    pub rings: Vec<Ring>,
    pub waveguide: Option<Waveguide>,
    pub particle: Option<Particle>,
    pub slab: Option<Slab>,
}

/// Dimensions of the three-ring scene, in nm.
pub mod dims {
    pub const RING_OUTER: f64 = 3500.0;
    pub const RING_INNER: f64 = 3350.0;
    pub const WAVEGUIDE_WIDTH: f64 = 150.0;
    pub const WAVEGUIDE_GAP: f64 = 120.0;
    pub const RING_GAP: f64 = 200.0;
    pub const PARTICLE_RADIUS: f64 = 90.0;
    pub const PARTICLE_GAP: f64 = 90.0;
    pub const SLAB_WIDTH: f64 = 60.0;
    pub const SLAB_LENGTH: f64 = 1500.0;
    pub const EPS_CORE: f64 = 4.0;
    pub const EPS_BACKGROUND: f64 = 1.0;
}

impl GeometrySpec {
    pub fn empty() -> Self {
        Self {
            background_eps: dims::EPS_BACKGROUND,
            rings: Vec::new(),
            waveguide: None,
            particle: None,
            slab: None,
        }
    }

    /// Three rings in a triangle above a straight waveguide along y = 0.
    /// Ring 0 sits on the waveguide; rings 1 and 2 form the upper-left and
    /// upper-right corners, all gaps between rings equal.
    pub fn loop_scene() -> Self {
        use dims::*;
        let y1 = 0.5 * WAVEGUIDE_WIDTH + WAVEGUIDE_GAP + RING_OUTER;
        let pitch = 2.0 * RING_OUTER + RING_GAP;
        let rise = pitch * (PI / 3.0).sin();
        let ring = |x: f64, y: f64| Ring {
            center: (x, y),
            r_out: RING_OUTER,
            r_in: RING_INNER,
            eps: EPS_CORE,
        };
        Self {
            background_eps: EPS_BACKGROUND,
            rings: vec![
                ring(0.0, y1),
                ring(-0.5 * pitch, y1 + rise),
                ring(0.5 * pitch, y1 + rise),
            ],
            waveguide: Some(Waveguide {
                y_center: 0.0,
                width: WAVEGUIDE_WIDTH,
                eps: EPS_CORE,
            }),
            particle: None,
            slab: None,
        }
    }

    /// Adds the standard particle next to `ring` at azimuth `theta_deg`.
    pub fn with_particle(mut self, ring: usize, theta_deg: f64, eps: f64) -> Self {
        self.particle = Some(Particle {
            ring,
            theta: theta_deg.to_radians(),
            radius: dims::PARTICLE_RADIUS,
            gap: dims::PARTICLE_GAP,
            eps,
        });
        self
    }

    /// Adds the standard slab between two rings.
    pub fn with_slab(mut self, rings: (usize, usize), eps: f64) -> Self {
        self.slab = Some(Slab {
            rings,
            width: dims::SLAB_WIDTH,
            length: dims::SLAB_LENGTH,
            eps,
        });
        self
    }

    /// Same scene with only the waveguide left: the normalization reference.
    pub fn reference(&self) -> Self {
        Self {
            background_eps: self.background_eps,
            rings: Vec::new(),
            waveguide: self.waveguide,
            particle: None,
            slab: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut eps = vec![self.background_eps];
        for (k, r) in self.rings.iter().enumerate() {
            if !(r.r_out > r.r_in) || !(r.r_in >= 0.0) {
                return Err(Error::Geometry(format!(
                    "ring {k}: need r_out > r_in >= 0, got {} / {}",
                    r.r_out, r.r_in
                )));
            }
            eps.push(r.eps);
        }
        if let Some(w) = &self.waveguide {
            if !(w.width > 0.0) {
                return Err(Error::Geometry("waveguide width must be positive".into()));
            }
            eps.push(w.eps);
        }
        if let Some(p) = &self.particle {
            if p.ring >= self.rings.len() {
                return Err(Error::Geometry(format!("particle refers to missing ring {}", p.ring)));
            }
            if !(p.radius > 0.0) || !(p.gap >= 0.0) {
                return Err(Error::Geometry("particle radius must be positive and gap >= 0".into()));
            }
            eps.push(p.eps);
        }
        if let Some(s) = &self.slab {
            let (a, b) = s.rings;
            if a >= self.rings.len() || b >= self.rings.len() || a == b {
                return Err(Error::Geometry(format!("slab refers to invalid ring pair ({a},{b})")));
            }
            if !(s.width > 0.0) || !(s.length > 0.0) {
                return Err(Error::Geometry("slab dimensions must be positive".into()));
            }
            eps.push(s.eps);
        }
        if let Some(bad) = eps.iter().find(|e| !(**e >= 1.0) || !e.is_finite()) {
            return Err(Error::Geometry(format!("permittivity must be >= 1, got {bad}")));
        }
        Ok(())
    }

    fn particle_center(&self, p: &Particle) -> (f64, f64) {
        let ring = &self.rings[p.ring];
        let d = ring.r_out + p.gap + p.radius;
        (ring.center.0 + d * p.theta.cos(), ring.center.1 + d * p.theta.sin())
    }

    /// Slab center, unit vector along the center line, unit vector across.
    fn slab_frame(&self, s: &Slab) -> ((f64, f64), (f64, f64), (f64, f64)) {
        let a = self.rings[s.rings.0].center;
        let b = self.rings[s.rings.1].center;
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len = (dx * dx + dy * dy).sqrt();
        let along = (dx / len, dy / len);
        let across = (-along.1, along.0);
        (((a.0 + b.0) * 0.5, (a.1 + b.1) * 0.5), along, across)
    }

    fn slab_contains(&self, s: &Slab, x: f64, y: f64) -> bool {
        let (c, along, across) = self.slab_frame(s);
        let (rx, ry) = (x - c.0, y - c.1);
        let u = rx * along.0 + ry * along.1;
        let v = rx * across.0 + ry * across.1;
        u.abs() <= 0.5 * s.width && v.abs() <= 0.5 * s.length
    }

    /// Bounding box of everything except the waveguide's infinite extent.
    /// The waveguide contributes its transverse extent only.
    pub fn bounds(&self) -> Rect {
        let mut r = Rect::empty();
        for ring in &self.rings {
            r.union(&ring.bounds());
        }
        if let Some(w) = &self.waveguide {
            let x = if r.is_empty() { 0.0 } else { r.x_min };
            r.include(x, w.y_center - 0.5 * w.width);
            r.include(x, w.y_center + 0.5 * w.width);
        }
        if let Some(p) = &self.particle {
            let c = self.particle_center(p);
            r.include(c.0 - p.radius, c.1 - p.radius);
            r.include(c.0 + p.radius, c.1 + p.radius);
        }
        if let Some(s) = &self.slab {
            let (c, along, across) = self.slab_frame(s);
            for (su, sv) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                let u = su * 0.5 * s.width;
                let v = sv * 0.5 * s.length;
                r.include(c.0 + u * along.0 + v * across.0, c.1 + u * along.1 + v * across.1);
            }
        }
        r
    }

    /// Permittivity at a point; later shapes win where they overlap.
    pub fn eps_at(&self, x: f64, y: f64) -> f64 {
        let mut eps = self.background_eps;
        if let Some(w) = &self.waveguide {
            if (y - w.y_center).abs() <= 0.5 * w.width {
                eps = w.eps;
            }
        }
        for ring in &self.rings {
            if ring.contains(x, y) {
                eps = ring.eps;
            }
        }
        if let Some(s) = &self.slab {
            if self.slab_contains(s, x, y) {
                eps = s.eps;
            }
        }
        if let Some(p) = &self.particle {
            let c = self.particle_center(p);
            if (x - c.0).powi(2) + (y - c.1).powi(2) <= p.radius * p.radius {
                eps = p.eps;
            }
        }
        eps
    }
}

/// Placement of the computational grid in scene coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layout {
    /// Scene coordinates of the lower-left corner of cell (0, 0).
    pub origin: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    pub cell: f64,
    pub pml_cells: usize,
}

/// Margin between the geometry and the absorbing layers.
pub const DEFAULT_MARGIN_NM: f64 = 1000.0;
/// Distance from the left absorbing layer to the source.
pub const DEFAULT_SOURCE_LEAD_NM: f64 = 2000.0;

impl Layout {
    /// Tight box around the geometry plus `margin` on every side, extended a
    /// further `source_lead` to the left for the source region, plus the PML.
    pub fn around(spec: &GeometrySpec, cell: f64, pml_cells: usize, margin: f64, source_lead: f64) -> Result<Self> {
        if !(cell > 0.0) {
            return Err(Error::Geometry(format!("cell size must be positive, got {cell}")));
        }
        let b = spec.bounds();
        if b.is_empty() {
            return Err(Error::Geometry("scene has no extent; give an explicit domain".into()));
        }
        let interior = Rect {
            x_min: b.x_min - margin - source_lead,
            y_min: b.y_min - margin,
            x_max: b.x_max + margin,
            y_max: b.y_max + margin,
        };
        Ok(Self::for_interior(interior, cell, pml_cells))
    }

    /// Grid covering `interior` (rounded outward to whole cells) plus PML.
    pub fn for_interior(interior: Rect, cell: f64, pml_cells: usize) -> Self {
        let nx_in = (interior.width() / cell).ceil() as usize;
        let ny_in = (interior.height() / cell).ceil() as usize;
        let pml = pml_cells as f64 * cell;
        Self {
            origin: (interior.x_min - pml, interior.y_min - pml),
            nx: nx_in + 2 * pml_cells,
            ny: ny_in + 2 * pml_cells,
            cell,
            pml_cells,
        }
    }

    /// Non-PML region in scene coordinates.
    pub fn interior(&self) -> Rect {
        let p = self.pml_cells as f64 * self.cell;
        Rect {
            x_min: self.origin.0 + p,
            y_min: self.origin.1 + p,
            x_max: self.origin.0 + self.nx as f64 * self.cell - p,
            y_max: self.origin.1 + self.ny as f64 * self.cell - p,
        }
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + (i as f64 + 0.5) * self.cell,
            self.origin.1 + (j as f64 + 0.5) * self.cell,
        )
    }

    /// Cell containing a scene point.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fi = ((x - self.origin.0) / self.cell).floor();
        let fj = ((y - self.origin.1) / self.cell).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.nx as f64 || fj >= self.ny as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }

    /// Nearest vertical grid line (Ey column index) to scene coordinate x.
    pub fn column_of(&self, x: f64) -> usize {
        ((x - self.origin.0) / self.cell).round().max(0.0) as usize
    }

    pub fn in_interior_cells(&self, i: usize, j: usize) -> bool {
        let p = self.pml_cells;
        i >= p && j >= p && i < self.nx - p && j < self.ny - p
    }
}

/// Relative permittivity per cell, row-major with `j` (y) as the row.
#[derive(Debug, Clone, PartialEq)]
pub struct PermittivityMap {
    pub layout: Layout,
    pub eps: Vec<f64>,
}

impl PermittivityMap {
    pub fn uniform(layout: Layout, eps: f64) -> Self {
        Self {
            layout,
            eps: vec![eps; layout.nx * layout.ny],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.eps[j * self.layout.nx + i]
    }

    /// Number of cells whose permittivity differs from `background`.
    pub fn count_not(&self, background: f64) -> usize {
        self.eps.iter().filter(|e| **e != background).count()
    }
}

/// Rasterizes onto an automatically sized grid around the geometry with a
/// 10-cell absorbing layer.
pub fn rasterize(spec: &GeometrySpec, cell: f64) -> Result<PermittivityMap> {
    let layout = Layout::around(spec, cell, 10, DEFAULT_MARGIN_NM, DEFAULT_SOURCE_LEAD_NM)?;
    rasterize_in(spec, &layout)
}

/// Center-point rasterization onto a given layout. Every shape other than
/// the waveguide must lie inside the non-PML interior.
pub fn rasterize_in(spec: &GeometrySpec, layout: &Layout) -> Result<PermittivityMap> {
    spec.validate()?;
    if !(layout.cell > 0.0) || layout.nx <= 2 * layout.pml_cells || layout.ny <= 2 * layout.pml_cells {
        return Err(Error::Geometry("grid too small for its absorbing layers".into()));
    }
    let interior = layout.interior();
    let mut shapes = spec.clone();
    shapes.waveguide = None;
    let b = shapes.bounds();
    if !b.is_empty() && !interior.contains_rect(&b) {
        return Err(Error::Geometry(format!(
            "shapes span {b:?}, outside the interior {interior:?}"
        )));
    }
    if let Some(w) = &spec.waveguide {
        if w.y_center - 0.5 * w.width < interior.y_min || w.y_center + 0.5 * w.width > interior.y_max {
            return Err(Error::Geometry("waveguide crosses the absorbing layer".into()));
        }
    }
    let mut eps = Vec::with_capacity(layout.nx * layout.ny);
    for j in 0..layout.ny {
        for i in 0..layout.nx {
            let (x, y) = layout.cell_center(i, j);
            eps.push(spec.eps_at(x, y));
        }
    }
    Ok(PermittivityMap { layout: *layout, eps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_layout(cell: f64) -> Layout {
        Layout::for_interior(
            Rect {
                x_min: -4000.0,
                y_min: -4000.0,
                x_max: 4000.0,
                y_max: 4000.0,
            },
            cell,
            10,
        )
    }

    #[test]
    fn empty_scene_is_uniform() {
        let map = rasterize_in(&GeometrySpec::empty(), &small_layout(30.0)).unwrap();
        assert!(map.eps.iter().all(|e| *e == 1.0));
        assert!(rasterize(&GeometrySpec::empty(), 30.0).is_err());
    }

    #[test]
    fn ring_area_matches_annulus() {
        let mut spec = GeometrySpec::empty();
        spec.rings.push(Ring {
            center: (0.0, 0.0),
            r_out: dims::RING_OUTER,
            r_in: dims::RING_INNER,
            eps: 4.0,
        });
        let map = rasterize_in(&spec, &small_layout(30.0)).unwrap();
        let area = PI * (dims::RING_OUTER.powi(2) - dims::RING_INNER.powi(2)) / (30.0 * 30.0);
        let cells = map.count_not(1.0) as f64;
        assert!((cells - area).abs() / area < 0.05, "{cells} vs {area}");
    }

    #[test]
    fn loop_scene_gaps_and_waveguide() {
        let spec = GeometrySpec::loop_scene();
        let r = &spec.rings;
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let d = ((r[a].center.0 - r[b].center.0).powi(2) + (r[a].center.1 - r[b].center.1).powi(2)).sqrt();
            assert!((d - 2.0 * dims::RING_OUTER - dims::RING_GAP).abs() < 1e-9);
        }
        let wg_top = 0.5 * dims::WAVEGUIDE_WIDTH;
        assert!((r[0].center.1 - r[0].r_out - wg_top - dims::WAVEGUIDE_GAP).abs() < 1e-9);

        let map = rasterize(&spec, 30.0).unwrap();
        let l = map.layout;
        // waveguide column far left of the rings: exactly 5 cells at 30 nm
        let i = l.pml_cells + 3;
        let core: usize = (0..l.ny).filter(|&j| map.at(i, j) == 4.0).count();
        assert_eq!(core, 5);
        // three separate annuli crossing the horizontal line through ring 0
        let (_, j) = l.cell_of(0.0, r[0].center.1).unwrap();
        let mut runs = 0;
        let mut inside = false;
        for i in 0..l.nx {
            let now = map.at(i, j) == 4.0;
            if now && !inside {
                runs += 1;
            }
            inside = now;
        }
        assert_eq!(runs, 2);
        let (_, j) = l.cell_of(0.0, r[1].center.1).unwrap();
        let runs = (1..l.nx).filter(|&i| map.at(i, j) == 4.0 && map.at(i - 1, j) != 4.0).count();
        assert_eq!(runs, 4);
    }

    #[test]
    fn shapes_outside_interior_rejected() {
        let spec = GeometrySpec::loop_scene();
        assert!(matches!(rasterize_in(&spec, &small_layout(30.0)), Err(Error::Geometry(_))));
    }

    #[test]
    fn degenerate_ring_rejected() {
        let mut spec = GeometrySpec::empty();
        spec.rings.push(Ring {
            center: (0.0, 0.0),
            r_out: 100.0,
            r_in: 100.0,
            eps: 4.0,
        });
        assert!(matches!(spec.validate(), Err(Error::Geometry(_))));
        let mut spec = GeometrySpec::loop_scene();
        spec.background_eps = 0.5;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn particle_and_slab_are_placed() {
        let spec = GeometrySpec::loop_scene()
            .with_particle(1, 90.0, 4.0)
            .with_slab((1, 2), 4.1);
        let map = rasterize(&spec, 30.0).unwrap();
        let ring = spec.rings[1];
        let d = ring.r_out + dims::PARTICLE_GAP + dims::PARTICLE_RADIUS;
        let (i, j) = map.layout.cell_of(ring.center.0, ring.center.1 + d).unwrap();
        assert_eq!(map.at(i, j), 4.0);
        let mid = (
            0.5 * (spec.rings[1].center.0 + spec.rings[2].center.0),
            spec.rings[1].center.1,
        );
        let (i, j) = map.layout.cell_of(mid.0, mid.1).unwrap();
        assert_eq!(map.at(i, j), 4.1);
        let slab_cells = map.eps.iter().filter(|e| **e == 4.1).count() as f64;
        let expected = dims::SLAB_WIDTH * dims::SLAB_LENGTH / 900.0;
        assert!((slab_cells - expected).abs() / expected < 0.25, "{slab_cells} vs {expected}");
    }

    #[test]
    fn rasterization_is_deterministic() {
        let spec = GeometrySpec::loop_scene().with_particle(1, 95.0, 4.0);
        assert_eq!(rasterize(&spec, 60.0).unwrap(), rasterize(&spec, 60.0).unwrap());
    }
}
