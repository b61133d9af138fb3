//! Scalp topography rendering.
//!
//! Per-electrode values are min–max normalised and interpolated over the
//! head disc with a piecewise-cubic Clough–Tocher surface on the Delaunay
//! triangulation of the electrode positions. Vertex gradients come from a
//! distance-weighted least-squares plane through each electrode's
//! triangulation neighbours. Pixels inside the disc but outside the
//! electrodes' convex hull take the value of the nearest electrode; pixels
//! outside the disc are zero.

use delaunator::{triangulate, Point, EMPTY};

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::layout::ScalpLayout;

/// Default raster side length.
pub const TOPO_GRID: usize = 64;

/// One band's interpolated field. Row 0 is the front of the head.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoImage {
    pub size: usize,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl TopoImage {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }

    /// Head-plane coordinates of a pixel centre.
    pub fn pixel_center(size: usize, row: usize, col: usize) -> [f64; 2] {
        let s = size as f64;
        [-1.0 + (2 * col + 1) as f64 / s, 1.0 - (2 * row + 1) as f64 / s]
    }

    /// Pixel (row, col) containing a head-plane position.
    pub fn pixel_of(size: usize, p: [f64; 2]) -> (usize, usize) {
        let s = size as f64;
        let col = ((p[0] + 1.0) * s / 2.0).floor().clamp(0.0, s - 1.0) as usize;
        let row = ((1.0 - p[1]) * s / 2.0).floor().clamp(0.0, s - 1.0) as usize;
        (row, col)
    }

    fn disc(size: usize) -> Vec<bool> {
        (0..size * size)
            .map(|i| {
                let [u, v] = Self::pixel_center(size, i / size, i % size);
                u * u + v * v <= 1.0
            })
            .collect()
    }
}

fn canonical_order(points: &[[f64; 2]]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
    });
    order
}

/// Clough–Tocher interpolant over a fixed set of scattered nodes.
pub struct CloughTocher {
    points: Vec<[f64; 2]>,
    values: Vec<f64>,
    gradients: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    /// Neighbouring triangle opposite each vertex, if any.
    neighbors: Vec<[Option<usize>; 3]>,
}

impl CloughTocher {
    /// Builds the interpolant with least-squares gradient estimates.
    pub fn new(points: &[[f64; 2]], values: &[f64]) -> Self {
        let mut ct = Self::with_gradients(points, values, &vec![[0.0; 2]; points.len()]);
        ct.gradients = ct.estimate_gradients();
        ct
    }

    /// Builds the interpolant with caller-supplied vertex gradients.
    pub fn with_gradients(points: &[[f64; 2]], values: &[f64], gradients: &[[f64; 2]]) -> Self {
        // triangulate in coordinate order so ties between cocircular
        // points resolve the same way whatever order the caller used
        let order = canonical_order(points);
        let pts: Vec<Point> = order
            .iter()
            .map(|&i| Point {
                x: points[i][0],
                y: points[i][1],
            })
            .collect();
        let tri = triangulate(&pts);
        let n_tri = tri.triangles.len() / 3;
        let triangles = (0..n_tri)
            .map(|t| {
                [
                    order[tri.triangles[3 * t]],
                    order[tri.triangles[3 * t + 1]],
                    order[tri.triangles[3 * t + 2]],
                ]
            })
            .collect();
        // edge 3t+k runs from vertex k to vertex k+1, so it faces vertex k+2
        let neighbors = (0..n_tri)
            .map(|t| {
                let across = |e: usize| {
                    let h = tri.halfedges[e];
                    (h != EMPTY).then_some(h / 3)
                };
                [across(3 * t + 1), across(3 * t + 2), across(3 * t)]
            })
            .collect();
        CloughTocher {
            points: points.to_vec(),
            values: values.to_vec(),
            gradients: gradients.to_vec(),
            triangles,
            neighbors,
        }
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    fn estimate_gradients(&self) -> Vec<[f64; 2]> {
        let n = self.points.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for t in &self.triangles {
            for a in 0..3 {
                for b in 0..3 {
                    if a != b && !adj[t[a]].contains(&t[b]) {
                        adj[t[a]].push(t[b]);
                    }
                }
            }
        }
        (0..n)
            .map(|i| {
                let p = self.points[i];
                let (mut sxx, mut sxy, mut syy, mut sxf, mut syf) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for &j in &adj[i] {
                    let dx = self.points[j][0] - p[0];
                    let dy = self.points[j][1] - p[1];
                    let w = 1.0 / (dx * dx + dy * dy);
                    let df = self.values[j] - self.values[i];
                    sxx += w * dx * dx;
                    sxy += w * dx * dy;
                    syy += w * dy * dy;
                    sxf += w * dx * df;
                    syf += w * dy * df;
                }
                let det = sxx * syy - sxy * sxy;
                if adj[i].len() < 2 || det.abs() < 1e-12 {
                    [0.0, 0.0]
                } else {
                    [(syy * sxf - sxy * syf) / det, (sxx * syf - sxy * sxf) / det]
                }
            })
            .collect()
    }

    fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|i| self.points[i]);
        let det = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1]);
        let l0 = ((b[1] - c[1]) * (p[0] - c[0]) + (c[0] - b[0]) * (p[1] - c[1])) / det;
        let l1 = ((c[1] - a[1]) * (p[0] - c[0]) + (a[0] - c[0]) * (p[1] - c[1])) / det;
        [l0, l1, 1.0 - l0 - l1]
    }

    /// Triangle containing `p`, if `p` lies inside the hull.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        const EPS: f64 = 1e-12;
        (0..self.triangles.len()).find_map(|t| {
            let b = self.barycentric(t, p);
            b.iter().all(|&l| l >= -EPS).then_some((t, b))
        })
    }

    /// Value at `p`, or `None` outside the convex hull.
    pub fn eval(&self, p: [f64; 2]) -> Option<f64> {
        self.locate(p).map(|(t, b)| self.eval_in(t, b))
    }

    fn eval_in(&self, t: usize, b: [f64; 3]) -> f64 {
        let v = self.triangles[t];
        let [p1, p2, p3] = v.map(|i| self.points[i]);
        let [f1, f2, f3] = v.map(|i| self.values[i]);
        let [g1, g2, g3] = v.map(|i| self.gradients[i]);
        let dot = |g: [f64; 2], e: [f64; 2]| g[0] * e[0] + g[1] * e[1];
        let e12 = [p2[0] - p1[0], p2[1] - p1[1]];
        let e23 = [p3[0] - p2[0], p3[1] - p2[1]];
        let e31 = [p1[0] - p3[0], p1[1] - p3[1]];

        let df12 = dot(g1, e12);
        let df21 = -dot(g2, e12);
        let df23 = dot(g2, e23);
        let df32 = -dot(g3, e23);
        let df31 = dot(g3, e31);
        let df13 = -dot(g1, e31);

        // Bernstein–Bézier control values on the Clough–Tocher split
        let c3000 = f1;
        let c2100 = (df12 + 3.0 * c3000) / 3.0;
        let c2010 = (df13 + 3.0 * c3000) / 3.0;
        let c0300 = f2;
        let c1200 = (df21 + 3.0 * c0300) / 3.0;
        let c0210 = (df23 + 3.0 * c0300) / 3.0;
        let c0030 = f3;
        let c1020 = (df31 + 3.0 * c0030) / 3.0;
        let c0120 = (df32 + 3.0 * c0030) / 3.0;
        let c2001 = (c2100 + c2010 + c3000) / 3.0;
        let c0201 = (c1200 + c0300 + c0210) / 3.0;
        let c0021 = (c1020 + c0120 + c0030) / 3.0;

        // cross-boundary derivative condition, taken towards the centroid of
        // the neighbouring triangle (or -1/2 on the hull)
        let mut g = [-0.5; 3];
        for (k, gk) in g.iter_mut().enumerate() {
            let Some(nb) = self.neighbors[t][k] else {
                continue;
            };
            let q = self.triangles[nb].map(|i| self.points[i]);
            let centroid = [(q[0][0] + q[1][0] + q[2][0]) / 3.0, (q[0][1] + q[1][1] + q[2][1]) / 3.0];
            let c = self.barycentric(t, centroid);
            *gk = match k {
                0 => (2.0 * c[2] + c[1] - 1.0) / (2.0 - 3.0 * c[2] - 3.0 * c[1]),
                1 => (2.0 * c[0] + c[2] - 1.0) / (2.0 - 3.0 * c[0] - 3.0 * c[2]),
                _ => (2.0 * c[1] + c[0] - 1.0) / (2.0 - 3.0 * c[1] - 3.0 * c[0]),
            };
        }

        let c0111 = (g[0] * (-c0300 + 3.0 * c0210 - 3.0 * c0120 + c0030)
            + (-c0300 + 2.0 * c0210 - c0120 + c0021 + c0201))
            / 2.0;
        let c1011 = (g[1] * (-c0030 + 3.0 * c1020 - 3.0 * c2010 + c3000)
            + (-c0030 + 2.0 * c1020 - c2010 + c2001 + c0021))
            / 2.0;
        let c1101 = (g[2] * (-c3000 + 3.0 * c2100 - 3.0 * c1200 + c0300)
            + (-c3000 + 2.0 * c2100 - c1200 + c2001 + c0201))
            / 2.0;
        let c1002 = (c1101 + c1011 + c2001) / 3.0;
        let c0102 = (c1101 + c0111 + c0201) / 3.0;
        let c0012 = (c1011 + c0111 + c0021) / 3.0;
        let c0003 = (c1002 + c0102 + c0012) / 3.0;

        // barycentric coordinates within the micro-triangle
        let m = b[0].min(b[1]).min(b[2]);
        let (b1, b2, b3, b4) = (b[0] - m, b[1] - m, b[2] - m, 3.0 * m);

        b1 * b1 * b1 * c3000
            + 3.0 * b1 * b1 * b2 * c2100
            + 3.0 * b1 * b1 * b3 * c2010
            + 3.0 * b1 * b1 * b4 * c2001
            + 3.0 * b1 * b2 * b2 * c1200
            + 6.0 * b1 * b2 * b4 * c1101
            + 3.0 * b1 * b3 * b3 * c1020
            + 6.0 * b1 * b3 * b4 * c1011
            + 3.0 * b1 * b4 * b4 * c1002
            + b2 * b2 * b2 * c0300
            + 3.0 * b2 * b2 * b3 * c0210
            + 3.0 * b2 * b2 * b4 * c0201
            + 3.0 * b2 * b3 * b3 * c0120
            + 6.0 * b2 * b3 * b4 * c0111
            + 3.0 * b2 * b4 * b4 * c0102
            + b3 * b3 * b3 * c0030
            + 3.0 * b3 * b3 * b4 * c0021
            + 3.0 * b3 * b4 * b4 * c0012
            + b4 * b4 * b4 * c0003
    }
}

/// Renders one band. `band_values[i]` belongs to `layout.entries()[i]`.
pub fn render_topo_band(band_values: &[f64], layout: &ScalpLayout, grid: usize) -> Result<TopoImage> {
    if band_values.len() != layout.len() {
        return Err(Error::InvalidParameter(format!(
            "{} values for {} electrodes",
            band_values.len(),
            layout.len()
        )));
    }
    if band_values.len() < 3 {
        return Err(Error::InvalidParameter("need at least 3 electrodes".into()));
    }
    if band_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite band value".into()));
    }
    if grid == 0 {
        return Err(Error::InvalidParameter("grid size must be > 0".into()));
    }
    let mask = TopoImage::disc(grid);
    let (lo, hi) = band_values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if !(hi > lo) {
        let values = mask.iter().map(|&m| if m { 0.5 } else { 0.0 }).collect();
        return Ok(TopoImage {
            size: grid,
            values,
            mask,
        });
    }
    let normalized: Vec<f64> = band_values.iter().map(|v| (v - lo) / (hi - lo)).collect();
    let points: Vec<[f64; 2]> = layout.entries().iter().map(|e| [e.u, e.v]).collect();
    let ct = CloughTocher::new(&points, &normalized);

    let order = canonical_order(&points);
    let nearest = |p: [f64; 2]| -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for (q, &val) in order.iter().map(|&i| (&points[i], &normalized[i])) {
            let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            if d < best.0 {
                best = (d, val);
            }
        }
        best.1
    };

    let values = (0..grid * grid)
        .map(|i| {
            if !mask[i] {
                return 0.0;
            }
            let p = TopoImage::pixel_center(grid, i / grid, i % grid);
            ct.eval(p).unwrap_or_else(|| nearest(p)).clamp(0.0, 1.0)
        })
        .collect();
    Ok(TopoImage {
        size: grid,
        values,
        mask,
    })
}

/// Blends theta, alpha and beta fields into red, green and blue with
/// weights proportional to each band's pre-normalisation maximum.
pub fn compose_rgb_topo(
    theta: &TopoImage,
    alpha: &TopoImage,
    beta: &TopoImage,
    band_maxima: [f64; 3],
) -> Result<RgbImage> {
    let size = theta.size;
    if alpha.size != size || beta.size != size {
        return Err(Error::ImageShape {
            expected: format!("{size}x{size}"),
            got: format!("{}x{} / {}x{}", alpha.size, alpha.size, beta.size, beta.size),
        });
    }
    if band_maxima.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "band maxima must be finite and >= 0: {band_maxima:?}"
        )));
    }
    let total: f64 = band_maxima.iter().sum();
    let weights = if total > 0.0 {
        band_maxima.map(|m| m / total)
    } else {
        [1.0 / 3.0; 3]
    };
    let to_u8 = |w: f64, v: f64| (255.0 * w * v).round().clamp(0.0, 255.0) as u8;
    Ok(RgbImage::from_fn(size, size, |x, y| {
        [
            to_u8(weights[0], theta.at(y, x)),
            to_u8(weights[1], alpha.at(y, x)),
            to_u8(weights[2], beta.at(y, x)),
        ]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::LayoutEntry;

    fn scattered() -> Vec<[f64; 2]> {
        ScalpLayout::montage_32().entries().iter().map(|e| [e.u, e.v]).collect()
    }

    #[test]
    fn reproduces_linear_fields_with_estimated_gradients() {
        let pts = scattered();
        let f = |p: [f64; 2]| 0.3 + 1.7 * p[0] - 0.4 * p[1];
        let vals: Vec<f64> = pts.iter().map(|&p| f(p)).collect();
        let ct = CloughTocher::new(&pts, &vals);
        assert!(ct.n_triangles() > 30);
        let mut checked = 0;
        for i in 0..40 {
            for j in 0..40 {
                let p = [-0.8 + 0.04 * i as f64, -0.8 + 0.04 * j as f64];
                if let Some(v) = ct.eval(p) {
                    assert!((v - f(p)).abs() < 1e-10);
                    checked += 1;
                }
            }
        }
        assert!(checked > 500);
    }

    #[test]
    fn reproduces_quadratics_with_exact_gradients() {
        let pts = scattered();
        let f = |p: [f64; 2]| 1.0 + p[0] - 2.0 * p[1] + 0.7 * p[0] * p[0] - 1.1 * p[0] * p[1] + 0.4 * p[1] * p[1];
        let grad = |p: [f64; 2]| [1.0 + 1.4 * p[0] - 1.1 * p[1], -2.0 - 1.1 * p[0] + 0.8 * p[1]];
        let vals: Vec<f64> = pts.iter().map(|&p| f(p)).collect();
        let grads: Vec<[f64; 2]> = pts.iter().map(|&p| grad(p)).collect();
        let ct = CloughTocher::with_gradients(&pts, &vals, &grads);
        for i in 0..30 {
            for j in 0..30 {
                let p = [-0.75 + 0.05 * i as f64, -0.75 + 0.05 * j as f64];
                if let Some(v) = ct.eval(p) {
                    assert!((v - f(p)).abs() < 1e-10, "{p:?}: {v} vs {}", f(p));
                }
            }
        }
    }

    #[test]
    fn interpolant_hits_nodes() {
        let pts = scattered();
        let vals: Vec<f64> = (0..pts.len()).map(|i| ((i * 37) % 11) as f64).collect();
        let ct = CloughTocher::new(&pts, &vals);
        for (p, v) in pts.iter().zip(&vals) {
            assert!((ct.eval(*p).unwrap() - v).abs() < 1e-9);
        }
    }

    #[test]
    fn equal_values_give_uniform_half() {
        let layout = ScalpLayout::montage_14();
        let img = render_topo_band(&[3.0; 14], &layout, 32).unwrap();
        for (v, m) in img.values.iter().zip(&img.mask) {
            assert_eq!(*v, if *m { 0.5 } else { 0.0 });
        }
    }

    #[test]
    fn outside_disc_is_zero_and_values_in_unit_range() {
        let layout = ScalpLayout::montage_32();
        let vals: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
        let img = render_topo_band(&vals, &layout, TOPO_GRID).unwrap();
        assert_eq!(img.at(0, 0), 0.0);
        assert!(!img.mask[0]);
        assert!(img.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn hot_electrode_is_the_peak() {
        let layout = ScalpLayout::montage_32();
        let hot = layout.entries().iter().position(|e| e.name == "C3").unwrap();
        let mut vals = vec![0.0; 32];
        vals[hot] = 1.0;
        let img = render_topo_band(&vals, &layout, TOPO_GRID).unwrap();
        let arg = (0..img.values.len())
            .max_by(|&a, &b| img.values[a].total_cmp(&img.values[b]).then(b.cmp(&a)))
            .unwrap();
        let (r, c) = (arg / TOPO_GRID, arg % TOPO_GRID);
        let e = &layout.entries()[hot];
        let (er, ec) = TopoImage::pixel_of(TOPO_GRID, [e.u, e.v]);
        assert!(r.abs_diff(er) <= 2 && c.abs_diff(ec) <= 2, "{r},{c} vs {er},{ec}");
    }

    #[test]
    fn permutation_and_scale_invariance() {
        let layout = ScalpLayout::montage_14();
        let vals: Vec<f64> = (0..14).map(|i| 1.0 + ((i * 5) % 7) as f64).collect();
        let img = render_topo_band(&vals, &layout, 48).unwrap();

        let order: Vec<usize> = (0..14).rev().collect();
        let perm_layout = ScalpLayout::new(
            order
                .iter()
                .map(|&i| layout.entries()[i].clone())
                .collect::<Vec<LayoutEntry>>(),
        )
        .unwrap();
        let perm_vals: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
        let perm = render_topo_band(&perm_vals, &perm_layout, 48).unwrap();
        let a = compose_rgb_topo(&img, &img, &img, [1.0, 1.0, 1.0]).unwrap();
        let b = compose_rgb_topo(&perm, &perm, &perm, [1.0, 1.0, 1.0]).unwrap();
        assert_eq!(a, b);

        let scaled: Vec<f64> = vals.iter().map(|v| v * 8.0).collect();
        let s = render_topo_band(&scaled, &layout, 48).unwrap();
        assert_eq!(
            compose_rgb_topo(&s, &s, &s, [1.0, 2.0, 3.0]).unwrap(),
            compose_rgb_topo(&img, &img, &img, [1.0, 2.0, 3.0]).unwrap()
        );
    }

    #[test]
    fn composition_colours() {
        let layout = ScalpLayout::montage_14();
        let vals: Vec<f64> = (0..14).map(|i| i as f64).collect();
        let band = render_topo_band(&vals, &layout, 32).unwrap();
        let flat = render_topo_band(&[0.0; 14], &layout, 32).unwrap();

        let red = compose_rgb_topo(&band, &flat, &flat, [5.0, 0.0, 0.0]).unwrap();
        assert!(red.data.chunks(3).all(|p| p[1] == 0 && p[2] == 0));
        assert!(red.data.chunks(3).any(|p| p[0] > 0));

        let gray = compose_rgb_topo(&band, &band, &band, [2.0, 2.0, 2.0]).unwrap();
        assert!(gray.data.chunks(3).all(|p| p[0] == p[1] && p[1] == p[2]));

        let zero = compose_rgb_topo(&band, &band, &band, [0.0; 3]).unwrap();
        assert_eq!(zero, gray);

        let small = render_topo_band(&vals, &layout, 16).unwrap();
        assert!(compose_rgb_topo(&band, &small, &band, [1.0; 3]).is_err());
    }

    #[test]
    fn render_errors() {
        let layout = ScalpLayout::montage_14();
        assert!(render_topo_band(&[1.0; 13], &layout, 32).is_err());
        let mut v = vec![1.0; 14];
        v[3] = f64::NAN;
        assert!(render_topo_band(&v, &layout, 32).is_err());
    }
}
