use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference triangle `{ξ ∈ [-1,1]²: ξ1 + ξ2 <= 0}` or reference tetrahedron
/// `{ξ ∈ [-1,1]³: ξ1 + ξ2 + ξ3 <= -1}`.
///
/// Points are stored as `[f64; 3]`; the third component is zero on triangles.
/// Facets are indexed from zero: on the triangle 0 is `ξ2 = -1`, 1 the
/// hypotenuse and 2 is `ξ1 = -1`; on the tetrahedron 0 is `ξ2 = -1`, 1 the
/// oblique face, 2 is `ξ1 = -1` and 3 is `ξ3 = -1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementShape {
    Triangle,
    Tetrahedron,
}

const TRI_VERTICES: [[f64; 3]; 3] = [[-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [-1.0, 1.0, 0.0]];
const TET_VERTICES: [[f64; 3]; 4] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
];
const TRI_FACET_VERTICES: [&[usize]; 3] = [&[0, 1], &[1, 2], &[0, 2]];
const TET_FACET_VERTICES: [&[usize]; 4] = [&[0, 1, 3], &[1, 2, 3], &[0, 2, 3], &[0, 1, 2]];

impl ElementShape {
    pub fn dim(self) -> usize {
        match self {
            ElementShape::Triangle => 2,
            ElementShape::Tetrahedron => 3,
        }
    }

    pub fn num_facets(self) -> usize {
        self.dim() + 1
    }

    pub fn num_vertices(self) -> usize {
        self.dim() + 1
    }

    pub fn vertices(self) -> &'static [[f64; 3]] {
        match self {
            ElementShape::Triangle => &TRI_VERTICES,
            ElementShape::Tetrahedron => &TET_VERTICES,
        }
    }

    /// Local vertex indices spanning facet `facet`.
    pub fn facet_vertices(self, facet: usize) -> &'static [usize] {
        match self {
            ElementShape::Triangle => TRI_FACET_VERTICES[facet],
            ElementShape::Tetrahedron => TET_FACET_VERTICES[facet],
        }
    }

    /// Outward unit normal of facet `facet`.
    pub fn normal(self, facet: usize) -> [f64; 3] {
        match self {
            ElementShape::Triangle => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                [[0.0, -1.0, 0.0], [s, s, 0.0], [-1.0, 0.0, 0.0]][facet]
            }
            ElementShape::Tetrahedron => {
                let s = 1.0 / 3f64.sqrt();
                [[0.0, -1.0, 0.0], [s, s, s], [-1.0, 0.0, 0.0], [0.0, 0.0, -1.0]][facet]
            }
        }
    }

    /// Length (triangle) or area (tetrahedron) of a reference facet.
    pub fn facet_measure(self, facet: usize) -> f64 {
        match (self, facet) {
            (ElementShape::Triangle, 1) => 2.0 * 2f64.sqrt(),
            (ElementShape::Triangle, _) => 2.0,
            (ElementShape::Tetrahedron, 1) => 2.0 * 3f64.sqrt(),
            (ElementShape::Tetrahedron, _) => 2.0,
        }
    }

    pub fn volume(self) -> f64 {
        match self {
            ElementShape::Triangle => 2.0,
            ElementShape::Tetrahedron => 4.0 / 3.0,
        }
    }

    pub fn contains(self, xi: [f64; 3], tol: f64) -> bool {
        let d = self.dim();
        let lower = xi[..d].iter().all(|&x| x >= -1.0 - tol);
        let sum: f64 = xi[..d].iter().sum();
        lower && sum <= 2.0 - d as f64 + tol
    }
}

/// Collapsed coordinates η ∈ [-1,1]^d to reference coordinates.
pub fn collapsed_to_ref(shape: ElementShape, eta: [f64; 3]) -> [f64; 3] {
    let [e1, e2, e3] = eta;
    match shape {
        ElementShape::Triangle => [0.5 * (1.0 + e1) * (1.0 - e2) - 1.0, e2, 0.0],
        ElementShape::Tetrahedron => [
            0.25 * (1.0 + e1) * (1.0 - e2) * (1.0 - e3) - 1.0,
            0.5 * (1.0 + e2) * (1.0 - e3) - 1.0,
            e3,
        ],
    }
}

/// Inverse of [`collapsed_to_ref`], defined away from the collapsed vertex
/// (triangle) or the collapsed edge `ξ1 = -1, ξ2 + ξ3 = 0` (tetrahedron).
pub fn ref_to_collapsed(shape: ElementShape, xi: [f64; 3]) -> Result<[f64; 3]> {
    if !shape.contains(xi, 1e-12) {
        return Err(Error::Domain(format!("point {xi:?} lies outside the reference {shape:?}")));
    }
    match shape {
        ElementShape::Triangle => {
            let s = 1.0 - xi[1];
            if s <= 0.0 {
                return Err(Error::Domain(format!(
                    "collapsed coordinates undefined at the vertex {:?}",
                    &xi[..2]
                )));
            }
            Ok([2.0 * (1.0 + xi[0]) / s - 1.0, xi[1], 0.0])
        }
        ElementShape::Tetrahedron => {
            let s1 = -xi[1] - xi[2];
            let s2 = 1.0 - xi[2];
            if s1 <= 0.0 || s2 <= 0.0 {
                return Err(Error::Domain(format!(
                    "collapsed coordinates undefined on the collapsed edge at {xi:?}"
                )));
            }
            Ok([2.0 * (1.0 + xi[0]) / s1 - 1.0, 2.0 * (1.0 + xi[1]) / s2 - 1.0, xi[2]])
        }
    }
}

/// `g[n][l] = ∂η_n/∂ξ_l` evaluated at a point with collapsed coordinates `eta`.
/// Entries are finite only away from `η2 = 1` (and `η3 = 1`).
pub fn chain_factors(shape: ElementShape, eta: [f64; 3]) -> [[f64; 3]; 3] {
    let [e1, e2, e3] = eta;
    let mut g = [[0.0; 3]; 3];
    match shape {
        ElementShape::Triangle => {
            g[0][0] = 2.0 / (1.0 - e2);
            g[0][1] = (1.0 + e1) / (1.0 - e2);
            g[1][1] = 1.0;
        }
        ElementShape::Tetrahedron => {
            let a = (1.0 - e2) * (1.0 - e3);
            g[0][0] = 4.0 / a;
            g[0][1] = 2.0 * (1.0 + e1) / a;
            g[0][2] = 2.0 * (1.0 + e1) / a;
            g[1][1] = 2.0 / (1.0 - e3);
            g[1][2] = (1.0 + e2) / (1.0 - e3);
            g[2][2] = 1.0;
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_map_examples() {
        assert_eq!(collapsed_to_ref(ElementShape::Triangle, [-1.0, 0.4, 0.0]), [-1.0, 0.4, 0.0]);
        assert_eq!(collapsed_to_ref(ElementShape::Triangle, [0.0, 0.0, 0.0]), [-0.5, 0.0, 0.0]);
        let eta = ref_to_collapsed(ElementShape::Triangle, [-0.5, 0.0, 0.0]).unwrap();
        assert_eq!(eta, [0.0, 0.0, 0.0]);
        assert!(matches!(
            ref_to_collapsed(ElementShape::Triangle, [-1.0, 1.0, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn tetrahedron_collapsed_face_is_oblique_facet() {
        for i in 0..5 {
            for j in 0..5 {
                let e2 = -1.0 + 0.5 * i as f64;
                let e3 = -1.0 + 0.5 * j as f64;
                let xi = collapsed_to_ref(ElementShape::Tetrahedron, [1.0, e2, e3]);
                assert!((xi[0] + xi[1] + xi[2] + 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn tetrahedron_singular_points() {
        for xi in [[-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0], [-1.0, 0.0, 0.0]] {
            assert!(ref_to_collapsed(ElementShape::Tetrahedron, xi).is_err());
        }
    }

    #[test]
    fn chain_factors_match_finite_differences() {
        let h = 1e-6;
        for shape in [ElementShape::Triangle, ElementShape::Tetrahedron] {
            let xi = match shape {
                ElementShape::Triangle => [-0.4, -0.3, 0.0],
                ElementShape::Tetrahedron => [-0.5, -0.4, -0.6],
            };
            let eta = ref_to_collapsed(shape, xi).unwrap();
            let g = chain_factors(shape, eta);
            for l in 0..shape.dim() {
                let mut p = xi;
                let mut m = xi;
                p[l] += h;
                m[l] -= h;
                let ep = ref_to_collapsed(shape, p).unwrap();
                let em = ref_to_collapsed(shape, m).unwrap();
                for n in 0..shape.dim() {
                    let fd = (ep[n] - em[n]) / (2.0 * h);
                    assert!((fd - g[n][l]).abs() < 1e-7, "{shape:?} n={n} l={l}");
                }
            }
        }
    }
}
