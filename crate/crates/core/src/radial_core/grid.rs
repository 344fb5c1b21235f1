use crate::error::{Error, Result};

/// How the nodes of a [`RadialGrid`] were laid out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grading {
    Uniform,
    Geometric { inner_scale: f64, ratio: f64, transition: f64 },
}

/// Mesh on `[0, R]` for radial functions in dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dim: u32,
    radius: f64,
    nodes: Vec<f64>,
    grading: Grading,
}

/// Minimum node count of a graded grid.
pub const MIN_GRADED_NODES: usize = 16;

impl RadialGrid {
    /// Evenly spaced nodes `0, R/n, ..., R`.
    pub fn uniform(dim: u32, radius: f64, intervals: usize) -> Result<Self> {
        check_common(dim, radius)?;
        if intervals < 8 {
            return Err(Error::InvalidParameter(format!("need at least 8 intervals, got {intervals}")));
        }
        let h = radius / intervals as f64;
        let mut nodes: Vec<f64> = (0..intervals).map(|i| i as f64 * h).collect();
        nodes.push(radius);
        Ok(Self { dim, radius, nodes, grading: Grading::Uniform })
    }

    /// Builds a grid from explicit nodes; used mostly in tests.
    pub fn from_nodes(dim: u32, nodes: Vec<f64>) -> Result<Self> {
        let (Some(&first), Some(&radius)) = (nodes.first(), nodes.last()) else {
            return Err(Error::InvalidParameter("empty node list".into()));
        };
        check_common(dim, radius)?;
        if first != 0.0 || nodes.len() < 3 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("nodes must start at 0 and increase strictly".into()));
        }
        Ok(Self { dim, radius, nodes, grading: Grading::Uniform })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn grading(&self) -> Grading {
        self.grading
    }
    /// First node after the origin.
    pub fn smallest_positive(&self) -> f64 {
        self.nodes[1]
    }
    /// Index of the element containing `r` (clamped to the mesh).
    pub fn locate(&self, r: f64) -> usize {
        let n = self.nodes.len();
        match self.nodes.binary_search_by(|x| x.total_cmp(&r)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }
}

fn check_common(dim: u32, radius: f64) -> Result<()> {
    if dim < 7 {
        return Err(Error::DimensionTooSmall(dim));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    Ok(())
}

/// Geometric nodes `s, s q, s q^2, ...` with `q = 10^(1/nodes_per_decade)` up
/// to the radius where the geometric step reaches the uniform spacing
/// `R / uniform_nodes`, then uniform nodes to `R`.
pub fn build_grid(
    dim: u32,
    radius: f64,
    inner_scale: f64,
    nodes_per_decade: usize,
    uniform_nodes: usize,
) -> Result<RadialGrid> {
    check_common(dim, radius)?;
    if !(inner_scale > 0.0) || inner_scale >= radius {
        return Err(Error::InvalidParameter(format!("inner_scale must lie in (0, R), got {inner_scale}")));
    }
    if nodes_per_decade < 4 || uniform_nodes < 8 {
        return Err(Error::InvalidParameter(format!(
            "nodes_per_decade >= 4 and uniform_nodes >= 8 required, got {nodes_per_decade}, {uniform_nodes}"
        )));
    }
    let q = 10f64.powf(1.0 / nodes_per_decade as f64);
    let h = radius / uniform_nodes as f64;
    let transition = (h / (q - 1.0)).min(radius);
    let mut nodes = vec![0.0];
    let mut k = 0i32;
    loop {
        let r = inner_scale * q.powi(k);
        if r >= radius {
            break;
        }
        nodes.push(r);
        if r >= transition {
            break;
        }
        k += 1;
    }
    let start = *nodes.last().unwrap();
    if start < radius {
        // Steps of at most h starting beyond the transition keep ratios below q.
        let steps = ((radius - start) / h).ceil().max(1.0) as usize;
        let step = (radius - start) / steps as f64;
        for i in 1..steps {
            nodes.push(start + i as f64 * step);
        }
        nodes.push(radius);
    }
    if nodes.len() < MIN_GRADED_NODES {
        return Err(Error::InvalidParameter(format!("grid has only {} nodes; increase resolution", nodes.len())));
    }
    Ok(RadialGrid { dim, radius, nodes, grading: Grading::Geometric { inner_scale, ratio: q, transition } })
}
