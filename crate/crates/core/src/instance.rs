//! Metric clustering instances, clusterings and exact cost evaluation.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::norms::NormSpec;

/// Points, candidate facilities, a distance matrix over both, and the center budget `k`.
///
/// Nodes are indexed points first, then facilities. Point `p` is node `p`,
/// facility `x` is node `n + x`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricInstance {
    points: Vec<String>,
    facilities: Vec<String>,
    k: usize,
    dist: Vec<f64>,
}

/// Outcome of [`validate_metric`].
#[derive(Clone, Debug, PartialEq)]
pub enum MetricReport {
    Ok,
    Negative { i: usize, j: usize },
    NonzeroDiagonal { i: usize },
    Asymmetric { i: usize, j: usize },
    /// `d(i,j) > d(i,k) + d(k,j)`.
    Triangle { i: usize, j: usize, k: usize },
}

impl MetricReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, MetricReport::Ok)
    }
}

/// Checks symmetry, zero diagonal, nonnegativity and the triangle inequality.
pub fn validate_metric(matrix: &[Vec<f64>]) -> Result<MetricReport> {
    check_metric(matrix, true)
}

fn check_metric(matrix: &[Vec<f64>], triangle: bool) -> Result<MetricReport> {
    let n = matrix.len();
    if matrix.iter().any(|row| row.len() != n) {
        return Err(Error::domain("distance matrix is not square"));
    }
    for i in 0..n {
        for j in 0..n {
            let v = matrix[i][j];
            if !(v >= 0.0) || !v.is_finite() {
                return Ok(MetricReport::Negative { i, j });
            }
        }
    }
    for i in 0..n {
        if matrix[i][i] != 0.0 {
            return Ok(MetricReport::NonzeroDiagonal { i });
        }
        for j in (i + 1)..n {
            if (matrix[i][j] - matrix[j][i]).abs() > crate::TOL {
                return Ok(MetricReport::Asymmetric { i, j });
            }
        }
    }
    if !triangle {
        return Ok(MetricReport::Ok);
    }
    for i in 0..n {
        for j in 0..n {
            let dij = matrix[i][j];
            let slack = crate::TOL * dij.max(1.0);
            for k in 0..n {
                if dij > matrix[i][k] + matrix[k][j] + slack {
                    return Ok(MetricReport::Triangle { i, j, k });
                }
            }
        }
    }
    Ok(MetricReport::Ok)
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    points: Vec<Value>,
    facilities: Vec<Value>,
    k: usize,
    metric: MetricJson,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum MetricJson {
    Matrix { values: Vec<Vec<f64>> },
    Coords { dim: usize, coords: BTreeMap<String, Vec<f64>> },
}

fn id_string(v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(Error::InvalidInput(format!("unsupported id {other}"))),
    }
}

impl MetricInstance {
    /// Builds an instance from a full matrix over points followed by facilities.
    pub fn from_matrix(
        points: Vec<String>,
        facilities: Vec<String>,
        k: usize,
        matrix: Vec<Vec<f64>>,
    ) -> Result<Self> {
        Self::build(points, facilities, k, matrix, true)
    }

    /// Like [`from_matrix`](Self::from_matrix) but skips the cubic triangle check.
    pub fn from_matrix_unchecked_triangle(
        points: Vec<String>,
        facilities: Vec<String>,
        k: usize,
        matrix: Vec<Vec<f64>>,
    ) -> Result<Self> {
        Self::build(points, facilities, k, matrix, false)
    }

    fn build(
        points: Vec<String>,
        facilities: Vec<String>,
        k: usize,
        matrix: Vec<Vec<f64>>,
        check_triangle: bool,
    ) -> Result<Self> {
        let total = points.len() + facilities.len();
        if points.is_empty() {
            return Err(Error::InvalidInput("instance has no points".into()));
        }
        if facilities.is_empty() {
            return Err(Error::InvalidInput("instance has no facilities".into()));
        }
        if k == 0 || k > facilities.len() {
            return Err(Error::InvalidInput(format!(
                "k = {k} must satisfy 1 <= k <= |F| = {}",
                facilities.len()
            )));
        }
        if matrix.len() != total || matrix.iter().any(|r| r.len() != total) {
            return Err(Error::InvalidInput(format!(
                "distance matrix must be {total}x{total} (points then facilities)"
            )));
        }
        let report = check_metric(&matrix, check_triangle)?;
        if !report.is_ok() {
            return Err(Error::InvalidInput(format!("distance matrix is not a metric: {report:?}")));
        }
        let dist = matrix.into_iter().flatten().collect();
        Ok(MetricInstance { points, facilities, k, dist })
    }

    /// Euclidean instance from coordinates listed points first, then facilities.
    pub fn from_coords(
        points: Vec<String>,
        facilities: Vec<String>,
        k: usize,
        coords: &[Vec<f64>],
    ) -> Result<Self> {
        let total = points.len() + facilities.len();
        if coords.len() != total {
            return Err(Error::InvalidInput(format!("expected {total} coordinate rows")));
        }
        let dim = coords.first().map_or(0, |c| c.len());
        if coords.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidInput("coordinates have mixed dimensions".into()));
        }
        let matrix = euclidean_matrix(coords);
        Self::from_matrix_unchecked_triangle(points, facilities, k, matrix)
    }

    /// Uniform random points and facilities in `[0,1]^dim`, deterministic per seed.
    pub fn random_uniform(n: usize, num_facilities: usize, k: usize, dim: usize, seed: u64) -> Result<Self> {
        if n == 0 || num_facilities == 0 || dim == 0 {
            return Err(Error::domain("sizes must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords: Vec<Vec<f64>> = (0..n + num_facilities)
            .map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let points = (0..n).map(|i| format!("p{i}")).collect();
        let facilities = (0..num_facilities).map(|i| format!("f{i}")).collect();
        Self::from_coords(points, facilities, k, &coords)
    }

    /// Instance on the real line.
    pub fn on_line(points: &[f64], facilities: &[f64], k: usize) -> Result<Self> {
        let coords: Vec<Vec<f64>> = points.iter().chain(facilities).map(|&c| vec![c]).collect();
        let pids = (0..points.len()).map(|i| format!("p{i}")).collect();
        let fids = (0..facilities.len()).map(|i| format!("f{i}")).collect();
        Self::from_coords(pids, fids, k, &coords)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s)?;
        Self::from_json_value(&v)
    }

    pub fn from_json_value(v: &Value) -> Result<Self> {
        let raw: InstanceJson = serde_json::from_value(v.clone())?;
        let points = raw.points.iter().map(id_string).collect::<Result<Vec<_>>>()?;
        let facilities = raw.facilities.iter().map(id_string).collect::<Result<Vec<_>>>()?;
        match raw.metric {
            MetricJson::Matrix { values } => Self::from_matrix(points, facilities, raw.k, values),
            MetricJson::Coords { dim, coords } => {
                let mut rows = Vec::with_capacity(points.len() + facilities.len());
                for id in points.iter().chain(&facilities) {
                    let c = coords
                        .get(id)
                        .ok_or_else(|| Error::InvalidInput(format!("no coordinates for id {id}")))?;
                    if c.len() != dim {
                        return Err(Error::InvalidInput(format!("coordinates of {id} are not {dim}-dimensional")));
                    }
                    rows.push(c.clone());
                }
                Self::from_coords(points, facilities, raw.k, &rows)
            }
        }
    }

    /// Serializes with the distance matrix materialized.
    pub fn to_json_value(&self) -> Value {
        let total = self.node_count();
        let values: Vec<Vec<f64>> = (0..total).map(|i| self.dist[i * total..(i + 1) * total].to_vec()).collect();
        let raw = InstanceJson {
            points: self.points.iter().cloned().map(Value::String).collect(),
            facilities: self.facilities.iter().cloned().map(Value::String).collect(),
            k: self.k,
            metric: MetricJson::Matrix { values },
        };
        serde_json::to_value(raw).expect("instance serializes")
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn num_facilities(&self) -> usize {
        self.facilities.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn point_ids(&self) -> &[String] {
        &self.points
    }

    pub fn facility_ids(&self) -> &[String] {
        &self.facilities
    }

    pub fn facility_index(&self, id: &str) -> Option<usize> {
        self.facilities.iter().position(|f| f == id)
    }

    pub fn node_count(&self) -> usize {
        self.points.len() + self.facilities.len()
    }

    /// Same instance with a different budget.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.num_facilities() {
            return Err(Error::InvalidInput(format!("k = {k} out of range 1..={}", self.num_facilities())));
        }
        let mut out = self.clone();
        out.k = k;
        Ok(out)
    }

    /// All distances multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.dist.iter_mut().for_each(|d| *d *= c);
        out
    }

    #[inline]
    pub fn node_dist(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.node_count() + b]
    }

    /// Distance from point `p` to facility `x`.
    #[inline]
    pub fn pf(&self, p: usize, x: usize) -> f64 {
        self.node_dist(p, self.points.len() + x)
    }

    /// Distance between facilities.
    #[inline]
    pub fn ff(&self, x: usize, y: usize) -> f64 {
        let n = self.points.len();
        self.node_dist(n + x, n + y)
    }

    pub fn max_pf(&self) -> f64 {
        let mut best = 0.0f64;
        for p in 0..self.n() {
            for x in 0..self.num_facilities() {
                best = best.max(self.pf(p, x));
            }
        }
        best
    }

    /// Smallest strictly positive point-facility distance.
    pub fn min_positive_pf(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for p in 0..self.n() {
            for x in 0..self.num_facilities() {
                let d = self.pf(p, x);
                if d > 0.0 && best.is_none_or(|b| d < b) {
                    best = Some(d);
                }
            }
        }
        best
    }

    /// Nearest facility of `p` among `set`, ties to the smaller index.
    pub fn nearest_in(&self, p: usize, set: &[usize]) -> usize {
        let mut best = set[0];
        for &x in &set[1..] {
            let d = self.pf(p, x);
            let b = self.pf(p, best);
            if d < b || (d == b && x < best) {
                best = x;
            }
        }
        best
    }
}

fn euclidean_matrix(coords: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total = coords.len();
    let mut m = vec![vec![0.0; total]; total];
    for i in 0..total {
        for j in (i + 1)..total {
            let d = coords[i]
                .iter()
                .zip(&coords[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            m[i][j] = d;
            m[j][i] = d;
        }
    }
    m
}

/// A set of at most `k` centers and a total assignment of points into it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clustering {
    centers: Vec<usize>,
    assignment: Vec<usize>,
}

impl Clustering {
    pub fn new(inst: &MetricInstance, mut centers: Vec<usize>, assignment: Vec<usize>) -> Result<Self> {
        centers.sort_unstable();
        centers.dedup();
        if centers.is_empty() {
            return Err(Error::domain("clustering needs at least one center"));
        }
        if centers.len() > inst.k() {
            return Err(Error::domain(format!("{} centers exceed k = {}", centers.len(), inst.k())));
        }
        if let Some(&x) = centers.iter().find(|&&x| x >= inst.num_facilities()) {
            return Err(Error::domain(format!("unknown facility index {x}")));
        }
        if assignment.len() != inst.n() {
            return Err(Error::domain("assignment must cover every point"));
        }
        if let Some(p) = assignment.iter().position(|x| centers.binary_search(x).is_err()) {
            return Err(Error::domain(format!("point {p} is assigned outside the center set")));
        }
        Ok(Clustering { centers, assignment })
    }

    /// Sorted center indices.
    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn center_of(&self, p: usize) -> usize {
        self.assignment[p]
    }
}

/// Coordinate `p` is `d(p,x)` when `p` is assigned to `x`, else zero.
pub fn cluster_distance_vector(inst: &MetricInstance, sol: &Clustering, x: usize) -> Result<Vec<f64>> {
    if x >= inst.num_facilities() {
        return Err(Error::domain(format!("unknown facility index {x}")));
    }
    if sol.centers.binary_search(&x).is_err() {
        return Err(Error::domain(format!("facility {x} is not a center")));
    }
    Ok((0..inst.n())
        .map(|p| if sol.assignment[p] == x { inst.pf(p, x) } else { 0.0 })
        .collect())
}

/// `g` applied to the per-cluster `f` costs, zero-padded to length `k`.
pub fn solution_cost(inst: &MetricInstance, sol: &Clustering, f: &NormSpec, g: &NormSpec) -> Result<f64> {
    if f.arity() != inst.n() {
        return Err(Error::domain(format!("inner norm arity {} != n = {}", f.arity(), inst.n())));
    }
    if g.arity() != inst.k() {
        return Err(Error::domain(format!("outer norm arity {} != k = {}", g.arity(), inst.k())));
    }
    let mut costs = vec![0.0; inst.k()];
    for (slot, &x) in sol.centers.iter().enumerate() {
        costs[slot] = f.eval(&cluster_distance_vector(inst, sol, x)?)?;
    }
    g.eval(&costs)
}

/// Assigns every point to its nearest center in `centers`.
pub fn nearest_assignment(inst: &MetricInstance, centers: &[usize]) -> Result<Clustering> {
    if centers.is_empty() {
        return Err(Error::domain("center set is empty"));
    }
    let mut set = centers.to_vec();
    set.sort_unstable();
    set.dedup();
    if let Some(&x) = set.iter().find(|&&x| x >= inst.num_facilities()) {
        return Err(Error::domain(format!("unknown facility index {x}")));
    }
    let assignment = (0..inst.n()).map(|p| inst.nearest_in(p, &set)).collect();
    Clustering::new(inst, set, assignment)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> MetricInstance {
        MetricInstance::on_line(&[0.0, 2.0, 10.0], &[0.0, 10.0], 2).unwrap()
    }

    #[test]
    fn cluster_vectors_on_line() {
        let inst = line();
        let cl = Clustering::new(&inst, vec![0, 1], vec![0, 0, 1]).unwrap();
        assert_eq!(cluster_distance_vector(&inst, &cl, 0).unwrap(), vec![0.0, 2.0, 0.0]);
        assert_eq!(cluster_distance_vector(&inst, &cl, 1).unwrap(), vec![0.0, 0.0, 0.0]);
        let cl2 = Clustering::new(&inst, vec![0, 1], vec![0, 0, 0]).unwrap();
        assert_eq!(cluster_distance_vector(&inst, &cl2, 1).unwrap(), vec![0.0; 3]);
        assert!(cluster_distance_vector(&inst, &cl, 7).is_err());
    }

    #[test]
    fn costs_on_line() {
        let inst = line();
        let cl = Clustering::new(&inst, vec![0, 1], vec![0, 0, 1]).unwrap();
        let msr = solution_cost(&inst, &cl, &NormSpec::top(1, 3).unwrap(), &NormSpec::l1(2)).unwrap();
        assert_eq!(msr, 2.0);
        let load = solution_cost(&inst, &cl, &NormSpec::l1(3), &NormSpec::linf(2)).unwrap();
        assert_eq!(load, 2.0);
        assert!(solution_cost(&inst, &cl, &NormSpec::l1(2), &NormSpec::l1(2)).is_err());
    }

    #[test]
    fn padding_to_k() {
        let inst = line();
        let cl = Clustering::new(&inst, vec![0], vec![0, 0, 0]).unwrap();
        let c = solution_cost(&inst, &cl, &NormSpec::l1(3), &NormSpec::l1(2)).unwrap();
        assert_eq!(c, 12.0);
    }

    #[test]
    fn single_point_on_its_center_costs_nothing() {
        let inst = MetricInstance::on_line(&[4.0], &[4.0], 1).unwrap();
        let cl = nearest_assignment(&inst, &[0]).unwrap();
        let c = solution_cost(&inst, &cl, &NormSpec::lp(2.0, 1).unwrap(), &NormSpec::linf(1)).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn nearest_assignment_rules() {
        let inst = line();
        assert_eq!(nearest_assignment(&inst, &[0, 1]).unwrap().assignment(), &[0, 0, 1]);
        assert_eq!(nearest_assignment(&inst, &[1]).unwrap().assignment(), &[1, 1, 1]);
        let tie = MetricInstance::on_line(&[5.0], &[0.0, 10.0], 2).unwrap();
        assert_eq!(nearest_assignment(&tie, &[1, 0]).unwrap().assignment(), &[0]);
        assert!(nearest_assignment(&inst, &[]).is_err());
    }

    #[test]
    fn metric_validation() {
        let c = [0.0, 1.0, 5.0];
        let m: Vec<Vec<f64>> = c.iter().map(|a| c.iter().map(|b| f64::abs(a - b)).collect()).collect();
        assert_eq!(validate_metric(&m).unwrap(), MetricReport::Ok);
        let bad = vec![vec![0.0, 1.0, 10.0], vec![1.0, 0.0, 1.0], vec![10.0, 1.0, 0.0]];
        assert_eq!(validate_metric(&bad).unwrap(), MetricReport::Triangle { i: 0, j: 2, k: 1 });
        let asym = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert_eq!(validate_metric(&asym).unwrap(), MetricReport::Asymmetric { i: 0, j: 1 });
        assert!(validate_metric(&[vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let inst = MetricInstance::random_uniform(4, 3, 2, 2, 11).unwrap();
        let v = inst.to_json_value();
        let back = MetricInstance::from_json_value(&v).unwrap();
        assert_eq!(inst, back);
        let coords = r#"{"points":[1,2],"facilities":["a"],"k":1,
            "metric":{"type":"coords","dim":1,"coords":{"1":[0],"2":[3],"a":[1]}}}"#;
        let inst = MetricInstance::from_json_str(coords).unwrap();
        assert_eq!(inst.pf(1, 0), 2.0);
        let bad_k = r#"{"points":["a"],"facilities":["b"],"k":2,"metric":{"type":"matrix","values":[[0,1],[1,0]]}}"#;
        assert!(MetricInstance::from_json_str(bad_k).is_err());
    }
}
