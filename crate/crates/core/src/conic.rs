//! Real-valued conic programs (linear, second-order and rotated second-order
//! cone rows), the complex-to-real embedding, and a solve routine backed by
//! the Clarabel interior-point solver.

use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};

/// `sum_j c_j x_j + constant`
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Affine { terms: Vec::new(), constant: c }
    }

    pub fn var(i: usize) -> Self {
        Affine { terms: vec![(i, 1.0)], constant: 0.0 }
    }

    pub fn term(i: usize, c: f64) -> Self {
        Affine { terms: vec![(i, c)], constant: 0.0 }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }

    pub fn add_term(&mut self, i: usize, c: f64) {
        if c != 0.0 {
            self.terms.push((i, c));
        }
    }

    /// Largest absolute coefficient, constant included.
    pub fn scale(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.1.abs())
            .fold(self.constant.abs(), f64::max)
    }

    fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.0).max()
    }
}

impl Add for Affine {
    type Output = Affine;
    fn add(mut self, rhs: Affine) -> Affine {
        self += rhs;
        self
    }
}

impl AddAssign for Affine {
    fn add_assign(&mut self, rhs: Affine) {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl Sub for Affine {
    type Output = Affine;
    fn sub(self, rhs: Affine) -> Affine {
        self + (-rhs)
    }
}

impl Neg for Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self * -1.0
    }
}

impl Mul<f64> for Affine {
    type Output = Affine;
    fn mul(mut self, s: f64) -> Affine {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }
}

impl Add<f64> for Affine {
    type Output = Affine;
    fn add(mut self, c: f64) -> Affine {
        self.constant += c;
        self
    }
}

impl Sub<f64> for Affine {
    type Output = Affine;
    fn sub(mut self, c: f64) -> Affine {
        self.constant -= c;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    /// `expr >= 0`
    NonNeg(Affine),
    /// `expr == 0`
    Zero(Affine),
    /// `||u|| <= t`
    Soc { t: Affine, u: Vec<Affine> },
    /// `||u||^2 <= y z` with `y, z >= 0`
    Rsoc { y: Affine, z: Affine, u: Vec<Affine> },
}

impl Block {
    /// Amount by which `x` violates the block (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            Block::NonNeg(e) => (-e.eval(x)).max(0.0),
            Block::Zero(e) => e.eval(x).abs(),
            Block::Soc { t, u } => {
                let n = u.iter().map(|a| a.eval(x).powi(2)).sum::<f64>().sqrt();
                (n - t.eval(x)).max(0.0)
            }
            Block::Rsoc { y, z, u } => {
                let (y, z) = (y.eval(x), z.eval(x));
                let n2 = u.iter().map(|a| a.eval(x).powi(2)).sum::<f64>();
                // same geometry as the SOC the solver sees
                let lhs = ((y - z).powi(2) + 4.0 * n2).sqrt();
                (lhs - (y + z)).max(0.0) / 2.0
            }
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Block::NonNeg(e) | Block::Zero(e) => e.max_var(),
            Block::Soc { t, u } => std::iter::once(t).chain(u).filter_map(|a| a.max_var()).max(),
            Block::Rsoc { y, z, u } => [y, z].into_iter().chain(u).filter_map(|a| a.max_var()).max(),
        }
    }
}

/// `maximize objective` subject to a list of labelled blocks.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    pub names: Vec<String>,
    pub objective: Affine,
    pub blocks: Vec<(String, Block)>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    /// Adds `len` complex variables as interleaved (re, im) pairs.
    pub fn add_complex(&mut self, name: &str, len: usize) -> CVecVar {
        let start = self.names.len();
        for j in 0..len {
            self.names.push(format!("{name}[{j}].re"));
            self.names.push(format!("{name}[{j}].im"));
        }
        CVecVar { start, len }
    }

    pub fn nonneg(&mut self, label: impl Into<String>, e: Affine) {
        self.blocks.push((label.into(), Block::NonNeg(e)));
    }

    pub fn zero(&mut self, label: impl Into<String>, e: Affine) {
        self.blocks.push((label.into(), Block::Zero(e)));
    }

    pub fn soc(&mut self, label: impl Into<String>, t: Affine, u: Vec<Affine>) {
        self.blocks.push((label.into(), Block::Soc { t, u }));
    }

    pub fn rsoc(&mut self, label: impl Into<String>, y: Affine, z: Affine, u: Vec<Affine>) {
        self.blocks.push((label.into(), Block::Rsoc { y, z, u }));
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let too_big = |m: Option<usize>| m.is_some_and(|v| v >= n);
        if too_big(self.objective.max_var()) {
            return Err(Error::Solver("objective references an undeclared variable".into()));
        }
        for (label, b) in &self.blocks {
            if too_big(b.max_var()) {
                return Err(Error::Solver(format!("block `{label}` references an undeclared variable")));
            }
            let finite = |a: &Affine| a.constant.is_finite() && a.terms.iter().all(|t| t.1.is_finite());
            let ok = match b {
                Block::NonNeg(e) | Block::Zero(e) => finite(e),
                Block::Soc { t, u } => finite(t) && u.iter().all(finite),
                Block::Rsoc { y, z, u } => finite(y) && finite(z) && u.iter().all(finite),
            };
            if !ok {
                return Err(Error::Solver(format!("block `{label}` has non-finite data")));
            }
        }
        Ok(())
    }

    /// Worst violation over all blocks and the label where it occurs.
    pub fn max_violation(&self, x: &[f64]) -> (f64, Option<&str>) {
        let mut worst = 0.0;
        let mut at = None;
        for (label, b) in &self.blocks {
            let v = b.violation(x);
            if v > worst {
                worst = v;
                at = Some(label.as_str());
            }
        }
        (worst, at)
    }

    /// Human-readable listing, one block per line.
    pub fn dump(&self) -> String {
        let name = |i: usize| self.names.get(i).map_or("?", String::as_str);
        let fmt_aff = |a: &Affine| {
            let mut s = String::new();
            for &(i, c) in &a.terms {
                let _ = write!(s, "{c:+.12e}*{} ", name(i));
            }
            let _ = write!(s, "{:+.12e}", a.constant);
            s
        };
        let list = |u: &[Affine]| u.iter().map(fmt_aff).collect::<Vec<_>>().join(" ; ");
        let mut out = format!("vars {}\nmaximize {}\n", self.num_vars(), fmt_aff(&self.objective));
        for (label, b) in &self.blocks {
            let _ = match b {
                Block::NonNeg(e) => writeln!(out, "[{label}] nonneg: {} >= 0", fmt_aff(e)),
                Block::Zero(e) => writeln!(out, "[{label}] zero: {} == 0", fmt_aff(e)),
                Block::Soc { t, u } => writeln!(out, "[{label}] soc: || {} || <= {}", list(u), fmt_aff(t)),
                Block::Rsoc { y, z, u } => writeln!(
                    out,
                    "[{label}] rsoc: || {} ||^2 <= ({}) * ({})",
                    list(u),
                    fmt_aff(y),
                    fmt_aff(z)
                ),
            };
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalLimit,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    /// Objective value (maximization sense).
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: u32,
    /// Largest re-substitution violation over all blocks.
    pub max_violation: f64,
}

#[derive(Default)]
struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    /// Appends a row with slack `s = e(x)`, i.e. `A = -coeffs`, `b = constant`.
    fn push(&mut self, e: &Affine) {
        let r = self.b.len();
        for &(j, c) in &e.terms {
            self.i.push(r);
            self.j.push(j);
            self.v.push(-c);
        }
        self.b.push(e.constant);
    }

    fn append(&mut self, other: Rows) {
        let off = self.b.len();
        self.i.extend(other.i.into_iter().map(|r| r + off));
        self.j.extend(other.j);
        self.v.extend(other.v);
        self.b.extend(other.b);
    }
}

pub fn solve(p: &ConicProgram, tol: f64) -> Result<Solution> {
    p.validate()?;
    let n = p.num_vars();
    let mut zero = Rows::default();
    let mut nonneg = Rows::default();
    let mut socs = Rows::default();
    let mut soc_dims = Vec::new();
    for (_, b) in &p.blocks {
        match b {
            Block::Zero(e) => zero.push(e),
            Block::NonNeg(e) => nonneg.push(e),
            Block::Soc { t, u } => {
                socs.push(t);
                u.iter().for_each(|a| socs.push(a));
                soc_dims.push(1 + u.len());
            }
            Block::Rsoc { y, z, u } => {
                socs.push(&(y.clone() + z.clone()));
                socs.push(&(y.clone() - z.clone()));
                u.iter().for_each(|a| socs.push(&(a.clone() * 2.0)));
                soc_dims.push(2 + u.len());
            }
        }
    }
    let mut cones = Vec::new();
    if !zero.b.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(zero.b.len()));
    }
    if !nonneg.b.is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(nonneg.b.len()));
    }
    cones.extend(soc_dims.iter().map(|&d| SupportedConeT::SecondOrderConeT(d)));
    let mut rows = zero;
    rows.append(nonneg);
    rows.append(socs);
    let m = rows.b.len();

    let a = CscMatrix::new_from_triplets(m, n, rows.i, rows.j, rows.v);
    let pmat = CscMatrix::zeros((n, n));
    let mut q = vec![0.0; n];
    for &(j, c) in &p.objective.terms {
        q[j] -= c;
    }
    let data = Standard { pmat, q, a, b: rows.b, cones };
    // Clarabel's tolerances are relative to the equilibrated data; retry
    // without equilibration and then tighter until the unscaled
    // re-substitution meets 10 tol, else keep the least violating iterate.
    let mut best: Option<Solution> = None;
    for (attempt, (attempt_tol, equilibrate)) in [(tol, true), (tol, false), (tol * 1e-2, false)].into_iter().enumerate() {
        let s = clarabel_solve(p, &data, attempt_tol, equilibrate)?;
        match s.status {
            Status::Optimal if s.max_violation <= 10.0 * tol => return Ok(s),
            Status::Infeasible | Status::Unbounded if attempt == 0 => return Ok(s),
            Status::Infeasible | Status::Unbounded => {}
            _ => {
                if best.as_ref().is_none_or(|b| s.max_violation < b.max_violation) {
                    best = Some(s);
                }
            }
        }
    }
    let mut sol = best.expect("an attempt without a certificate");
    sol.status = Status::NumericalLimit;
    Ok(sol)
}

/// Program data in Clarabel's `min q'x s.t. Ax + s = b, s in K` form.
struct Standard {
    pmat: CscMatrix<f64>,
    q: Vec<f64>,
    a: CscMatrix<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

fn clarabel_solve(p: &ConicProgram, d: &Standard, tol: f64, equilibrate: bool) -> Result<Solution> {
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .equilibrate_enable(equilibrate)
        .max_iter(200)
        .tol_feas(tol)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_ktratio(1e-6)
        .build()
        .map_err(|e| Error::Solver(format!("settings: {e:?}")))?;
    let mut solver =
        DefaultSolver::new(&d.pmat, &d.q, &d.a, &d.b, &d.cones, settings).map_err(|e| Error::Solver(format!("setup: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved => Status::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Status::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Status::Unbounded,
        _ => Status::NumericalLimit,
    };
    let x = sol.x.clone();
    let objective = p.objective.eval(&x);
    let (max_violation, _) = p.max_violation(&x);
    Ok(Solution {
        status,
        objective,
        primal_residual: solver.info.res_primal,
        dual_residual: solver.info.res_dual,
        gap: solver.info.gap_rel,
        iterations: sol.iterations,
        max_violation,
        x,
    })
}

/// A complex vector variable stored as interleaved (re, im) reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CVecVar {
    pub start: usize,
    pub len: usize,
}

impl CVecVar {
    pub fn re(&self, j: usize) -> usize {
        self.start + 2 * j
    }

    pub fn im(&self, j: usize) -> usize {
        self.start + 2 * j + 1
    }

    pub fn extract(&self, x: &[f64]) -> CVec {
        CVec::from_fn(self.len, |j, _| C64::new(x[self.re(j)], x[self.im(j)]))
    }

    pub fn write(&self, v: &CVec, x: &mut [f64]) {
        for j in 0..self.len {
            x[self.re(j)] = v[j].re;
            x[self.im(j)] = v[j].im;
        }
    }

    /// `sum_j c_j x_j` as (real part, imaginary part).
    pub fn linear(&self, c: &[C64]) -> (Affine, Affine) {
        let mut re = Affine::default();
        let mut im = Affine::default();
        for (j, cj) in c.iter().enumerate().take(self.len) {
            re.add_term(self.re(j), cj.re);
            re.add_term(self.im(j), -cj.im);
            im.add_term(self.re(j), cj.im);
            im.add_term(self.im(j), cj.re);
        }
        (re, im)
    }

    /// `a^H x` as (real part, imaginary part).
    pub fn inner(&self, a: &CVec) -> (Affine, Affine) {
        let c: Vec<C64> = a.iter().map(|z| z.conj()).collect();
        self.linear(&c)
    }

    /// `Re{a^H x}`
    pub fn re_inner(&self, a: &CVec) -> Affine {
        self.inner(a).0
    }

    /// Rows `u` with `||u||^2 = x^H Q x` for a Hermitian PSD `Q`.
    pub fn quad_rows(&self, q: &CMat) -> Result<Vec<Affine>> {
        let r = crate::linalg::hermitian_factor(q)?;
        Ok(self.matrix_rows(&r))
    }

    /// Rows `u` with `||u||^2 = ||R x||^2`.
    pub fn matrix_rows(&self, r: &CMat) -> Vec<Affine> {
        let mut out = Vec::with_capacity(2 * r.nrows());
        for row in 0..r.nrows() {
            let c: Vec<C64> = (0..r.ncols()).map(|j| r[(row, j)]).collect();
            let (re, im) = self.linear(&c);
            out.push(re);
            out.push(im);
        }
        out
    }

    /// Rows with `||u||^2 = ||x||^2`.
    pub fn norm_rows(&self) -> Vec<Affine> {
        (0..self.len)
            .flat_map(|j| [Affine::var(self.re(j)), Affine::var(self.im(j))])
            .collect()
    }
}

/// A complex matrix variable stored column by column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CMatVar {
    pub cols: Vec<CVecVar>,
    pub nrows: usize,
}

impl CMatVar {
    pub fn add(p: &mut ConicProgram, name: &str, nrows: usize, ncols: usize) -> Self {
        let cols = (0..ncols)
            .map(|c| p.add_complex(&format!("{name}[:,{c}]"), nrows))
            .collect();
        CMatVar { cols, nrows }
    }

    pub fn extract(&self, x: &[f64]) -> CMat {
        let mut m = CMat::zeros(self.nrows, self.cols.len());
        for (c, col) in self.cols.iter().enumerate() {
            m.set_column(c, &col.extract(x));
        }
        m
    }

    pub fn write(&self, v: &CMat, x: &mut [f64]) {
        for (c, col) in self.cols.iter().enumerate() {
            col.write(&v.column(c).into_owned(), x);
        }
    }

    pub fn norm_rows(&self) -> Vec<Affine> {
        self.cols.iter().flat_map(|c| c.norm_rows()).collect()
    }
}
