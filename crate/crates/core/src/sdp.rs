//! Small dense complex semidefinite programs.
//!
//! Problems have the form
//!
//! ```text
//! maximize    Σ_b tr(C_b X_b)
//! subject to  Σ_b tr(A_kb X_b)  (≥ | ≤ | =)  b_k     for every constraint k
//!             X_b ⪰ 0           Hermitian
//! ```
//!
//! Each complex block is mapped to its real embedding `[Re −Im; Im Re]`,
//! each inequality gets a scalar slack, and the resulting real standard-form
//! problem is solved by a primal-dual interior-point method on the
//! homogeneous self-dual embedding with Nesterov–Todd scaling and a Mehrotra
//! predictor-corrector. The embedding yields either an optimal pair or a
//! certificate of primal or dual infeasibility.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::linalg::{cholesky, hermitian_eigen, lu_solve, solve_hpd, svd_jacobi, CMatrix, RMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    GreaterEq,
    LessEq,
    Equal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpConstraint {
    /// One Hermitian coefficient matrix per block.
    pub coeffs: Vec<CMatrix>,
    pub rhs: f64,
    pub sense: Sense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub objective: Vec<CMatrix>,
    pub constraints: Vec<SdpConstraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// No feasible point exists; a dual ray certifies it.
    Infeasible,
    /// The objective is unbounded above; a primal ray certifies it.
    Unbounded,
    /// The iterates stalled short of `tolerance` but within
    /// `acceptable_tolerance`; the best iterate is returned.
    NearOptimal,
    /// Iteration limit or numerical breakdown; the best iterate is returned.
    MaxIterations,
}

/// Relative residuals at the returned iterate, measured on the problem with
/// every constraint row and the objective normalized to unit norm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Residuals {
    fn worst(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub blocks: Vec<CMatrix>,
    pub objective: f64,
    /// Upper bound on the optimal value from the dual iterate.
    pub dual_bound: f64,
    pub status: SdpStatus,
    pub residuals: Residuals,
    /// Size of the infeasibility certificate's residual, when one was found.
    pub infeasibility: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpSettings {
    pub tolerance: f64,
    /// Residual level still reported as [`SdpStatus::NearOptimal`] when the
    /// iterates stop improving before reaching `tolerance`.
    pub acceptable_tolerance: f64,
    /// Accepted residual of an infeasibility certificate.
    pub infeasibility_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self { tolerance: 1e-8, acceptable_tolerance: 1e-6, infeasibility_tolerance: 1e-8, max_iterations: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SdpError {
    #[error("problem has no variable blocks")]
    NoBlocks,
    #[error("block dimension must be positive")]
    EmptyBlock,
    #[error("{what}: expected {expected} blocks or an {expected_dim}x{expected_dim} matrix, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        expected_dim: usize,
        got: usize,
    },
    #[error("coefficient matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("problem data contains non-finite values")]
    NonFinite,
    #[error("malformed problem dump at line {line}: {reason}")]
    Parse { line: usize, reason: &'static str },
}

impl SdpProblem {
    pub fn validate(&self) -> Result<(), SdpError> {
        if self.block_dims.is_empty() {
            return Err(SdpError::NoBlocks);
        }
        if self.block_dims.contains(&0) {
            return Err(SdpError::EmptyBlock);
        }
        let check_set = |what: &'static str, mats: &[CMatrix]| -> Result<(), SdpError> {
            if mats.len() != self.block_dims.len() {
                return Err(SdpError::Dimension { what, expected: self.block_dims.len(), expected_dim: 0, got: mats.len() });
            }
            for (m, &n) in mats.iter().zip(&self.block_dims) {
                if m.rows() != n || m.cols() != n {
                    return Err(SdpError::Dimension { what, expected: 1, expected_dim: n, got: m.rows() });
                }
                if !m.is_finite() {
                    return Err(SdpError::NonFinite);
                }
                let defect = m.hermitian_defect();
                if defect > 1e-12 * (1.0 + m.max_abs()) {
                    return Err(SdpError::NotHermitian(defect));
                }
            }
            Ok(())
        };
        check_set("objective", &self.objective)?;
        for c in &self.constraints {
            check_set("constraint", &c.coeffs)?;
            if !c.rhs.is_finite() {
                return Err(SdpError::NonFinite);
            }
        }
        Ok(())
    }

    /// `Σ_b tr(C_b X_b)`.
    pub fn objective_value(&self, blocks: &[CMatrix]) -> f64 {
        self.objective.iter().zip(blocks).map(|(c, x)| c.dot(x)).sum()
    }

    /// Left-hand side of constraint `k` at `blocks`.
    pub fn constraint_value(&self, k: usize, blocks: &[CMatrix]) -> f64 {
        self.constraints[k].coeffs.iter().zip(blocks).map(|(a, x)| a.dot(x)).sum()
    }

    /// Plain-text dump for offline cross-checking with an external solver.
    ///
    /// ```text
    /// sdp maximize
    /// blocks <n_1> … <n_B>
    /// objective
    /// <n_1 rows of n_1 "re im" pairs for block 1>
    /// …
    /// constraint <ge|le|eq> <rhs>
    /// <one matrix per block, as above>
    /// ```
    ///
    /// Numbers use the shortest representation that round-trips exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let dims: Vec<String> = self.block_dims.iter().map(|d| alloc::format!("{d}")).collect();
        let _ = writeln!(out, "sdp maximize\nblocks {}\nobjective", dims.join(" "));
        let write_mats = |out: &mut String, mats: &[CMatrix]| {
            for m in mats {
                for r in 0..m.rows() {
                    let row: Vec<String> = (0..m.cols()).map(|c| alloc::format!("{:e} {:e}", m[(r, c)].re, m[(r, c)].im)).collect();
                    let _ = writeln!(out, "{}", row.join(" "));
                }
            }
        };
        write_mats(&mut out, &self.objective);
        for c in &self.constraints {
            let sense = match c.sense {
                Sense::GreaterEq => "ge",
                Sense::LessEq => "le",
                Sense::Equal => "eq",
            };
            let _ = writeln!(out, "constraint {sense} {:e}", c.rhs);
            write_mats(&mut out, &c.coeffs);
        }
        out
    }

    /// Parses the output of [`SdpProblem::to_text`].
    pub fn from_text(text: &str) -> Result<Self, SdpError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let err = |line: usize, reason| SdpError::Parse { line: line + 1, reason };
        let (n, header) = lines.next().ok_or(err(0, "empty input"))?;
        if header.trim() != "sdp maximize" {
            return Err(err(n, "expected `sdp maximize`"));
        }
        let (n, blocks) = lines.next().ok_or(err(n, "missing `blocks` line"))?;
        let mut words = blocks.split_whitespace();
        if words.next() != Some("blocks") {
            return Err(err(n, "expected `blocks`"));
        }
        let block_dims = words.map(|w| w.parse::<usize>().map_err(|_| err(n, "bad block size"))).collect::<Result<Vec<_>, _>>()?;
        let read_mats = |lines: &mut dyn Iterator<Item = (usize, &str)>| -> Result<Vec<CMatrix>, SdpError> {
            let mut mats = Vec::new();
            for &d in &block_dims {
                let mut m = CMatrix::zeros(d, d);
                for r in 0..d {
                    let (n, line) = lines.next().ok_or(err(0, "truncated matrix"))?;
                    let nums = line.split_whitespace().map(|w| w.parse::<f64>().map_err(|_| err(n, "bad number"))).collect::<Result<Vec<_>, _>>()?;
                    if nums.len() != 2 * d {
                        return Err(err(n, "wrong row length"));
                    }
                    for c in 0..d {
                        m[(r, c)] = C64::new(nums[2 * c], nums[2 * c + 1]);
                    }
                }
                mats.push(m);
            }
            Ok(mats)
        };
        let (n, obj) = lines.next().ok_or(err(0, "missing `objective`"))?;
        if obj.trim() != "objective" {
            return Err(err(n, "expected `objective`"));
        }
        let objective = read_mats(&mut lines)?;
        let mut constraints = Vec::new();
        while let Some((n, line)) = lines.next() {
            let words: Vec<&str> = line.split_whitespace().collect();
            if words.len() != 3 || words[0] != "constraint" {
                return Err(err(n, "expected `constraint <sense> <rhs>`"));
            }
            let sense = match words[1] {
                "ge" => Sense::GreaterEq,
                "le" => Sense::LessEq,
                "eq" => Sense::Equal,
                _ => return Err(err(n, "unknown sense")),
            };
            let rhs = words[2].parse().map_err(|_| err(n, "bad rhs"))?;
            constraints.push(SdpConstraint { coeffs: read_mats(&mut lines)?, rhs, sense });
        }
        let problem = Self { block_dims, objective, constraints };
        problem.validate()?;
        Ok(problem)
    }
}

type Blocks = Vec<RMatrix>;

fn inner(a: &[RMatrix], b: &[RMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn blocks_norm(a: &[RMatrix]) -> f64 {
    inner(a, a).sqrt()
}

fn axpy(y: &mut [RMatrix], s: f64, x: &[RMatrix]) {
    for (yb, xb) in y.iter_mut().zip(x) {
        yb.add_scaled(s, xb);
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `[Re −Im; Im Re]`.
fn embed(a: &CMatrix) -> RMatrix {
    let n = a.rows();
    RMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = a[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Inverse of [`embed`], averaging the redundant copies.
fn unembed(y: &RMatrix) -> CMatrix {
    let n = y.rows() / 2;
    CMatrix::from_fn(n, n, |r, c| C64::new(0.5 * (y[(r, c)] + y[(r + n, c + n)]), 0.5 * (y[(r + n, c)] - y[(r, c + n)])))
}

/// Real standard form: minimize ⟨c, x⟩ s.t. ⟨a_k, x⟩ = b_k, x ⪰ 0.
struct Standard {
    c: Blocks,
    a: Vec<Blocks>,
    b: Vec<f64>,
    c_scale: f64,
    /// Sum of block orders (the barrier parameter).
    nu: f64,
    user_blocks: usize,
}

impl Standard {
    fn new(p: &SdpProblem) -> Self {
        let slacks = p.constraints.iter().filter(|c| c.sense != Sense::Equal).count();
        let mut dims: Vec<usize> = p.block_dims.iter().map(|d| 2 * d).collect();
        dims.extend(core::iter::repeat(1).take(slacks));
        let zeros = |dims: &[usize]| -> Blocks { dims.iter().map(|&d| RMatrix::zeros(d, d)).collect() };

        let mut c = zeros(&dims);
        for (cb, obj) in c.iter_mut().zip(&p.objective) {
            *cb = embed(obj).scaled(-0.5);
        }
        let mut c_scale = blocks_norm(&c);
        if c_scale == 0.0 {
            c_scale = 1.0;
        }
        c.iter_mut().for_each(|m| m.scale_mut(1.0 / c_scale));

        let mut a = Vec::with_capacity(p.constraints.len());
        let mut b = Vec::with_capacity(p.constraints.len());
        let mut slack = p.block_dims.len();
        for con in &p.constraints {
            let mut row = zeros(&dims);
            for (rb, coeff) in row.iter_mut().zip(&con.coeffs) {
                *rb = embed(coeff).scaled(0.5);
            }
            match con.sense {
                Sense::GreaterEq => row[slack][(0, 0)] = -1.0,
                Sense::LessEq => row[slack][(0, 0)] = 1.0,
                Sense::Equal => {}
            }
            if con.sense != Sense::Equal {
                slack += 1;
            }
            let mut scale = blocks_norm(&row);
            if scale == 0.0 {
                scale = 1.0;
            }
            row.iter_mut().for_each(|m| m.scale_mut(1.0 / scale));
            a.push(row);
            b.push(con.rhs / scale);
        }
        let nu = dims.iter().sum::<usize>() as f64;
        Self { c, a, b, c_scale, nu, user_blocks: p.block_dims.len() }
    }

    fn op(&self, x: &[RMatrix]) -> Vec<f64> {
        self.a.iter().map(|ak| inner(ak, x)).collect()
    }

    fn adjoint(&self, y: &[f64]) -> Blocks {
        let mut out: Blocks = self.c.iter().map(|m| RMatrix::zeros(m.rows(), m.cols())).collect();
        for (ak, &yk) in self.a.iter().zip(y) {
            axpy(&mut out, yk, ak);
        }
        out
    }
}

/// Nesterov–Todd scaling of one block: `R` with `R⁻¹ X R⁻ᵀ = Rᵀ S R = diag(λ)`.
struct Scaling {
    r: RMatrix,
    w: RMatrix,
    lambda: Vec<f64>,
}

impl Scaling {
    fn new(x: &RMatrix, s: &RMatrix) -> Option<Self> {
        let l1 = cholesky(x)?;
        let l2 = cholesky(s)?;
        let svd = svd_jacobi(&(&l2.transpose() * &l1));
        if svd.s.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        let n = x.rows();
        let inv_sqrt: Vec<f64> = svd.s.iter().map(|v| 1.0 / v.sqrt()).collect();
        let lv = &l1 * &svd.v;
        let r = RMatrix::from_fn(n, n, |i, j| lv[(i, j)] * inv_sqrt[j]);
        let w = &r * &r.transpose();
        Some(Self { r, w, lambda: svd.s })
    }

    fn sandwich_w(&self, a: &RMatrix) -> RMatrix {
        let mut out = &(&self.w * a) * &self.w;
        out.symmetrize();
        out
    }

    /// `Rᵀ ΔS R`.
    fn scale_dual(&self, ds: &RMatrix) -> RMatrix {
        let mut out = &(&self.r.transpose() * ds) * &self.r;
        out.symmetrize();
        out
    }

    /// `R ΔX̃ Rᵀ`.
    fn unscale_primal(&self, dx: &RMatrix) -> RMatrix {
        let mut out = &(&self.r * dx) * &self.r.transpose();
        out.symmetrize();
        out
    }

    /// Solves `λ∘q + q∘λ = 2·rhs` for `q` in the scaled space.
    fn complementarity(&self, rhs: &RMatrix) -> RMatrix {
        let n = self.lambda.len();
        RMatrix::from_fn(n, n, |i, j| (rhs[(i, j)] + rhs[(j, i)]) / (self.lambda[i] + self.lambda[j]))
    }

    /// Largest `α` keeping `diag(λ) + α·d` PSD, for `d` in the scaled space.
    fn max_step(&self, d: &RMatrix) -> f64 {
        let n = self.lambda.len();
        let z = RMatrix::from_fn(n, n, |i, j| d[(i, j)] / (self.lambda[i] * self.lambda[j]).sqrt());
        let lo = if n == 1 { z[(0, 0)] } else { hermitian_eigen(&z).min() };
        if lo < 0.0 {
            -1.0 / lo
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Clone)]
struct Iterate {
    x: Blocks,
    y: Vec<f64>,
    s: Blocks,
    tau: f64,
    kappa: f64,
}

struct Direction {
    dx: Blocks,
    dy: Vec<f64>,
    ds: Blocks,
    /// `dx` and `ds` in the scaled space, where step lengths are measured.
    dx_scaled: Blocks,
    ds_scaled: Blocks,
    dtau: f64,
    dkappa: f64,
}

/// Per-iteration data shared by the predictor and corrector solves.
///
/// The reduced system in `(Δy, Δτ)` is bordered by one row and column. It is
/// solved through the Schur complement matrix `M_ij = ⟨A_i, W A_j W⟩` and a
/// scalar equation for `Δτ` whose denominator is assembled from terms that
/// are nonnegative by construction; forming the bordered matrix explicitly
/// loses all accuracy near the optimum, where it becomes nearly singular.
struct Newton<'a> {
    p: &'a Standard,
    scalings: Vec<Scaling>,
    wcw: Blocks,
    schur: RMatrix,
    /// `M⁻¹ A(WCW)`.
    u: Vec<f64>,
    /// `M⁻¹ b`.
    v: Vec<f64>,
    /// `⟨C,WCW⟩ − A(WCW)ᵀu + bᵀv + κ/τ`.
    denom: f64,
}

fn solve_sym(m: &RMatrix, rhs: &[f64]) -> Option<Vec<f64>> {
    if rhs.is_empty() {
        return Some(Vec::new());
    }
    solve_hpd(m, rhs).filter(|x| x.iter().all(|v| v.is_finite())).or_else(|| lu_solve(m, rhs))
}

impl<'a> Newton<'a> {
    fn new(p: &'a Standard, it: &Iterate) -> Option<Self> {
        let scalings = it.x.iter().zip(&it.s).map(|(x, s)| Scaling::new(x, s)).collect::<Option<Vec<_>>>()?;
        let sandwich = |blocks: &[RMatrix]| -> Blocks { scalings.iter().zip(blocks).map(|(sc, a)| sc.sandwich_w(a)).collect() };
        let wa: Vec<Blocks> = p.a.iter().map(|ak| sandwich(ak)).collect();
        let wcw = sandwich(&p.c);
        let m = p.b.len();
        let mut schur = RMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = inner(&p.a[i], &wa[j]);
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
        }
        let u = solve_sym(&schur, &p.op(&wcw))?;
        let v = solve_sym(&schur, &p.b)?;
        // ⟨C,WCW⟩ − aᵀM⁻¹a = ⟨G, W G W⟩ with G = C − A*(u).
        let mut g = p.c.clone();
        axpy(&mut g, -1.0, &p.adjoint(&u));
        let projected: f64 = scalings.iter().zip(&g).map(|(sc, gb)| gb.dot(&sc.sandwich_w(gb))).sum();
        let bv: f64 = p.b.iter().zip(&v).map(|(b, v)| b * v).sum();
        let denom = projected.max(0.0) + bv.max(0.0) + it.kappa / it.tau;
        if !(denom > 0.0 && denom.is_finite()) {
            return None;
        }
        Some(Self { p, scalings, wcw, schur, u, v, denom })
    }

    /// Direction for the linearized system with primal/dual/gap residual
    /// targets `r1, r2, r3`, scaled complementarity target `comp` and
    /// `τκ` target `r5`.
    fn solve(&self, it: &Iterate, r1: &[f64], r2: &[RMatrix], r3: f64, comp: &[RMatrix], r5: f64) -> Option<Direction> {
        let p = self.p;
        let mut d = self.solve_once(it, r1, r2, r3, comp, r5)?;
        // Two rounds of iterative refinement on the equations the reduced
        // solve can violate; the others hold by construction.
        let zeros: Blocks = p.c.iter().map(|m| RMatrix::zeros(m.rows(), m.cols())).collect();
        for _ in 0..2 {
            let adx = p.op(&d.dx);
            let e1: Vec<f64> = r1.iter().zip(&adx).zip(&p.b).map(|((r, a), b)| r - (a - b * d.dtau)).collect();
            let by: f64 = p.b.iter().zip(&d.dy).map(|(b, y)| b * y).sum();
            let e3 = -r3 - (inner(&p.c, &d.dx) - by + d.dkappa);
            let corr = self.solve_once(it, &e1, &zeros, -e3, &zeros, 0.0)?;
            axpy(&mut d.dx, 1.0, &corr.dx);
            axpy(&mut d.ds, 1.0, &corr.ds);
            axpy(&mut d.dx_scaled, 1.0, &corr.dx_scaled);
            axpy(&mut d.ds_scaled, 1.0, &corr.ds_scaled);
            d.dy.iter_mut().zip(&corr.dy).for_each(|(a, b)| *a += b);
            d.dtau += corr.dtau;
            d.dkappa += corr.dkappa;
        }
        Some(d)
    }

    fn solve_once(&self, it: &Iterate, r1: &[f64], r2: &[RMatrix], r3: f64, comp: &[RMatrix], r5: f64) -> Option<Direction> {
        let p = self.p;
        let q: Blocks = self.scalings.iter().zip(comp).map(|(sc, rhs)| sc.complementarity(rhs)).collect();
        let mut t: Blocks = self.scalings.iter().zip(&q).map(|(sc, qb)| sc.unscale_primal(qb)).collect();
        for ((tb, sc), r2b) in t.iter_mut().zip(&self.scalings).zip(r2) {
            *tb += &sc.sandwich_w(r2b);
        }
        let at = p.op(&t);
        let h1: Vec<f64> = r1.iter().zip(&at).map(|(a, b)| a - b).collect();
        let h2 = r3 + inner(&p.c, &t) + r5 / it.tau;
        let z = solve_sym(&self.schur, &h1)?;
        let awcw = p.op(&self.wcw);
        let bz: f64 = p.b.iter().zip(&awcw).zip(&z).map(|((b, a), z)| (b - a) * z).sum();
        let dtau = (h2 - bz) / self.denom;
        let dy: Vec<f64> = z.iter().zip(self.u.iter().zip(&self.v)).map(|(z, (u, v))| z + (u + v) * dtau).collect();

        // ΔS comes straight from the dual equation; ΔX from complementarity
        // in the scaled space, which avoids ever applying R⁻¹.
        let mut ds = p.adjoint(&dy);
        ds.iter_mut().for_each(|m| m.scale_mut(-1.0));
        axpy(&mut ds, dtau, &p.c);
        axpy(&mut ds, -1.0, r2);
        ds.iter_mut().for_each(RMatrix::symmetrize);
        let ds_scaled: Blocks = self.scalings.iter().zip(&ds).map(|(sc, d)| sc.scale_dual(d)).collect();
        let dx_scaled: Blocks = q.iter().zip(&ds_scaled).map(|(qb, d)| qb - d).collect();
        let dx: Blocks = self.scalings.iter().zip(&dx_scaled).map(|(sc, d)| sc.unscale_primal(d)).collect();
        let dkappa = (r5 - it.kappa * dtau) / it.tau;
        Some(Direction { dx, dy, ds, dx_scaled, ds_scaled, dtau, dkappa })
    }

    fn max_step(&self, it: &Iterate, d: &Direction) -> f64 {
        let mut alpha = f64::INFINITY;
        for ((sc, dx), ds) in self.scalings.iter().zip(&d.dx_scaled).zip(&d.ds_scaled) {
            alpha = alpha.min(sc.max_step(dx)).min(sc.max_step(ds));
        }
        if d.dtau < 0.0 {
            alpha = alpha.min(-it.tau / d.dtau);
        }
        if d.dkappa < 0.0 {
            alpha = alpha.min(-it.kappa / d.dkappa);
        }
        alpha
    }
}

struct Measures {
    residuals: Residuals,
    primal_infeasibility: Option<f64>,
    dual_infeasibility: Option<f64>,
}

fn measure(p: &Standard, it: &Iterate, tol: f64) -> Measures {
    // τ → 0 and κ = bᵀy − ⟨c,x⟩ > 0 in the limit of an infeasible problem;
    // whichever of bᵀy and −⟨c,x⟩ carries κ tells which side has the ray.
    let ax = p.op(&it.x);
    let aty = p.adjoint(&it.y);
    let cx = inner(&p.c, &it.x);
    let by: f64 = p.b.iter().zip(&it.y).map(|(b, y)| b * y).sum();

    let pres: Vec<f64> = ax.iter().zip(&p.b).map(|(a, b)| a / it.tau - b).collect();
    let mut dres = aty.clone();
    axpy(&mut dres, 1.0, &it.s);
    let ray_dual = blocks_norm(&dres);
    axpy(&mut dres, -it.tau, &p.c);
    let residuals = Residuals {
        primal: norm(&pres) / (1.0 + norm(&p.b)),
        dual: blocks_norm(&dres) / it.tau / (1.0 + blocks_norm(&p.c)),
        gap: (cx - by).abs() / it.tau / (1.0 + (cx / it.tau).abs() + (by / it.tau).abs()),
    };
    let primal_infeasibility = (by > 0.0 && by >= -cx).then(|| ray_dual / by).filter(|r| *r <= tol);
    let dual_infeasibility = (cx < 0.0 && -cx > by).then(|| norm(&ax) / -cx).filter(|r| *r <= tol);
    Measures { residuals, primal_infeasibility, dual_infeasibility }
}

/// Iterations without a new best residual after which a solver that is
/// already within the acceptable tolerance stops.
const STALL_ITERATIONS: usize = 8;

/// Solves `problem` to relative accuracy `settings.tolerance`.
pub fn solve(problem: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let p = Standard::new(problem);
    let tol = settings.tolerance;
    let mut it = Iterate {
        x: p.c.iter().map(|m| RMatrix::identity(m.rows())).collect(),
        y: vec![0.0; p.b.len()],
        s: p.c.iter().map(|m| RMatrix::identity(m.rows())).collect(),
        tau: 1.0,
        kappa: 1.0,
    };
    let mut best = (f64::INFINITY, it.clone(), Residuals::default());
    let mut status = SdpStatus::MaxIterations;
    let mut infeasibility = None;
    let mut iterations = 0;
    let mut since_best = 0;

    loop {
        let m = measure(&p, &it, settings.infeasibility_tolerance);
        if m.residuals.worst() < best.0 {
            best = (m.residuals.worst(), it.clone(), m.residuals);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if m.residuals.worst() <= tol {
            status = SdpStatus::Optimal;
            break;
        }
        if let Some(r) = m.primal_infeasibility {
            status = SdpStatus::Infeasible;
            infeasibility = Some(r);
            break;
        }
        if let Some(r) = m.dual_infeasibility {
            status = SdpStatus::Unbounded;
            infeasibility = Some(r);
            break;
        }
        let stalled = since_best > STALL_ITERATIONS && best.0 <= settings.acceptable_tolerance;
        if iterations >= settings.max_iterations || stalled {
            break;
        }
        let Some(step) = step(&p, &it) else { break };
        it = step;
        iterations += 1;
    }
    if status == SdpStatus::MaxIterations && best.0 <= settings.acceptable_tolerance {
        status = SdpStatus::NearOptimal;
    }

    let from_best = matches!(status, SdpStatus::MaxIterations | SdpStatus::NearOptimal);
    let final_it = if from_best { &best.1 } else { &it };
    let residuals = if from_best { best.2 } else { measure(&p, final_it, settings.infeasibility_tolerance).residuals };
    // Infeasibility certificates are rays: report the normalized ray itself.
    let scale = if matches!(status, SdpStatus::Infeasible | SdpStatus::Unbounded) { 1.0 } else { 1.0 / final_it.tau };
    let blocks: Vec<CMatrix> = final_it.x[..p.user_blocks].iter().map(|x| unembed(&x.scaled(scale))).collect();
    let by: f64 = p.b.iter().zip(&final_it.y).map(|(b, y)| b * y).sum();
    Ok(SdpSolution {
        objective: problem.objective_value(&blocks),
        dual_bound: -by / final_it.tau * p.c_scale,
        blocks,
        status,
        residuals,
        infeasibility,
        iterations,
    })
}

/// One Mehrotra predictor-corrector step; `None` on numerical breakdown.
fn step(p: &Standard, it: &Iterate) -> Option<Iterate> {
    let newton = Newton::new(p, it)?;
    let mu = (inner(&it.x, &it.s) + it.tau * it.kappa) / (p.nu + 1.0);

    let ax = p.op(&it.x);
    let r1: Vec<f64> = ax.iter().zip(&p.b).map(|(a, b)| -(a - b * it.tau)).collect();
    let mut r2 = p.adjoint(&it.y);
    axpy(&mut r2, 1.0, &it.s);
    axpy(&mut r2, -it.tau, &p.c);
    let by: f64 = p.b.iter().zip(&it.y).map(|(b, y)| b * y).sum();
    let r3 = inner(&p.c, &it.x) - by + it.kappa;

    let lambda_sq: Vec<RMatrix> = newton
        .scalings
        .iter()
        .map(|sc| RMatrix::diagonal(&sc.lambda.iter().map(|l| -l * l).collect::<Vec<_>>()))
        .collect();

    let affine = newton.solve(it, &r1, &r2, r3, &lambda_sq, -it.tau * it.kappa)?;
    let alpha_aff = newton.max_step(it, &affine).min(1.0);
    let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);
    let eta = 1.0 - sigma;

    let comp: Vec<RMatrix> = newton
        .scalings
        .iter()
        .zip(lambda_sq)
        .zip(affine.dx_scaled.iter().zip(&affine.ds_scaled))
        .map(|((_, mut rhs), (a, b))| {
            let ab = a * b;
            let n = rhs.rows();
            for i in 0..n {
                rhs[(i, i)] += sigma * mu;
                for j in 0..n {
                    rhs[(i, j)] -= 0.5 * (ab[(i, j)] + ab[(j, i)]);
                }
            }
            rhs
        })
        .collect();
    let r1c: Vec<f64> = r1.iter().map(|v| eta * v).collect();
    let r2c: Blocks = r2.iter().map(|m| m.scaled(eta)).collect();
    let r5 = sigma * mu - it.tau * it.kappa - affine.dtau * affine.dkappa;
    let d = newton.solve(it, &r1c, &r2c, eta * r3, &comp, r5)?;
    let alpha = (0.99 * newton.max_step(it, &d)).min(1.0);
    if !(alpha > 1e-12) {
        return None;
    }

    let mut next = it.clone();
    axpy(&mut next.x, alpha, &d.dx);
    axpy(&mut next.s, alpha, &d.ds);
    next.x.iter_mut().for_each(RMatrix::symmetrize);
    next.s.iter_mut().for_each(RMatrix::symmetrize);
    next.y.iter_mut().zip(&d.dy).for_each(|(y, dy)| *y += alpha * dy);
    next.tau += alpha * d.dtau;
    next.kappa += alpha * d.dkappa;
    if !(next.tau > 0.0 && next.kappa > 0.0) || next.x.iter().chain(&next.s).any(|m| !m.is_finite()) {
        return None;
    }
    Some(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigen;

    fn hermitian(n: usize, seed: u64) -> CMatrix {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let b = CMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
        &b * &b.adjoint()
    }

    fn trace_bound(n: usize, objective: CMatrix, power: f64) -> SdpProblem {
        SdpProblem {
            block_dims: vec![n],
            objective: vec![objective],
            constraints: vec![SdpConstraint { coeffs: vec![CMatrix::identity(n)], rhs: power, sense: Sense::LessEq }],
        }
    }

    #[test]
    fn embedding_round_trip() {
        let a = hermitian(3, 1);
        let e = embed(&a);
        assert!((&unembed(&e) - &a).max_abs() < 1e-15);
        let b = hermitian(3, 2);
        assert!((embed(&b).dot(&e) - 2.0 * a.dot(&b)).abs() < 1e-12);
    }

    #[test]
    fn rayleigh_quotient() {
        for seed in 0..5 {
            let s = hermitian(4, seed);
            let sol = solve(&trace_bound(4, s.clone(), 2.5), &SdpSettings::default()).unwrap();
            assert_eq!(sol.status, SdpStatus::Optimal);
            let eig = hermitian_eigen(&s);
            let expect = 2.5 * eig.max();
            assert!((sol.objective - expect).abs() < 1e-7 * expect, "{} vs {}", sol.objective, expect);
            assert!(sol.dual_bound >= sol.objective - 1e-7 * expect);
            let x = &sol.blocks[0];
            let xe = hermitian_eigen(x);
            assert!(xe.values[1] < 1e-6 * xe.values[0]);
        }
    }

    #[test]
    fn zero_power_forces_zero() {
        let sol = solve(&trace_bound(3, hermitian(3, 7), 0.0), &SdpSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(sol.blocks[0].max_abs() < 1e-6);
        assert!(sol.objective.abs() < 1e-6);
    }

    #[test]
    fn detects_infeasibility() {
        let mut p = trace_bound(2, hermitian(2, 3), 1.0);
        p.constraints.push(SdpConstraint { coeffs: vec![CMatrix::identity(2)], rhs: 2.0, sense: Sense::GreaterEq });
        let sol = solve(&p, &SdpSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
        assert!(sol.infeasibility.unwrap() <= 1e-8);
    }

    #[test]
    fn detects_unboundedness() {
        let p = SdpProblem {
            block_dims: vec![2],
            objective: vec![CMatrix::identity(2)],
            constraints: vec![SdpConstraint { coeffs: vec![hermitian(2, 4).scaled(0.0)], rhs: 0.0, sense: Sense::GreaterEq }],
        };
        let sol = solve(&p, &SdpSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Unbounded);
    }

    #[test]
    fn equality_constraints_and_multiple_blocks() {
        // maximize tr(S₁X₁) + tr(S₂X₂) with tr X₁ = 1, tr X₂ = 2.
        let (s1, s2) = (hermitian(2, 11), hermitian(3, 12));
        let p = SdpProblem {
            block_dims: vec![2, 3],
            objective: vec![s1.clone(), s2.clone()],
            constraints: vec![
                SdpConstraint { coeffs: vec![CMatrix::identity(2), CMatrix::zeros(3, 3)], rhs: 1.0, sense: Sense::Equal },
                SdpConstraint { coeffs: vec![CMatrix::zeros(2, 2), CMatrix::identity(3)], rhs: 2.0, sense: Sense::Equal },
            ],
        };
        let sol = solve(&p, &SdpSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        let expect = hermitian_eigen(&s1).max() + 2.0 * hermitian_eigen(&s2).max();
        assert!((sol.objective - expect).abs() < 1e-7 * expect);
    }

    #[test]
    fn rejects_malformed_problems() {
        let mut p = trace_bound(2, hermitian(2, 1), 1.0);
        p.objective[0][(0, 1)] += C64::new(1.0, 0.0);
        assert!(matches!(solve(&p, &SdpSettings::default()), Err(SdpError::NotHermitian(_))));
        let mut p = trace_bound(2, hermitian(2, 1), 1.0);
        p.constraints[0].coeffs.push(CMatrix::identity(2));
        assert!(matches!(p.validate(), Err(SdpError::Dimension { .. })));
        let p = SdpProblem { block_dims: vec![], objective: vec![], constraints: vec![] };
        assert_eq!(p.validate(), Err(SdpError::NoBlocks));
    }

    #[test]
    fn text_dump_round_trips() {
        let mut p = trace_bound(2, hermitian(2, 5), 0.3);
        p.constraints.push(SdpConstraint { coeffs: vec![hermitian(2, 6)], rhs: 1e-9, sense: Sense::GreaterEq });
        let text = p.to_text();
        assert_eq!(SdpProblem::from_text(&text).unwrap(), p);
        assert!(matches!(SdpProblem::from_text("sdp minimize"), Err(SdpError::Parse { line: 1, .. })));
    }

    #[test]
    fn deterministic() {
        let p = trace_bound(3, hermitian(3, 9), 1.0);
        let a = solve(&p, &SdpSettings::default()).unwrap();
        let b = solve(&p, &SdpSettings::default()).unwrap();
        assert_eq!(a, b);
    }
}
