//! Repeated-measures and between-subjects ANOVA with Greenhouse-Geisser
//! correction for within-subject effects.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::special::f_sf;
use super::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub effect: String,
    pub f: f64,
    /// Degrees of freedom used for `p` (after correction when `epsilon` is set).
    pub df1: f64,
    pub df2: f64,
    pub p: f64,
    /// Greenhouse-Geisser estimate for within-subject effects.
    pub epsilon: Option<f64>,
    pub ss_effect: f64,
    pub ss_error: f64,
}

/// Effect sums of squares at or below this fraction of the total are zero.
const REL_ZERO: f64 = 1e-12;

struct Partition<'a> {
    effect: &'a str,
    ss_effect: f64,
    df_effect: f64,
    ss_error: f64,
    df_error: f64,
    epsilon: Option<f64>,
}

fn f_test(part: Partition<'_>, ss_total: f64) -> Result<AnovaResult, StatsError> {
    let eps = part.epsilon.unwrap_or(1.0);
    let (df1, df2) = (part.df_effect * eps, part.df_error * eps);
    let zero = |ss: f64| ss_total <= 0.0 || ss <= REL_ZERO * ss_total;
    let (f, p) = if zero(part.ss_effect) {
        (0.0, 1.0)
    } else if zero(part.ss_error) {
        return Err(StatsError::Degenerate(part.effect.to_string()));
    } else {
        let f = (part.ss_effect / part.df_effect) / (part.ss_error / part.df_error);
        (f, f_sf(f, df1, df2))
    };
    Ok(AnovaResult {
        effect: part.effect.to_string(),
        f,
        df1,
        df2,
        p,
        epsilon: part.epsilon,
        ss_effect: part.ss_effect,
        ss_error: part.ss_error,
    })
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Orthonormal Helmert contrasts, (k - 1) x k.
pub(crate) fn helmert(k: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(k - 1, k);
    for i in 1..k {
        let norm = ((i * (i + 1)) as f64).sqrt();
        for j in 0..i {
            c[(i - 1, j)] = 1.0 / norm;
        }
        c[(i - 1, i)] = -(i as f64) / norm;
    }
    c
}

fn covariance(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let k = rows[0].len();
    let means: Vec<f64> = (0..k).map(|j| mean(rows.iter().map(|r| r[j]))).collect();
    DMatrix::from_fn(k, k, |i, j| {
        rows.iter()
            .map(|r| (r[i] - means[i]) * (r[j] - means[j]))
            .sum::<f64>()
            / (n as f64 - 1.0)
    })
}

/// Greenhouse-Geisser epsilon of per-subject vectors under `contrast`:
/// tr(M)^2 / (nu * tr(M^2)) with M = C S C'.
fn gg_epsilon(per_subject: &[Vec<f64>], contrast: &DMatrix<f64>) -> f64 {
    let nu = contrast.nrows();
    if nu <= 1 {
        return 1.0;
    }
    let m = contrast * covariance(per_subject) * contrast.transpose();
    let tr = m.trace();
    let tr2 = (&m * &m).trace();
    if !(tr2 > 0.0) {
        return 1.0;
    }
    (tr * tr / (nu as f64 * tr2)).clamp(1.0 / nu as f64, 1.0)
}

fn check_rectangular(rows: usize, cols: impl Iterator<Item = usize>, want: usize) -> Result<(), StatsError> {
    for (i, c) in cols.enumerate() {
        if c != want {
            return Err(StatsError::Incomplete(format!(
                "subject {i} has {c} values, expected {want} (of {rows} subjects)"
            )));
        }
    }
    Ok(())
}

/// One-factor repeated-measures ANOVA over a subjects x conditions matrix.
pub fn anova_rm_one(data: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    let n = data.len();
    if n < 2 {
        return Err(StatsError::TooFew("at least 2 subjects required".into()));
    }
    let k = data[0].len();
    if k < 2 {
        return Err(StatsError::TooFew("at least 2 conditions required".into()));
    }
    check_rectangular(n, data.iter().map(Vec::len), k)?;
    if data.iter().flatten().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let grand = mean(data.iter().flatten().copied());
    let cond: Vec<f64> = (0..k).map(|j| mean(data.iter().map(|r| r[j]))).collect();
    let subj: Vec<f64> = data.iter().map(|r| mean(r.iter().copied())).collect();
    let ss_total: f64 = data.iter().flatten().map(|x| (x - grand).powi(2)).sum();
    let ss_cond = n as f64 * cond.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_error: f64 = data
        .iter()
        .zip(&subj)
        .flat_map(|(r, s)| r.iter().zip(&cond).map(move |(x, c)| (x - s - c + grand).powi(2)))
        .sum();
    let epsilon = gg_epsilon(data, &helmert(k));
    f_test(
        Partition {
            effect: "condition",
            ss_effect: ss_cond,
            df_effect: (k - 1) as f64,
            ss_error,
            df_error: ((n - 1) * (k - 1)) as f64,
            epsilon: Some(if k == 2 { 1.0 } else { epsilon }),
        },
        ss_total,
    )
}

/// Two-factor repeated-measures ANOVA. `data[subject][a][b]`.
///
/// Returns main effect A, main effect B and the A x B interaction, each tested
/// against its own subject interaction term.
pub fn anova_rm_two(data: &[Vec<Vec<f64>>]) -> Result<Vec<AnovaResult>, StatsError> {
    let n = data.len();
    if n < 2 {
        return Err(StatsError::TooFew("at least 2 subjects required".into()));
    }
    let a = data[0].len();
    let b = data[0].first().map_or(0, Vec::len);
    if a < 2 || b < 2 {
        return Err(StatsError::TooFew("each factor needs at least 2 levels".into()));
    }
    for (s, subj) in data.iter().enumerate() {
        if subj.len() != a || subj.iter().any(|r| r.len() != b) {
            return Err(StatsError::Unbalanced(format!(
                "subject {s} does not have {a} x {b} cells"
            )));
        }
    }
    if data.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }

    let y = |s: usize, i: usize, j: usize| data[s][i][j];
    let grand = mean(data.iter().flatten().flatten().copied());
    let m_a: Vec<f64> = (0..a)
        .map(|i| mean((0..n).flat_map(|s| (0..b).map(move |j| y(s, i, j)))))
        .collect();
    let m_b: Vec<f64> = (0..b)
        .map(|j| mean((0..n).flat_map(|s| (0..a).map(move |i| y(s, i, j)))))
        .collect();
    let m_ab: Vec<Vec<f64>> = (0..a)
        .map(|i| (0..b).map(|j| mean((0..n).map(|s| y(s, i, j)))).collect())
        .collect();
    let m_s: Vec<f64> = data.iter().map(|d| mean(d.iter().flatten().copied())).collect();
    let m_sa: Vec<Vec<f64>> = data
        .iter()
        .map(|d| d.iter().map(|r| mean(r.iter().copied())).collect())
        .collect();
    let m_sb: Vec<Vec<f64>> = data
        .iter()
        .map(|d| (0..b).map(|j| mean(d.iter().map(|r| r[j]))).collect())
        .collect();

    let (nf, af, bf) = (n as f64, a as f64, b as f64);
    let ss_total: f64 = data.iter().flatten().flatten().map(|x| (x - grand).powi(2)).sum();
    let ss_a = nf * bf * m_a.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_b = nf * af * m_b.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_ab = 0.0;
    for i in 0..a {
        for j in 0..b {
            ss_ab += (m_ab[i][j] - m_a[i] - m_b[j] + grand).powi(2);
        }
    }
    ss_ab *= nf;
    let mut ss_as = 0.0;
    let mut ss_bs = 0.0;
    let mut ss_abs = 0.0;
    for s in 0..n {
        for i in 0..a {
            ss_as += (m_sa[s][i] - m_s[s] - m_a[i] + grand).powi(2);
        }
        for j in 0..b {
            ss_bs += (m_sb[s][j] - m_s[s] - m_b[j] + grand).powi(2);
        }
        for i in 0..a {
            for j in 0..b {
                ss_abs += (y(s, i, j) - m_ab[i][j] - m_sa[s][i] - m_sb[s][j]
                    + m_a[i]
                    + m_b[j]
                    + m_s[s]
                    - grand)
                    .powi(2);
            }
        }
    }
    ss_as *= bf;
    ss_bs *= af;

    let ca = helmert(a);
    let cb = helmert(b);
    let eps_a = gg_epsilon(&m_sa, &ca);
    let eps_b = gg_epsilon(&m_sb, &cb);
    let flat: Vec<Vec<f64>> = data.iter().map(|d| d.iter().flatten().copied().collect()).collect();
    let eps_ab = gg_epsilon(&flat, &ca.kronecker(&cb));

    let dn = nf - 1.0;
    let parts = [
        Partition {
            effect: "A",
            ss_effect: ss_a,
            df_effect: af - 1.0,
            ss_error: ss_as,
            df_error: (af - 1.0) * dn,
            epsilon: Some(eps_a),
        },
        Partition {
            effect: "B",
            ss_effect: ss_b,
            df_effect: bf - 1.0,
            ss_error: ss_bs,
            df_error: (bf - 1.0) * dn,
            epsilon: Some(eps_b),
        },
        Partition {
            effect: "AxB",
            ss_effect: ss_ab,
            df_effect: (af - 1.0) * (bf - 1.0),
            ss_error: ss_abs,
            df_error: (af - 1.0) * (bf - 1.0) * dn,
            epsilon: Some(eps_ab),
        },
    ];
    parts.into_iter().map(|p| f_test(p, ss_total)).collect()
}

/// Two-factor between-subjects ANOVA with Type-II sums of squares.
/// `cells[a][b]` holds the observations of one factor-level combination.
///
/// Each main effect is the drop in residual sum of squares when it is added
/// to a model already holding the other main effect; the interaction is
/// tested last. For balanced designs this reduces to the textbook
/// marginal-mean formulas.
pub fn anova_between_two(cells: &[Vec<Vec<f64>>]) -> Result<Vec<AnovaResult>, StatsError> {
    let a = cells.len();
    let b = cells.first().map_or(0, Vec::len);
    if a < 2 || b < 2 {
        return Err(StatsError::TooFew("each factor needs at least 2 levels".into()));
    }
    for (i, row) in cells.iter().enumerate() {
        if row.len() != b {
            return Err(StatsError::Unbalanced(format!("factor A level {i} lacks B levels")));
        }
        if let Some(j) = row.iter().position(Vec::is_empty) {
            return Err(StatsError::EmptyCell(format!("({i}, {j})")));
        }
    }
    if cells.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n: usize = cells.iter().flatten().map(Vec::len).sum();
    let df_e = n as f64 - (a * b) as f64;
    if df_e <= 0.0 {
        return Err(StatsError::TooFew("need more observations than cells".into()));
    }

    // Sum-to-zero codes: level l < k-1 -> unit vector, level k-1 -> all -1.
    let code = |level: usize, k: usize| -> Vec<f64> {
        (0..k - 1)
            .map(|c| if level == k - 1 { -1.0 } else if c == level { 1.0 } else { 0.0 })
            .collect()
    };
    let mut ys = Vec::with_capacity(n);
    let mut rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::with_capacity(n);
    for (i, row) in cells.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            let ca = code(i, a);
            let cb = code(j, b);
            let cab: Vec<f64> = ca.iter().flat_map(|x| cb.iter().map(move |y| x * y)).collect();
            for &y in cell {
                ys.push(y);
                rows.push((ca.clone(), cb.clone(), cab.clone()));
            }
        }
    }
    let y = nalgebra::DVector::from_vec(ys);
    let grand = y.mean();
    let ss_total: f64 = y.iter().map(|v| (v - grand).powi(2)).sum();
    let sse = |use_a: bool, use_b: bool, use_ab: bool| -> f64 {
        let width = 1
            + if use_a { a - 1 } else { 0 }
            + if use_b { b - 1 } else { 0 }
            + if use_ab { (a - 1) * (b - 1) } else { 0 };
        let x = DMatrix::from_fn(n, width, |r, c| {
            let (ca, cb, cab) = &rows[r];
            let mut cols = std::iter::once(1.0)
                .chain(ca.iter().copied().filter(|_| use_a))
                .chain(cb.iter().copied().filter(|_| use_b))
                .chain(cab.iter().copied().filter(|_| use_ab));
            cols.nth(c).expect("column in range")
        });
        let beta = x
            .clone()
            .svd(true, true)
            .solve(&y, 1e-12)
            .expect("least squares solve");
        (&y - x * beta).norm_squared().max(0.0)
    };
    let sse_a = sse(true, false, false);
    let sse_b = sse(false, true, false);
    let sse_ab = sse(true, true, false);
    let sse_full = sse(true, true, true);
    let (af, bf) = (a as f64, b as f64);
    [
        ("A", (sse_b - sse_ab).max(0.0), af - 1.0),
        ("B", (sse_a - sse_ab).max(0.0), bf - 1.0),
        ("AxB", (sse_ab - sse_full).max(0.0), (af - 1.0) * (bf - 1.0)),
    ]
    .into_iter()
    .map(|(effect, ss, df)| {
        f_test(
            Partition {
                effect,
                ss_effect: ss,
                df_effect: df,
                ss_error: sse_full,
                df_error: df_e,
                epsilon: None,
            },
            ss_total,
        )
    })
    .collect()
}

/// One-way between-subjects ANOVA over independent groups.
pub fn anova_between_one(groups: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::TooFew("at least 2 groups required".into()));
    }
    if let Some(i) = groups.iter().position(Vec::is_empty) {
        return Err(StatsError::EmptyCell(format!("group {i}")));
    }
    if groups.iter().flatten().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    if n <= k {
        return Err(StatsError::TooFew("need more observations than groups".into()));
    }
    let grand = mean(groups.iter().flatten().copied());
    let ss_total: f64 = groups.iter().flatten().map(|x| (x - grand).powi(2)).sum();
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = mean(g.iter().copied());
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    f_test(
        Partition {
            effect: "group",
            ss_effect: ss_between,
            df_effect: (k - 1) as f64,
            ss_error: ss_within,
            df_error: (n - k) as f64,
            epsilon: None,
        },
        ss_total,
    )
}
