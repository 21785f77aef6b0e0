//! Grid ingestion and neighbour-sum designs.
//!
//! A [`LatticeField`] is an `m x n` array of observations. A
//! [`NeighborScheme`] says how each regressor is formed as a sum of grid values
//! at fixed offsets from a site, and [`build_design`] turns the two into a
//! [`DesignSet`] restricted to the sites whose whole neighbourhood lies on the
//! grid.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observations `Y_ij` on a rectangular grid, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeField {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl LatticeField {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyGrid);
        }
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols + 1,
                col: pos % cols + 1,
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at zero-based `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Writes the grid as comma-separated rows with 17 significant digits,
    /// which [`load_grid`] reads back bit-exactly.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in self.values.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn to_grid_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("grid output is ASCII")
    }
}

/// Formats a float with 17 significant digits in scientific notation.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parses a plain-text grid: one row per line, fields separated by commas or
/// whitespace, no header. Blank lines are ignored.
pub fn load_grid<R: BufRead>(source: R) -> Result<LatticeField> {
    let mut values = Vec::new();
    let mut cols = 0;
    let mut rows = 0;
    for line in source.lines() {
        let line = line.map_err(|e| Error::Validation(format!("read failed: {e}")))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        rows += 1;
        let fields: Vec<&str> = if trimmed.contains(',') {
            trimmed.split(',').map(str::trim).collect()
        } else {
            trimmed.split_whitespace().collect()
        };
        if rows == 1 {
            cols = fields.len();
        } else if fields.len() != cols {
            return Err(Error::RaggedRow {
                row: rows,
                expected: cols,
                found: fields.len(),
            });
        }
        for (c, field) in fields.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: rows,
                col: c + 1,
                field: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: rows,
                    col: c + 1,
                });
            }
            values.push(v);
        }
    }
    if rows == 0 {
        return Err(Error::EmptyGrid);
    }
    LatticeField::new(rows, cols, values)
}

pub fn parse_grid(text: &str) -> Result<LatticeField> {
    load_grid(text.as_bytes())
}

/// Grid offset `(d_row, d_col)` from a site.
pub type Offset = (isize, isize);

/// Which neighbour sums make up each nonparametric (`x`) and linear (`z`)
/// regressor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborScheme {
    pub x_terms: Vec<Vec<Offset>>,
    pub z_terms: Vec<Vec<Offset>>,
}

pub const VERTICAL_PAIR: [Offset; 2] = [(-1, 0), (1, 0)];
pub const HORIZONTAL_PAIR: [Offset; 2] = [(0, -1), (0, 1)];

impl NeighborScheme {
    pub fn new(x_terms: Vec<Vec<Offset>>, z_terms: Vec<Vec<Offset>>) -> Result<Self> {
        let scheme = Self { x_terms, z_terms };
        scheme.validate()?;
        Ok(scheme)
    }

    /// Additive first-order scheme: `X1` is the vertical neighbour pair sum,
    /// `X2` the horizontal one, no linear part.
    pub fn additive_first_order() -> Self {
        Self {
            x_terms: vec![VERTICAL_PAIR.to_vec(), HORIZONTAL_PAIR.to_vec()],
            z_terms: vec![],
        }
    }

    /// Partially linear first-order scheme: the vertical pair sum enters
    /// linearly, the horizontal pair sum nonparametrically.
    pub fn partially_linear_first_order() -> Self {
        Self {
            x_terms: vec![HORIZONTAL_PAIR.to_vec()],
            z_terms: vec![VERTICAL_PAIR.to_vec()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_terms.is_empty() {
            return Err(Error::Validation(
                "scheme needs at least one nonparametric (x) term".into(),
            ));
        }
        for (kind, terms) in [("x", &self.x_terms), ("z", &self.z_terms)] {
            for (idx, term) in terms.iter().enumerate() {
                if term.is_empty() {
                    return Err(Error::Validation(format!("{kind} term {idx} has no offsets")));
                }
                if term.contains(&(0, 0)) {
                    return Err(Error::Validation(format!(
                        "{kind} term {idx} contains offset (0,0): a site cannot be its own regressor"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.x_terms.len()
    }

    pub fn q(&self) -> usize {
        self.z_terms.len()
    }

    /// Largest absolute row and column offsets over all terms.
    pub fn margins(&self) -> (usize, usize) {
        self.x_terms
            .iter()
            .chain(&self.z_terms)
            .flatten()
            .fold((0, 0), |(r, c), &(dr, dc)| {
                (r.max(dr.unsigned_abs()), c.max(dc.unsigned_abs()))
            })
    }
}

/// Per-site regression tuples `(Y, X, Z)` plus their centring statistics.
///
/// `x` and `z` are stored flat, row-major by site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSet {
    sites: Vec<(usize, usize)>,
    p: usize,
    q: usize,
    y: Vec<f64>,
    x: Vec<f64>,
    z: Vec<f64>,
    y_bar: f64,
    z_bar: Vec<f64>,
    y_tilde: Vec<f64>,
    z_tilde: Vec<f64>,
}

impl DesignSet {
    /// Builds a design from explicit per-site rows. `x[i]` has length `p`
    /// and `z[i]` length `q` for every site `i`.
    pub fn from_rows(
        sites: Vec<(usize, usize)>,
        y: Vec<f64>,
        x: Vec<Vec<f64>>,
        z: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = sites.len();
        if n == 0 {
            return Err(Error::Validation("design has no sites".into()));
        }
        for len in [y.len(), x.len(), z.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        let p = x[0].len();
        let q = z[0].len();
        if p == 0 {
            return Err(Error::Validation("design needs at least one x component".into()));
        }
        for row in &x {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: row.len(),
                });
            }
        }
        for row in &z {
            if row.len() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    actual: row.len(),
                });
            }
        }
        let x: Vec<f64> = x.into_iter().flatten().collect();
        let z: Vec<f64> = z.into_iter().flatten().collect();
        if y.iter().chain(&x).chain(&z).any(|v| !v.is_finite()) {
            return Err(Error::Validation("design contains non-finite values".into()));
        }
        Ok(Self::assemble(sites, p, q, y, x, z))
    }

    fn assemble(
        sites: Vec<(usize, usize)>,
        p: usize,
        q: usize,
        y: Vec<f64>,
        x: Vec<f64>,
        z: Vec<f64>,
    ) -> Self {
        let n = sites.len();
        let y_bar = mean(&y);
        let mut z_bar = vec![0.0; q];
        for row in z.chunks(q.max(1)).take(if q == 0 { 0 } else { n }) {
            for (acc, v) in z_bar.iter_mut().zip(row) {
                *acc += v;
            }
        }
        for v in &mut z_bar {
            *v /= n as f64;
        }
        let y_tilde = y.iter().map(|v| v - y_bar).collect();
        let z_tilde = z
            .iter()
            .enumerate()
            .map(|(idx, v)| v - z_bar[idx % q])
            .collect();
        Self {
            sites,
            p,
            q,
            y,
            x,
            z,
            y_bar,
            z_bar,
            y_tilde,
            z_tilde,
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn sites(&self) -> &[(usize, usize)] {
        &self.sites
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn y_bar(&self) -> f64 {
        self.y_bar
    }

    pub fn z_bar(&self) -> &[f64] {
        &self.z_bar
    }

    pub fn y_tilde(&self) -> &[f64] {
        &self.y_tilde
    }

    pub fn x_row(&self, site: usize) -> &[f64] {
        &self.x[site * self.p..(site + 1) * self.p]
    }

    pub fn z_row(&self, site: usize) -> &[f64] {
        &self.z[site * self.q..(site + 1) * self.q]
    }

    pub fn z_tilde_row(&self, site: usize) -> &[f64] {
        &self.z_tilde[site * self.q..(site + 1) * self.q]
    }

    /// All sites' values of covariate `k`.
    pub fn x_column(&self, k: usize) -> Vec<f64> {
        self.x.iter().skip(k).step_by(self.p).copied().collect()
    }

    /// Centred response of channel `s`: `s = 0` is `Y`, `s >= 1` is `Z^(s)`.
    pub fn channel_value(&self, site: usize, s: usize) -> f64 {
        if s == 0 {
            self.y_tilde[site]
        } else {
            self.z_tilde[site * self.q + s - 1]
        }
    }

    /// Variance of `Y` over the design sites (denominator = site count).
    pub fn y_variance(&self) -> f64 {
        population_variance(&self.y)
    }

    /// Same design with new responses; `X`, `Z` and sites unchanged.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: y.len(),
            });
        }
        Ok(Self::assemble(
            self.sites.clone(),
            self.p,
            self.q,
            y,
            self.x.clone(),
            self.z.clone(),
        ))
    }
}

/// Builds the interior-site design of `field` under `scheme`.
///
/// Sites are visited row-major; only sites whose every offset stays on the
/// grid are kept, and the centring means are taken over those sites.
pub fn build_design(field: &LatticeField, scheme: &NeighborScheme) -> Result<DesignSet> {
    scheme.validate()?;
    let (margin_rows, margin_cols) = scheme.margins();
    let (rows, cols) = (field.rows(), field.cols());
    if rows <= 2 * margin_rows || cols <= 2 * margin_cols {
        return Err(Error::EmptyInterior {
            rows,
            cols,
            margin_rows,
            margin_cols,
        });
    }
    let neighbour_sum = |i: usize, j: usize, term: &[Offset]| -> f64 {
        term.iter()
            .map(|&(di, dj)| {
                field.get(
                    (i as isize + di) as usize,
                    (j as isize + dj) as usize,
                )
            })
            .sum()
    };
    let (p, q) = (scheme.p(), scheme.q());
    let count = (rows - 2 * margin_rows) * (cols - 2 * margin_cols);
    let mut sites = Vec::with_capacity(count);
    let mut y = Vec::with_capacity(count);
    let mut x = Vec::with_capacity(count * p);
    let mut z = Vec::with_capacity(count * q);
    for i in margin_rows..rows - margin_rows {
        for j in margin_cols..cols - margin_cols {
            sites.push((i, j));
            y.push(field.get(i, j));
            x.extend(scheme.x_terms.iter().map(|t| neighbour_sum(i, j, t)));
            z.extend(scheme.z_terms.iter().map(|t| neighbour_sum(i, j, t)));
        }
    }
    Ok(DesignSet::assemble(sites, p, q, y, x, z))
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn population_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three_by_three() -> LatticeField {
        parse_grid("1,2,3\n4,5,6\n7,8,9\n").unwrap()
    }

    #[test]
    fn loads_comma_grid() {
        let f = three_by_three();
        assert_eq!((f.rows(), f.cols()), (3, 3));
        assert_eq!(f.get(1, 1), 5.0);
    }

    #[test]
    fn loads_whitespace_grid() {
        let f = parse_grid("1 2\t3\n 4 5 6 \n\n").unwrap();
        assert_eq!((f.rows(), f.cols()), (2, 3));
        assert_eq!(f.get(1, 2), 6.0);
    }

    #[test]
    fn empty_source_is_rejected() {
        assert_eq!(parse_grid(""), Err(Error::EmptyGrid));
        assert_eq!(parse_grid("\n  \n"), Err(Error::EmptyGrid));
    }

    #[test]
    fn ragged_row_is_named() {
        let err = parse_grid("1,2,3\n4,5\n").unwrap_err();
        assert_eq!(
            err,
            Error::RaggedRow {
                row: 2,
                expected: 3,
                found: 2
            }
        );
        assert!(err.to_string().contains("row 2"));
    }

    #[test]
    fn bad_field_reports_coordinates() {
        let err = parse_grid("1,2\n3,abc\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                row: 2,
                col: 2,
                field: "abc".into()
            }
        );
        assert!(matches!(parse_grid("1,,2\n"), Err(Error::Parse { col: 2, .. })));
        assert!(matches!(parse_grid("1,nan\n"), Err(Error::NonFinite { row: 1, col: 2 })));
    }

    #[test]
    fn single_site_design() {
        let scheme = NeighborScheme::new(
            vec![VERTICAL_PAIR.to_vec()],
            vec![HORIZONTAL_PAIR.to_vec()],
        )
        .unwrap();
        let d = build_design(&three_by_three(), &scheme).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.sites(), &[(1, 1)]);
        assert_eq!(d.y(), &[5.0]);
        assert_eq!(d.x_row(0), &[10.0]);
        assert_eq!(d.z_row(0), &[10.0]);
        assert_eq!(d.y_tilde(), &[0.0]);
    }

    #[test]
    fn constant_field_design() {
        let c = 2.5;
        let f = LatticeField::new(5, 6, vec![c; 30]).unwrap();
        let d = build_design(&f, &NeighborScheme::additive_first_order()).unwrap();
        assert_eq!(d.len(), 12);
        for site in 0..d.len() {
            assert_eq!(d.x_row(site), &[2.0 * c, 2.0 * c]);
            assert_eq!(d.y_tilde()[site], 0.0);
        }
        let f = LatticeField::new(5, 6, vec![c; 30]).unwrap();
        let d = build_design(&f, &NeighborScheme::partially_linear_first_order()).unwrap();
        for site in 0..d.len() {
            assert_eq!(d.z_row(site), &[2.0 * c]);
            assert_eq!(d.z_tilde_row(site), &[0.0]);
        }
    }

    #[test]
    fn wheat_sized_interior_count() {
        // 20 x 25 grid, first-order scheme: enumerate sites with all four
        // neighbours on the grid.
        let mut brute = 0;
        for i in 0..20i64 {
            for j in 0..25i64 {
                let inside = |a: i64, b: i64| (0..20).contains(&a) && (0..25).contains(&b);
                if inside(i - 1, j) && inside(i + 1, j) && inside(i, j - 1) && inside(i, j + 1) {
                    brute += 1;
                }
            }
        }
        assert_eq!(brute, 414);
        let f = LatticeField::new(20, 25, (0..500).map(f64::from).collect()).unwrap();
        let d = build_design(&f, &NeighborScheme::partially_linear_first_order()).unwrap();
        assert_eq!(d.len(), brute);
    }

    #[test]
    fn rejects_self_offset_and_empty_interior() {
        let bad = NeighborScheme::new(vec![vec![(0, 0), (1, 0)]], vec![]);
        assert!(matches!(bad, Err(Error::Validation(_))));
        let f = LatticeField::new(2, 5, vec![1.0; 10]).unwrap();
        assert!(matches!(
            build_design(&f, &NeighborScheme::additive_first_order()),
            Err(Error::EmptyInterior { .. })
        ));
    }

    #[test]
    fn margins_follow_largest_offset() {
        let s = NeighborScheme::new(vec![vec![(-2, 0), (1, 1)]], vec![vec![(0, 3)]]).unwrap();
        assert_eq!(s.margins(), (2, 3));
        let f = LatticeField::new(9, 10, vec![0.0; 90]).unwrap();
        assert_eq!(build_design(&f, &s).unwrap().len(), (9 - 4) * (10 - 6));
    }

    fn field_strategy() -> impl Strategy<Value = LatticeField> {
        (3usize..8, 3usize..8).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-1e3f64..1e3, r * c)
                .prop_map(move |v| LatticeField::new(r, c, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn grid_round_trip_is_bit_exact(field in field_strategy()) {
            let back = parse_grid(&field.to_grid_string()).unwrap();
            prop_assert_eq!(back.values().len(), field.values().len());
            for (a, b) in back.values().iter().zip(field.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn design_is_translation_equivariant(field in field_strategy(), c in -50.0f64..50.0) {
            let scheme = NeighborScheme::new(
                vec![VERTICAL_PAIR.to_vec(), vec![(0, 1)]],
                vec![HORIZONTAL_PAIR.to_vec()],
            ).unwrap();
            let a = build_design(&field, &scheme).unwrap();
            let b = build_design(&field.map(|v| v + c), &scheme).unwrap();
            let scale = 1e-9 * (1.0 + c.abs() + 1e3);
            prop_assert!((b.y_bar() - a.y_bar() - c).abs() < scale);
            for site in 0..a.len() {
                prop_assert!((b.x_row(site)[0] - a.x_row(site)[0] - 2.0 * c).abs() < scale);
                prop_assert!((b.x_row(site)[1] - a.x_row(site)[1] - c).abs() < scale);
                prop_assert!((b.y_tilde()[site] - a.y_tilde()[site]).abs() < scale);
                prop_assert!((b.z_tilde_row(site)[0] - a.z_tilde_row(site)[0]).abs() < 2.0 * scale);
            }
        }

        #[test]
        fn centred_columns_have_zero_mean(field in field_strategy()) {
            let d = build_design(&field, &NeighborScheme::partially_linear_first_order()).unwrap();
            let n = d.len() as f64;
            prop_assert!((d.y_tilde().iter().sum::<f64>() / n).abs() < 1e-12 * 1e3);
            let zs: f64 = (0..d.len()).map(|s| d.z_tilde_row(s)[0]).sum();
            prop_assert!((zs / n).abs() < 1e-12 * 2e3);
        }
    }
}
