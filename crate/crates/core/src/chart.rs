//! Rank diagrams: where in the `(m, n)` plane PPT states were found, with
//! the closed-form bounds drawn as guide lines.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::constructions::hlvc_bounds;
use crate::hilbert::BipartiteDims;
use crate::survey::SurveyTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marker {
    SeparableGreen,
    ExtremalRedDot,
    NonextremalRedCircle,
}

impl Marker {
    pub fn glyph(&self) -> char {
        match self {
            Marker::SeparableGreen => 'g',
            Marker::ExtremalRedDot => '*',
            Marker::NonextremalRedCircle => 'o',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Point {
    pub m: usize,
    pub n: usize,
    pub marker: Marker,
}

/// Guide lines, all computed from the dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guides {
    /// Solid lines `m = h` and `n = h` with `h = max(N_A, N_B) + 1`.
    pub hlvc: usize,
    /// Dashed lines at `N_A + N_B − 2`.
    pub conjecture: usize,
    /// Arc `m² + n² = N² + 1`; holds `N² + 1`.
    pub arc_radius_sq: usize,
    /// Line `m + n = 2N − N_A − N_B + 2`.
    pub criterion: i64,
}

impl Guides {
    pub fn for_dims(dims: BipartiteDims) -> Self {
        let (hlvc, conjecture) = hlvc_bounds(dims);
        Self {
            hlvc,
            conjecture,
            arc_radius_sq: dims.real_dim() + 1,
            criterion: 2 * dims.n() as i64 - dims.n_a() as i64 - dims.n_b() as i64 + 2,
        }
    }

    /// The dashed lines are drawn only where they do not fall below the
    /// solid ones.
    pub fn conjecture_visible(&self) -> bool {
        self.conjecture >= self.hlvc
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankDiagram {
    pub dims: BipartiteDims,
    /// Sorted by `(m, n)`; closed under `(m, n) ↦ (n, m)`.
    pub points: Vec<Point>,
    pub guides: Guides,
}

impl RankDiagram {
    pub fn from_table(table: &SurveyTable) -> Self {
        let dims = table.dims;
        let low = dims.n_a().max(dims.n_b());
        let mut at: BTreeMap<(usize, usize), Marker> = BTreeMap::new();
        let mut by_ranks: BTreeMap<(usize, usize), Vec<_>> = BTreeMap::new();
        for r in &table.rows {
            by_ranks.entry((r.ranks[0], r.ranks[1])).or_default().push(r);
        }
        for ((m, n), rows) in by_ranks {
            let marker = if rows.iter().any(|r| r.is_extremal_full(dims)) {
                Marker::ExtremalRedDot
            } else if m == n && m <= low && rows.iter().any(|r| r.verdict.any_separable()) {
                Marker::SeparableGreen
            } else {
                Marker::NonextremalRedCircle
            };
            for key in [(m, n), (n, m)] {
                let e = at.entry(key).or_insert(marker);
                *e = (*e).min(marker);
            }
        }
        let points = at
            .into_iter()
            .map(|((m, n), marker)| Point { m, n, marker })
            .collect();
        Self {
            dims,
            points,
            guides: Guides::for_dims(dims),
        }
    }

    fn marker_at(&self, m: usize, n: usize) -> Option<Marker> {
        self.points
            .iter()
            .find(|p| p.m == m && p.n == n)
            .map(|p| p.marker)
    }

    /// Fixed-width grid, `n` decreasing downwards, `m` increasing to the
    /// right. Markers take precedence over guides.
    pub fn render_text(&self) -> String {
        let g = self.guides;
        let n_max = self.dims.n();
        let w = n_max.to_string().len();
        let mut out = String::new();
        let _ = writeln!(out, "rank diagram {} (m across, n up)", self.dims);
        for n in (1..=n_max).rev() {
            let _ = write!(out, "{n:>w$} |");
            for m in 1..=n_max {
                let _ = write!(out, " {:>w$}", self.cell(m, n, &g));
            }
            out.push('\n');
        }
        let _ = writeln!(out, "{} +{}", " ".repeat(w), "-".repeat((w + 1) * n_max));
        let _ = write!(out, "{} ", " ".repeat(w + 1));
        for m in 1..=n_max {
            let _ = write!(out, " {m:>w$}");
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "legend: * extremal  o non-extremal  g separable  + hlvc m,n={}  : conjecture m,n={}{}  ~ arc m^2+n^2={}  / criterion m+n={}",
            g.hlvc,
            g.conjecture,
            if g.conjecture_visible() { "" } else { " (hidden)" },
            g.arc_radius_sq,
            g.criterion
        );
        out
    }

    fn cell(&self, m: usize, n: usize, g: &Guides) -> char {
        if let Some(mk) = self.marker_at(m, n) {
            return mk.glyph();
        }
        let r2 = g.arc_radius_sq;
        let inside = m * m + n * n <= r2;
        let edge = inside && ((m + 1) * (m + 1) + n * n > r2 || m * m + (n + 1) * (n + 1) > r2);
        if (m + n) as i64 == g.criterion {
            '/'
        } else if edge {
            '~'
        } else if m == g.hlvc || n == g.hlvc {
            '+'
        } else if g.conjecture_visible() && (m == g.conjecture || n == g.conjecture) {
            ':'
        } else {
            '.'
        }
    }

    /// Static SVG 1.1 rendering.
    pub fn render_svg(&self) -> String {
        let g = self.guides;
        let n_max = self.dims.n() as f64;
        let cell = 28.0;
        let margin = 40.0;
        let size = cell * (n_max + 1.0);
        let total = size + 2.0 * margin;
        let x = |m: f64| margin + m * cell;
        let y = |n: f64| margin + size - n * cell;
        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
        );
        let _ = writeln!(s, r#"<title>Rank diagram {}</title>"#, self.dims);
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{total}" height="{total}" fill="white"/>"#);
        let _ = writeln!(s, r#"<g id="axes" stroke="black" stroke-width="1">"#);
        let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, x(0.0), y(0.0), x(n_max + 0.5), y(0.0));
        let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, x(0.0), y(0.0), x(0.0), y(n_max + 0.5));
        let _ = writeln!(s, "</g>");
        let _ = writeln!(s, r#"<g id="ticks" font-family="sans-serif" font-size="10" text-anchor="middle">"#);
        for k in 1..=self.dims.n() {
            let k = k as f64;
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x(k), y(0.0) + 14.0, k);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x(0.0) - 12.0, y(k) + 4.0, k);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}">m</text>"#, x(n_max + 0.5), y(0.0) + 28.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">n</text>"#, x(0.0) - 28.0, y(n_max + 0.5));
        let _ = writeln!(s, "</g>");

        let hi = n_max + 0.5;
        let h = g.hlvc as f64;
        let _ = writeln!(s, r#"<g id="hlvc" stroke="red" stroke-width="1.5">"#);
        let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, x(h), y(h), x(h), y(hi));
        let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, x(h), y(h), x(hi), y(h));
        let _ = writeln!(s, "</g>");
        if g.conjecture_visible() {
            let c = g.conjecture as f64;
            let _ = writeln!(s, r#"<g id="conjecture" stroke="red" stroke-width="1.5" stroke-dasharray="6,4">"#);
            let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, x(c), y(c), x(c), y(hi));
            let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, x(c), y(c), x(hi), y(c));
            let _ = writeln!(s, "</g>");
        }
        let r = (g.arc_radius_sq as f64).sqrt();
        let _ = writeln!(
            s,
            r#"<path id="arc" d="M {} {} A {} {} 0 0 1 {} {}" fill="none" stroke="red" stroke-width="1.5"/>"#,
            x(0.0),
            y(r),
            r * cell,
            r * cell,
            x(r),
            y(0.0)
        );
        let c = g.criterion as f64;
        let _ = writeln!(
            s,
            r#"<line id="criterion" x1="{}" y1="{}" x2="{}" y2="{}" stroke="green" stroke-width="1.5" stroke-dasharray="6,4"/>"#,
            x(c - hi),
            y(hi),
            x(hi),
            y(c - hi)
        );
        let _ = writeln!(s, r#"<g id="points">"#);
        for p in &self.points {
            let (cx, cy) = (x(p.m as f64), y(p.n as f64));
            let style = match p.marker {
                Marker::SeparableGreen => r#"fill="none" stroke="green" stroke-width="1.5""#,
                Marker::ExtremalRedDot => r#"fill="red" stroke="red""#,
                Marker::NonextremalRedCircle => r#"fill="none" stroke="red" stroke-width="1.5""#,
            };
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="5" {style}/>"#);
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(s, "</svg>");
        s
    }
}
