//! Log-log SVG plots of the error columns of a results table, with dashed
//! reference slopes. Emitted as plain SVG text; no plotting dependency.

use crate::error::{GdmError, Result};

pub const CSV_HEADER: &str = "M,h,k,N,E1,E2,riesz_gap,zeta_T,delta_T";

/// One parsed row of the results table.
#[derive(Debug, Clone)]
pub struct CsvRow {
    pub mesh_m: usize,
    pub h: f64,
    pub k: f64,
    pub n_steps: usize,
    pub e1: f64,
    pub e2: f64,
    pub riesz_gap: f64,
    pub zeta_t: f64,
    pub delta_t: f64,
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| GdmError::InvalidConfig("empty results table".into()))?;
    if header.trim() != CSV_HEADER {
        return Err(GdmError::InvalidConfig(format!(
            "unexpected header {header:?}; expected {CSV_HEADER:?}"
        )));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 9 {
            return Err(GdmError::InvalidConfig(format!(
                "row {} has {} columns",
                idx + 2,
                parts.len()
            )));
        }
        let f = |i: usize| -> Result<f64> {
            parts[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| GdmError::InvalidConfig(format!("row {}: {e}", idx + 2)))
        };
        rows.push(CsvRow {
            mesh_m: parts[0].trim().parse().map_err(|e| {
                GdmError::InvalidConfig(format!("row {}: {e}", idx + 2))
            })?,
            h: f(1)?,
            k: f(2)?,
            n_steps: parts[3].trim().parse().map_err(|e| {
                GdmError::InvalidConfig(format!("row {}: {e}", idx + 2))
            })?,
            e1: f(4)?,
            e2: f(5)?,
            riesz_gap: f(6)?,
            zeta_t: f(7)?,
            delta_t: f(8)?,
        });
    }
    if rows.is_empty() {
        return Err(GdmError::InvalidConfig("results table has no rows".into()));
    }
    Ok(rows)
}

struct LogMap {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    px0: f64,
    px1: f64,
    py0: f64,
    py1: f64,
}

impl LogMap {
    fn x(&self, v: f64) -> f64 {
        let t = (v.ln() - self.x0) / (self.x1 - self.x0);
        self.px0 + t * (self.px1 - self.px0)
    }

    fn y(&self, v: f64) -> f64 {
        let t = (v.ln() - self.y0) / (self.y1 - self.y0);
        self.py0 + t * (self.py1 - self.py0)
    }
}

fn polyline(map: &LogMap, pts: &[(f64, f64)], color: &str, dashed: bool) -> String {
    let coords: Vec<String> = pts
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", map.x(x), map.y(y)))
        .collect();
    let dash = if dashed {
        " stroke-dasharray=\"6,4\""
    } else {
        ""
    };
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"{dash} points=\"{}\"/>\n",
        coords.join(" ")
    )
}

fn markers(map: &LogMap, pts: &[(f64, f64)], color: &str) -> String {
    pts.iter()
        .map(|&(x, y)| {
            format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                map.x(x),
                map.y(y)
            )
        })
        .collect()
}

/// Render the E1/E2 series of a results table as a log-log SVG with dashed
/// reference lines of slopes 1/2, 1 and 2 anchored at the E1 range.
pub fn render_svg(rows: &[CsvRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(GdmError::InvalidConfig("no rows to plot".into()));
    }
    let mut pts_e1: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.e1)).collect();
    let mut pts_e2: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.e2)).collect();
    pts_e1.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pts_e2.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if pts_e1.iter().chain(&pts_e2).any(|&(h, e)| h <= 0.0 || e <= 0.0) {
        return Err(GdmError::InvalidConfig(
            "log-log plot needs positive h and errors".into(),
        ));
    }

    let hs: Vec<f64> = pts_e1.iter().map(|p| p.0).collect();
    let all_e: Vec<f64> = pts_e1.iter().chain(&pts_e2).map(|p| p.1).collect();
    let (hmin, hmax) = (hs[0], hs[hs.len() - 1]);
    let emin = all_e.iter().cloned().fold(f64::INFINITY, f64::min);
    let emax = all_e.iter().cloned().fold(0.0_f64, f64::max);

    // reference lines through the coarsest E1 point, extended over the range
    let anchor = *pts_e1.last().unwrap();
    let refs: Vec<(f64, &str)> = vec![(0.5, "slope 1/2"), (1.0, "slope 1"), (2.0, "slope 2")];
    let ref_values = |slope: f64| -> Vec<(f64, f64)> {
        vec![
            (hmin, anchor.1 * (hmin / anchor.0).powf(slope)),
            (hmax, anchor.1 * (hmax / anchor.0).powf(slope)),
        ]
    };
    let ref_min = refs
        .iter()
        .flat_map(|&(s, _)| ref_values(s).into_iter().map(|p| p.1))
        .fold(f64::INFINITY, f64::min);

    let map = LogMap {
        x0: (hmin * 0.8).ln(),
        x1: (hmax * 1.25).ln(),
        y0: (emin.min(ref_min) * 0.5).ln(),
        y1: (emax * 2.0).ln(),
        px0: 70.0,
        px1: 600.0,
        py0: 430.0,
        py1: 30.0,
    };

    let mut svg = String::new();
    svg.push_str(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" viewBox=\"0 0 640 480\">\n",
    );
    svg.push_str("<rect width=\"640\" height=\"480\" fill=\"white\"/>\n");
    svg.push_str(
        "<line x1=\"70\" y1=\"430\" x2=\"600\" y2=\"430\" stroke=\"black\" stroke-width=\"1\"/>\n",
    );
    svg.push_str(
        "<line x1=\"70\" y1=\"30\" x2=\"70\" y2=\"430\" stroke=\"black\" stroke-width=\"1\"/>\n",
    );
    svg.push_str("<text x=\"330\" y=\"465\" font-size=\"14\" text-anchor=\"middle\">h</text>\n");
    svg.push_str(
        "<text x=\"20\" y=\"230\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 230)\">error</text>\n",
    );
    // tick labels at the data abscissae
    for &(h, _) in &pts_e1 {
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"447\" font-size=\"10\" text-anchor=\"middle\">{:.4}</text>\n",
            map.x(h),
            h
        ));
    }
    for &(slope, label) in &refs {
        let pts = ref_values(slope);
        svg.push_str(&polyline(&map, &pts, "#999999", true));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" fill=\"#666666\">{label}</text>\n",
            map.x(pts[0].0) + 4.0,
            map.y(pts[0].1) - 4.0
        ));
    }
    svg.push_str(&polyline(&map, &pts_e1, "#1f77b4", false));
    svg.push_str(&markers(&map, &pts_e1, "#1f77b4"));
    svg.push_str(&polyline(&map, &pts_e2, "#d62728", false));
    svg.push_str(&markers(&map, &pts_e2, "#d62728"));
    svg.push_str(
        "<rect x=\"490\" y=\"40\" width=\"100\" height=\"44\" fill=\"white\" stroke=\"#cccccc\"/>\n",
    );
    svg.push_str("<line x1=\"498\" y1=\"54\" x2=\"522\" y2=\"54\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n");
    svg.push_str("<text x=\"528\" y=\"58\" font-size=\"12\">E1</text>\n");
    svg.push_str("<line x1=\"498\" y1=\"72\" x2=\"522\" y2=\"72\" stroke=\"#d62728\" stroke-width=\"2\"/>\n");
    svg.push_str("<text x=\"528\" y=\"76\" font-size=\"12\">E2</text>\n");
    svg.push_str("</svg>\n");
    Ok(svg)
}
