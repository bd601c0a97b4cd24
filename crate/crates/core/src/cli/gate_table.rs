//! The worked gate table: rendering plus the published values for the
//! (7, 11, 13) example, used by `--published-diff`.

use serde::Serialize;

use crate::gating::GatedCandidate;

/// `(r1, r2)` and the published `(f12, r3_hat, passed)`.
type PublishedRow = ((u64, u64), (u64, u64, bool));

/// Published rows of the (7, 11, 13) worked example.
const PUBLISHED: [PublishedRow; 12] = [
    ((0, 1), (56, 4, false)),
    ((0, 7), (7, 7, true)),
    ((0, 8), (63, 11, true)),
    ((0, 10), (21, 8, false)),
    ((3, 1), (24, 11, true)),
    ((3, 7), (52, 0, false)),
    ((3, 8), (31, 5, true)),
    ((3, 10), (66, 1, false)),
    ((6, 1), (34, 8, false)),
    ((6, 7), (62, 10, false)),
    ((6, 8), (41, 2, true)),
    ((6, 10), (76, 11, true)),
];

pub const WORKED_MODULI: [u64; 3] = [7, 11, 13];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableRow {
    pub r1: u64,
    pub r2: u64,
    pub crt: u64,
    pub r3_hat: u64,
    pub verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub published: Option<String>,
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "Pass"
    } else {
        "Reject"
    }
}

/// `match` when the published row agrees, `corrected (...)` when it does
/// not, `unpublished` when the pair is absent from the published table.
fn annotate(row: &GatedCandidate) -> String {
    match PUBLISHED.iter().find(|(key, _)| *key == (row.r1, row.r2)) {
        None => "unpublished".into(),
        Some((_, (f12, r3, passed))) if (*f12, *r3, *passed) == (row.f12, row.r3_hat, row.passed) => "match".into(),
        Some((_, (f12, r3, passed))) => {
            format!("corrected (published {f12} / {r3} / {})", verdict(*passed))
        }
    }
}

/// Table rows; annotations only apply to the worked moduli.
pub fn rows(gated: &[GatedCandidate], moduli: [u64; 3], published_diff: bool) -> Vec<TableRow> {
    let diff = published_diff && moduli == WORKED_MODULI;
    gated
        .iter()
        .map(|g| TableRow {
            r1: g.r1,
            r2: g.r2,
            crt: g.f12,
            r3_hat: g.r3_hat,
            verdict: verdict(g.passed),
            published: if published_diff {
                Some(if diff { annotate(g) } else { "unpublished".into() })
            } else {
                None
            },
        })
        .collect()
}

pub fn render_table(rows: &[TableRow], m3: u64) -> String {
    let with_published = rows.iter().any(|r| r.published.is_some());
    let mut out = format!("{:<10} | {:>6} | {:>12} | {:<7}", "(r1,r2)", "CRT", format!("r3 mod {m3}"), "verdict");
    if with_published {
        out.push_str(" | published");
    }
    out.push('\n');
    for r in rows {
        let pair = format!("({},{})", r.r1, r.r2);
        out.push_str(&format!("{pair:<10} | {:>6} | {:>12} | {:<7}", r.crt, r.r3_hat, r.verdict));
        if let Some(p) = &r.published {
            out.push_str(&format!(" | {p}"));
        }
        out.push('\n');
    }
    out
}

pub fn render_csv(rows: &[TableRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["r1", "r2", "crt", "r3_hat", "verdict", "published"]).expect("header");
    for r in rows {
        w.write_record([
            r.r1.to_string(),
            r.r2.to_string(),
            r.crt.to_string(),
            r.r3_hat.to_string(),
            r.verdict.to_string(),
            r.published.clone().unwrap_or_default(),
        ])
        .expect("row");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(r1: u64, r2: u64, f12: u64, r3_hat: u64, passed: bool) -> GatedCandidate {
        GatedCandidate { r1, r2, f12, r3_hat, passed }
    }

    #[test]
    fn annotations() {
        assert_eq!(annotate(&cand(0, 7, 7, 7, true)), "match");
        assert_eq!(annotate(&cand(3, 1, 45, 6, false)), "corrected (published 24 / 11 / Pass)");
        assert_eq!(annotate(&cand(1, 1, 1, 1, true)), "unpublished");
    }

    #[test]
    fn other_moduli_are_never_compared() {
        let r = rows(&[cand(0, 7, 7, 7, true)], [5, 7, 11], true);
        assert_eq!(r[0].published.as_deref(), Some("unpublished"));
        assert!(rows(&[cand(0, 7, 7, 7, true)], WORKED_MODULI, false)[0].published.is_none());
    }

    #[test]
    fn empty_table_keeps_its_header() {
        assert_eq!(render_table(&[], 13).lines().count(), 1);
        assert_eq!(render_csv(&[]).lines().count(), 1);
    }
}
