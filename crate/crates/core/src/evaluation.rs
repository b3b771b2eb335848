//! Scoring rankings against simulated truth.

use std::io::Write;

use crate::baselines::count_discoveries_at_true_fdr;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cut {
    /// Select `p <= cut`.
    PValue(f64),
    /// Select `score >= cut`.
    Score(f64),
    /// Select the first `k` genes of a ranking.
    Length(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionAtCut {
    pub cut: Cut,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub fdr: f64,
    pub sensitivity: f64,
}

impl ConfusionAtCut {
    fn from_selection(cut: Cut, selected: &[bool], truth: &[bool]) -> Self {
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (&s, &t) in selected.iter().zip(truth) {
            match (s, t) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        Self {
            cut,
            tp,
            fp,
            tn,
            fn_,
            fdr: ratio(fp, tp + fp),
            sensitivity: ratio(tp, tp + fn_),
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("{a} values for {b} truth labels")));
    }
    Ok(())
}

/// Confusion counts for p-values (`Cut::PValue`) or scores (`Cut::Score`).
/// For `Cut::Length`, `values` are scores and the top `k` are selected
/// (ties by index).
pub fn confusion_at(values: &[f64], truth: &[bool], cut: Cut) -> Result<ConfusionAtCut> {
    check_len(values.len(), truth.len())?;
    let selected: Vec<bool> = match cut {
        Cut::PValue(c) => values.iter().map(|&p| p <= c).collect(),
        Cut::Score(c) => values.iter().map(|&s| s >= c).collect(),
        Cut::Length(k) => {
            let mut sel = vec![false; values.len()];
            for &i in crate::baselines::order_descending(values).iter().take(k) {
                sel[i] = true;
            }
            sel
        }
    };
    Ok(ConfusionAtCut::from_selection(cut, &selected, truth))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub length: usize,
    pub fdr: f64,
    pub sensitivity: f64,
}

/// True FDR and sensitivity after each prefix of `order` (best first).
pub fn prefix_curve(order: &[usize], truth: &[bool]) -> Vec<CurvePoint> {
    let total = truth.iter().filter(|&&t| t).count();
    let mut tp = 0;
    order
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            tp += truth[i] as usize;
            CurvePoint {
                length: k + 1,
                fdr: ratio(k + 1 - tp, k + 1),
                sensitivity: ratio(tp, total),
            }
        })
        .collect()
}

/// One point per distinct score, cutting at `score >= s` (or `p <= s` when
/// `higher_is_better` is false).
pub fn curve(values: &[f64], truth: &[bool], higher_is_better: bool) -> Result<Vec<CurvePoint>> {
    check_len(values.len(), truth.len())?;
    let order = if higher_is_better {
        crate::baselines::order_descending(values)
    } else {
        crate::baselines::order_ascending(values)
    };
    let full = prefix_curve(&order, truth);
    Ok(full
        .into_iter()
        .enumerate()
        .filter(|&(k, _)| k + 1 == order.len() || values[order[k]] != values[order[k + 1]])
        .map(|(_, p)| p)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPoint {
    pub length: usize,
    pub true_fdr: f64,
    pub estimated_fdr: f64,
}

/// Pairs the true FDR of each prefix of `order` with the estimate for that
/// prefix (`estimated[k]` belongs to the first `k + 1` genes).
pub fn calibration_curve(order: &[usize], estimated: &[f64], truth: &[bool]) -> Result<Vec<CalibrationPoint>> {
    check_len(order.len(), estimated.len())?;
    Ok(prefix_curve(order, truth)
        .into_iter()
        .zip(estimated)
        .map(|(p, &e)| CalibrationPoint {
            length: p.length,
            true_fdr: p.fdr,
            estimated_fdr: e,
        })
        .collect())
}

/// Element-wise mean of curves that share list lengths.
pub fn average_curves(curves: &[Vec<CurvePoint>]) -> Vec<CurvePoint> {
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    let r = curves.len() as f64;
    (0..len)
        .map(|k| CurvePoint {
            length: curves[0][k].length,
            fdr: curves.iter().map(|c| c[k].fdr).sum::<f64>() / r,
            sensitivity: curves.iter().map(|c| c[k].sensitivity).sum::<f64>() / r,
        })
        .collect()
}

/// FDR and sensitivity split into the contribution of g0d0 genes and the
/// totals. Contributions share the total denominators, so
/// `fdr_g0d0 <= fdr_total` and `sensitivity_g0d0 <= sensitivity_total`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StratifiedReport {
    pub selected: usize,
    pub true_de: usize,
    pub fp_g0d0: usize,
    pub fp_rest: usize,
    pub tp_g0d0: usize,
    pub tp_rest: usize,
    pub fdr_g0d0: f64,
    pub fdr_total: f64,
    pub sensitivity_g0d0: f64,
    pub sensitivity_total: f64,
}

impl StratifiedReport {
    pub fn new(selected: &[bool], truth: &[bool], g0d0: &[bool]) -> Result<Self> {
        check_len(selected.len(), truth.len())?;
        check_len(g0d0.len(), truth.len())?;
        let mut r = StratifiedReport::default();
        for i in 0..truth.len() {
            r.true_de += truth[i] as usize;
            if !selected[i] {
                continue;
            }
            r.selected += 1;
            match (truth[i], g0d0[i]) {
                (true, true) => r.tp_g0d0 += 1,
                (true, false) => r.tp_rest += 1,
                (false, true) => r.fp_g0d0 += 1,
                (false, false) => r.fp_rest += 1,
            }
        }
        r.fdr_g0d0 = ratio(r.fp_g0d0, r.selected);
        r.fdr_total = ratio(r.fp_g0d0 + r.fp_rest, r.selected);
        r.sensitivity_g0d0 = ratio(r.tp_g0d0, r.true_de);
        r.sensitivity_total = ratio(r.tp_g0d0 + r.tp_rest, r.true_de);
        Ok(r)
    }

    /// Mean of the rates over replicates; counts are summed.
    pub fn mean(reports: &[StratifiedReport]) -> StratifiedReport {
        let r = reports.len().max(1) as f64;
        let mut out = StratifiedReport::default();
        for x in reports {
            out.selected += x.selected;
            out.true_de += x.true_de;
            out.fp_g0d0 += x.fp_g0d0;
            out.fp_rest += x.fp_rest;
            out.tp_g0d0 += x.tp_g0d0;
            out.tp_rest += x.tp_rest;
            out.fdr_g0d0 += x.fdr_g0d0 / r;
            out.fdr_total += x.fdr_total / r;
            out.sensitivity_g0d0 += x.sensitivity_g0d0 / r;
            out.sensitivity_total += x.sensitivity_total / r;
        }
        out
    }
}

/// Per-method results of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodEvaluation {
    pub method: String,
    pub table1: StratifiedReport,
    /// List length at true FDR `fdr_target`.
    pub discoveries: usize,
    pub curve: Vec<CurvePoint>,
}

/// Evaluates a method given its ranking (best first) and the selection at
/// the fixed cut.
pub fn evaluate_method(
    method: &str,
    order: &[usize],
    selected: &[bool],
    truth: &[bool],
    g0d0: &[bool],
    fdr_target: f64,
) -> Result<MethodEvaluation> {
    Ok(MethodEvaluation {
        method: method.to_string(),
        table1: StratifiedReport::new(selected, truth, g0d0)?,
        discoveries: count_discoveries_at_true_fdr(order, truth, fdr_target),
        curve: prefix_curve(order, truth),
    })
}

/// Stratified selection CSV in percent: `method,FDR_g0d0,FDR_total,S_g0d0,S_total`.
pub fn write_table1_csv<W: Write>(mut w: W, rows: &[(String, StratifiedReport)]) -> std::io::Result<()> {
    writeln!(w, "method,FDR_g0d0,FDR_total,S_g0d0,S_total")?;
    for (m, r) in rows {
        writeln!(
            w,
            "{m},{:.2},{:.2},{:.2},{:.2}",
            100.0 * r.fdr_g0d0,
            100.0 * r.fdr_total,
            100.0 * r.sensitivity_g0d0,
            100.0 * r.sensitivity_total
        )?;
    }
    Ok(())
}

/// Discovery-count CSV: mean discoveries plus one column per replicate.
pub fn write_table2_csv<W: Write>(mut w: W, rows: &[(String, Vec<usize>)]) -> std::io::Result<()> {
    let reps = rows.first().map_or(0, |r| r.1.len());
    write!(w, "method,mean")?;
    for i in 0..reps {
        write!(w, ",rep{}", i + 1)?;
    }
    writeln!(w)?;
    for (m, counts) in rows {
        let mean = counts.iter().sum::<usize>() as f64 / counts.len().max(1) as f64;
        write!(w, "{m},{mean:.1}")?;
        for c in counts {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Curve CSV: `length,fdr,sensitivity`.
pub fn write_curve_csv<W: Write>(mut w: W, curve: &[CurvePoint]) -> std::io::Result<()> {
    writeln!(w, "length,fdr,sensitivity")?;
    for p in curve {
        writeln!(w, "{},{},{}", p.length, p.fdr, p.sensitivity)?;
    }
    Ok(())
}

/// Calibration CSV: `length,true_fdr,estimated_fdr`.
pub fn write_calibration_csv<W: Write>(mut w: W, points: &[CalibrationPoint]) -> std::io::Result<()> {
    writeln!(w, "length,true_fdr,estimated_fdr")?;
    for p in points {
        writeln!(w, "{},{},{}", p.length, p.true_fdr, p.estimated_fdr)?;
    }
    Ok(())
}
