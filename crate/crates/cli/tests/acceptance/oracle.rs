//! Brute-force metric definitions, written independently of the library:
//! explicit loops over raw cells, pairwise AUROC, threshold-sweep AUPRC and
//! counting ranks.

pub struct Expected {
    pub hamming_loss: f64,
    pub subset_accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub macro_balanced_accuracy: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    /// Per class: tp, fp, fn, tn.
    pub counts: Vec<[usize; 4]>,
    pub class_auroc: Vec<Option<f64>>,
    pub macro_auroc: Option<f64>,
    pub macro_auprc: Option<f64>,
    pub class_f1: Vec<f64>,
    pub class_prevalence: Vec<f64>,
}

fn div(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn auroc(s: &[f64], y: &[u8]) -> Option<f64> {
    let pos: Vec<usize> = (0..s.len()).filter(|&i| y[i] == 1).collect();
    let neg: Vec<usize> = (0..s.len()).filter(|&i| y[i] == 0).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut won = 0.0;
    for &i in &pos {
        for &j in &neg {
            if s[i] > s[j] {
                won += 1.0;
            } else if s[i] == s[j] {
                won += 0.5;
            }
        }
    }
    Some(won / (pos.len() * neg.len()) as f64)
}

/// Step-wise average precision: Σ (R_t − R_{t−1}) · P_t over distinct
/// score thresholds taken from high to low.
pub fn auprc(s: &[f64], y: &[u8]) -> Option<f64> {
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 {
        return None;
    }
    let mut th = s.to_vec();
    th.sort_by(|a, b| b.partial_cmp(a).unwrap());
    th.dedup();
    let (mut ap, mut prev) = (0.0, 0.0);
    for t in th {
        let tp = (0..s.len()).filter(|&i| s[i] >= t && y[i] == 1).count();
        let predicted = (0..s.len()).filter(|&i| s[i] >= t).count();
        let r = tp as f64 / pos as f64;
        ap += (r - prev) * (tp as f64 / predicted as f64);
        prev = r;
    }
    Some(ap)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&o| o < x).count() as f64;
            let equal = v.iter().filter(|&&o| o == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ra, rb) = (ranks(a), ranks(b));
    let (ma, mb) = (mean(&ra), mean(&rb));
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

/// Everything at the fixed threshold 0.5 (`score ≥ 0.5` is positive).
/// Macro means cover classes with at least one positive; each ranking
/// metric is averaged over the classes where it is defined.
pub fn expected(scores: &[f64], labels: &[u8], n: usize, k: usize) -> Expected {
    let pred: Vec<u8> = scores.iter().map(|&s| (s >= 0.5) as u8).collect();
    let mut wrong = 0;
    for i in 0..n * k {
        if pred[i] != labels[i] {
            wrong += 1;
        }
    }
    let mut exact = 0;
    for i in 0..n {
        if (0..k).all(|c| pred[i * k + c] == labels[i * k + c]) {
            exact += 1;
        }
    }
    let (mut p, mut r, mut f, mut ba) = (vec![], vec![], vec![], vec![]);
    let (mut stp, mut sfp, mut sfn) = (0, 0, 0);
    let mut class_f1 = vec![];
    let mut class_prevalence = vec![];
    let (mut aucs, mut aps) = (vec![], vec![]);
    let (mut counts, mut class_auroc) = (vec![], vec![]);
    let (mut wp, mut wr, mut wf, mut support) = (0.0, 0.0, 0.0, 0usize);
    for c in 0..k {
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for i in 0..n {
            match (pred[i * k + c], labels[i * k + c]) {
                (1, 1) => tp += 1,
                (1, 0) => fp += 1,
                (0, 1) => fn_ += 1,
                _ => tn += 1,
            }
        }
        counts.push([tp, fp, fn_, tn]);
        let pos = tp + fn_;
        support += pos;
        wp += div(tp, tp + fp) * pos as f64;
        wr += div(tp, pos) * pos as f64;
        wf += div(2 * tp, 2 * tp + fp + fn_) * pos as f64;
        stp += tp;
        sfp += fp;
        sfn += fn_;
        let f1 = div(2 * tp, 2 * tp + fp + fn_);
        class_f1.push(f1);
        class_prevalence.push((tp + fn_) as f64 / n as f64);
        if tp + fn_ > 0 {
            p.push(div(tp, tp + fp));
            r.push(div(tp, tp + fn_));
            f.push(f1);
            ba.push((div(tp, tp + fn_) + div(tn, tn + fp)) / 2.0);
        }
        let s: Vec<f64> = (0..n).map(|i| scores[i * k + c]).collect();
        let y: Vec<u8> = (0..n).map(|i| labels[i * k + c]).collect();
        class_auroc.push(auroc(&s, &y));
        aucs.extend(auroc(&s, &y));
        aps.extend(auprc(&s, &y));
    }
    Expected {
        hamming_loss: wrong as f64 / (n * k) as f64,
        subset_accuracy: exact as f64 / n as f64,
        macro_precision: mean(&p),
        macro_recall: mean(&r),
        macro_f1: mean(&f),
        macro_balanced_accuracy: mean(&ba),
        micro_precision: div(stp, stp + sfp),
        micro_recall: div(stp, stp + sfn),
        micro_f1: div(2 * stp, 2 * stp + sfp + sfn),
        weighted_precision: if support == 0 { 0.0 } else { wp / support as f64 },
        weighted_recall: if support == 0 { 0.0 } else { wr / support as f64 },
        weighted_f1: if support == 0 { 0.0 } else { wf / support as f64 },
        counts,
        class_auroc,
        macro_auroc: (!aucs.is_empty()).then(|| mean(&aucs)),
        macro_auprc: (!aps.is_empty()).then(|| mean(&aps)),
        class_f1,
        class_prevalence,
    }
}
