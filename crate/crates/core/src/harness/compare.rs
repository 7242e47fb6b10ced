use serde::Serialize;

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov survival function `Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = 2.0 * (if k % 2 == 1 { 1.0 } else { -1.0 }) * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() <= 1e-12 * sum.abs() || term.abs() <= 1e-300 {
            return sum.clamp(0.0, 1.0);
        }
    }
    sum.clamp(0.0, 1.0)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    assert!(!a.is_empty() && !b.is_empty(), "KS test needs two non-empty samples");
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    KsResult {
        statistic: d,
        p_value: kolmogorov_q((en + 0.12 + 0.11 / en) * d),
    }
}

/// Per-dimension comparison of two sample sets.
#[derive(Debug, Clone, Serialize)]
pub struct ChainComparison {
    pub names: Vec<String>,
    pub mean_delta: Vec<f64>,
    pub std_delta: Vec<f64>,
    pub ks: Vec<KsResult>,
}

pub fn compare_chains(names: &[String], a: &[Vec<f64>], b: &[Vec<f64>]) -> ChainComparison {
    let col = |s: &[Vec<f64>], d: usize| s.iter().map(|r| r[d]).collect::<Vec<f64>>();
    let ms = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (m, var.sqrt())
    };
    let mut out = ChainComparison {
        names: names.to_vec(),
        mean_delta: Vec::new(),
        std_delta: Vec::new(),
        ks: Vec::new(),
    };
    for d in 0..names.len() {
        let (ca, cb) = (col(a, d), col(b, d));
        let ((ma, sa), (mb, sb)) = (ms(&ca), ms(&cb));
        out.mean_delta.push(mb - ma);
        out.std_delta.push(sb - sa);
        out.ks.push(ks_two_sample(&ca, &cb));
    }
    out
}
