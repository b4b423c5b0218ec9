//! End-to-end checks of the headline results. Prints one PASS/FAIL line per
//! check and fails if any check fails.

mod common;

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use cfsim_core::catalog::site_grid_index;
use cfsim_core::circuit::{evolve_forward, outcome_distribution};
use cfsim_core::fisher::{fisher_at, fisher_limit, fisher_report, FisherMode, FisherOptions};
use cfsim_core::oracle::{oracle_run, ORACLE_SITE_LIMIT};
use cfsim_core::state::ModeLabel;
use cfsim_core::trace::{joint_orthogonal, trace_combined, trace_combined_with, CouplingModel};
use cfsim_core::tsvf::{two_state_vector, weak_value, weak_value_table, WeakValue};
use cfsim_core::{build, Circuit, Outcome, Polarization, ProtocolName, ProtocolSpec, RunParams};
use num_complex::Complex64;

type Check = std::result::Result<String, String>;

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

fn ensure(ok: bool, msg: String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn spec(name: ProtocolName) -> ProtocolSpec {
    ProtocolSpec::new(name)
}

fn circuit(s: &ProtocolSpec) -> std::result::Result<Circuit, String> {
    build(s).map_err(err)
}

fn click(c: &Circuit, detector: &str) -> f64 {
    let d = outcome_distribution(c, &RunParams::ideal()).unwrap();
    Polarization::ALL
        .iter()
        .map(|&p| d[&Outcome::detector(detector, p)])
        .sum()
}

/// Least-squares slope of log y against log x.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn reference_fisher() -> Check {
    let c = circuit(&spec(ProtocolName::Reference))?;
    let f = fisher_limit(&c, &c.all_bob_site_ids(), &FisherOptions::default()).map_err(err)?;
    ensure((f.total - 4.0).abs() <= 1e-3, format!("F = {}", f.total))?;
    Ok(format!("F = {:.9}", f.total))
}

fn ev_ifm_blocked() -> Check {
    let c = circuit(&spec(ProtocolName::EvIfm).blocked(true))?;
    let p = click(&c, "D");
    ensure((p - 0.25).abs() <= 1e-12, format!("P(D) = {p}"))?;
    let w = weak_value(&c, "D", "B").map_err(err)?;
    let w = w.value().ok_or("weak value at B is singular")?;
    ensure(w.norm() <= 1e-12, format!("(P_B)_w = {w}"))?;
    let t = trace_combined(&c, 1e-2, CouplingModel::Incoherent).map_err(err)?;
    ensure(t.combined == 0.0, format!("trace = {}", t.combined))?;
    let f = fisher_report(&c, FisherMode::PerSiteSum, &FisherOptions::default()).map_err(err)?;
    ensure(f.total.abs() <= 1e-12, format!("F = {}", f.total))?;
    Ok(format!("P(D) = {p}, (P_B)_w = {}, trace = {}, F = {:e}", w.norm(), t.combined, f.total))
}

fn nested_mzi_open() -> Check {
    let c = circuit(&spec(ProtocolName::NestedMzi))?;
    let wb = weak_value(&c, "D", "B").map_err(err)?.value().ok_or("singular at B")?;
    let wc = weak_value(&c, "D", "C").map_err(err)?.value().ok_or("singular at C")?;
    ensure((wb - 1.0).norm() <= 1e-10, format!("(P_B)_w = {wb}"))?;
    ensure((wb - wc).norm() <= 1e-10, format!("(P_B)_w = {wb}, (P_C)_w = {wc}"))?;
    let f = fisher_report(&c, FisherMode::PerSiteSum, &FisherOptions::default()).map_err(err)?;
    ensure((f.total - 4.0).abs() <= 1e-3, format!("F = {}", f.total))?;
    Ok(format!("(P_B)_w = {:.12}, (P_C)_w = {:.12}, F = {:.9}", wb.re, wc.re, f.total))
}

fn two_way() -> Check {
    let c = circuit(&spec(ProtocolName::TwoWay))?;
    let slice = c.site("B").ok_or("no site B")?.slice;
    let (r35, r8) = (35f64.sqrt(), 8f64.sqrt());
    let fwd = [4.0 / r35, 4.0 / r35, 1.0 / r35, 2f64.sqrt() / r35];
    let d0 = [1.0 / r8, -1.0 / r8, 0.5f64.sqrt(), 0.5];
    let d1 = [-1.0 / r8, 1.0 / r8, 0.5f64.sqrt(), -0.5];
    let mut worst: f64 = 0.0;
    for (det, back) in [("D0", d0), ("D1", d1)] {
        let tsv = two_state_vector(&c, det, slice).map_err(err)?;
        for (i, p) in ["B", "A", "C1", "C2"].iter().enumerate() {
            let l = ModeLabel::path(*p);
            worst = worst
                .max((tsv.forward.amplitude(&l) - Complex64::new(fwd[i], 0.0)).norm())
                .max((tsv.backward.amplitude(&l) - Complex64::new(back[i], 0.0)).norm());
        }
    }
    ensure(worst <= 1e-10, format!("amplitude mismatch {worst:e}"))?;

    let eps = 1e-2;
    let t = trace_combined(&c, eps, CouplingModel::Incoherent).map_err(err)?;
    let o = oracle_run(&c, eps, 0.0, &BTreeSet::new(), CouplingModel::Incoherent)
        .map_err(err)?
        .combined_trace(&c, true);
    let tol = 5.0 * eps.powi(4);
    ensure(
        (t.combined - 2.0 * eps * eps).abs() <= tol && (o - 2.0 * eps * eps).abs() <= tol,
        format!("trace {} oracle {} want {}", t.combined, o, 2.0 * eps * eps),
    )?;
    let f = fisher_report(&c, FisherMode::PerSiteSum, &FisherOptions::default()).map_err(err)?;
    ensure((f.total - 8.0).abs() <= 1e-2, format!("F = {}", f.total))?;
    Ok(format!(
        "amplitudes within {worst:.1e}, trace/ε² = {:.6} (oracle {:.6}), F = {:.6}",
        t.combined / (eps * eps),
        o / (eps * eps),
        f.total
    ))
}

struct ZenoErrors {
    m: f64,
    errors: Vec<f64>,
}

fn zeno_point(m: usize, n: usize, eps: f64) -> std::result::Result<ZenoErrors, String> {
    let c = circuit(&ProtocolSpec::zeno(m, n))?;
    let (mf, nf) = (m as f64, n as f64);
    let tol = 10.0 / mf;
    let mut errors = Vec::new();

    // Weak values, normalized by the largest expected magnitude.
    let d0 = weak_value_table(&c, "D0").map_err(err)?;
    let d1 = weak_value_table(&c, "D1").map_err(err)?;
    let (mut e0, mut e1): (f64, f64) = (0.0, 0.0);
    for s in c.bob_sites() {
        let (mm, nn) = site_grid_index(s.id.as_str()).ok_or("bad site id")?;
        let sn = (nn as f64 * PI / nf).sin();
        let w0 = d0.get(s.id.as_str()).and_then(WeakValue::value).ok_or("D0 singular")?;
        e0 = e0.max((w0.re - PI * PI / (8.0 * mf * mf) * sn).abs() + w0.im.abs());
        if mm == m {
            let w1 = d1.get(s.id.as_str()).and_then(WeakValue::value).ok_or("D1 singular")?;
            e1 = e1.max((w1.re + 0.5 * sn).abs() + w1.im.abs());
        }
    }
    let e0 = e0 / (PI * PI / (8.0 * mf * mf));
    let e1 = e1 / 0.5;
    ensure(e0 <= tol && e1 <= tol, format!("(M,N)=({m},{n}): weak values off by {e0:.3e}, {e1:.3e}"))?;
    errors.extend([e0, e1]);

    let t = trace_combined(&c, eps, CouplingModel::Incoherent).map_err(err)?;
    let want_d0 = eps * eps * PI.powi(4) * nf / (128.0 * mf.powi(3));
    let want_total = eps * eps * PI * PI * nf / (32.0 * mf * mf) * (1.0 + PI * PI / (4.0 * mf));
    let ed0 = rel(t.per_outcome["D0"].conditional, want_d0);
    let etot = rel(t.combined, want_total);
    ensure(ed0 <= tol && etot <= tol, format!("(M,N)=({m},{n}): trace errors {ed0:.3e}, {etot:.3e}"))?;
    errors.extend([ed0, etot]);

    let f = fisher_report(&c, FisherMode::PerSiteSum, &FisherOptions::default()).map_err(err)?;
    let fd0 = PI.powi(4) * nf / (32.0 * mf.powi(3));
    let fd1 = PI * PI * nf / (8.0 * mf * mf);
    let ftot = fd1 * (1.0 + PI * PI / (4.0 * mf));
    let (a, b, cc) = (
        rel(f.per_detector["D0"], fd0),
        rel(f.per_detector["D1"], fd1),
        rel(f.total, ftot),
    );
    ensure(
        a <= tol && b <= tol && cc <= tol,
        format!("(M,N)=({m},{n}): Fisher errors {a:.3e}, {b:.3e}, {cc:.3e}"),
    )?;
    errors.extend([a, b, cc]);
    Ok(ZenoErrors { m: mf, errors })
}

const ZENO_POINTS: [(usize, usize); 3] = [(8, 64), (16, 128), (32, 256)];

fn zeno_chain() -> Check {
    let mut pts = Vec::new();
    for (m, n) in ZENO_POINTS {
        pts.push(zeno_point(m, n, 1e-3)?);
    }
    let ms: Vec<f64> = pts.iter().map(|p| p.m).collect();
    let labels = ["W_D0", "W_D1", "trace_D0", "trace", "F_D0", "F_D1", "F"];
    let mut slopes = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        let e: Vec<f64> = pts.iter().map(|p| p.errors[i].max(1e-15)).collect();
        let s = loglog_slope(&ms, &e);
        // Errors already at round-off need no rate.
        let ok = s <= -0.8 || e.iter().all(|&x| x < 1e-9);
        ensure(ok, format!("{l} residual slope {s:.2}, errors {e:?}"))?;
        slopes.push(format!("{l} {s:.2}"));
    }
    let last = &pts[2].errors;
    Ok(format!(
        "max rel error at M=32: {:.2e}; slopes: {}",
        last.iter().cloned().fold(0.0, f64::max),
        slopes.join(", ")
    ))
}

fn k_path() -> Check {
    let eps = 1e-2;
    let mut out = Vec::new();
    for k in [1usize, 2, 4, 8] {
        let c = circuit(&spec(ProtocolName::KPath).k(k))?;
        let kf = k as f64;
        let t = trace_combined(&c, eps, CouplingModel::Incoherent).map_err(err)?;
        ensure(
            (t.combined - eps * eps / kf).abs() <= 5.0 * eps.powi(4),
            format!("K={k}: trace {}", t.combined),
        )?;
        let f = fisher_report(&c, FisherMode::PerSiteSum, &FisherOptions::default()).map_err(err)?;
        ensure((f.total - 4.0 / kf).abs() <= 1e-3, format!("K={k}: F = {}", f.total))?;
        out.push(format!("K={k}: Kt/ε² = {:.6}, KF = {:.6}", kf * t.combined / (eps * eps), kf * f.total));
    }
    Ok(out.join("; "))
}

fn asb_chain() -> Check {
    let eps = 1e-3;
    let mut out = Vec::new();
    for n in [16usize, 32, 64] {
        let c = circuit(&spec(ProtocolName::AsbChain).n(n))?;
        let nf = n as f64;
        let tol = 10.0 / nf;
        let t = trace_combined_with(&c, eps, CouplingModel::Incoherent, false).map_err(err)?;
        let p = t.per_outcome["alice"].probability;
        let ep = rel(p, nf * eps * eps / 8.0);
        let f = fisher_report(&c, FisherMode::PerSiteSum, &FisherOptions::unnormalized()).map_err(err)?;
        let ea = rel(f.per_detector["alice"], nf / 2.0);
        let ex = rel(f.excluded_total, 1.5 * nf);
        ensure(
            ep <= tol && ea <= tol && ex <= tol,
            format!("N={n}: click {ep:.3e}, alice F {ea:.3e}, excluded {ex:.3e}"),
        )?;
        out.push(format!(
            "N={n}: 8P/Nε² = {:.4}, 2F/N = {:.4}, 2F_excl/3N = {:.4}",
            8.0 * p / (nf * eps * eps),
            2.0 * f.per_detector["alice"] / nf,
            f.excluded_total / (1.5 * nf)
        ));
    }
    Ok(out.join("; "))
}

fn coherent_model() -> Check {
    let eps = 1e-3;
    for k in 1..=12usize {
        let c = circuit(&spec(ProtocolName::CoherentBounce).k(k))?;
        let want = (k * k) as f64 * eps * eps;
        let t = trace_combined(&c, eps, CouplingModel::Coherent).map_err(err)?;
        let o = oracle_run(&c, eps, 0.0, &BTreeSet::new(), CouplingModel::Coherent)
            .map_err(err)?
            .combined_trace(&c, true);
        ensure(
            rel(t.combined, want) <= 1e-12 && rel(o, want) <= 1e-12,
            format!("K={k}: trace {} oracle {o} want {want}", t.combined),
        )?;
    }
    let mut out = vec!["K-bounce K²ε² for K ≤ 12".to_string()];
    for (m, n) in ZENO_POINTS {
        let c = circuit(&ProtocolSpec::zeno(m, n))?;
        let (mf, nf) = (m as f64, n as f64);
        let t = trace_combined(&c, eps, CouplingModel::Coherent).map_err(err)?;
        let want_t = eps * eps * nf * nf / (4.0 * mf * mf) * (1.0 + PI * PI / 4.0);
        let f = fisher_report(&c, FisherMode::CommonTheta, &FisherOptions::default()).map_err(err)?;
        let want_f = nf * nf / (mf * mf) * (1.0 + PI * PI / 4.0);
        let (et, ef) = (rel(t.combined, want_t), rel(f.total, want_f));
        ensure(
            et <= 10.0 / mf && ef <= 10.0 / mf,
            format!("(M,N)=({m},{n}): trace {et:.3e}, Fisher {ef:.3e}"),
        )?;
        out.push(format!("M={m}: trace {et:.2e}, F {ef:.2e}"));
    }
    Ok(out.join("; "))
}

fn av_protocols() -> Check {
    let mut out = Vec::new();
    for name in [ProtocolName::AvNested, ProtocolName::AvTwoWay, ProtocolName::AvZeno] {
        let c = circuit(&spec(name))?;
        let mut worst: f64 = 0.0;
        for d in c.legitimate_outcomes() {
            let table = weak_value_table(&c, d).map_err(err)?;
            if table.is_singular() {
                // Dark click: never happens in the ideal run.
                ensure(click(&c, d) < 1e-20, format!("{name}: {d} singular but bright"))?;
                continue;
            }
            for (s, w) in &table.values {
                if s.as_str().starts_with("B1") || s.as_str().starts_with("B2") {
                    worst = worst.max(w.value().map_or(f64::INFINITY, |v| v.norm()));
                }
            }
        }
        ensure(worst <= 1e-10, format!("{name}: weak value {worst:e}"))?;

        // The trace is second order, so fit it on the exact joint evolution
        // (a small instance of the Zeno variant keeps that tractable).
        let small = if name == ProtocolName::AvZeno {
            circuit(&spec(name).m(2).n(4))?
        } else {
            c.clone()
        };
        let eps = [4e-3, 2e-3, 1e-3];
        let mut traces = Vec::new();
        for &e in &eps {
            let joint = joint_orthogonal(&small, e, CouplingModel::Incoherent).map_err(err)?;
            let (mut num, mut den) = (0.0, 0.0);
            for d in small.legitimate_outcomes() {
                den += joint[d].0;
                num += joint[d].1;
            }
            let t = num / den;
            if small.bob_sites().count() <= ORACLE_SITE_LIMIT {
                let o = oracle_run(&small, e, 0.0, &BTreeSet::new(), CouplingModel::Incoherent)
                    .map_err(err)?
                    .combined_trace(&small, true);
                ensure(rel(t, o) <= 1e-3, format!("{name}: joint route {t:e} vs oracle {o:e}"))?;
            }
            traces.push(t);
        }
        let fitted_c = traces.iter().zip(&eps).map(|(t, e)| t / e.powi(4)).fold(0.0, f64::max);
        let trace_slope = loglog_slope(&eps, &traces);
        ensure(
            (trace_slope - 4.0).abs() <= 0.2,
            format!("{name}: trace slope {trace_slope}, traces {traces:?}"),
        )?;
        let first_order = trace_combined(&c, 1e-3, CouplingModel::Incoherent).map_err(err)?.combined;
        ensure(
            first_order <= 1.5 * fitted_c * 1e-12,
            format!("{name}: analyzer trace {first_order:e} above Cε⁴"),
        )?;

        let per_site = fisher_report(&c, FisherMode::PerSiteSum, &FisherOptions::default()).map_err(err)?;
        ensure(per_site.total.abs() <= 1e-12, format!("{name}: per-site F = {}", per_site.total))?;

        // F ∝ θ² needs the accumulated rotation θ·N/M to be small; the
        // default Zeno variant only gets there one octave lower, so the fixed
        // grid runs on a smaller instance and the default one on finer θ.
        // The click rate carries the information, hence no renormalization.
        let curve = |c: &Circuit, thetas: &[f64], opts: &FisherOptions| -> std::result::Result<(Vec<f64>, f64), String> {
            let all = c.all_bob_site_ids();
            let fs: Vec<f64> = thetas
                .iter()
                .map(|&t| fisher_at(c, t, &all, opts))
                .collect::<cfsim_core::Result<_>>()
                .map_err(err)?;
            let slope = loglog_slope(thetas, &fs);
            Ok((fs, slope))
        };
        let thetas = [0.02, 0.01, 0.005];
        let coh = if name == ProtocolName::AvZeno {
            circuit(&spec(name).m(4).n(8))?
        } else {
            c.clone()
        };
        let (fs, slope) = curve(&coh, &thetas, &FisherOptions::unnormalized())?;
        let (_, post_slope) = curve(&coh, &thetas, &FisherOptions::default())?;
        ensure((slope - 2.0).abs() <= 0.1, format!("{name}: coherent F slope {slope}, F {fs:?}"))?;
        let mut extra = String::new();
        if name == ProtocolName::AvZeno {
            let fine = [0.005, 0.0025, 0.00125];
            let (fs, s) = curve(&c, &fine, &FisherOptions::unnormalized())?;
            ensure((s - 2.0).abs() <= 0.1, format!("{name}: default-size slope {s}, F {fs:?}"))?;
            extra = format!(", (M,N)=(8,64) slope {s:.3} on θ ≤ 0.005");
        }
        out.push(format!(
            "{name}: |W| ≤ {worst:.1e}, C = {fitted_c:.3}, trace slope {trace_slope:.2}, per-site F = {:.1e}, coherent F slope {slope:.3} (postselected {post_slope:.3}){extra}",
            per_site.total
        ));
    }
    Ok(out.join("; "))
}

fn property_suites() -> Check {
    let cases = 128u64;
    let eps = 1e-2;
    let (mut unit, mut sum_rule, mut overlap, mut oracle) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for seed in 0..cases {
        let c = common::random_circuit(seed);
        let sites: Vec<_> = c.bob_sites().map(|s| s.id.clone()).collect();
        let params = RunParams {
            epsilon: 0.05,
            theta: 0.1,
            distorted_sites: sites.iter().step_by(2).cloned().collect(),
        };
        let rec = evolve_forward(&c, &params).map_err(err)?;
        for s in rec.states.iter() {
            unit = unit.max((s.norm_sqr() - 1.0).abs());
        }
        let total: f64 = outcome_distribution(&c, &params).map_err(err)?.values().sum();
        unit = unit.max((total - 1.0).abs());

        for d in c.detectors().keys() {
            let first = two_state_vector(&c, d, 0).map_err(err)?;
            if first.overlap.norm() < 0.05 {
                continue;
            }
            for b in 0..=c.n_slices() {
                let tsv = two_state_vector(&c, d, b).map_err(err)?;
                overlap = overlap.max((tsv.overlap - first.overlap).norm());
                let sum: Complex64 = c
                    .paths()
                    .iter()
                    .filter_map(|p| tsv.path_weak_value(p.as_str()).value())
                    .sum();
                sum_rule = sum_rule.max((sum - 1.0).norm());
            }
        }

        let t = trace_combined(&c, eps, CouplingModel::Incoherent).map_err(err)?;
        let o = oracle_run(&c, eps, 0.0, &BTreeSet::new(), CouplingModel::Incoherent).map_err(err)?;
        for (d, tr) in &t.per_outcome {
            if tr.singular || tr.probability < 0.05 {
                continue;
            }
            let w2: f64 = t.weak_values[d].values.values().filter_map(|w| w.value()).map(|w| w.norm_sqr()).sum();
            let tol = 5.0 * eps.powi(4) * w2.max(1.0).powi(2);
            oracle = oracle.max((tr.conditional - o.detector_conditional(d)).abs() / tol);
        }
    }
    ensure(unit <= 1e-12, format!("norm drift {unit:e}"))?;
    ensure(sum_rule <= 1e-9, format!("weak value sum off by {sum_rule:e}"))?;
    ensure(overlap <= 1e-12, format!("overlap drift {overlap:e}"))?;
    ensure(oracle <= 1.0, format!("oracle gap {oracle:.3} of tolerance"))?;
    Ok(format!(
        "{cases} circuits: norm drift {unit:.1e}, sum rule {sum_rule:.1e}, overlap drift {overlap:.1e}, oracle gap {oracle:.3} of tolerance"
    ))
}

fn main() {
    let checks: [(&str, fn() -> Check, Duration); 10] = [
        ("1 reference Fisher", reference_fisher, Duration::from_secs(1)),
        ("2 EV IFM blocked", ev_ifm_blocked, Duration::from_secs(1)),
        ("3 nested MZI open", nested_mzi_open, Duration::from_secs(1)),
        ("4 two-way protocol", two_way, Duration::from_secs(5)),
        ("5 Zeno chain", zeno_chain, Duration::from_secs(600)),
        ("6 K-path", k_path, Duration::from_secs(60)),
        ("7 A-SB chain", asb_chain, Duration::from_secs(120)),
        ("8 coherent model", coherent_model, Duration::from_secs(300)),
        ("9 AV protocols", av_protocols, Duration::from_secs(120)),
        ("10 property suites", property_suites, Duration::from_secs(300)),
    ];
    let mut failed = Vec::new();
    for (name, f, budget) in checks {
        let start = Instant::now();
        let result = f();
        let took = start.elapsed();
        let verdict = match &result {
            Ok(_) if took <= budget => "PASS",
            _ => "FAIL",
        };
        let detail = match result {
            Ok(d) => d,
            Err(e) => e,
        };
        println!("{verdict} [{name}] {:.2}s (budget {}s): {detail}", took.as_secs_f64(), budget.as_secs());
        if verdict == "FAIL" {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
