//! Scenario execution. Every scenario maps a replicate's RNG to a list of
//! named metrics; checks are computed after all replicates are merged in
//! index order.

use super::config::{QMode, Scenario, ScenarioConfig};
use super::output::{write_records, RunRecord};
use crate::arw::{
    check_abelian, stabilize, stabilize_via_purgatory, Configuration,
    FreshInstructions, InstructionTape, StabilizeOptions, TopplingPolicy, DEFAULT_STEP_CAP,
};
use crate::bup::{
    exact_conditional_mean, exact_conditional_variance, level_threshold, maxima_between_levels,
    run_continuous, run_fixed_energy, run_to_hitting, window_thresholds, x_prime, ContinuousMode,
    Start, StopRule,
};
use crate::error::{Error, Result};
use crate::model::{gumbel_cdf, mu, normalize_S, Params};
use crate::oracle::{binomial_tail, exact_final_pmf, exact_stopping_law, MAX_FORWARD_N};
use crate::replicate::{mix64, run_replicates, SimRng};
use crate::stats::{
    gumbel_report, median, ratio_with_ci, sample_variance, GumbelTolerances, MeanEstimate,
    TestReport,
};

type Metrics = Vec<(String, f64)>;

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub run_id: String,
    pub records: Vec<RunRecord>,
    pub reports: Vec<TestReport>,
    /// Diagnostics that are printed but not checked.
    pub info: Vec<String>,
}

impl ScenarioOutcome {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// Runs the scenario and writes its records to `config.out`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let outcome = execute(config)?;
    write_records(&config.out, config.format, &outcome.records)?;
    Ok(outcome)
}

/// Runs the scenario without writing anything.
pub fn execute(config: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let run_id = run_id(config);
    let mut ctx = Ctx {
        config,
        reports: Vec::new(),
        info: Vec::new(),
    };
    let results = match config.scenario {
        Scenario::PropStop => ctx.prop_stop()?,
        Scenario::Abelian => ctx.abelian()?,
        Scenario::ThmIff => ctx.thm_iff()?,
        Scenario::Thm12 => ctx.thm_12()?,
        Scenario::Thm12Thresholds => ctx.thm_12_thresholds()?,
        Scenario::ThmGumbel => ctx.thm_gumbel()?,
        Scenario::ThmDensity => ctx.thm_density()?,
        Scenario::LemMaxtail => ctx.lem_maxtail()?,
        Scenario::Cluster => ctx.cluster()?,
        Scenario::CondMoments => ctx.cond_moments()?,
        Scenario::Stationarity => ctx.stationarity()?,
    };
    let q = config.q();
    let records = results
        .into_iter()
        .enumerate()
        .flat_map(|(i, (seed, metrics))| {
            let run_id = &run_id;
            metrics.into_iter().map(move |(metric, value)| RunRecord {
                run_id: run_id.clone(),
                scenario: config.scenario.to_string(),
                n: config.n as u64,
                p: config.p,
                q,
                mu: config.mu,
                replicate: i as u64,
                seed,
                metric,
                value,
            })
        })
        .collect();
    Ok(ScenarioOutcome {
        run_id,
        records,
        reports: ctx.reports,
        info: ctx.info,
    })
}

/// Deterministic identifier of everything that affects the results.
fn run_id(config: &ScenarioConfig) -> String {
    // FNV-1a, then a final mix
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in config.fingerprint().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    format!("{:016x}", mix64(h))
}

fn metric(name: impl Into<String>, value: impl Into<f64>) -> (String, f64) {
    (name.into(), value.into())
}

/// Values of one metric across replicates, in replicate order.
fn column(results: &[(u64, Metrics)], name: &str) -> Vec<f64> {
    results
        .iter()
        .flat_map(|(_, m)| m.iter().filter(|(k, _)| k == name).map(|(_, v)| *v))
        .collect()
}

fn fraction(xs: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    xs.iter().filter(|&&x| pred(x)).count() as f64 / xs.len().max(1) as f64
}

struct Ctx<'a> {
    config: &'a ScenarioConfig,
    reports: Vec<TestReport>,
    info: Vec<String>,
}

impl Ctx<'_> {
    fn params(&self) -> Result<Params> {
        Params::new(self.config.n, self.config.p, self.config.q(), self.config.seed)
    }

    fn replicates<F>(&self, f: F) -> Result<Vec<(u64, Metrics)>>
    where
        F: Fn(&mut SimRng) -> Result<Metrics> + Sync + Send,
    {
        let c = self.config;
        run_replicates(c.seed, c.reps, c.parallel, |_, seed, rng| f(rng).map(|m| (seed, m)))
            .into_iter()
            .collect()
    }

    fn check(&mut self, report: TestReport) {
        self.reports.push(report);
    }

    fn prop_stop(&mut self) -> Result<Vec<(u64, Metrics)>> {
        let params = self.params()?;
        let exact = exact_final_pmf(params.n, params.p, params.q)?;
        let opts = StabilizeOptions {
            step_cap: self.config.step_cap.unwrap_or(DEFAULT_STEP_CAP),
            ..Default::default()
        };
        let results = self.replicates(|rng| {
            let mut m = Metrics::new();
            let mut cfg = Configuration::all_active(params.n);
            match stabilize(&mut cfg, &params, &mut FreshInstructions::new(rng), &opts) {
                Ok(o) => {
                    m.push(metric("S_direct", o.sleep_count as f64));
                    m.push(metric("jumps_direct", o.jump_count as f64));
                }
                Err(Error::StepCap { .. }) => m.push(metric("cap_hit", 1.0)),
                Err(e) => return Err(e),
            }
            let pr = stabilize_via_purgatory(&params, rng, false)?.outcome;
            m.push(metric("S_purgatory", pr.sleep_count as f64));
            m.push(metric("steps_purgatory", pr.steps.unwrap_or(0) as f64));
            let h = run_to_hitting(&params, rng)?;
            m.push(metric("S_bup", h.y as f64));
            m.push(metric("j_bup", h.steps as f64));
            Ok(m)
        })?;
        for engine in ["S_direct", "S_purgatory", "S_bup"] {
            let xs = column(&results, engine);
            let mut counts = vec![0u64; params.n + 1];
            for x in &xs {
                counts[*x as usize] += 1;
            }
            let tv = exact.tv_distance(&counts);
            self.check(TestReport::at_most(format!("tv_{engine}"), tv, 0.01, xs.len()));
        }
        Ok(results)
    }

    fn abelian(&mut self) -> Result<Vec<(u64, Metrics)>> {
        let params = self.params()?;
        let n = params.n;
        let cap = self.config.step_cap.unwrap_or(DEFAULT_STEP_CAP);
        let results = self.replicates(|rng| {
            use rand::Rng;
            let seed: u64 = rng.random();
            let tape = InstructionTape::new(n, seed);
            let policies = [
                TopplingPolicy::LowestIndexFirst,
                TopplingPolicy::Fifo,
                TopplingPolicy::Random(seed ^ 1),
                TopplingPolicy::Random(seed ^ 2),
                TopplingPolicy::Random(seed ^ 3),
            ];
            let initial = Configuration::all_active(n);
            let agree = check_abelian(&initial, &params, &tape, &policies)?;
            let mut cfg = initial.clone();
            let opts = StabilizeOptions {
                step_cap: cap,
                ..Default::default()
            };
            let out = stabilize(&mut cfg, &params, &mut tape.rewound(), &opts)?;
            Ok(vec![
                metric("abelian", agree as u8),
                metric("S", out.sleep_count as f64),
                metric("jump_count", out.jump_count as f64),
            ])
        })?;
        let agree = column(&results, "abelian");
        self.check(TestReport::at_least(
            "abelian_agreement",
            fraction(&agree, |a| a == 1.0),
            1.0,
            agree.len(),
        ));
        Ok(results)
    }

    fn thm_iff(&mut self) -> Result<Vec<(u64, Metrics)>> {
        let n = self.config.n;
        let p = self.config.p;
        let nf = n as f64;
        if let Some(QMode::Exp(c)) = self.config.q_mode {
            let cs = [c / 2.0, c, 2.0 * c];
            let params: Vec<Params> = cs
                .iter()
                .map(|ci| Params::new(n, p, (-ci * nf).exp(), self.config.seed))
                .collect::<Result<_>>()?;
            for pr in &params {
                pr.require_dissipative()?;
            }
            let names: Vec<String> = cs.iter().map(|ci| format!("S_over_n_c{ci}")).collect();
            let results = self.replicates(|rng| {
                params
                    .iter()
                    .zip(&names)
                    .map(|(pr, name)| Ok(metric(name.clone(), run_to_hitting(pr, rng)?.y as f64 / nf)))
                    .collect()
            })?;
            let means: Vec<f64> = names
                .iter()
                .map(|name| MeanEstimate::from_samples(&column(&results, name)).mean)
                .collect();
            for (ci, m) in cs.iter().zip(&means) {
                self.info.push(format!("mean S/n at c={ci}: {m:.4}"));
            }
            self.check(TestReport::at_least(format!("mean_S_over_n_c{c}"), means[1], 0.55, results.len()));
            let monotone = means.windows(2).all(|w| w[1] > w[0]);
            self.check(
                TestReport::at_least("monotone_in_c", monotone as u8 as f64, 1.0, results.len())
                    .with_notes(format!("c in {cs:?}")),
            );
            return Ok(results);
        }
        let params = self.params()?;
        let results = self.replicates(|rng| {
            let h = run_to_hitting(&params, rng)?;
            Ok(vec![metric("S", h.y as f64), metric("S_over_n", h.y as f64 / nf)])
        })?;
        let ratios = column(&results, "S_over_n");
        self.check(TestReport::at_least(
            "frac_S_over_n_in_[0.48,0.52]",
            fraction(&ratios, |r| (0.48..=0.52).contains(&r)),
            0.95,
            ratios.len(),
        ));
        Ok(results)
    }

    fn thm_12(&mut self) -> Result<Vec<(u64, Metrics)>> {
        let params = self.params()?;
        let c = params.constants();
        let centre = params.p * params.n as f64 + c.alpha_n;
        let results = self.replicates(|rng| {
            let h = run_to_hitting(&params, rng)?;
            Ok(vec![
                metric("S", h.y as f64),
                metric("j", h.steps as f64),
                metric("Z", h.z as f64),
            ])
        })?;
        let s = column(&results, "S");
        let scaled: Vec<f64> = s.iter().map(|v| (v - params.p * params.n as f64) / c.alpha_n).collect();
        self.info.push(format!(
            "mean (S − pn)/α_n = {:.4}",
            MeanEstimate::from_samples(&scaled).mean
        ));
        self.check(TestReport::at_least(
            "frac_|S-(pn+alpha_n)|<=0.5alpha_n",
            fraction(&s, |v| (v - centre).abs() <= 0.5 * c.alpha_n),
            0.80,
            s.len(),
        ));
        Ok(results)
    }

    fn thm_12_thresholds(&mut self) -> Result<Vec<(u64, Metrics)>> {
        let params = self.params()?;
        let k = window_thresholds(&params, 0.5);
        let levels = [params.n as f64, k[0], k[1], k[2], k[3]];
        let results = self.replicates(|rng| {
            let m = maxima_between_levels(&params, &levels, StopRule::AtLastLevel, rng)?;
            let below = |i: usize, level: f64| m.maxima[i].is_none_or(|v| (v as f64) < level);
            let reaches = m.maxima[4].is_some_and(|v| v as f64 >= k[2]);
            Ok(vec![
                metric("max_below_k1", below(1, k[0]) as u8),
                metric("max_below_k2", below(2, k[1]) as u8),
                metric("max_reaches_k3", reaches as u8),
                metric("hit_y", m.hit_y.unwrap_or(0) as f64),
            ])
        })?;
        self.info.push(format!("k1..k4 = {k:.2?} (eps = 0.5)"));
        for name in ["max_below_k1", "max_below_k2", "max_reaches_k3"] {
            let xs = column(&results, name);
            self.check(TestReport::at_least(format!("frac_{name}"), fraction(&xs, |v| v == 1.0), 0.90, xs.len()));
        }
        Ok(results)
    }

    fn thm_gumbel(&mut self) -> Result<Vec<(u64, Metrics)>> {
        let params = self.params()?;
        let consts = params.constants();
        let results = self.replicates(|rng| {
            let h = run_to_hitting(&params, rng)?;
            Ok(vec![
                metric("S", h.y as f64),
                metric("normalized", normalize_S(h.y as f64, &consts)?),
            ])
        })?;
        let g = column(&results, "normalized");
        let mut reports = gumbel_report(&g, &GumbelTolerances::default())?;
        let var = reports.pop().expect("three reports");
        self.info.push(format!("normalized sample variance {:.4} (Gumbel π²/6 ≈ 1.6449)", var.value));
        self.info.push(format!(
            "r_n = {:.1}, f_n = {:.4}",
            consts.r_n.unwrap_or(f64::NAN),
            consts.f_n.unwrap_or(f64::NAN)
        ));
        if params.n <= MAX_FORWARD_N {
            let (mean, ks) = exact_gumbel_gap(&params)?;
            self.info.push(format!(
                "exact law at this n: normalized mean {mean:.4}, KS to Gumbel {ks:.4}"
            ));
        }
        self.reports.extend(reports);
        Ok(results)
    }

    fn thm_density(&mut self) -> Result<Vec<(u64, Metrics)>> {
        let c = self.config;
        let (n, p) = (c.n, c.p);
        let mu = c.mu.expect("mu is set for thm-density");
        let m = (mu * n as f64).ceil() as usize;
        let nlogn = n as f64 * (n as f64).ln();
        let cap = c.step_cap.unwrap_or((100.0 * nlogn).ceil() as u64);
        let results = self.replicates(|rng| {
            let r = run_fixed_energy(n, p, m, cap, rng)?;
            Ok(vec![
                metric("J", r.steps as f64),
                metric("J_over_nlogn", r.steps as f64 / nlogn),
                metric("cap_hit", r.cap_hit as u8),
                metric("y0", r.initial.y0 as f64),
                metric("initial_jumps", r.initial.initial_jumps as f64),
                metric("site_updates", r.site_updates as f64),
            ])
        })?;
        let ratios = column(&results, "J_over_nlogn");
        let med = median(&ratios)?;
        self.info.push(format!("m = {m}, cap = {cap}, median J/(n ln n) = {med:.4}"));
        if (mu - p).abs() < 1e-9 {
            self.check(TestReport::within("median_J_over_nlogn", med, 0.42, 0.58, ratios.len()));
            let updates = column(&results, "site_updates");
            let floor = 0.25 * (n as f64).ln();
            self.check(TestReport::at_least(
                "frac_site_updates>=0.25ln_n",
                fraction(&updates, |u| u >= floor),
                0.85,
                updates.len(),
            ));
        } else if mu < p {
            let js = column(&results, "J");
            self.check(TestReport::at_least(
                "frac_J<=8n",
                fraction(&js, |j| j <= 8.0 * n as f64),
                0.95,
                js.len(),
            ));
        } else {
            let caps = column(&results, "cap_hit");
            self.check(TestReport::at_least("frac_cap_hit", fraction(&caps, |v| v == 1.0), 1.0, caps.len()));
        }
        Ok(results)
    }

    fn lem_maxtail(&mut self) -> Result<Vec<(u64, Metrics)>> {
        let params = self.params()?;
        let horizon = self.config.horizon.expect("horizon default");
        let x = self.config.x_level.expect("x-level default");
        let thr = level_threshold(params.n, params.p, x);
        let results = self.replicates(|rng| {
            let s = run_continuous(&params, ContinuousMode::CountOnly, horizon, x, Start::Stationary, rng)?;
            Ok(vec![
                metric("running_max", s.running_max),
                metric("reached", (s.max_count as i64 >= thr) as u8),
                metric("occupation", s.occupation),
                metric("exceed_count", s.exceed_count as f64),
            ])
        })?;
        let reached = column(&results, "reached");
        let hits = reached.iter().filter(|&&v| v == 1.0).count() as u64;
        let ci = ratio_with_ci(hits, reached.len() as u64, mu(x) * horizon)?;
        self.check(
            TestReport::within("max_tail_ratio", ci.ratio, 0.75, 1.3, reached.len())
                .with_notes(format!("99% Wilson [{:.4}, {:.4}]", ci.lo, ci.hi)),
        );
        Ok(results)
    }

    fn cluster(&mut self) -> Result<Vec<(u64, Metrics)>> {
        let (n, p) = (self.config.n, self.config.p);
        let x = self.config.x_level.expect("x-level default");
        let xp = x_prime(x, n, p)?;
        let params = Params::new(n, p, 0.0, self.config.seed)?;
        let start = (p * n as f64 + xp * params.constants().a_n).round() as u64;
        let horizon = (n as f64).ln();
        let results = self.replicates(|rng| {
            let s = run_continuous(&params, ContinuousMode::CountOnly, horizon, x, Start::AtValue(start), rng)?;
            Ok(vec![metric("occupation", s.occupation)])
        })?;
        let est = MeanEstimate::from_samples(&column(&results, "occupation"));
        self.check(
            TestReport::within("x2_mean_occupation", est.mean * x * x, 0.7, 1.35, est.reps)
                .with_notes(format!("se {:.4}", est.se * x * x)),
        );
        Ok(results)
    }

    fn cond_moments(&mut self) -> Result<Vec<(u64, Metrics)>> {
        let (n, p) = (self.config.n, self.config.p);
        let x = self.config.x_level.expect("x-level default");
        let t = self.config.horizon.expect("horizon default");
        let xp = x_prime(x, n, p)?;
        let params = Params::new(n, p, 0.0, self.config.seed)?;
        let start = (p * n as f64 + xp * params.constants().a_n).round() as u64;
        let results = self.replicates(|rng| {
            let s = run_continuous(&params, ContinuousMode::CountOnly, t, x, Start::AtValue(start), rng)?;
            Ok(vec![metric("S_t", s.final_y as f64)])
        })?;
        let ys = column(&results, "S_t");
        let r = ys.len() as f64;
        let est = MeanEstimate::from_samples(&ys);
        let exact_mean = exact_conditional_mean(n, p, xp, t);
        let exact_var = exact_conditional_variance(n, p, xp, t);
        let var = sample_variance(&ys);
        let m2 = var * (r - 1.0) / r;
        let m4 = ys.iter().map(|v| (v - est.mean).powi(4)).sum::<f64>() / r;
        let var_se = ((m4 - m2 * m2 * (r - 3.0) / (r - 1.0)) / r).max(0.0).sqrt();
        self.info.push(format!(
            "mean {:.4} (exact {exact_mean:.4}), variance {var:.3} (exact {exact_var:.3})",
            est.mean
        ));
        self.check(TestReport::at_most("cond_mean_z", est.z_score(exact_mean), 3.0, ys.len()));
        self.check(TestReport::at_most(
            "cond_var_rel_se",
            (var - exact_var).abs() / var_se,
            5.0,
            ys.len(),
        ));
        Ok(results)
    }

    fn stationarity(&mut self) -> Result<Vec<(u64, Metrics)>> {
        let params = self.params()?;
        let horizon = self.config.horizon.expect("horizon default");
        let x = self.config.x_level.expect("x-level default");
        let thr = level_threshold(params.n, params.p, x).clamp(0, params.n as i64 + 1) as u64;
        let results = self.replicates(|rng| {
            let s = run_continuous(&params, ContinuousMode::CountOnly, horizon, x, Start::Stationary, rng)?;
            Ok(vec![metric("occupation", s.occupation)])
        })?;
        let est = MeanEstimate::from_samples(&column(&results, "occupation"));
        let target = horizon * binomial_tail(params.n as u64, params.p, thr);
        self.info.push(format!("mean L {:.5} (target {target:.5})", est.mean));
        self.check(TestReport::at_most("occupation_z", est.z_score(target), 3.0, est.reps));
        Ok(results)
    }
}

/// Mean of the normalized count and its Kolmogorov distance to the Gumbel
/// law, both under the exact finite-n law of the count.
fn exact_gumbel_gap(params: &Params) -> Result<(f64, f64)> {
    let consts = params.constants();
    let law = exact_stopping_law(params.n, params.p, params.q)?;
    let (mut mean, mut below, mut ks) = (0.0, 0.0, 0.0f64);
    for (k, &m) in law.mass().iter().enumerate() {
        let g = normalize_S(k as f64, &consts)?;
        let cdf = gumbel_cdf(g);
        mean += m * g;
        ks = ks.max((below - cdf).abs());
        below += m;
        ks = ks.max((below - cdf).abs());
    }
    Ok((mean, ks))
}
