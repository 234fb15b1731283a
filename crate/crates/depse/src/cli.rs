//! Batch front-end commands. The binary in `src/bin/depse.rs` is a thin
//! argument parser over these.
//!
//! Every command is deterministic given (config, inputs, seed): utterances
//! and trials get dedicated RNG streams keyed by their index, and parallel
//! reductions are re-serialized before anything is written.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{DepseError, Result};
use crate::field::{Field, RealField};
use crate::metrics::{bss_eval, si_sdr};
use crate::report::{Report, UtteranceEntry};
use crate::sampler::{enhance, Method, NoiseSpec, SamplerConfig};
use crate::signal::{
    compress, decompress, istft, mix_at_snr, read_wav, stft, write_wav, ComplexSpectrogram,
    Waveform, WavEncoding,
};
use crate::synth;

fn encoding_of(config: &RunConfig) -> WavEncoding {
    match config.io.encoding.as_deref() {
        Some("pcm16") => WavEncoding::Pcm16,
        _ => WavEncoding::Float32,
    }
}

/// Stream id for utterance/trial `index`; stream 0 is reserved.
fn job_rng(seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index + 1);
    rng
}

fn run_pool<T: Send, F: Fn(usize) -> T + Sync>(jobs: usize, count: usize, work: F) -> Vec<T> {
    let results: Mutex<Vec<Option<T>>> = Mutex::new((0..count).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = jobs.max(1).min(count.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= count {
                    break;
                }
                let out = work(idx);
                results.lock().unwrap()[idx] = Some(out);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("worker filled every slot"))
        .collect()
}

fn enhance_one(
    config: &RunConfig,
    input: &str,
    out_dir: &Path,
    index: u64,
    seed: u64,
) -> Result<(PathBuf, usize)> {
    let params = config.stft_params();
    let schedule = config.schedule()?;
    let sampler_cfg = config.sampler_config()?;
    let wave = read_wav(input)?;
    let spec = stft(&wave, &params)?;
    let mut bins = spec.bins;
    if let Some(beta) = config.stft.compression {
        bins = compress(&bins, beta);
    }
    let score = config.score_model(bins.dim())?;
    let mut rng = job_rng(seed, index);
    let mut out_bins = enhance(
        &bins,
        &schedule,
        &sampler_cfg,
        score.as_ref(),
        &config.noise_spec(),
        &mut rng,
    )?;
    if let Some(beta) = config.stft.compression {
        out_bins = decompress(&out_bins, beta);
    }
    let out_wave = istft(
        &ComplexSpectrogram {
            bins: out_bins,
            params,
        },
        wave.len(),
    )?;
    let name = Path::new(input)
        .file_name()
        .ok_or_else(|| DepseError::Config(format!("input path '{input}' has no file name")))?;
    let out_path = out_dir.join(name);
    write_wav(&out_path, &out_wave, encoding_of(config))?;
    Ok((out_path, wave.len()))
}

/// Enhance every input WAV; failures are logged per file and skipped.
pub fn cmd_enhance(config: &RunConfig, jobs: usize, seed: u64) -> Result<i32> {
    if config.io.input.is_empty() {
        return Err(DepseError::Config("enhance needs io.input paths".into()));
    }
    let out_dir = PathBuf::from(
        config
            .io
            .output
            .as_deref()
            .ok_or_else(|| DepseError::Config("enhance needs io.output directory".into()))?,
    );
    std::fs::create_dir_all(&out_dir)?;

    let entries = run_pool(jobs, config.io.input.len(), |idx| {
        let input = &config.io.input[idx];
        let start = Instant::now();
        match enhance_one(config, input, &out_dir, idx as u64, seed) {
            Ok((out_path, _)) => UtteranceEntry {
                input: input.clone(),
                output: Some(out_path.display().to_string()),
                status: "ok".into(),
                wall_ms: start.elapsed().as_millis() as u64,
                metrics: None,
            },
            Err(e) => {
                eprintln!("enhance: {input}: {e}");
                UtteranceEntry {
                    input: input.clone(),
                    output: None,
                    status: format!("error: {e}"),
                    wall_ms: start.elapsed().as_millis() as u64,
                    metrics: None,
                }
            }
        }
    });

    let failed = entries.iter().filter(|e| e.status != "ok").count();
    let mut report = Report::new("enhance", serde_json::to_value(config).unwrap());
    report.utterances = entries;
    report.summary = Some(json!({ "failed": failed }));
    if let Some(path) = &config.io.report {
        report.write(path)?;
    }
    Ok(if failed > 0 { 1 } else { 0 })
}

struct TrialOutcome {
    method: String,
    snr_db: f64,
    trial: usize,
    input_si_sdr: f64,
    output_si_sdr: f64,
    output_si_sir: f64,
    output_si_sar: f64,
}

fn method_of(name: &str) -> Method {
    match name {
        "prior" => Method::Prior,
        "guided" => Method::Guided,
        "depse_il" => Method::DepseIl,
        _ => Method::DepseTl,
    }
}

fn simulate_trial(
    config: &RunConfig,
    method_name: &str,
    snr_db: f64,
    trial: usize,
    stream: u64,
    seed: u64,
) -> Result<TrialOutcome> {
    let sim = config.simulate.as_ref().expect("checked by caller");
    let params = config.stft_params();
    let schedule = config.schedule()?;
    let mut rng = job_rng(seed, stream);

    // synthetic clean signal drawn from a smooth mixture prior
    let pad = params.window_len / 2;
    let frames = 1 + (sim.samples + 2 * pad - params.window_len).div_ceil(params.hop);
    let shape = (params.bins(), frames);
    let prior = synth::smooth_gmm_prior(shape, 3, 0.08, 1.0, &mut rng);
    let clean_spec = prior.draw(&mut rng);
    let clean = istft(
        &ComplexSpectrogram {
            bins: clean_spec,
            params,
        },
        sim.samples,
    )?;
    let raw_noise = Waveform::new(
        (0..sim.samples)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect(),
    )?;
    let (mix, scaled_noise) = mix_at_snr(&clean, &raw_noise, snr_db)?;

    let x_spec = stft(&mix, &params)?;
    let mut cfg = SamplerConfig::new(method_of(method_name));
    cfg.langevin_ratio = config.sampler.r;
    cfg.corrector_steps = config.sampler.corrector_steps;
    if cfg.method == Method::Guided {
        cfg.lambda =
            SamplerConfig::alternating_lambda(schedule.n_steps, config.sampler.lambda_even);
    }
    let out_bins = enhance(
        &x_spec.bins,
        &schedule,
        &cfg,
        &prior,
        &config.noise_spec(),
        &mut rng,
    )?;
    let est = istft(
        &ComplexSpectrogram {
            bins: out_bins,
            params,
        },
        sim.samples,
    )?;

    let input_scores = si_sdr(&clean, &mix)?;
    let out_scores = bss_eval(&clean, &scaled_noise, &est)?;
    Ok(TrialOutcome {
        method: method_name.to_string(),
        snr_db,
        trial,
        input_si_sdr: input_scores,
        output_si_sdr: out_scores.si_sdr,
        output_si_sir: out_scores.si_sir,
        output_si_sar: out_scores.si_sar,
    })
}

/// Conjugate-Gaussian oracle scenario: many chain runs on one fixed
/// observation; reports the worst per-bin posterior-mean error in units of
/// the Monte-Carlo standard error.
fn simulate_gaussian_oracle(config: &RunConfig, jobs: usize, seed: u64) -> Result<serde_json::Value> {
    let sim = config.simulate.as_ref().expect("checked by caller");
    let schedule = config.schedule()?;
    let shape = (4, 4);
    let mut rng = job_rng(seed, 0);
    let prior = synth::random_gaussian_prior(shape, 0.005, 0.02, &mut rng);
    let noise_var: RealField = prior.variance.mapv(|p| 0.25 * p);
    // observation drawn from the generative model
    let clean = prior.draw(&mut rng);
    let mut x = clean.clone();
    for (xv, &v) in x.iter_mut().zip(noise_var.iter()) {
        *xv += v.sqrt() * crate::field::standard_complex(&mut rng);
    }

    let method = config.method()?;
    let mut cfg = SamplerConfig::new(method);
    cfg.langevin_ratio = config.sampler.r;
    cfg.corrector_steps = config.sampler.corrector_steps;
    if method == Method::Guided {
        cfg.lambda =
            SamplerConfig::alternating_lambda(schedule.n_steps, config.sampler.lambda_even);
    }

    let runs = sim.trials;
    let draws = run_pool(jobs, runs, |run| {
        let mut rng = job_rng(seed, 1 + run as u64);
        enhance(
            &x,
            &schedule,
            &cfg,
            &prior,
            &NoiseSpec::Fixed(noise_var.clone()),
            &mut rng,
        )
    });

    let mut mean = Field::zeros(shape);
    let mut pow = RealField::zeros(shape);
    let mut ok = 0usize;
    for draw in &draws {
        let s = draw.as_ref().map_err(|e| DepseError::Config(e.to_string()))?;
        mean += s;
        for (p, z) in pow.iter_mut().zip(s.iter()) {
            *p += z.norm_sqr();
        }
        ok += 1;
    }
    mean.mapv_inplace(|z| z / ok as f64);

    let mut worst = 0.0_f64;
    for fi in 0..shape.0 {
        for li in 0..shape.1 {
            let p0 = prior.variance[(fi, li)];
            let v = noise_var[(fi, li)];
            let expected = (p0 / (p0 + v)) * x[(fi, li)] + (v / (p0 + v)) * prior.mean[(fi, li)];
            let m = mean[(fi, li)];
            let var = (pow[(fi, li)] / ok as f64 - m.norm_sqr()).max(1e-30);
            let se = (var / ok as f64).sqrt();
            worst = worst.max((m - expected).norm() / se);
        }
    }
    Ok(json!({
        "scenario": "gaussian-posterior-oracle",
        "runs": ok,
        "worst_error_in_standard_errors": worst,
        "pass_at_4se": worst < 4.0,
    }))
}

/// Synthetic benchmark runs; see the README for the two scenarios.
pub fn cmd_simulate(config: &RunConfig, jobs: usize, seed: u64) -> Result<i32> {
    let sim = config
        .simulate
        .as_ref()
        .ok_or_else(|| DepseError::Config("simulate needs a simulate section".into()))?;

    let mut report = Report::new("simulate", serde_json::to_value(config).unwrap());

    if sim.prior == "gaussian" {
        if sim.trials > 0 {
            report.summary = Some(simulate_gaussian_oracle(config, jobs, seed)?);
        } else {
            report.summary = Some(json!({ "scenario": "gaussian-posterior-oracle", "runs": 0 }));
        }
        if let Some(path) = &config.io.report {
            report.write(path)?;
        }
        println!("{}", report.summary.as_ref().unwrap());
        return Ok(0);
    }

    // gmm improvement sweep
    let mut tasks = Vec::new();
    for method in &sim.methods {
        for &snr in &sim.snrs {
            for trial in 0..sim.trials {
                tasks.push((method.clone(), snr, trial));
            }
        }
    }
    let outcomes = run_pool(jobs, tasks.len(), |idx| {
        let (method, snr, trial) = &tasks[idx];
        simulate_trial(config, method, *snr, *trial, idx as u64, seed)
    });

    let mut rows = Vec::new();
    let mut failures = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok(o) => rows.push(o),
            Err(e) => {
                eprintln!("simulate: trial failed: {e}");
                failures += 1;
            }
        }
    }

    let mut summary = Vec::new();
    for method in &sim.methods {
        for &snr in &sim.snrs {
            let subset: Vec<&TrialOutcome> = rows
                .iter()
                .filter(|o| &o.method == method && o.snr_db == snr)
                .collect();
            if subset.is_empty() {
                continue;
            }
            let wins = subset
                .iter()
                .filter(|o| o.output_si_sdr > o.input_si_sdr)
                .count();
            let deltas: Vec<f64> = subset
                .iter()
                .map(|o| o.output_si_sdr - o.input_si_sdr)
                .collect();
            let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
            let min = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
            println!(
                "{method:>9} snr {snr:+5.1} dB: improved {wins}/{} trials, delta mean {mean:+.2} dB min {min:+.2} dB",
                subset.len()
            );
            summary.push(json!({
                "method": method,
                "snr_db": snr,
                "trials": subset.len(),
                "improved": wins,
                "mean_delta_db": mean,
                "min_delta_db": min,
            }));
        }
    }
    report.summary = Some(json!({ "sweep": summary, "failed_trials": failures }));
    report.utterances = rows
        .iter()
        .map(|o| UtteranceEntry {
            input: format!("synthetic/{}/snr{:+}/trial{}", o.method, o.snr_db, o.trial),
            output: None,
            status: "ok".into(),
            wall_ms: 0,
            metrics: Some(crate::metrics::BssScores {
                si_sdr: o.output_si_sdr,
                si_sir: o.output_si_sir,
                si_sar: o.output_si_sar,
            }),
        })
        .collect();
    if let Some(path) = &config.io.report {
        report.write(path)?;
    }
    Ok(if failures > 0 { 1 } else { 0 })
}

/// Score (reference, noise, estimate) triples.
pub fn cmd_evaluate(config: &RunConfig) -> Result<i32> {
    let eval = config
        .evaluate
        .as_ref()
        .ok_or_else(|| DepseError::Config("evaluate needs an evaluate section".into()))?;
    let mut report = Report::new("evaluate", serde_json::to_value(config).unwrap());
    let mut failed = 0usize;
    println!(
        "{:<40} {:>9} {:>9} {:>9}",
        "estimate", "SI-SDR", "SI-SIR", "SI-SAR"
    );
    for triple in &eval.triples {
        let start = Instant::now();
        let scored = (|| -> Result<crate::metrics::BssScores> {
            let reference = read_wav(&triple.reference)?;
            let noise = read_wav(&triple.noise)?;
            let estimate = read_wav(&triple.estimate)?;
            bss_eval(&reference, &noise, &estimate)
        })();
        match scored {
            Ok(scores) => {
                println!(
                    "{:<40} {:>9.3} {:>9.3} {:>9.3}",
                    triple.estimate, scores.si_sdr, scores.si_sir, scores.si_sar
                );
                report.utterances.push(UtteranceEntry {
                    input: triple.estimate.clone(),
                    output: None,
                    status: "ok".into(),
                    wall_ms: start.elapsed().as_millis() as u64,
                    metrics: Some(scores),
                });
            }
            Err(e) => {
                eprintln!("evaluate: {}: {e}", triple.estimate);
                failed += 1;
                report.utterances.push(UtteranceEntry {
                    input: triple.estimate.clone(),
                    output: None,
                    status: format!("error: {e}"),
                    wall_ms: start.elapsed().as_millis() as u64,
                    metrics: None,
                });
            }
        }
    }
    if let Some(path) = &config.io.report {
        report.write(path)?;
    }
    Ok(if failed > 0 { 1 } else { 0 })
}

/// Run the verification suite and print one line per check.
pub fn cmd_oracle_check(config: &RunConfig, seed: u64) -> Result<i32> {
    let schedule = config.schedule()?;
    let outcomes = crate::checks::run_all(&schedule, seed);
    let mut failed = 0usize;
    for o in &outcomes {
        let status = if o.pass() { "PASS" } else { "FAIL" };
        println!(
            "{status} {:<36} residual {:>12.5e}  tolerance {:>12.5e}",
            o.name, o.residual, o.tolerance
        );
        if !o.pass() {
            failed += 1;
        }
    }
    if let Some(path) = &config.io.report {
        let mut report = Report::new("oracle-check", serde_json::to_value(config).unwrap());
        report.summary = Some(json!({
            "checks": outcomes.iter().map(|o| json!({
                "name": o.name,
                "residual": o.residual,
                "tolerance": o.tolerance,
                "pass": o.pass(),
            })).collect::<Vec<_>>(),
            "failed": failed,
        }));
        report.write(path)?;
    }
    Ok(if failed > 0 { 1 } else { 0 })
}
