use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{config_hash, FitArgs, GenArgs, MinweightArgs, Mode, ReportArgs, SpectrumArgs, SplitArgs};
use super::Family;
use crate::ansatz::{
    self, fit_powerlaw, log_grid, max_deviation, parse_fixed, powerlaw_d_grid, predict_curve, write_curves_csv,
    AnsatzParams, FitOptions, FitResult, PowerLawFit, Variant,
};
use crate::decoders::{Backend, Decoder, DecoderConfig};
use crate::error::{Error, Result};
use crate::f2linalg::BitVec;
use crate::minweight::{
    coverage_estimate, distance_exact, distance_upper_bound, enumerate_logicals_exact, expand_by_symmetry, onset_exact,
    onset_exact_odd, onset_sampled, search_logicals_report, LogicalSet, OnsetResult, SearchOptions, SymmetryGroup,
};
use crate::sampling::{
    read_rates_csv, read_schema_csv, sample_rate, sample_rate_until, sample_weight, sample_weight_until, write_rates_csv,
    write_schema_csv, RateEstimate, SpectrumEstimate,
};
use crate::splitting::{multi_seeded_split, read_split_csv, write_split_csv, SplitJob};
use crate::system::{format_system, gen_repetition, gen_rotated_toric, gen_unrotated_toric, read_system, DecodingSystem};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn write_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn need<T: Copy>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::invalid(format!("--{flag} is required")))
}

/// `lo:hi:step` (inclusive) or a comma list.
pub fn parse_weights(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::invalid(format!("bad weight list {s:?}"));
    if s.contains(':') {
        let parts: Vec<u64> = s.split(':').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
        let (lo, hi, step) = match parts[..] {
            [lo, hi] => (lo, hi, 1),
            [lo, hi, step] => (lo, hi, step),
            _ => return Err(bad()),
        };
        if step == 0 || lo > hi {
            return Err(bad());
        }
        Ok((lo..=hi).step_by(step as usize).collect())
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::invalid(format!("bad number {x:?}"))))
        .collect()
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::invalid(format!("grid {s:?} must be lo:hi:n"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(bad());
    }
    Ok(log_grid(lo, hi, n))
}

pub(super) fn gen(a: &GenArgs) -> Result<()> {
    let sys = match a.family {
        Family::Rep => gen_repetition(need(a.n, "n")?)?,
        Family::Ut => {
            let d1 = need(a.d1.or(a.d), "d1")?;
            gen_unrotated_toric(d1, a.d2.unwrap_or(d1))?
        }
        Family::Rt => gen_rotated_toric(need(a.d, "d")?)?,
    };
    let mut out = output(&a.out)?;
    out.write_all(format_system(&sys).as_bytes())?;
    out.flush()?;
    Ok(())
}

fn decoder_for(sys: &DecodingSystem, cfg: &DecoderConfig) -> Result<Decoder> {
    Decoder::new(sys, cfg)
}

pub(super) fn spectrum(a: &SpectrumArgs) -> Result<()> {
    let sys = read_system(&a.system)?;
    let cfg = a.decoder.config()?;
    let dec = decoder_for(&sys, &cfg)?;
    let mut r = rng(a.seed);
    if let Some(rates) = &a.rates {
        let mut out = Vec::new();
        for p in parse_floats(rates)? {
            out.push(match (a.trials, a.failures) {
                (Some(t), _) => sample_rate(&sys, &dec, p, t, &mut r)?,
                (None, Some(k)) => sample_rate_until(&sys, &dec, p, k, a.max_trials, &mut r)?,
                (None, None) => unreachable!("clap requires one stopping rule"),
            });
        }
        return write_rates_csv(&out, output(&a.out)?);
    }
    let weights = parse_weights(a.weights.as_deref().unwrap_or_default())?;
    let mut spec = SpectrumEstimate::new(sys.expanded_count(), sys.num_actions());
    for w in weights {
        let (f, t) = match (a.trials, a.failures) {
            (Some(t), _) => sample_weight(&sys, &dec, w, t, &mut r)?,
            (None, Some(k)) => sample_weight_until(&sys, &dec, w, k, a.max_trials, &mut r)?,
            (None, None) => unreachable!("clap requires one stopping rule"),
        };
        spec.record(w, t, f)?;
    }
    spec.write_csv(output(&a.out)?)
}

/// Fit output, also consumed by `report`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub config_hash: String,
    pub n_expanded: u64,
    pub rate_divisor: f64,
    pub fit: FitResult,
    pub max_deviation: Option<f64>,
    pub powerlaw: Option<PowerLawFit>,
}

fn read_reference(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = read_schema_csv(open(path)?, &["p", "P"])?;
    let mut ps = Vec::new();
    let mut vs = Vec::new();
    for row in rows {
        ps.push(row[0].parse().map_err(|_| Error::invalid(format!("bad p {:?}", row[0])))?);
        vs.push(row[1].parse().map_err(|_| Error::invalid(format!("bad P {:?}", row[1])))?);
    }
    Ok((ps, vs))
}

pub(super) fn fit(a: &FitArgs) -> Result<()> {
    let sys = read_system(&a.system)?;
    let n = sys.expanded_count();
    let b = sys.rate_divisor();
    let spec = SpectrumEstimate::read_csv(open(&a.spectrum)?, n, sys.num_actions())?;
    let rates: Vec<RateEstimate> = match &a.rates {
        Some(p) => read_rates_csv(open(p)?)?,
        None => Vec::new(),
    };
    let variant: Variant = a.variant.parse()?;
    let fixed = parse_fixed(&a.fix)?;
    let opts = FitOptions { rate_divisor: b, starts: a.starts, seed: a.seed, ..FitOptions::default() };
    let result = ansatz::fit(&spec, &rates, variant, &fixed, None, &opts)?;
    let grid = parse_grid(&a.grid)?;
    let curve = predict_curve(&result.params, n, b, &grid);

    let max_dev = match &a.reference {
        Some(path) => {
            let (ps, vs) = read_reference(path)?;
            let pred = predict_curve(&result.params, n, b, &ps);
            Some(max_deviation(&pred, &vs, None)?)
        }
        None => None,
    };
    let powerlaw = if a.compare_powerlaw {
        if rates.is_empty() {
            return Err(Error::invalid("--compare-powerlaw needs --rates"));
        }
        let d = a.distance.unwrap_or(2 * result.params.w0);
        Some(fit_powerlaw(&rates, &powerlaw_d_grid(d))?)
    } else {
        None
    };
    if let Some(path) = &a.curve {
        let pl: Vec<f64> = powerlaw.map(|f| grid.iter().map(|&p| f.law.eval(p)).collect()).unwrap_or_default();
        let mut curves: Vec<(&str, &[f64])> = vec![("ansatz", &curve)];
        if powerlaw.is_some() {
            curves.push(("powerlaw", &pl));
        }
        write_curves_csv(BufWriter::new(File::create(path)?), &grid, &curves)?;
    }
    let report = FitReport {
        config_hash: config_hash(a)?,
        n_expanded: n,
        rate_divisor: b,
        fit: result,
        max_deviation: max_dev,
        powerlaw,
    };
    write_json(&a.out, &report)
}

fn supports(ls: &[BitVec]) -> Vec<Vec<usize>> {
    ls.iter().map(BitVec::support).collect()
}

fn read_logicals(path: &Option<PathBuf>, sys: &DecodingSystem, flag: &str) -> Result<LogicalSet> {
    let p = path.as_ref().ok_or_else(|| Error::invalid(format!("--{flag} is required")))?;
    LogicalSet::read(open(p)?, sys)
}

fn write_logicals(path: &Option<PathBuf>, set: &LogicalSet) -> Result<()> {
    if let Some(p) = path {
        let mut w = BufWriter::new(File::create(p)?);
        set.write(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn parse_columns(s: &Option<String>) -> Result<Vec<usize>> {
    match s {
        None => Ok(Vec::new()),
        Some(s) if s.trim().is_empty() => Ok(Vec::new()),
        Some(s) => s
            .split(',')
            .map(|x| x.trim().parse().map_err(|_| Error::invalid(format!("bad column {x:?}"))))
            .collect(),
    }
}

fn onset_json(hash: String, mode: &str, r: &OnsetResult) -> serde_json::Value {
    json!({ "config_hash": hash, "mode": mode, "onset": r })
}

pub(super) fn minweight(a: &MinweightArgs) -> Result<()> {
    let sys = read_system(&a.system)?;
    let cfg = a.decoder.config()?;
    let hash = config_hash(a)?;
    let mut r = rng(a.seed);
    let value = match a.mode {
        Mode::Distance => {
            let cfg = if cfg.backend == Backend::Lookup && a.decoder.decoder == "lookup" { cfg } else { cfg.clone() };
            let d = distance_exact(&sys, &cfg)?;
            json!({ "config_hash": hash, "mode": "distance", "distance": d.distance, "witnesses": supports(&d.witnesses) })
        }
        Mode::Dbound => {
            let ub = distance_upper_bound(&sys, &cfg, a.trials, &mut r)?;
            json!({
                "config_hash": hash,
                "mode": "dbound",
                "D_max": ub.distance,
                "witnesses": supports(&ub.witnesses),
                "failed_decodes": ub.failed_decodes,
            })
        }
        Mode::Enumerate => {
            let w_max = need(a.wmax, "wmax")?;
            let sets = enumerate_logicals_exact(&sys, w_max)?;
            write_logicals(&a.logicals_out, &sets[0])?;
            let counts: Vec<serde_json::Value> =
                sets.iter().map(|s| json!({ "weight": s.weight(), "count": s.len() })).collect();
            json!({
                "config_hash": hash,
                "mode": "enumerate",
                "distance": sets[0].weight(),
                "count": sets[0].len(),
                "sets": counts,
                "complete": true,
            })
        }
        Mode::Search => {
            let opts = SearchOptions {
                decimation: a.decimation,
                prior_perturbation: a.perturb,
                restrict_columns: parse_columns(&a.restrict)?,
            };
            let report = search_logicals_report(&sys, &cfg, a.target, a.rounds, &opts, &mut r)?;
            let mut set = report.set;
            if a.symmetry {
                let grp = SymmetryGroup::toric(&sys)
                    .ok_or_else(|| Error::invalid("--symmetry needs a toric system built by gen"))?;
                set = expand_by_symmetry(&set, &grp, &sys)?;
            }
            let coverage = match a.coverage {
                Some(k) => Some(coverage_estimate(&set, &sys, &cfg, k, &mut r)?),
                None => None,
            };
            write_logicals(&a.logicals_out, &set)?;
            json!({
                "config_hash": hash,
                "mode": "search",
                "weight": set.weight(),
                "count": set.len(),
                "unique_after_round": report.unique_after_round,
                "coverage": coverage,
            })
        }
        Mode::Onset => {
            let found = read_logicals(&a.logicals, &sys, "logicals")?;
            let res = if found.weight() % 2 == 0 {
                onset_exact(&sys, &found)?
            } else {
                let d1 = read_logicals(&a.logicals_d1, &sys, "logicals-d1")?;
                onset_exact_odd(&sys, &found, &d1)?
            };
            onset_json(hash, "onset", &res)
        }
        Mode::OnsetSample => {
            let found = read_logicals(&a.logicals, &sys, "logicals")?;
            let s = onset_sampled(&sys, &found, a.samples, &mut r)?;
            json!({ "config_hash": hash, "mode": "onset-sample", "onset_weight": found.weight() / 2, "sampled": s })
        }
    };
    write_json(&a.out, &value)
}

pub(super) fn split(a: &SplitArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.job)?;
    let mut job = SplitJob::from_json(&text)?;
    if let Some(l) = a.l {
        job.l = l;
    }
    if let Some(m) = a.m {
        job.m = m;
    }
    if let Some(s) = a.seed {
        job.seed = s;
    }
    if let Some(b) = a.budget_seconds {
        job.budget_seconds = Some(b);
    }
    let base = a.job.parent().unwrap_or(Path::new("."));
    let sys_path = if job.system.is_absolute() { job.system.clone() } else { base.join(&job.system) };
    let sys = read_system(&sys_path)?;
    let distance = match job.distance {
        Some(d) => d,
        None => distance_exact(&sys, &DecoderConfig::with_backend(Backend::BranchAndBound))?.distance,
    };
    let opts = job.options(distance, sys.num_faults())?;
    let dec = decoder_for(&sys, &job.decoder)?;
    let run = multi_seeded_split(&sys, &dec, &opts, &mut rng(job.seed))?;

    std::fs::create_dir_all(&a.out_dir)?;
    write_split_csv(&run.rates, BufWriter::new(File::create(a.out_dir.join("rates.csv"))?))?;
    let hash = config_hash(&job)?;
    let run_json = json!({ "config_hash": hash, "job": job, "distance": distance, "run": run });
    write_json(&Some(a.out_dir.join("run.json")), &run_json)?;
    let est = json!({ "config_hash": hash, "estimates": run.estimates() });
    write_json(&Some(a.out_dir.join("estimates.json")), &est)?;
    let partial = run.instances.iter().filter(|i| i.partial).count();
    if partial > 0 {
        return Err(Error::BudgetExhausted(format!("{partial} instances stopped at the time budget")));
    }
    Ok(())
}

#[derive(Deserialize)]
struct OnsetFile {
    onset: OnsetResult,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub(super) fn report(a: &ReportArgs) -> Result<()> {
    if a.fit.is_none() && a.onset.is_none() && a.split.is_none() && a.rates.is_none() {
        return Err(Error::invalid("report needs at least one of --fit, --onset, --split, --rates"));
    }
    let mut inputs = serde_json::Map::new();
    let mut file_hashes = serde_json::Map::new();
    let mut read_text = |key: &str, p: &Path| -> Result<String> {
        let text = std::fs::read_to_string(p)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))))?;
        file_hashes.insert(key.to_owned(), json!(config_hash(&text)?));
        Ok(text)
    };
    let fit: Option<FitReport> = a.fit.as_ref().map(|p| -> Result<_> { Ok(serde_json::from_str(&read_text("fit", p)?)?) }).transpose()?;
    let onset: Option<OnsetResult> = a
        .onset
        .as_ref()
        .map(|p| -> Result<_> { Ok(serde_json::from_str::<OnsetFile>(&read_text("onset", p)?)?.onset) })
        .transpose()?;
    let split = a.split.as_ref().map(|p| -> Result<_> { read_split_csv(read_text("split", p)?.as_bytes()) }).transpose()?;
    let rates = a.rates.as_ref().map(|p| -> Result<_> { read_rates_csv(read_text("rates", p)?.as_bytes()) }).transpose()?;

    let mut grid = parse_grid(&a.grid)?;
    grid.extend(split.iter().flatten().map(|r| r.p));
    grid.extend(rates.iter().flatten().map(|r| r.p));
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let ansatz_params: Option<(AnsatzParams, u64, f64)> = fit.as_ref().map(|f| (f.fit.params, f.n_expanded, f.rate_divisor));
    let rows = grid.iter().map(|&p| {
        let s = split.iter().flatten().find(|r| r.p == p);
        let m = rates.iter().flatten().find(|r| r.p == p && r.trials > 0);
        vec![
            format!("{p:e}"),
            cell(ansatz_params.map(|(prm, n, b)| prm.predict_rate(n, p / b))),
            cell(fit.as_ref().and_then(|f| f.powerlaw).map(|pl| pl.law.eval(p))),
            cell(s.map(|r| r.p_hat)),
            cell(s.map(|r| r.p_std)),
            cell(m.map(RateEstimate::phat)),
            cell(m.map(RateEstimate::stderr)),
        ]
    });
    std::fs::create_dir_all(&a.out_dir)?;
    write_schema_csv(
        BufWriter::new(File::create(a.out_dir.join("curves.csv"))?),
        &["p", "ansatz", "powerlaw", "split_P", "split_std", "mc_P", "mc_stderr"],
        rows,
    )?;
    if let Some(f) = &fit {
        inputs.insert("fit".into(), serde_json::to_value(f)?);
    }
    if let Some(o) = &onset {
        inputs.insert("onset".into(), serde_json::to_value(o)?);
    }
    let onset_point = onset.as_ref().map(|o| json!({ "w0": o.onset_weight, "f": o.onset_fraction, "lower_bound": o.lower_bound }));
    let value = json!({
        "config_hash": config_hash(a)?,
        "input_hashes": file_hashes,
        "optimal_onset": onset_point,
        "split": split,
        "rates": rates,
        "inputs": inputs,
    });
    write_json(&Some(a.out_dir.join("report.json")), &value)
}
