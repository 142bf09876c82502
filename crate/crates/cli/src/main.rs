mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use zzcancel::cancel::{find_cancellation, zz_map};
use zzcancel::chain::{independence, simultaneous_cancellation, zz_vs_detuning_and_amp, ChainSpec};
use zzcancel::config::{load_device, to_device_text, CHAIN_S6, TABLE_S1};
use zzcancel::device::{DeviceSpec, DriveTone};
use zzcancel::dynamics::{coupler_leakage_vs_edges, default_leakage_plateaus};
use zzcancel::experiments::{echoed_zz_ramsey, frequency_shifts, simultaneous_ramsey, IdleDrive};
use zzcancel::rb::{error_vs_idle_duration, NoiseChannel, RbConfig, Survival};
use zzcancel::spectrum::{default_pair, dispersive_summary, perturbative_chi_zz, PerturbativeInputs};
use zzcancel::tomography::idle_tomography_suite;
use zzcancel::units::{mhz, to_ghz, to_khz, to_mhz};

use output::{Format, Run};

#[derive(Parser, Debug)]
#[command(name = "zzcancel", version, about = "Coupler-drive ZZ cancellation simulator")]
struct Cli {
    /// Device file, or a bundled device name (table-s1, chain-s6).
    #[arg(long, global = true)]
    device: Option<String>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Dressed dispersive parameters and the perturbative ZZ estimate.
    Spectrum,
    /// Driven ZZ over drive frequency and amplitude.
    Zzmap(ZzmapArgs),
    /// Cancellation amplitude at the operating frequency.
    Cancel(CancelArgs),
    /// Echoed ZZ Ramsey fringes, or conditional frequency shifts.
    Ramsey(RamseyArgs),
    /// Two-qubit tomography after an idle.
    Tomo(TomoArgs),
    /// Simultaneous Ramsey and the ZZ correlator.
    Correlations(CorrelationsArgs),
    /// Interleaved randomized benchmarking of the idle.
    Rb(RbArgs),
    /// Coupler excitation left after a pulse versus edge duration.
    Leakage(LeakageArgs),
    /// Three-qubit chain: pairwise ZZ grids and independence.
    Chain(ChainArgs),
}

#[derive(Args, Debug, Serialize)]
struct ZzmapArgs {
    /// Drive offset from the coupler |gg> line, MHz.
    #[arg(long, default_value_t = -20.0, allow_negative_numbers = true)]
    offset_min_mhz: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    offset_max_mhz: f64,
    #[arg(long, default_value_t = 51)]
    offset_points: usize,
    #[arg(long, default_value_t = 1.5)]
    amp_max_mhz: f64,
    #[arg(long, default_value_t = 16)]
    amp_points: usize,
}

#[derive(Args, Debug, Serialize)]
struct CancelArgs {
    /// Drive frequency; defaults to midway between the |ee> and |eg> coupler lines.
    #[arg(long)]
    drive_freq_ghz: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    bracket_lo_mhz: f64,
    #[arg(long, default_value_t = 1.5)]
    bracket_hi_mhz: f64,
}

#[derive(Args, Debug, Serialize)]
struct RamseyArgs {
    /// Drive amplitudes, MHz.
    #[arg(long, value_delimiter = ',', default_value = "0,0.66")]
    amps_mhz: Vec<f64>,
    #[arg(long, default_value_t = 30.0)]
    delay_max_us: f64,
    #[arg(long, default_value_t = 0.25)]
    delay_step_us: f64,
    /// Measure |ge>, |eg>, |ee> frequency shifts by conditional Ramsey instead.
    #[arg(long)]
    conditional: bool,
    /// Idle used by the conditional measurement, us.
    #[arg(long, default_value_t = 5.0)]
    tau_us: f64,
    #[arg(long, default_value_t = 16)]
    phases: usize,
}

#[derive(Args, Debug, Serialize)]
struct TomoArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.6,1.2,2.4,3.6,4.8,6,7.2,8.4,9.6")]
    delays_us: Vec<f64>,
    /// Drive amplitude, MHz; defaults to the cancellation amplitude.
    #[arg(long)]
    amp_mhz: Option<f64>,
    /// Shots per measurement setting; omitted means exact expectations.
    #[arg(long)]
    shots: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
struct CorrelationsArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,0.36,0.66,0.96")]
    amps_mhz: Vec<f64>,
    /// Ramsey detunings of the two qubits, MHz.
    #[arg(long, value_delimiter = ',', default_value = "-0.5,-0.1", allow_negative_numbers = true)]
    detunings_mhz: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    delay_max_us: f64,
    #[arg(long, default_value_t = 0.05)]
    delay_step_us: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum RbMode {
    /// ZZ left at the cancellation point plus decoherence.
    On,
    /// Static ZZ plus decoherence.
    Off,
    /// Energy relaxation only.
    T1,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SurvivalArg {
    Joint,
    Averaged,
}

#[derive(Args, Debug, Serialize)]
struct RbArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.4,0.8,1.2,1.6,2,2.4,2.8")]
    taus_us: Vec<f64>,
    #[arg(long, default_value_t = 80)]
    n_random: usize,
    /// Clifford counts; defaults to a log-spaced axis up to 100.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value_t = SurvivalArg::Joint)]
    survival: SurvivalArg,
    #[arg(long, value_enum, default_value_t = RbMode::All)]
    mode: RbMode,
}

#[derive(Args, Debug, Serialize)]
struct LeakageArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,50,100,200,300,400,500")]
    edges_ns: Vec<f64>,
    /// Plateau durations averaged over, us; defaults to 1..3 us in 50 ns steps.
    #[arg(long, value_delimiter = ',')]
    plateaus_us: Option<Vec<f64>>,
    /// Drive amplitude, MHz; defaults to the cancellation amplitude.
    #[arg(long)]
    amp_mhz: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct ChainArgs {
    /// Half-width of the Δ12 sweep around the device value, MHz.
    #[arg(long, default_value_t = 200.0)]
    span_mhz: f64,
    #[arg(long, default_value_t = 20.0)]
    step_mhz: f64,
    #[arg(long, default_value_t = 1.5)]
    amp_max_mhz: f64,
    #[arg(long, default_value_t = 31)]
    amp_points: usize,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(hi > lo) {
        bail!("axis needs at least two points and hi > lo (got {lo}..{hi}, {n} points)");
    }
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}

fn stepped(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi > lo) {
        bail!("axis needs step > 0 and hi > lo");
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| lo + step * k as f64).collect())
}

fn load(device: &Option<String>, default: &str) -> Result<DeviceSpec> {
    let name = device.as_deref().unwrap_or(default);
    let path = PathBuf::from(name);
    let bundled = match name {
        "table-s1" => Some(TABLE_S1),
        "chain-s6" => Some(CHAIN_S6),
        _ => None,
    };
    match bundled {
        Some(text) if !path.exists() => Ok(zzcancel::config::parse_device(text)?),
        _ => load_device(&path).with_context(|| format!("loading device {}", path.display())),
    }
}

fn cancellation_amp(spec: &DeviceSpec) -> Result<f64> {
    let drive = IdleDrive::at_operating_point(spec, 0.0)?;
    Ok(find_cancellation(spec, drive.frequency, (0.0, mhz(1.5)))?.drive_amp)
}

fn run(cli: &Cli, run: &mut Run, spec: &DeviceSpec) -> Result<()> {
    match &cli.command {
        Command::Spectrum => {
            let report = dispersive_summary(spec)?.report();
            let p = PerturbativeInputs::new(spec)?;
            let doc = json!({
                "device": spec.name,
                "chi1_mhz": report.chi1_mhz,
                "chi2_mhz": report.chi2_mhz,
                "chi_zz_khz": report.chi_zz_static_khz,
                "dispersive": report,
                "perturbative": {
                    "g_eff_mhz": to_mhz(p.g_eff),
                    "chi_zz_khz": to_khz(perturbative_chi_zz(spec)?),
                },
            });
            run.document("spectrum", &doc)
        }
        Command::Zzmap(a) => {
            let reference = dispersive_summary(spec)?.coupler_freq_gg;
            let freqs: Vec<f64> =
                linspace(a.offset_min_mhz, a.offset_max_mhz, a.offset_points)?.into_iter().map(|o| reference + mhz(o)).collect();
            let amps: Vec<f64> = linspace(0.0, a.amp_max_mhz, a.amp_points)?.into_iter().map(mhz).collect();
            run.table("zzmap", &zz_map(spec, &freqs, &amps)?.to_csv())
        }
        Command::Cancel(a) => {
            let freq = match a.drive_freq_ghz {
                Some(f) => zzcancel::units::ghz(f),
                None => IdleDrive::at_operating_point(spec, 0.0)?.frequency,
            };
            let point = find_cancellation(spec, freq, (mhz(a.bracket_lo_mhz), mhz(a.bracket_hi_mhz)))?;
            run.document("cancel", &serde_json::to_value(point.report())?)
        }
        Command::Ramsey(a) => {
            let drive = IdleDrive::at_operating_point(spec, 0.0)?;
            let amps: Vec<f64> = a.amps_mhz.iter().map(|&x| mhz(x)).collect();
            if a.conditional {
                let phases: Vec<f64> = (0..a.phases).map(|k| k as f64 * std::f64::consts::TAU / a.phases as f64).collect();
                return run.table("frequency_shifts", &frequency_shifts(spec, &drive, &amps, a.tau_us, &phases)?.to_csv());
            }
            let delays = stepped(0.0, a.delay_max_us, a.delay_step_us)?;
            let traces = echoed_zz_ramsey(spec, &drive, &amps, &delays)?;
            let mut fringes = String::from("drive_amp_mhz,delay_us,population_e\n");
            let mut fits = String::from("drive_amp_mhz,fringe_freq_khz,below_resolution\n");
            for (amp, t) in a.amps_mhz.iter().zip(&traces) {
                for (d, p) in t.axis.iter().zip(&t.population) {
                    fringes.push_str(&format!("{amp},{d},{p:.9}\n"));
                }
                fits.push_str(&format!("{amp},{:.6},{}\n", t.frequency_khz(), t.below_resolution));
            }
            run.table("ramsey", &fringes)?;
            run.table("ramsey_fit", &fits)
        }
        Command::Tomo(a) => {
            let amp = match a.amp_mhz {
                Some(x) => mhz(x),
                None => cancellation_amp(spec)?,
            };
            let drive = IdleDrive::at_operating_point(spec, amp)?;
            let points = idle_tomography_suite(spec, &drive, &a.delays_us, a.shots.map(|s| (s, cli.seed)))?;
            let mut csv = String::from("tau_us,drive_amp_mhz,fidelity,entangling_phase_rad\n");
            let mut states = Vec::new();
            for p in &points {
                csv.push_str(&format!("{},{:.6},{:.9},{:.9}\n", p.tau, to_mhz(amp), p.fidelity, p.entangling_phase));
                states.push(json!({ "tau_us": p.tau, "rho": p.rho.to_json() }));
            }
            run.table("tomo", &csv)?;
            run.document("tomo_states", &json!({ "drive_amp_mhz": to_mhz(amp), "points": states }))
        }
        Command::Correlations(a) => {
            let [d1, d2] = a.detunings_mhz[..] else {
                bail!("--detunings-mhz takes exactly two values");
            };
            let delays = stepped(0.0, a.delay_max_us, a.delay_step_us)?;
            let drive = IdleDrive::at_operating_point(spec, 0.0)?;
            let mut traces = String::new();
            let mut summary = String::from("drive_amp_mhz,max_abs_czz\n");
            for &amp in &a.amps_mhz {
                let t = simultaneous_ramsey(spec, &drive.with_amplitude(mhz(amp)), (mhz(d1), mhz(d2)), &delays)?;
                let csv = t.to_csv();
                let mut lines = csv.lines();
                let header = lines.next().unwrap_or_default();
                if traces.is_empty() {
                    traces = format!("drive_amp_mhz,{header}\n");
                }
                for line in lines {
                    traces.push_str(&format!("{amp},{line}\n"));
                }
                summary.push_str(&format!("{amp},{:.9}\n", t.max_abs_czz()));
            }
            run.table("correlations", &traces)?;
            run.table("correlations_summary", &summary)
        }
        Command::Rb(a) => {
            let (q1, q2, _) = default_pair(spec)?;
            let coherence = [q1, q2].map(|q| spec.modes[q].coherence);
            let [Some(c1), Some(c2)] = coherence else {
                bail!("rb needs t1 and t2_star on both qubits of the device");
            };
            let cfg = RbConfig {
                m_axis: a.m.clone().unwrap_or_else(zzcancel::rb::default_m_axis),
                n_random: a.n_random,
                seed: cli.seed,
                survival: match a.survival {
                    SurvivalArg::Joint => Survival::Joint,
                    SurvivalArg::Averaged => Survival::Averaged,
                },
            };
            let base = NoiseChannel::from_coherence([c1, c2], 0.0, 0.0);
            let modes = match a.mode {
                RbMode::All => vec![RbMode::Off, RbMode::On, RbMode::T1],
                m => vec![m],
            };
            let mut slopes = String::from("mode,chi_zz_khz,slope_per_us,slope_stderr_per_us,inverse_slope_us\n");
            for mode in modes {
                let (name, noise) = match mode {
                    RbMode::Off => ("off", base.with_chi_zz(dispersive_summary(spec)?.chi_zz_static)),
                    RbMode::On => {
                        let drive = IdleDrive::at_operating_point(spec, 0.0)?;
                        let point = find_cancellation(spec, drive.frequency, (0.0, mhz(1.5)))?;
                        ("on", base.with_chi_zz(point.residual))
                    }
                    _ => ("t1", NoiseChannel { t_phi: [f64::INFINITY; 2], ..base }),
                };
                let sweep = error_vs_idle_duration(&noise, &a.taus_us, &cfg)?;
                run.table(&format!("rb_{name}"), &sweep.to_csv(cli.seed))?;
                let s = sweep.slope;
                slopes.push_str(&format!("{name},{:.6},{:.9},{:.9},{:.6}\n", to_khz(noise.chi_zz), s.slope, s.slope_stderr, 1.0 / s.slope));
            }
            run.table("rb_slopes", &slopes)
        }
        Command::Leakage(a) => {
            let amp = match a.amp_mhz {
                Some(x) => mhz(x),
                None => cancellation_amp(spec)?,
            };
            let drive = IdleDrive::at_operating_point(spec, amp)?;
            let tone = DriveTone::flat(drive.target.clone(), drive.frequency, amp);
            let edges: Vec<f64> = a.edges_ns.iter().map(|e| e * 1e-3).collect();
            let plateaus = a.plateaus_us.clone().unwrap_or_else(default_leakage_plateaus);
            let mut csv = String::from("edge_ns,drive_amp_mhz,coupler_excitation\n");
            let leakage = coupler_leakage_vs_edges(spec, &tone, &plateaus, &edges)?;
            for (edge_ns, (_, n)) in a.edges_ns.iter().zip(leakage) {
                csv.push_str(&format!("{edge_ns},{:.6},{n:.12}\n", to_mhz(amp)));
            }
            run.table("leakage", &csv)
        }
        Command::Chain(a) => {
            let chain = ChainSpec::from_spec(spec)?;
            let [p, _] = chain.pairs;
            let delta0 = to_mhz(spec.modes[p.q1].frequency - spec.modes[p.q2].frequency);
            let detunings: Vec<f64> =
                stepped(delta0 - a.span_mhz, delta0 + a.span_mhz, a.step_mhz)?.into_iter().map(mhz).collect();
            let amps: Vec<f64> = linspace(0.0, a.amp_max_mhz, a.amp_points)?.into_iter().map(mhz).collect();
            let sweep = zz_vs_detuning_and_amp(&chain, &detunings, &amps)?;
            run.table("chain_detuning", &sweep.grid.to_csv())?;
            run.table("chain_crossings", &sweep.crossings_csv())?;
            let grid = simultaneous_cancellation(&chain, &amps, &amps)?;
            run.table("chain_simultaneous", &grid.to_csv())?;
            let bracket = (0.0, mhz(a.amp_max_mhz));
            let ind = independence(&chain, &amps, &amps, bracket, bracket)?;
            let doc = json!({
                "drive_freqs_ghz": [to_ghz(chain.pairs[0].drive_freq), to_ghz(chain.pairs[1].drive_freq)],
                "cancel_amps_mhz": [to_mhz(ind.roots[0]), to_mhz(ind.roots[1])],
                "shift_q1q2_khz": to_khz(ind.shift12),
                "shift_q2q3_khz": to_khz(ind.shift23),
                "spectator_ratio_q1q2": ind.spectator_ratio12,
                "spectator_ratio_q2q3": ind.spectator_ratio23,
                "missing_crossings": sweep.crossings.iter().filter(|c| c.is_none()).count(),
            });
            run.document("chain_independence", &doc)
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Spectrum => "spectrum",
        Command::Zzmap(_) => "zzmap",
        Command::Cancel(_) => "cancel",
        Command::Ramsey(_) => "ramsey",
        Command::Tomo(_) => "tomo",
        Command::Correlations(_) => "correlations",
        Command::Rb(_) => "rb",
        Command::Leakage(_) => "leakage",
        Command::Chain(_) => "chain",
    }
}

fn main_inner(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    }
    let default_device = if matches!(cli.command, Command::Chain(_)) { "chain-s6" } else { "table-s1" };
    let spec = load(&cli.device, default_device)?;
    let config: Value = json!({
        "command": cli.command,
        "device": to_device_text(&spec),
        "seed": cli.seed,
        "format": cli.format,
    });
    let mut out = Run::new(&cli.out, cli.seed, cli.format)?;
    run(&cli, &mut out, &spec)?;
    out.finish(command_name(&cli.command), &config)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
