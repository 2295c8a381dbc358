#!/usr/bin/env python3

import logging
from fractions import Fraction
from pathlib import Path
from typing import Optional

import click

from leaklab import __version__
from leaklab.config import load_attack_config, load_env, output_dir
from leaklab.errors import LeakLabError, RetriesExhaustedError

# Load environment variables from .env file
load_env()

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

SCHEMES = click.Choice(["ecdsa", "ecschnorr"])


def _fail(error: Exception) -> None:
    click.secho(f"Error: {error}", fg="red")
    raise SystemExit(1)


def _run_dir(out: Optional[str], command: str) -> Path:
    path = output_dir(out)
    path.mkdir(parents=True, exist_ok=True)
    click.secho(f"Writing {command} outputs to {path}", fg="blue")
    return path


@click.group()
@click.version_option(version=__version__)
@click.option('--debug', is_flag=True, help='Verbose logging, including per-tour reduction statistics')
def cli(debug: bool) -> None:
    """leaklab - timing side-channel key recovery lab for ECDSA and EC-Schnorr."""
    if debug:
        logging.getLogger().setLevel(logging.DEBUG)
        logging.getLogger('leaklab').setLevel(logging.DEBUG)
        logger.debug("Debug mode enabled - verbose logging activated")


@cli.command()
@click.option('--seed', default=None, type=int, help='Seed for a reproducible key')
@click.option('--curve', default='P-256', help='Curve name')
@click.option('--out', default='key.json', help='Private key file')
@click.option('--public-out', default=None, help='Also write the public key here')
def keygen(seed: Optional[int], curve: str, out: str, public_out: Optional[str]) -> None:
    """Generate a key pair."""
    from leaklab.ec.curves import get_curve
    from leaklab.ec.signing import keygen as make_key, keypair_point
    from leaklab.storage import save_key, save_public_key, write_file_manifest

    try:
        params = get_curve(curve)
        keypair = make_key(params, seed=seed)
        save_key(keypair, out)
        if public_out:
            save_public_key(keypair.curve, keypair_point(keypair), public_out)
        write_file_manifest(out, "keygen", {"curve": curve, "public_out": public_out}, seed)
    except LeakLabError as e:
        _fail(e)
    click.secho(f"Key pair for {params.name} written to {out}", fg="green")
    click.secho(f"Q = ({keypair.qx:#x}, {keypair.qy:#x})", fg="cyan")


@cli.command()
@click.option('--profile', 'profile_name', default='intel-system', help='Leak profile preset or file')
@click.option('--scheme', type=SCHEMES, default='ecdsa')
@click.option('--samples', 'count', default=20000, type=int, help='Signatures to profile')
@click.option('--samples-file', default=None, type=click.Path(exists=True),
              help='Profile debug samples (with nonce annotations) instead of a fresh device')
@click.option('--seed', default=0, type=int)
@click.option('--fast-side-only', is_flag=True, help='Windows end at the class center')
@click.option('--out', default=None, help='Output directory')
def profile(profile_name: str, scheme: str, count: int, samples_file: Optional[str],
            seed: int, fast_side_only: bool, out: Optional[str]) -> None:
    """Profile a device with a known key and recommend timing windows."""
    from leaklab.attack.filtering import profile as build_profile
    from leaklab.device.profiles import get_profile
    from leaklab.device.simulated import SimulatedDevice
    from leaklab.ec.curves import p256
    from leaklab.ec.signing import keygen as make_key
    from leaklab.schemas import Scheme
    from leaklab.storage import load_samples, save_json_file, write_csv, write_manifest

    try:
        leak_profile = get_profile(profile_name)
        if samples_file:
            samples = load_samples(samples_file)
        else:
            keypair = make_key(p256(), seed=seed)
            device = SimulatedDevice(Scheme(scheme), leak_profile, keypair.d, seed=seed + 1, debug=True)
            with click.progressbar(length=count, label="Signing") as bar:
                samples = []
                for _ in range(count):
                    samples.append(device.sign())
                    bar.update(1)
        report = build_profile(samples, leak_profile, fast_side_only=fast_side_only)
    except LeakLabError as e:
        _fail(e)

    click.secho(report.get_summary_view(), fg="cyan")
    if not report.exploitable:
        click.secho("No exploitable separation: only the fastest-samples strategy is left.", fg="yellow")

    run_dir = _run_dir(out, "profile")
    write_csv(run_dir / "profile.csv",
              ["class", "lzb", "count", "median", "q1", "q3", "min", "max"],
              ([c.class_index, c.lzb, c.count, c.median, c.q1, c.q3, c.minimum, c.maximum]
               for c in report.classes))
    save_json_file(run_dir / "profile_report.json", report.model_dump(mode="json"))
    write_manifest(run_dir, "profile", {"profile": profile_name, "scheme": scheme, "samples": count,
                                        "fast_side_only": fast_side_only}, seed)


@cli.command()
@click.option('--key', 'key_file', default=None, type=click.Path(exists=True),
              help='Private key of the simulated target (local collection)')
@click.option('--target', default=None, help='host:port of a signing server (remote collection)')
@click.option('--public-key', default=None, type=click.Path(exists=True),
              help='Verify remote signatures against this public key')
@click.option('--profile', 'profile_name', default='intel-system', help='Leak profile preset or file')
@click.option('--scheme', type=SCHEMES, default='ecdsa')
@click.option('--count', default=40000, type=int)
@click.option('--seed', default=0, type=int)
@click.option('--freq-hz', default=3.6e9, type=float, help='Cycle frequency for remote timings')
@click.option('--baseline-cycles', default=0.0, type=float, help='Baseline the server subtracted')
@click.option('--net-noise', default=0.0, type=float, help='Extra Gaussian noise in cycles (remote)')
@click.option('--timeout', default=2.0, type=float, help='Per-request timeout in seconds (remote)')
@click.option('--out', default='samples.jsonl', help='Sample file (JSONL)')
def collect(key_file: Optional[str], target: Optional[str], public_key: Optional[str],
            profile_name: str, scheme: str, count: int, seed: int, freq_hz: float,
            baseline_cycles: float, net_noise: float, timeout: float, out: str) -> None:
    """Collect timed signatures from a simulated device or a remote server."""
    from leaklab.device.profiles import get_profile
    from leaklab.device.simulated import SimulatedDevice
    from leaklab.schemas import Scheme
    from leaklab.services.client import collect_remote
    from leaklab.storage import load_key, load_public_key, save_samples, write_file_manifest

    if bool(key_file) == bool(target):
        _fail(click.UsageError("give exactly one of --key (local) or --target (remote)"))
    try:
        if target:
            point = load_public_key(public_key)[1] if public_key else None
            click.secho(f"Collecting {count} signatures from udp://{target}", fg="blue")
            samples = collect_remote(
                target, count, freq_hz=freq_hz, timeout=timeout, baseline_cycles=baseline_cycles,
                noise_sigma=net_noise, seed=seed, public_key=point, scheme=Scheme(scheme),
            )
        else:
            keypair = load_key(key_file)
            device = SimulatedDevice(Scheme(scheme), get_profile(profile_name), keypair.d, seed=seed)
            with click.progressbar(length=count, label="Signing") as bar:
                samples = []
                for _ in range(count):
                    samples.append(device.sign())
                    bar.update(1)
        save_samples(samples, out)
    except LeakLabError as e:
        _fail(e)
    click.secho(f"Wrote {len(samples)} samples to {out}", fg="green")
    write_file_manifest(out, "collect", {"target": target, "key": key_file, "profile": profile_name,
                                         "scheme": scheme, "count": count}, seed)


@cli.command()
@click.option('--bind', default='127.0.0.1:9000', help='host:port to bind the UDP server to')
@click.option('--key-file', required=True, type=click.Path(exists=True), help='Private key the server signs with')
@click.option('--profile', 'profile_name', default='intel-system', help='Leak profile preset or file')
@click.option('--scheme', type=SCHEMES, default='ecdsa')
@click.option('--freq-hz', default=3.6e9, type=float, help='Cycles per second of the simulated device')
@click.option('--baseline-cycles', default=0.0, type=float, help='Subtracted from every latency')
@click.option('--seed', default=None, type=int)
@click.option('--log-requests', is_flag=True, help='Log every served request as JSONL')
@click.option('--log-file', default='request_log.jsonl', help='File to log requests to')
@click.option('--public-key-out', default=None, help='Publish the public key to this file')
def serve(bind: str, key_file: str, profile_name: str, scheme: str, freq_hz: float,
          baseline_cycles: float, seed: Optional[int], log_requests: bool, log_file: str,
          public_key_out: Optional[str]) -> None:
    """Run the UDP signing server."""
    from leaklab.device.profiles import get_profile
    from leaklab.schemas import Scheme
    from leaklab.services.client import parse_target
    from leaklab.services.server.api_definitions import ServerSettings
    from leaklab.services.server.main import start_server
    from leaklab.storage import load_key

    try:
        host, port = parse_target(bind)
        keypair = load_key(key_file)
        settings = ServerSettings(
            host=host, port=port, scheme=Scheme(scheme), curve=keypair.curve,
            profile=get_profile(profile_name), freq_hz=freq_hz, baseline_cycles=baseline_cycles,
            seed=seed, log_requests=log_requests, log_file=log_file, public_key_file=public_key_out,
        )
    except (LeakLabError, ValueError) as e:
        _fail(e)
    click.secho(f"Starting {scheme} signing server at udp://{host}:{port}", fg="green")
    if log_requests:
        click.secho(f"Request logging enabled. Logging to {log_file}", fg="blue")
    start_server(settings, keypair)


@cli.command(name="filter")
@click.argument('samples_file', type=click.Path(exists=True))
@click.option('--lower', default=None, type=float, help='Window lower edge in cycles')
@click.option('--upper', default=None, type=float, help='Window upper edge in cycles')
@click.option('--fastest', default=None, type=int, help='Keep the M fastest samples instead')
@click.option('--lzb', default=8, type=int, help='Bias assumed for kept samples')
@click.option('--out', default='filtered.jsonl')
def filter_samples(samples_file: str, lower: Optional[float], upper: Optional[float],
                   fastest: Optional[int], lzb: int, out: str) -> None:
    """Keep samples inside a timing window, or the fastest ones."""
    from leaklab.attack.filtering import classify, filter_yield, sort_fastest
    from leaklab.schemas import BiasClass
    from leaklab.storage import load_samples, save_samples, write_file_manifest

    try:
        samples = load_samples(samples_file)
        if fastest is not None:
            kept = sort_fastest(samples, fastest, lzb)
        elif lower is not None and upper is not None:
            kept = classify(samples, BiasClass(assumed_lzb=lzb, lower_cycles=lower, upper_cycles=upper))
        else:
            raise click.UsageError("give --lower and --upper, or --fastest")
        save_samples(kept, out)
        write_file_manifest(out, "filter", {"samples": samples_file, "lower": lower, "upper": upper,
                                            "fastest": fastest, "lzb": lzb})
    except (LeakLabError, ValueError) as e:
        _fail(e)
    click.secho(f"Kept {len(kept)}/{len(samples)} samples -> {out}", fg="green")
    if fastest is None and samples:
        click.secho(f"Filter yield at {lzb}-bit bias: {filter_yield(len(kept), len(samples), lzb):.4f}", fg="cyan")


@cli.command()
@click.argument('config_file', type=click.Path(exists=True))
@click.option('--samples', 'samples_file', default=None, type=click.Path(exists=True),
              help='Attack pre-collected samples instead of collecting')
@click.option('--key', 'key_file', default=None, type=click.Path(exists=True),
              help='Key of the simulated target (defaults to one derived from the seed)')
@click.option('--public-key', default=None, type=click.Path(exists=True),
              help='Public key of a remote target')
@click.option('--seed', default=None, type=int, help='Override the config seed')
@click.option('--out', default=None, help='Output directory')
def attack(config_file: str, samples_file: Optional[str], key_file: Optional[str],
           public_key: Optional[str], seed: Optional[int], out: Optional[str]) -> None:
    """
    Run one key recovery experiment.

    Writes result.json, manifest.json and the last attempt's instance.json and
    basis.txt; exits with status 1 when every attempt failed.
    """
    from leaklab.attack.pipeline import budget_report, run_attack
    from leaklab.storage import load_key, load_public_key, load_samples, save_json_file, write_manifest

    try:
        config = load_attack_config(config_file, {"seed": seed})
        keypair = load_key(key_file) if key_file else None
        point = load_public_key(public_key)[1] if public_key else None
        samples = load_samples(samples_file) if samples_file else None
        run_dir = _run_dir(out, "attack")
        result = run_attack(config, keypair=keypair, samples=samples, public_key=point, artifacts_dir=run_dir)
    except LeakLabError as e:
        _fail(e)

    if result.success:
        click.secho(f"Key recovered after {len(result.retries)} attempt(s): d = {result.recovered_key:#x}",
                    fg="green")
    for stage, seconds in result.stage_seconds.items():
        click.secho(f"  {stage}: {seconds:.2f}s", fg="white")
    click.secho(budget_report(config, result).get_summary_view(), fg="cyan")

    save_json_file(run_dir / "result.json", result.model_dump(mode="json"))
    write_manifest(run_dir, "attack", config.model_dump(mode="json"), config.seed)
    if not result.success:
        _fail(RetriesExhaustedError(f"{result.failure_reason} after {len(result.retries)} attempt(s)"))


@cli.command()
@click.argument('config_file', type=click.Path(exists=True))
@click.option('--dims', required=True, help='Comma-separated lattice dimensions, e.g. 20,23,26')
@click.option('--trials', default=50, type=int, help='Trials per dimension')
@click.option('--workers', default=1, type=int, help='Worker processes')
@click.option('--samples', 'samples_file', default=None, type=click.Path(exists=True))
@click.option('--out', default=None, help='Output directory')
def curve(config_file: str, dims: str, trials: int, workers: int,
          samples_file: Optional[str], out: Optional[str]) -> None:
    """Success probability by lattice dimension."""
    from leaklab.attack.pipeline import save_success_curve, success_curve
    from leaklab.storage import load_samples, write_manifest

    try:
        dim_list = [int(d) for d in dims.split(",") if d.strip()]
        config = load_attack_config(config_file)
        samples = load_samples(samples_file) if samples_file else None
        rows = success_curve(config, dim_list, trials, workers, samples=samples)
    except (LeakLabError, ValueError) as e:
        _fail(e)

    for row in rows:
        color = "green" if row.probability == 1.0 else "white"
        click.secho(f"  t={row.dim:3d}: {row.successes}/{row.trials} ({row.probability:.2f})", fg=color)
    run_dir = _run_dir(out, "curve")
    save_success_curve(rows, run_dir / "success_curve.csv")
    write_manifest(run_dir, "curve", {**config.model_dump(mode="json"), "dims": dim_list, "trials": trials},
                   config.seed)


@cli.command()
@click.argument('samples_file', type=click.Path(exists=True))
@click.option('--bin-width', default=1e5, type=float, help='Bin width in cycles')
@click.option('--out', default='histogram.csv')
def hist(samples_file: str, bin_width: float, out: str) -> None:
    """Histogram of sample timings as CSV."""
    import numpy as np

    from leaklab.attack.filtering import find_histogram_peaks
    from leaklab.attack.pipeline import emit_histogram
    from leaklab.storage import load_samples, write_file_manifest

    try:
        bins = emit_histogram(load_samples(samples_file), bin_width, out)
        write_file_manifest(out, "hist", {"samples": samples_file, "bin_width": bin_width})
    except LeakLabError as e:
        _fail(e)
    centers = np.array([b.center for b in bins])
    counts = np.array([b.count for b in bins])
    peaks = find_histogram_peaks(centers, counts)
    click.secho(f"{len(bins)} bins written to {out}", fg="green")
    if peaks:
        click.secho("Peaks: " + ", ".join(f"{p:.6g}" for p in sorted(peaks, reverse=True)[:6]), fg="cyan")


@cli.command()
@click.argument('config_file', required=False, type=click.Path(exists=True))
@click.option('--lzb', default=None, type=int)
@click.option('--dim', default=None, type=int, help='Samples needed in the lattice')
@click.option('--yield', 'yield_text', default=None, help='Filter yield, e.g. 53/855 or 0.2')
@click.option('--rate', default=None, type=float, help='Signatures per minute')
@click.option('--result', 'result_file', default=None, type=click.Path(exists=True),
              help='result.json of a finished attack, for its observed yield')
def budget(config_file: Optional[str], lzb: Optional[int], dim: Optional[int], yield_text: Optional[str],
           rate: Optional[float], result_file: Optional[str]) -> None:
    """Signatures and collection time an attack needs, next to the reference scenarios."""
    from leaklab.attack.pipeline import budget_report, estimate_budget, reference_budgets
    from leaklab.schemas import ExperimentResult
    from leaklab.storage import load_json_file

    try:
        yield_fraction = Fraction(yield_text) if yield_text else None
        if config_file:
            config = load_attack_config(config_file, {"assumed_lzb": lzb, "lattice_dim": dim,
                                                      "signing_rate_per_minute": rate})
            result = ExperimentResult.model_validate(load_json_file(result_file)) if result_file else None
            report = budget_report(config, result, yield_fraction)
            click.secho(report.get_summary_view(), fg="green")
        elif lzb is not None and dim is not None:
            if yield_fraction is None:
                yield_fraction = Fraction(1)
            click.secho(estimate_budget(lzb, dim, yield_fraction, rate).get_summary_view(), fg="green")
    except (LeakLabError, ValueError, ZeroDivisionError) as e:
        _fail(e)

    click.secho("\nReference scenarios:", fg="blue")
    for ref, report in reference_budgets():
        match = "ok" if report.total_signatures == ref.published_signatures else "MISMATCH"
        click.secho(f"  {ref.setting:28s} {report.get_summary_view()}  [{match}]",
                    fg="cyan" if match == "ok" else "red")


def main():
    """Main entry point for the CLI."""
    try:
        cli()
    except Exception as e:
        click.secho(f"Error: {str(e)}", fg="red")
        logger.error(f"CLI error: {str(e)}", exc_info=True)


if __name__ == "__main__":
    main()
