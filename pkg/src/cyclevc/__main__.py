"""
Command-line interface for cyclevc
"""

import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import __version__
from .config import Config
from .error_handling import error_line
from .modules.pipeline import (
    CorpusManifest,
    FeatureIndex,
    FileAuditTrail,
    attach_stats,
    checkpoint_summary,
    compute_all_stats,
    convert_utterance,
    evaluate,
    ingest,
    load_checkpoint,
    load_stats,
    make_synthetic_corpus,
    read_pairs,
    train_vae,
    train_vocoder,
)
from .modules.pipeline.ingest import FEATURE_DIR, INDEX_FILE, STATS_FILE

logger = logging.getLogger("cyclevc")


def _fail_on_error(func):
    """Report any failure as one JSON line on stderr and exit with status 1"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except click.exceptions.Exit:
            raise
        except Exception as e:
            logger.debug("command failed", exc_info=True)
            click.echo(error_line(e), err=True)
            sys.exit(1)

    return wrapper


def _setup_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
                        stream=sys.stderr, force=True)


class Context:
    def __init__(self, config: Config, quiet: bool):
        self.config = config
        self.quiet = quiet

    @property
    def out_dir(self) -> Path:
        return Path(self.config.output_dir)

    @property
    def index_path(self) -> Path:
        return self.out_dir / FEATURE_DIR / INDEX_FILE

    @property
    def stats_path(self) -> Path:
        return self.out_dir / STATS_FILE

    def audit(self) -> FileAuditTrail:
        return FileAuditTrail(str(self.out_dir / "audit.jsonl"))

    def manifest_with_stats(self, manifest_path: str) -> CorpusManifest:
        return attach_stats(CorpusManifest.load(manifest_path), load_stats(str(self.stats_path)))


@click.group()
@click.version_option(version=__version__)
@click.option('--seed', type=int, default=None, help='Random seed (overrides the config file)')
@click.option('--config', 'config_path', default=None, help='YAML config file path')
@click.option('--out-dir', default=None, help='Experiment directory (overrides the config file)')
@click.option('--verbose', '-v', is_flag=True, help='Debug logging')
@click.option('--quiet', '-q', is_flag=True, help='Warnings only, no progress bars')
@click.pass_context
def cli(ctx, seed, config_path, out_dir, verbose, quiet):
    """cyclevc - many-to-many voice conversion with cyclic spectral modeling and a GAN vocoder"""
    _setup_logging(verbose, quiet)
    try:
        config = Config.load(config_path)
        if seed is not None:
            config.seed = seed
        if out_dir is not None:
            config.output_dir = out_dir
        config.validate()
    except Exception as e:
        click.echo(error_line(e), err=True)
        sys.exit(1)
    ctx.obj = Context(config, quiet)


@cli.command('ingest')
@click.option('--manifest', required=True, help='Corpus manifest (JSON)')
@click.option('--workers', type=int, default=None, help='Parallel extraction workers')
@click.pass_obj
@_fail_on_error
def ingest_command(obj: Context, manifest, workers):
    """Extract features for every manifest utterance"""
    corpus = CorpusManifest.load(manifest)
    workers = workers or obj.config.training.max_workers
    index = ingest(corpus, obj.config.features, str(obj.out_dir), obj.audit(), max_workers=workers)
    click.echo(f"✅ Ingested {len(index.records)} utterances ({len(index.failures)} failures) "
               f"into {obj.index_path.parent}")
    for failure in index.failures:
        click.echo(f"  ⚠️  {failure['utterance_id']}: {failure['message']}")


@cli.command('stats')
@click.option('--manifest', required=True, help='Corpus manifest (JSON)')
@click.pass_obj
@_fail_on_error
def stats_command(obj: Context, manifest):
    """Compute per-speaker log-F0 and power statistics on the training split"""
    corpus = CorpusManifest.load(manifest)
    index = FeatureIndex.load(str(obj.index_path))
    stats = compute_all_stats(corpus, index, str(obj.stats_path), obj.audit())
    for speaker_id, speaker in stats.items():
        click.echo(f"  {speaker_id}: log-F0 mean {speaker.logf0.mean:.4f}, std {speaker.logf0.std:.4f}, "
                   f"{speaker.voiced_frames}/{speaker.total_frames} voiced frames")
    click.echo(f"✅ Statistics written to {obj.stats_path}")


@cli.command('train-vae')
@click.option('--manifest', required=True, help='Corpus manifest (JSON)')
@click.option('--resume', default=None, help='VAE checkpoint to resume from')
@click.pass_obj
@_fail_on_error
def train_vae_command(obj: Context, manifest, resume):
    """Train the cyclic spectral model"""
    corpus = obj.manifest_with_stats(manifest)
    index = FeatureIndex.load(str(obj.index_path))
    result = train_vae(corpus, index, obj.config, str(obj.out_dir / "vae"), resume=resume,
                       audit=obj.audit(), progress=not obj.quiet)
    click.echo(f"✅ {result.steps} steps, checkpoint {result.checkpoint_path}")


@cli.command('train-vocoder')
@click.option('--manifest', required=True, help='Corpus manifest (JSON)')
@click.option('--vae-checkpoint', default=None, help='Frozen VAE checkpoint (default: <out-dir>/vae/vae_last.vcck)')
@click.pass_obj
@_fail_on_error
def train_vocoder_command(obj: Context, manifest, vae_checkpoint):
    """Train the vocoder on natural, reconstructed and cyclic conditioning"""
    corpus = obj.manifest_with_stats(manifest)
    index = FeatureIndex.load(str(obj.index_path))
    vae_checkpoint = vae_checkpoint or str(obj.out_dir / "vae" / "vae_last.vcck")
    result = train_vocoder(corpus, index, obj.config, vae_checkpoint, str(obj.out_dir / "vocoder"),
                           audit=obj.audit(), progress=not obj.quiet)
    click.echo(f"✅ {result.steps} steps, checkpoint {result.checkpoint_path}")


@cli.command('convert')
@click.option('--wav', 'wav_path', required=True, help='Source utterance (mono WAV)')
@click.option('--source', 'source_id', required=True, help='Source speaker id')
@click.option('--target', 'target_id', required=True, help='Target speaker id')
@click.option('--vae-checkpoint', required=True, help='VAE checkpoint')
@click.option('--vocoder-checkpoint', required=True, help='Vocoder checkpoint')
@click.option('--output', required=True, help='Output WAV path')
@click.pass_obj
@_fail_on_error
def convert_command(obj: Context, wav_path, source_id, target_id, vae_checkpoint, vocoder_checkpoint, output):
    """Convert one utterance from the source to the target speaker"""
    result = convert_utterance(wav_path, source_id, target_id, vae_checkpoint, vocoder_checkpoint, output,
                               seed=obj.config.seed)
    click.echo(f"✅ {result.output_path} ({result.n_frames} frames, {result.duration:.3f} s)")


@cli.command('evaluate')
@click.option('--pairs', required=True, help='Pairing list: "converted.wav reference.wav" per line')
@click.option('--output', default=None, help='Metrics CSV (default: <out-dir>/evaluation.csv)')
@click.option('--f0-min', type=float, default=None, help='F0 search floor in Hz')
@click.option('--f0-max', type=float, default=None, help='F0 search ceiling in Hz')
@click.option('--workers', type=int, default=None, help='Parallel evaluation workers')
@click.pass_obj
@_fail_on_error
def evaluate_command(obj: Context, pairs, output, f0_min, f0_max, workers):
    """DTW mel-cepstral distortion, log-F0 RMSE and U/V error of converted utterances"""
    output = output or str(obj.out_dir / "evaluation.csv")
    frame = evaluate(read_pairs(pairs), obj.config.features, output, f0_min=f0_min, f0_max=f0_max,
                     max_workers=workers or obj.config.training.max_workers)
    means = frame.iloc[-1]
    click.echo(f"📊 MCD {means['mcd']:.3f} dB, log-F0 RMSE {means['f0_rmse']:.4f}, "
               f"U/V error {means['uv_error']:.3f}")
    click.echo(f"📁 Metrics saved to: {output}")


@cli.command('inspect-checkpoint')
@click.argument('path')
@_fail_on_error
def inspect_checkpoint_command(path):
    """Print kind, version, step, config and array shapes of a checkpoint"""
    click.echo(json.dumps(checkpoint_summary(load_checkpoint(path)), indent=2, sort_keys=True, default=str))


@cli.command('make-synthetic')
@click.argument('out')
@click.option('--speakers', type=int, default=2, help='Number of speakers (2-4)')
@click.option('--train', 'n_train', type=int, default=8, help='Training utterances per speaker')
@click.option('--validation', 'n_validation', type=int, default=2, help='Validation utterances per speaker')
@click.option('--duration', type=float, default=1.0, help='Voiced duration per utterance in seconds')
@click.pass_obj
@_fail_on_error
def make_synthetic_command(obj: Context, out, speakers, n_train, n_validation, duration):
    """Write a synthetic parallel corpus and its manifest"""
    manifest = make_synthetic_corpus(out, speakers, n_train, n_validation, duration,
                                     obj.config.features.sample_rate, obj.config.seed)
    click.echo(f"✅ {len(manifest.utterances)} utterances, manifest {Path(out) / 'manifest.json'}")


if __name__ == '__main__':
    cli()
