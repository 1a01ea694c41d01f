#!/usr/bin/env python3
"""
DPQ laboratory - command line launcher

    dpq train-toy --out fp.dpq [--dataset eight-gaussians --epochs 200]
    dpq quantize fp.dpq --method dpq --d 4 --k 256 --tau 0.05 --out q.dpq
    dpq calibrate q.dpq fp.dpq --epochs 5 --lr 1e-4 --out qc.dpq
    dpq sample qc.dpq --sampler ddim --steps 100 --n 4096 --out samples.csv
    dpq eval samples.csv reference.csv --out quality.csv
    dpq report qc.dpq --out size.csv
    dpq trace fp.dpq qc.dpq --mode free --out trace.csv

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

import argparse
import os
import sys
from typing import Callable, Dict, List

# Add project root to path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.append(project_root)

from calibration.calibration_system import HISTORY_HEADER, CalibConfig, calibrate
from checkpoint.checkpoint_format import load, save
from cli.run_config import RunConfig, check_group_dim, resolve
from diffusion.datasets import GENERATORS, ToyDataset, toy_dataset
from diffusion.denoiser import Denoiser, init_denoiser
from diffusion.samplers import sample
from diffusion.schedule import Schedule, make_schedule
from diffusion.training import train_denoiser
from metrics.error_trace import TRACE_MODES, block_error_trace
from metrics.quality import sample_quality
from metrics.size_report import size_report
from numerics.rng import Rng
from quantization.codebook_pool import PROJECTION_RULES
from quantization.model_quantizer import METHODS, quantizable_indices, quantize_model
from utils.csv_io import read_points, write_points, write_rows
from utils.errors import CalibrationError, DPQError, UsageError

# child streams of the global seed
STREAM_DATA = 1
STREAM_INIT = 2
STREAM_TRAIN = 3
STREAM_QUANTIZE = 4
STREAM_CALIBRATE = 5
STREAM_SAMPLE = 6
STREAM_TRACE = 7

PATH_KEYS = ('input', 'model', 'original', 'samples', 'reference', 'fp', 'quantized',
             'out', 'curve', 'data_out', 'log', 'quality')
OPTION_KEYS = ('command', 'config', 'verbose', 'modes')


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(parser: argparse.ArgumentParser):
    """Flags every subcommand accepts"""
    parser.add_argument('--seed', type=int, default=None, help='global seed (else $DPQ_SEED, else config)')
    parser.add_argument('--config', default=None, help='key=value file overriding the defaults')
    parser.add_argument('--threads', type=int, default=None, help='worker cap (runs are sequential)')
    parser.add_argument('--verbose', action='store_true', help='print per-epoch / per-layer progress')


def _dataset_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--dataset', choices=sorted(GENERATORS), default=None)
    parser.add_argument('--dataset-size', dest='dataset_size', type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    """Argument parser for every subcommand"""
    parser = _Parser(prog='dpq', description='Diffusion product quantization laboratory')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('train-toy', help='train a floating toy denoiser')
    _common(p)
    _dataset_flags(p)
    p.add_argument('--hidden', type=int, default=None)
    p.add_argument('--depth', type=int, default=None)
    p.add_argument('--time-dim', dest='time_dim', type=int, default=None)
    p.add_argument('--timesteps', dest='T', type=int, default=None)
    p.add_argument('--beta-start', dest='beta_start', type=float, default=None)
    p.add_argument('--beta-end', dest='beta_end', type=float, default=None)
    p.add_argument('--epochs', dest='train_epochs', type=int, default=None)
    p.add_argument('--lr', dest='train_lr', type=float, default=None)
    p.add_argument('--batch-size', dest='batch_size', type=int, default=None)
    p.add_argument('--out', required=True, help='checkpoint path')
    p.add_argument('--curve', default=None, help='training curve CSV (epoch,loss)')
    p.add_argument('--data-out', dest='data_out', default=None, help='dataset points CSV (x,y)')

    p = sub.add_parser('quantize', help='quantize a floating checkpoint')
    _common(p)
    p.add_argument('input')
    p.add_argument('--method', choices=METHODS, default=None)
    p.add_argument('--d', type=int, default=None)
    p.add_argument('--k', type=int, default=None)
    p.add_argument('--tau', type=float, default=None)
    p.add_argument('--bits', type=int, default=None, help='preset: 1,2,3,4 -> d=8,4,3,2 (uniform: bit-width)')
    p.add_argument('--pool-capacity', dest='pool_capacity', type=int, default=None, help='0 = mn/(16 d^2)')
    p.add_argument('--projection', choices=PROJECTION_RULES, default=None)
    p.add_argument('--kmeans-iters', dest='kmeans_iters', type=int, default=None)
    p.add_argument('--vq-iters', dest='vq_iters', type=int, default=None)
    p.add_argument('--out', required=True)

    p = sub.add_parser('calibrate', help='calibrate a quantized checkpoint')
    _common(p)
    _dataset_flags(p)
    p.add_argument('model')
    p.add_argument('original', help='floating checkpoint the model was quantized from')
    p.add_argument('--epochs', dest='calib_epochs', type=int, default=None)
    p.add_argument('--lr', dest='calib_lr', type=float, default=None)
    p.add_argument('--reassign-every', dest='reassign_every', type=int, default=None)
    p.add_argument('--batch-size', dest='batch_size', type=int, default=None)
    p.add_argument('--no-reassign', dest='reassign', action='store_const', const=False, default=None)
    p.add_argument('--no-round-fp16', dest='round_fp16', action='store_const', const=False, default=None)
    p.add_argument('--pool-search', dest='pool_search', action='store_const', const=True, default=None,
                   help='log the whole-pool search gap per step')
    p.add_argument('--eval-samples', dest='eval_samples', type=int, default=None)
    p.add_argument('--eval-steps', dest='eval_steps', type=int, default=None)
    p.add_argument('--out', required=True)
    p.add_argument('--log', default=None, help='per-step CSV log')
    p.add_argument('--quality', default=None, help='per-epoch quality CSV')

    p = sub.add_parser('sample', help='draw samples from a checkpoint')
    _common(p)
    p.add_argument('model')
    p.add_argument('--sampler', choices=('ddpm', 'ddim'), default=None)
    p.add_argument('--steps', type=int, default=None)
    p.add_argument('--eta', type=float, default=None)
    p.add_argument('--n', type=int, default=None)
    p.add_argument('--out', required=True)

    p = sub.add_parser('eval', help='score a sample CSV against a reference CSV')
    _common(p)
    _dataset_flags(p)
    p.add_argument('samples')
    p.add_argument('reference')
    p.add_argument('--swd-projections', dest='swd_projections', type=int, default=None)
    p.add_argument('--modes', action='store_true', help="add mode statistics of the configured dataset")
    p.add_argument('--out', required=True)

    p = sub.add_parser('report', help='storage report of a checkpoint')
    _common(p)
    p.add_argument('model')
    p.add_argument('--out', required=True)

    p = sub.add_parser('trace', help='per-block error trace of two checkpoints')
    _common(p)
    p.add_argument('fp')
    p.add_argument('quantized')
    p.add_argument('--mode', choices=TRACE_MODES, default=None)
    p.add_argument('--chains', dest='trace_chains', type=int, default=None)
    p.add_argument('--steps', dest='trace_steps', type=int, default=None)
    p.add_argument('--out', required=True)

    return parser


def _dataset(cfg: RunConfig) -> ToyDataset:
    """Toy dataset named by the settings, drawn from its own seed stream"""
    return toy_dataset(cfg['dataset'], cfg['dataset_size'], Rng(cfg['seed']).spawn(STREAM_DATA))


def _schedule(model: Denoiser, cfg: RunConfig) -> Schedule:
    """The schedule the model was trained with, else the configured one"""
    params = model.metadata.get('schedule')
    if params:
        return make_schedule(params['T'], params['beta_start'], params['beta_end'])
    return make_schedule(cfg['T'], cfg['beta_start'], cfg['beta_end'])


def _done(message: str):
    print(f"✅ {message}", file=sys.stderr)


def cmd_train_toy(cfg: RunConfig, verbose: bool):
    """Train a floating denoiser and write its checkpoint"""
    rng = Rng(cfg['seed'])
    data = _dataset(cfg)
    s = make_schedule(cfg['T'], cfg['beta_start'], cfg['beta_end'])
    model = init_denoiser(rng.spawn(STREAM_INIT), hidden=cfg['hidden'], depth=cfg['depth'],
                          time_dim=cfg['time_dim'] or cfg['hidden'])
    model.metadata['dataset'] = {'name': cfg['dataset'], 'size': cfg['dataset_size'], 'seed': cfg['seed']}
    model = train_denoiser(data.points, s, cfg['train_epochs'], cfg['train_lr'], rng.spawn(STREAM_TRAIN),
                           batch_size=cfg['batch_size'], model=model, verbose=verbose)

    size = save(model, cfg.paths['out'])
    if cfg.paths.get('curve'):
        write_rows(cfg.paths['curve'], ['epoch', 'loss'], model.training_curve)
    if cfg.paths.get('data_out'):
        write_points(cfg.paths['data_out'], data.points)
    _done(f"trained {cfg['dataset']} denoiser, final loss {model.metadata.get('final_loss', float('nan')):.5f}, "
          f"wrote {cfg.paths['out']} ({size} bytes)")


def cmd_quantize(cfg: RunConfig, verbose: bool):
    """Quantize every hidden layer of a floating checkpoint"""
    model = load(cfg.paths['input'])
    method = cfg['method']
    if method != 'uniform':
        for i in quantizable_indices(model):
            check_group_dim(cfg['d'], model.layers[i].shape[1])

    q = quantize_model(model, method, d=cfg['d'], k=cfg['k'], tau=cfg['tau'],
                       rng=Rng(cfg['seed']).spawn(STREAM_QUANTIZE), kmeans_iters=cfg['kmeans_iters'],
                       vq_iters=cfg['vq_iters'], capacity=cfg['pool_capacity'] or None,
                       projection=cfg['projection'], bits=cfg['bits'], verbose=verbose)
    size = save(q, cfg.paths['out'])
    report = size_report(q)
    _done(f"{method}: size ratio {report.size_ratio:.3f}, bits_per_value {report.bits_per_value}, "
          f"wrote {cfg.paths['out']} ({size} bytes)")


def cmd_calibrate(cfg: RunConfig, verbose: bool):
    """Calibrate a quantized checkpoint against its floating original"""
    model = load(cfg.paths['model'])
    original = load(cfg.paths['original'])
    calib = CalibConfig(epochs=cfg['calib_epochs'], lr=cfg['calib_lr'], reassign_every=cfg['reassign_every'],
                        batch_size=cfg['batch_size'], round_fp16=cfg['round_fp16'], reassign=cfg['reassign'],
                        eval_samples=cfg['eval_samples'], eval_sampler=cfg['eval_sampler'],
                        eval_steps=cfg['eval_steps'], swd_projections=cfg['swd_projections'],
                        eval_seed=cfg['seed'], pool_search=cfg['pool_search'])
    try:
        run = calibrate(model, original, _dataset(cfg), _schedule(model, cfg), calib,
                        Rng(cfg['seed']).spawn(STREAM_CALIBRATE), verbose=verbose)
    except CalibrationError as e:
        for key, value in sorted(e.diagnostics.items()):
            print(f"   {key}: {value}", file=sys.stderr)
        raise

    size = save(run.model, cfg.paths['out'])
    if cfg.paths.get('log'):
        write_rows(cfg.paths['log'], HISTORY_HEADER, run.history.rows())
    if cfg.paths.get('quality'):
        rows = [(epoch,) + row for epoch, report in run.history.epoch_quality for row in report.rows()]
        write_rows(cfg.paths['quality'], ['epoch', 'metric', 'value', 'n', 'seed'], rows)
    curve = ', '.join(f"{swd:.4f}" for _, swd in run.history.swd_curve())
    _done(f"calibrated {calib.epochs} epochs, swd per epoch [{curve}], wrote {cfg.paths['out']} ({size} bytes)")


def cmd_sample(cfg: RunConfig, verbose: bool):
    """Write n samples as an x,y CSV"""
    model = load(cfg.paths['model'])
    points = sample(model, _schedule(model, cfg), cfg['n'], Rng(cfg['seed']).spawn(STREAM_SAMPLE),
                    sampler=cfg['sampler'], steps=cfg['steps'], eta=cfg['eta'])
    count = write_points(cfg.paths['out'], points)
    _done(f"wrote {count} samples to {cfg.paths['out']}")


def cmd_eval(cfg: RunConfig, verbose: bool, modes: bool = False):
    """Score samples against a reference point cloud"""
    samples = read_points(cfg.paths['samples'])
    reference = read_points(cfg.paths['reference'])
    data = _dataset(cfg) if modes else None
    report = sample_quality(samples, reference, cfg['swd_projections'], seed=cfg['seed'],
                            modes=None if data is None else data.modes,
                            mode_scale=None if data is None else data.mode_scale)
    write_rows(cfg.paths['out'], ['metric', 'value', 'n', 'seed'], report.rows())
    _done(f"swd {report.swd:.5f} over {report.n} samples, wrote {cfg.paths['out']}")


def cmd_report(cfg: RunConfig, verbose: bool):
    """Write the per-layer storage breakdown"""
    report = size_report(load(cfg.paths['model']))
    write_rows(cfg.paths['out'], ['layer', 'component', 'bits', 'ratio'], report.rows())
    _done(f"size ratio {report.size_ratio:.3f}, bits_per_value {report.bits_per_value}, "
          f"file {report.file_bytes} bytes (assignments stored as 8-bit bytes)")


def cmd_trace(cfg: RunConfig, verbose: bool):
    """Write the per-block error trace of a quantized model against its original"""
    fp = load(cfg.paths['fp'])
    q = load(cfg.paths['quantized'])
    trace = block_error_trace(fp, q, _schedule(fp, cfg), mode=cfg['mode'], n_chains=cfg['trace_chains'],
                              rng=Rng(cfg['seed']).spawn(STREAM_TRACE), steps=cfg['trace_steps'])
    write_rows(cfg.paths['out'], ['layer', 'timestep', 'mode', 'l2'], trace.rows())
    _done(f"{cfg['mode']} trace, final block error {trace.final_block_error():.5f}, wrote {cfg.paths['out']}")


COMMANDS: Dict[str, Callable] = {
    'train-toy': cmd_train_toy,
    'quantize': cmd_quantize,
    'calibrate': cmd_calibrate,
    'sample': cmd_sample,
    'eval': cmd_eval,
    'report': cmd_report,
    'trace': cmd_trace,
}


def run(argv: List[str]) -> int:
    """Run one subcommand and return its exit code"""
    parser = build_parser()
    try:
        args = vars(parser.parse_args(argv))
        paths = {key: args[key] for key in PATH_KEYS if key in args}
        flags = {key: value for key, value in args.items() if key not in PATH_KEYS and key not in OPTION_KEYS}
        cfg = resolve(args['command'], flags, paths=paths, config_file=args.get('config'))
        print(cfg.resolved_line(), file=sys.stderr)

        handler = COMMANDS[cfg.command]
        if cfg.command == 'eval':
            handler(cfg, args['verbose'], modes=args['modes'])
        else:
            handler(cfg, args['verbose'])
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"❌ {e}", file=sys.stderr)
        return 1
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 0
    except (DPQError, OSError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
