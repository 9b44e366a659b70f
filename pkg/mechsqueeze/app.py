#!/usr/bin/env python

"""
    mechsqueeze command line script
    Created October 2026
    This program is free software; you can redistribute it and/or
    modify it under the terms of the GNU General Public License
    as published by the Free Software Foundation; either version 3
    of the License, or (at your option) any later version.
"""

from __future__ import absolute_import, print_function
import sys, os, time, json, logging
import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from . import base, config, optomech, markov, trajectories
from .exceptions import ConfigError, NumericalError, ValidationError

log = logging.getLogger(__name__)

commands = ['conditional', 'markov', 'bayes', 'sweep', 'mc-validate', 'preset']


def resolve_points(cfg, threads=1):
    """
    Parameter points of a run with optimal kappa and lambda worked out,
    once per value of g.
    """

    kappas = {}
    lams = {}
    out = []
    for pt in config.points(cfg):
        g = pt['g']
        params = cfg.params.replace(g=g)
        if pt['kappa'] == 'optimal' or pt['lambda'] == 'optimal':
            if g not in kappas:
                kappas[g] = optomech.optimal_kappa(params)
                print ('optimal kappa for g=%s is %.6g' %(g, kappas[g]))
        kappa = kappas[g] if pt['kappa'] == 'optimal' else pt['kappa']
        lam = pt['lambda']
        if lam == 'optimal':
            if g not in lams:
                scan, lams[g] = markov.lambda_scan(params.replace(kappa=kappas[g]),
                                                   numerics=cfg.numerics, threads=threads)
                print ('optimal lambda for g=%s is %.4f' %(g, lams[g]))
            lam = lams[g]
        out.append({'params': params.replace(kappa=kappa), 'lambda': lam,
                    'chi': pt['chi'], 'sweep_value': pt['sweep_value']})
    return out

def run_sweep(cfg, threads=None, path=None, write=True):
    """
    Run every point of a config, in parallel, and save the rows in input
    order. Failed points keep their row with the error in the status
    column.
    Returns:
        results dataframe
    """

    if threads is None:
        threads = cfg.numerics.threads
    pts = resolve_points(cfg, threads)
    log.info('running %s points of %s with %s threads' %(len(pts), cfg.feedback, threads))
    rows = Parallel(n_jobs=threads)(delayed(base.run_point)(p['params'], cfg.feedback,
                    p['lambda'], p['chi'], p['sweep_value'], cfg.numerics,
                    cfg.output.db_convention, cfg.units, cfg.output.timing) for p in pts)
    df = base.results_table(rows)
    if write == True:
        save_results(df, cfg, path)
    return df

def header(cfg):
    """Comment block recording the resolved config"""

    from . import __version__
    lines = ['mechsqueeze version %s' %__version__,
             'created %s' %time.strftime('%Y-%m-%d %H:%M:%S'),
             'sweep ranges are expanded to the values listed below',
             'config:']
    lines += config.emit_config(cfg).splitlines()
    return ''.join('# %s\n' %l for l in lines)

def output_path(cfg, path=None):
    if path:
        return path
    if cfg.output.path:
        return cfg.output.path
    name = cfg.preset or cfg.feedback
    return '%s.%s' %(name, cfg.output.format)

def save_results(df, cfg, path=None):
    """Write results as csv with a commented header or as json"""

    path = output_path(cfg, path)
    d = os.path.dirname(path)
    if d != '' and not os.path.exists(d):
        os.makedirs(d)
    if cfg.output.format == 'json':
        from . import __version__
        rows = json.loads(df.to_json(orient='records', double_precision=15))
        data = {'version': __version__, 'config': config.config_options(cfg),
                'columns': list(df.columns), 'rows': rows}
        with open(path, 'w') as f:
            json.dump(data, f, indent=1)
    else:
        with open(path, 'w') as f:
            f.write(header(cfg))
            df.to_csv(f, index=False, float_format='%.12e', na_rep='null')
    print ('results saved to %s' %path)
    return path

def mismatched_reference(reference, estimate, z_max=4.0):
    """Reference shifted well outside the error bars, for checking that the
       comparison can fail"""

    ref = np.array(reference, dtype=float)
    i, j = np.unravel_index(np.argmax(estimate.stderr), ref.shape)
    shift = max(10*z_max*estimate.stderr[i,j], 1e-3)
    ref[i,j] += shift
    if i != j:
        ref[j,i] += shift
    return ref

def mc_validate(cfg, self_test=False, threads=None, path=None, z_max=4.0):
    """
    Check the deterministic excess noise of the configured law against a
    Monte-Carlo ensemble, at the first point of the config.
    Returns:
        dict from trajectories.validate_against_reference and the z table
    """

    n = cfg.numerics
    if n.n_traj < 100:
        raise ValidationError('mc-validate needs numerics.n_traj >= 100, got %s' %n.n_traj)
    if threads is None:
        threads = n.threads
    pt = resolve_points(cfg, threads)[0]
    params = pt['params']
    law = base.get_feedback_law(cfg.feedback, params, lam=pt['lambda'], chi=pt['chi'],
                                numerics=n)
    reference = law.excess().mean()
    spec = trajectories.EnsembleSpec.from_numerics(params, n)
    print ('simulating %s trajectories of %s, g=%s, kappa=%s' %(spec.n_traj, law.name,
            params.g, params.kappa))
    est = trajectories.ensemble_excess_noise(law, params, spec, threads)
    if self_test == True:
        reference = mismatched_reference(reference, est, z_max)
    res = trajectories.validate_against_reference(est, reference, z_max=z_max)
    table = est.table()
    table.insert(2, 'reference', np.asarray(reference).ravel())
    path = path or cfg.output.path or 'mc_validate.csv'
    table.to_csv(path, index=False, float_format='%.12e')
    print (table.to_string(index=False))
    print ('worst entry %s with |z| = %.3f, %s' %(res['worst_entry'], res['worst_z'],
            'pass' if res['pass'] else 'FAIL'))
    print ('results saved to %s' %path)
    res['table'] = table
    return res


class WorkFlow(object):
    """Class for running a configured calculation"""

    def __init__(self, cfg, threads=None, out=None):
        self.config = cfg
        self.threads = threads if threads is not None else cfg.numerics.threads
        self.out = out
        return

    def setup(self):
        """Check the run can go ahead"""

        pd.set_option('display.width', 120)
        cfg = self.config
        npts = len(list(config.points(cfg)))
        if npts == 0:
            print ('no parameter points in config')
            return False
        print ('%s feedback, %s points, %s model' %(cfg.feedback, npts,
               'RWA' if cfg.params.rwa else 'full'))
        return True

    def run(self):
        """Run the sweep and report failed points"""

        df = run_sweep(self.config, self.threads, self.out)
        bad = df[df.status != 'ok']
        if len(bad) > 0:
            print ('%s of %s points failed' %(len(bad), len(df)))
            print (bad[['g','kappa','sweep_value','status']].to_string(index=False))
        return df

    def validate(self, self_test=False):
        return mc_validate(self.config, self_test, self.threads, self.out)


def cli_overrides(opts):
    o = {'run': {}, 'numerics': {}, 'output': {}}
    if opts.out is not None:
        o['output']['path'] = opts.out
    if opts.format is not None:
        o['output']['format'] = opts.format
    if opts.seed is not None:
        o['numerics']['base_seed'] = opts.seed
    if opts.db_convention is not None:
        o['output']['db_convention'] = opts.db_convention
    if opts.threads is not None:
        o['numerics']['threads'] = opts.threads
    return o

def set_command_feedback(raw, cmd):
    """Point the run at the feedback family of a subcommand"""

    run = raw['run']
    fb = run.get('feedback', 'none')
    if cmd == 'conditional':
        run.update({'feedback': 'none', 'lambda': '', 'chi': ''})
    elif cmd == 'markov' and not fb.startswith('markov'):
        run.update({'feedback': 'markov_ideal', 'chi': ''})
    elif cmd == 'bayes' and not fb.startswith('bayes'):
        run.update({'feedback': 'bayes_ideal', 'lambda': ''})
    return raw

def main(argv=None):
    "Run the application"

    from optparse import OptionParser
    parser = OptionParser(usage='%prog [options] '
                          'conditional|markov|bayes|sweep|mc-validate|preset <name>')
    parser.add_option("-c", "--config", dest="config",
                        help="Configuration file", metavar="FILE")
    parser.add_option("-o", "--out", dest="out",
                        help="Output file", metavar="FILE")
    parser.add_option("-f", "--format", dest="format",
                        help="Output format, csv or json")
    parser.add_option("-s", "--seed", dest="seed",
                        help="Base seed of the random streams")
    parser.add_option("-d", "--db-convention", dest="db_convention",
                        help="Decibel convention, paper or vacuum")
    parser.add_option("-t", "--threads", dest="threads",
                        help="Number of worker processes")
    parser.add_option("-w", "--write-config", dest="write_config",
                        help="Write a template config file", metavar="FILE")
    parser.add_option("--self-test", dest="self_test", action="store_true",
                        default=False, help="Compare mc-validate against a wrong reference")
    parser.add_option("-v", "--verbose", dest="verbose", action="store_true",
                        default=False, help="Show progress and convergence logs")
    parser.add_option("--version", dest="version", action="store_true",
                        help="Get version")
    opts, remainder = parser.parse_args(argv)

    if opts.version == True:
        from . import __version__
        print ('mechsqueeze version %s' %__version__)
        return 0
    if opts.write_config is not None:
        config.write_config(opts.write_config, defaults=config.baseoptions)
        return 0
    logging.basicConfig(level=logging.DEBUG if opts.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    if len(remainder) == 0:
        parser.print_help()
        return 0
    cmd = remainder[0]
    if cmd not in commands:
        print ('unknown command %s, use one of %s' %(cmd, ', '.join(commands)))
        return 2
    try:
        overrides = cli_overrides(opts)
        if cmd == 'preset':
            if len(remainder) < 2:
                raise ConfigError('preset needs a name, one of %s' %', '.join(config.presets))
            overrides['run']['preset'] = remainder[1]
        text = ''
        if opts.config is not None:
            if not os.path.exists(opts.config):
                raise ConfigError('no such config file %s' %opts.config)
            with open(opts.config) as f:
                text = f.read()
        raw = config.read_options(text, overrides)
        raw = set_command_feedback(raw, cmd)
        cfg = config.build_config(raw)
        W = WorkFlow(cfg, out=opts.out)
        if W.setup() != True:
            return 2
        if cmd == 'mc-validate':
            res = W.validate(opts.self_test)
            return 0 if res['pass'] else 4
        df = W.run()
        return 0 if (df.status == 'ok').all() else 3
    except ConfigError as e:
        print ('config error: %s' %e)
        return e.exit_code
    except NumericalError as e:
        print ('numerical failure: %s' %e)
        return e.exit_code

if __name__ == '__main__':
    sys.exit(main())
