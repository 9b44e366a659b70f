#!/usr/bin/env python

"""
    mechsqueeze config
    Created October 2026
    This program is free software; you can redistribute it and/or
    modify it under the terms of the GNU General Public License
    as published by the Free Software Foundation; either version 3
    of the License, or (at your option) any later version.

    Run configurations are read either as INI sections or as flat dotted
    keys (params.g = 0.05). Keys without a dot belong to the run section.
"""

from __future__ import absolute_import, print_function
import os, re
from collections import OrderedDict
from dataclasses import dataclass, field, replace
import configparser
from .exceptions import ParseError, ValidationError, UnknownPreset
from .gaussian import conventions, convention_aliases
from .dynamics import Numerics, methods
from .optomech import SystemParams
from .bayes import Units
from .utilities import grid

path = os.path.dirname(os.path.abspath(__file__))
presetsdir = os.path.join(path, 'presets')
presets = ['fig1a', 'fig2_top', 'fig2_bottom', 'fig3', 'fig4']
feedbacks = ['none','markov_ideal','markov_cavity','markov_mechanical','markov_force',
             'bayes_ideal','bayes_mechanical','bayes_force']
sweep_variables = ['kappa', 'g', 'lambda', 'chi']
formats = ['csv', 'json']
DEFAULT_CHI = 0.1

baseoptions = OrderedDict()
baseoptions['run'] = {'feedback': 'none',
                'lambda': '', #force feedback parameter, list or optimal
                'chi': '', #actuation cost, list
                'preset': ''}
baseoptions['params'] = {'omega_m': 1.0,
                'g': 0.05, #one value or a comma separated series
                'kappa': 1.0, #or optimal
                'gamma': 1e-4,
                'nbar': 10.0,
                'eta': 1.0,
                'rwa': 'yes'}
baseoptions['sweep'] = {'variable': '', #kappa, g, lambda or chi
                'values': '',
                'range': '', #start,stop,num
                'log_spaced': 'yes'}
baseoptions['numerics'] = {'dt': '', 'dt_sde': '', 'tol_period': 1e-9,
                'max_periods': 1000000, 'method': 'shooting',
                'n_traj': 5000, 'base_seed': 12345,
                't_end': '', 'burn_in': '', 'n_batches': 20,
                'threads': ''}
baseoptions['output'] = {'path': '', 'format': 'csv',
                'db_convention': 'paper_absolute',
                'timing': 'no'}
baseoptions['units'] = {'hbar_over_xzpf': 1e-20,
                'omega_m_si': 6283185.307179586}


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    log_spaced: bool = True


@dataclass(frozen=True)
class OutputSpec:
    path: str = ''
    format: str = 'csv'
    db_convention: str = 'paper_absolute'
    timing: bool = False


@dataclass(frozen=True)
class RunConfig:
    """
    Fully resolved run. g, lambda and chi hold series, the run covers
    their product with the sweep values. lam is None, a tuple or the
    string optimal.
    """

    params: SystemParams = field(default_factory=SystemParams)
    feedback: str = 'none'
    g: tuple = (0.05,)
    kappa_optimal: bool = False
    lam: object = None
    chi: tuple = None
    sweep: SweepSpec = None
    numerics: Numerics = field(default_factory=Numerics)
    output: OutputSpec = field(default_factory=OutputSpec)
    units: Units = field(default_factory=Units)
    preset: str = None


def default_threads():
    return os.environ.get('MECHSQUEEZE_THREADS', '1')

def write_config(conffile='default.conf', defaults=None):
    """Write a default config file"""

    if defaults is None:
        defaults = baseoptions
    if not os.path.exists(conffile):
        cp = create_config_parser_from_dict(defaults, list(baseoptions.keys()))
        with open(conffile, 'w') as f:
            cp.write(f)
        print ('wrote config file %s' %conffile)
    return conffile

def create_config_parser_from_dict(data=None, sections=None, **kwargs):
    """Helper method to create a ConfigParser from a dict of the form shown in
       baseoptions"""

    if data is None:
        data = baseoptions
    if sections is None:
        sections = list(data.keys())
    cp = configparser.ConfigParser(interpolation=None)
    for s in sections:
        cp.add_section(s)
        if not s in data:
            continue
        for name in sorted(data[s]):
            val = data[s][name]
            if type(val) in (list, tuple):
                val = ','.join(str(i) for i in val)
            cp.set(s, name, str(val))
    #kwargs override keys in whichever section holds them
    for s in cp.sections():
        opts = cp.options(s)
        for k in kwargs:
            if k in opts:
                cp.set(s, k, str(kwargs[k]))
    return cp

def _check_key(section, key, line=None):
    if section not in baseoptions:
        raise ParseError('unknown section %s' %section, line, key)
    if key not in baseoptions[section]:
        raise ParseError('unknown key', line, '%s.%s' %(section, key))

def _read_flat(text):
    opts = OrderedDict((s, {}) for s in baseoptions)
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line == '' or line[0] in '#;':
            continue
        m = re.match(r'^([A-Za-z_][\w.]*)\s*[=:]\s*(.*)$', line)
        if m is None:
            raise ParseError('expected key = value, got %r' %line, i)
        key, val = m.group(1).lower(), m.group(2).strip()
        if '.' in key:
            section, key = key.split('.', 1)
        else:
            section = 'run'
        _check_key(section, key, i)
        opts[section][key] = val
    return opts

def _read_ini(text):
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ParseError(str(e).splitlines()[0], getattr(e, 'lineno', None))
    opts = OrderedDict((s, {}) for s in baseoptions)
    for s in cp.sections():
        for k in cp.options(s):
            line = _find_line(text, k)
            _check_key(s, k, line)
            opts[s][k] = cp.get(s, k).strip()
    return opts

def _find_line(text, key):
    for i, raw in enumerate(text.splitlines(), 1):
        if re.match(r'^\s*%s\s*[=:]' %re.escape(key), raw, re.I):
            return i
    return None

def get_options(text):
    """
    Read config text into a section/key map of raw strings. INI text is
    recognised by its section headers, anything else is read as flat
    dotted keys.
    """

    if re.search(r'^\s*\[[^\]]+\]\s*$', text, re.M):
        return _read_ini(text)
    return _read_flat(text)

def check_options(opts):
    """Fill missing options with the defaults"""

    out = OrderedDict()
    for s in baseoptions:
        out[s] = dict((k, str(v)) for k, v in baseoptions[s].items())
        out[s].update(opts.get(s, {}))
    if out['numerics']['threads'] == '':
        out['numerics']['threads'] = default_threads()
    return out

def merge_options(base, overrides):
    """Overlay a section/key map on another, later keys win"""

    out = OrderedDict((s, dict(base.get(s, {}))) for s in baseoptions)
    for s in overrides or {}:
        for k, v in overrides[s].items():
            _check_key(s, k)
            out[s][k] = str(v)
    return out

def preset_options(name):
    """Raw options of a shipped preset"""

    fname = os.path.join(presetsdir, '%s.conf' %name)
    if name not in presets or not os.path.exists(fname):
        raise UnknownPreset('no such preset %s, valid names are %s' %(name, ', '.join(presets)))
    with open(fname) as f:
        opts = get_options(f.read())
    opts['run']['preset'] = name
    return opts

def read_options(text, overrides=None):
    """Raw options with any preset expanded and overrides applied"""

    opts = get_options(text)
    name = opts['run'].get('preset', '')
    if overrides and overrides.get('run', {}).get('preset'):
        name = overrides['run']['preset']
    if name:
        opts = merge_options(preset_options(name), opts)
    return merge_options(opts, overrides)


class _Reader(object):
    """Typed access to raw options that collects every violation"""

    def __init__(self, opts):
        self.opts = opts
        self.errors = []

    def raw(self, s, k):
        return self.opts[s][k].strip()

    def _convert(self, s, k, conv, kind, optional=False):
        v = self.raw(s, k)
        if v == '' and optional:
            return None
        try:
            return conv(v)
        except (ValueError, TypeError):
            self.errors.append('%s.%s must be %s, got %r' %(s, k, kind, v))

    def float(self, s, k, optional=False):
        return self._convert(s, k, float, 'a number', optional)

    def int(self, s, k, optional=False):
        return self._convert(s, k, _to_int, 'an integer', optional)

    def bool(self, s, k):
        return self._convert(s, k, _to_bool, 'yes or no')

    def floats(self, s, k):
        v = self.raw(s, k)
        if v == '':
            return None
        return self._convert(s, k, lambda x: tuple(float(i) for i in x.split(',')),
                             'a comma separated list of numbers')

def _to_int(v):
    f = float(v)
    if f != int(f):
        raise ValueError(v)
    return int(v) if re.match(r'^[+-]?\d+$', v) else int(f)

def _to_bool(v):
    v = v.lower()
    if v in ('yes', 'true', 'on', '1'):
        return True
    if v in ('no', 'false', 'off', '0'):
        return False
    raise ValueError(v)

def _params(r):
    kw = {}
    for k in ['omega_m', 'gamma', 'nbar', 'eta']:
        kw[k] = r.float('params', k)
    kw['rwa'] = r.bool('params', 'rwa')
    g = r.floats('params', 'g')
    if g is None:
        r.errors.append('params.g is empty')
    elif any(i < 0 for i in g):
        r.errors.append('params.g must be non-negative')
    kappa_optimal = r.raw('params', 'kappa').lower() == 'optimal'
    kw['kappa'] = 1.0 if kappa_optimal else r.float('params', 'kappa')
    if g:
        kw['g'] = g[0]
    if any(v is None for v in kw.values()):
        return None, g, kappa_optimal
    try:
        params = SystemParams(**kw)
    except ValidationError as e:
        r.errors.extend(e.violations)
        params = None
    return params, g, kappa_optimal

def _sweep(r):
    variable = r.raw('sweep', 'variable').lower()
    if variable == '':
        return None
    log_spaced = r.bool('sweep', 'log_spaced')
    if variable not in sweep_variables:
        r.errors.append('sweep.variable must be one of %s, got %s'
                        %(', '.join(sweep_variables), variable))
        return None
    values = r.floats('sweep', 'values')
    if values is None and r.raw('sweep', 'range') != '':
        rng = r.floats('sweep', 'range')
        if rng is not None:
            if len(rng) != 3 or rng[2] < 1 or rng[2] != int(rng[2]):
                r.errors.append('sweep.range must be start,stop,num')
            elif log_spaced and min(rng[:2]) <= 0:
                r.errors.append('a log spaced sweep.range needs positive bounds')
            else:
                values = tuple(float(v) for v in grid(rng[0], rng[1], int(rng[2]), log=log_spaced))
    if not values:
        r.errors.append('sweep over %s needs sweep.values or sweep.range' %variable)
        return None
    if variable == 'lambda':
        if min(values) < 0:
            r.errors.append('lambda sweep values must be non-negative')
    elif min(values) <= 0:
        r.errors.append('%s sweep values must be strictly positive' %variable)
    return SweepSpec(variable, values, bool(log_spaced))

def _numerics(r):
    kw = {'dt': r.float('numerics', 'dt', True),
          'dt_sde': r.float('numerics', 'dt_sde', True),
          'tol_period': r.float('numerics', 'tol_period'),
          'max_periods': r.int('numerics', 'max_periods'),
          'method': r.raw('numerics', 'method').lower(),
          'n_traj': r.int('numerics', 'n_traj'),
          'base_seed': r.int('numerics', 'base_seed'),
          't_end': r.float('numerics', 't_end', True),
          'burn_in': r.float('numerics', 'burn_in', True),
          'n_batches': r.int('numerics', 'n_batches'),
          'threads': r.int('numerics', 'threads')}
    for k in ['dt', 'dt_sde', 'tol_period', 't_end']:
        if kw[k] is not None and not kw[k] > 0:
            r.errors.append('numerics.%s must be positive' %k)
    for k in ['max_periods', 'n_traj', 'n_batches']:
        if kw[k] is not None and kw[k] < 1:
            r.errors.append('numerics.%s must be at least 1' %k)
    if kw['base_seed'] is not None and not 0 <= kw['base_seed'] < 2**64:
        r.errors.append('numerics.base_seed must be an unsigned 64 bit integer')
    if kw['threads'] is not None and kw['threads'] == 0:
        r.errors.append('numerics.threads must not be 0')
    if kw['method'] not in methods:
        r.errors.append('numerics.method must be one of %s' %', '.join(methods))
    if kw['burn_in'] is not None and kw['burn_in'] < 0:
        r.errors.append('numerics.burn_in must be non-negative')
    if any(v is None for k, v in kw.items() if k not in ('dt','dt_sde','t_end','burn_in')):
        return None
    return Numerics(**kw)

def _output(r):
    fmt = r.raw('output', 'format').lower()
    if fmt not in formats:
        r.errors.append('output.format must be csv or json, got %s' %fmt)
    conv = r.raw('output', 'db_convention')
    conv = convention_aliases.get(conv, conv)
    if conv not in conventions:
        r.errors.append('output.db_convention must be one of paper, vacuum, %s'
                        %', '.join(conventions))
    timing = r.bool('output', 'timing')
    return OutputSpec(r.raw('output', 'path'), fmt, conv, bool(timing))

def _units(r):
    kw = dict((k, r.float('units', k)) for k in ['hbar_over_xzpf', 'omega_m_si'])
    for k, v in kw.items():
        if v is not None and not v > 0:
            r.errors.append('units.%s must be positive' %k)
    if any(v is None for v in kw.values()):
        return None
    return Units(**kw)

def build_config(opts):
    """
    Validate raw options and build a RunConfig. Every violation found is
    reported together in one ValidationError.
    """

    opts = check_options(opts)
    r = _Reader(opts)
    feedback = r.raw('run', 'feedback').lower()
    if feedback not in feedbacks:
        r.errors.append('run.feedback must be one of %s, got %s' %(', '.join(feedbacks), feedback))
    params, g, kappa_optimal = _params(r)
    sweep = _sweep(r)
    variable = sweep.variable if sweep else None

    lam = None
    if r.raw('run', 'lambda').lower() == 'optimal':
        lam = 'optimal'
    else:
        lam = r.floats('run', 'lambda')
        if lam is not None and min(lam) < 0:
            r.errors.append('run.lambda must be non-negative')
    chi = r.floats('run', 'chi')
    if chi is not None and min(chi) <= 0:
        r.errors.append('run.chi must be positive')

    if feedback == 'markov_force':
        if lam is None and variable != 'lambda':
            r.errors.append('markov_force feedback needs run.lambda')
    elif lam is not None:
        r.errors.append('run.lambda is only valid with markov_force feedback')
    if variable == 'lambda':
        if feedback != 'markov_force':
            r.errors.append('a lambda sweep needs markov_force feedback')
        if lam is not None:
            r.errors.append('run.lambda conflicts with a lambda sweep')
    if feedback.startswith('bayes'):
        if chi is None and variable != 'chi':
            chi = (DEFAULT_CHI,)
    elif chi is not None:
        r.errors.append('run.chi is only valid with bayes feedback')
    if variable == 'chi':
        if not feedback.startswith('bayes'):
            r.errors.append('a chi sweep needs bayes feedback')
        if r.raw('run', 'chi') != '':
            r.errors.append('run.chi conflicts with a chi sweep')
        chi = None
    if variable == 'kappa' and kappa_optimal:
        r.errors.append('params.kappa = optimal conflicts with a kappa sweep')
    if variable == 'g' and g is not None and len(g) > 1:
        r.errors.append('a series in params.g conflicts with a g sweep')

    numerics = _numerics(r)
    output = _output(r)
    units = _units(r)
    if r.errors:
        raise ValidationError(r.errors)
    return RunConfig(params=params, feedback=feedback, g=g, kappa_optimal=kappa_optimal,
                     lam=lam, chi=chi, sweep=sweep, numerics=numerics, output=output,
                     units=units, preset=r.raw('run', 'preset') or None)

def parse_config(text, overrides=None):
    """
    Parse config text, INI or flat dotted keys, into a validated RunConfig.
    Args:
        text: config document
        overrides: section/key map applied after the document
    """

    return build_config(read_options(text, overrides))

def read_config(conffile, overrides=None):
    """Parse a config file"""

    with open(conffile) as f:
        text = f.read()
    return parse_config(text, overrides)

def preset(name, overrides=None):
    """RunConfig of a named preset"""

    return build_config(merge_options(preset_options(name), overrides))

def _fmt(v):
    if v is None:
        return ''
    if isinstance(v, bool):
        return 'yes' if v else 'no'
    if isinstance(v, (tuple, list)):
        return ','.join(_fmt(i) for i in v)
    if isinstance(v, float):
        return repr(float(v))
    return str(v)

def config_options(config):
    """Section/key map of raw strings describing a RunConfig"""

    p, n, o, u = config.params, config.numerics, config.output, config.units
    opts = OrderedDict()
    opts['run'] = {'feedback': config.feedback, 'lambda': _fmt(config.lam),
                   'chi': _fmt(config.chi), 'preset': config.preset or ''}
    opts['params'] = {'omega_m': _fmt(p.omega_m), 'g': _fmt(config.g),
                      'kappa': 'optimal' if config.kappa_optimal else _fmt(p.kappa),
                      'gamma': _fmt(p.gamma), 'nbar': _fmt(p.nbar),
                      'eta': _fmt(p.eta), 'rwa': _fmt(p.rwa)}
    s = config.sweep
    opts['sweep'] = {'variable': s.variable if s else '',
                     'values': _fmt(s.values) if s else '', 'range': '',
                     'log_spaced': _fmt(s.log_spaced if s else True)}
    opts['numerics'] = dict((k, _fmt(getattr(n, k))) for k in baseoptions['numerics'])
    opts['output'] = {'path': o.path, 'format': o.format,
                      'db_convention': o.db_convention, 'timing': _fmt(o.timing)}
    opts['units'] = dict((k, _fmt(float(getattr(u, k)))) for k in baseoptions['units'])
    return opts

def emit_config(config):
    """Resolved config as INI text, parse_config reads it back unchanged"""

    opts = config_options(config)
    lines = []
    for s in opts:
        lines.append('[%s]' %s)
        for k in opts[s]:
            lines.append('%s = %s' %(k, opts[s][k]))
        lines.append('')
    return '\n'.join(lines)

def points(config):
    """
    Parameter points of a run in output order: g series, then chi, then
    lambda, then the sweep values. kappa and lambda may still be the
    string optimal, the caller resolves them.
    """

    sweep = config.sweep
    values = sweep.values if sweep else (None,)
    gs = config.g if not (sweep and sweep.variable == 'g') else (None,)
    chis = config.chi if config.chi is not None else (None,)
    if config.lam is None or config.lam == 'optimal':
        lams = (config.lam,)
    else:
        lams = config.lam
    for g in gs:
        for chi in chis:
            for lam in lams:
                for v in values:
                    pt = {'g': g, 'kappa': 'optimal' if config.kappa_optimal
                          else config.params.kappa, 'lambda': lam, 'chi': chi,
                          'sweep_value': v}
                    if sweep is not None:
                        pt[sweep.variable] = v
                    yield pt
