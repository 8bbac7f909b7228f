"""Versioned JSON run configuration: schema validation and typed views."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema

from .bppa import BppaConfig
from .checks import CHECK_NAMES
from .inertial import InertialOptions, InertialParams
from .problems import PROBLEMS

__all__ = ['ConfigError', 'CONFIG_SCHEMA', 'SolverSpec', 'RunConfig', 'load_config',
           'parse_config']

_NUM = {'type': 'number'}
_VEC = {'type': 'array', 'items': _NUM, 'minItems': 1}

_SOLVER = {
    'type': 'object',
    'required': ['kind'],
    'additionalProperties': False,
    'properties': {
        'kind': {'enum': ['bppa', 'ppa', 'inertial']},
        'config': {'type': 'object'},
        'x0': _VEC,
        'y0': _VEC,
    },
}

CONFIG_SCHEMA = {
    '$schema': 'http://json-schema.org/draft-07/schema#',
    'type': 'object',
    'required': ['version', 'problem'],
    'additionalProperties': False,
    'properties': {
        'version': {'const': 1},
        'problem': {
            'type': 'object',
            'required': ['name'],
            'additionalProperties': False,
            'properties': {
                'name': {'enum': sorted(PROBLEMS)},
                'parameters': {'type': 'object'},
                'seed': {'type': 'integer', 'minimum': 0, 'maximum': 2 ** 64 - 1},
            },
        },
        'solver': _SOLVER,
        'solvers': {'type': 'array', 'items': _SOLVER, 'minItems': 1},
        'output': {
            'type': 'object',
            'additionalProperties': False,
            'properties': {
                'trace_path': {'type': 'string', 'minLength': 1},
                'report_path': {'type': 'string', 'minLength': 1},
                'record_wall_time': {'type': 'boolean'},
            },
        },
        'checks': {
            'type': 'object',
            'additionalProperties': False,
            'properties': {
                'enabled': {'type': 'array', 'items': {'enum': list(CHECK_NAMES)}},
                'slack': {'type': 'object', 'additionalProperties': {'type': 'number',
                                                                     'exclusiveMinimum': 0}},
            },
        },
        'compare': {
            'type': 'object',
            'additionalProperties': False,
            'properties': {'f_tol': {'type': 'number', 'exclusiveMinimum': 0}},
        },
    },
}

_VALIDATOR = jsonschema.Draft7Validator(CONFIG_SCHEMA)

_INERTIAL_PARAM_KEYS = ('lambda', 'mu', 'alpha', 'beta', 'gamma', 'tau')


class ConfigError(ValueError):
    """Invalid configuration; ``str()`` is a single line."""


@dataclass
class SolverSpec:
    kind: str
    bppa: Optional[BppaConfig] = None
    params: Optional[InertialParams] = None
    options: Optional[InertialOptions] = None
    x0: Optional[list] = None
    y0: Optional[list] = None
    raw: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    problem_name: str
    problem_parameters: dict
    seed: int
    solvers: list
    trace_path: Optional[str] = None
    report_path: Optional[str] = None
    record_wall_time: bool = False
    checks_enabled: Optional[tuple] = None
    slack_overrides: dict = field(default_factory=dict)
    f_tol: float = 1e-8
    raw: dict = field(default_factory=dict)
    base_dir: Path = Path('.')

    @property
    def solver(self):
        return self.solvers[0]

    def resolve(self, p):
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


def _one_line(msg):
    return ' '.join(str(msg).split())


def _coerce_dataclass(cls, block, where):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(block) - known)
    if unknown:
        raise ConfigError('{}: unknown key(s) {}'.format(where, ', '.join(unknown)))
    values = {}
    for k, v in block.items():
        if v == 'inf':
            v = math.inf
        if isinstance(v, list):
            v = tuple(v)
        values[k] = v
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError('{}: {}'.format(where, _one_line(exc))) from None


def _parse_solver(block, idx):
    where = 'solver' if idx is None else 'solvers[{}]'.format(idx)
    kind = block['kind']
    cfg = dict(block.get('config', {}))
    spec = SolverSpec(kind=kind, x0=block.get('x0'), y0=block.get('y0'), raw=block)
    if kind in ('bppa', 'ppa'):
        if 'y0' in block:
            raise ConfigError('{}: y0 only applies to the inertial solver'.format(where))
        spec.bppa = _coerce_dataclass(BppaConfig, cfg, where + '.config')
        for name in ('eta', 'alpha', 'lambda_hat', 'lambda_bar', 'slack'):
            if not isinstance(getattr(spec.bppa, name), (int, float)):
                raise ConfigError('{}.config.{} must be a number'.format(where, name))
    else:
        missing = [k for k in _INERTIAL_PARAM_KEYS if k not in cfg]
        if missing:
            raise ConfigError('{}.config: inertial parameters missing: {}'
                              .format(where, ', '.join(missing)))
        pvals = {k: cfg.pop(k) for k in _INERTIAL_PARAM_KEYS}
        for k, v in pvals.items():
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError('{}.config.{} must be a number'.format(where, k))
        spec.params = InertialParams.from_dict(pvals)
        spec.options = _coerce_dataclass(InertialOptions, cfg, where + '.config')
    return spec


def parse_config(data, base_dir='.', seed_override=None):
    """Validate a decoded config object and build a :class:`RunConfig`."""
    e = jsonschema.exceptions.best_match(_VALIDATOR.iter_errors(data))
    if e is not None:
        loc = '/'.join(str(p) for p in e.absolute_path) or '<root>'
        raise ConfigError('{}: {}'.format(loc, _one_line(e.message)))
    if ('solver' in data) == ('solvers' in data):
        raise ConfigError('<root>: exactly one of "solver" or "solvers" is required')
    if 'solver' in data:
        solvers = [_parse_solver(data['solver'], None)]
    else:
        solvers = [_parse_solver(b, i) for i, b in enumerate(data['solvers'])]
    prob = data['problem']
    out = data.get('output', {})
    checks = data.get('checks', {})
    seed = prob.get('seed', 0) if seed_override is None else seed_override
    enabled = checks.get('enabled')
    return RunConfig(
        problem_name=prob['name'], problem_parameters=dict(prob.get('parameters', {})),
        seed=int(seed), solvers=solvers,
        trace_path=out.get('trace_path'), report_path=out.get('report_path'),
        record_wall_time=bool(out.get('record_wall_time', False)),
        checks_enabled=None if enabled is None else tuple(enabled),
        slack_overrides=dict(checks.get('slack', {})),
        f_tol=float(data.get('compare', {}).get('f_tol', 1e-8)),
        raw=data, base_dir=Path(base_dir))


def load_config(path, seed_override=None):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError('cannot read config {}: {}'.format(path, _one_line(exc))) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError('config is not valid JSON: {}'.format(_one_line(exc))) from None
    return parse_config(data, base_dir=path.parent, seed_override=seed_override)
