"""Trace CSV and report JSON persistence with atomic writes."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import IterateRecord, Trace

__all__ = ['TRACE_COLUMNS', 'TraceFormatError', 'trace_to_csv', 'write_trace_csv',
           'read_trace_csv', 'atomic_write_text', 'write_json', 'to_jsonable']

TRACE_COLUMNS = ('k', 'f', 'd_norm', 'm_k', 'eta_k', 'grad_res', 'sum_d_sq',
                 'energy_lo', 'energy_hi', 'lyapunov', 'coupling_norm', 'wall_time_s')

_ATTR = {'k': 'k', 'f': 'f_x', 'd_norm': 'd_norm', 'm_k': 'm_k', 'eta_k': 'eta_k',
         'grad_res': 'grad_residual', 'sum_d_sq': 'sum_d_sq', 'energy_lo': 'energy_lo',
         'energy_hi': 'energy_hi', 'lyapunov': 'lyapunov', 'coupling_norm': 'coupling_norm',
         'wall_time_s': 'wall_time_s'}
_INT_COLS = ('k', 'm_k')


class TraceFormatError(ValueError):
    pass


def _fmt(v):
    if v is None:
        return ''
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return '%.17g' % float(v)


def trace_to_csv(trace, wall_time=False):
    """Serialize a trace; ``wall_time_s`` stays empty unless ``wall_time``.

    Leaving timing out keeps the file byte-identical across reruns.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    w.writerow(TRACE_COLUMNS)
    for r in trace.records:
        row = []
        for col in TRACE_COLUMNS:
            if col == 'wall_time_s' and not wall_time:
                row.append('')
            else:
                row.append(_fmt(getattr(r, _ATTR[col])))
        w.writerow(row)
    return buf.getvalue()


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix='.' + path.name + '.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', newline='') as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trace_csv(trace, path, wall_time=False):
    atomic_write_text(path, trace_to_csv(trace, wall_time))


def _parse(col, s, lineno):
    if s == '':
        return None
    try:
        if col in _INT_COLS:
            return int(s)
        return float(s)
    except ValueError:
        raise TraceFormatError('line {}: bad {} value {!r}'.format(lineno, col, s)) from None


def read_trace_csv(path, solver='bppa', label=None):
    """Load a trace CSV; iterates are not stored in the file, so ``x`` is None."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise TraceFormatError('cannot read trace {}: {}'.format(path, exc)) from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise TraceFormatError('trace header does not match {}'.format(','.join(TRACE_COLUMNS)))
    trace = Trace(label or path.stem, solver, {})
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(TRACE_COLUMNS):
            raise TraceFormatError('line {}: expected {} fields, got {}'
                                   .format(lineno, len(TRACE_COLUMNS), len(row)))
        vals = {c: _parse(c, s, lineno) for c, s in zip(TRACE_COLUMNS, row)}
        if vals['k'] is None or vals['f'] is None:
            raise TraceFormatError('line {}: k and f are required'.format(lineno))
        energies = None
        if vals['energy_lo'] is not None or vals['energy_hi'] is not None:
            energies = (vals['energy_lo'], vals['energy_hi'])
        trace.records.append(IterateRecord(
            k=vals['k'], f_x=vals['f'], d_norm=vals['d_norm'], m_k=vals['m_k'],
            eta_k=vals['eta_k'], grad_residual=vals['grad_res'], sum_d_sq=vals['sum_d_sq'],
            energies=energies, lyapunov=vals['lyapunov'],
            coupling_norm=vals['coupling_norm'], wall_time_s=vals['wall_time_s']))
    if not trace.records:
        raise TraceFormatError('trace has no records')
    return trace


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return None
        if math.isinf(f):
            return 'inf' if f > 0 else '-inf'
        return f
    return obj


def write_json(path, data):
    atomic_write_text(path, json.dumps(to_jsonable(data), indent=2, sort_keys=True) + '\n')
