"""Immutable MIP data model, MPS ingestion/serialization, feasibility
evaluation and sub-problem construction.

Objectives are stored in minimization form: a maximization model keeps
`sense == MAXIMIZE` for reporting but its objective coefficients and offset
are negated. Use `external_objective` to turn an internal value back into
the user's sense.
"""
import json
import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from parbalans.cli.actions.utils import ParBalansException

__all__ = ['Variable', 'LinearConstraint', 'MipModel', 'Solution', 'NeighborhoodSpec',
           'build_model', 'parse_mps', 'read_mps', 'write_mps', 'evaluate',
           'apply_neighborhood', 'external_objective', 'model_to_dict', 'dump_json']

log = logging.getLogger(__name__)

CONTINUOUS, INTEGER, BINARY = 'continuous', 'integer', 'binary'
KINDS = (CONTINUOUS, INTEGER, BINARY)
MINIMIZE, MAXIMIZE = 'minimize', 'maximize'
LE, GE, EQ = '<=', '>=', '='
RELATIONS = (LE, GE, EQ)

FEAS_TOL = 1e-7
BOUND_TOL = 1e-9
INT_TOL = 1e-6

INF = float('inf')

_MPS_ROW_TYPES = {'L': LE, 'G': GE, 'E': EQ}
_MPS_ROW_CODES = {LE: 'L', GE: 'G', EQ: 'E'}


class ModelException(ParBalansException):

    def __init__(self, msg, lineno=None):
        if lineno is not None:
            msg = "line %s: %s" % (lineno, msg)
        super(ModelException, self).__init__(msg)
        self.lineno = lineno


class MalformedSection(ModelException):
    pass


class DuplicateName(ModelException):
    pass


class DanglingReference(ModelException):
    pass


class DimensionMismatch(ModelException):
    pass


class ConflictingFixing(ModelException):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = CONTINUOUS
    lower: float = 0.0
    upper: float = INF

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelException("Variable '%s' has unknown kind '%s'" % (self.name, self.kind))
        lower, upper = float(self.lower), float(self.upper)
        if self.kind == BINARY:
            lower, upper = max(lower, 0.0), min(upper, 1.0)
        if lower > upper:
            raise ModelException("Variable '%s' has lower bound %r above upper bound %r"
                                 % (self.name, lower, upper))
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @property
    def is_integer(self):
        return self.kind != CONTINUOUS


@dataclass(frozen=True)
class LinearConstraint:
    name: str
    coefficients: dict
    relation: str
    rhs: float = 0.0

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ModelException("Constraint '%s' has unknown relation '%s'" % (self.name, self.relation))
        coefficients = dict((int(j), float(v)) for j, v in self.coefficients.items() if v != 0)
        if not coefficients:
            raise ModelException("Constraint '%s' has no nonzero coefficient" % self.name)
        object.__setattr__(self, 'coefficients', coefficients)
        object.__setattr__(self, 'rhs', float(self.rhs))


DenseRows = namedtuple('DenseRows', 'matrix rhs le ge eq')


@dataclass(frozen=True)
class MipModel:
    """A linear model in minimization form. Arrays derived from it are cached
    on first use; the model itself is never mutated."""
    name: str
    sense: str
    variables: tuple
    constraints: tuple
    objective: dict
    offset: float = 0.0

    def __post_init__(self):
        if self.sense not in (MINIMIZE, MAXIMIZE):
            raise ModelException("Unknown objective sense '%s'" % self.sense)
        object.__setattr__(self, 'variables', tuple(self.variables))
        object.__setattr__(self, 'constraints', tuple(self.constraints))
        object.__setattr__(self, 'objective',
                           dict((int(j), float(v)) for j, v in self.objective.items() if v != 0))
        object.__setattr__(self, 'offset', float(self.offset))
        n = len(self.variables)
        seen = set()
        for var in self.variables:
            if var.name in seen:
                raise DuplicateName("Duplicate variable name '%s'" % var.name)
            seen.add(var.name)
        seen = set()
        for con in self.constraints:
            if con.name in seen:
                raise DuplicateName("Duplicate constraint name '%s'" % con.name)
            seen.add(con.name)
            for j in con.coefficients:
                if not 0 <= j < n:
                    raise DanglingReference("Constraint '%s' references variable index %s" % (con.name, j))
        for j in self.objective:
            if not 0 <= j < n:
                raise DanglingReference("Objective references variable index %s" % j)

    @property
    def n_vars(self):
        return len(self.variables)

    @cached_property
    def index(self):
        return dict((var.name, j) for j, var in enumerate(self.variables))

    @cached_property
    def lower_bounds(self):
        return _frozen(np.array([v.lower for v in self.variables], dtype=float))

    @cached_property
    def upper_bounds(self):
        return _frozen(np.array([v.upper for v in self.variables], dtype=float))

    @cached_property
    def integer_mask(self):
        return _frozen(np.array([v.is_integer for v in self.variables], dtype=bool))

    @cached_property
    def binary_mask(self):
        """Integer variables confined to {0, 1}, declared binary or not"""
        return _frozen(np.array([v.is_integer and v.lower >= 0 and v.upper <= 1
                                 for v in self.variables], dtype=bool))

    @cached_property
    def objective_vector(self):
        c = np.zeros(self.n_vars)
        for j, v in self.objective.items():
            c[j] = v
        return _frozen(c)

    @cached_property
    def rows(self):
        m = len(self.constraints)
        matrix = np.zeros((m, self.n_vars))
        rhs = np.zeros(m)
        relations = []
        for i, con in enumerate(self.constraints):
            for j, v in con.coefficients.items():
                matrix[i, j] = v
            rhs[i] = con.rhs
            relations.append(con.relation)
        relations = np.array(relations, dtype=object)
        return DenseRows(_frozen(matrix), _frozen(rhs), relations == LE, relations == GE,
                         relations == EQ)


@dataclass(frozen=True, eq=False)
class Solution:
    values: np.ndarray
    objective: float
    feasible: bool
    integral: bool


@dataclass(frozen=True)
class NeighborhoodSpec:
    fixings: dict = field(default_factory=dict)
    bound_overrides: dict = field(default_factory=dict)
    extra_constraints: tuple = ()
    # (coefficients, offset) in minimization form
    objective_override: tuple = None
    tag: str = ''


def _frozen(array):
    array.flags.writeable = False
    return array


def external_objective(model, value):
    """Convert an internal (minimization form) objective value to the model's sense"""
    return -value if model.sense == MAXIMIZE else value


def build_model(name, sense, variables, constraints, objective, offset=0.0):
    """Build a model from an objective written in its own sense"""
    if sense == MAXIMIZE:
        objective = dict((j, -v) for j, v in objective.items())
        offset = -offset
    return MipModel(name, sense, tuple(variables), tuple(constraints), objective, offset)


def evaluate(model, values):
    """Compute objective, feasibility and integrality of a full assignment.
    Reports on infeasible input rather than raising."""
    x = np.array(values, dtype=float)
    if x.ndim != 1 or x.shape[0] != model.n_vars:
        raise DimensionMismatch("Expected %s values, got shape %s" % (model.n_vars, x.shape))
    objective = float(model.objective_vector @ x) + model.offset
    feasible = bool(np.all(x >= model.lower_bounds - BOUND_TOL) and
                    np.all(x <= model.upper_bounds + BOUND_TOL))
    if feasible and model.constraints:
        rows = model.rows
        activity = rows.matrix @ x
        feasible = bool(np.all(activity[rows.le] <= rows.rhs[rows.le] + FEAS_TOL) and
                        np.all(activity[rows.ge] >= rows.rhs[rows.ge] - FEAS_TOL) and
                        np.all(np.abs(activity[rows.eq] - rows.rhs[rows.eq]) <= FEAS_TOL))
    ints = x[model.integer_mask]
    integral = bool(np.all(np.abs(ints - np.round(ints)) <= INT_TOL))
    return Solution(_frozen(x), objective, feasible, integral)


def apply_neighborhood(model, spec):
    """Materialize a neighborhood as a new model. Fixings become equal bounds,
    overrides are intersected with the original bounds, so the derived model
    never relaxes the original."""
    variables = list(model.variables)
    for j, (lower, upper) in spec.bound_overrides.items():
        var = variables[j]
        lower, upper = max(var.lower, lower), min(var.upper, upper)
        if lower > upper + BOUND_TOL:
            raise ConflictingFixing("Bounds [%r, %r] for '%s' leave no feasible value"
                                    % (lower, upper, var.name))
        variables[j] = replace(var, lower=lower, upper=max(lower, upper))
    for j, value in spec.fixings.items():
        var = model.variables[j]
        if value < var.lower - BOUND_TOL or value > var.upper + BOUND_TOL:
            raise ConflictingFixing("Fixing '%s' at %r outside its bounds [%r, %r]"
                                    % (var.name, value, var.lower, var.upper))
        if var.is_integer:
            if abs(value - round(value)) > INT_TOL:
                raise ConflictingFixing("Fixing integer '%s' at fractional %r" % (var.name, value))
            value = float(round(value))
        variables[j] = replace(variables[j], lower=value, upper=value)
    constraints = model.constraints + tuple(spec.extra_constraints)
    sense, objective, offset = model.sense, model.objective, model.offset
    if spec.objective_override is not None:
        objective, offset = spec.objective_override
        sense = MINIMIZE
    return MipModel(model.name, sense, tuple(variables), constraints, objective, offset)


## MPS ##

def read_mps(fnm):
    """Parse an MPS file from disk"""
    with open(fnm) as f:
        return parse_mps(f)


def _number(token, lineno):
    try:
        return float(token)
    except ValueError:
        raise MalformedSection("Bad number '%s'" % token, lineno)


def _pairs(tokens, lineno, section):
    """Split `[setname] name value [name value]` into (name, value) pairs"""
    if len(tokens) not in (2, 3, 4, 5):
        raise MalformedSection("Malformed %s entry" % section, lineno)
    if len(tokens) % 2:
        tokens = tokens[1:]
    return [(tokens[k], _number(tokens[k + 1], lineno)) for k in range(0, len(tokens), 2)]


def _parse_sense(token, lineno):
    token = token.upper()
    if token in ('MAX', 'MAXIMIZE'):
        return MAXIMIZE
    if token in ('MIN', 'MINIMIZE'):
        return MINIMIZE
    raise MalformedSection("Unknown objective sense '%s'" % token, lineno)


def parse_mps(text):
    """
    Parse free-format MPS (NAME, OBJSENSE, ROWS, COLUMNS with INTORG/INTEND
    markers, RHS, RANGES, BOUNDS, ENDATA) into a validated model.

    @param text: MPS content as a string or a readable text stream
    """
    lines = text.splitlines() if isinstance(text, str) else text.read().splitlines()

    name, sense, section = '', MINIMIZE, None
    obj_row, free_rows = None, set()
    rows = {}           # row name -> [relation, coefficients, rhs]
    row_order = []
    ranges = {}
    columns = {}        # column name -> index
    kinds, lower, upper, lower_set = [], [], [], []
    objective, offset = {}, 0.0
    integer_block, last_column = False, None
    ended = False

    for lineno, raw in enumerate(lines, 1):
        if not raw.strip() or raw.lstrip().startswith('*'):
            continue
        tokens = raw.split()
        if not raw[0].isspace():
            head = tokens[0].upper()
            if head == 'NAME':
                name = tokens[1] if len(tokens) > 1 else ''
                section = head
            elif head in ('ROWS', 'COLUMNS', 'RHS', 'RANGES', 'BOUNDS'):
                section = head
            elif head == 'OBJSENSE':
                section = head
                if len(tokens) > 1:
                    sense = _parse_sense(tokens[1], lineno)
            elif head == 'ENDATA':
                ended = True
                break
            else:
                raise MalformedSection("Unknown section header '%s'" % tokens[0], lineno)
            continue

        if section == 'OBJSENSE':
            sense = _parse_sense(tokens[0], lineno)

        elif section == 'ROWS':
            if len(tokens) != 2:
                raise MalformedSection("Malformed ROWS entry", lineno)
            rtype, rname = tokens[0].upper(), tokens[1]
            if rname in rows or rname == obj_row or rname in free_rows:
                raise DuplicateName("Duplicate row name '%s'" % rname, lineno)
            if rtype == 'N':
                if obj_row is None:
                    obj_row = rname
                else:
                    free_rows.add(rname)
            elif rtype in _MPS_ROW_TYPES:
                rows[rname] = [_MPS_ROW_TYPES[rtype], {}, 0.0]
                row_order.append(rname)
            else:
                raise MalformedSection("Unknown row type '%s'" % tokens[0], lineno)

        elif section == 'COLUMNS':
            if len(tokens) >= 3 and tokens[1].strip("'\"").upper() == 'MARKER':
                marker = tokens[2].strip("'\"").upper()
                if marker == 'INTORG':
                    integer_block = True
                elif marker == 'INTEND':
                    integer_block = False
                else:
                    raise MalformedSection("Unknown marker '%s'" % tokens[2], lineno)
                continue
            if len(tokens) not in (3, 5):
                raise MalformedSection("Truncated or malformed COLUMNS entry", lineno)
            cname = tokens[0]
            if cname != last_column:
                if cname in columns:
                    raise DuplicateName("Column '%s' appears in separate COLUMNS blocks" % cname,
                                        lineno)
                columns[cname] = len(kinds)
                kinds.append(INTEGER if integer_block else CONTINUOUS)
                lower.append(0.0)
                upper.append(INF)
                lower_set.append(False)
                last_column = cname
            j = columns[cname]
            for rname, value in _pairs(tokens, lineno, 'COLUMNS'):
                if rname == obj_row:
                    target = objective
                elif rname in free_rows:
                    continue
                elif rname in rows:
                    target = rows[rname][1]
                else:
                    raise DanglingReference("COLUMNS entry for unknown row '%s'" % rname, lineno)
                if j in target:
                    raise DuplicateName("Repeated entry for column '%s' in row '%s'"
                                        % (cname, rname), lineno)
                if value != 0:
                    target[j] = value

        elif section == 'RHS':
            for rname, value in _pairs(tokens, lineno, 'RHS'):
                if rname == obj_row:
                    offset = -value
                elif rname in rows:
                    rows[rname][2] = value
                elif rname not in free_rows:
                    raise DanglingReference("RHS entry for unknown row '%s'" % rname, lineno)

        elif section == 'RANGES':
            for rname, value in _pairs(tokens, lineno, 'RANGES'):
                if rname not in rows:
                    raise DanglingReference("RANGES entry for unknown row '%s'" % rname, lineno)
                ranges[rname] = value

        elif section == 'BOUNDS':
            btype = tokens[0].upper()
            if btype in ('FR', 'MI', 'PL', 'BV'):
                if len(tokens) == 2:
                    cname = tokens[1]
                elif len(tokens) in (3, 4):
                    cname = tokens[2]
                else:
                    raise MalformedSection("Malformed BOUNDS entry", lineno)
                value = None
            elif btype in ('UP', 'LO', 'FX', 'LI', 'UI'):
                if len(tokens) == 4:
                    cname, value = tokens[2], _number(tokens[3], lineno)
                elif len(tokens) == 3:
                    cname, value = tokens[1], _number(tokens[2], lineno)
                else:
                    raise MalformedSection("Malformed BOUNDS entry", lineno)
            else:
                raise MalformedSection("Unsupported bound type '%s'" % tokens[0], lineno)
            if cname not in columns:
                raise DanglingReference("BOUNDS entry for unknown column '%s'" % cname, lineno)
            j = columns[cname]
            if btype in ('UP', 'UI'):
                upper[j] = value
                if value < 0 and not lower_set[j]:
                    lower[j] = -INF
            elif btype in ('LO', 'LI'):
                lower[j], lower_set[j] = value, True
            elif btype == 'FX':
                lower[j], upper[j], lower_set[j] = value, value, True
            elif btype == 'FR':
                lower[j], upper[j], lower_set[j] = -INF, INF, True
            elif btype == 'MI':
                lower[j], lower_set[j] = -INF, True
            elif btype == 'PL':
                upper[j] = INF
            elif btype == 'BV':
                kinds[j] = BINARY
                lower[j], upper[j], lower_set[j] = 0.0, 1.0, True
            if btype in ('LI', 'UI') and kinds[j] == CONTINUOUS:
                kinds[j] = INTEGER

        else:
            raise MalformedSection("Data line outside of any section", lineno)

    if not ended:
        raise MalformedSection("Missing ENDATA", len(lines))

    names = sorted(columns, key=columns.get)
    variables = [Variable(cname, kinds[j], lower[j], upper[j]) for j, cname in enumerate(names)]
    constraints = []
    for rname in row_order:
        relation, coefficients, rhs = rows[rname]
        if not coefficients:
            log.warning("Dropping empty row '%s'", rname)
            continue
        if rname in ranges and not (relation == EQ and ranges[rname] == 0):
            width = abs(ranges[rname])
            if relation == LE or (relation == EQ and ranges[rname] < 0):
                lo, hi = rhs - width, rhs
            else:
                lo, hi = rhs, rhs + width
            constraints.append(LinearConstraint(rname + '_lo', coefficients, GE, lo))
            constraints.append(LinearConstraint(rname + '_hi', coefficients, LE, hi))
        else:
            constraints.append(LinearConstraint(rname, coefficients, relation, rhs))
    return build_model(name, sense, variables, constraints, objective, offset)


def _fmt(value):
    return repr(float(value))


def write_mps(model):
    """Serialize a model to free-format MPS text; parse_mps reads it back
    into an equal model."""
    out = ['NAME %s' % model.name if model.name else 'NAME']
    if model.sense == MAXIMIZE:
        out += ['OBJSENSE', '    MAX']
    sign = -1.0 if model.sense == MAXIMIZE else 1.0
    row_names = set(con.name for con in model.constraints)
    obj_name = 'obj'
    while obj_name in row_names:
        obj_name += '_'

    out.append('ROWS')
    out.append(' N  %s' % obj_name)
    for con in model.constraints:
        out.append(' %s  %s' % (_MPS_ROW_CODES[con.relation], con.name))

    entries = [[] for _ in model.variables]
    for j, v in sorted(model.objective.items()):
        entries[j].append((obj_name, sign * v))
    for con in model.constraints:
        for j, v in con.coefficients.items():
            entries[j].append((con.name, v))

    out.append('COLUMNS')
    in_block = False
    for j, var in enumerate(model.variables):
        if var.is_integer != in_block:
            out.append("    MARKER  'MARKER'  '%s'" % ('INTORG' if var.is_integer else 'INTEND'))
            in_block = var.is_integer
        for rname, value in entries[j] or [(obj_name, 0.0)]:
            out.append('    %s  %s  %s' % (var.name, rname, _fmt(value)))
    if in_block:
        out.append("    MARKER  'MARKER'  'INTEND'")

    out.append('RHS')
    if model.offset:
        out.append('    RHS  %s  %s' % (obj_name, _fmt(-sign * model.offset)))
    for con in model.constraints:
        if con.rhs:
            out.append('    RHS  %s  %s' % (con.name, _fmt(con.rhs)))

    out.append('BOUNDS')
    for var in model.variables:
        if var.kind == BINARY:
            out.append(' BV BND  %s' % var.name)
            if var.lower > 0:
                out.append(' LO BND  %s  %s' % (var.name, _fmt(var.lower)))
            if var.upper < 1:
                out.append(' UP BND  %s  %s' % (var.name, _fmt(var.upper)))
        elif var.lower == var.upper:
            out.append(' FX BND  %s  %s' % (var.name, _fmt(var.lower)))
        elif var.lower == -INF and var.upper == INF:
            out.append(' FR BND  %s' % var.name)
        else:
            if var.lower == -INF:
                out.append(' MI BND  %s' % var.name)
            elif var.lower != 0:
                out.append(' LO BND  %s  %s' % (var.name, _fmt(var.lower)))
            if var.upper != INF:
                out.append(' UP BND  %s  %s' % (var.name, _fmt(var.upper)))
    out.append('ENDATA')
    return '\n'.join(out) + '\n'


## JSON dump ##

def _bound(value):
    return None if math.isinf(value) else value


def model_to_dict(model):
    """Debug dump of a model in its own objective sense (infinite bounds as null)"""
    names = [var.name for var in model.variables]
    sign = -1.0 if model.sense == MAXIMIZE else 1.0
    return {
        'name': model.name,
        'sense': model.sense,
        'variables': [{'name': var.name, 'kind': var.kind,
                       'lower': _bound(var.lower), 'upper': _bound(var.upper)}
                      for var in model.variables],
        'constraints': [{'name': con.name, 'relation': con.relation, 'rhs': con.rhs,
                         'coefficients': dict((names[j], v) for j, v in con.coefficients.items())}
                        for con in model.constraints],
        'objective': {'coefficients': dict((names[j], sign * v) for j, v in model.objective.items()),
                      'offset': sign * model.offset},
    }


def dump_json(model, fp):
    json.dump(model_to_dict(model), fp, indent=2, sort_keys=True)
