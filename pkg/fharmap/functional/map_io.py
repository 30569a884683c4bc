#!/usr/bin/env python3
#
# fharmap: numerical laboratory for F-harmonic sphere-valued maps
# Copyright 2026 fharmap developers
# All rights reserved.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.
#
#


import os
import json
import struct
import logging
import numpy as np
from .errors import FormatError, DimensionError
from .fields import GridDomain, SphereMap

MAGIC = b"FHM1"
SHAPE_CODES = {"box": 0, "ball": 1}
UNIT_TOL = 1e-9


def save(u, path):
    """
    Write a map in FHM1 layout: magic, n and q, grid sizes, spacing,
    origin, shape code and radius (little endian), then the values as
    row-major float64.
    """
    domain = u.domain
    n_dim = domain.n_dim
    header = MAGIC
    header += struct.pack("<ii", n_dim, u.q_dim)
    header += struct.pack("<" + "i" * n_dim, *domain.dims)
    header += struct.pack("<d", domain.spacing)
    header += struct.pack("<" + "d" * n_dim, *domain.origin)
    header += struct.pack("<i", SHAPE_CODES[domain.shape])
    radius = domain.radius if domain.radius is not None else 0.0
    header += struct.pack("<d", radius)
    with open(path, "wb") as write_file:
        write_file.write(header)
        write_file.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())
    logging.debug("Wrote map %s", path)


def _unpack(fmt, buffer, offset):
    size = struct.calcsize(fmt)
    if offset + size > len(buffer):
        raise FormatError("Map file header is truncated.")
    return struct.unpack(fmt, buffer[offset: offset + size]), offset + size


def load(path, expected_n=None):
    """Read a FHM1 map; the boundary mask is rebuilt from the grid."""
    if not os.path.exists(path):
        raise FormatError("Map file %s does not exist." % path)
    with open(path, "rb") as read_file:
        buffer = read_file.read()
    if buffer[:4] != MAGIC:
        raise FormatError("Map file %s does not start with %s." % (path, MAGIC))
    (n_dim, q_dim), offset = _unpack("<ii", buffer, 4)
    if n_dim not in [2, 3] or q_dim < 2:
        raise FormatError("Map file has n=%s q=%s." % (n_dim, q_dim))
    if expected_n is not None and n_dim != expected_n:
        raise DimensionError("Map has n=%s, expected n=%s." % (n_dim, expected_n))
    dims, offset = _unpack("<" + "i" * n_dim, buffer, offset)
    (spacing,), offset = _unpack("<d", buffer, offset)
    origin, offset = _unpack("<" + "d" * n_dim, buffer, offset)
    (shape_code,), offset = _unpack("<i", buffer, offset)
    (radius,), offset = _unpack("<d", buffer, offset)
    shapes = {code: name for name, code in SHAPE_CODES.items()}
    if shape_code not in shapes:
        raise FormatError("Map file has shape code %s." % shape_code)
    expected = int(np.prod(dims)) * q_dim * 8
    if len(buffer) - offset != expected:
        raise FormatError(
            "Map file holds %i value bytes, expected %i." % (len(buffer) - offset, expected)
        )
    values = np.frombuffer(buffer, dtype="<f8", offset=offset).reshape(tuple(dims) + (q_dim,))
    deviation = np.max(np.abs(np.linalg.norm(values, axis=-1) - 1))
    if not deviation <= UNIT_TOL:
        raise FormatError("Map values leave the sphere by %s." % deviation)
    shape = shapes[shape_code]
    domain = GridDomain(
        n_dim, dims, spacing, origin=origin, shape=shape,
        radius=radius if shape == "ball" else None,
    )
    return SphereMap(domain, values.astype(float))


def export_json(u, path):
    with open(path, "w") as write_file:
        json.dump({"domain": u.domain.describe(), "values": u.values.tolist()}, write_file)


def import_json(path):
    with open(path) as read_file:
        try:
            data = json.load(read_file)
        except ValueError as error:
            raise FormatError("Map file %s is not valid JSON: %s" % (path, error))
    try:
        domain_data = data["domain"]
        domain = GridDomain(
            domain_data["n"], domain_data["dims"], domain_data["spacing"],
            origin=domain_data["origin"], shape=domain_data["shape"],
            radius=domain_data["radius"],
        )
        values = np.array(data["values"], dtype=float)
    except (KeyError, TypeError) as error:
        raise FormatError("Map file %s misses %s." % (path, error))
    return SphereMap(domain, values)
