"""Unit conversions applied at I/O boundaries; internals are ft, slug, s, rad."""

import math

FT_PER_KNOT = 1.68781


def knots_to_fps(v_knots):
    return v_knots * FT_PER_KNOT


def fps_to_knots(v_fps):
    return v_fps / FT_PER_KNOT


def deg_to_rad(deg):
    return math.radians(deg)
