#pragma once

#include "ovpath/image.hpp"

#include <Eigen/Core>

#include <vector>

namespace ovpath {

using Point2 = Eigen::Vector2d;
using Polygon = std::vector<Point2>;  // open ring: last vertex != first

/// Shoelace signed area; positive for counter-clockwise in an x-right/y-up frame.
double signed_area(const Polygon& ring);

/// Even-odd rule.
bool contains(const Polygon& ring, const Point2& p);

Polygon convex_hull(std::vector<Point2> points);

struct Calipers {
  double max_diameter = 0.0;
  double min_width = 0.0;
};

/// Exact maximum Feret diameter and minimum width of a convex polygon.
Calipers rotating_calipers(const Polygon& hull);

/// Mask with interior holes filled (4-connected background reachable from
/// outside the bounding box stays background).
PixelSet fill_holes(const PixelSet& mask);

/// Length (in pixels) of the iso-line at 1/2 of the mask indicator sampled at
/// pixel centres, foreground 8-connected at saddles. Corresponds to tracing the
/// outer contour through boundary-crack midpoints.
double contour_length(const PixelSet& mask);

/// The same crack-midpoint contour, taken as an ordered ring and passed once
/// through a (1/4, 1/2, 1/4) vertex filter before measuring, which removes
/// most of the staircase excess on round shapes.
double smoothed_contour_length(const PixelSet& mask);

/// Outer boundary of an 8-connected mask along pixel edges, vertices at pixel
/// corners, collinear vertices removed, counter-clockwise in an x-right/y-up
/// frame (positive signed area).
Polygon trace_outline(const PixelSet& mask);

}  // namespace ovpath
