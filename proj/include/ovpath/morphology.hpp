#pragma once

#include "ovpath/image.hpp"

namespace ovpath {

/// Separable Gaussian blur with mirrored borders; kernel radius ceil(3 sigma).
Plane gaussian_blur(const Plane& in, double sigma_px);

/// Flat-disk erosion/dilation (disk = {dx^2 + dy^2 <= r^2}); pixels outside
/// the plane do not participate.
Plane erode_disk(const Plane& in, double radius_px);
Plane dilate_disk(const Plane& in, double radius_px);
Plane open_disk(const Plane& in, double radius_px);

/// Exact squared Euclidean distance from every pixel to the nearest pixel
/// where `source` is true (infinity when there is none).
Plane squared_distance_to(const PlaneT<bool>& source);

/// 1-D lower envelope pass used by squared_distance_to; exposed for tests.
void distance_transform_1d(const double* f, double* d, int n, int* v, double* z);

}  // namespace ovpath
